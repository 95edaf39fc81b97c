use std::fs;
use std::path::Path;
use std::process::Command;

use maskfusion::dsp::Waveform;
use maskfusion::estimator::{predict_masks, read_checkpoint};
use maskfusion::evalkit::ManifestRecord;
use maskfusion::masks::{enhance, read_mask_dump, MaskKind};
use maskfusion::SAMPLE_RATE;
use maskfusion_cli::commands::*;
use maskfusion_cli::config::Config;
use maskfusion_cli::corpus_io::{read_corpus, MANIFEST_NAME};
use maskfusion_cli::wav::{encode_wav, read_wav, write_wav};
use tempfile::TempDir;

fn small() -> Config {
    let mut c = Config::default();
    c.apply_text("seed = 3\nn_train = 4\nn_dev = 2\nn_test = 1\nduration_s = 0.5\nepochs = 2\nhidden1 = 16\nhidden2 = 12\ncontext = 3\nbatch_frames = 32\ndeltas = 0.1, 0.5, 0.9\ngammas = 0, 0.5, 1\n")
        .unwrap();
    c
}

fn corpus(dir: &Path) -> std::path::PathBuf {
    let root = dir.join("corpus");
    cmd_synth(&small(), &root).unwrap();
    root
}

fn trained(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let root = corpus(dir);
    let ckpt = dir.join("model.mfnn");
    cmd_train(&small(), &root, &ckpt, &dir.join("train.log")).unwrap();
    (root, ckpt)
}

fn write_pair(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let root = corpus(dir);
    let c = read_corpus(&root).unwrap();
    let (clean, noise) = (dir.join("clean.wav"), dir.join("noise.wav"));
    write_wav(&clean, &c.test[0].clean).unwrap();
    write_wav(&noise, &c.test[0].noise).unwrap();
    (clean, noise)
}

#[test]
fn synth_is_deterministic_and_reflects_config() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cmd_synth(&small(), &a).unwrap(), 4 + 2 + 4);
    cmd_synth(&small(), &b).unwrap();
    let ma = fs::read(a.join(MANIFEST_NAME)).unwrap();
    assert_eq!(ma, fs::read(b.join(MANIFEST_NAME)).unwrap());
    let records = ManifestRecord::parse_all(std::str::from_utf8(&ma).unwrap()).unwrap();
    assert_eq!(records.len(), 3 * 10);
    let mut snrs: Vec<f64> = records.iter().map(|r| r.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    assert_eq!(snrs, vec![-5.0, 0.0, 5.0, 10.0]);
    for r in &records {
        assert_eq!(
            fs::read(a.join(&r.path)).unwrap(),
            fs::read(b.join(&r.path)).unwrap()
        );
    }
    let loaded = read_corpus(&a).unwrap();
    assert_eq!(
        (loaded.train.len(), loaded.dev.len(), loaded.test.len()),
        (4, 2, 4)
    );
}

#[test]
fn default_config_counts_eighty_utterances() {
    let synth = Config::default().synth_config();
    assert_eq!(synth.n_train + synth.n_dev + synth.n_test, 80);
}

#[test]
fn oracle_masks() {
    let tmp = TempDir::new().unwrap();
    let (clean, noise) = write_pair(tmp.path());
    let run = |mask, gamma: f64, out: &str| {
        let mut cfg = small();
        cfg.gamma = gamma;
        let out = tmp.path().join(out);
        let dump = tmp.path().join(format!("{}.mfmk", out.display()));
        let report = cmd_oracle(
            &cfg,
            &OracleArgs {
                clean: &clean,
                noise: &noise,
                snr_db: 0.0,
                mask,
                out: &out,
                dump: Some(&dump),
            },
        )
        .unwrap();
        (
            report,
            fs::read(out).unwrap(),
            read_mask_dump(&fs::read(dump).unwrap()).unwrap(),
        )
    };
    let (irm, irm_bytes, _) = run(OracleMask::Irm, 0.5, "irm.wav");
    assert!(irm.after.si_sdr > irm.before.si_sdr, "{irm}");
    assert!(irm.to_string().starts_with("si-sdr "));
    let (_, fused_bytes, _) = run(OracleMask::Fuse, 1.0, "fuse.wav");
    assert_eq!(irm_bytes, fused_bytes);
    let (_, _, tbm_mask) = run(OracleMask::Tbm, 0.5, "tbm.wav");
    assert_eq!(tbm_mask.kind(), MaskKind::Binary);
    assert!(tbm_mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn train_enhance_and_sweep() {
    let tmp = TempDir::new().unwrap();
    let (root, ckpt) = trained(tmp.path());
    let log = fs::read_to_string(tmp.path().join("train.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch=")).count(), 2);
    let first_dev: f64 = log
        .lines()
        .find(|l| l.starts_with("epoch=1 "))
        .and_then(|l| l.split("dev_loss=").nth(1))
        .and_then(|v| v.split(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    let model = read_checkpoint(&fs::read(&ckpt).unwrap()).unwrap();

    // enhancement needs no clean reference; gamma = 1 equals the ratio head alone
    let noisy = tmp.path().join("noisy.wav");
    let corpus = read_corpus(&root).unwrap();
    write_wav(&noisy, &corpus.test[1].noisy).unwrap();
    let mut cfg = small();
    cfg.gamma = 1.0;
    let out = tmp.path().join("enh.wav");
    let dump = tmp.path().join("irm.mfmk");
    let enhanced = cmd_enhance(
        &cfg,
        &noisy,
        &ckpt,
        &out,
        MaskDumps {
            irm: Some(&dump),
            ..MaskDumps::default()
        },
    )
    .unwrap();
    let input = read_wav(&noisy).unwrap();
    assert_eq!(enhanced.len(), input.len());
    let (irm, _) = predict_masks(&model.params, &input, &model.stats).unwrap();
    assert_eq!(enhanced, enhance(&input, &irm).unwrap());
    assert_eq!(
        read_mask_dump(&fs::read(&dump).unwrap()).unwrap().dim(),
        irm.dim()
    );

    // retained model is no worse on dev than epoch 1
    let retained = log
        .lines()
        .rfind(|l| l.ends_with("retained=true"))
        .and_then(|l| l.split("dev_loss=").nth(1))
        .and_then(|v| v.split(' ').next())
        .unwrap()
        .parse::<f64>()
        .unwrap();
    assert!(retained <= first_dev);

    let (csv, table) = (tmp.path().join("s.csv"), tmp.path().join("s.txt"));
    let report = cmd_sweep(&small(), &root, MaskOrigin::Checkpoint(&ckpt), &csv, &table).unwrap();
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 1 + 3 * 3 * 4);
    assert_eq!(csv_text, report.to_csv());
    let irm_row = &report.baseline("IRM").unwrap().values;
    for d in 0..3 {
        assert_eq!(report.row(d, 2), &irm_row[..]);
    }
    assert!(fs::read_to_string(&table).unwrap().contains("delta=0.5"));
}

#[test]
fn oracle_sweep_needs_no_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let root = corpus(tmp.path());
    let (csv, table) = (tmp.path().join("s.csv"), tmp.path().join("s.txt"));
    let report = cmd_sweep(&small(), &root, MaskOrigin::Oracle, &csv, &table).unwrap();
    assert_eq!(report.cell_count(), 36);
    let irm = &report.baseline("IRM").unwrap().values;
    let noisy = &report.baseline("Noisy").unwrap().values;
    assert!(irm.iter().zip(noisy).all(|(i, n)| i > n));
}

#[test]
fn missing_inputs_fail_before_writing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x.wav");
    let missing = tmp.path().join("nope.wav");
    let e = cmd_enhance(&small(), &missing, &missing, &out, MaskDumps::default()).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert!(!out.exists());
    let e = cmd_train(
        &small(),
        tmp.path(),
        &tmp.path().join("m"),
        &tmp.path().join("l"),
    )
    .unwrap_err();
    assert_eq!(e.exit_code(), 3);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maskfusion"))
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["synth", "--out"])
        .arg(tmp.path().join("c"))
        .args(["--set", "warmup=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warmup"));
    assert_eq!(
        bin().arg("frobnicate").output().unwrap().status.code(),
        Some(2)
    );

    // stereo input: data error naming the channel count and the byte offset
    let mut stereo = encode_wav(&Waveform::new(vec![0.1; 64], SAMPLE_RATE).unwrap()).unwrap();
    stereo[22] = 2;
    let bad = tmp.path().join("stereo.wav");
    fs::write(&bad, &stereo).unwrap();
    let out = bin()
        .args(["oracle", "--snr", "-5", "--clean"])
        .arg(&bad)
        .arg("--noise")
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("o.wav"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("byte 22") && err.contains("2 channels"),
        "{err}"
    );

    // lambda != 0 is unsupported
    let root = corpus(tmp.path());
    let out = bin()
        .arg("train")
        .arg("--corpus")
        .arg(&root)
        .arg("--checkpoint")
        .arg(tmp.path().join("m.mfnn"))
        .args(["--set", "lambda=0.1"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn binary_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = tmp.path().join("run.cfg");
    fs::write(
        &cfg_path,
        "# tiny run\nseed = 1\nn_train = 3\nn_dev = 1\nn_test = 1\nduration_s = 0.5\nhidden1 = 8\nhidden2 = 8\ncontext = 1\ndeltas = 0.5\ngammas = 0.5, 1\n",
    )
    .unwrap();
    let root = tmp.path().join("corpus");
    let ok = |cmd: &mut Command| {
        let out = cmd.output().unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    ok(bin()
        .arg("synth")
        .arg("--out")
        .arg(&root)
        .arg("--config")
        .arg(&cfg_path));
    let ckpt = tmp.path().join("m.mfnn");
    let log = ok(bin()
        .arg("train")
        .arg("--corpus")
        .arg(&root)
        .arg("--checkpoint")
        .arg(&ckpt)
        .args(["--epochs", "1"])
        .arg("--config")
        .arg(&cfg_path));
    assert_eq!(log.lines().count(), 2);
    assert!(tmp.path().join("m.mfnn.log").exists());
    let table = ok(bin()
        .arg("sweep")
        .arg("--corpus")
        .arg(&root)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--csv")
        .arg(tmp.path().join("s.csv"))
        .arg("--table")
        .arg(tmp.path().join("s.txt"))
        .arg("--config")
        .arg(&cfg_path));
    assert!(table.contains("AVG"));
}
