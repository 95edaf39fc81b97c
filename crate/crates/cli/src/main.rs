use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maskfusion_cli::commands::{
    cmd_enhance, cmd_oracle, cmd_sweep, cmd_synth, cmd_train, default_log_path, MaskDumps,
    MaskOrigin, OracleArgs, OracleMask,
};
use maskfusion_cli::config::Config;
use maskfusion_cli::{fsio, CliResult};

#[derive(Parser)]
#[command(
    name = "maskfusion",
    version,
    about = "Ratio/binary mask fusion for speech enhancement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=5`. Repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/dev/test corpus with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Mix clean speech with noise and enhance with an oracle mask.
    Oracle {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value = "irm")]
        mask: OracleMask,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the applied mask in the binary dump format.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the two-head estimator on a corpus directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the checkpoint path with `.log` appended.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Enhance a noisy file with predicted, fused masks.
    Enhance {
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dump_irm: Option<PathBuf>,
        #[arg(long)]
        dump_tbm: Option<PathBuf>,
        #[arg(long)]
        dump_fused: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep threshold and scale over the test split.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Use oracle masks instead of a trained model.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common, flags: &[(&str, Option<String>)]) -> CliResult<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &common.config {
        cfg.apply_text(&fsio::read_text(path)?)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.apply_overrides(&common.overrides)?;
    Ok(cfg)
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { out, common } => {
            let cfg = load_config(&common, &[])?;
            let n = cmd_synth(&cfg, &out)?;
            println!("wrote {n} mixtures to {}", out.display());
        }
        Command::Oracle {
            clean,
            noise,
            snr,
            mask,
            delta,
            gamma,
            out,
            dump,
            common,
        } => {
            let cfg = load_config(&common, &[("delta", opt(&delta)), ("gamma", opt(&gamma))])?;
            let args = OracleArgs {
                clean: &clean,
                noise: &noise,
                snr_db: snr,
                mask,
                out: &out,
                dump: dump.as_deref(),
            };
            println!("{}", cmd_oracle(&cfg, &args)?);
        }
        Command::Train {
            corpus,
            checkpoint,
            log,
            epochs,
            common,
        } => {
            let cfg = load_config(&common, &[("epochs", opt(&epochs))])?;
            let log = log.unwrap_or_else(|| default_log_path(&checkpoint));
            let record = cmd_train(&cfg, &corpus, &checkpoint, &log)?;
            print!("{}", record.to_text());
        }
        Command::Enhance {
            noisy,
            checkpoint,
            out,
            delta,
            gamma,
            dump_irm,
            dump_tbm,
            dump_fused,
            common,
        } => {
            let cfg = load_config(&common, &[("delta", opt(&delta)), ("gamma", opt(&gamma))])?;
            let dumps = MaskDumps {
                irm: dump_irm.as_deref(),
                tbm: dump_tbm.as_deref(),
                fused: dump_fused.as_deref(),
            };
            let w = cmd_enhance(&cfg, &noisy, &checkpoint, &out, dumps)?;
            println!("wrote {} samples to {}", w.len(), out.display());
        }
        Command::Sweep {
            corpus,
            checkpoint,
            oracle: _,
            csv,
            table,
            common,
        } => {
            let cfg = load_config(&common, &[])?;
            let origin = match checkpoint.as_deref() {
                Some(p) => MaskOrigin::Checkpoint(p),
                None => MaskOrigin::Oracle,
            };
            let report = cmd_sweep(&cfg, &corpus, origin, &csv, &table)?;
            print!("{}", report.render_text(cfg.table_delta, cfg.table_gamma));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maskfusion: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
