//! Multi-target training losses: summed squared error on the ratio mask,
//! summed binary cross entropy on the binary mask, and their weighted sum.
//!
//! Reductions are sums over every bin; callers normalise by batch size.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Weight on the binary-mask loss used by default.
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    alpha: f64,
    lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            lambda: 0.0,
        }
    }
}

impl LossWeights {
    /// `lambda` weights a perceptual term that this crate does not provide;
    /// anything but zero is rejected.
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::invalid(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        if lambda != 0.0 {
            return Err(Error::Unsupported(format!(
                "perceptual loss weight must be 0, got {lambda}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// A loss value and its gradient with respect to the predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub irm_loss: f64,
    pub tbm_loss: f64,
    pub total: f64,
    /// d total / d irm prediction
    pub grad_irm: Array2<f64>,
    /// d total / d tbm prediction (already scaled by alpha)
    pub grad_tbm: Array2<f64>,
}

fn check_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what}: dimension mismatch {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

pub fn mse_irm_loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<LossGrad> {
    check_dims("mse_irm_loss", pred.dim(), target.dim())?;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum();
    Ok(LossGrad {
        loss,
        grad: diff * 2.0,
    })
}

pub fn bce_tbm_loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<LossGrad> {
    check_dims("bce_tbm_loss", pred.dim(), target.dim())?;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.dim());
    Zip::from(&mut grad)
        .and(&pred)
        .and(&target)
        .for_each(|g, &p, &t| {
            let clamped = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            loss -= t * clamped.ln() + (1.0 - t) * (1.0 - clamped).ln();
            *g = if p > BCE_EPS && p < 1.0 - BCE_EPS {
                -t / p + (1.0 - t) / (1.0 - p)
            } else {
                0.0
            };
        });
    Ok(LossGrad { loss, grad })
}

pub fn combined_loss(
    pred_irm: ArrayView2<f64>,
    pred_tbm: ArrayView2<f64>,
    target_irm: ArrayView2<f64>,
    target_tbm: ArrayView2<f64>,
    w: LossWeights,
) -> Result<LossReport> {
    if w.lambda != 0.0 {
        return Err(Error::Unsupported(
            "perceptual loss is not available".into(),
        ));
    }
    check_dims("combined_loss", pred_irm.dim(), pred_tbm.dim())?;
    let irm = mse_irm_loss(pred_irm, target_irm)?;
    let tbm = bce_tbm_loss(pred_tbm, target_tbm)?;
    Ok(LossReport {
        irm_loss: irm.loss,
        tbm_loss: tbm.loss,
        total: irm.loss + w.alpha * tbm.loss,
        grad_irm: irm.grad,
        grad_tbm: tbm.grad * w.alpha,
    })
}
