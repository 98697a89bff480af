//! Image–text similarity and the matching loss.

use ndarray::{Array2, Zip};

use super::config::LossMode;
use crate::error::{Error, Result};

pub const LOSS_EPS: f64 = 1e-7;

/// `Y = I·Lᵀ / τ` for unit rows `I: N×d`, `L: M×d`.
pub fn similarity_matrix(images: &Array2<f64>, labels: &Array2<f64>, temperature: f64) -> Result<Array2<f64>> {
    if images.ncols() != labels.ncols() {
        return Err(Error::Shape(format!(
            "image rows have width {}, label rows {}",
            images.ncols(),
            labels.ncols()
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be > 0, got {temperature}")));
    }
    for (what, m) in [("image", images), ("label", labels)] {
        if let Some(i) = m.rows().into_iter().position(|r| r.dot(&r) == 0.0) {
            return Err(Error::Shape(format!("{what} row {i} is zero")));
        }
    }
    Ok(images.dot(&labels.t()) / temperature)
}

/// MSE + CE over `ŷ = clamp((Y+1)/2, ε, 1−ε)`. Returns the loss and
/// `dLoss/dY`; the gradient is zero where the clamp is active.
pub fn itm_loss(y: &Array2<f64>, s: &Array2<f64>, mode: LossMode) -> Result<(f64, Array2<f64>)> {
    if y.dim() != s.dim() {
        return Err(Error::Shape(format!("Y is {:?}, S is {:?}", y.dim(), s.dim())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity matrix"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity targets"));
    }
    let (n, m) = y.dim();
    if n == 0 || m == 0 {
        return Err(Error::Shape("empty similarity matrix".into()));
    }
    let nf = n as f64;
    let nm = (n * m) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros(y.raw_dim());
    Zip::from(&mut grad).and(y).and(s).for_each(|g, &yv, &sv| {
        let raw = (yv + 1.0) / 2.0;
        let p = raw.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
        let clamped = p != raw;
        let (ce, dce) = match mode {
            LossMode::Canonical => (-sv * p.ln() / nf, -sv / (nf * p)),
            LossMode::Literal => {
                let ls = sv.max(LOSS_EPS).ln();
                (-p * ls / nf, -ls / nf)
            }
        };
        loss += (p - sv).powi(2) / nm + ce;
        *g = if clamped { 0.0 } else { 0.5 * (2.0 * (p - sv) / nm + dce) };
    });
    Ok((loss, grad))
}
