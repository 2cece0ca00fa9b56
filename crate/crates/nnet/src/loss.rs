//! Pixel losses on the 0-255 scale, each returning the value and the analytic
//! gradient with respect to the estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::Tensor;

pub const CHARBONNIER_EPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    L1,
    Charbonnier { eps: f64 },
}

impl Default for LossKind {
    fn default() -> Self {
        Self::Charbonnier { eps: CHARBONNIER_EPS }
    }
}

/// Mean penalty of `estimate - truth` and its gradient with respect to
/// `estimate`.
pub fn loss<S: Scalar>(kind: LossKind, truth: &Tensor<S>, estimate: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    if truth.dim() != estimate.dim() {
        return Err(Error::Shape(format!("loss: {:?} vs {:?}", truth.dim(), estimate.dim())));
    }
    if let LossKind::Charbonnier { eps } = kind {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("Charbonnier eps must be > 0, got {eps}")));
        }
    }
    let inv = S::one() / S::of(truth.len().max(1) as f64);
    let mut grad = estimate - truth;
    let mut total = S::zero();
    match kind {
        LossKind::Mse => {
            let two = S::of(2.0);
            grad.mapv_inplace(|e| {
                total += e * e;
                two * e * inv
            });
        }
        LossKind::L1 => grad.mapv_inplace(|e| {
            total += e.abs();
            if e > S::zero() {
                inv
            } else if e < S::zero() {
                -inv
            } else {
                S::zero()
            }
        }),
        LossKind::Charbonnier { eps } => {
            let eps = S::of(eps);
            grad.mapv_inplace(|e| {
                let r = (e * e + eps * eps).sqrt();
                total += r - eps;
                e / r * inv
            });
        }
    }
    Ok((total * inv, grad))
}
