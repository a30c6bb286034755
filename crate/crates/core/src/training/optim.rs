use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with per-tensor learning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected update; `lrs[i]` applies to `params[i]`.
    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor], lrs: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() || lrs.len() != params.len() {
            return Err(Error::shape(
                "adam",
                format!(
                    "{} params, {} grads, {} rates, {} moments",
                    params.len(),
                    grads.len(),
                    lrs.len(),
                    self.m.len()
                ),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = &grads[i];
            if g.shape() != p.shape() || self.m[i].shape() != p.shape() {
                return Err(Error::shape(
                    "adam",
                    format!("gradient {:?} for parameter {:?}", g.shape(), p.shape()),
                ));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((w, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mj = BETA1 * *mj + (1.0 - BETA1) * gj;
                *vj = BETA2 * *vj + (1.0 - BETA2) * gj * gj;
                *w -= lrs[i] * (*mj / c1) / ((*vj / c2).sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}
