//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! The Gram matrices handled here are at most a mini-batch wide, where Jacobi
//! is fast enough and resolves tiny eigenvalues to high relative accuracy.
//! The routine is a non-differentiable leaf; entropy gradients are formed
//! analytically from its output.

use super::Tensor;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues (descending) and the matching orthonormal eigenvectors as
/// columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Tensor,
}

impl SymEig {
    /// `U diag(f(λ)) Uᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let n = self.values.len();
        let weights: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let u = &self.vectors;
        Tensor::from_fn(n, n, |i, j| {
            (0..n).map(|k| u[(i, k)] * weights[k] * u[(j, k)]).sum()
        })
    }

    pub fn reconstruct(&self) -> Tensor {
        self.reconstruct_with(|l| l)
    }
}

pub fn sym_eig(m: &Tensor) -> Result<SymEig> {
    m.ensure_finite()?;
    m.ensure_symmetric(SYMMETRY_TOL)?;
    let n = m.rows();
    let mut a = m.clone();
    // Symmetrize exactly so rotations act on a truly symmetric matrix.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = Tensor::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::InvalidArgument(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Tensor::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let mut m = Tensor::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&Tensor::identity(4)).unwrap();
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_is_axis_aligned() {
        let m = Tensor::from_rows(&[[1.0, 0.0], [0.0, 3.0]]);
        let e = sym_eig(&m).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_symmetric(8, &mut rng);
            let e = sym_eig(&m).unwrap();
            let u = &e.vectors;
            let utu = u.t_matmul(u).unwrap();
            assert!(utu.max_abs_diff(&Tensor::identity(8)) < 1e-8);
            let rel = e.reconstruct().zip_map(&m, |a, b| a - b).unwrap().frobenius_norm()
                / m.frobenius_norm();
            assert!(rel < 1e-6, "reconstruction error {rel}");
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let m = Tensor::from_rows(&[[1.0, 0.5], [0.0, 1.0]]);
        assert_eq!(sym_eig(&m).unwrap_err().code(), "E_ASYMMETRIC");
        let m = Tensor::from_rows(&[[1.0, f64::NAN], [f64::NAN, 1.0]]);
        assert_eq!(sym_eig(&m).unwrap_err().code(), "E_NONFINITE");
    }
}
