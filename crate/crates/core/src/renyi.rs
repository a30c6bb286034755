//! Matrix-based Rényi α-entropy and mutual information over mini-batch
//! embeddings.
//!
//! A batch `Z` of `M` embeddings is mapped to the trace-normalized RBF Gram
//! matrix `Q = K / tr(K)`. Its entropy is `H_α = log₂(Σ λᵢ^α) / (1 − α)` over
//! the eigenvalues of `Q`, the joint entropy of two batches is the entropy of
//! their normalized Hadamard product, and
//! `I(Z; Z_sub) = H(Z) + H(Z_sub) − H(Z, Z_sub)`.
//!
//! Kernel widths are estimated per batch and per stream and are held fixed
//! when differentiating.

use std::f64::consts::LN_2;

use crate::autodiff::{sym_eig, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.01;
pub const DEFAULT_NEIGHBORS: usize = 10;
/// Kernel width used when every sample in the batch coincides.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Eigenvalues are clamped to this before powering.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// True when the floor was used because all samples coincide.
    pub degenerate: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "entropy order α = {alpha} must be positive and different from 1"
        )));
    }
    Ok(())
}

fn pairwise_sq_distances(z: &Tensor) -> Tensor {
    let m = z.rows();
    let mut d = Tensor::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let s: f64 = z
                .row(i)
                .iter()
                .zip(z.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

/// Mean over samples of each sample's average distance to its `k` nearest
/// neighbours (`min(k, M − 1)` when the batch is small).
pub fn estimate_sigma(z: &Tensor, k: usize) -> Result<SigmaEstimate> {
    let m = z.rows();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "kernel width needs at least 2 samples, got {m}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("neighbour count must be ≥ 1".into()));
    }
    z.ensure_finite()?;
    let k = k.min(m - 1);
    let d2 = pairwise_sq_distances(z);
    let mut total = 0.0;
    let mut dists = Vec::with_capacity(m - 1);
    for i in 0..m {
        dists.clear();
        dists.extend((0..m).filter(|&j| j != i).map(|j| d2[(i, j)].sqrt()));
        dists.sort_by(f64::total_cmp);
        total += dists[..k].iter().sum::<f64>() / k as f64;
    }
    let sigma = total / m as f64;
    Ok(if sigma > 0.0 {
        SigmaEstimate {
            sigma,
            degenerate: false,
        }
    } else {
        SigmaEstimate {
            sigma: SIGMA_FLOOR,
            degenerate: true,
        }
    })
}

/// Trace-normalized Gram matrix with the kernel width and entropy order it
/// was built with.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    q: Tensor,
    sigma: f64,
    alpha: f64,
}

impl GramMatrix {
    pub fn q(&self) -> &Tensor {
        &self.q
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn size(&self) -> usize {
        self.q.rows()
    }

    /// Wraps an already normalized matrix, checking symmetry, non-negative
    /// entries and unit trace.
    pub fn from_normalized(q: Tensor, sigma: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        q.ensure_finite()?;
        q.ensure_symmetric(1e-12)?;
        if q.data().iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument("Gram entries must be ≥ 0".into()));
        }
        if (q.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "Gram trace {} is not 1",
                q.trace()
            )));
        }
        Ok(Self { q, sigma, alpha })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(sym_eig(&self.q)?.values)
    }
}

fn rbf_kernel(z: &Tensor, sigma: f64) -> Tensor {
    let d2 = pairwise_sq_distances(z);
    let denom = 2.0 * sigma * sigma;
    d2.map(|d| (-d / denom).exp())
}

/// `K[i][j] = exp(−‖zᵢ − zⱼ‖² / 2σ²)`, `Q = K / tr(K)`.
pub fn rbf_gram(z: &Tensor, sigma: f64, alpha: f64) -> Result<GramMatrix> {
    check_alpha(alpha)?;
    z.ensure_finite()?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("σ = {sigma} must be positive")));
    }
    let k = rbf_kernel(z, sigma);
    let tr = k.trace();
    Ok(GramMatrix {
        q: k.scale(1.0 / tr),
        sigma,
        alpha,
    })
}

fn entropy_from_eigenvalues(values: &[f64], alpha: f64) -> f64 {
    let s: f64 = values.iter().map(|&l| l.max(EIGEN_FLOOR).powf(alpha)).sum();
    s.log2() / (1.0 - alpha)
}

/// Rényi entropy in bits.
pub fn renyi_entropy(g: &GramMatrix) -> Result<f64> {
    let values = g.eigenvalues()?;
    if values.iter().all(|&l| l <= 0.0) {
        return Err(Error::InvalidArgument(
            "Gram matrix has no positive eigenvalue".into(),
        ));
    }
    Ok(entropy_from_eigenvalues(&values, g.alpha))
}

/// Entropy plus its gradient w.r.t. the entries of the (symmetric) matrix:
/// `α / ((1 − α) ln2 Σλ^α) · U diag(λ^{α−1}) Uᵀ`.
fn entropy_and_gradient(q: &Tensor, alpha: f64) -> Result<(f64, Vec<f64>, Tensor)> {
    let eig = sym_eig(q)?;
    let s: f64 = eig
        .values
        .iter()
        .map(|&l| l.max(EIGEN_FLOOR).powf(alpha))
        .sum();
    let h = s.log2() / (1.0 - alpha);
    let c = alpha / ((1.0 - alpha) * LN_2 * s);
    let grad = eig
        .reconstruct_with(|l| l.max(EIGEN_FLOOR).powf(alpha - 1.0))
        .scale(c);
    Ok((h, eig.values, grad))
}

fn hadamard_normalized(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "joint_entropy",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let h = a.zip_map(b, |x, y| x * y)?;
    let tr = h.trace();
    Ok(h.scale(1.0 / tr))
}

/// `H_α((Qa ∘ Qb) / tr(Qa ∘ Qb))`.
pub fn joint_entropy(ga: &GramMatrix, gb: &GramMatrix) -> Result<f64> {
    if ga.alpha != gb.alpha {
        return Err(Error::InvalidArgument(format!(
            "entropy orders differ: {} vs {}",
            ga.alpha, gb.alpha
        )));
    }
    let joint = hadamard_normalized(&ga.q, &gb.q)?;
    let values = sym_eig(&joint)?.values;
    Ok(entropy_from_eigenvalues(&values, ga.alpha))
}

/// Every quantity entering one mutual-information evaluation.
#[derive(Debug, Clone)]
pub struct MiTerms {
    pub h_z: f64,
    pub h_sub: f64,
    pub h_joint: f64,
    pub mi: f64,
    pub sigma_z: SigmaEstimate,
    pub sigma_sub: SigmaEstimate,
    pub spectrum_z: Vec<f64>,
    pub spectrum_sub: Vec<f64>,
    pub spectrum_joint: Vec<f64>,
}

/// Mutual information together with its gradients w.r.t. both batches.
#[derive(Debug, Clone)]
pub struct MiGradients {
    pub terms: MiTerms,
    pub grad_z: Tensor,
    pub grad_sub: Tensor,
}

fn check_pair(z: &Tensor, z_sub: &Tensor) -> Result<()> {
    if z.rows() != z_sub.rows() {
        return Err(Error::shape(
            "mutual_information",
            format!("batch sizes {} vs {}", z.rows(), z_sub.rows()),
        ));
    }
    if z.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "mutual information needs a batch of at least 2, got {}",
            z.rows()
        )));
    }
    Ok(())
}

fn estimate_pair(z: &Tensor, z_sub: &Tensor) -> Result<(SigmaEstimate, SigmaEstimate)> {
    check_pair(z, z_sub)?;
    Ok((
        estimate_sigma(z, DEFAULT_NEIGHBORS)?,
        estimate_sigma(z_sub, DEFAULT_NEIGHBORS)?,
    ))
}

/// `I(Z; Z_sub)` in bits with kernel widths estimated from each batch.
pub fn mutual_information(z: &Tensor, z_sub: &Tensor, alpha: f64) -> Result<MiTerms> {
    let (sz, ss) = estimate_pair(z, z_sub)?;
    Ok(mi_with_gradients_at(z, z_sub, sz, ss, alpha)?.terms)
}

/// Gradient of `I(Z; Z_sub)` w.r.t. `z_sub`, kernel widths held fixed at
/// their batch estimates.
pub fn mi_gradient(z: &Tensor, z_sub: &Tensor, alpha: f64) -> Result<Tensor> {
    Ok(mi_with_gradients(z, z_sub, alpha)?.grad_sub)
}

pub fn mi_with_gradients(z: &Tensor, z_sub: &Tensor, alpha: f64) -> Result<MiGradients> {
    let (sz, ss) = estimate_pair(z, z_sub)?;
    mi_with_gradients_at(z, z_sub, sz, ss, alpha)
}

/// Mutual information and gradients at given kernel widths.
pub fn mi_with_gradients_at(
    z: &Tensor,
    z_sub: &Tensor,
    sigma_z: SigmaEstimate,
    sigma_sub: SigmaEstimate,
    alpha: f64,
) -> Result<MiGradients> {
    check_alpha(alpha)?;
    check_pair(z, z_sub)?;
    z.ensure_finite()?;
    z_sub.ensure_finite()?;
    let m = z.rows() as f64;

    let k = rbf_kernel(z, sigma_z.sigma);
    let ks = rbf_kernel(z_sub, sigma_sub.sigma);
    // The RBF diagonal is exactly one, so tr(K) = M and tr(Q ∘ Q_sub) = 1/M
    // regardless of the embeddings.
    let q = k.scale(1.0 / k.trace());
    let qs = ks.scale(1.0 / ks.trace());
    let joint = hadamard_normalized(&q, &qs)?;
    let joint_scale = 1.0 / q.zip_map(&qs, |a, b| a * b)?.trace();

    let (h_z, spectrum_z, g_q) = entropy_and_gradient(&q, alpha)?;
    let (h_sub, spectrum_sub, g_qs) = entropy_and_gradient(&qs, alpha)?;
    let (h_joint, spectrum_joint, g_p) = entropy_and_gradient(&joint, alpha)?;

    // dI/dK and dI/dK_sub, entry-wise.
    let gamma_z = Tensor::from_fn(k.rows(), k.cols(), |i, j| {
        (g_q[(i, j)] - g_p[(i, j)] * joint_scale * qs[(i, j)]) / m
    });
    let gamma_sub = Tensor::from_fn(k.rows(), k.cols(), |i, j| {
        (g_qs[(i, j)] - g_p[(i, j)] * joint_scale * q[(i, j)]) / m
    });

    let grad_z = kernel_to_embedding_grad(z, &k, &gamma_z, sigma_z.sigma);
    let grad_sub = kernel_to_embedding_grad(z_sub, &ks, &gamma_sub, sigma_sub.sigma);

    Ok(MiGradients {
        terms: MiTerms {
            h_z,
            h_sub,
            h_joint,
            mi: h_z + h_sub - h_joint,
            sigma_z,
            sigma_sub,
            spectrum_z,
            spectrum_sub,
            spectrum_joint,
        },
        grad_z,
        grad_sub,
    })
}

/// Chains a gradient w.r.t. RBF kernel entries back to the embeddings:
/// with `Ω = Γ ∘ (−K / 2σ²)`, `∂/∂zₐ = 4 Σⱼ Ωₐⱼ (zₐ − zⱼ)`.
fn kernel_to_embedding_grad(z: &Tensor, k: &Tensor, gamma: &Tensor, sigma: f64) -> Tensor {
    let m = z.rows();
    let c = -1.0 / (2.0 * sigma * sigma);
    let mut grad = Tensor::zeros(m, z.cols());
    for a in 0..m {
        for j in 0..m {
            if j == a {
                continue;
            }
            // Symmetrize to stay exact when Γ carries rounding asymmetry.
            let omega = 0.5 * (gamma[(a, j)] + gamma[(j, a)]) * c * k[(a, j)];
            let w = 4.0 * omega;
            for (g, (&za, &zj)) in grad.row_mut(a).iter_mut().zip(z.row(a).iter().zip(z.row(j))) {
                *g += w * (za - zj);
            }
        }
    }
    grad
}
