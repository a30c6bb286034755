use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Welch two-sample comparison of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    /// Filled in by [`fdr_adjust`] over a family; equals `p_value` until then.
    pub q_value: f64,
    /// Both groups have zero variance.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch t-test with a two-sided p-value on Welch–Satterthwaite degrees of
/// freedom.
pub fn group_compare(metric: &str, a: &[f64], b: &[f64]) -> Result<GroupComparison> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "each group needs at least 2 samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let mut out = GroupComparison {
        metric: metric.to_owned(),
        mean_a: ma,
        mean_b: mb,
        t_statistic: 0.0,
        p_value: 1.0,
        q_value: 1.0,
        degenerate: false,
    };
    if se2 == 0.0 {
        out.degenerate = true;
        return Ok(out);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution with df {df}: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    out.t_statistic = t;
    out.p_value = p;
    out.q_value = p;
    Ok(out)
}

/// Benjamini–Hochberg step-up adjustment; output order follows input order.
pub fn fdr_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        q[i] = running.min(1.0);
    }
    Ok(q)
}
