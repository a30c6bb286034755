use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::Result;

use super::paths::{bfs, neighbours};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalMetrics {
    pub degree: Vec<usize>,
    pub efficiency: Vec<f64>,
    /// Normalized by `(n − 1)(n − 2) / 2`.
    pub betweenness: Vec<f64>,
    /// Set when `n < 3` and betweenness is reported as zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub average_degree: f64,
    pub average_clustering: f64,
    pub global_efficiency: f64,
}

fn efficiency(dist: &[Option<usize>], i: usize) -> f64 {
    let n = dist.len();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .filter_map(|(_, d)| d.map(|d| 1.0 / d as f64))
        .sum();
    total / (n - 1) as f64
}

/// Degree, nodal efficiency and normalized betweenness.
///
/// Betweenness uses single-source dependency accumulation; each unordered
/// pair is seen from both endpoints, which the normalization absorbs.
pub fn nodal_metrics(a: &Tensor) -> Result<NodalMetrics> {
    let adj = neighbours(a)?;
    let n = adj.len();
    let degree = adj.iter().map(Vec::len).collect();
    let mut eff = vec![0.0; n];
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let (dist, sigma, order) = bfs(&adj, s);
        eff[s] = efficiency(&dist, s);
        let mut delta = vec![0.0; n];
        for &w in order.iter().rev() {
            let dw = dist[w].unwrap_or(0);
            for &v in &adj[w] {
                if dw > 0 && dist[v] == Some(dw - 1) {
                    delta[v] += sigma[v] as f64 / sigma[w] as f64 * (1.0 + delta[w]);
                }
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    let degenerate = n < 3;
    let betweenness = if degenerate {
        vec![0.0; n]
    } else {
        // Ordered-pair sums count each pair twice.
        let norm = ((n - 1) * (n - 2)) as f64;
        bc.iter().map(|b| b / norm).collect()
    };
    Ok(NodalMetrics {
        degree,
        efficiency: eff,
        betweenness,
        degenerate,
    })
}

/// Per-node clustering coefficient `2 N_i / (k_i (k_i − 1))`, zero when
/// `k_i < 2`.
pub fn clustering(a: &Tensor) -> Result<Vec<f64>> {
    let adj = neighbours(a)?;
    Ok(adj
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (x, &u) in nb.iter().enumerate() {
                for &v in &nb[x + 1..] {
                    if a[(u, v)] == 1.0 {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect())
}

pub fn global_metrics(a: &Tensor) -> Result<GlobalMetrics> {
    let nodal = nodal_metrics(a)?;
    let n = nodal.degree.len();
    if n == 0 {
        return Ok(GlobalMetrics {
            average_degree: 0.0,
            average_clustering: 0.0,
            global_efficiency: 0.0,
        });
    }
    let nf = n as f64;
    Ok(GlobalMetrics {
        average_degree: nodal.degree.iter().sum::<usize>() as f64 / nf,
        average_clustering: clustering(a)?.iter().sum::<f64>() / nf,
        global_efficiency: nodal.efficiency.iter().sum::<f64>() / nf,
    })
}
