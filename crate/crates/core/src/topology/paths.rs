use std::collections::VecDeque;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Unweighted all-pairs shortest paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    /// `dist[s][t]`; `None` when `t` is unreachable from `s`.
    pub dist: Vec<Vec<Option<usize>>>,
    /// Number of distinct shortest paths; 0 when unreachable, 1 on the
    /// diagonal.
    pub count: Vec<Vec<u64>>,
}

impl ShortestPaths {
    pub fn n(&self) -> usize {
        self.dist.len()
    }
}

/// Neighbour lists of a binary symmetric adjacency matrix.
pub fn neighbours(a: &Tensor) -> Result<Vec<Vec<usize>>> {
    if !a.is_square() {
        return Err(Error::shape("adjacency", format!("{:?} is not square", a.shape())));
    }
    let n = a.rows();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidMatrix(format!(
                    "adjacency entry ({i}, {j}) = {v} is not binary"
                )));
            }
            if v != a[(j, i)] {
                return Err(Error::Asymmetric {
                    row: i,
                    col: j,
                    deviation: (v - a[(j, i)]).abs(),
                });
            }
            if v == 1.0 && i != j {
                out[i].push(j);
            }
        }
    }
    Ok(out)
}

/// Single-source BFS: distances, path counts and the visit order.
pub(crate) fn bfs(adj: &[Vec<usize>], s: usize) -> (Vec<Option<usize>>, Vec<u64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![None; n];
    let mut count = vec![0u64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([s]);
    dist[s] = Some(0);
    count[s] = 1;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let dv = dist[v].unwrap_or(0);
        for &w in &adj[v] {
            match dist[w] {
                None => {
                    dist[w] = Some(dv + 1);
                    count[w] = count[v];
                    queue.push_back(w);
                }
                Some(dw) if dw == dv + 1 => count[w] += count[v],
                _ => {}
            }
        }
    }
    (dist, count, order)
}

pub fn shortest_paths(a: &Tensor) -> Result<ShortestPaths> {
    let adj = neighbours(a)?;
    let (dist, count) = (0..adj.len())
        .map(|s| {
            let (d, c, _) = bfs(&adj, s);
            (d, c)
        })
        .unzip();
    Ok(ShortestPaths { dist, count })
}
