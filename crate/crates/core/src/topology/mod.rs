//! Graph-theoretic metrics of binary brain graphs and group statistics.
//!
//! Distances are unweighted hop counts. Unreachable pairs contribute zero to
//! efficiency.

mod metrics;
mod paths;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_data::Dataset;

pub use metrics::{clustering, global_metrics, nodal_metrics, GlobalMetrics, NodalMetrics};
pub use paths::{neighbours, shortest_paths, ShortestPaths};
pub use stats::{fdr_adjust, group_compare, GroupComparison};

/// Significance level applied to BH-adjusted q-values in reports.
pub const Q_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetrics {
    pub subject_id: String,
    pub label: usize,
    pub nodal: NodalMetrics,
    pub global: GlobalMetrics,
}

/// Metrics of every subject, in dataset order.
pub fn cohort_metrics(ds: &Dataset) -> Result<Vec<SubjectMetrics>> {
    ds.graphs()
        .par_iter()
        .map(|g| {
            Ok(SubjectMetrics {
                subject_id: g.subject_id.clone(),
                label: g.label,
                nodal: nodal_metrics(&g.adjacency)?,
                global: global_metrics(&g.adjacency)?,
            })
        })
        .collect()
}

/// `subject_id,node_index,degree,efficiency,betweenness`
pub fn nodal_csv(subjects: &[SubjectMetrics]) -> String {
    let mut out = String::from("subject_id,node_index,degree,efficiency,betweenness\n");
    for s in subjects {
        for i in 0..s.nodal.degree.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.subject_id,
                i + 1,
                s.nodal.degree[i],
                s.nodal.efficiency[i],
                s.nodal.betweenness[i]
            ));
        }
    }
    out
}

/// `subject_id,avg_degree,avg_clustering,global_efficiency`
pub fn global_csv(subjects: &[SubjectMetrics]) -> String {
    let mut out = String::from("subject_id,avg_degree,avg_clustering,global_efficiency\n");
    for s in subjects {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.subject_id, s.global.average_degree, s.global.average_clustering, s.global.global_efficiency
        ));
    }
    out
}

/// One line of the group-comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `"global"` or a 1-based node index.
    pub region: String,
    pub comparison: GroupComparison,
}

impl ComparisonRow {
    pub fn significant(&self) -> bool {
        self.comparison.q_value < Q_THRESHOLD
    }
}

fn family(
    metric: &str,
    regions: Vec<(String, Vec<f64>, Vec<f64>)>,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = regions
        .into_iter()
        .map(|(region, a, b)| {
            Ok(ComparisonRow {
                region,
                comparison: group_compare(metric, &a, &b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = rows.iter().map(|r| r.comparison.p_value).collect();
    for (row, q) in rows.iter_mut().zip(fdr_adjust(&p)?) {
        row.comparison.q_value = q;
    }
    Ok(rows)
}

/// Welch tests of class 0 (group a) against class 1 (group b) for every
/// metric and region. BH families: the three global metrics together, and
/// each nodal metric across regions.
pub fn compare_groups(subjects: &[SubjectMetrics]) -> Result<Vec<ComparisonRow>> {
    let (a, b): (Vec<&SubjectMetrics>, Vec<&SubjectMetrics>) =
        subjects.iter().partition(|s| s.label == 0);
    if a.is_empty() || b.is_empty() || b.iter().any(|s| s.label != 1) {
        return Err(Error::Dataset(
            "group comparison needs subjects of exactly the classes 0 and 1".into(),
        ));
    }
    let split = |f: &dyn Fn(&SubjectMetrics) -> f64| -> (Vec<f64>, Vec<f64>) {
        (a.iter().map(|s| f(s)).collect(), b.iter().map(|s| f(s)).collect())
    };

    let globals: [(&str, fn(&GlobalMetrics) -> f64); 3] = [
        ("avg_degree", |g| g.average_degree),
        ("avg_clustering", |g| g.average_clustering),
        ("global_efficiency", |g| g.global_efficiency),
    ];
    let mut global_rows = Vec::new();
    for (name, get) in globals {
        let (xa, xb) = split(&|s| get(&s.global));
        let mut c = group_compare(name, &xa, &xb)?;
        c.metric = name.to_owned();
        global_rows.push(ComparisonRow {
            region: "global".into(),
            comparison: c,
        });
    }
    let p: Vec<f64> = global_rows.iter().map(|r| r.comparison.p_value).collect();
    for (row, q) in global_rows.iter_mut().zip(fdr_adjust(&p)?) {
        row.comparison.q_value = q;
    }

    let n = subjects[0].nodal.degree.len();
    let nodal: [(&str, fn(&NodalMetrics, usize) -> f64); 3] = [
        ("degree", |m, i| m.degree[i] as f64),
        ("efficiency", |m, i| m.efficiency[i]),
        ("betweenness", |m, i| m.betweenness[i]),
    ];
    let mut rows = global_rows;
    for (name, get) in nodal {
        let regions = (0..n)
            .map(|i| {
                let (xa, xb) = split(&|s| get(&s.nodal, i));
                ((i + 1).to_string(), xa, xb)
            })
            .collect();
        rows.extend(family(name, regions)?);
    }
    Ok(rows)
}

/// `metric,region,t,p,q,significant`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("metric,region,t,p,q,significant\n");
    for r in rows {
        let c = &r.comparison;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.metric,
            r.region,
            c.t_statistic,
            c.p_value,
            c.q_value,
            r.significant()
        ));
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_data::{generate_synthetic, SyntheticSpec};

    #[test]
    fn identical_groups_give_unit_q() {
        let mut spec = SyntheticSpec::new(8, 4, vec![]);
        spec.seed = 2;
        let ds = generate_synthetic(&spec).unwrap();
        let mut m = cohort_metrics(&ds).unwrap();
        // Copy class 0 onto class 1 so both groups hold the same values.
        for i in 0..4 {
            let (nodal, global) = (m[i].nodal.clone(), m[i].global.clone());
            m[i + 4].nodal = nodal;
            m[i + 4].global = global;
        }
        let rows = compare_groups(&m).unwrap();
        assert_eq!(rows.len(), 3 + 3 * 8);
        assert!(rows.iter().all(|r| r.comparison.q_value == 1.0));
        let csv = comparison_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "avg_degree,global,0,1,1,false");
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = generate_synthetic(&SyntheticSpec::new(6, 3, vec![])).unwrap();
        let m: Vec<_> = cohort_metrics(&ds).unwrap().into_iter().filter(|s| s.label == 0).collect();
        assert_eq!(compare_groups(&m).unwrap_err().code(), "E_DATASET");
    }

    #[test]
    fn csv_layouts() {
        let ds = generate_synthetic(&SyntheticSpec::new(5, 2, vec![1, 2])).unwrap();
        let m = cohort_metrics(&ds).unwrap();
        let nodal = nodal_csv(&m);
        assert_eq!(nodal.lines().count(), 1 + 4 * 5);
        assert!(nodal.lines().nth(1).unwrap().starts_with("sub-0001,1,"));
        assert_eq!(global_csv(&m).lines().count(), 1 + 4);
    }
}
