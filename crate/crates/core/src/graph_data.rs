//! Connectivity matrices, thresholded brain graphs and the synthetic cohort
//! generator.
//!
//! On disk a dataset is a directory holding `matrices/<subject_id>.csv` (one
//! `n x n` comma-separated matrix per subject) and `labels.csv` with header
//! `subject_id,label`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Edge threshold used for all cohorts unless overridden.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

const SYMMETRY_TOL: f64 = 1e-9;
const DIAGONAL_TOL: f64 = 1e-9;

pub const MATRICES_DIR: &str = "matrices";
pub const LABELS_FILE: &str = "labels.csv";

/// One subject's correlation matrix with its class label
/// (0 = control, 1 = patient).
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    subject_id: String,
    values: Tensor,
    label: usize,
}

impl ConnectivityMatrix {
    /// Validates the matrix. Non-finite diagonal entries mark an absent
    /// diagonal and are replaced by 1.0; non-finite off-diagonal entries are
    /// rejected.
    pub fn new(subject_id: impl Into<String>, mut values: Tensor, label: usize) -> Result<Self> {
        let subject_id = subject_id.into();
        if !values.is_square() || values.rows() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "{subject_id}: expected a non-empty square matrix, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if label > 1 {
            return Err(Error::InvalidMatrix(format!(
                "{subject_id}: label {label} is not 0 or 1"
            )));
        }
        let n = values.rows();
        for i in 0..n {
            if !values[(i, i)].is_finite() {
                values[(i, i)] = 1.0;
            } else if (values[(i, i)] - 1.0).abs() > DIAGONAL_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "{subject_id}: diagonal entry {i} is {} (expected 1)",
                    values[(i, i)]
                )));
            }
        }
        values.ensure_finite()?;
        values.ensure_symmetric(SYMMETRY_TOL)?;
        for i in 0..n {
            for j in 0..n {
                if i != j && !(-1.0..=1.0).contains(&values[(i, j)]) {
                    return Err(Error::InvalidMatrix(format!(
                        "{subject_id}: entry ({i}, {j}) = {} outside [-1, 1]",
                        values[(i, j)]
                    )));
                }
            }
        }
        Ok(Self {
            subject_id,
            values,
            label,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n_nodes(&self) -> usize {
        self.values.rows()
    }
}

/// Node features `X` (the raw correlation rows) plus the binary adjacency
/// obtained by thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    pub subject_id: String,
    pub node_features: Tensor,
    pub adjacency: Tensor,
    pub edge_threshold: f64,
    pub label: usize,
}

impl BrainGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let n = self.n_nodes();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0.0)
            .count()
    }

    /// Recovers the source matrix; features are stored unmodified.
    pub fn to_connectivity(&self) -> Result<ConnectivityMatrix> {
        ConnectivityMatrix::new(
            self.subject_id.clone(),
            self.node_features.clone(),
            self.label,
        )
    }
}

/// Thresholds a connectivity matrix into a graph. An edge exists iff the
/// correlation strictly exceeds `threshold`; negative correlations never
/// produce edges but remain in the node features.
pub fn build_graph(conn: &ConnectivityMatrix, threshold: f64) -> Result<BrainGraph> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    let values = conn.values();
    let n = values.rows();
    let adjacency = Tensor::from_fn(n, n, |i, j| {
        if i != j && values[(i, j)] > threshold {
            1.0
        } else {
            0.0
        }
    });
    Ok(BrainGraph {
        subject_id: conn.subject_id().to_owned(),
        node_features: values.clone(),
        adjacency,
        edge_threshold: threshold,
        label: conn.label(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    graphs: Vec<BrainGraph>,
    class_counts: BTreeMap<usize, usize>,
}

impl Dataset {
    pub fn new(graphs: Vec<BrainGraph>) -> Result<Self> {
        let n = graphs
            .first()
            .map(BrainGraph::n_nodes)
            .ok_or_else(|| Error::Dataset("dataset has no subjects".into()))?;
        let mut class_counts = BTreeMap::new();
        for g in &graphs {
            if g.n_nodes() != n {
                return Err(Error::Dataset(format!(
                    "subject `{}` has {} nodes, expected {n}",
                    g.subject_id,
                    g.n_nodes()
                )));
            }
            *class_counts.entry(g.label).or_insert(0) += 1;
        }
        Ok(Self {
            graphs,
            class_counts,
        })
    }

    pub fn from_matrices(matrices: &[ConnectivityMatrix], threshold: f64) -> Result<Self> {
        let graphs = matrices
            .iter()
            .map(|m| build_graph(m, threshold))
            .collect::<Result<Vec<_>>>()?;
        Self::new(graphs)
    }

    pub fn graphs(&self) -> &[BrainGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.graphs[0].n_nodes()
    }

    pub fn class_counts(&self) -> &BTreeMap<usize, usize> {
        &self.class_counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.graphs[i].clone()).collect())
    }

    /// Rebuilds every graph at a different threshold.
    pub fn rethreshold(&self, threshold: f64) -> Result<Dataset> {
        let matrices = self
            .graphs
            .iter()
            .map(BrainGraph::to_connectivity)
            .collect::<Result<Vec<_>>>()?;
        Dataset::from_matrices(&matrices, threshold)
    }
}

fn parse_matrix(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row_index = rows.len();
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                if col == row_index && (field.is_empty() || field.eq_ignore_ascii_case("na")) {
                    // Absent diagonal.
                    return Ok(f64::NAN);
                }
                field.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    detail: format!("column {}: `{field}`: {e}", col + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    detail: format!("{} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 0,
            detail: "empty matrix file".into(),
        });
    }
    Ok(Tensor::from_rows(&rows))
}

fn parse_labels(path: &Path) -> Result<HashMap<String, usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "subject_id,label" => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 1,
                detail: "expected header `subject_id,label`".into(),
            })
        }
    }
    let mut labels = HashMap::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            detail,
        };
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected `subject_id,label`, got `{line}`")))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(format!("label `{other}` is not 0 or 1"))),
        };
        labels.insert(id.trim().to_owned(), label);
    }
    Ok(labels)
}

/// Reads every `*.csv` under `matrices_dir` (sorted by file name, the stem
/// being the subject id) and joins labels by subject id.
pub fn load_matrices(matrices_dir: &Path, labels_path: &Path) -> Result<Vec<ConnectivityMatrix>> {
    let labels = parse_labels(labels_path)?;
    let mut files: Vec<PathBuf> = fs::read_dir(matrices_dir)
        .map_err(|e| Error::io(matrices_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Dataset(format!(
            "no matrix files in {}",
            matrices_dir.display()
        )));
    }

    let mut matrices = Vec::with_capacity(files.len());
    let mut expected_n = None;
    for path in files {
        let subject_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Dataset(format!("bad file name {}", path.display())))?
            .to_owned();
        let values = parse_matrix(&path)?;
        match expected_n {
            None => expected_n = Some(values.rows()),
            Some(n) if n != values.rows() || n != values.cols() => {
                return Err(Error::Dataset(format!(
                    "subject `{subject_id}` is {}x{}, expected {n}x{n}",
                    values.rows(),
                    values.cols()
                )));
            }
            Some(_) => {}
        }
        let label = *labels
            .get(&subject_id)
            .ok_or_else(|| Error::MissingLabel(subject_id.clone()))?;
        matrices.push(ConnectivityMatrix::new(subject_id, values, label)?);
    }
    Ok(matrices)
}

pub fn load_dataset(matrices_dir: &Path, labels_path: &Path, threshold: f64) -> Result<Dataset> {
    Dataset::from_matrices(&load_matrices(matrices_dir, labels_path)?, threshold)
}

/// Loads `<root>/matrices/*.csv` and `<root>/labels.csv`.
pub fn load_dataset_dir(root: &Path, threshold: f64) -> Result<Dataset> {
    load_dataset(&root.join(MATRICES_DIR), &root.join(LABELS_FILE), threshold)
}

/// Writes matrices and labels in the directory layout read by
/// [`load_dataset_dir`]. Values are written in shortest round-trip form, so
/// loading reproduces them exactly. Returns the written file paths.
pub fn save_matrices(root: &Path, matrices: &[ConnectivityMatrix]) -> Result<Vec<PathBuf>> {
    let dir = root.join(MATRICES_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::with_capacity(matrices.len() + 1);
    for m in matrices {
        let path = dir.join(format!("{}.csv", m.subject_id()));
        let mut out = String::new();
        for i in 0..m.n_nodes() {
            let row: Vec<String> = m.values().row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        write_file(&path, out.as_bytes())?;
        written.push(path);
    }
    let mut labels = String::from("subject_id,label\n");
    for m in matrices {
        labels.push_str(&format!("{},{}\n", m.subject_id(), m.label()));
    }
    let path = root.join(LABELS_FILE);
    write_file(&path, labels.as_bytes())?;
    written.push(path);
    Ok(written)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Parameters of the planted-subgraph generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_nodes: usize,
    pub n_subjects_per_class: usize,
    /// 1-based node ids whose mutual correlations carry the class signal.
    pub planted_nodes: Vec<usize>,
    pub signal_strength: f64,
    /// Standard deviation of per-subject jitter on the latent loadings.
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_nodes: usize, n_subjects_per_class: usize, planted_nodes: Vec<usize>) -> Self {
        Self {
            n_nodes,
            n_subjects_per_class,
            planted_nodes,
            signal_strength: 0.5,
            noise_scale: 0.1,
            seed: 0,
        }
    }
}

/// Number of latent network modules in the synthetic generator.
const LATENT_MODULES: usize = 5;
/// Loading of a node on its own module. Within-module correlation is
/// `a² / (a² + 1)`, about 0.3 here, so background modules sit below the
/// default edge threshold.
const MODULE_LOADING: f64 = 0.655;
const TIME_POINTS: usize = 120;

/// Generates matrices for a two-class cohort.
///
/// Each node belongs to latent module `i mod 5`. Per subject, loadings are
/// jittered by `noise_scale`, a time series of length 120 is simulated from
/// the latent factors plus unit noise, and the sample correlation is taken.
/// Class-1 subjects additionally get `signal_strength` added to every
/// correlation between two planted nodes, clamped to `[-1, 1]`.
pub fn generate_synthetic_matrices(spec: &SyntheticSpec) -> Result<Vec<ConnectivityMatrix>> {
    let n = spec.n_nodes;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes".into()));
    }
    if spec.n_subjects_per_class == 0 {
        return Err(Error::InvalidArgument(
            "subjects per class must be positive".into(),
        ));
    }
    if spec.planted_nodes.len() > n {
        return Err(Error::InvalidArgument(format!(
            "{} planted nodes exceed node count {n}",
            spec.planted_nodes.len()
        )));
    }
    if let Some(&bad) = spec.planted_nodes.iter().find(|&&p| p == 0 || p > n) {
        return Err(Error::InvalidArgument(format!(
            "planted node {bad} outside 1..={n}"
        )));
    }
    if !(spec.signal_strength >= 0.0 && spec.signal_strength.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "signal strength {} must be non-negative",
            spec.signal_strength
        )));
    }
    if !(spec.noise_scale >= 0.0 && spec.noise_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise scale {} must be non-negative",
            spec.noise_scale
        )));
    }

    let mut planted = vec![false; n];
    for &p in &spec.planted_nodes {
        planted[p - 1] = true;
    }
    let modules = LATENT_MODULES.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = 2 * spec.n_subjects_per_class;
    let width = total.to_string().len().max(4);

    let mut out = Vec::with_capacity(total);
    for s in 0..total {
        let label = s / spec.n_subjects_per_class;
        let loadings = Tensor::from_fn(n, modules, |i, f| {
            let base = if i % modules == f { MODULE_LOADING } else { 0.0 };
            let jitter: f64 = StandardNormal.sample(&mut rng);
            base + spec.noise_scale * jitter
        });
        let factors = Tensor::from_fn(TIME_POINTS, modules, |_, _| StandardNormal.sample(&mut rng));
        let mut series = factors.matmul_t(&loadings)?;
        for x in series.data_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *x += e;
        }
        let mut corr = sample_correlation(&series);
        if label == 1 {
            for i in 0..n {
                for j in 0..n {
                    if i != j && planted[i] && planted[j] {
                        corr[(i, j)] = (corr[(i, j)] + spec.signal_strength).clamp(-1.0, 1.0);
                    }
                }
            }
        }
        let id = format!("sub-{:0width$}", s + 1);
        out.push(ConnectivityMatrix::new(id, corr, label)?);
    }
    Ok(out)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    Dataset::from_matrices(&generate_synthetic_matrices(spec)?, DEFAULT_THRESHOLD)
}

/// Pearson correlation between the columns of a `T x n` series, exactly
/// symmetric with unit diagonal.
fn sample_correlation(series: &Tensor) -> Tensor {
    let (t, n) = (series.rows(), series.cols());
    let mut centered = series.clone();
    for j in 0..n {
        let mean = (0..t).map(|i| series[(i, j)]).sum::<f64>() / t as f64;
        for i in 0..t {
            centered[(i, j)] -= mean;
        }
    }
    let cov = centered.t_matmul(&centered).expect("square product");
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    let mut corr = Tensor::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    corr
}
