//! Datasets, classical baselines and experiment grids.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{assign_nearest, sse, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::pipeline::{prepare, run_qc_kmeans, ClusteringResult, Formulation, PipelineConfig, SketchMode, SolverMode};
use crate::qubo::{build_joint_qubo, relaxation_gap_bounds, Penalty};
use crate::rng::{RngKey, RngSpec, Stream};
use crate::solver::{exhaustive_blocks, exhaustive_joint};

// ---------------------------------------------------------------------------
// Synthetic data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Two concentric noisy rings.
    Circles,
    /// Two interleaved half circles.
    Moons,
    /// Interleaved spiral arms.
    Spiral,
    /// Isotropic Gaussian mixture.
    Blobs,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circles" => Ok(Family::Circles),
            "moons" => Ok(Family::Moons),
            "spiral" => Ok(Family::Spiral),
            "blobs" => Ok(Family::Blobs),
            _ => Err(Error::param(format!("unknown dataset family '{s}'"))),
        }
    }
}

/// Two-dimensional synthetic dataset description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian noise added to each coordinate (circles, moons, spiral).
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Inner-to-outer radius ratio (circles).
    #[serde(default = "default_factor")]
    pub factor: f64,
    /// Arm count (spiral).
    #[serde(default = "default_arms")]
    pub arms: usize,
    /// Turns per arm (spiral).
    #[serde(default = "default_turns")]
    pub turns: f64,
    /// Blob count (blobs).
    #[serde(default = "default_centers")]
    pub centers: usize,
    /// Per-blob standard deviations, cycled over blobs (blobs).
    #[serde(default = "default_stds")]
    pub stds: Vec<f64>,
    /// Blob centers are uniform in `[-box_size, box_size]²` (blobs).
    #[serde(default = "default_box")]
    pub box_size: f64,
}

fn default_noise() -> f64 {
    0.05
}
fn default_factor() -> f64 {
    0.5
}
fn default_arms() -> usize {
    2
}
fn default_turns() -> f64 {
    1.5
}
fn default_centers() -> usize {
    3
}
fn default_stds() -> Vec<f64> {
    vec![1.0]
}
fn default_box() -> f64 {
    10.0
}

impl SyntheticSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            seed,
            noise: default_noise(),
            factor: default_factor(),
            arms: default_arms(),
            turns: default_turns(),
            centers: default_centers(),
            stds: default_stds(),
            box_size: default_box(),
        }
    }

    /// Named presets: `circles`, `moons`, `spiral`, `blobs`, and `vd_blobs`
    /// (three blobs with standard deviations 0.5, 1.5 and 3).
    pub fn preset(name: &str, n: usize, seed: u64) -> Result<Self> {
        if name == "vd_blobs" {
            return Ok(Self {
                stds: vec![0.5, 1.5, 3.0],
                ..Self::new(Family::Blobs, n, seed)
            });
        }
        Ok(Self::new(name.parse()?, n, seed))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::param("synthetic datasets need at least 4 points"));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.noise) || !finite_nonneg(self.factor) || !finite_nonneg(self.box_size) {
            return Err(Error::param("noise, factor and box size must be finite and non-negative"));
        }
        match self.family {
            Family::Spiral if self.arms == 0 || !(self.turns > 0.0) => {
                Err(Error::param("spiral needs at least one arm and positive turns"))
            }
            Family::Blobs if self.centers == 0 || self.stds.is_empty() || !self.stds.iter().all(|&s| finite_nonneg(s)) => {
                Err(Error::param("blobs need at least one center and non-negative standard deviations"))
            }
            _ => Ok(()),
        }
    }
}

/// Deterministic dataset for a spec.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = RngSpec::new(spec.seed).stream(Stream::Data);
    let n = spec.n;
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
    let tau = std::f64::consts::TAU;
    match spec.family {
        Family::Circles => {
            let outer = n / 2;
            for i in 0..outer {
                let t = tau * i as f64 / outer as f64;
                pts.push([t.cos(), t.sin()]);
            }
            let inner = n - outer;
            for i in 0..inner {
                let t = tau * i as f64 / inner as f64;
                pts.push([spec.factor * t.cos(), spec.factor * t.sin()]);
            }
        }
        Family::Moons => {
            let outer = n / 2;
            let inner = n - outer;
            let at = |i: usize, count: usize| std::f64::consts::PI * i as f64 / (count.max(2) - 1) as f64;
            for i in 0..outer {
                let t = at(i, outer);
                pts.push([t.cos(), t.sin()]);
            }
            for i in 0..inner {
                let t = at(i, inner);
                pts.push([1.0 - t.cos(), 0.5 - t.sin()]);
            }
        }
        Family::Spiral => {
            for i in 0..n {
                let arm = i % spec.arms;
                let j = i / spec.arms;
                let per_arm = n.div_ceil(spec.arms);
                let s = (j as f64 + 0.5) / per_arm as f64;
                let r = s;
                let angle = tau * spec.turns * s + tau * arm as f64 / spec.arms as f64;
                pts.push([r * angle.cos(), r * angle.sin()]);
            }
        }
        Family::Blobs => {
            let centers: Vec<[f64; 2]> = (0..spec.centers)
                .map(|_| {
                    [
                        rng.random_range(-1.0..=1.0) * spec.box_size,
                        rng.random_range(-1.0..=1.0) * spec.box_size,
                    ]
                })
                .collect();
            for i in 0..n {
                let c = i % spec.centers;
                let s = spec.stds[c % spec.stds.len()];
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                pts.push([centers[c][0] + s * dx, centers[c][1] + s * dy]);
            }
            return Matrix::from_rows(&pts);
        }
    }
    if spec.noise > 0.0 {
        for p in &mut pts {
            for v in p.iter_mut() {
                *v += spec.noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Matrix::from_rows(&pts)
}

// ---------------------------------------------------------------------------
// CSV input and output

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub delimiter: char,
    pub has_header: bool,
    /// Zero-based columns to keep; all columns when unset.
    pub columns: Option<Vec<usize>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: false,
            columns: None,
        }
    }
}

/// Numeric matrix from a delimited text file.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    if !opts.delimiter.is_ascii() {
        return Err(Error::param("CSV delimiter must be an ASCII character"));
    }
    let file = fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter as u8)
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(line, format!("expected {w} fields, found {}", record.len())));
            }
            _ => {}
        }
        let cols: Vec<usize> = match &opts.columns {
            Some(c) => c.clone(),
            None => (0..record.len()).collect(),
        };
        for c in cols {
            let cell = record
                .get(c)
                .ok_or_else(|| parse_err(line, format!("column {c} does not exist")))?;
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {c}: '{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {c}: '{cell}' is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InvalidData(format!("{} contains no data rows", path.display())));
    }
    let cols = values.len() / rows;
    Matrix::new(rows, cols, values)
}

/// Writes a dataset with an `x0,x1,…` header.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..data.cols()).map(|j| format!("x{j}")))?;
    for row in data.iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Baselines

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydResult {
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
    pub sse: f64,
    /// Centroid updates performed by the winning restart.
    pub iterations: usize,
    /// SSE after each assignment step of the winning restart.
    pub sse_trace: Vec<f64>,
}

fn kmeans_plus_plus(data: &Dataset, k: usize, key: &RngKey) -> Matrix {
    let mut rng = key.rng(Stream::Seeding);
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data.iter_rows().map(|x| dist2(x, data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &v) in d2.iter().enumerate() {
                acc += v;
                if v > 0.0 && acc > u {
                    pick = i;
                    break;
                }
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&v| v > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, x) in data.iter_rows().enumerate() {
            d2[i] = d2[i].min(dist2(x, data.row(next)));
        }
    }
    data.select_rows(&chosen)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster means, shifted by each cluster's first member so identical points
/// average exactly; empty clusters keep their previous centroid.
fn update_means(data: &Dataset, assignment: &[usize], prev: &Matrix) -> Matrix {
    let (k, d) = (prev.rows(), prev.cols());
    let mut sums = Matrix::zeros(k, d);
    let mut first: Vec<Option<usize>> = vec![None; k];
    let mut counts = vec![0usize; k];
    for (i, (x, &a)) in data.iter_rows().zip(assignment).enumerate() {
        let shift = data.row(*first[a].get_or_insert(i));
        counts[a] += 1;
        for ((s, v), o) in sums.row_mut(a).iter_mut().zip(x).zip(shift) {
            *s += v - o;
        }
    }
    let mut out = prev.clone();
    for g in 0..k {
        if let Some(f) = first[g] {
            let n = counts[g] as f64;
            for ((o, s), x0) in out.row_mut(g).iter_mut().zip(sums.row(g)).zip(data.row(f)) {
                *o = x0 + s / n;
            }
        }
    }
    out
}

/// k-means++ seeding followed by Lloyd iterations, best of `restarts`.
pub fn lloyd_kmeans(data: &Dataset, k: usize, restarts: usize, max_iter: usize, key: &RngKey) -> Result<LloydResult> {
    if k == 0 || data.rows() < k {
        return Err(Error::param(format!("k = {k} must lie in 1..={}", data.rows())));
    }
    let mut best: Option<LloydResult> = None;
    for r in 0..restarts.max(1) {
        let mut centroids = kmeans_plus_plus(data, k, &key.child(r as u64));
        let mut assignment = assign_nearest(data, &centroids);
        let mut trace = vec![sse(data, &centroids, &assignment)];
        let mut iterations = 0;
        while iterations < max_iter {
            centroids = update_means(data, &assignment, &centroids);
            iterations += 1;
            let next = assign_nearest(data, &centroids);
            trace.push(sse(data, &centroids, &next));
            let done = next == assignment;
            assignment = next;
            if done {
                break;
            }
        }
        let total = *trace.last().expect("trace is never empty");
        if best.as_ref().is_none_or(|b| total < b.sse) {
            best = Some(LloydResult {
                centroids,
                assignment,
                sse: total,
                iterations,
                sse_trace: trace,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// The pipeline with exact sketches and exhaustive per-group selection.
pub fn classical_ckm(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<ClusteringResult> {
    let cfg = PipelineConfig {
        sketch: SketchMode::Exact,
        solver: SolverMode::Exhaustive,
        ..cfg.clone()
    };
    run_qc_kmeans(data, &cfg, seed)
}

// ---------------------------------------------------------------------------
// Experiment grids

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub options: CsvOptions,
}

/// A named dataset: exactly one of `synthetic` or `csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvSource>,
}

impl DatasetEntry {
    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        Self {
            name: name.into(),
            synthetic: Some(spec),
            csv: None,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match (&self.synthetic, &self.csv) {
            (Some(s), None) => generate(s),
            (None, Some(c)) => load_csv(&c.path, &c.options),
            _ => Err(Error::param(format!(
                "dataset '{}' must set exactly one of synthetic or csv",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "qc-kmeans")]
    QcKmeans,
    #[serde(rename = "lloyd")]
    Lloyd,
    #[serde(rename = "classical-ckm")]
    ClassicalCkm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::QcKmeans => "qc-kmeans",
            Method::Lloyd => "lloyd",
            Method::ClassicalCkm => "classical-ckm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LloydConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::QcKmeans, Method::Lloyd]
}

fn software_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// A `dataset × method × k × seed (× m)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default = "software_version")]
    pub version: String,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Frequency counts to sweep; the config's `m` when empty.
    #[serde(default)]
    pub m_values: Vec<usize>,
    #[serde(default)]
    pub config: PipelineConfig,
    #[serde(default)]
    pub lloyd: LloydConfig,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub method: String,
    pub k: usize,
    pub seed: u64,
    /// `NaN` when the run failed.
    pub sse: f64,
    pub m: usize,
    pub q_peak: usize,
    pub time_s: f64,
    pub total_shots: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    dataset: usize,
    method: Method,
    k: usize,
    seed: u64,
    m: Option<usize>,
}

fn run_cell(data: &Dataset, name: &str, cell: Cell, manifest: &RunManifest) -> ExperimentRow {
    let start = Instant::now();
    let outcome = match cell.method {
        Method::Lloyd => lloyd_kmeans(
            data,
            cell.k,
            manifest.lloyd.restarts,
            manifest.lloyd.max_iter,
            &RngSpec::new(cell.seed).key(),
        )
        .map(|r| (r.sse, 0, 0, 0, start.elapsed().as_secs_f64())),
        Method::QcKmeans | Method::ClassicalCkm => {
            let cfg = PipelineConfig {
                k: cell.k,
                m: cell.m.or(manifest.config.m),
                ..manifest.config.clone()
            };
            let run = if cell.method == Method::QcKmeans {
                run_qc_kmeans(data, &cfg, cell.seed)
            } else {
                classical_ckm(data, &cfg, cell.seed)
            };
            run.map(|r| (r.sse_original, r.m, r.q_peak, r.total_shots, r.wall_time_s))
        }
    };
    let base = ExperimentRow {
        dataset: name.to_string(),
        n: data.rows(),
        d: data.cols(),
        method: cell.method.name().to_string(),
        k: cell.k,
        seed: cell.seed,
        sse: f64::NAN,
        m: 0,
        q_peak: 0,
        time_s: 0.0,
        total_shots: 0,
        error: None,
    };
    match outcome {
        Ok((sse, m, q_peak, total_shots, time_s)) => ExperimentRow {
            sse,
            m,
            q_peak,
            total_shots,
            time_s,
            ..base
        },
        Err(e) => ExperimentRow {
            error: Some(e.to_string()),
            ..base
        },
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs every grid cell; failures are recorded in the row's `error`.
pub fn run_grid(manifest: &RunManifest) -> Result<Vec<ExperimentRow>> {
    manifest.config.validate()?;
    let datasets = manifest
        .datasets
        .iter()
        .map(DatasetEntry::load)
        .collect::<Result<Vec<_>>>()?;
    let ms: Vec<Option<usize>> = if manifest.m_values.is_empty() {
        vec![None]
    } else {
        manifest.m_values.iter().map(|&m| Some(m)).collect()
    };
    let mut cells = Vec::new();
    for dataset in 0..datasets.len() {
        for &k in &manifest.ks {
            for &seed in &manifest.seeds {
                for &method in &manifest.methods {
                    if method == Method::Lloyd {
                        cells.push(Cell { dataset, method, k, seed, m: None });
                    } else {
                        cells.extend(ms.iter().map(|&m| Cell { dataset, method, k, seed, m }));
                    }
                }
            }
        }
    }
    with_pool(manifest.workers, || {
        cells
            .par_iter()
            .map(|&c| run_cell(&datasets[c.dataset], &manifest.datasets[c.dataset].name, c, manifest))
            .collect()
    })
}

/// Rows as CSV text; `time_s` is written as 0 when `zero_time` is set.
pub fn rows_to_csv(rows: &[ExperimentRow], zero_time: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "n", "d", "method", "k", "seed", "sse", "m", "q_peak", "time_s", "total_shots"])?;
    for r in rows {
        let time = if zero_time { 0.0 } else { r.time_s };
        w.write_record([
            r.dataset.clone(),
            r.n.to_string(),
            r.d.to_string(),
            r.method.clone(),
            r.k.to_string(),
            r.seed.to_string(),
            r.sse.to_string(),
            r.m.to_string(),
            r.q_peak.to_string(),
            time.to_string(),
            r.total_shots.to_string(),
        ])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `x,y,series` rows: median over seeds of `y` against `x`, one series per
/// dataset, method and k.
pub fn plot_data(rows: &[ExperimentRow], x: impl Fn(&ExperimentRow) -> usize, y: impl Fn(&ExperimentRow) -> f64) -> Result<String> {
    let mut groups: std::collections::BTreeMap<(String, usize), Vec<f64>> = Default::default();
    for r in rows.iter().filter(|r| r.error.is_none() && r.method != Method::Lloyd.name()) {
        let series = format!("{}/{}/k={}", r.dataset, r.method, r.k);
        groups.entry((series, x(r))).or_default().push(y(r));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "series"])?;
    for ((series, xv), ys) in groups {
        w.write_record([xv.to_string(), median(ys).to_string(), series])?;
    }
    into_string(w)
}

/// Rows plus the ablation table, if one was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub ablation: Vec<AblationRow>,
}

/// Runs a manifest and writes `rows.csv`, `rows.json`, `timings.csv`,
/// `sse_vs_m.csv`, `time_vs_qpeak.csv`, `manifest.json` and, with an
/// ablation spec, `ablation.csv` into `out_dir`.
pub fn run_experiment(manifest: &RunManifest, out_dir: &Path) -> Result<ExperimentOutput> {
    let rows = run_grid(manifest)?;
    let ablation = match &manifest.ablation {
        Some(spec) => with_pool(manifest.workers, || run_ablation(spec))??,
        None => Vec::new(),
    };
    fs::create_dir_all(out_dir)?;
    let zero_time = manifest.config.analytic;
    fs::write(out_dir.join("rows.csv"), rows_to_csv(&rows, zero_time)?)?;
    fs::write(out_dir.join("timings.csv"), rows_to_csv(&rows, false)?)?;
    fs::write(out_dir.join("rows.json"), serde_json::to_string_pretty(&rows)?)?;
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    fs::write(out_dir.join("sse_vs_m.csv"), plot_data(&rows, |r| r.m, |r| r.sse)?)?;
    fs::write(
        out_dir.join("time_vs_qpeak.csv"),
        plot_data(&rows, |r| r.q_peak, |r| r.time_s)?,
    )?;
    if manifest.ablation.is_some() {
        fs::write(out_dir.join("ablation.csv"), ablation_to_csv(&ablation)?)?;
    }
    Ok(ExperimentOutput { rows, ablation })
}

// ---------------------------------------------------------------------------
// Ablation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Per-cluster QUBOs solved by QAOA.
    Grouped,
    /// One joint QUBO solved by QAOA.
    Coupled,
    /// One joint QUBO solved by enumeration.
    Exhaustive,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Grouped, Arm::Coupled, Arm::Exhaustive];

    pub fn name(&self) -> &'static str {
        match self {
            Arm::Grouped => "grouped",
            Arm::Coupled => "coupled",
            Arm::Exhaustive => "exhaustive",
        }
    }

    fn configure(&self, base: &PipelineConfig) -> PipelineConfig {
        let (formulation, solver) = match self {
            Arm::Grouped => (Formulation::Grouped, SolverMode::Qaoa),
            Arm::Coupled => (Formulation::Coupled, SolverMode::Qaoa),
            Arm::Exhaustive => (Formulation::Coupled, SolverMode::Exhaustive),
        };
        PipelineConfig {
            formulation,
            solver,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub dataset: DatasetEntry,
    pub k: usize,
    pub candidates: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The instance exceeds a simulation or enumeration limit.
    Capacity,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub dataset: String,
    pub k: usize,
    pub candidates: usize,
    pub arm: Arm,
    pub seed: u64,
    pub status: RunStatus,
    pub sse: Option<f64>,
    pub message: Option<String>,
    /// `F(per-block argmins) - F(joint optimum)` on the first joint QUBO.
    pub qubo_gap: Option<f64>,
    /// `4 Σ ‖R_gh‖_∞` on the same QUBO.
    pub gap_bound: Option<f64>,
}

/// QUBO-level relaxation gap and its bound for the first candidate set.
pub fn first_qubo_gap(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<(f64, f64)> {
    let prep = prepare(data, cfg, seed)?;
    let candidates = prep.initial_candidates(cfg)?;
    let joint = build_joint_qubo(&prep.global_sketch, &candidates, Penalty::Normalized { epsilon: cfg.epsilon })?;
    let (_, opt) = exhaustive_joint(&joint)?;
    let grouped = joint.qubo.onehot_energy(&exhaustive_blocks(&joint)?)?;
    Ok((grouped - opt, relaxation_gap_bounds(&joint).1))
}

/// Runs the three arms on the same data, seeds and candidates.
pub fn run_ablation(spec: &AblationSpec) -> Result<Vec<AblationRow>> {
    let data = spec.dataset.load()?;
    let base = PipelineConfig {
        k: spec.k,
        candidates: spec.candidates,
        ..spec.config.clone()
    };
    base.validate()?;
    let jobs: Vec<(u64, Arm)> = spec
        .seeds
        .iter()
        .flat_map(|&s| Arm::ALL.into_iter().map(move |a| (s, a)))
        .collect();
    let gaps: Vec<Option<(f64, f64)>> = spec
        .seeds
        .par_iter()
        .map(|&s| first_qubo_gap(&data, &base, s).ok())
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(seed, arm)| {
            let gap = gaps[spec.seeds.iter().position(|&s| s == seed).expect("seed is listed")];
            let (status, sse, message) = match run_qc_kmeans(&data, &arm.configure(&base), seed) {
                Ok(r) => (RunStatus::Ok, Some(r.sse_original), None),
                Err(e) if e.is_capacity() => (RunStatus::Capacity, None, Some(e.to_string())),
                Err(e) => (RunStatus::Error, None, Some(e.to_string())),
            };
            AblationRow {
                dataset: spec.dataset.name.clone(),
                k: spec.k,
                candidates: spec.candidates,
                arm,
                seed,
                status,
                sse,
                message,
                qubo_gap: gap.map(|g| g.0),
                gap_bound: gap.map(|g| g.1),
            }
        })
        .collect())
}

fn opt_to_string(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn ablation_to_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "k", "candidates", "arm", "seed", "status", "sse", "qubo_gap", "gap_bound"])?;
    for r in rows {
        let status = match r.status {
            RunStatus::Ok => "ok",
            RunStatus::Capacity => "capacity",
            RunStatus::Error => "error",
        };
        w.write_record([
            r.dataset.clone(),
            r.k.to_string(),
            r.candidates.to_string(),
            r.arm.name().to_string(),
            r.seed.to_string(),
            status.to_string(),
            opt_to_string(r.sse),
            opt_to_string(r.qubo_gap),
            opt_to_string(r.gap_bound),
        ])?;
    }
    into_string(w)
}
