//! End-to-end clustering.
//!
//! The data are standardized and sketched once. Lloyd seeds define the
//! initial groups. Each outer iteration then:
//!
//! 1. reassigns points to the current centroids (after the first pass),
//! 2. re-estimates each cluster's sketch,
//! 3. draws `D` candidates per cluster around the current centroid, keeping
//!    the previous selection in slot 0,
//! 4. selects one candidate per cluster by solving a one-hot QUBO.
//!
//! The loop stops once centroids move less than `tau` or after `refinement`
//! extra passes. Centroids are mapped back to the input space for the final
//! assignment and SSE.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::lloyd_kmeans;
use crate::data::{
    assign_nearest, complex_dist_sqr, sample_frequencies, sse, standardize, Centroids, Dataset, FrequencyMatrix,
    Matrix, Sketch, Standardizer,
};
use crate::error::{Error, Result};
use crate::qubo::{build_group_qubo, build_joint_qubo, CandidateGroup, CandidateSet, Penalty, DEFAULT_EPSILON};
use crate::rng::{RngKey, RngSpec, Stream};
use crate::sketch::{ceil_log2, exact_sketch, group_sketch, members, qff_estimate_sketch, QffConfig};
use crate::solver::{exhaustive_group, exhaustive_joint, qaoa_solve, QaoaConfig};
use crate::statevec::{Executor, NoiseModel, DEFAULT_TRAJECTORIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Qaoa,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// One QUBO per cluster against that cluster's sketch.
    #[default]
    Grouped,
    /// One QUBO over all clusters against the global sketch.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMode {
    /// Hadamard-test estimation.
    #[default]
    Qff,
    /// Direct feature averaging.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterConfig {
    /// Initial scale `σ₀` in standardized units.
    pub sigma0: f64,
    /// Per-iteration decay `η`: `σ_t = σ₀ η^t`.
    pub eta: f64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self { sigma0: 0.5, eta: 0.7 }
    }
}

/// Lloyd settings used for seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedingConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for SeedingConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iter: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub k: usize,
    /// Frequency count; `4·k·d` when unset.
    pub m: Option<usize>,
    /// Candidates per cluster `D`.
    pub candidates: usize,
    /// Frequency scale `σ`.
    pub sigma: f64,
    pub qff: QffConfig,
    pub qaoa: QaoaConfig,
    pub epsilon: f64,
    /// Maximum number of refinement passes after the initial solve.
    pub refinement: usize,
    pub tau: f64,
    pub jitter: JitterConfig,
    pub seeding: SeedingConfig,
    pub solver: SolverMode,
    pub formulation: Formulation,
    pub sketch: SketchMode,
    pub noise: Option<NoiseModel>,
    pub trajectories: usize,
    /// Exact expectations instead of sampled shots in QFF and the QAOA search.
    pub analytic: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 3,
            m: None,
            candidates: 6,
            sigma: 1.0,
            qff: QffConfig::default(),
            qaoa: QaoaConfig::default(),
            epsilon: DEFAULT_EPSILON,
            refinement: 5,
            tau: 1e-3,
            jitter: JitterConfig::default(),
            seeding: SeedingConfig::default(),
            solver: SolverMode::Qaoa,
            formulation: Formulation::Grouped,
            sketch: SketchMode::Qff,
            noise: None,
            trajectories: DEFAULT_TRAJECTORIES,
            analytic: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if self.candidates == 0 {
            return Err(Error::param("candidates per cluster must be at least 1"));
        }
        if self.m == Some(0) {
            return Err(Error::param("m must be at least 1"));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::param("tau must be non-negative"));
        }
        if !(self.jitter.eta > 0.0 && self.jitter.eta <= 1.0) {
            return Err(Error::param("jitter decay must lie in (0, 1]"));
        }
        if !(self.jitter.sigma0 >= 0.0) {
            return Err(Error::param("jitter scale must be non-negative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon must be positive"));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        self.qff.validate()?;
        self.qaoa.validate()
    }

    /// Frequency count for `d`-dimensional data.
    pub fn frequencies(&self, d: usize) -> usize {
        self.m.unwrap_or(4 * self.k * d)
    }

    fn qff_config(&self) -> QffConfig {
        QffConfig {
            analytic: self.analytic || self.qff.analytic,
            ..self.qff
        }
    }

    fn qaoa_config(&self) -> QaoaConfig {
        QaoaConfig {
            analytic: self.analytic || self.qaoa.analytic,
            ..self.qaoa
        }
    }
}

/// `max{D, max(1, ceil(log2 B)) + 1}`.
pub fn q_peak(d: usize, b: usize) -> usize {
    d.max(ceil_log2(b).max(1) + 1)
}

/// Lloyd centroids on standardized data.
pub fn seed_centroids(data: &Dataset, k: usize, cfg: &SeedingConfig, key: &RngKey) -> Result<Centroids> {
    if data.rows() < k {
        return Err(Error::param(format!("k = {k} exceeds the {} data points", data.rows())));
    }
    Ok(lloyd_kmeans(data, k, cfg.restarts.max(1), cfg.max_iter, key)?.centroids)
}

/// `D` candidates per row of `centers`: slot 0 is the elite row when given,
/// every other slot is the center plus `N(0, scale²)` jitter per coordinate.
pub fn generate_candidates(
    centers: &Matrix,
    d: usize,
    scale: f64,
    elite: Option<&Matrix>,
    w: &FrequencyMatrix,
    key: &RngKey,
) -> Result<CandidateSet> {
    if d == 0 {
        return Err(Error::param("candidates per cluster must be at least 1"));
    }
    if let Some(e) = elite {
        if e.rows() != centers.rows() || e.cols() != centers.cols() {
            return Err(Error::DimensionMismatch {
                expected: centers.rows() * centers.cols(),
                actual: e.rows() * e.cols(),
            });
        }
    }
    let groups = (0..centers.rows())
        .map(|g| {
            let mut rng = key.child(g as u64).rng(Stream::Jitter);
            let center = centers.row(g);
            let mut cands = Vec::with_capacity(d);
            if let Some(e) = elite {
                cands.push(e.row(g).to_vec());
            }
            while cands.len() < d {
                cands.push(
                    center
                        .iter()
                        .map(|&c| c + scale * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
            }
            CandidateGroup::new(cands, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet { groups })
}

/// `f_g = ‖v_{g, r_g} - z_g‖²` per group.
pub fn surrogate_cost(selections: &[usize], sketches: &[Sketch], candidates: &CandidateSet) -> Result<Vec<f64>> {
    if selections.len() != candidates.k() || sketches.len() != candidates.k() {
        return Err(Error::DimensionMismatch {
            expected: candidates.k(),
            actual: selections.len().min(sketches.len()),
        });
    }
    selections
        .iter()
        .zip(sketches)
        .zip(&candidates.groups)
        .map(|((&r, z), g)| {
            let v = g
                .features
                .get(r)
                .ok_or_else(|| Error::param(format!("selection {r} out of range")))?;
            if v.len() != z.len() {
                return Err(Error::DimensionMismatch {
                    expected: z.len(),
                    actual: v.len(),
                });
            }
            Ok(complex_dist_sqr(v, &z.z))
        })
        .collect()
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub jitter: f64,
    pub cluster_sizes: Vec<usize>,
    /// Chosen candidate per group; `None` when the group was skipped.
    pub selected: Vec<Option<usize>>,
    /// The previous selection kept its slot and was chosen again.
    pub retained: Vec<bool>,
    /// Cost of the retained candidate under this iteration's target.
    pub cost_before: Vec<Option<f64>>,
    /// Cost of the chosen candidate under this iteration's target.
    pub cost_after: Vec<Option<f64>>,
    /// Measured solver suboptimality in the same units as the costs.
    pub delta: Vec<Option<f64>>,
    /// Joint objective `‖z_X - z_μ‖²` before and after (coupled runs).
    pub objective_before: Option<f64>,
    pub objective_after: Option<f64>,
    /// Frobenius norm of the centroid change in standardized space.
    pub movement: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// `k × d`, input space.
    pub centroids: Centroids,
    pub assignment: Vec<usize>,
    /// SSE in the input space.
    pub sse_original: f64,
    /// `cost_after` of every iteration.
    pub surrogate_costs: Vec<Vec<Option<f64>>>,
    pub q_peak: usize,
    /// Widest register actually simulated.
    pub max_register: usize,
    /// Refinement passes executed after the initial solve.
    pub iterations: usize,
    pub wall_time_s: f64,
    pub total_shots: u64,
    pub m: usize,
    pub trace: IterationTrace,
}

/// Everything fixed before the first solve.
pub struct Prepared {
    pub standardized: Dataset,
    pub scaler: Standardizer,
    pub w: FrequencyMatrix,
    pub exec: Executor,
    pub global_sketch: Sketch,
    pub seeds: Centroids,
    pub assignment: Vec<usize>,
    pub root: RngKey,
}

const KEY_FREQUENCIES: u64 = 1;
const KEY_GLOBAL_SKETCH: u64 = 2;
const KEY_SEEDING: u64 = 3;
const KEY_ITERATIONS: u64 = 10;
const KEY_SKETCH: u64 = 0;
const KEY_CANDIDATES: u64 = 1;
const KEY_SOLVE: u64 = 2;

impl Prepared {
    fn iteration_key(&self, t: usize) -> RngKey {
        self.root.child(KEY_ITERATIONS + t as u64)
    }

    /// Candidates of the first solve.
    pub fn initial_candidates(&self, cfg: &PipelineConfig) -> Result<CandidateSet> {
        generate_candidates(
            &self.seeds,
            cfg.candidates,
            cfg.jitter.sigma0,
            None,
            &self.w,
            &self.iteration_key(0).child(KEY_CANDIDATES),
        )
    }
}

/// Standardize, draw frequencies, sketch and seed.
pub fn prepare(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<Prepared> {
    cfg.validate()?;
    if data.rows() < cfg.k {
        return Err(Error::param(format!("k = {} exceeds the {} data points", cfg.k, data.rows())));
    }
    let root = RngSpec::new(seed).key();
    let (standardized, scaler) = standardize(data)?;
    let w = sample_frequencies(
        cfg.frequencies(data.cols()),
        data.cols(),
        cfg.sigma,
        &root.child(KEY_FREQUENCIES),
    )?;
    let exec = Executor::with_noise(cfg.noise, cfg.trajectories)?;
    let global_sketch = match cfg.sketch {
        SketchMode::Qff => qff_estimate_sketch(&standardized, &w, &cfg.qff_config(), &exec, &root.child(KEY_GLOBAL_SKETCH))?,
        SketchMode::Exact => exact_sketch(&standardized, &w)?,
    };
    let seeds = seed_centroids(&standardized, cfg.k, &cfg.seeding, &root.child(KEY_SEEDING))?;
    let assignment = assign_nearest(&standardized, &seeds);
    Ok(Prepared {
        standardized,
        scaler,
        w,
        exec,
        global_sketch,
        seeds,
        assignment,
        root,
    })
}

struct GroupOutcome {
    centroid: Option<Vec<f64>>,
    selected: Option<usize>,
    cost_before: Option<f64>,
    cost_after: Option<f64>,
    delta: Option<f64>,
}

fn solve_grouped(
    prep: &Prepared,
    cfg: &PipelineConfig,
    assignment: &[usize],
    candidates: &CandidateSet,
    has_elite: bool,
    key: &RngKey,
) -> Result<Vec<GroupOutcome>> {
    let qff = cfg.qff_config();
    let qaoa = cfg.qaoa_config();
    let penalty = Penalty::Normalized { epsilon: cfg.epsilon };
    (0..cfg.k)
        .into_par_iter()
        .map(|g| {
            let idx = members(assignment, g);
            let target = if idx.is_empty() {
                if has_elite {
                    return Ok(GroupOutcome {
                        centroid: None,
                        selected: None,
                        cost_before: None,
                        cost_after: None,
                        delta: None,
                    });
                }
                prep.global_sketch.clone()
            } else {
                match cfg.sketch {
                    SketchMode::Qff => group_sketch(
                        &prep.standardized,
                        assignment,
                        g,
                        &prep.w,
                        &qff,
                        &prep.exec,
                        &key.child(KEY_SKETCH).child(g as u64),
                    )?,
                    SketchMode::Exact => exact_sketch(&prep.standardized.select_rows(&idx), &prep.w)?,
                }
            };
            let group = &candidates.groups[g];
            let qubo = build_group_qubo(&target, &group.features, penalty)?;
            let report = match cfg.solver {
                SolverMode::Qaoa => qaoa_solve(&qubo, &qaoa, &prep.exec, &key.child(KEY_SOLVE).child(g as u64))?,
                SolverMode::Exhaustive => exhaustive_group(&qubo)?,
            };
            let r = report.selected[0];
            let cost = |i: usize| complex_dist_sqr(&group.features[i], &target.z);
            Ok(GroupOutcome {
                centroid: Some(group.centroids[r].clone()),
                selected: Some(r),
                cost_before: has_elite.then(|| cost(0)),
                cost_after: Some(cost(r)),
                delta: report.delta.map(|d| d * qubo.s_coef),
            })
        })
        .collect()
}

fn joint_objective(z: &Sketch, candidates: &CandidateSet, x: &[usize]) -> f64 {
    let k = candidates.k() as f64;
    let mut mu = vec![Complex64::new(0.0, 0.0); z.len()];
    for (g, &r) in candidates.groups.iter().zip(x) {
        for (acc, v) in mu.iter_mut().zip(&g.features[r]) {
            *acc += v / k;
        }
    }
    complex_dist_sqr(&z.z, &mu)
}

/// Runs the full clustering pipeline with all randomness keyed by `seed`.
pub fn run_qc_kmeans(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<ClusteringResult> {
    let start = Instant::now();
    let prep = prepare(data, cfg, seed)?;
    let k = cfg.k;
    let mut centroids = prep.seeds.clone();
    let mut assignment = prep.assignment.clone();
    let mut trace = IterationTrace::default();

    for t in 0..=cfg.refinement {
        let key = prep.iteration_key(t);
        let has_elite = t > 0;
        if has_elite {
            assignment = assign_nearest(&prep.standardized, &centroids);
        }
        let mut sizes = vec![0; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        let jitter = cfg.jitter.sigma0 * cfg.jitter.eta.powi(t as i32);
        let candidates = generate_candidates(
            &centroids,
            cfg.candidates,
            jitter,
            has_elite.then_some(&centroids),
            &prep.w,
            &key.child(KEY_CANDIDATES),
        )?;

        let mut record = IterationRecord {
            iteration: t,
            jitter,
            cluster_sizes: sizes,
            selected: vec![None; k],
            retained: vec![false; k],
            cost_before: vec![None; k],
            cost_after: vec![None; k],
            delta: vec![None; k],
            objective_before: None,
            objective_after: None,
            movement: 0.0,
        };
        let mut next = centroids.clone();
        match cfg.formulation {
            Formulation::Grouped => {
                let outcomes = solve_grouped(&prep, cfg, &assignment, &candidates, has_elite, &key)?;
                for (g, o) in outcomes.into_iter().enumerate() {
                    if let Some(c) = o.centroid {
                        next.row_mut(g).copy_from_slice(&c);
                    }
                    record.selected[g] = o.selected;
                    record.retained[g] = has_elite && o.selected == Some(0);
                    record.cost_before[g] = o.cost_before;
                    record.cost_after[g] = o.cost_after;
                    record.delta[g] = o.delta;
                }
            }
            Formulation::Coupled => {
                let z = &prep.global_sketch;
                let joint = build_joint_qubo(z, &candidates, Penalty::Normalized { epsilon: cfg.epsilon })?;
                let (x, delta) = match cfg.solver {
                    SolverMode::Qaoa => {
                        let r = qaoa_solve(&joint.qubo, &cfg.qaoa_config(), &prep.exec, &key.child(KEY_SOLVE))?;
                        (r.selected, r.delta.map(|d| d * joint.qubo.s_coef))
                    }
                    SolverMode::Exhaustive => (exhaustive_joint(&joint)?.0, Some(0.0)),
                };
                for (g, &r) in x.iter().enumerate() {
                    next.row_mut(g).copy_from_slice(&candidates.groups[g].centroids[r]);
                    record.selected[g] = Some(r);
                    record.retained[g] = has_elite && r == 0;
                    record.delta[g] = delta;
                }
                record.objective_before = has_elite.then(|| joint_objective(z, &candidates, &vec![0; k]));
                record.objective_after = Some(joint_objective(z, &candidates, &x));
            }
        }
        record.movement = next.distance(&centroids);
        centroids = next;
        let movement = record.movement;
        trace.iterations.push(record);
        if t > 0 && movement <= cfg.tau {
            trace.converged = true;
            break;
        }
    }

    let original = prep.scaler.inverse_transform(&centroids);
    let final_assignment = assign_nearest(data, &original);
    let sse_original = sse(data, &original, &final_assignment);
    let b = cfg.qff.subsample.min(data.rows());
    let width = match (cfg.formulation, cfg.solver) {
        (Formulation::Coupled, SolverMode::Qaoa) => k * cfg.candidates,
        _ => cfg.candidates,
    };
    Ok(ClusteringResult {
        centroids: original,
        assignment: final_assignment,
        sse_original,
        surrogate_costs: trace.iterations.iter().map(|r| r.cost_after.clone()).collect(),
        q_peak: q_peak(width, b),
        max_register: prep.exec.meter.max_qubits(),
        iterations: trace.iterations.len() - 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        total_shots: prep.exec.meter.shots(),
        m: prep.w.m(),
        trace,
    })
}
