//! QAOA and exhaustive solvers for one-hot QUBOs.
//!
//! A QAOA circuit acts on one qubit per QUBO variable. Each layer applies
//! the diagonal cost phase `exp(-i γ E)` and then an XY ring mixer inside
//! every group, so the per-group Hamming weight is conserved. Angles are
//! found by a coarse grid followed by a pattern search; the answer is the
//! lowest-energy one-hot bitstring seen in any sample.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{JointQubo, OneHotAssignment, Qubo};
use crate::rng::{RngKey, Stream};
use crate::statevec::{split_shots, Executor, Gate, Statevector, MAX_QUBITS};

/// Largest group size accepted by [`exhaustive_group`].
pub const MAX_GROUP_ENUMERATION: usize = 24;
/// Largest number of one-hot combinations accepted by [`exhaustive_joint`].
pub const MAX_JOINT_COMBINATIONS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitState {
    /// Equal superposition of the one-hot states of each group.
    #[default]
    WState,
    /// Candidate 0 selected in each group.
    SingleExcitation,
}

/// Order of the XY pair gates inside one mixer layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerSchedule {
    /// `(0,1), (1,2), …, (D-2,D-1)`, then the wrap pair `(D-1,0)`.
    #[default]
    Ring,
    /// Pairs starting at even positions, then at odd positions, then wrap.
    Brickwork,
}

/// Qubit pairs of one ring-mixer layer over `d` qubits.
pub fn mixer_pairs(d: usize, schedule: MixerSchedule) -> Vec<(usize, usize)> {
    if d < 2 {
        return Vec::new();
    }
    let mut pairs: Vec<(usize, usize)> = match schedule {
        MixerSchedule::Ring => (0..d - 1).map(|i| (i, i + 1)).collect(),
        MixerSchedule::Brickwork => (0..d - 1)
            .step_by(2)
            .chain((1..d - 1).step_by(2))
            .map(|i| (i, i + 1))
            .collect(),
    };
    if d >= 3 {
        pairs.push((d - 1, 0));
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Grid points along γ ∈ [0, π).
    pub grid_gamma: usize,
    /// Grid points along β ∈ [0, π/2).
    pub grid_beta: usize,
    /// Extra evaluations spent on pattern search after the grid.
    pub refine_budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_gamma: 8,
            grid_beta: 8,
            refine_budget: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaoaConfig {
    /// Layer count `p`.
    pub p: usize,
    /// Shots drawn at the optimized angles.
    pub shots: u64,
    /// Shots per objective evaluation when the objective is sampled.
    pub search_shots: u64,
    pub init: InitState,
    pub mixer: MixerSchedule,
    pub search: SearchConfig,
    /// Use exact expectations during the search even under noise.
    pub analytic: bool,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            p: 1,
            shots: 10_000,
            search_shots: 1024,
            init: InitState::WState,
            mixer: MixerSchedule::Ring,
            search: SearchConfig::default(),
            analytic: false,
        }
    }
}

impl QaoaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::param("QAOA depth p must be at least 1"));
        }
        if self.shots == 0 || self.search_shots == 0 {
            return Err(Error::param("QAOA shot counts must be at least 1"));
        }
        if self.search.grid_gamma == 0 || self.search.grid_beta == 0 {
            return Err(Error::param("QAOA grid needs at least one point per axis"));
        }
        Ok(())
    }
}

/// Two-qubit interaction counts of a QAOA circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCounts {
    pub mixer_2q: u64,
    pub cost_2q: u64,
}

/// `(p·D, p·nnz)`; no mixer interactions when `D = 1`.
pub fn gate_count_report(d: usize, p: usize, nnz: usize) -> GateCounts {
    let mixer = if d >= 2 { p * d } else { 0 };
    GateCounts {
        mixer_2q: mixer as u64,
        cost_2q: (p * nnz) as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Selected candidate per group.
    pub selected: OneHotAssignment,
    /// Normalized energy of the selection.
    pub energy: f64,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Best objective reached by the angle search.
    pub objective: f64,
    /// One-hot fraction of the final samples.
    pub feasible_fraction: f64,
    /// `energy - min over one-hot states`.
    pub delta: Option<f64>,
    pub gates: GateCounts,
    pub evaluations: usize,
    pub shots: u64,
    /// No one-hot sample was seen and the selection came from enumeration.
    pub fallback: bool,
}

/// Product of per-group initial states, group 0 on the low qubits.
pub fn initial_state(groups: &[usize], init: InitState) -> Result<Statevector> {
    let mut parts = groups.iter().map(|&d| match init {
        InitState::WState => Statevector::prepare_w_state(d),
        InitState::SingleExcitation => Statevector::basis(d, 1),
    });
    let first = parts.next().ok_or_else(|| Error::param("no groups"))??;
    parts.try_fold(first, |acc, s| acc.tensor(&s?))
}

/// Gate list of a `p`-layer circuit over the given group layout.
pub fn qaoa_gates<'a>(
    energies: &'a [f64],
    groups: &[usize],
    gammas: &[f64],
    betas: &[f64],
    mixer: MixerSchedule,
) -> Result<Vec<Gate<'a>>> {
    if gammas.len() != betas.len() || gammas.is_empty() {
        return Err(Error::param("need one (γ, β) pair per layer"));
    }
    let mut pairs = Vec::new();
    let mut offset = 0;
    for &d in groups {
        pairs.extend(mixer_pairs(d, mixer).into_iter().map(|(a, b)| (a + offset, b + offset)));
        offset += d;
    }
    let mut gates = Vec::with_capacity(gammas.len() * (1 + pairs.len()));
    for (&gamma, &beta) in gammas.iter().zip(betas) {
        gates.push(Gate::CostPhase { energies, gamma });
        gates.extend(pairs.iter().map(|&(a, b)| Gate::XyPair { a, b, beta }));
    }
    Ok(gates)
}

/// Noiseless final state of a QAOA circuit.
pub fn qaoa_circuit(
    energies: &[f64],
    groups: &[usize],
    gammas: &[f64],
    betas: &[f64],
    init: InitState,
    mixer: MixerSchedule,
) -> Result<Statevector> {
    let mut s = initial_state(groups, init)?;
    if energies.len() != s.amplitudes().len() {
        return Err(Error::DimensionMismatch {
            expected: s.amplitudes().len(),
            actual: energies.len(),
        });
    }
    for g in qaoa_gates(energies, groups, gammas, betas, mixer)? {
        s.apply_gate(&g)?;
    }
    Ok(s)
}

fn expectation(state: &Statevector, energies: &[f64]) -> f64 {
    state
        .amplitudes()
        .iter()
        .zip(energies)
        .map(|(a, e)| a.norm_sqr() * e)
        .sum()
}

/// Minimum over one-hot states, lowest lexicographic assignment on ties.
fn enumerate_onehot(qubo: &Qubo, cap: u128) -> Result<(OneHotAssignment, f64)> {
    let combos = qubo
        .groups
        .iter()
        .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))
        .unwrap_or(u128::MAX);
    if combos > cap {
        return Err(Error::Capacity {
            what: "one-hot combinations",
            requested: combos,
            limit: cap,
        });
    }
    let offsets = qubo.offsets();
    let k = qubo.k();
    let mut x = vec![0usize; k];
    let mut best = (x.clone(), f64::INFINITY);
    loop {
        let mut e = 0.0;
        for g in 0..k {
            let i = offsets[g] + x[g];
            e += qubo.c[i];
            for h in 0..k {
                e += qubo.q_at(i, offsets[h] + x[h]);
            }
        }
        if e < best.1 {
            best = (x.clone(), e);
        }
        // odometer with the last group varying fastest
        let mut g = k;
        loop {
            if g == 0 {
                return Ok(best);
            }
            g -= 1;
            x[g] += 1;
            if x[g] < qubo.groups[g] {
                break;
            }
            x[g] = 0;
        }
    }
}

/// Exact argmin over the `D_g` one-hot states of a single-group QUBO.
pub fn exhaustive_group(qubo: &Qubo) -> Result<SolveReport> {
    if qubo.k() != 1 {
        return Err(Error::param("exhaustive_group expects a single-group QUBO"));
    }
    if qubo.n() > MAX_GROUP_ENUMERATION {
        return Err(Error::Capacity {
            what: "group candidates",
            requested: qubo.n() as u128,
            limit: MAX_GROUP_ENUMERATION as u128,
        });
    }
    let (selected, energy) = enumerate_onehot(qubo, u128::MAX)?;
    Ok(SolveReport {
        selected,
        energy,
        gammas: Vec::new(),
        betas: Vec::new(),
        objective: energy,
        feasible_fraction: 1.0,
        delta: Some(0.0),
        gates: GateCounts::default(),
        evaluations: 0,
        shots: 0,
        fallback: false,
    })
}

/// Exact argmin of the joint objective over all one-hot combinations.
pub fn exhaustive_joint(joint: &JointQubo) -> Result<(OneHotAssignment, f64)> {
    enumerate_onehot(&joint.qubo, MAX_JOINT_COMBINATIONS)
}

/// Concatenation of the per-block exhaustive argmins.
pub fn exhaustive_blocks(joint: &JointQubo) -> Result<OneHotAssignment> {
    joint
        .groups()
        .iter()
        .map(|g| exhaustive_group(g).map(|r| r.selected[0]))
        .collect()
}

struct Tracker<'a> {
    qubo: &'a Qubo,
    energies: &'a [f64],
    best: Option<(u64, f64)>,
}

impl Tracker<'_> {
    fn observe(&mut self, counts: &BTreeMap<u64, u64>) -> (f64, u64, u64) {
        let (mut sum, mut total, mut feasible) = (0.0, 0u64, 0u64);
        for (&b, &n) in counts {
            let e = self.energies[b as usize];
            sum += e * n as f64;
            total += n;
            if self.qubo.decode_onehot(b).is_some() {
                feasible += n;
                if self.best.is_none_or(|(bb, be)| e < be || (e == be && b < bb)) {
                    self.best = Some((b, e));
                }
            }
        }
        (sum / total as f64, total, feasible)
    }
}

/// QAOA over the QUBO's group layout with per-group ring mixers.
pub fn qaoa_solve(qubo: &Qubo, cfg: &QaoaConfig, exec: &Executor, key: &RngKey) -> Result<SolveReport> {
    cfg.validate()?;
    let n = qubo.n();
    if n > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "QAOA qubits",
            requested: n as u128,
            limit: MAX_QUBITS as u128,
        });
    }
    let (opt_assignment, _) = enumerate_onehot(qubo, u128::MAX)?;
    let energies = qubo.to_diagonal_energies()?;
    let opt = energies[qubo.encode_onehot(&opt_assignment)? as usize];
    let gates = GateCounts {
        mixer_2q: qubo
            .groups
            .iter()
            .map(|&d| gate_count_report(d, cfg.p, 0).mixer_2q)
            .sum(),
        cost_2q: gate_count_report(1, cfg.p, qubo.ising_coupling_count()).cost_2q,
    };
    if qubo.groups.iter().all(|&d| d == 1) {
        let selected = vec![0; qubo.k()];
        return Ok(SolveReport {
            selected,
            energy: opt,
            gammas: Vec::new(),
            betas: Vec::new(),
            objective: opt,
            feasible_fraction: 1.0,
            delta: Some(0.0),
            gates,
            evaluations: 0,
            shots: 0,
            fallback: false,
        });
    }

    let init = initial_state(&qubo.groups, cfg.init)?;
    let exact = !exec.is_noisy() || cfg.analytic;
    let mut tracker = Tracker {
        qubo,
        energies: &energies,
        best: None,
    };
    let mut shots_used = 0u64;
    let mut evaluations = 0usize;
    let p = cfg.p;

    let mut run = |x: &[f64], shots: u64, sampled: bool, tag: u64, tracker: &mut Tracker<'_>| -> Result<(f64, u64, u64)> {
        let circuit = qaoa_gates(&energies, &qubo.groups, &x[..p], &x[p..], cfg.mixer)?;
        let eval_key = key.child(tag);
        let states = exec.run(&init, &circuit, &eval_key)?;
        if !sampled {
            let e = states.iter().map(|s| expectation(s, &energies)).sum::<f64>() / states.len() as f64;
            return Ok((e, 0, 0));
        }
        let mut rng = eval_key.rng(Stream::Shots);
        let mut counts = BTreeMap::new();
        for (s, k) in states.iter().zip(split_shots(shots, states.len())) {
            if k > 0 {
                for (b, c) in s.sample_shots(k, exec.noise.as_ref(), &mut rng)?.counts {
                    *counts.entry(b).or_insert(0) += c;
                }
            }
        }
        exec.meter.add_shots(shots);
        shots_used += shots;
        Ok(tracker.observe(&counts))
    };

    let mut objective = |x: &[f64], tracker: &mut Tracker<'_>| -> Result<f64> {
        evaluations += 1;
        Ok(run(x, cfg.search_shots, !exact, evaluations as u64, tracker)?.0)
    };

    let (gg, gb) = (cfg.search.grid_gamma, cfg.search.grid_beta);
    let mut best_x = vec![0.0; 2 * p];
    let mut best_f = f64::INFINITY;
    for i in 0..gg {
        for j in 0..gb {
            let gamma = PI * i as f64 / gg as f64;
            let beta = PI / 2.0 * j as f64 / gb as f64;
            let x: Vec<f64> = std::iter::repeat_n(gamma, p).chain(std::iter::repeat_n(beta, p)).collect();
            let f = objective(&x, &mut tracker)?;
            if f < best_f {
                best_f = f;
                best_x = x;
            }
        }
    }
    let mut steps: Vec<f64> = std::iter::repeat_n(PI / gg as f64 / 2.0, p)
        .chain(std::iter::repeat_n(PI / 2.0 / gb as f64 / 2.0, p))
        .collect();
    let mut spent = 0;
    'search: while spent < cfg.search.refine_budget {
        let mut improved = false;
        for c in 0..2 * p {
            for sign in [1.0, -1.0] {
                if spent >= cfg.search.refine_budget {
                    break 'search;
                }
                let mut x = best_x.clone();
                x[c] += sign * steps[c];
                spent += 1;
                let f = objective(&x, &mut tracker)?;
                if f < best_f {
                    best_f = f;
                    best_x = x;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s /= 2.0);
            if steps.iter().all(|&s| s < 1e-6) {
                break;
            }
        }
    }

    let (_, total, feasible) = run(&best_x, cfg.shots, true, 0, &mut tracker)?;
    let (selected, energy, fallback) = match tracker.best {
        Some((b, e)) => (qubo.decode_onehot(b).expect("tracked states are one-hot"), e, false),
        None => (opt_assignment, opt, true),
    };
    Ok(SolveReport {
        selected,
        energy,
        gammas: best_x[..p].to_vec(),
        betas: best_x[p..].to_vec(),
        objective: best_f,
        feasible_fraction: feasible as f64 / total as f64,
        delta: Some((energy - opt).max(0.0)),
        gates,
        evaluations,
        shots: shots_used,
        fallback,
    })
}
