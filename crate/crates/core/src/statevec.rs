//! Dense statevector simulator.
//!
//! Qubit 0 is the least significant bit of the basis index. Gates mutate the
//! state in place. Noise follows stochastic Pauli trajectories: after an
//! ideal gate, each touched qubit independently receives a uniformly random
//! X, Y or Z with probability `p1` (single-qubit gates) or `p2` (everything
//! wider). Readout errors flip measured bits with probability `p_ro`.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngKey, Stream};

pub const MAX_QUBITS: usize = 20;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amps: Vec<Complex64>,
    qubits: usize,
}

fn check_qubits(q: usize) -> Result<()> {
    if q == 0 || q > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "statevector qubits",
            requested: q as u128,
            limit: MAX_QUBITS as u128,
        });
    }
    Ok(())
}

impl Statevector {
    /// `|0…0⟩` on `q` qubits.
    pub fn init_zero(q: usize) -> Result<Self> {
        Self::basis(q, 0)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(q: usize, index: usize) -> Result<Self> {
        check_qubits(q)?;
        if index >= 1 << q {
            return Err(Error::param(format!("basis index {index} out of range for {q} qubits")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << q];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, qubits: q })
    }

    /// Equal superposition of the `q` weight-one basis states.
    pub fn prepare_w_state(q: usize) -> Result<Self> {
        check_qubits(q)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << q];
        let a = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
        for t in 0..q {
            amps[1 << t] = a;
        }
        Ok(Self { amps, qubits: q })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the
    /// vector must be normalized to within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() || amps.len() < 2 {
            return Err(Error::param(format!("amplitude count {} is not 2^q with q >= 1", amps.len())));
        }
        let q = amps.len().trailing_zeros() as usize;
        check_qubits(q)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidData(format!("state norm² is {norm}")));
        }
        Ok(Self { amps, qubits: q })
    }

    /// Tensor product `self ⊗ other` with `self` on the low qubits.
    pub fn tensor(&self, other: &Statevector) -> Result<Statevector> {
        let q = self.qubits + other.qubits;
        check_qubits(q)?;
        let mut amps = Vec::with_capacity(1 << q);
        for hi in &other.amps {
            for lo in &self.amps {
                amps.push(lo * hi);
            }
        }
        Ok(Statevector { amps, qubits: q })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check(&self, qubit: usize) -> Result<()> {
        if qubit >= self.qubits {
            return Err(Error::param(format!(
                "qubit {qubit} out of range for a {}-qubit state",
                self.qubits
            )));
        }
        Ok(())
    }

    fn apply_1q(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        self.check(qubit)?;
        let bit = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, qubit: usize) -> Result<()> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_1q(qubit, [[h, h], [h, -h]])
    }

    /// Phase `-i` on the `|1⟩` component.
    pub fn apply_sdg(&mut self, qubit: usize) -> Result<()> {
        self.check(qubit)?;
        let bit = 1usize << qubit;
        let minus_i = Complex64::new(0.0, -1.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a *= minus_i;
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, qubit: usize, pauli: Pauli) -> Result<()> {
        let (o, l, i) = (
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
        );
        match pauli {
            Pauli::X => self.apply_1q(qubit, [[o, l], [l, o]]),
            Pauli::Y => self.apply_1q(qubit, [[o, -i], [i, o]]),
            Pauli::Z => self.apply_1q(qubit, [[l, o], [o, -l]]),
        }
    }

    /// Multiplies the amplitude at `(control = 1, targets = m)` by
    /// `exp(i θ_m)`. `targets` is a contiguous qubit range whose low end
    /// holds the least significant bit of `m`.
    pub fn apply_controlled_diagonal(
        &mut self,
        oracle: &DiagonalOracle,
        control: usize,
        targets: Range<usize>,
    ) -> Result<()> {
        self.check(control)?;
        if targets.is_empty() || targets.end > self.qubits {
            return Err(Error::param(format!("target range {targets:?} invalid for {} qubits", self.qubits)));
        }
        if targets.contains(&control) {
            return Err(Error::param("control qubit lies inside the target range"));
        }
        let width = targets.len();
        if oracle.phases.len() != 1 << width {
            return Err(Error::DimensionMismatch {
                expected: 1 << width,
                actual: oracle.phases.len(),
            });
        }
        let cbit = 1usize << control;
        let mask = (1usize << width) - 1;
        let factors: Vec<Complex64> = oracle.phases.iter().map(|&t| Complex64::cis(t)).collect();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & cbit != 0 {
                *a *= factors[(i >> targets.start) & mask];
            }
        }
        Ok(())
    }

    /// Multiplies amplitude `b` by `exp(-i γ E_b)`.
    pub fn apply_cost_phase(&mut self, energies: &[f64], gamma: f64) -> Result<()> {
        if energies.len() != self.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amps.len(),
                actual: energies.len(),
            });
        }
        for (a, e) in self.amps.iter_mut().zip(energies) {
            *a *= Complex64::cis(-gamma * e);
        }
        Ok(())
    }

    /// `exp(-i β (X_a X_b + Y_a Y_b))`: rotates the `|01⟩, |10⟩` pair by
    /// `[[cos 2β, -i sin 2β], [-i sin 2β, cos 2β]]`, identity elsewhere.
    pub fn apply_xy_pair(&mut self, a: usize, b: usize, beta: f64) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::param("XY pair needs two distinct qubits"));
        }
        let (ba, bb) = (1usize << a, 1usize << b);
        let c = Complex64::new((2.0 * beta).cos(), 0.0);
        let s = Complex64::new(0.0, -(2.0 * beta).sin());
        for i in 0..self.amps.len() {
            // i has a=1, b=0; its partner has a=0, b=1
            if i & ba != 0 && i & bb == 0 {
                let j = (i ^ ba) | bb;
                let (x, y) = (self.amps[i], self.amps[j]);
                self.amps[i] = c * x + s * y;
                self.amps[j] = s * x + c * y;
            }
        }
        Ok(())
    }

    /// `P(0) - P(1)` on `qubit`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        let p1 = self.prob_one(qubit)?;
        Ok((1.0 - 2.0 * p1).clamp(-1.0, 1.0))
    }

    fn prob_one(&self, qubit: usize) -> Result<f64> {
        self.check(qubit)?;
        let bit = 1usize << qubit;
        let total = self.norm_sqr();
        let one: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok((one / total).clamp(0.0, 1.0))
    }

    /// Probability mass in each Hamming-weight class.
    pub fn weight_distribution(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.qubits + 1];
        for (i, a) in self.amps.iter().enumerate() {
            w[i.count_ones() as usize] += a.norm_sqr();
        }
        w
    }

    pub fn apply_gate(&mut self, gate: &Gate<'_>) -> Result<()> {
        match *gate {
            Gate::H(q) => self.apply_h(q),
            Gate::Sdg(q) => self.apply_sdg(q),
            Gate::Pauli(q, p) => self.apply_pauli(q, p),
            Gate::XyPair { a, b, beta } => self.apply_xy_pair(a, b, beta),
            Gate::ControlledDiagonal {
                oracle,
                control,
                ref targets,
            } => self.apply_controlled_diagonal(oracle, control, targets.clone()),
            Gate::CostPhase { energies, gamma } => self.apply_cost_phase(energies, gamma),
        }
    }

    /// Ideal gate followed by a stochastic Pauli error on each touched qubit.
    pub fn apply_noisy_gate<R: Rng + ?Sized>(
        &mut self,
        gate: &Gate<'_>,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<()> {
        self.apply_gate(gate)?;
        let touched = gate.touched(self.qubits);
        let p = if touched.len() == 1 { noise.p1 } else { noise.p2 };
        if p > 0.0 {
            for q in touched {
                if rng.random::<f64>() < p {
                    let pauli = match rng.random_range(0..3) {
                        0 => Pauli::X,
                        1 => Pauli::Y,
                        _ => Pauli::Z,
                    };
                    self.apply_pauli(q, pauli)?;
                }
            }
        }
        Ok(())
    }

    /// Multinomial draw of full bitstrings, with independent readout flips
    /// when `noise` is given.
    pub fn sample_shots<R: Rng + ?Sized>(
        &self,
        shots: u64,
        noise: Option<&NoiseModel>,
        rng: &mut R,
    ) -> Result<ShotResult> {
        if shots == 0 {
            return Err(Error::param("shots must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let p_ro = noise.map_or(0.0, |n| n.p_ro);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u = rng.random::<f64>() * acc;
            let mut idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            // skip zero-probability slots that share the boundary value
            while self.amps[idx].norm_sqr() == 0.0 && idx + 1 < cdf.len() {
                idx += 1;
            }
            let mut outcome = idx as u64;
            if p_ro > 0.0 {
                for q in 0..self.qubits {
                    if rng.random::<f64>() < p_ro {
                        outcome ^= 1 << q;
                    }
                }
            }
            *counts.entry(outcome).or_insert(0) += 1;
        }
        Ok(ShotResult {
            counts,
            shots,
            qubits: self.qubits,
        })
    }

    /// Number of `1` readouts of a single qubit over `shots` measurements.
    pub fn sample_qubit<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        shots: u64,
        noise: Option<&NoiseModel>,
        rng: &mut R,
    ) -> Result<u64> {
        let p1 = self.prob_one(qubit)?;
        let p_ro = noise.map_or(0.0, |n| n.p_ro);
        let p = (p1 * (1.0 - p_ro) + (1.0 - p1) * p_ro).clamp(0.0, 1.0);
        let dist = Binomial::new(shots, p).map_err(|e| Error::param(e.to_string()))?;
        Ok(dist.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Phases of a diagonal unitary over `2^n` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOracle {
    pub phases: Vec<f64>,
}

impl DiagonalOracle {
    /// Pads `phases` with zeros up to `2^width` entries.
    pub fn padded(phases: &[f64], width: usize) -> Result<Self> {
        let m = 1usize << width;
        if phases.len() > m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: phases.len(),
            });
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidData("oracle phase is not finite".into()));
        }
        let mut v = phases.to_vec();
        v.resize(m, 0.0);
        Ok(Self { phases: v })
    }
}

/// One operation of a simulated circuit.
#[derive(Debug, Clone)]
pub enum Gate<'a> {
    H(usize),
    Sdg(usize),
    Pauli(usize, Pauli),
    XyPair {
        a: usize,
        b: usize,
        beta: f64,
    },
    ControlledDiagonal {
        oracle: &'a DiagonalOracle,
        control: usize,
        targets: Range<usize>,
    },
    CostPhase {
        energies: &'a [f64],
        gamma: f64,
    },
}

impl Gate<'_> {
    fn touched(&self, qubits: usize) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::Sdg(q) | Gate::Pauli(q, _) => vec![*q],
            Gate::XyPair { a, b, .. } => vec![*a, *b],
            Gate::ControlledDiagonal { control, targets, .. } => {
                let mut v: Vec<usize> = targets.clone().collect();
                v.push(*control);
                v
            }
            Gate::CostPhase { .. } => (0..qubits).collect(),
        }
    }
}

/// Depolarizing gate noise plus readout bit flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub p_ro: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, p_ro: f64) -> Result<Self> {
        let n = Self { p1, p2, p_ro };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p_ro", self.p_ro)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p_ro == 0.0
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    /// Parses `p1,p2,p_ro`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::param(format!("noise '{s}': {e}")))?;
        match parts[..] {
            [p1, p2, p_ro] => NoiseModel::new(p1, p2, p_ro),
            _ => Err(Error::param(format!("noise '{s}' must be p1,p2,p_ro"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    /// Basis index (qubit 0 = least significant bit) to occurrence count.
    pub counts: BTreeMap<u64, u64>,
    pub shots: u64,
    pub qubits: usize,
}

impl ShotResult {
    /// Bitstring with qubit 0 printed rightmost.
    pub fn bitstring(&self, outcome: u64) -> String {
        (0..self.qubits)
            .rev()
            .map(|q| if outcome >> q & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn frequency(&self, outcome: u64) -> f64 {
        self.counts.get(&outcome).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

/// Largest register and shot totals seen by an [`Executor`].
#[derive(Debug, Default)]
pub struct Meter {
    max_qubits: AtomicUsize,
    shots: AtomicU64,
    circuits: AtomicU64,
}

impl Meter {
    pub fn max_qubits(&self) -> usize {
        self.max_qubits.load(Ordering::Relaxed)
    }

    pub fn shots(&self) -> u64 {
        self.shots.load(Ordering::Relaxed)
    }

    pub fn circuits(&self) -> u64 {
        self.circuits.load(Ordering::Relaxed)
    }

    pub fn add_shots(&self, n: u64) {
        self.shots.fetch_add(n, Ordering::Relaxed);
    }

    fn record(&self, qubits: usize, runs: u64) {
        self.max_qubits.fetch_max(qubits, Ordering::Relaxed);
        self.circuits.fetch_add(runs, Ordering::Relaxed);
    }
}

/// Runs gate sequences, either ideally or as noisy Pauli trajectories.
#[derive(Debug, Default)]
pub struct Executor {
    pub noise: Option<NoiseModel>,
    /// Number of noise trajectories per circuit; shots are split evenly
    /// across them.
    pub trajectories: usize,
    pub meter: Meter,
}

pub const DEFAULT_TRAJECTORIES: usize = 64;

impl Executor {
    pub fn ideal() -> Self {
        Self {
            noise: None,
            trajectories: 1,
            meter: Meter::default(),
        }
    }

    /// A noiseless model collapses to the ideal executor.
    pub fn with_noise(noise: Option<NoiseModel>, trajectories: usize) -> Result<Self> {
        match noise {
            Some(n) if !n.is_noiseless() => {
                n.validate()?;
                Ok(Self {
                    noise: Some(n),
                    trajectories: trajectories.max(1),
                    meter: Meter::default(),
                })
            }
            _ => Ok(Self::ideal()),
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    /// Final states of the circuit: one for ideal execution, one per
    /// trajectory otherwise. Trajectory `t` draws its errors from
    /// `key.child(t)`.
    pub fn run(&self, init: &Statevector, gates: &[Gate<'_>], key: &RngKey) -> Result<Vec<Statevector>> {
        match &self.noise {
            None => {
                self.meter.record(init.qubits(), 1);
                let mut s = init.clone();
                for g in gates {
                    s.apply_gate(g)?;
                }
                Ok(vec![s])
            }
            Some(noise) => {
                self.meter.record(init.qubits(), self.trajectories as u64);
                (0..self.trajectories)
                    .map(|t| {
                        let mut rng = key.child(t as u64).rng(Stream::Noise);
                        let mut s = init.clone();
                        for g in gates {
                            s.apply_noisy_gate(g, noise, &mut rng)?;
                        }
                        Ok(s)
                    })
                    .collect()
            }
        }
    }
}

/// Splits `shots` across `parts` as evenly as possible.
pub fn split_shots(shots: u64, parts: usize) -> Vec<u64> {
    let parts = parts.max(1) as u64;
    (0..parts)
        .map(|i| shots / parts + u64::from(i < shots % parts))
        .collect()
}
