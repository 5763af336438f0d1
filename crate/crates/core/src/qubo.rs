//! One-hot candidate-selection QUBOs.
//!
//! Variables are laid out group by group: group `g` owns the contiguous
//! block `offset(g)..offset(g) + D_g`, and variable `(g, r)` is 1 when
//! candidate `r` is chosen for cluster `g`. The energy of a binary vector is
//! `yᵀQy + cᵀy + λ Σ_g (1 - Σ_r y_{g,r})²` with `Q` stored dense, row-major
//! and symmetric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{feature_map, inner, FrequencyMatrix, Sketch};
use crate::error::{Error, Result};
use crate::statevec::MAX_QUBITS;

/// Default slack `ε` in `λ = 1 + ε`.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Candidate centroids of one cluster and their feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub centroids: Vec<Vec<f64>>,
    pub features: Vec<Vec<Complex64>>,
}

impl CandidateGroup {
    pub fn new(centroids: Vec<Vec<f64>>, w: &FrequencyMatrix) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::param("a candidate group needs at least one candidate"));
        }
        let features = centroids
            .iter()
            .map(|c| feature_map(c, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { centroids, features })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub groups: Vec<CandidateGroup>,
}

impl CandidateSet {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    /// `D = max_g D_g`.
    pub fn max_candidates(&self) -> usize {
        self.groups.iter().map(CandidateGroup::len).max().unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(CandidateGroup::len).collect()
    }
}

/// Penalty selection for a freshly built QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    /// Rescale by `S_coef = Σ|c| + Σ|Q|` and set `λ = 1 + ε`.
    Normalized { epsilon: f64 },
    /// Keep raw coefficients and use the given `λ`.
    Fixed(f64),
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Normalized {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// A quadratic objective over grouped one-hot variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qubo {
    /// Group sizes `D_g`.
    pub groups: Vec<usize>,
    /// `n × n`, row-major, symmetric.
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub lambda: f64,
    /// Divisor applied to the raw coefficients (1 when unnormalized).
    pub s_coef: f64,
    pub epsilon: f64,
}

/// A single-group QUBO.
pub type GroupQubo = Qubo;

/// Selected candidate index per group.
pub type OneHotAssignment = Vec<usize>;

impl Qubo {
    /// Raw QUBO with `λ = 0`; pair with [`Qubo::with_penalty`].
    pub fn from_parts(groups: Vec<usize>, q: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if groups.is_empty() || groups.contains(&0) {
            return Err(Error::param("every group needs at least one variable"));
        }
        let n: usize = groups.iter().sum();
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c.len(),
            });
        }
        if q.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: q.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (q[i * n + j], q[j * n + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidData(format!("Q is not symmetric at ({i}, {j})")));
                }
            }
        }
        if q.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("QUBO coefficient is not finite".into()));
        }
        Ok(Self {
            groups,
            q,
            c,
            lambda: 0.0,
            s_coef: 1.0,
            epsilon: 0.0,
        })
    }

    pub fn with_penalty(self, penalty: Penalty) -> Self {
        match penalty {
            Penalty::Normalized { epsilon } => normalize_and_set_penalty(self, epsilon),
            Penalty::Fixed(lambda) => Self { lambda, ..self },
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n() + j]
    }

    /// First variable of each group.
    pub fn offsets(&self) -> Vec<usize> {
        self.groups
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    /// Group index of every variable.
    pub fn group_of(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, &d)| std::iter::repeat_n(g, d))
            .collect()
    }

    /// `yᵀQy + cᵀy`, plus the one-hot penalty when requested.
    pub fn energy(&self, y: &[bool], include_penalty: bool) -> Result<f64> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        let mut e = 0.0;
        for i in (0..n).filter(|&i| y[i]) {
            e += self.c[i];
            for j in (0..n).filter(|&j| y[j]) {
                e += self.q[i * n + j];
            }
        }
        if include_penalty {
            e += self.penalty(y);
        }
        Ok(e)
    }

    fn penalty(&self, y: &[bool]) -> f64 {
        let mut p = 0.0;
        for (o, d) in self.offsets().into_iter().zip(&self.groups) {
            let s = y[o..o + d].iter().filter(|&&b| b).count() as f64;
            p += (1.0 - s) * (1.0 - s);
        }
        self.lambda * p
    }

    /// Energy of the feasible vector selecting `assignment[g]` in group `g`.
    pub fn onehot_energy(&self, assignment: &[usize]) -> Result<f64> {
        let idx = self.onehot_indices(assignment)?;
        let mut e = 0.0;
        for &i in &idx {
            e += self.c[i];
            for &j in &idx {
                e += self.q_at(i, j);
            }
        }
        Ok(e)
    }

    /// Variable indices set by a one-hot assignment.
    pub fn onehot_indices(&self, assignment: &[usize]) -> Result<Vec<usize>> {
        if assignment.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: assignment.len(),
            });
        }
        self.offsets()
            .into_iter()
            .zip(&self.groups)
            .zip(assignment)
            .map(|((o, &d), &r)| {
                if r < d {
                    Ok(o + r)
                } else {
                    Err(Error::param(format!("selection {r} out of range for a group of {d}")))
                }
            })
            .collect()
    }

    /// Per-group selection encoded by a basis index, or `None` when the
    /// bitstring is not one-hot in every group.
    pub fn decode_onehot(&self, bits: u64) -> Option<OneHotAssignment> {
        let mut out = Vec::with_capacity(self.k());
        for (o, &d) in self.offsets().into_iter().zip(&self.groups) {
            let block = (bits >> o) & ((1u64 << d) - 1);
            if block.count_ones() != 1 {
                return None;
            }
            out.push(block.trailing_zeros() as usize);
        }
        Some(out)
    }

    /// Basis index of a one-hot assignment.
    pub fn encode_onehot(&self, assignment: &[usize]) -> Result<u64> {
        Ok(self.onehot_indices(assignment)?.into_iter().map(|i| 1u64 << i).sum())
    }

    /// Penalized energy of every basis state `b`, with bit `i` of `b` the
    /// value of variable `i`.
    pub fn to_diagonal_energies(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "QUBO variables",
                requested: n as u128,
                limit: MAX_QUBITS as u128,
            });
        }
        let size = 1usize << n;
        let mut fit = vec![0.0; size];
        for b in 1..size {
            let h = (usize::BITS - 1 - b.leading_zeros()) as usize;
            let rest = b ^ (1 << h);
            let mut e = fit[rest] + self.c[h] + self.q_at(h, h);
            let mut r = rest;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                e += self.q_at(h, j) + self.q_at(j, h);
                r &= r - 1;
            }
            fit[b] = e;
        }
        let masks: Vec<usize> = self
            .offsets()
            .into_iter()
            .zip(&self.groups)
            .map(|(o, &d)| ((1usize << d) - 1) << o)
            .collect();
        for (b, e) in fit.iter_mut().enumerate() {
            let p: f64 = masks
                .iter()
                .map(|m| {
                    let s = 1.0 - (b & m).count_ones() as f64;
                    s * s
                })
                .sum();
            *e += self.lambda * p;
        }
        Ok(fit)
    }

    /// Ising couplings `J_ij` (i < j) of the penalized objective under
    /// `y = (1 - s)/2`; the penalty couples every pair within a group.
    pub fn ising_couplings(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let group = self.group_of();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut qij = self.q_at(i, j) + self.q_at(j, i);
                if group[i] == group[j] {
                    qij += 2.0 * self.lambda;
                }
                out.push((i, j, qij / 4.0));
            }
        }
        out
    }

    /// Nonzero strictly-upper Ising couplings.
    pub fn ising_coupling_count(&self) -> usize {
        self.ising_couplings()
            .iter()
            .filter(|(_, _, j)| j.abs() > 1e-15)
            .count()
    }

    /// Debug/interop dump.
    pub fn dump(&self) -> QuboDump {
        QuboDump {
            n: self.n(),
            groups: self.groups.clone(),
            q: self.q.clone(),
            c: self.c.clone(),
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboDump {
    pub n: usize,
    pub groups: Vec<usize>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub lambda: f64,
}

/// Divides every coefficient by `S_coef = Σ|c| + Σ_{i,j}|Q_ij|` (taken as 1
/// when zero) and sets `λ = 1 + ε`.
pub fn normalize_and_set_penalty(qubo: Qubo, epsilon: f64) -> Qubo {
    let raw: f64 = qubo.c.iter().chain(&qubo.q).map(|v| v.abs()).sum();
    let s = if raw > 0.0 { raw } else { 1.0 };
    Qubo {
        q: qubo.q.iter().map(|v| v / s).collect(),
        c: qubo.c.iter().map(|v| v / s).collect(),
        lambda: 1.0 + epsilon,
        s_coef: qubo.s_coef * s,
        epsilon,
        groups: qubo.groups,
    }
}

/// `‖Σ_r y_r v_r - z‖² - ‖z‖²` over the candidates of one group.
pub fn build_group_qubo(target: &Sketch, features: &[Vec<Complex64>], penalty: Penalty) -> Result<GroupQubo> {
    let d = features.len();
    if d == 0 {
        return Err(Error::param("a group QUBO needs at least one candidate"));
    }
    check_lengths(target, features.iter())?;
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = inner(&features[i], &features[j]).re;
            q[i * d + j] = v;
            q[j * d + i] = v;
        }
    }
    let c = features.iter().map(|v| -2.0 * inner(&target.z, v).re).collect();
    Ok(Qubo::from_parts(vec![d], q, c)?.with_penalty(penalty))
}

fn check_lengths<'a>(target: &Sketch, features: impl Iterator<Item = &'a Vec<Complex64>>) -> Result<()> {
    for v in features {
        if v.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// The full `k`-group objective `‖z_X - (1/k) Σ_{g,r} y_{g,r} v_{g,r}‖²`
/// with the constant dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointQubo {
    pub qubo: Qubo,
}

impl JointQubo {
    pub fn k(&self) -> usize {
        self.qubo.k()
    }

    /// Block `(g, h)` of `Q` as a `D_g × D_h` row-major matrix.
    pub fn block(&self, g: usize, h: usize) -> Vec<f64> {
        let offs = self.qubo.offsets();
        let (dg, dh) = (self.qubo.groups[g], self.qubo.groups[h]);
        let mut out = Vec::with_capacity(dg * dh);
        for r in 0..dg {
            for s in 0..dh {
                out.push(self.qubo.q_at(offs[g] + r, offs[h] + s));
            }
        }
        out
    }

    /// Diagonal block `g` with its linear terms and the joint `λ`.
    pub fn group(&self, g: usize) -> GroupQubo {
        let o = self.qubo.offsets()[g];
        let d = self.qubo.groups[g];
        Qubo {
            groups: vec![d],
            q: self.block(g, g),
            c: self.qubo.c[o..o + d].to_vec(),
            lambda: self.qubo.lambda,
            s_coef: self.qubo.s_coef,
            epsilon: self.qubo.epsilon,
        }
    }

    pub fn groups(&self) -> Vec<GroupQubo> {
        (0..self.k()).map(|g| self.group(g)).collect()
    }

    /// `‖R_gh‖_∞` (entrywise max) for every `g < h`.
    pub fn coupling_norms(&self) -> Vec<(usize, usize, f64)> {
        let k = self.k();
        let mut out = Vec::new();
        for g in 0..k {
            for h in g + 1..k {
                let norm = self.block(g, h).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                out.push((g, h, norm));
            }
        }
        out
    }

    /// `F̃(x) = Σ_g f_g(x_g)`: the objective with inter-group blocks dropped.
    pub fn grouped_energy(&self, x: &[usize]) -> Result<f64> {
        let idx = self.qubo.onehot_indices(x)?;
        Ok(idx.iter().map(|&i| self.qubo.c[i] + self.qubo.q_at(i, i)).sum())
    }
}

/// Joint QUBO over all candidate groups against the global sketch.
pub fn build_joint_qubo(z: &Sketch, candidates: &CandidateSet, penalty: Penalty) -> Result<JointQubo> {
    let k = candidates.k();
    if k == 0 {
        return Err(Error::param("a joint QUBO needs at least one group"));
    }
    let features: Vec<&Vec<Complex64>> = candidates.groups.iter().flat_map(|g| &g.features).collect();
    check_lengths(z, features.iter().copied())?;
    let n = features.len();
    let kf = k as f64;
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = inner(features[i], features[j]).re / (kf * kf);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let c = features.iter().map(|v| -2.0 / kf * inner(&z.z, v).re).collect();
    let qubo = Qubo::from_parts(candidates.sizes(), q, c)?.with_penalty(penalty);
    Ok(JointQubo { qubo })
}

/// `(2 Σ_{g<h} ‖R_gh‖_∞, 4 Σ_{g<h} ‖R_gh‖_∞)`.
pub fn relaxation_gap_bounds(joint: &JointQubo) -> (f64, f64) {
    let s: f64 = joint.coupling_norms().iter().map(|(_, _, v)| v).sum();
    (2.0 * s, 4.0 * s)
}

/// `E(x) = Σ_{g<h} (R_gh[x_g][x_h] + R_hg[x_h][x_g])`.
pub fn coupling_energy(joint: &JointQubo, x: &[usize]) -> Result<f64> {
    let idx = joint.qubo.onehot_indices(x)?;
    let mut e = 0.0;
    for g in 0..idx.len() {
        for h in g + 1..idx.len() {
            e += joint.qubo.q_at(idx[g], idx[h]) + joint.qubo.q_at(idx[h], idx[g]);
        }
    }
    Ok(e)
}

/// Basis index `b` as a vector of `n` booleans, bit 0 first.
pub fn bits(b: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| b >> i & 1 == 1).collect()
}
