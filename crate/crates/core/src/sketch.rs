//! Sketch computation.
//!
//! Exact sketches average the feature map directly. Estimated sketches use
//! one Hadamard-test circuit pair per frequency: a uniform subsample of `B`
//! points supplies the phases of a diagonal oracle padded with zero phases
//! to `M = 2^n_i` entries, the ancilla is read in the X and Y bases, and the
//! padded mean is debiased as `ẑ = (M/B) μ̂ - (M-B)/B`.

use num_complex::Complex64;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{feature_map, Dataset, FrequencyMatrix, Matrix, Sketch, SketchKind};
use crate::error::{Error, Result};
use crate::rng::{RngKey, Stream, StreamRng};
use crate::statevec::{split_shots, DiagonalOracle, Executor, Gate, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QffConfig {
    /// Subsample size `B` per frequency.
    pub subsample: usize,
    /// Shots per measurement basis and frequency.
    pub shots_per_basis: u64,
    /// Use exact ancilla expectations instead of sampled shots.
    pub analytic: bool,
}

impl Default for QffConfig {
    fn default() -> Self {
        Self {
            subsample: 256,
            shots_per_basis: 1024,
            analytic: false,
        }
    }
}

impl QffConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsample == 0 {
            return Err(Error::param("QFF subsample size must be at least 1"));
        }
        if self.shots_per_basis == 0 {
            return Err(Error::param("QFF shots per basis must be at least 1"));
        }
        Ok(())
    }
}

/// Index register for a subsample of size `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QffRegisters {
    /// `n_i = max(1, ceil(log2 B))`.
    pub index_qubits: usize,
    /// `M = 2^n_i`.
    pub padded: usize,
}

impl QffRegisters {
    pub fn for_subsample(b: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::param("subsample size must be at least 1"));
        }
        let index_qubits = ceil_log2(b).max(1);
        Ok(Self {
            index_qubits,
            padded: 1 << index_qubits,
        })
    }

    /// Index register plus the ancilla.
    pub fn total_qubits(&self) -> usize {
        self.index_qubits + 1
    }
}

pub(crate) fn ceil_log2(b: usize) -> usize {
    if b <= 1 {
        0
    } else {
        (usize::BITS - (b - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Real,
    Imaginary,
}

/// `(1/N) Σ_i exp(i W x_i)`.
pub fn exact_sketch(data: &Dataset, w: &FrequencyMatrix) -> Result<Sketch> {
    let n = data.rows() as f64;
    let mut z = vec![Complex64::new(0.0, 0.0); w.m()];
    for x in data.iter_rows() {
        for (acc, phi) in z.iter_mut().zip(feature_map(x, w)?) {
            *acc += phi;
        }
    }
    z.iter_mut().for_each(|c| *c /= n);
    Ok(Sketch {
        z,
        kind: SketchKind::Exact,
    })
}

/// Feature mean of a centroid set; same computation as the data sketch.
pub fn centroid_sketch(centroids: &Matrix, w: &FrequencyMatrix) -> Result<Sketch> {
    exact_sketch(centroids, w)
}

/// `B` distinct indices drawn uniformly without replacement from `0..N`.
pub fn subsample_indices(n: usize, b: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    if b == 0 || b > n {
        return Err(Error::param(format!("subsample size {b} must lie in 1..={n}")));
    }
    Ok(index::sample(rng, n, b).into_vec())
}

/// One Hadamard test on the padded diagonal oracle built from `phases`.
///
/// Returns the estimate of `Re μ_M` or `Im μ_M` with
/// `μ_M = (1/M)(Σ_l exp(i θ_l) + M - B)`. In analytic mode the exact ancilla
/// expectation is returned (averaged over noise trajectories if any).
pub fn hadamard_test_mu(
    phases: &[f64],
    registers: QffRegisters,
    basis: Basis,
    shots: u64,
    analytic: bool,
    exec: &Executor,
    key: &RngKey,
) -> Result<f64> {
    let oracle = DiagonalOracle::padded(phases, registers.index_qubits)?;
    let ancilla = registers.index_qubits;
    let mut gates: Vec<Gate<'_>> = (0..=ancilla).map(Gate::H).collect();
    gates.push(Gate::ControlledDiagonal {
        oracle: &oracle,
        control: ancilla,
        targets: 0..ancilla,
    });
    if basis == Basis::Imaginary {
        gates.push(Gate::Sdg(ancilla));
    }
    gates.push(Gate::H(ancilla));

    let init = Statevector::init_zero(registers.total_qubits())?;
    let states = exec.run(&init, &gates, key)?;
    if analytic {
        let mut acc = 0.0;
        for s in &states {
            acc += s.expectation_z(ancilla)?;
        }
        return Ok(acc / states.len() as f64);
    }
    if shots == 0 {
        return Err(Error::param("Hadamard test needs at least 1 shot"));
    }
    let mut rng = key.rng(Stream::Shots);
    let mut ones = 0;
    for (s, n) in states.iter().zip(split_shots(shots, states.len())) {
        if n > 0 {
            ones += s.sample_qubit(ancilla, n, exec.noise.as_ref(), &mut rng)?;
        }
    }
    exec.meter.add_shots(shots);
    Ok((shots as f64 - 2.0 * ones as f64) / shots as f64)
}

/// Debiased estimate of sketch component `j` from one subsample.
pub fn qff_estimate_component(
    data: &Dataset,
    w: &FrequencyMatrix,
    j: usize,
    cfg: &QffConfig,
    exec: &Executor,
    key: &RngKey,
) -> Result<Complex64> {
    cfg.validate()?;
    if j >= w.m() {
        return Err(Error::param(format!("frequency index {j} out of range")));
    }
    if data.cols() != w.d() {
        return Err(Error::DimensionMismatch {
            expected: w.d(),
            actual: data.cols(),
        });
    }
    let b = cfg.subsample.min(data.rows());
    let regs = QffRegisters::for_subsample(b)?;
    let idx = subsample_indices(data.rows(), b, &mut key.rng(Stream::Subsampling))?;
    let phases: Vec<f64> = idx.iter().map(|&i| w.phase(j, data.row(i))).collect();
    let re = hadamard_test_mu(&phases, regs, Basis::Real, cfg.shots_per_basis, cfg.analytic, exec, &key.child(0))?;
    let im = hadamard_test_mu(
        &phases,
        regs,
        Basis::Imaginary,
        cfg.shots_per_basis,
        cfg.analytic,
        exec,
        &key.child(1),
    )?;
    let (m, b) = (regs.padded as f64, b as f64);
    Ok(Complex64::new(re, im) * (m / b) - (m - b) / b)
}

/// Every component estimated with its own subsample and shot streams.
pub fn qff_estimate_sketch(
    data: &Dataset,
    w: &FrequencyMatrix,
    cfg: &QffConfig,
    exec: &Executor,
    key: &RngKey,
) -> Result<Sketch> {
    let z = (0..w.m())
        .into_par_iter()
        .map(|j| qff_estimate_component(data, w, j, cfg, exec, &key.child(j as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sketch {
        z,
        kind: SketchKind::Estimated,
    })
}

/// Indices of the points assigned to `group`.
pub fn members(assignment: &[usize], group: usize) -> Vec<usize> {
    assignment
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == group)
        .map(|(i, _)| i)
        .collect()
}

/// Estimated sketch of the points assigned to `group`; `B` is clamped to the
/// cluster size.
pub fn group_sketch(
    data: &Dataset,
    assignment: &[usize],
    group: usize,
    w: &FrequencyMatrix,
    cfg: &QffConfig,
    exec: &Executor,
    key: &RngKey,
) -> Result<Sketch> {
    if assignment.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            actual: assignment.len(),
        });
    }
    let idx = members(assignment, group);
    if idx.is_empty() {
        return Err(Error::EmptyCluster(group));
    }
    qff_estimate_sketch(&data.select_rows(&idx), w, cfg, exec, key)
}

/// Exact per-component dispersion and the resulting MSE bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchDiagnostics {
    /// Population variance `S_V² = (1/(N-1)) Σ |V_i - V̄|²` per component.
    pub dispersion: Vec<f64>,
    /// Sampling fraction `B/N` with `B` clamped to `N`.
    pub sampling_fraction: f64,
    pub registers: QffRegisters,
    /// `S_V²/B + 2 M² / (B² S)` per component.
    pub mse_bound: Vec<f64>,
}

pub fn sketch_diagnostics(data: &Dataset, w: &FrequencyMatrix, cfg: &QffConfig) -> Result<SketchDiagnostics> {
    cfg.validate()?;
    let n = data.rows();
    let b = cfg.subsample.min(n);
    let regs = QffRegisters::for_subsample(b)?;
    let mean = exact_sketch(data, w)?;
    let mut dispersion = vec![0.0; w.m()];
    if n > 1 {
        for x in data.iter_rows() {
            for ((acc, phi), zbar) in dispersion.iter_mut().zip(feature_map(x, w)?).zip(&mean.z) {
                *acc += (phi - zbar).norm_sqr();
            }
        }
        dispersion.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    }
    let (bf, mf, s) = (b as f64, regs.padded as f64, cfg.shots_per_basis as f64);
    let shot_term = 2.0 * mf * mf / (bf * bf * s);
    let mse_bound = dispersion.iter().map(|c| c / bf + shot_term).collect();
    Ok(SketchDiagnostics {
        dispersion,
        sampling_fraction: bf / n as f64,
        registers: regs,
        mse_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_frequencies;
    use crate::rng::RngSpec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = RngSpec::new(seed).stream(Stream::Data);
        Matrix::new(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    fn brute_sketch(data: &Matrix, w: &FrequencyMatrix) -> Vec<Complex64> {
        (0..w.m())
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..data.rows() {
                    let mut t = 0.0;
                    for k in 0..data.cols() {
                        t += w.w.row(j)[k] * data.row(i)[k];
                    }
                    acc += Complex64::new(t.cos(), t.sin());
                }
                acc / data.rows() as f64
            })
            .collect()
    }

    fn analytic(b: usize) -> QffConfig {
        QffConfig {
            subsample: b,
            shots_per_basis: 1,
            analytic: true,
        }
    }

    #[test]
    fn registers() {
        let r = QffRegisters::for_subsample(1).unwrap();
        assert_eq!((r.index_qubits, r.padded), (1, 2));
        let r = QffRegisters::for_subsample(2).unwrap();
        assert_eq!((r.index_qubits, r.padded), (1, 2));
        let r = QffRegisters::for_subsample(5).unwrap();
        assert_eq!((r.index_qubits, r.padded), (3, 8));
        let r = QffRegisters::for_subsample(256).unwrap();
        assert_eq!((r.index_qubits, r.padded, r.total_qubits()), (8, 256, 9));
        for b in 2..600 {
            let r = QffRegisters::for_subsample(b).unwrap();
            assert!(b <= r.padded && r.padded < 2 * b);
        }
    }

    #[test]
    fn exact_sketch_cases() {
        let w = sample_frequencies(12, 3, 1.0, &RngSpec::new(1).key()).unwrap();
        let one = gaussian(1, 3, 2);
        let z = exact_sketch(&one, &w).unwrap();
        assert_eq!(z.z, feature_map(one.row(0), &w).unwrap());
        assert!(z.z.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));

        let zero_w = FrequencyMatrix {
            w: Matrix::zeros(4, 3),
            sigma: 1.0,
        };
        let data = gaussian(20, 3, 3);
        assert!(exact_sketch(&data, &zero_w)
            .unwrap()
            .z
            .iter()
            .all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let z = exact_sketch(&data, &w).unwrap();
        for (a, b) in z.z.iter().zip(brute_sketch(&data, &w)) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(z.z.iter().all(|c| c.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn centroid_sketch_cases() {
        let w = sample_frequencies(8, 2, 1.0, &RngSpec::new(4).key()).unwrap();
        let c = gaussian(1, 2, 5);
        assert_eq!(centroid_sketch(&c, &w).unwrap().z, feature_map(c.row(0), &w).unwrap());
        let dup = c.select_rows(&[0, 0, 0]);
        for (a, b) in centroid_sketch(&dup, &w).unwrap().z.iter().zip(feature_map(c.row(0), &w).unwrap()) {
            assert!((a - b).norm() < 1e-15);
        }
        let many = gaussian(4, 2, 6);
        let z = centroid_sketch(&many, &w).unwrap();
        for (a, b) in z.z.iter().zip(brute_sketch(&many, &w)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn subsample_cases() {
        let key = RngSpec::new(7).key();
        let mut all = subsample_indices(10, 10, &mut key.rng(Stream::Subsampling)).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(subsample_indices(5, 6, &mut key.rng(Stream::Subsampling)).is_err());
        assert_eq!(
            subsample_indices(50, 7, &mut key.rng(Stream::Subsampling)).unwrap(),
            subsample_indices(50, 7, &mut key.rng(Stream::Subsampling)).unwrap()
        );
        let mut rng = key.rng(Stream::Subsampling);
        let draws = 100_000;
        let mut hits = [0u32; 10];
        for _ in 0..draws {
            hits[subsample_indices(10, 1, &mut rng).unwrap()[0]] += 1;
        }
        let sigma = (0.1 * 0.9 / draws as f64).sqrt();
        for h in hits {
            assert!((h as f64 / draws as f64 - 0.1).abs() <= 4.0 * sigma);
        }
    }

    fn direct_mu(phases: &[f64], m: usize) -> Complex64 {
        let s: Complex64 = phases.iter().map(|&t| Complex64::cis(t)).sum();
        (s + (m - phases.len()) as f64) / m as f64
    }

    #[test]
    fn hadamard_test_analytic() {
        let exec = Executor::ideal();
        let key = RngSpec::new(1).key();
        let regs = QffRegisters::for_subsample(3).unwrap();
        let re = hadamard_test_mu(&[0.0; 3], regs, Basis::Real, 1, true, &exec, &key).unwrap();
        let im = hadamard_test_mu(&[0.0; 3], regs, Basis::Imaginary, 1, true, &exec, &key).unwrap();
        assert!((re - 1.0).abs() < 1e-12 && im.abs() < 1e-12);

        let regs = QffRegisters::for_subsample(2).unwrap();
        let pi = std::f64::consts::PI;
        let re = hadamard_test_mu(&[pi, pi], regs, Basis::Real, 1, true, &exec, &key).unwrap();
        assert!((re + 1.0).abs() < 1e-12);

        let mut rng = key.rng(Stream::Data);
        for b in [1usize, 2, 5, 8, 13] {
            let regs = QffRegisters::for_subsample(b).unwrap();
            let phases: Vec<f64> = (0..b).map(|_| rng.random_range(-10.0..10.0)).collect();
            let mu = direct_mu(&phases, regs.padded);
            let re = hadamard_test_mu(&phases, regs, Basis::Real, 1, true, &exec, &key).unwrap();
            let im = hadamard_test_mu(&phases, regs, Basis::Imaginary, 1, true, &exec, &key).unwrap();
            assert!((re - mu.re).abs() < 1e-12 && (im - mu.im).abs() < 1e-12, "b={b}");
        }
        assert_eq!(exec.meter.max_qubits(), 5);
    }

    #[test]
    fn component_exact_when_whole_population() {
        let data = gaussian(13, 2, 8);
        let w = sample_frequencies(6, 2, 1.0, &RngSpec::new(9).key()).unwrap();
        let exact = exact_sketch(&data, &w).unwrap();
        let est = qff_estimate_sketch(&data, &w, &analytic(13), &Executor::ideal(), &RngSpec::new(3).key()).unwrap();
        assert_eq!(est.kind, SketchKind::Estimated);
        for (a, b) in est.z.iter().zip(&exact.z) {
            assert!((a - b).norm() < 1e-12);
        }
        // B larger than N is clamped
        let est = qff_estimate_sketch(&data, &w, &analytic(64), &Executor::ideal(), &RngSpec::new(3).key()).unwrap();
        for (a, b) in est.z.iter().zip(&exact.z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn component_power_of_two_has_no_correction() {
        // M = B: the estimate is the raw padded mean
        let data = gaussian(40, 2, 10);
        let w = sample_frequencies(3, 2, 1.0, &RngSpec::new(11).key()).unwrap();
        let key = RngSpec::new(5).key().child(1);
        let z = qff_estimate_component(&data, &w, 1, &analytic(16), &Executor::ideal(), &key).unwrap();
        let idx = subsample_indices(40, 16, &mut key.rng(Stream::Subsampling)).unwrap();
        let phases: Vec<f64> = idx.iter().map(|&i| w.phase(1, data.row(i))).collect();
        let mu = direct_mu(&phases, 16);
        assert!((z - mu).norm() < 1e-12);
    }

    #[test]
    fn component_mean_is_unbiased() {
        let data = gaussian(64, 2, 12);
        let w = sample_frequencies(3, 2, 1.0, &RngSpec::new(13).key()).unwrap();
        let exact = exact_sketch(&data, &w).unwrap();
        let cfg = QffConfig {
            subsample: 16,
            shots_per_basis: 512,
            analytic: false,
        };
        let exec = Executor::ideal();
        let reps = 500;
        for j in 0..3 {
            let est: Vec<Complex64> = (0..reps)
                .map(|r| qff_estimate_component(&data, &w, j, &cfg, &exec, &RngSpec::new(99).key().child(r)).unwrap())
                .collect();
            let mean: Complex64 = est.iter().sum::<Complex64>() / reps as f64;
            let var_re = est.iter().map(|e| (e.re - mean.re).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let var_im = est.iter().map(|e| (e.im - mean.im).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let (se_re, se_im) = ((var_re / reps as f64).sqrt(), (var_im / reps as f64).sqrt());
            assert!((mean.re - exact.z[j].re).abs() <= 3.0 * se_re);
            assert!((mean.im - exact.z[j].im).abs() <= 3.0 * se_im);
        }
        assert_eq!(exec.meter.shots(), 3 * 500 * 2 * 512);
    }

    #[test]
    fn group_sketch_cases() {
        let data = gaussian(30, 2, 14);
        let w = sample_frequencies(5, 2, 1.0, &RngSpec::new(15).key()).unwrap();
        let exec = Executor::ideal();
        let key = RngSpec::new(1).key();
        let assignment: Vec<usize> = (0..30).map(|i| if i == 7 { 1 } else if i % 2 == 0 { 0 } else { 2 }).collect();

        let single = group_sketch(&data, &assignment, 1, &w, &analytic(1), &exec, &key).unwrap();
        for (a, b) in single.z.iter().zip(feature_map(data.row(7), &w).unwrap()) {
            assert!((a - b).norm() < 1e-12);
        }
        let whole = vec![0; 30];
        let cfg = QffConfig {
            subsample: 8,
            shots_per_basis: 64,
            analytic: false,
        };
        assert_eq!(
            group_sketch(&data, &whole, 0, &w, &cfg, &exec, &key).unwrap(),
            qff_estimate_sketch(&data, &w, &cfg, &exec, &key).unwrap()
        );
        for g in [0usize, 2] {
            let idx = members(&assignment, g);
            let est = group_sketch(&data, &assignment, g, &w, &analytic(idx.len()), &exec, &key).unwrap();
            let exact = brute_sketch(&data.select_rows(&idx), &w);
            for (a, b) in est.z.iter().zip(exact) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        assert!(matches!(
            group_sketch(&data, &assignment, 3, &w, &cfg, &exec, &key),
            Err(Error::EmptyCluster(3))
        ));
    }

    #[test]
    fn diagnostics_cases() {
        let w = sample_frequencies(6, 2, 1.0, &RngSpec::new(16).key()).unwrap();
        let cfg = QffConfig {
            subsample: 8,
            shots_per_basis: 100,
            analytic: false,
        };
        let same = Matrix::from_rows(&[[0.5, -0.2]; 10]).unwrap();
        let diag = sketch_diagnostics(&same, &w, &cfg).unwrap();
        let shot_term = 2.0 * 64.0 / (64.0 * 100.0);
        for (c, b) in diag.dispersion.iter().zip(&diag.mse_bound) {
            assert!(c.abs() < 1e-12);
            assert!((b - shot_term).abs() < 1e-12);
        }
        assert_eq!(diag.sampling_fraction, 0.8);

        let data = gaussian(25, 2, 17);
        let diag = sketch_diagnostics(&data, &w, &cfg).unwrap();
        let z = brute_sketch(&data, &w);
        for j in 0..6 {
            // closed form for unit-modulus populations
            let expect = 25.0 / 24.0 * (1.0 - z[j].norm_sqr());
            assert!((diag.dispersion[j] - expect).abs() < 1e-12);
            assert!(diag.dispersion[j] <= 25.0 / 24.0 + 1e-12);
        }
    }
}
