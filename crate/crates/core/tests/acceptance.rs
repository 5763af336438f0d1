//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use qckmeans::bench::{
    generate, lloyd_kmeans, run_ablation, run_experiment, AblationSpec, Arm, DatasetEntry, Method, RunManifest,
    RunStatus, SyntheticSpec,
};
use qckmeans::data::{sample_frequencies, Dataset, Matrix, Sketch};
use qckmeans::pipeline::{q_peak, run_qc_kmeans, PipelineConfig, SolverMode};
use qckmeans::qubo::{
    bits, build_group_qubo, build_joint_qubo, normalize_and_set_penalty, relaxation_gap_bounds, CandidateGroup,
    CandidateSet, JointQubo, Penalty, Qubo, DEFAULT_EPSILON,
};
use qckmeans::rng::{RngSpec, Stream};
use qckmeans::sketch::{
    exact_sketch, hadamard_test_mu, qff_estimate_sketch, sketch_diagnostics, Basis, QffConfig, QffRegisters,
};
use qckmeans::solver::{exhaustive_blocks, exhaustive_joint, qaoa_circuit, InitState, MixerSchedule};
use qckmeans::statevec::{Executor, NoiseModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gaussian_data(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = RngSpec::new(seed).stream(Stream::Data);
    let values = (0..n * d)
        .map(|i| rng.sample::<f64, _>(rand_distr::StandardNormal) + if i % d == 0 { 1.0 } else { -0.5 })
        .collect();
    Matrix::new(n, d, values).unwrap()
}

fn circles() -> Dataset {
    generate(&SyntheticSpec::preset("circles", 300, 0).unwrap()).unwrap()
}

// 1
fn qff_unbiased() -> Outcome {
    let data = gaussian_data(64, 2, 101);
    let w = sample_frequencies(8, 2, 1.0, &RngSpec::new(102).key()).unwrap();
    let z = exact_sketch(&data, &w).unwrap();
    let cfg = QffConfig {
        subsample: 16,
        shots_per_basis: 512,
        analytic: false,
    };
    let exec = Executor::ideal();
    let reps = 500;
    let estimates: Vec<Sketch> = (0..reps)
        .into_par_iter()
        .map(|r| qff_estimate_sketch(&data, &w, &cfg, &exec, &RngSpec::new(10_000 + r).key()).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for j in 0..w.m() {
        let mean: Complex64 = estimates.iter().map(|s| s.z[j]).sum::<Complex64>() / reps as f64;
        let var = estimates.iter().map(|s| (s.z[j] - mean).norm_sqr()).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        worst = worst.max((mean - z.z[j]).norm() / se);
    }
    outcome(worst <= 3.0, format!("max |mean - z| / SE = {worst:.3} over {} components (limit 3)", w.m()))
}

// 2
fn shot_noise() -> Outcome {
    let exec = Executor::ideal();
    let reps = 1000;
    let ratios: Vec<(f64, u64)> = (0..50u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngSpec::new(200 + c).stream(Stream::Data);
            let b = rng.random_range(1..=48usize);
            let shots = [64u64, 128, 256, 512, 1024][rng.random_range(0..5)];
            let basis = if rng.random_bool(0.5) { Basis::Real } else { Basis::Imaginary };
            let phases: Vec<f64> = (0..b).map(|_| rng.random_range(-3.0..3.0)).collect();
            let regs = QffRegisters::for_subsample(b).unwrap();
            let key = RngSpec::new(5_000 + c).key();
            let samples: Vec<f64> = (0..reps)
                .map(|r| hadamard_test_mu(&phases, regs, basis, shots, false, &exec, &key.child(r)).unwrap())
                .collect();
            let mean = samples.iter().sum::<f64>() / reps as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            (var * shots as f64, shots)
        })
        .collect();
    let worst = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    outcome(
        worst <= 1.2,
        format!("max S * Var(mu) = {worst:.4} over 50 configurations (limit 1.2)"),
    )
}

// 3
fn mse_bound() -> Outcome {
    let data = gaussian_data(200, 2, 301);
    let w = sample_frequencies(8, 2, 1.0, &RngSpec::new(302).key()).unwrap();
    let z = exact_sketch(&data, &w).unwrap();
    let exec = Executor::ideal();
    let mut worst: f64 = 0.0;
    for (b, s) in [(16usize, 256u64), (64, 256)] {
        let cfg = QffConfig {
            subsample: b,
            shots_per_basis: s,
            analytic: false,
        };
        let bound = sketch_diagnostics(&data, &w, &cfg).unwrap().mse_bound;
        let trials = 200;
        let est: Vec<Sketch> = (0..trials)
            .into_par_iter()
            .map(|t| qff_estimate_sketch(&data, &w, &cfg, &exec, &RngSpec::new(b as u64 * 1000 + t).key()).unwrap())
            .collect();
        for j in 0..w.m() {
            let mse = est.iter().map(|e| (e.z[j] - z.z[j]).norm_sqr()).sum::<f64>() / trials as f64;
            worst = worst.max(mse / bound[j]);
        }
    }
    outcome(worst <= 1.5, format!("max MSE / bound = {worst:.3} at B in {{16, 64}}, S = 256 (limit 1.5)"))
}

// 4
fn onehot_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut circuits = 0;
    for d in 2..=6usize {
        let mut rng = RngSpec::new(400 + d as u64).stream(Stream::Data);
        let energies: Vec<f64> = (0..1usize << d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for p in 1..=3usize {
            for _ in 0..100 {
                let gammas: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                let betas: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
                let s = qaoa_circuit(&energies, &[d], &gammas, &betas, InitState::WState, MixerSchedule::Ring).unwrap();
                worst = worst.max(1.0 - s.weight_distribution()[1]);
                circuits += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max leakage = {worst:.2e} over {circuits} circuits (limit 1e-10)"),
    )
}

// 5
fn connectivity() -> Outcome {
    let mut min_p = f64::INFINITY;
    for d in 3..=6usize {
        let energies = vec![0.0; 1 << d];
        let s = qaoa_circuit(&energies, &[d], &[0.0], &[0.3], InitState::SingleExcitation, MixerSchedule::Ring).unwrap();
        let probs = s.probabilities();
        for i in 0..d {
            min_p = min_p.min(probs[1 << i]);
        }
    }
    outcome(min_p > 0.0, format!("min one-hot probability = {min_p:.3e} for D = 3..6"))
}

fn random_groups(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut left = n;
    while left > 0 {
        let g = rng.random_range(1..=left.min(5));
        groups.push(g);
        left -= g;
    }
    groups
}

// 6
fn penalty_dominance() -> Outcome {
    let mut rng = RngSpec::new(600).stream(Stream::Data);
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for inst in 0..200 {
        let n = rng.random_range(1..=10usize);
        let qubo = if inst % 2 == 0 {
            let groups = random_groups(&mut rng, n);
            let mut q = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.random_range(-1.0..1.0);
                    q[i * n + j] = v;
                    q[j * n + i] = v;
                }
            }
            let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize_and_set_penalty(Qubo::from_parts(groups, q, c).unwrap(), DEFAULT_EPSILON)
        } else {
            let m = rng.random_range(2..=12usize);
            let w = sample_frequencies(m, 2, 1.0, &RngSpec::new(6_000 + inst).key()).unwrap();
            let target = exact_sketch(&gaussian_data(20, 2, 7_000 + inst), &w).unwrap();
            let cands: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
            let group = CandidateGroup::new(cands, &w).unwrap();
            build_group_qubo(&target, &group.features, Penalty::Normalized { epsilon: DEFAULT_EPSILON }).unwrap()
        };
        let (mut feasible, mut infeasible) = (f64::INFINITY, f64::INFINITY);
        for b in 0..1u64 << n {
            let y = bits(b, n);
            let e = qubo.energy(&y, true).unwrap();
            if qubo.decode_onehot(b).is_some() {
                feasible = feasible.min(e);
            } else {
                infeasible = infeasible.min(e);
            }
        }
        if infeasible.is_finite() {
            worst_margin = worst_margin.min(infeasible - feasible);
            if infeasible <= feasible {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("{failures} of 200 instances violated; min (infeasible - feasible optimum) = {worst_margin:.3e}"),
    )
}

fn random_candidates(rng: &mut impl Rng, k: usize, d: usize, w: &qckmeans::data::FrequencyMatrix) -> CandidateSet {
    CandidateSet {
        groups: (0..k)
            .map(|_| {
                let pts = (0..d).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
                CandidateGroup::new(pts, w).unwrap()
            })
            .collect(),
    }
}

fn zero_couplings(joint: &JointQubo) -> JointQubo {
    let q = &joint.qubo;
    let owner = q.group_of();
    let n = q.n();
    let mut dense = q.q.clone();
    for i in 0..n {
        for j in 0..n {
            if owner[i] != owner[j] {
                dense[i * n + j] = 0.0;
            }
        }
    }
    JointQubo {
        qubo: Qubo {
            q: dense,
            ..q.clone()
        },
    }
}

fn grouped_gap(joint: &JointQubo) -> (f64, f64) {
    let (opt, _) = exhaustive_joint(joint).unwrap();
    let blocks = exhaustive_blocks(joint).unwrap();
    let gap = joint.qubo.onehot_energy(&blocks).unwrap() - joint.qubo.onehot_energy(&opt).unwrap();
    (gap, relaxation_gap_bounds(joint).1)
}

// 7
fn relaxation_gap() -> Outcome {
    let mut rng = RngSpec::new(700).stream(Stream::Data);
    let mut max_ratio: f64 = 0.0;
    let (mut violations, mut zero_violations) = (0, 0);
    for inst in 0..100u64 {
        let k = rng.random_range(2..=3usize);
        let d = rng.random_range(2..=4usize);
        let m = rng.random_range(4..=16usize);
        let w = sample_frequencies(m, 2, 1.0, &RngSpec::new(7_000 + inst).key()).unwrap();
        let z = exact_sketch(&gaussian_data(30, 2, 8_000 + inst), &w).unwrap();
        let cands = random_candidates(&mut rng, k, d, &w);
        let joint = build_joint_qubo(&z, &cands, Penalty::Normalized { epsilon: DEFAULT_EPSILON }).unwrap();
        let (gap, bound) = grouped_gap(&joint);
        if gap > bound {
            violations += 1;
        }
        if bound > 0.0 {
            max_ratio = max_ratio.max(gap / bound);
        }
        let (gap0, bound0) = grouped_gap(&zero_couplings(&joint));
        if bound0 != 0.0 || gap0 != 0.0 {
            zero_violations += 1;
        }
    }
    outcome(
        violations == 0 && zero_violations == 0,
        format!("{violations} bound violations, {zero_violations} nonzero gaps with R = 0; max gap / bound = {max_ratio:.3}"),
    )
}

// 8
fn peak_qubits() -> Outcome {
    let formula = q_peak(6, 256);
    let r = run_qc_kmeans(&circles(), &PipelineConfig::with_k(3), 0).unwrap();
    outcome(
        formula == 9 && r.max_register == r.q_peak && r.q_peak == formula,
        format!(
            "q_peak(6, 256) = {formula}, circles run q_peak = {}, widest register = {}",
            r.q_peak, r.max_register
        ),
    )
}

fn descent_checks(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> (usize, usize) {
    let r = run_qc_kmeans(data, cfg, seed).unwrap();
    let (mut checked, mut failed) = (0, 0);
    for rec in &r.trace.iterations {
        for g in 0..cfg.k {
            if let (Some(b), Some(a)) = (rec.cost_before[g], rec.cost_after[g]) {
                let slack = match cfg.solver {
                    SolverMode::Exhaustive => 0.0,
                    SolverMode::Qaoa => rec.delta[g].unwrap_or(f64::INFINITY),
                };
                checked += 1;
                // rounding allowance only; the selection itself is exact
                if a > b + slack + 1e-12 * b.abs().max(1.0) {
                    failed += 1;
                }
            }
        }
    }
    (checked, failed)
}

// 9
fn elitist_descent() -> Outcome {
    let families = ["blobs", "moons", "circles", "spiral"];
    let exhaustive: Vec<(usize, usize)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let spec = SyntheticSpec::preset(families[i as usize % 4], 60 + 10 * i as usize, 900 + i).unwrap();
            let cfg = PipelineConfig {
                k: 2 + i as usize % 3,
                candidates: 3 + i as usize % 4,
                solver: SolverMode::Exhaustive,
                ..PipelineConfig::default()
            };
            descent_checks(&generate(&spec).unwrap(), &cfg, i)
        })
        .collect();
    let qaoa: Vec<(usize, usize)> = (0..5u64)
        .into_par_iter()
        .map(|i| {
            let spec = SyntheticSpec::preset(families[i as usize % 4], 80, 950 + i).unwrap();
            let cfg = PipelineConfig {
                k: 2 + i as usize % 2,
                candidates: 4,
                ..PipelineConfig::default()
            };
            descent_checks(&generate(&spec).unwrap(), &cfg, i)
        })
        .collect();
    let sum = |v: &[(usize, usize)]| v.iter().fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let (ec, ef) = sum(&exhaustive);
    let (qc, qf) = sum(&qaoa);
    outcome(
        ef == 0 && qf == 0 && ec > 0 && qc > 0,
        format!("exhaustive: {ef} of {ec} group steps increased; QAOA: {qf} of {qc} exceeded delta"),
    )
}

// 10 and 11 share the ideal runs.
fn circles_medians(noise: Option<NoiseModel>) -> (f64, Vec<f64>) {
    let data = circles();
    let cfg = PipelineConfig {
        noise,
        ..PipelineConfig::with_k(3)
    };
    let sses: Vec<f64> = (0..5u64)
        .into_par_iter()
        .map(|s| run_qc_kmeans(&data, &cfg, s).unwrap().sse_original)
        .collect();
    (median(sses.clone()), sses)
}

fn end_to_end(ideal: f64) -> Outcome {
    let lloyd = lloyd_kmeans(&circles(), 3, 10, 300, &RngSpec::new(0).key()).unwrap().sse;
    outcome(
        ideal <= 1.5 * lloyd,
        format!("median SSE = {ideal:.3}, Lloyd SSE = {lloyd:.3}, ratio = {:.3} (limit 1.5)", ideal / lloyd),
    )
}

fn noise_robustness(ideal: f64) -> Outcome {
    let (noisy, _) = circles_medians(Some(NoiseModel::new(0.001, 0.01, 0.02).unwrap()));
    let rel = (noisy - ideal).abs() / ideal;
    outcome(
        rel <= 0.25,
        format!("noisy median = {noisy:.3}, ideal median = {ideal:.3}, relative difference = {rel:.3} (limit 0.25)"),
    )
}

// 12
fn ablation_parity() -> Outcome {
    let entry = DatasetEntry::synthetic("blobs", SyntheticSpec::preset("blobs", 300, 0).unwrap());
    let small = run_ablation(&AblationSpec {
        dataset: entry.clone(),
        k: 3,
        candidates: 4,
        seeds: vec![0, 1, 2],
        config: PipelineConfig::default(),
    })
    .unwrap();
    let all_ok = small.iter().all(|r| r.status == RunStatus::Ok);
    let arm_median = |arm: Arm| {
        median(small.iter().filter(|r| r.arm == arm).filter_map(|r| r.sse).collect())
    };
    let medians: Vec<f64> = Arm::ALL.iter().map(|&a| arm_median(a)).collect();
    let (lo, hi) = medians.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = hi / lo - 1.0;
    let gaps_bounded = small.iter().all(|r| matches!((r.qubo_gap, r.gap_bound), (Some(g), Some(b)) if g <= b));
    let parity = all_ok && (spread <= 0.10 || gaps_bounded);

    let large = run_ablation(&AblationSpec {
        dataset: entry,
        k: 10,
        candidates: 6,
        seeds: vec![0],
        config: PipelineConfig::default(),
    })
    .unwrap();
    let status = |arm: Arm| large.iter().find(|r| r.arm == arm).map(|r| r.status);
    let capacity = status(Arm::Coupled) == Some(RunStatus::Capacity)
        && status(Arm::Exhaustive) == Some(RunStatus::Capacity)
        && status(Arm::Grouped) == Some(RunStatus::Ok);
    outcome(
        parity && capacity,
        format!(
            "k=3 D=4 medians grouped/coupled/exhaustive = {:.3}/{:.3}/{:.3} (spread {:.1}%, gaps within bound: {gaps_bounded}); \
             k=10 D=6 status grouped/coupled/exhaustive = {:?}/{:?}/{:?}",
            medians[0],
            medians[1],
            medians[2],
            100.0 * spread,
            status(Arm::Grouped).unwrap(),
            status(Arm::Coupled).unwrap(),
            status(Arm::Exhaustive).unwrap()
        ),
    )
}

// 13
fn determinism() -> Outcome {
    let manifest = RunManifest {
        version: "acceptance".into(),
        datasets: vec![
            DatasetEntry::synthetic("circles", SyntheticSpec::preset("circles", 120, 1).unwrap()),
            DatasetEntry::synthetic("moons", SyntheticSpec::preset("moons", 100, 2).unwrap()),
        ],
        methods: vec![Method::QcKmeans, Method::Lloyd, Method::ClassicalCkm],
        ks: vec![2, 3],
        seeds: vec![0, 1],
        m_values: vec![8, 16],
        config: PipelineConfig {
            analytic: true,
            candidates: 4,
            ..PipelineConfig::default()
        },
        lloyd: Default::default(),
        workers: 0,
        ablation: Some(AblationSpec {
            dataset: DatasetEntry::synthetic("blobs", SyntheticSpec::preset("blobs", 90, 3).unwrap()),
            k: 2,
            candidates: 3,
            seeds: vec![0, 1],
            config: PipelineConfig {
                analytic: true,
                ..PipelineConfig::default()
            },
        }),
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&manifest, d.path()).unwrap();
    }
    // wall-clock files are inherently run-dependent
    let timing = ["timings.csv", "time_vs_qpeak.csv"];
    let mut compared = Vec::new();
    let mut differing = Vec::new();
    let mut names: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") && !timing.contains(&n.as_str()))
        .collect();
    names.sort();
    for name in names {
        let a = fs::read(dirs[0].path().join(&name)).unwrap();
        let b = fs::read(dirs[1].path().join(&name)).unwrap_or_default();
        if a != b {
            differing.push(name.clone());
        }
        compared.push(name);
    }
    outcome(
        differing.is_empty() && compared.len() >= 3,
        format!("compared {}; differing: {:?}", compared.join(", "), differing),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= limit;
        if !pass {
            failures += 1;
        }
        println!(
            "{} {id:>2} {name}: {} [{:.1} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let s = Duration::from_secs;
    report(1, "QFF estimator unbiasedness", s(60), &mut qff_unbiased);
    report(2, "Hadamard-test shot variance", s(60), &mut shot_noise);
    report(3, "QFF mean-squared error bound", s(120), &mut mse_bound);
    report(4, "XY mixer one-hot invariance", s(30), &mut onehot_invariance);
    report(5, "XY ring connectivity", s(5), &mut connectivity);
    report(6, "one-hot penalty dominance", s(60), &mut penalty_dominance);
    report(7, "grouped relaxation gap", s(30), &mut relaxation_gap);
    report(8, "peak qubit count", s(10), &mut peak_qubits);
    report(9, "elitist descent", s(120), &mut elitist_descent);
    let mut ideal = f64::NAN;
    report(10, "circles SSE vs Lloyd", s(600), &mut || {
        let (m, _) = circles_medians(None);
        ideal = m;
        end_to_end(m)
    });
    report(11, "noise robustness", s(1200), &mut || noise_robustness(ideal));
    report(12, "ablation parity and capacity", s(600), &mut ablation_parity);
    report(13, "analytic-mode determinism", s(600), &mut determinism);
    println!("{} of 13 criteria passed", 13 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
