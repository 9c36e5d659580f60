//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured margins (visible with `cargo test -- --nocapture`).

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qlyap::algebra::{C64, CMatrix, GeneratorBasis, RMatrix};
use qlyap::dynamics::{
    ClassifierThresholds, ControlModel, IntegratorOptions, RunVerdict, classify_trajectory,
    integrate, lasalle_membership,
};
use qlyap::experiment::{ExperimentConfig, run_census, run_simulate, run_track};
use qlyap::stability::{
    StabilityVerdict, enumerate_diagonal_stationary, hessian_signature, linearization,
    tangent_frame,
};
use qlyap::state::{
    DensityMatrix, Hamiltonian, count_diagonal_stationary, flag_manifold_dim, sample_isospectral,
    spectrum_signature,
};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn offdiag_ones(n: usize) -> Hamiltonian {
    Hamiltonian::new(CMatrix::from_fn(n, n, |i, j| {
        if i == j { c(0.0, 0.0) } else { c(1.0, 0.0) }
    }))
    .unwrap()
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Hamiltonian {
    let m = CMatrix::from_fn(n, n, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    Hamiltonian::new((&m + m.adjoint()) * c(0.5, 0.0)).unwrap()
}

fn random_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // distinct or clustered with probability 1/2, well-separated values
    let degenerate = n > 2 && rng.random_bool(0.5);
    let mut vals: Vec<f64> = if degenerate {
        let repeat = rng.random_range(2..n);
        let mut v = vec![1.0; repeat];
        for k in 0..(n - repeat) {
            v.push(2.0 + k as f64);
        }
        v
    } else {
        (0..n).map(|k| 1.0 + 0.7 * k as f64).collect()
    };
    let tot: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= tot);
    vals
}

/// Random model across n in {2,3,4}: half stationary diagonal targets, half
/// Haar-rotated (non-stationary) ones.
fn random_model(i: usize) -> (ControlModel, DensityMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97 + i as u64);
    let n = [2usize, 3, 4][i % 3];
    let h0 = random_hermitian(n, &mut rng);
    let h1 = random_hermitian(n, &mut rng);
    let diag = random_spectrum(n, &mut rng);
    let base = DensityMatrix::from_diagonal(&diag).unwrap();
    let target =
        if i % 2 == 0 { base.clone() } else { sample_isospectral(&base, rng.random()) };
    let model = ControlModel::new(h0, h1, target).unwrap();
    let rho0 = sample_isospectral(&base, rng.random());
    (model, rho0)
}

#[test]
fn acceptance_01_lyapunov_identity() {
    let start = Instant::now();
    let opts = IntegratorOptions { t_final: 20.0, sample_count: 81, ..Default::default() };
    let worst: Vec<(f64, f64)> = (0..200)
        .into_par_iter()
        .map(|i| {
            let (model, rho0) = random_model(i);
            let traj = integrate(&model, &rho0, &opts).unwrap();
            let mut worst_identity: f64 = 0.0;
            for (dv, f) in traj.lyapunov_rate.iter().zip(&traj.controls) {
                worst_identity = worst_identity.max((dv + f * f).abs());
            }
            let mut worst_increase: f64 = 0.0;
            for w in traj.lyapunov.windows(2) {
                worst_increase = worst_increase.max(w[1] - w[0]);
            }
            (worst_identity, worst_increase)
        })
        .collect();
    let max_identity = worst.iter().map(|w| w.0).fold(0.0, f64::max);
    let max_increase = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    assert!(max_identity <= 1e-6, "derivative identity residual {max_identity:.3e}");
    assert!(max_increase <= 1e-8, "V increased by {max_increase:.3e}");
    println!(
        "ACCEPTANCE 1 PASS: |dV/dt + f^2| <= {max_identity:.2e} (bound 1e-6), \
         max V increase {max_increase:.2e} (bound 1e-8), 200 trajectories in {:.1?}",
        start.elapsed()
    );
    assert!(start.elapsed().as_secs() < 120, "runtime budget exceeded");
}

#[test]
fn acceptance_02_isospectral_conservation() {
    let start = Instant::now();
    let opts = IntegratorOptions { t_final: 300.0, sample_count: 301, ..Default::default() };
    let drifts: Vec<(f64, f64, f64)> = (0..100)
        .into_par_iter()
        .map(|i| {
            let (model, rho0) = random_model(i);
            let traj = integrate(&model, &rho0, &opts).unwrap();
            (
                traj.stats.max_spectrum_drift_state,
                traj.stats.max_spectrum_drift_target,
                traj.stats.max_trace_drift,
            )
        })
        .collect();
    let max_state = drifts.iter().map(|d| d.0).fold(0.0, f64::max);
    let max_target = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let max_trace = drifts.iter().map(|d| d.2).fold(0.0, f64::max);
    assert!(max_state <= 1e-8, "state spectrum drift {max_state:.3e}");
    assert!(max_target <= 1e-8, "target spectrum drift {max_target:.3e}");
    println!(
        "ACCEPTANCE 2 PASS: spectrum drift state {max_state:.2e} / target {max_target:.2e} \
         (bound 1e-8), trace drift {max_trace:.2e}, 100 runs over t = 300 in {:.1?}",
        start.elapsed()
    );
}

#[test]
fn acceptance_03_lasalle_membership_at_flatline() {
    let start = Instant::now();
    // non-converging runs on an ideal model: tracking the maximally
    // entangled target, whose invariant set reaches every distance level
    let base = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
    let bell = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
    let model = base.with_target(bell).unwrap().model;
    assert!(model.ideality().ideal());
    let opts = IntegratorOptions::default();
    let thresholds = ClassifierThresholds::default();
    let results: Vec<Option<f64>> = (0..70)
        .into_par_iter()
        .map(|i| {
            let rho0 = sample_isospectral(model.target(), 1000 + i as u64);
            let traj = integrate(&model, &rho0, &opts).unwrap();
            let verdict = classify_trajectory(&traj, &thresholds);
            (verdict.verdict == RunVerdict::Flatlined).then(|| {
                lasalle_membership(
                    traj.states.last().unwrap(),
                    traj.targets.last().unwrap(),
                    &model,
                    1e-3,
                )
                .max_offdiagonal
            })
        })
        .collect();
    let offdiags: Vec<f64> = results.into_iter().flatten().collect();
    assert!(offdiags.len() >= 50, "only {} flatlined endpoints collected", offdiags.len());
    let max_offdiag = offdiags.iter().take(50).cloned().fold(0.0, f64::max);
    assert!(max_offdiag <= 1e-3, "commutator off-diagonal {max_offdiag:.3e}");
    println!(
        "ACCEPTANCE 3 PASS: 50 flatlined endpoints, max off-diagonal commutator entry \
         {max_offdiag:.2e} (bound 1e-3), in {:.1?}",
        start.elapsed()
    );
}

#[test]
fn acceptance_04_hessian_morse_structure() {
    let start = Instant::now();
    let basis = GeneratorBasis::new(3).unwrap();
    let rho_d = DensityMatrix::from_diagonal(&[0.25, 0.25, 0.5]).unwrap();
    let sig = hessian_signature(&rho_d, &rho_d, &basis).unwrap();
    assert_eq!((sig.n_plus, sig.n_minus, sig.n_zero), (4, 0, 0), "at the target: {sig:?}");
    let mut others = Vec::new();
    for other in [[0.25, 0.5, 0.25], [0.5, 0.25, 0.25]] {
        let rho0 = DensityMatrix::from_diagonal(&other).unwrap();
        let sig = hessian_signature(&rho0, &rho_d, &basis).unwrap();
        assert!(sig.n_minus >= 1, "{other:?} lacks a descent direction: {sig:?}");
        others.push(sig.n_minus);
    }
    println!(
        "ACCEPTANCE 4 PASS: inertia (4,0,0) at the target, n_minus = {others:?} >= 1 at the \
         other stationary states, in {:.1?}",
        start.elapsed()
    );
}

#[test]
fn acceptance_05_two_qubit_census() {
    let start = Instant::now();
    let (a, b) = (0.35, 0.15);
    let cfg = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
    let report = run_census(&cfg).unwrap();
    assert_eq!(report.rows.len(), 6);

    let sink = &report.rows[0];
    assert_eq!(sink.verdict, StabilityVerdict::HyperbolicSink);
    assert_eq!(sink.n_stable, 8);
    assert!(sink.lyapunov_level.abs() <= 1e-12);

    let source = report.rows.last().unwrap();
    assert_eq!(source.verdict, StabilityVerdict::HyperbolicSource);
    assert_eq!(source.n_unstable, 8);
    let expect_max = 2.0 * (a - b) * (a - b);
    assert!((source.lyapunov_level - expect_max).abs() <= 1e-12);
    assert_eq!(source.diagonal, vec![b, b, a, a]);

    let expect_mid = (a - b) * (a - b);
    for row in &report.rows[1..5] {
        assert_eq!(
            (row.n_stable, row.n_unstable, row.n_center),
            (2, 2, 4),
            "intermediate {:?}",
            row.diagonal
        );
        assert!((row.lyapunov_level - expect_mid).abs() <= 1e-12);
        // the 4 center eigenvalues are imaginary within the zero band
        let mut centers: Vec<[f64; 2]> = row.eigenvalues.clone();
        centers.sort_by(|x, y| x[0].abs().partial_cmp(&y[0].abs()).unwrap());
        for ev in centers.iter().take(4) {
            assert!(ev[0].abs() <= 1e-7, "center eigenvalue has real part {ev:?}");
            assert!(ev[1].abs() > 0.1, "center eigenvalue is not oscillatory {ev:?}");
        }
    }
    println!(
        "ACCEPTANCE 5 PASS: census sink(8)/source(8)/4x(2,2,4) with levels 0, {expect_max}, \
         {expect_mid}, in {:.1?}",
        start.elapsed()
    );
    assert!(start.elapsed().as_secs() < 30, "runtime budget exceeded");
}

#[test]
fn acceptance_06_qutrit_figure_reproduction() {
    let start = Instant::now();
    let base = ExperimentConfig::from_preset("example3-qutrit").unwrap();

    // (a) outer-level target: everything converges
    let mut cfg = base
        .with_target(DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0]).unwrap())
        .unwrap();
    cfg.n_samples = 50;
    cfg.seed = 1;
    let need_converged = (cfg.n_samples as f64 * cfg.min_converged_fraction).ceil() as usize;
    let (summary_a, _) = run_simulate(&cfg).unwrap();
    let converged_small = summary_a
        .samples
        .iter()
        .filter(|s| s.verdict == RunVerdict::Converged && s.final_v < 1e-4)
        .count();
    assert!(
        converged_small >= need_converged,
        "only {converged_small}/50 converged below 1e-4 (need {need_converged})"
    );

    // (b) middle-level target: most runs stall on the center manifold and the
    // endpoints satisfy the invariant-set relations
    let mut cfg = base
        .with_target(DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0]).unwrap())
        .unwrap();
    cfg.n_samples = 50;
    cfg.seed = 1;
    let need_flatlined = (cfg.n_samples as f64 * cfg.min_flatline_fraction).ceil() as usize;
    let (summary_b, _) = run_simulate(&cfg).unwrap();
    let flatlined: Vec<_> = summary_b
        .samples
        .iter()
        .filter(|s| s.verdict == RunVerdict::Flatlined && s.final_v > 1e-3)
        .collect();
    assert!(
        flatlined.len() >= need_flatlined,
        "only {}/50 flatlined above 1e-3 (need {need_flatlined})",
        flatlined.len()
    );
    let mut worst_relation: f64 = 0.0;
    for s in &flatlined {
        let r = s.relation_residuals.expect("relations computed for this probe");
        worst_relation = worst_relation.max(r[0]).max(r[1]).max(r[2]).max(r[3]);
    }
    assert!(worst_relation <= 1e-3, "relation residual {worst_relation:.3e}");
    println!(
        "ACCEPTANCE 6 PASS: (a) {converged_small}/50 converged below 1e-4; (b) {}/50 \
         flatlined above 1e-3 with relation residuals <= {worst_relation:.2e} (bound 1e-3), \
         in {:.1?}",
        flatlined.len(),
        start.elapsed()
    );
    assert!(start.elapsed().as_secs() < 300, "runtime budget exceeded");
}

#[test]
fn acceptance_07_two_qubit_tracking() {
    let start = Instant::now();
    let base = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();

    let unbalanced =
        DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
    let mut cfg = base.with_target(unbalanced).unwrap();
    cfg.n_samples = 50;
    cfg.seed = 2;
    let need_converged = (cfg.n_samples as f64 * cfg.min_converged_fraction).ceil() as usize;
    let (summary_a, _) = run_track(&cfg).unwrap();
    let except_a = summary_a.exceptionality.as_ref().unwrap();
    assert!(!except_a.exceptional, "unbalanced target flagged exceptional");
    assert!(
        summary_a.counts.converged >= need_converged,
        "only {}/50 converged (need {need_converged})",
        summary_a.counts.converged
    );

    let bell = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
    let mut cfg = base.with_target(bell).unwrap();
    cfg.n_samples = 50;
    cfg.seed = 2;
    let (summary_b, _) = run_track(&cfg).unwrap();
    let except_b = summary_b.exceptionality.as_ref().unwrap();
    assert!(except_b.exceptional, "maximally entangled target not flagged");
    assert!((except_b.v_max - 1.0).abs() < 1e-12);
    let need_intermediate = (cfg.n_samples as f64 * cfg.min_flatline_fraction).ceil() as usize;
    let intermediate = summary_b
        .samples
        .iter()
        .filter(|s| s.final_v > 0.01 && s.final_v < 0.99)
        .count();
    assert!(
        intermediate >= need_intermediate,
        "only {intermediate}/50 ended strictly inside (0.01, 0.99) (need {need_intermediate})"
    );
    println!(
        "ACCEPTANCE 7 PASS: unbalanced target exceptional=false with {}/50 converged; \
         entangled target exceptional=true with {intermediate}/50 at V in (0.01, 0.99), \
         in {:.1?}",
        summary_a.counts.converged,
        start.elapsed()
    );
    assert!(start.elapsed().as_secs() < 600, "runtime budget exceeded");
}

#[test]
fn acceptance_08_counting_oracles() {
    let start = Instant::now();
    // multinomial count vs brute-force enumeration of distinct arrangements
    fn partitions(n: usize, max: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in (1..=n.min(max)).rev() {
            for rest in partitions(n - first, first) {
                let mut p = vec![first];
                p.extend(rest);
                out.push(p);
            }
        }
        out
    }
    fn brute_count(mult: &[usize]) -> u64 {
        use std::collections::BTreeSet;
        let mut values: Vec<usize> = Vec::new();
        for (v, &m) in mult.iter().enumerate() {
            values.extend(std::iter::repeat(v).take(m));
        }
        let mut seen = BTreeSet::new();
        permute(&mut values, 0, &mut seen);
        fn permute(v: &mut Vec<usize>, k: usize, seen: &mut BTreeSet<Vec<usize>>) {
            if k == v.len() {
                seen.insert(v.clone());
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                permute(v, k + 1, seen);
                v.swap(k, i);
            }
        }
        seen.len() as u64
    }
    let mut cases = 0;
    for n in 2..=6 {
        for part in partitions(n, n) {
            let mut diag = Vec::new();
            for (v, &m) in part.iter().enumerate() {
                diag.extend(std::iter::repeat((v + 1) as f64).take(m));
            }
            let tot: f64 = diag.iter().sum();
            diag.iter_mut().for_each(|d| *d /= tot);
            let rho = DensityMatrix::from_diagonal(&diag).unwrap();
            let sig = spectrum_signature(&rho, 1e-8).unwrap();
            assert_eq!(
                count_diagonal_stationary(&sig).unwrap(),
                brute_count(&part),
                "partition {part:?}"
            );
            cases += 1;
        }
    }

    // orbit dimension vs numerically decided tangent rank
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for trial in 0..50u64 {
        let n = rng.random_range(2..=5);
        let basis = GeneratorBasis::new(n).unwrap();
        let diag = random_spectrum(n, &mut rng);
        let base = DensityMatrix::from_diagonal(&diag).unwrap();
        let rho = sample_isospectral(&base, trial);
        let sig = spectrum_signature(&rho, 1e-6).unwrap();
        let frame = tangent_frame(&rho, &basis).unwrap();
        assert_eq!(frame.ncols(), flag_manifold_dim(&sig), "trial {trial}: {diag:?}");
    }
    println!(
        "ACCEPTANCE 8 PASS: multinomial count exact on {cases} partitions (n <= 6); tangent \
         rank equals orbit dimension on 50 random spectra, in {:.1?}",
        start.elapsed()
    );
}

#[test]
fn acceptance_09_linearization_oracle() {
    let start = Instant::now();
    let models = [
        ControlModel::new(
            Hamiltonian::from_diagonal(&[0.0, 1.0, 2.5]).unwrap(),
            offdiag_ones(3),
            DensityMatrix::from_diagonal(&[0.25, 0.25, 0.5]).unwrap(),
        )
        .unwrap(),
        ControlModel::new(
            Hamiltonian::from_diagonal(&[0.0, 1.0, 2.5, 4.1]).unwrap(),
            offdiag_ones(4),
            DensityMatrix::from_diagonal(&[0.35, 0.35, 0.15, 0.15]).unwrap(),
        )
        .unwrap(),
    ];
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for model in &models {
        for state in enumerate_diagonal_stationary(model).unwrap() {
            let s0 = model.basis().bloch_of_matrix(state.matrix()).unwrap();
            let analytic = linearization(&s0, model).unwrap();
            let m = s0.len();
            let mut fd = RMatrix::zeros(m, m);
            for j in 0..m {
                let mut sp: DVector<f64> = s0.clone();
                let mut sm = s0.clone();
                sp[j] += h;
                sm[j] -= h;
                let col = (model.reduced_bloch_rhs(&sp).unwrap()
                    - model.reduced_bloch_rhs(&sm).unwrap())
                    / (2.0 * h);
                fd.set_column(j, &col);
            }
            let err = (analytic - fd).amax();
            worst = worst.max(err);
            assert!(err <= 1e-6, "Jacobian mismatch {err:.3e} at {state:?}");
            checked += 1;
        }
    }
    println!(
        "ACCEPTANCE 9 PASS: analytic linearization matches central differences at {checked} \
         stationary states, max entry error {worst:.2e} (bound 1e-6), in {:.1?}",
        start.elapsed()
    );
}
