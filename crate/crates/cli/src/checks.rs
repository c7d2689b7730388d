//! Property suite run by `cwdmd check`. Every check uses a down-scaled
//! configuration so the suite finishes in seconds:
//!
//! - cwt-oracle: FFT route against direct quadrature on a 4096-sample
//!   band-limited signal, 5 scales, both wavelet kinds.
//! - residual-bound: eigenfunction residual on 4 LTI trajectories, σ tuned to
//!   500 rad/s, Δt in {1, 2, 4, 8} dt.
//! - reconstruction: semigroup quadrature at Δt = 0 and Δt = dt on 2 LTI
//!   trajectories at interior states.
//! - laplace: truncated Laplace transform of the semigroup quadrature against
//!   the resolvent quadrature at s = 1 + 10i.
//! - edmd-recovery: Ψ₊ = MΨ with a random 10 x 10 M.
//! - admissibility: convergence of the Morlet constant under refinement.

use std::f64::consts::TAU;

use cwdmd::dynsys::{lti, reference_lti_matrix, sample_initial_conditions, simulate_ensemble, IcRegion, OutputEnsemble};
use cwdmd::edmd::{solve_edmd_dense, DEFAULT_TRUNCATION_TOL};
use cwdmd::observables::{check_eigen_residual_bound, evaluate_observables, make_scale_grid};
use cwdmd::resolvent::{koopman_action_quadrature, resolvent_quadrature, QuadratureScheme};
use cwdmd::wavelet::{admissibility_constant, cwt_direct, simpson, CwtPlan, Signal, WaveletKind, CWT_FFT_NORMALIZATION};
use cwdmd::Complex64;
use faer::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Multiplies the FFT normalization constant; anything but 1 is a fault.
    pub cwt_normalization_factor: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 1, cwt_normalization_factor: 1.0 }
    }
}

/// Uniform draws in `[0, 1)` from the seeded initial-condition sampler.
pub fn uniform_draws(count: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
    let region = IcRegion::Box { bounds: vec![(0.0, 1.0); width] };
    sample_initial_conditions(&region, width, count, seed).expect("unit box is a valid region")
}

/// Periodic sum of `tones` cosines on exact DFT bins with angular frequency
/// (rad per sample) in `band`. Tone `m` is drawn log-uniformly from the
/// `m`-th of `tones` equal slices of the log band, so every scale whose
/// passband meets the band sees signal energy.
pub fn calibration_signal(len: usize, band: (f64, f64), tones: usize, seed: u64) -> Signal {
    let bin = TAU / len as f64;
    let (lo, hi) = (band.0.ln(), band.1.ln());
    let mut samples = vec![0.0; len];
    for (m, draw) in uniform_draws(tones, 3, seed).iter().enumerate() {
        let omega = (lo + (hi - lo) * (m as f64 + draw[0]) / tones as f64).exp();
        let k = ((omega / bin).round() as usize).clamp((band.0 / bin).ceil() as usize, (band.1 / bin).floor() as usize);
        let (amp, phase) = (0.5 + draw[1], TAU * draw[2]);
        for (n, s) in samples.iter_mut().enumerate() {
            *s += amp * (bin * (k * n % len) as f64 + phase).cos();
        }
    }
    Signal::new(1.0, samples).expect("calibration signal is valid")
}

/// Largest `|fft − direct|` relative to each row's peak `|direct|`, over
/// every `stride`-th shift between 10% and 90% of the window.
pub fn cwt_oracle_error(plan: &CwtPlan, signal: &Signal, scales: &[f64], kind: &WaveletKind, stride: usize) -> f64 {
    let grid = plan.transform(signal, scales, kind).expect("transform succeeds");
    let n = signal.len();
    let shifts: Vec<usize> = (n / 10..=9 * n / 10).step_by(stride).collect();
    let mut worst = 0.0f64;
    for (j, &sigma) in scales.iter().enumerate() {
        let direct: Vec<Complex64> =
            shifts.iter().map(|&i| cwt_direct(signal, kind, sigma, i as f64 * signal.dt()).expect("direct succeeds")).collect();
        let peak = direct.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (&i, d) in shifts.iter().zip(&direct) {
            worst = worst.max((grid.get(j, i) - d).norm() / peak);
        }
    }
    worst
}

fn lti_ensemble(count: usize, seed: u64) -> OutputEnsemble {
    let sys = lti(&reference_lti_matrix(), &[1.0, 0.0]).expect("reference system is valid");
    let ics = sample_initial_conditions(&IcRegion::Circle { radius: 20.0 }, 2, count, seed).expect("circle is valid");
    simulate_ensemble(&sys, &ics, 0.001, 2000).expect("LTI simulation succeeds")
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), passed, detail }
}

fn cwt_oracle(opts: &SuiteOptions) -> CheckResult {
    let len = 4096;
    let signal = calibration_signal(len, (0.05, 1.2), 12, opts.seed);
    let plan = CwtPlan::with_normalization(len, CWT_FFT_NORMALIZATION * opts.cwt_normalization_factor).expect("plan");
    let scales = [2.5, 4.0, 9.3, 20.0, 48.0];
    let err = [WaveletKind::modulated_gaussian(6.0), WaveletKind::morlet(6.0)]
        .iter()
        .map(|k| cwt_oracle_error(&plan, &signal, &scales, k, 16))
        .fold(0.0, f64::max);
    check("cwt-oracle", err <= 1e-6, format!("max relative error {err:.3e} (limit 1e-6)"))
}

fn residual_bound(opts: &SuiteOptions) -> CheckResult {
    let ens = lti_ensemble(4, opts.seed);
    let dt = ens.dt;
    match check_eigen_residual_bound(&ens, 0.012, 6.0, &[dt, 2.0 * dt, 4.0 * dt, 8.0 * dt]) {
        Ok(rep) => {
            let slopes: Vec<f64> = rep.slopes.iter().map(|s| s.unwrap_or(f64::NAN)).collect();
            let slopes_ok = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
            let detail = format!(
                "{} of {} within bound; slopes {:?} (expect 2 +/- 0.2)",
                rep.entries.iter().filter(|e| e.within_bound).count(),
                rep.entries.len(),
                slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
            check("residual-bound", rep.all_within_bound() && slopes_ok, detail)
        }
        Err(e) => check("residual-bound", false, e.to_string()),
    }
}

fn reconstruction(opts: &SuiteOptions) -> CheckResult {
    let ens = lti_ensemble(2, opts.seed);
    let grid = make_scale_grid(32, 288).expect("grid");
    let evals = evaluate_observables(&ens, &grid, &WaveletKind::modulated_gaussian(6.0)).expect("observables");
    let scheme = QuadratureScheme::new(grid.clone(), ens.dt, 6.0).expect("scheme");
    let mut errs = Vec::new();
    for steps in [0usize, 1] {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, cwt) in evals.per_trajectory.iter().enumerate() {
            for i in (200..=1800).step_by(20) {
                let psi: Vec<Complex64> = (0..grid.len()).map(|j| cwt.get(j, i)).collect();
                let rec = koopman_action_quadrature(&psi, &scheme, steps as f64 * ens.dt).expect("quadrature").re;
                let y = ens.trajectories[k].outputs[i + steps];
                num += (rec - y).powi(2);
                den += y * y;
            }
        }
        errs.push((num / den).sqrt());
    }
    check("reconstruction", errs.iter().all(|e| *e <= 0.05), format!("relative L2 at dt 0: {:.3e}, at dt 1: {:.3e} (limit 5e-2)", errs[0], errs[1]))
}

fn laplace(opts: &SuiteOptions) -> CheckResult {
    let ens = lti_ensemble(1, opts.seed);
    let grid = make_scale_grid(32, 288).expect("grid");
    let evals = evaluate_observables(&ens, &grid, &WaveletKind::modulated_gaussian(6.0)).expect("observables");
    let scheme = QuadratureScheme::new(grid.clone(), ens.dt, 6.0).expect("scheme");
    let psi: Vec<Complex64> = (0..grid.len()).map(|j| evals.per_trajectory[0].get(j, 1000)).collect();
    let s = Complex64::new(1.0, 10.0);
    let (gap, bound) = laplace_gap(&scheme, &psi, s, 2.0, &ens.trajectories[0].outputs);
    check("laplace", gap <= bound, format!("|laplace - resolvent| {gap:.3e} (bound {bound:.3e})"))
}

/// Distance between the `[0, horizon]` Laplace transform of the semigroup
/// quadrature and the resolvent quadrature, with the truncation bound
/// `e^{-Re(s) T} max|y| / Re(s)`.
pub fn laplace_gap(scheme: &QuadratureScheme, psi: &[Complex64], s: Complex64, horizon: f64, outputs: &[f64]) -> (f64, f64) {
    let k = |t: f64| koopman_action_quadrature(psi, scheme, t).expect("quadrature").re;
    let intervals = 200_000;
    let re = simpson(|t| (-s.re * t).exp() * (s.im * t).cos() * k(t), 0.0, horizon, intervals);
    let im = simpson(|t| -(-s.re * t).exp() * (s.im * t).sin() * k(t), 0.0, horizon, intervals);
    let r = resolvent_quadrature(psi, scheme, s).expect("resolvent");
    let y_max = outputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ((Complex64::new(re, im) - r).norm(), (-s.re * horizon).exp() * y_max / s.re)
}

/// Relative Frobenius error recovering a random `n x n` generator from
/// `cols` consistent snapshot pairs.
pub fn edmd_recovery_error(n: usize, cols: usize, seed: u64) -> f64 {
    let draws = uniform_draws(n + cols, n, seed);
    let m = Mat::from_fn(n, n, |i, j| 0.4 * (draws[i][j] - 0.5) + f64::from(u8::from(i == j)));
    let psi = Mat::from_fn(n, cols, |i, j| 2.0 * draws[n + j][i] - 1.0);
    let plus = &m * &psi;
    let e = solve_edmd_dense(psi.as_ref(), plus.as_ref(), DEFAULT_TRUNCATION_TOL).expect("solve");
    (&e.k_hat - &m).norm_l2() / m.norm_l2()
}

fn edmd_recovery(opts: &SuiteOptions) -> CheckResult {
    let err = edmd_recovery_error(10, 300, opts.seed);
    check("edmd-recovery", err <= 1e-8, format!("relative Frobenius error {err:.3e} (limit 1e-8)"))
}

fn admissibility() -> CheckResult {
    let kind = WaveletKind::morlet(6.0);
    let (coarse, fine) = (admissibility_constant(&kind, 2000).expect("C"), admissibility_constant(&kind, 4000).expect("C"));
    let rel = (coarse - fine).abs() / fine;
    check("admissibility", rel <= 1e-8 && fine > 0.0, format!("C = {fine:.10}, refinement change {rel:.3e}"))
}

pub fn run_property_suite(opts: &SuiteOptions) -> Vec<CheckResult> {
    vec![cwt_oracle(opts), residual_bound(opts), reconstruction(opts), laplace(opts), edmd_recovery(opts), admissibility()]
}
