//! End-to-end experiment pipelines: simulation, streamed observables and
//! EDMD solve, spectrum, eigenfunction fields, analytic references and
//! resolvent sweeps.

use std::time::Instant;

use cwdmd::dynsys::{analytic_lti_resolvent, sample_initial_conditions, simulate_ensemble, OutputEnsemble, SystemSpec};
use cwdmd::edmd::{
    complex_correlation, contract, normalize_field, scaled_relative_error, select_eigenpair, spectral_decomposition, ComplexField,
    ModeFlag, SnapshotAccumulator, SpectralDecomposition,
};
use cwdmd::export;
use cwdmd::observables::{make_scale_grid, realify_trajectory, ScaleGrid};
use cwdmd::resolvent::{resolvent_quadrature, QuadratureScheme};
use cwdmd::wavelet::{CwtPlan, Signal, WaveletKind};
use cwdmd::Complex64;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, SystemConfig};
use crate::output::{OutputDir, LIBRARY_VERSION};
use crate::RunError;

/// Number of top modes by `|μ|` listed in the report.
pub const TOP_MODES: usize = 10;
/// Points in the analytic Bode sweep (log-spaced, 1 Hz to 1 kHz).
pub const BODE_POINTS: usize = 2001;
/// Points in the resolvent-quadrature sweep.
pub const SWEEP_POINTS: usize = 1001;
/// Interior shifts kept per trajectory for along-trajectory metrics.
pub const INTERIOR_SAMPLES: usize = 17;
/// Fraction of shifts trimmed at each end for along-trajectory metrics.
pub const EDGE_FRACTION: f64 = 0.1;
/// Scales at or above `window / BOUNDARY_SCALE_FACTOR` count as boundary
/// affected.
pub const BOUNDARY_SCALE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub index: usize,
    pub re_mu: f64,
    pub im_mu: f64,
    pub modulus: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub flag: String,
}

impl ModeSummary {
    fn of(spec: &SpectralDecomposition, index: usize) -> Self {
        let (mu, lambda) = (spec.discrete_eigenvalues[index], spec.continuous_eigenvalues[index]);
        Self {
            index,
            re_mu: mu.re,
            im_mu: mu.im,
            modulus: mu.norm(),
            re_lambda: lambda.re,
            im_lambda: lambda.im,
            flag: spec.flags[index].to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedMode {
    pub target_hz: f64,
    pub target_rad: f64,
    pub distance: f64,
    pub mode: ModeSummary,
    pub field_file: String,
    pub analytic_file: Option<String>,
}

/// Approximate-versus-analytic field agreement for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMetrics {
    pub target_hz: f64,
    pub interior_ics: usize,
    pub excluded_ics: usize,
    /// Complex correlation over interior initial conditions.
    pub correlation: f64,
    /// Relative L2 error after optimal complex scaling, interior ICs.
    pub relative_l2: f64,
    pub all_ic_correlation: f64,
    pub all_ic_relative_l2: f64,
    /// The same metrics over states between 10% and 90% of each trajectory.
    pub along_trajectory_correlation: f64,
    pub along_trajectory_relative_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPeak {
    pub file: String,
    pub peak_rad: f64,
    pub peak_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub system: String,
    pub library_version: String,
    pub config_sha256: String,
    pub initial_conditions: usize,
    pub steps: usize,
    pub observable_rows: usize,
    pub snapshot_pairs: usize,
    pub retained_rank: usize,
    pub warnings: Vec<String>,
    pub top_modes: Vec<ModeSummary>,
    pub selected: Vec<SelectedMode>,
    pub metrics: Vec<FieldMetrics>,
    pub bode: Option<SweepPeak>,
    pub files: Vec<String>,
    pub timings: Vec<Timing>,
}

/// Report plus the in-memory spectrum for callers that inspect it directly.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub spectrum: SpectralDecomposition,
}

#[derive(Debug, Default)]
struct Stopwatch {
    timings: Vec<Timing>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(stage, start.elapsed().as_secs_f64());
        out
    }

    fn record(&mut self, stage: &str, seconds: f64) {
        self.timings.push(Timing { stage: stage.to_string(), seconds });
    }
}

/// Realified snapshots retained from one trajectory after streaming.
#[derive(Debug, Clone)]
struct KeptSnapshots {
    initial: Vec<f64>,
    /// `(state, snapshot)` at interior shifts.
    interior: Vec<(Vec<f64>, Vec<f64>)>,
}

fn block_row(block: &Mat<f64>, i: usize) -> Vec<f64> {
    (0..block.ncols()).map(|c| block[(i, c)]).collect()
}

/// Evenly spaced shifts between 10% and 90% of the window.
fn interior_shifts(steps: usize) -> Vec<usize> {
    let lo = (EDGE_FRACTION * steps as f64).ceil() as usize;
    let hi = ((1.0 - EDGE_FRACTION) * steps as f64).floor() as usize;
    if hi < lo {
        return Vec::new();
    }
    let mut shifts: Vec<usize> =
        (0..INTERIOR_SAMPLES).map(|m| lo + ((hi - lo) as f64 * m as f64 / (INTERIOR_SAMPLES - 1) as f64).round() as usize).collect();
    shifts.dedup();
    shifts
}

/// Whether more than half of `Σ|w_r ψ_r|` sits on rows whose scale is within
/// [`BOUNDARY_SCALE_FACTOR`] of the window length.
fn boundary_dominated(w: &[Complex64], psi: &[f64], grid: &ScaleGrid, window: usize) -> bool {
    let j = grid.len();
    let mut total = 0.0;
    let mut boundary = 0.0;
    for (r, (wr, p)) in w.iter().zip(psi).enumerate() {
        let mass = (wr * p).norm();
        total += mass;
        let scale_index = if r < j { Some(r) } else if r < 2 * j { Some(r - j) } else { None };
        if scale_index.is_some_and(|s| grid.scales[s] * BOUNDARY_SCALE_FACTOR >= window as f64) {
            boundary += mass;
        }
    }
    boundary > 0.5 * total
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn write_sweep(out: &mut OutputDir, name: &str, omegas: &[f64], re_s: f64, mags: &[f64]) -> Result<SweepPeak, RunError> {
    out.write_with(name, |w| {
        use std::io::Write;
        writeln!(w, "re_s,im_s,magnitude")?;
        for (om, m) in omegas.iter().zip(mags) {
            writeln!(w, "{},{},{}", export::num(re_s), export::num(*om), export::num(*m))?;
        }
        Ok(())
    })?;
    let best = mags.iter().enumerate().fold(0, |b, (i, m)| if *m > mags[b] { i } else { b });
    Ok(SweepPeak { file: name.to_string(), peak_rad: omegas[best], peak_hz: omegas[best] / std::f64::consts::TAU })
}

fn lti_parts(config: &ExperimentConfig) -> Option<(&[Vec<f64>], &[f64])> {
    match &config.system {
        SystemConfig::Lti { a, c } => Some((a.as_slice(), c.as_slice())),
        _ => None,
    }
}

fn simulate(config: &ExperimentConfig, clock: &mut Stopwatch) -> Result<(SystemSpec, OutputEnsemble), RunError> {
    config.validate()?;
    let system = config.system.build()?;
    let ics = &config.initial_conditions;
    let points = sample_initial_conditions(&ics.region.to_region(), system.dimension(), ics.count, ics.seed)?;
    let steps = config.steps()?;
    let ensemble = clock.time("simulate", || simulate_ensemble(&system, &points, config.dt, steps))?;
    Ok((system, ensemble))
}

/// RMS over states of `|cᵀ(iωI − A)⁻¹x|` on a log-spaced 1 Hz–1 kHz sweep.
pub fn analytic_bode(a: &[Vec<f64>], c: &[f64], states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), cwdmd::Error> {
    let omegas: Vec<f64> = log_space(1.0, 1000.0, BODE_POINTS).into_iter().map(crate::config::hz_to_rad).collect();
    let mut mags = Vec::with_capacity(omegas.len());
    for &om in &omegas {
        let mut sum = 0.0;
        for x in states {
            sum += analytic_lti_resolvent(a, c, Complex64::new(0.0, om), x)?.norm_sqr();
        }
        mags.push((sum / states.len() as f64).sqrt());
    }
    Ok((omegas, mags))
}

/// Runs the full pipeline for any configured system and writes every
/// artifact into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, RunError> {
    let mut clock = Stopwatch::default();
    let (_, ensemble) = simulate(config, &mut clock)?;
    let steps = ensemble.steps();
    let window = steps + 1;
    let grid = make_scale_grid(config.c_param, config.j_max)?;
    let kind = config.wavelet_kind();
    let width = 2 * grid.len() + 1;
    let mut warnings = Vec::new();

    // Observables are streamed trajectory by trajectory into the TSQR;
    // only the snapshots needed for fields are kept.
    let plan = CwtPlan::new(window)?;
    let mut acc = SnapshotAccumulator::new(width);
    let shifts = interior_shifts(steps);
    let mut kept = Vec::with_capacity(ensemble.len());
    let (mut t_cwt, mut t_qr) = (0.0, 0.0);
    for traj in &ensemble.trajectories {
        let start = Instant::now();
        let cwt = plan.transform(&Signal::new(ensemble.dt, traj.outputs.clone())?, &grid.scales, &kind)?;
        let block = realify_trajectory(&cwt, &traj.outputs)?;
        t_cwt += start.elapsed().as_secs_f64();
        let start = Instant::now();
        acc.push_trajectory(block.as_ref())?;
        t_qr += start.elapsed().as_secs_f64();
        kept.push(KeptSnapshots {
            initial: block_row(&block, 0),
            interior: shifts.iter().map(|&i| (traj.states[i].clone(), block_row(&block, i))).collect(),
        });
    }
    clock.record("observables", t_cwt);
    clock.record("tsqr", t_qr);
    let snapshot_pairs = acc.pairs();
    let edmd = clock.time("solve", || acc.finish(config.truncation_tol))?;
    // Numerical rank below J' is normal for wavelet dictionaries; fewer
    // snapshot pairs than observables leaves the problem underdetermined.
    if snapshot_pairs < width {
        warnings.push(format!(
            "degenerate rank: retained {} of {width} observables from only {snapshot_pairs} snapshot pairs",
            edmd.svd_rank
        ));
    }
    let spectrum = clock.time("spectrum", || spectral_decomposition(&edmd, ensemble.dt))?;

    let mut out = OutputDir::create(&config.output_dir)?;
    out.write_text("config.json", &config.to_json())?;
    out.write_with("spectrum.csv", |w| spectrum.write_csv(w))?;

    let ics = &ensemble.initial_conditions;
    let start = Instant::now();
    let mut selected = Vec::new();
    let mut metrics = Vec::new();
    for (t, (&hz, &omega)) in config.target_frequencies_hz.iter().zip(&config.target_frequencies_rad()).enumerate() {
        let (mode, distance) = select_eigenpair(&spectrum, Complex64::new(0.0, omega))?;
        let w = &spectrum.left_eigenvectors[mode];
        let approx = ComplexField::new(ics.clone(), kept.iter().map(|k| contract(w, &k.initial)).collect())?;
        let interior: Vec<bool> = kept.iter().map(|k| !boundary_dominated(w, &k.initial, &grid, window)).collect();
        let field_file = format!("field_approx_{t}.csv");
        let mut analytic_file = None;
        if let Some((a, c)) = lti_parts(config) {
            let s = Complex64::new(0.0, omega);
            let exact = ComplexField::new(
                ics.clone(),
                ics.iter().map(|x| analytic_lti_resolvent(a, c, s, x)).collect::<Result<Vec<_>, _>>()?,
            )?;
            let candidates: Vec<usize> = (0..ics.len()).filter(|&k| interior[k]).collect();
            let pool = if candidates.is_empty() { (0..ics.len()).collect() } else { candidates.clone() };
            let anchor = pool.iter().copied().fold(pool[0], |b, k| if exact.values[k].norm() > exact.values[b].norm() { k } else { b });
            let reference = exact.values[anchor].arg();
            let approx_n = normalize_field(&approx, anchor, reference)?;
            let exact_n = normalize_field(&exact, anchor, reference)?;
            let pick = |f: &ComplexField| candidates.iter().map(|&k| f.values[k]).collect::<Vec<_>>();
            let (mut along_approx, mut along_exact) = (Vec::new(), Vec::new());
            for k in &kept {
                for (state, snap) in &k.interior {
                    along_approx.push(contract(w, snap));
                    along_exact.push(analytic_lti_resolvent(a, c, s, state)?);
                }
            }
            metrics.push(FieldMetrics {
                target_hz: hz,
                interior_ics: candidates.len(),
                excluded_ics: ics.len() - candidates.len(),
                correlation: complex_correlation(&pick(&approx_n), &pick(&exact_n)),
                relative_l2: scaled_relative_error(&pick(&approx_n), &pick(&exact_n)),
                all_ic_correlation: complex_correlation(&approx_n.values, &exact_n.values),
                all_ic_relative_l2: scaled_relative_error(&approx_n.values, &exact_n.values),
                along_trajectory_correlation: complex_correlation(&along_approx, &along_exact),
                along_trajectory_relative_l2: scaled_relative_error(&along_approx, &along_exact),
            });
            let name = format!("field_analytic_{t}.csv");
            out.write_with(&name, |wr| exact_n.write_csv(wr))?;
            analytic_file = Some(name);
            out.write_with(&field_file, |wr| approx_n.write_csv(wr))?;
        } else {
            let approx_n = normalize_field(&approx, 0, 0.0)?;
            out.write_with(&field_file, |wr| approx_n.write_csv(wr))?;
        }
        selected.push(SelectedMode {
            target_hz: hz,
            target_rad: omega,
            distance,
            mode: ModeSummary::of(&spectrum, mode),
            field_file,
            analytic_file,
        });
    }
    clock.record("fields", start.elapsed().as_secs_f64());

    let bode = match lti_parts(config) {
        Some((a, c)) => {
            let (omegas, mags) = clock.time("bode", || analytic_bode(a, c, ics))?;
            Some(write_sweep(&mut out, "bode.csv", &omegas, 0.0, &mags)?)
        }
        None => None,
    };

    let mut order: Vec<usize> = (0..spectrum.len()).filter(|&m| spectrum.flags[m] != ModeFlag::SpuriousZero).collect();
    order.sort_by(|&x, &y| spectrum.discrete_eigenvalues[y].norm().total_cmp(&spectrum.discrete_eigenvalues[x].norm()).then(x.cmp(&y)));
    let top_modes = order.iter().take(TOP_MODES).map(|&m| ModeSummary::of(&spectrum, m)).collect();

    let config_sha256 = config.hash();
    let mut report = ExperimentReport {
        system: config.system.label(),
        library_version: LIBRARY_VERSION.to_string(),
        config_sha256: config_sha256.clone(),
        initial_conditions: ensemble.len(),
        steps,
        observable_rows: width,
        snapshot_pairs,
        retained_rank: edmd.svd_rank,
        warnings,
        top_modes,
        selected,
        metrics,
        bode,
        files: Vec::new(),
        timings: Vec::new(),
    };
    report.files = out.written().to_vec();
    report.files.push("report.json".into());
    report.timings = clock.timings;
    let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    out.write_text("report.json", &text)?;
    out.write_manifest(&config_sha256)?;
    Ok(ExperimentRun { report, spectrum })
}

fn require(config: &ExperimentConfig, ok: bool, what: &str) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{what} experiment cannot run system {:?}", config.system.label())).into())
    }
}

/// The linear experiment: analytic resolvent references and Bode sweep.
pub fn run_lti_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, RunError> {
    require(config, matches!(config.system, SystemConfig::Lti { .. }), "lti")?;
    run_experiment(config)
}

/// The chaotic experiment, also used for registry systems without an
/// analytic reference.
pub fn run_lorenz_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, RunError> {
    require(config, !matches!(config.system, SystemConfig::Lti { .. }), "lorenz")?;
    run_experiment(config)
}

/// Writes one `trajectory_{k}.csv` per initial condition.
pub fn run_simulation(config: &ExperimentConfig) -> Result<Vec<String>, RunError> {
    let mut clock = Stopwatch::default();
    let (_, ensemble) = simulate(config, &mut clock)?;
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write_text("config.json", &config.to_json())?;
    for (k, traj) in ensemble.trajectories.iter().enumerate() {
        out.write_with(&format!("trajectory_{k}.csv"), |w| traj.write_csv(w))?;
    }
    out.write_manifest(&config.hash())?;
    Ok(out.written().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub re_s: f64,
    /// Shift index of the state used on each trajectory.
    pub state_shift: usize,
    pub quadrature: SweepPeak,
    pub analytic: Option<SweepPeak>,
}

/// Real part of `s` on resolvent sweeps.
pub const SWEEP_RE_S: f64 = 1.0;

/// Evaluates the resolvent quadrature at the mid-window state of every
/// trajectory over `Im s` spanning the scale grid's band, and reports the
/// RMS magnitude across trajectories.
pub fn run_resolvent_sweep(config: &ExperimentConfig) -> Result<SweepReport, RunError> {
    let mut clock = Stopwatch::default();
    let (_, ensemble) = simulate(config, &mut clock)?;
    let steps = ensemble.steps();
    let shift = steps / 2;
    let grid = make_scale_grid(config.c_param, config.j_max)?;
    let scheme = QuadratureScheme::new(grid.clone(), config.dt, config.omega0)?;
    let kind = WaveletKind::modulated_gaussian(config.omega0);
    let plan = CwtPlan::new(steps + 1)?;
    let mut psi = Vec::with_capacity(ensemble.len());
    for traj in &ensemble.trajectories {
        let cwt = plan.transform(&Signal::new(ensemble.dt, traj.outputs.clone())?, &grid.scales, &kind)?;
        psi.push((0..grid.len()).map(|j| cwt.get(j, shift)).collect::<Vec<_>>());
    }
    let (lo, hi) = (grid.scales[0], grid.scales[grid.len() - 1]);
    let omegas = log_space(config.omega0 / (hi * config.dt), config.omega0 / (lo * config.dt), SWEEP_POINTS);
    let mut mags = Vec::with_capacity(omegas.len());
    for &om in &omegas {
        let s = Complex64::new(SWEEP_RE_S, om);
        let mut sum = 0.0;
        for p in &psi {
            sum += resolvent_quadrature(p, &scheme, s)?.norm_sqr();
        }
        mags.push((sum / psi.len() as f64).sqrt());
    }
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write_text("config.json", &config.to_json())?;
    let quadrature = write_sweep(&mut out, "resolvent_sweep.csv", &omegas, SWEEP_RE_S, &mags)?;
    let analytic = match lti_parts(config) {
        Some((a, c)) => {
            let states: Vec<&Vec<f64>> = ensemble.trajectories.iter().map(|t| &t.states[shift]).collect();
            let mut exact = Vec::with_capacity(omegas.len());
            for &om in &omegas {
                let mut sum = 0.0;
                for x in &states {
                    sum += analytic_lti_resolvent(a, c, Complex64::new(SWEEP_RE_S, om), x)?.norm_sqr();
                }
                exact.push((sum / states.len() as f64).sqrt());
            }
            Some(write_sweep(&mut out, "resolvent_sweep_analytic.csv", &omegas, SWEEP_RE_S, &exact)?)
        }
        None => None,
    };
    let report = SweepReport { re_s: SWEEP_RE_S, state_shift: shift, quadrature, analytic };
    out.write_text("sweep.json", &serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?)?;
    out.write_manifest(&config.hash())?;
    Ok(report)
}
