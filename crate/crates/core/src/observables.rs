//! Wavelet-based observables evaluated from output trajectories, their
//! realified EDMD data matrices, and the eigenfunction residual check for the
//! modulated Gaussian.

use std::f64::consts::{LN_2, PI};
use std::io::{self, Write};

use faer::Mat;
use num_complex::Complex64;

use crate::dynsys::OutputEnsemble;
use crate::error::{Error, Result};
use crate::export;
use crate::wavelet::{cwt_direct, CwtGrid, CwtPlan, Signal, WaveletKind};

/// Dyadic scale grid `σ_j = 2^{j/C}`, `j = 1..=J`, in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub c_param: u32,
    pub j_max: u32,
    pub scales: Vec<f64>,
}

impl ScaleGrid {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Constant `dσ/|σ|` weight `ln 2 / C` of every node.
    pub fn log_weight(&self) -> f64 {
        LN_2 / self.c_param as f64
    }
}

pub fn make_scale_grid(c_param: u32, j_max: u32) -> Result<ScaleGrid> {
    if c_param == 0 || j_max == 0 {
        return Err(Error::InvalidArgument(format!("scale grid needs C >= 1 and J >= 1, got C = {c_param}, J = {j_max}")));
    }
    let scales = (1..=j_max).map(|j| 2f64.powf(j as f64 / c_param as f64)).collect();
    Ok(ScaleGrid { c_param, j_max, scales })
}

/// Per-trajectory CWT of the outputs: `per_trajectory[k].get(j, i)` is the
/// observable `ψ_{σ_j}` advanced by `i dt` along trajectory `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableEvaluations {
    pub scales: ScaleGrid,
    pub per_trajectory: Vec<CwtGrid>,
}

pub fn evaluate_observables(ensemble: &OutputEnsemble, grid: &ScaleGrid, kind: &WaveletKind) -> Result<ObservableEvaluations> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("ensemble is empty".into()));
    }
    let plan = CwtPlan::new(ensemble.steps() + 1)?;
    let per_trajectory = ensemble
        .trajectories
        .iter()
        .map(|traj| plan.transform(&Signal::new(ensemble.dt, traj.outputs.clone())?, &grid.scales, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservableEvaluations { scales: grid.clone(), per_trajectory })
}

/// Realified snapshots of one trajectory: row `i` holds
/// `(Re w_1..Re w_J, Im w_1..Im w_J, mean)` at shift `i`.
pub fn realify_trajectory(grid: &CwtGrid, outputs: &[f64]) -> Result<Mat<f64>> {
    let shifts = grid.shifts();
    if outputs.len() != shifts {
        return Err(Error::LengthMismatch(format!("{} output samples for {shifts} shifts", outputs.len())));
    }
    let j = grid.scales().len();
    let mean = outputs.iter().sum::<f64>() / outputs.len() as f64;
    let mut block = Mat::<f64>::zeros(shifts, 2 * j + 1);
    for s in 0..j {
        for (i, z) in grid.row(s).iter().enumerate() {
            block[(i, s)] = z.re;
            block[(i, j + s)] = z.im;
        }
    }
    for i in 0..shifts {
        block[(i, 2 * j)] = mean;
    }
    Ok(block)
}

/// Realified EDMD data. Trajectory `k` contributes the snapshot block
/// `blocks[k]` ((N+1) x J'); Ψ uses its shifts `0..N`, Ψ₊ shifts `1..=N`,
/// and trajectories are concatenated column-wise in order.
#[derive(Debug, Clone)]
pub struct ObservableMatrices {
    scales: usize,
    steps: usize,
    blocks: Vec<Mat<f64>>,
}

impl ObservableMatrices {
    /// Wraps per-trajectory snapshot blocks (rows = shifts, columns = J').
    pub fn from_blocks(scales: usize, blocks: Vec<Mat<f64>>) -> Result<Self> {
        let width = 2 * scales + 1;
        let first = blocks.first().ok_or_else(|| Error::InvalidArgument("no trajectory blocks".into()))?;
        let shifts = first.nrows();
        if shifts < 2 {
            return Err(Error::SignalTooShort(shifts));
        }
        if blocks.iter().any(|b| b.nrows() != shifts || b.ncols() != width) {
            return Err(Error::LengthMismatch("trajectory blocks differ in shape".into()));
        }
        Ok(Self { scales, steps: shifts - 1, blocks })
    }

    /// Number of observables J' = 2J + 1.
    pub fn rows(&self) -> usize {
        2 * self.scales + 1
    }

    /// Number of snapshot pairs N K.
    pub fn cols(&self) -> usize {
        self.steps * self.blocks.len()
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn trajectories(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Mat<f64>] {
        &self.blocks
    }

    /// Column of Ψ holding shift `i < N` of trajectory `k`.
    pub fn column_index(&self, k: usize, i: usize) -> Option<usize> {
        (k < self.blocks.len() && i < self.steps).then_some(k * self.steps + i)
    }

    /// Observable vector of trajectory `k` at shift `i <= N`.
    pub fn snapshot(&self, k: usize, i: usize) -> Vec<f64> {
        let b = &self.blocks[k];
        (0..b.ncols()).map(|c| b[(i, c)]).collect()
    }

    fn assemble(&self, offset: usize) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.rows(), self.cols());
        for (k, b) in self.blocks.iter().enumerate() {
            for i in 0..self.steps {
                for r in 0..self.rows() {
                    m[(r, k * self.steps + i)] = b[(i + offset, r)];
                }
            }
        }
        m
    }

    /// Dense Ψ (J' x N K).
    pub fn psi(&self) -> Mat<f64> {
        self.assemble(0)
    }

    /// Dense Ψ₊ (J' x N K).
    pub fn psi_plus(&self) -> Mat<f64> {
        self.assemble(1)
    }

    /// Row names `re_s1..re_sJ, im_s1..im_sJ, mean`.
    pub fn observable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.scales).map(|j| format!("re_s{j}")).collect();
        names.extend((1..=self.scales).map(|j| format!("im_s{j}")));
        names.push("mean".into());
        names
    }

    /// One CSV per matrix: header of observable names, one line per data
    /// column (snapshot). `plus` selects Ψ₊ instead of Ψ.
    pub fn write_csv<W: Write>(&self, w: &mut W, plus: bool) -> io::Result<()> {
        export::write_header(w, &self.observable_names())?;
        let offset = usize::from(plus);
        for b in &self.blocks {
            for i in 0..self.steps {
                export::write_row(w, (0..b.ncols()).map(|c| b[(i + offset, c)]))?;
            }
        }
        Ok(())
    }
}

pub fn realify_and_assemble(evals: &ObservableEvaluations, ensemble: &OutputEnsemble) -> Result<ObservableMatrices> {
    if evals.per_trajectory.len() != ensemble.len() {
        return Err(Error::LengthMismatch(format!(
            "{} evaluated trajectories for an ensemble of {}",
            evals.per_trajectory.len(),
            ensemble.len()
        )));
    }
    let blocks = evals
        .per_trajectory
        .iter()
        .zip(&ensemble.trajectories)
        .map(|(grid, traj)| {
            if grid.scales().len() != evals.scales.len() {
                return Err(Error::LengthMismatch("grid scale count differs from the scale grid".into()));
            }
            realify_trajectory(grid, &traj.outputs)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservableMatrices::from_blocks(evals.scales.len(), blocks)
}

/// Evaluate and realify one trajectory at a time, so the complex transforms
/// of the whole ensemble are never held together.
pub fn assemble_observables(ensemble: &OutputEnsemble, grid: &ScaleGrid, kind: &WaveletKind) -> Result<ObservableMatrices> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("ensemble is empty".into()));
    }
    let plan = CwtPlan::new(ensemble.steps() + 1)?;
    let blocks = ensemble
        .trajectories
        .iter()
        .map(|traj| {
            let cwt = plan.transform(&Signal::new(ensemble.dt, traj.outputs.clone())?, &grid.scales, kind)?;
            realify_trajectory(&cwt, &traj.outputs)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservableMatrices::from_blocks(grid.len(), blocks)
}

/// One (trajectory, Δt) evaluation of the modulated-Gaussian eigenfunction
/// residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEntry {
    pub trajectory: usize,
    pub delta_t: f64,
    /// `|W(σ, τ₀ + Δt) − e^{iω₀Δt/σ − Δt²/2σ²} W(σ, τ₀)|`.
    pub residual: f64,
    /// `sqrt(2π)(e^{Δt²/2σ²} − 1) max|y|`.
    pub bound: f64,
    /// The same bound carrying an extra factor `|σ|` (σ in time units).
    pub bound_with_sigma: f64,
    pub slack: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Scale in time units.
    pub sigma: f64,
    pub omega0: f64,
    /// Shift index of the reference state on each trajectory.
    pub reference_shift: usize,
    pub entries: Vec<ResidualEntry>,
    /// Least-squares slope of `ln r` against `ln Δt` per trajectory (over
    /// `Δt > 0` with `r > 0`); `None` when fewer than two such points exist.
    pub slopes: Vec<Option<f64>>,
}

impl ResidualReport {
    pub fn all_within_bound(&self) -> bool {
        self.entries.iter().all(|e| e.within_bound)
    }
}

/// Additive slack on the residual check, relative to `max|y|`.
pub const RESIDUAL_SLACK: f64 = 1e-4;

/// [`check_eigen_residual_bound_at`] with the reference state at mid-window.
pub fn check_eigen_residual_bound(ensemble: &OutputEnsemble, sigma: f64, omega0: f64, dt_list: &[f64]) -> Result<ResidualReport> {
    check_eigen_residual_bound_at(ensemble, sigma, omega0, dt_list, ensemble.steps() / 2)
}

/// Checks that `ψ_σ` (modulated Gaussian, `σ` in time units) behaves as a
/// Koopman eigenfunction up to the quadratic bound, using the state
/// `x(τ₀)` at shift `reference_shift` of every trajectory.
///
/// Transform values come from the direct quadrature, so the window edges
/// only matter through the wavelet tails.
pub fn check_eigen_residual_bound_at(
    ensemble: &OutputEnsemble,
    sigma: f64,
    omega0: f64,
    dt_list: &[f64],
    reference_shift: usize,
) -> Result<ResidualReport> {
    if !(sigma > 0.0) || !(omega0 > 0.0) {
        return Err(Error::InvalidArgument("sigma and omega0 must be positive".into()));
    }
    let dt = ensemble.dt;
    let mut offsets = Vec::with_capacity(dt_list.len());
    for &delta in dt_list {
        let ratio = delta / dt;
        let steps = ratio.round();
        if !(delta >= 0.0) || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::DtNotOnGrid { dt: delta, sample_dt: dt });
        }
        let steps = steps as usize;
        if reference_shift + steps > ensemble.steps() {
            return Err(Error::InvalidArgument(format!("reference shift {reference_shift} plus {steps} steps leaves the window")));
        }
        offsets.push(steps);
    }

    let kind = WaveletKind::modulated_gaussian(omega0);
    let sigma_samples = sigma / dt;
    let mut entries = Vec::new();
    let mut slopes = Vec::new();
    for (k, traj) in ensemble.trajectories.iter().enumerate() {
        let signal = Signal::new(dt, traj.outputs.clone())?;
        let y_max = traj.outputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = RESIDUAL_SLACK * y_max;
        let tau0 = reference_shift as f64 * dt;
        let w0 = cwt_direct(&signal, &kind, sigma_samples, tau0)?;
        let mut points = Vec::new();
        for (&delta, &steps) in dt_list.iter().zip(&offsets) {
            let w = cwt_direct(&signal, &kind, sigma_samples, (reference_shift + steps) as f64 * dt)?;
            let phase = Complex64::new(-0.5 * delta * delta / (sigma * sigma), omega0 * delta / sigma).exp();
            let residual = (w - phase * w0).norm();
            let growth = (0.5 * delta * delta / (sigma * sigma)).exp_m1();
            let bound = (2.0 * PI).sqrt() * growth * y_max;
            if delta > 0.0 && residual > 0.0 {
                points.push((delta.ln(), residual.ln()));
            }
            entries.push(ResidualEntry {
                trajectory: k,
                delta_t: delta,
                residual,
                bound,
                bound_with_sigma: sigma * bound,
                slack,
                within_bound: residual <= bound + slack,
            });
        }
        slopes.push(fit_slope(&points));
    }
    Ok(ResidualReport { sigma, omega0, reference_shift, entries, slopes })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
