//! Analyzing wavelets and the L1-normalized continuous wavelet transform
//!
//! `W[h](σ, τ) = ∫ h(t) conj(|σ|⁻¹ Γ((t − τ)/σ)) dt`,
//!
//! with the Fourier convention `Γ̂(ω) = (2π)^{-1/2} ∫ Γ(t) e^{-iωt} dt`.
//! Scales are measured in samples, so a scale `σ` analyzes the angular
//! frequency `ω₀ / (σ dt)`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::export;

/// `sqrt(2π)`: the single scalar relating the FFT evaluation of the CWT to the
/// direct quadrature. With an inverse DFT normalized by `1/L`, row `j` is
/// `IDFT(H_k · sqrt(2π) · conj(Γ̂(σ_j ω_k)))`; no `σ_j` factor appears because
/// the wavelet family is L1-normalized.
pub const CWT_FFT_NORMALIZATION: f64 = 2.5066282746310002;

/// Lower end of `|θ|` in the admissibility quadrature.
pub const ADMISSIBILITY_THETA_MIN: f64 = 1e-8;
/// The admissibility quadrature stops at `|θ| = ω₀ + ADMISSIBILITY_THETA_SPAN`,
/// past which the integrand is below 1e-30.
pub const ADMISSIBILITY_THETA_SPAN: f64 = 12.0;

/// Wavelet kernels are treated as zero beyond `|u| > KERNEL_SUPPORT`
/// (`e^{-u²/2} < 3e-18`) in the inverse transform.
const KERNEL_SUPPORT: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletVariant {
    /// `Ψ(t) = e^{iω₀t} e^{-t²/2}`; nonzero mean.
    ModulatedGaussian,
    /// `Γ_M(t) = (e^{iω₀t} − κ) e^{-t²/2}`; zero mean.
    Morlet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletKind {
    pub variant: WaveletVariant,
    pub omega0: f64,
    /// `exp(-ω₀²/2)`, fixed at construction.
    pub kappa: f64,
}

impl WaveletKind {
    pub fn new(variant: WaveletVariant, omega0: f64) -> Self {
        Self { variant, omega0, kappa: (-0.5 * omega0 * omega0).exp() }
    }

    pub fn modulated_gaussian(omega0: f64) -> Self {
        Self::new(WaveletVariant::ModulatedGaussian, omega0)
    }

    pub fn morlet(omega0: f64) -> Self {
        Self::new(WaveletVariant::Morlet, omega0)
    }

    /// Whether the wavelet has zero mean and admits an inverse transform.
    pub fn is_admissible(&self) -> bool {
        self.variant == WaveletVariant::Morlet
    }

    /// Time-domain value `Γ(t)`.
    pub fn time(&self, t: f64) -> Complex64 {
        let env = (-0.5 * t * t).exp();
        let carrier = Complex64::from_polar(1.0, self.omega0 * t);
        match self.variant {
            WaveletVariant::ModulatedGaussian => carrier * env,
            WaveletVariant::Morlet => (carrier - self.kappa) * env,
        }
    }

    /// Fourier-domain value `Γ̂(ω)`. Real for both variants.
    pub fn fourier_re(&self, omega: f64) -> f64 {
        let d = omega - self.omega0;
        let g = (-0.5 * d * d).exp();
        match self.variant {
            WaveletVariant::ModulatedGaussian => g,
            WaveletVariant::Morlet => g - self.kappa * (-0.5 * omega * omega).exp(),
        }
    }

    pub fn fourier(&self, omega: f64) -> Complex64 {
        self.fourier_re(omega).into()
    }
}

pub fn wavelet_time(kind: &WaveletKind, t: f64) -> Complex64 {
    kind.time(t)
}

pub fn wavelet_fourier(kind: &WaveletKind, omega: f64) -> Complex64 {
    kind.fourier(omega)
}

/// Uniformly sampled real signal with at least two finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dt: f64,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample spacing must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::SignalTooShort(samples.len()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal("samples must be finite".into()));
        }
        Ok(Self { dt, samples })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }
}

/// How a transform treats the signal outside its sampled window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Signal is zero outside the window (direct quadrature).
    ZeroExtended,
    /// Signal repeats with the window length (DFT evaluation).
    Periodic,
}

/// Wavelet coefficients over (scale, shift); `coefficients[j][i] ≈ W(σ_j, i dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CwtGrid {
    scales: Vec<f64>,
    dt: f64,
    shifts: usize,
    boundary: Boundary,
    coefficients: Vec<Complex64>,
}

impl CwtGrid {
    /// Assembles a grid from row-major coefficients (`scales.len()` rows of
    /// `shifts` values).
    pub fn from_rows(scales: Vec<f64>, dt: f64, shifts: usize, boundary: Boundary, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != scales.len() * shifts {
            return Err(Error::LengthMismatch(format!(
                "{} coefficients for {} scales x {shifts} shifts",
                coefficients.len(),
                scales.len()
            )));
        }
        Ok(Self { scales, dt, shifts, boundary, coefficients })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of shifts, N + 1.
    pub fn shifts(&self) -> usize {
        self.shifts
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.coefficients[j * self.shifts..(j + 1) * self.shifts]
    }

    pub fn get(&self, j: usize, i: usize) -> Complex64 {
        self.coefficients[j * self.shifts + i]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// CSV with header `sigma,tau,re,im`, one row per (scale, shift).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        export::write_header(w, &["sigma".into(), "tau".into(), "re".into(), "im".into()])?;
        for (j, &sigma) in self.scales.iter().enumerate() {
            for (i, z) in self.row(j).iter().enumerate() {
                export::write_row(w, [sigma, i as f64 * self.dt, z.re, z.im])?;
            }
        }
        Ok(())
    }
}

/// Trapezoid-rule quadrature of the CWT at one (σ, τ), treating the signal as
/// zero outside its window. `sigma` is in samples, `tau` in time units.
/// This is the slow reference for [`cwt_fft`].
pub fn cwt_direct(signal: &Signal, kind: &WaveletKind, sigma: f64, tau: f64) -> Result<Complex64> {
    if sigma == 0.0 {
        return Err(Error::ZeroScale);
    }
    let c = tau / signal.dt;
    let last = signal.samples.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, &h) in signal.samples.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        let w = if n == 0 || n == last { 0.5 } else { 1.0 };
        acc += kind.time((n as f64 - c) / sigma).conj() * (w * h);
    }
    Ok(acc / sigma.abs())
}

/// [`cwt_direct`] over every scale and every sample shift.
pub fn cwt_direct_grid(signal: &Signal, scales: &[f64], kind: &WaveletKind) -> Result<CwtGrid> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let shifts = signal.len();
    let mut coefficients = Vec::with_capacity(scales.len() * shifts);
    for &sigma in scales {
        for i in 0..shifts {
            coefficients.push(cwt_direct(signal, kind, sigma, i as f64 * signal.dt)?);
        }
    }
    CwtGrid::from_rows(scales.to_vec(), signal.dt, shifts, Boundary::ZeroExtended, coefficients)
}

/// Angular frequency of DFT bin `k` for length `len`, in rad/sample, with the
/// upper half (and the Nyquist bin for even lengths) mapped to negative values.
pub fn dft_angular_frequency(k: usize, len: usize) -> f64 {
    let signed = if 2 * k < len { k as f64 } else { k as f64 - len as f64 };
    TAU * signed / len as f64
}

/// Reusable FFT plans for transforming signals of one fixed length.
pub struct CwtPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    normalization: f64,
    omegas: Vec<f64>,
}

impl CwtPlan {
    pub fn new(len: usize) -> Result<Self> {
        Self::with_normalization(len, CWT_FFT_NORMALIZATION)
    }

    /// A plan with a non-default scalar normalization. Only useful for
    /// checking that the oracle comparison detects a wrong constant.
    pub fn with_normalization(len: usize, normalization: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::SignalTooShort(len));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            normalization,
            omegas: (0..len).map(|k| dft_angular_frequency(k, len)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Writes the `scales.len() x len` coefficients of `samples` row-major
    /// into `out`.
    pub fn transform_into(&self, samples: &[f64], scales: &[f64], kind: &WaveletKind, out: &mut [Complex64]) -> Result<()> {
        if scales.is_empty() {
            return Err(Error::EmptyScales);
        }
        if samples.len() != self.len {
            return Err(Error::LengthMismatch(format!("plan length {} but signal length {}", self.len, samples.len())));
        }
        if out.len() != scales.len() * self.len {
            return Err(Error::LengthMismatch("output buffer has the wrong size".into()));
        }
        if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(if *s == 0.0 { Error::ZeroScale } else { Error::InvalidArgument(format!("scale {s} is not positive")) });
        }

        let mut spectrum: Vec<Complex64> = samples.iter().map(|&v| v.into()).collect();
        self.forward.process(&mut spectrum);
        let gain = self.normalization / self.len as f64;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for (row, &sigma) in out.chunks_exact_mut(self.len).zip(scales) {
            for ((o, h), &w) in row.iter_mut().zip(&spectrum).zip(&self.omegas) {
                // Γ̂ is real for both variants, so the conjugate is a no-op.
                *o = h * (gain * kind.fourier_re(sigma * w));
            }
            self.inverse.process_with_scratch(row, &mut scratch);
        }
        Ok(())
    }

    pub fn transform(&self, signal: &Signal, scales: &[f64], kind: &WaveletKind) -> Result<CwtGrid> {
        let mut out = vec![Complex64::new(0.0, 0.0); scales.len() * self.len];
        self.transform_into(signal.samples(), scales, kind, &mut out)?;
        CwtGrid::from_rows(scales.to_vec(), signal.dt, self.len, Boundary::Periodic, out)
    }
}

/// CWT at every sample shift via the DFT, treating the signal as periodic.
pub fn cwt_fft(signal: &Signal, scales: &[f64], kind: &WaveletKind) -> Result<CwtGrid> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    CwtPlan::new(signal.len())?.transform(signal, scales, kind)
}

/// `C_Γ = 2π ∫ |Γ̂(θ)|²/|θ| dθ` by composite Simpson over
/// `|θ| ∈ [ADMISSIBILITY_THETA_MIN, ω₀ + ADMISSIBILITY_THETA_SPAN]`, both signs,
/// with `quad_points` intervals per sign.
pub fn admissibility_constant(kind: &WaveletKind, quad_points: usize) -> Result<f64> {
    admissibility_constant_on(kind, quad_points, ADMISSIBILITY_THETA_MIN, kind.omega0 + ADMISSIBILITY_THETA_SPAN)
}

/// [`admissibility_constant`] over a caller-chosen truncation `[theta_min, theta_max]`.
pub fn admissibility_constant_on(kind: &WaveletKind, quad_points: usize, theta_min: f64, theta_max: f64) -> Result<f64> {
    if !kind.is_admissible() {
        return Err(Error::NotAdmissible);
    }
    if quad_points < 100 {
        return Err(Error::InvalidArgument(format!("quad_points must be at least 100, got {quad_points}")));
    }
    if !(0.0 < theta_min && theta_min < theta_max) {
        return Err(Error::InvalidArgument("truncation interval must satisfy 0 < min < max".into()));
    }
    let integrand = |theta: f64| {
        let g = kind.fourier_re(theta);
        g * g / theta.abs()
    };
    let pos = simpson(integrand, theta_min, theta_max, quad_points);
    let neg = simpson(integrand, -theta_max, -theta_min, quad_points);
    Ok(TAU * (pos + neg))
}

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Quadrature weights for `dσ/|σ|` on an increasing positive scale list: half
/// the distance in `ln σ` to each neighbour, mirrored at the ends. On the
/// grid `σ_j = 2^{j/C}` this is the constant `ln 2 / C`.
pub fn log_scale_weights(scales: &[f64]) -> Result<Vec<f64>> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("scales must be positive and strictly increasing".into()));
    }
    let logs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let j = logs.len();
    if j == 1 {
        return Ok(vec![1.0]);
    }
    Ok((0..j)
        .map(|i| {
            let left = if i > 0 { logs[i] - logs[i - 1] } else { logs[1] - logs[0] };
            let right = if i + 1 < j { logs[i + 1] - logs[i] } else { logs[j - 1] - logs[j - 2] };
            0.5 * (left + right)
        })
        .collect())
}

/// Pointwise inverse transform
/// `h(t) ≈ (1/C_Γ) ∫∫ W(σ, τ) |σ|⁻¹ Γ((t − τ)/σ) dτ dσ/|σ|`
/// over the grid's (positive) scales, adding the negative-scale half as the
/// conjugate term valid for real signals and the Morlet wavelet. Periodic
/// grids use the periodized kernel in τ.
pub fn inverse_cwt_pointwise(grid: &CwtGrid, kind: &WaveletKind, t: f64, c_gamma: f64) -> Result<f64> {
    if !kind.is_admissible() {
        return Err(Error::NotAdmissible);
    }
    if !(c_gamma > 0.0 && c_gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("admissibility constant must be positive, got {c_gamma}")));
    }
    let end = (grid.shifts - 1) as f64 * grid.dt;
    if !(0.0..=end).contains(&t) {
        return Err(Error::OutOfWindow { t, end });
    }
    let weights = log_scale_weights(&grid.scales)?;
    let len = grid.shifts as i64;
    let c = t / grid.dt;
    let mut total = 0.0;
    for (j, (&sigma, &weight)) in grid.scales.iter().zip(&weights).enumerate() {
        let row = grid.row(j);
        let reach = KERNEL_SUPPORT * sigma;
        let lo = (c - reach).ceil() as i64;
        let hi = (c + reach).floor() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for n in lo..=hi {
            let m = match grid.boundary {
                Boundary::Periodic => n.rem_euclid(len),
                Boundary::ZeroExtended if (0..len).contains(&n) => n,
                Boundary::ZeroExtended => continue,
            };
            acc += row[m as usize] * kind.time((c - n as f64) / sigma);
        }
        total += weight * acc.re / sigma;
    }
    Ok(2.0 * total / c_gamma)
}

/// Reference value of `∫ e^{iωt} conj(|σ|⁻¹Γ((t − τ)/σ)) dt
/// = e^{iωτ} sqrt(2π) conj(Γ̂(σω))` (all quantities in one time unit).
pub fn tone_coefficient(kind: &WaveletKind, omega: f64, sigma: f64, tau: f64) -> Complex64 {
    Complex64::from_polar(1.0, omega * tau) * ((2.0 * PI).sqrt() * kind.fourier_re(sigma * omega))
}
