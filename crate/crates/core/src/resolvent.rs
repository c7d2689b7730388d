//! Closed-form Morlet reconstructions of the Koopman semigroup action and
//! resolvent on the output map, discretized over the dyadic scale grid.
//!
//! With `ψ_j = ψ_{σ_j}(x)` the modulated-Gaussian observables at state `x`,
//!
//! `K_Δt[g](x) ≈ A Σ_j w_j [ψ_j (e^{iω₀Δt/σ_j} − κ) + conj(ψ_j)(e^{−iω₀Δt/σ_j} − κ)]`,
//!
//! `R(s)[g](x) ≈ A Σ_j w_j [ψ_j (1/(s − iω₀/σ_j) − κ/s) + conj(ψ_j)(1/(s + iω₀/σ_j) − κ/s)]`,
//!
//! where the conjugate terms are the negative-scale half for real outputs,
//! `w_j = ln2/C` discretizes `dσ/|σ|`, and `σ_j` is in time units.
//!
//! The prefactor is `A = 1/(sqrt(2π) I_M)` with `I_M = ∫₀^∞ Γ̂_M(u)/u du`.
//! Requiring `K_0[g] = g` for a single tone fixes this value. It differs from
//! `sqrt(2π)/C_Γ` by the scale-independent factor `C_Γ/(2π I_M)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observables::ScaleGrid;
use crate::wavelet::{admissibility_constant, simpson, WaveletKind, ADMISSIBILITY_THETA_MIN, ADMISSIBILITY_THETA_SPAN};

/// Quadrature resolution used for the scheme's constants.
pub const SCHEME_QUAD_POINTS: usize = 4000;

/// `∫₀^∞ Γ̂_M(u)/u du` by composite Simpson over the admissibility truncation.
pub fn morlet_reconstruction_integral(kind: &WaveletKind, quad_points: usize) -> Result<f64> {
    if !kind.is_admissible() {
        return Err(Error::NotAdmissible);
    }
    Ok(simpson(|u| kind.fourier_re(u) / u, ADMISSIBILITY_THETA_MIN, kind.omega0 + ADMISSIBILITY_THETA_SPAN, quad_points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScheme {
    pub scales: ScaleGrid,
    /// Sampling interval converting sample scales to time units.
    pub dt: f64,
    pub weights: Vec<f64>,
    /// Admissibility constant of the Morlet wavelet with this `ω₀`.
    pub c_gamma: f64,
    pub omega0: f64,
    pub kappa: f64,
    /// `∫₀^∞ Γ̂_M(u)/u du`.
    pub reconstruction_integral: f64,
}

impl QuadratureScheme {
    pub fn new(scales: ScaleGrid, dt: f64, omega0: f64) -> Result<Self> {
        if !(dt > 0.0) || !(omega0 > 0.0) {
            return Err(Error::InvalidArgument("dt and omega0 must be positive".into()));
        }
        let morlet = WaveletKind::morlet(omega0);
        let c_gamma = admissibility_constant(&morlet, SCHEME_QUAD_POINTS)?;
        let reconstruction_integral = morlet_reconstruction_integral(&morlet, SCHEME_QUAD_POINTS)?;
        let weights = vec![scales.log_weight(); scales.len()];
        Ok(Self { scales, dt, weights, c_gamma, omega0, kappa: morlet.kappa, reconstruction_integral })
    }

    /// Overall factor `1/(sqrt(2π) I_M)` applied to the scale sums.
    pub fn prefactor(&self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.reconstruction_integral)
    }

    /// `sqrt(2π)/C_Γ`, the factor as written in the closed-form theorem.
    pub fn stated_prefactor(&self) -> f64 {
        (2.0 * PI).sqrt() / self.c_gamma
    }

    /// Scale `j` in time units.
    pub fn time_scale(&self, j: usize) -> f64 {
        self.scales.scales[j] * self.dt
    }

    fn check(&self, psi_values: &[Complex64]) -> Result<()> {
        if psi_values.len() != self.scales.len() || self.weights.len() != self.scales.len() {
            return Err(Error::SchemeMismatch(format!(
                "{} observable values for {} scales",
                psi_values.len(),
                self.scales.len()
            )));
        }
        Ok(())
    }
}

/// Approximates `K_Δt[g](x) = y(Δt, x)` from the modulated-Gaussian values
/// `ψ_{σ_j}(x)`. The result is real up to rounding.
pub fn koopman_action_quadrature(psi_values: &[Complex64], scheme: &QuadratureScheme, delta_t: f64) -> Result<Complex64> {
    scheme.check(psi_values)?;
    if !(delta_t >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta_t must be nonnegative, got {delta_t}")));
    }
    let mut acc = 0.0;
    for (j, (psi, w)) in psi_values.iter().zip(&scheme.weights).enumerate() {
        let rot = Complex64::from_polar(1.0, scheme.omega0 * delta_t / scheme.time_scale(j)) - scheme.kappa;
        // ψ·rot plus its conjugate (the −σ term).
        acc += 2.0 * w * (psi * rot).re;
    }
    Ok(Complex64::new(scheme.prefactor() * acc, 0.0))
}

/// Approximates `(s − K)⁻¹[g](x)` for `Re s > 0`.
pub fn resolvent_quadrature(psi_values: &[Complex64], scheme: &QuadratureScheme, s: Complex64) -> Result<Complex64> {
    resolvent_quadrature_with_kappa(psi_values, scheme, s, true)
}

/// [`resolvent_quadrature`] optionally dropping the `κ/s` terms.
pub fn resolvent_quadrature_with_kappa(psi_values: &[Complex64], scheme: &QuadratureScheme, s: Complex64, with_kappa: bool) -> Result<Complex64> {
    scheme.check(psi_values)?;
    if !(s.re > 0.0) {
        return Err(Error::InvalidSpectralPoint(s.re));
    }
    let kappa_term = if with_kappa { scheme.kappa / s } else { Complex64::new(0.0, 0.0) };
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, (psi, w)) in psi_values.iter().zip(&scheme.weights).enumerate() {
        let freq = Complex64::new(0.0, scheme.omega0 / scheme.time_scale(j));
        let pos = (s - freq).inv() - kappa_term;
        let neg = (s + freq).inv() - kappa_term;
        acc += (psi * pos + psi.conj() * neg) * w;
    }
    Ok(acc * scheme.prefactor())
}

/// Sample-unit scale `ω₀ / (|Im s| dt)` whose observable stands in for the
/// resolvent at `s`.
pub fn eigenfunction_surrogate_scale(s: Complex64, omega0: f64, dt: f64) -> Result<f64> {
    if s.im == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(omega0 > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument("omega0 and dt must be positive".into()));
    }
    Ok(omega0 / (s.im.abs() * dt))
}
