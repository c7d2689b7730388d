//! EDMD least squares, spectral post-processing and eigenfunction fields.
//!
//! The solve never forms Ψ explicitly: snapshot pairs `(ψ_i, ψ_{i+1})` are
//! streamed as rows of `[Ψᵀ | Ψ₊ᵀ]` into a tall-skinny QR, giving
//! `R = [[R11, R12], [0, R22]]`. Then `K̂ᵀ = R11⁺ R12`, with the
//! pseudoinverse taken from a truncated SVD of `R11`; `R11` has the singular
//! values of Ψ, so the truncation is the usual one on Ψ.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::export;
use crate::observables::ObservableMatrices;

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;
/// Eigenvalues with `|μ|` below this are SVD-truncation artifacts.
pub const SPURIOUS_MODULUS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EdmdMatrix {
    pub k_hat: Mat<f64>,
    pub svd_rank: usize,
    pub truncation_tol: f64,
    /// Singular values of Ψ, nonincreasing.
    pub singular_values: Vec<f64>,
}

/// Streaming TSQR of snapshot pairs for one observable dimension.
pub struct SnapshotAccumulator {
    width: usize,
    buffer: Mat<f64>,
    filled: usize,
    pairs: usize,
}

impl SnapshotAccumulator {
    pub fn new(width: usize) -> Self {
        assert!(width > 0, "observable dimension must be positive");
        let block = (8 * width).max(512);
        Self { width, buffer: Mat::zeros(2 * width + block, 2 * width), filled: 0, pairs: 0 }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of snapshot pairs pushed so far.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Adds one pair `(ψ, ψ₊)`.
    pub fn push(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.width || y.len() != self.width {
            return Err(Error::ShapeMismatch(format!(
                "snapshot lengths {} and {} for observable dimension {}",
                x.len(),
                y.len(),
                self.width
            )));
        }
        if self.filled == self.buffer.nrows() {
            self.compress();
        }
        let row = self.filled;
        for (c, v) in x.iter().chain(y).enumerate() {
            self.buffer[(row, c)] = *v;
        }
        self.filled += 1;
        self.pairs += 1;
        Ok(())
    }

    /// Adds the consecutive pairs of a snapshot block (rows = shifts).
    pub fn push_trajectory(&mut self, block: MatRef<'_, f64>) -> Result<()> {
        if block.ncols() != self.width {
            return Err(Error::ShapeMismatch(format!("block has {} columns, expected {}", block.ncols(), self.width)));
        }
        let mut prev: Vec<f64> = Vec::new();
        for i in 0..block.nrows() {
            let cur: Vec<f64> = (0..self.width).map(|c| block[(i, c)]).collect();
            if i > 0 {
                self.push(&prev, &cur)?;
            }
            prev = cur;
        }
        Ok(())
    }

    fn compress(&mut self) {
        if self.filled == 0 {
            return;
        }
        let r: Mat<f64> = self.buffer.as_ref().subrows(0, self.filled).qr().thin_R().to_owned();
        let keep = r.nrows();
        for c in 0..self.buffer.ncols() {
            for i in 0..self.filled {
                self.buffer[(i, c)] = if i < keep { r[(i, c)] } else { 0.0 };
            }
        }
        self.filled = keep;
    }

    /// Finishes the factorization and forms the truncated least-squares
    /// solution.
    pub fn finish(mut self, truncation_tol: f64) -> Result<EdmdMatrix> {
        if !(truncation_tol > 0.0 && truncation_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("truncation tolerance must lie in (0, 1), got {truncation_tol}")));
        }
        if self.pairs == 0 {
            return Err(Error::AllSingularValuesTruncated);
        }
        self.compress();
        let w = self.width;
        let mut r11 = Mat::<f64>::zeros(w, w);
        let mut r12 = Mat::<f64>::zeros(w, w);
        for i in 0..self.filled.min(w) {
            for c in 0..w {
                r11[(i, c)] = self.buffer[(i, c)];
                r12[(i, c)] = self.buffer[(i, w + c)];
            }
        }
        truncated_solve(r11.as_ref(), r12.as_ref(), truncation_tol)
    }
}

/// `K̂ = R12ᵀ U_r S_r⁻¹ V_rᵀ` from the SVD `R11 = U S Vᵀ`.
fn truncated_solve(r11: MatRef<'_, f64>, r12: MatRef<'_, f64>, tol: f64) -> Result<EdmdMatrix> {
    let svd = r11.svd().map_err(|_| Error::EigenFailure)?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let s_max = s.first().copied().unwrap_or(0.0);
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::AllSingularValuesTruncated);
    }
    let rank = s.iter().take_while(|&&v| v > tol * s_max).count();
    if rank == 0 {
        return Err(Error::AllSingularValuesTruncated);
    }
    let u = svd.U();
    let v = svd.V();
    let n = r11.nrows();
    let mut us = Mat::<f64>::zeros(n, rank);
    for c in 0..rank {
        let inv = 1.0 / s[c];
        for i in 0..n {
            us[(i, c)] = u[(i, c)] * inv;
        }
    }
    let k_hat = r12.transpose() * &us * v.subcols(0, rank).transpose();
    if k_hat.col_iter().any(|col| col.iter().any(|x| !x.is_finite())) {
        return Err(Error::AllSingularValuesTruncated);
    }
    Ok(EdmdMatrix { k_hat, svd_rank: rank, truncation_tol: tol, singular_values: s })
}

/// Solves `min ‖Ψ₊ − K Ψ‖_F` for the assembled observable matrices.
pub fn solve_edmd(matrices: &ObservableMatrices, truncation_tol: f64) -> Result<EdmdMatrix> {
    let mut acc = SnapshotAccumulator::new(matrices.rows());
    for block in matrices.blocks() {
        acc.push_trajectory(block.as_ref())?;
    }
    acc.finish(truncation_tol)
}

/// Same as [`solve_edmd`] for explicit `J' x M` matrices Ψ and Ψ₊.
pub fn solve_edmd_dense(psi: MatRef<'_, f64>, psi_plus: MatRef<'_, f64>, truncation_tol: f64) -> Result<EdmdMatrix> {
    if psi.nrows() != psi_plus.nrows() || psi.ncols() != psi_plus.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "psi is {}x{}, psi_plus is {}x{}",
            psi.nrows(),
            psi.ncols(),
            psi_plus.nrows(),
            psi_plus.ncols()
        )));
    }
    if psi.nrows() == 0 || psi.ncols() == 0 {
        return Err(Error::ShapeMismatch("empty data matrices".into()));
    }
    let mut acc = SnapshotAccumulator::new(psi.nrows());
    let mut x = vec![0.0; psi.nrows()];
    let mut y = vec![0.0; psi.nrows()];
    for c in 0..psi.ncols() {
        for r in 0..psi.nrows() {
            x[r] = psi[(r, c)];
            y[r] = psi_plus[(r, c)];
        }
        acc.push(&x, &y)?;
    }
    acc.finish(truncation_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeFlag {
    Regular,
    /// `|μ| < SPURIOUS_MODULUS`.
    SpuriousZero,
    /// `|Im λ|` at the Nyquist limit `π/Δt`; the frequency is aliased.
    Nyquist,
}

impl fmt::Display for ModeFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeFlag::Regular => "ok",
            ModeFlag::SpuriousZero => "spurious",
            ModeFlag::Nyquist => "nyquist",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub discrete_eigenvalues: Vec<Complex64>,
    /// `ln(μ)/Δt`, principal branch.
    pub continuous_eigenvalues: Vec<Complex64>,
    /// Unit-norm `w_m` with `w_mᴴ K̂ = μ_m w_mᴴ`.
    pub left_eigenvectors: Vec<Vec<Complex64>>,
    pub flags: Vec<ModeFlag>,
    pub dt: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.discrete_eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discrete_eigenvalues.is_empty()
    }

    /// CSV `re_mu,im_mu,re_lambda,im_lambda,flag`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "re_mu,im_mu,re_lambda,im_lambda,flag")?;
        for ((mu, lam), flag) in self.discrete_eigenvalues.iter().zip(&self.continuous_eigenvalues).zip(&self.flags) {
            writeln!(
                w,
                "{},{},{},{},{flag}",
                export::num(mu.re),
                export::num(mu.im),
                export::num(lam.re),
                export::num(lam.im)
            )?;
        }
        Ok(())
    }
}

pub fn spectral_decomposition(edmd: &EdmdMatrix, dt: f64) -> Result<SpectralDecomposition> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let k = &edmd.k_hat;
    if k.nrows() != k.ncols() || k.nrows() == 0 {
        return Err(Error::ShapeMismatch("EDMD matrix must be square and nonempty".into()));
    }
    // Right eigenvectors v of K̂ᵀ are conjugated left eigenvectors of K̂.
    let evd = k.transpose().eigen().map_err(|_| Error::EigenFailure)?;
    let vecs = evd.U();
    let vals = evd.S().column_vector();
    let n = k.nrows();
    let nyquist = PI / dt;
    let mut out = SpectralDecomposition {
        discrete_eigenvalues: Vec::with_capacity(n),
        continuous_eigenvalues: Vec::with_capacity(n),
        left_eigenvectors: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
        dt,
    };
    for m in 0..n {
        let mu = vals[m];
        if !(mu.re.is_finite() && mu.im.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let mut w: Vec<Complex64> = (0..n).map(|i| vecs[(i, m)].conj()).collect();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            w.iter_mut().for_each(|z| *z /= norm);
        }
        let lambda = mu.ln() / dt;
        let flag = if mu.norm() < SPURIOUS_MODULUS {
            ModeFlag::SpuriousZero
        } else if lambda.im.abs() >= nyquist * (1.0 - 1e-9) {
            ModeFlag::Nyquist
        } else {
            ModeFlag::Regular
        };
        out.discrete_eigenvalues.push(mu);
        out.continuous_eigenvalues.push(lambda);
        out.left_eigenvectors.push(w);
        out.flags.push(flag);
    }
    Ok(out)
}

/// Index of the non-spurious mode whose continuous eigenvalue is nearest
/// `target`, with its distance. Ties go to the smaller index.
pub fn select_eigenpair(spec: &SpectralDecomposition, target: Complex64) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (m, (lam, flag)) in spec.continuous_eigenvalues.iter().zip(&spec.flags).enumerate() {
        if *flag == ModeFlag::SpuriousZero {
            continue;
        }
        let d = (lam - target).norm();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((m, d));
        }
    }
    best.ok_or(Error::EmptySpectrum)
}

/// `wᴴ ψ` for a left eigenvector `w` and observable vector `ψ`.
pub fn contract(w: &[Complex64], psi: &[f64]) -> Complex64 {
    w.iter().zip(psi).map(|(w, p)| w.conj() * p).sum()
}

/// Complex values attached to sampled states.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Complex64>,
    pub normalized: bool,
}

impl ComplexField {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<Complex64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::LengthMismatch(format!("{} points for {} values", points.len(), values.len())));
        }
        Ok(Self { points, values, normalized: false })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV `x1,...,xn,magnitude,argument,re,im`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.points.first().map_or(0, Vec::len);
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.extend(["magnitude", "argument", "re", "im"].map(String::from));
        export::write_header(w, &names)?;
        for (p, v) in self.points.iter().zip(&self.values) {
            export::write_row(w, p.iter().copied().chain([v.norm(), v.arg(), v.re, v.im]))?;
        }
        Ok(())
    }
}

/// Evaluates mode `mode` at the snapshots `columns[p] = (trajectory, shift)`,
/// attaching them to `points[p]`.
pub fn eigenfunction_field(
    spec: &SpectralDecomposition,
    mode: usize,
    matrices: &ObservableMatrices,
    points: &[Vec<f64>],
    columns: &[(usize, usize)],
) -> Result<ComplexField> {
    let w = spec.left_eigenvectors.get(mode).ok_or(Error::IndexOutOfRange { index: mode, len: spec.len() })?;
    if w.len() != matrices.rows() {
        return Err(Error::ShapeMismatch(format!("eigenvector length {} for {} observables", w.len(), matrices.rows())));
    }
    if points.len() != columns.len() {
        return Err(Error::LengthMismatch(format!("{} points for {} columns", points.len(), columns.len())));
    }
    let values = columns
        .iter()
        .enumerate()
        .map(|(p, &(k, i))| {
            if k >= matrices.trajectories() || i > matrices.steps() {
                return Err(Error::ColumnMappingMissing(p));
            }
            Ok(contract(w, &matrices.snapshot(k, i)))
        })
        .collect::<Result<Vec<_>>>()?;
    ComplexField::new(points.to_vec(), values)
}

/// Scales the field by one complex factor so its largest modulus is 1 and the
/// value at `anchor` has argument `reference_argument`.
pub fn normalize_field(field: &ComplexField, anchor: usize, reference_argument: f64) -> Result<ComplexField> {
    let a = *field.values.get(anchor).ok_or(Error::IndexOutOfRange { index: anchor, len: field.len() })?;
    if a.norm() == 0.0 {
        return Err(Error::ZeroAnchor);
    }
    let max = field.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let factor = Complex64::from_polar(1.0 / max, reference_argument - a.arg());
    Ok(ComplexField {
        points: field.points.clone(),
        values: field.values.iter().map(|v| v * factor).collect(),
        normalized: true,
    })
}

/// `|⟨u, v⟩| / (‖u‖ ‖v‖)`.
pub fn complex_correlation(u: &[Complex64], v: &[Complex64]) -> f64 {
    let inner: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    inner.norm() / (nu * nv)
}

/// `min_α ‖α u − v‖ / ‖v‖` over complex α.
pub fn scaled_relative_error(u: &[Complex64], v: &[Complex64]) -> f64 {
    let inner: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let alpha = inner / uu;
    let err: f64 = u.iter().zip(v).map(|(a, b)| (alpha * a - b).norm_sqr()).sum();
    (err / vv).sqrt()
}
