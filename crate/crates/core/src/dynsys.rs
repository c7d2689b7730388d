//! Dynamical systems with scalar outputs, fixed-step RK4 integration, seeded
//! initial-condition sampling and the analytic LTI resolvent.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::export;

pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type OutputMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A vector field `x' = T(x)` on R^n together with a scalar output `y = g(x)`.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    dimension: usize,
    vector_field: VectorField,
    output_map: OutputMap,
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        vector_field: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        output_map: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(dimension > 0, "system dimension must be positive");
        Self {
            name: name.into(),
            dimension,
            vector_field: Arc::new(vector_field),
            output_map: Arc::new(output_map),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluates the vector field at `x` into `dx`.
    pub fn field(&self, x: &[f64], dx: &mut [f64]) {
        (self.vector_field)(x, dx)
    }

    /// Convenience allocation form of [`SystemSpec::field`].
    pub fn field_at(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dimension];
        self.field(x, &mut dx);
        dx
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        (self.output_map)(x)
    }
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

/// States and outputs sampled at `t_i = i dt`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl TrajectoryGrid {
    /// Number of steps N (one less than the number of samples).
    pub fn steps(&self) -> usize {
        self.outputs.len() - 1
    }

    /// CSV with header `t,x1,...,xn,y`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut names = vec!["t".to_string()];
        names.extend((1..=n).map(|i| format!("x{i}")));
        names.push("y".into());
        export::write_header(w, &names)?;
        for (i, (x, y)) in self.states.iter().zip(&self.outputs).enumerate() {
            let row = std::iter::once(i as f64 * self.dt)
                .chain(x.iter().copied())
                .chain(std::iter::once(*y));
            export::write_row(w, row)?;
        }
        Ok(())
    }
}

/// Output trajectories from K initial conditions on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputEnsemble {
    pub dt: f64,
    pub initial_conditions: Vec<Vec<f64>>,
    pub trajectories: Vec<TrajectoryGrid>,
}

impl OutputEnsemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Number of steps N shared by all trajectories.
    pub fn steps(&self) -> usize {
        self.trajectories.first().map_or(0, TrajectoryGrid::steps)
    }
}

/// Classical fourth-order Runge–Kutta with fixed step `dt`.
pub fn integrate_rk4(system: &SystemSpec, x0: &[f64], dt: f64, steps: usize) -> Result<TrajectoryGrid> {
    let n = system.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state has length {}, system order is {n}", x0.len())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }

    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    let y0 = system.output(&x);
    if !y0.is_finite() {
        return Err(Error::NonFiniteState { step: 0 });
    }
    states.push(x.clone());
    outputs.push(y0);

    for step in 1..=steps {
        system.field(&x, &mut k1);
        axpy_into(&mut tmp, &x, 0.5 * dt, &k1);
        system.field(&tmp, &mut k2);
        axpy_into(&mut tmp, &x, 0.5 * dt, &k2);
        system.field(&tmp, &mut k3);
        axpy_into(&mut tmp, &x, dt, &k3);
        system.field(&tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let stages_finite = [&k1, &k2, &k3, &k4].iter().all(|k| k.iter().all(|v| v.is_finite()));
        let y = system.output(&x);
        if !stages_finite || !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        states.push(x.clone());
        outputs.push(y);
    }
    Ok(TrajectoryGrid { dt, states, outputs })
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// Integrates every initial condition for `steps` steps of size `dt`.
pub fn simulate_ensemble(system: &SystemSpec, initial_conditions: &[Vec<f64>], dt: f64, steps: usize) -> Result<OutputEnsemble> {
    let trajectories = initial_conditions
        .iter()
        .map(|x0| integrate_rk4(system, x0, dt, steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutputEnsemble { dt, initial_conditions: initial_conditions.to_vec(), trajectories })
}

fn check_lti(a: &[Vec<f64>], c: &[f64]) -> Result<usize> {
    let n = a.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("A is empty".into()));
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("A is not square: row of length {} in a {n}-row matrix", row.len())));
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!("c has length {}, A has order {n}", c.len())));
    }
    Ok(n)
}

/// Linear system `x' = A x`, `y = c^T x`. `a` is given row by row.
pub fn lti(a: &[Vec<f64>], c: &[f64]) -> Result<SystemSpec> {
    let n = check_lti(a, c)?;
    let a_flat: Vec<f64> = a.iter().flatten().copied().collect();
    let c = c.to_vec();
    Ok(SystemSpec::new(
        "lti",
        n,
        move |x, dx| {
            for (i, d) in dx.iter_mut().enumerate() {
                *d = a_flat[i * n..(i + 1) * n].iter().zip(x).map(|(a, x)| a * x).sum();
            }
        },
        move |x| c.iter().zip(x).map(|(c, x)| c * x).sum(),
    ))
}

/// Lorenz system with output `tanh((x1 x2 - 5 x3) / 10)`.
pub fn lorenz(alpha: f64, rho: f64, beta: f64) -> SystemSpec {
    SystemSpec::new(
        "lorenz",
        3,
        move |x, dx| {
            dx[0] = alpha * (x[1] - x[0]);
            dx[1] = x[0] * (rho - x[2]) - x[1];
            dx[2] = x[0] * x[1] - beta * x[2];
        },
        |x| ((x[0] * x[1] - 5.0 * x[2]) / 10.0).tanh(),
    )
}

/// The stable LTI example with eigenvalues `-1 ± 500i`.
pub fn reference_lti_matrix() -> Vec<Vec<f64>> {
    vec![vec![-1.0, 500.0], vec![-500.0, -1.0]]
}

/// Systems addressable by name from configuration files.
pub fn named_system(name: &str) -> Option<SystemSpec> {
    match name {
        "lti" => lti(&reference_lti_matrix(), &[1.0, 0.0]).ok(),
        "lorenz" => Some(lorenz(10.0, 28.0, 8.0 / 3.0)),
        "rotation" => lti(&[vec![0.0, 1.0], vec![-1.0, 0.0]], &[1.0, 0.0]).ok(),
        "van-der-pol" => Some(SystemSpec::new(
            "van-der-pol",
            2,
            |x, dx| {
                dx[0] = x[1];
                dx[1] = (1.0 - x[0] * x[0]) * x[1] - x[0];
            },
            |x| x[0],
        )),
        _ => None,
    }
}

/// Names accepted by [`named_system`].
pub const NAMED_SYSTEMS: [&str; 4] = ["lti", "lorenz", "rotation", "van-der-pol"];

/// Region from which initial conditions are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum IcRegion {
    /// Points on the circle of the given radius, uniform in angle (2-D only).
    Circle { radius: f64 },
    /// Independent uniform coordinates in `[lo, hi]` per axis.
    Box { bounds: Vec<(f64, f64)> },
}

/// Draws `count` initial conditions in R^`dimension` with a ChaCha20 generator
/// seeded by `seed` (`ChaCha20Rng::seed_from_u64`), so samples are
/// reproducible across platforms.
pub fn sample_initial_conditions(region: &IcRegion, dimension: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match region {
        IcRegion::Circle { radius } => {
            if dimension != 2 {
                return Err(Error::UnsupportedDimension(dimension));
            }
            if !(*radius > 0.0) {
                return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
            }
            Ok((0..count)
                .map(|_| {
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    vec![radius * theta.cos(), radius * theta.sin()]
                })
                .collect())
        }
        IcRegion::Box { bounds } => {
            if bounds.len() != dimension {
                return Err(Error::DimensionMismatch(format!("box has {} axes, system order is {dimension}", bounds.len())));
            }
            if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
                return Err(Error::InvalidArgument(format!("box bounds [{lo}, {hi}] are not ordered")));
            }
            Ok((0..count)
                .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
                .collect())
        }
    }
}

/// Pivots smaller than this fraction of the largest row norm of `sI - A`
/// are treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// `c^T (sI - A)^{-1} x` by Gaussian elimination with partial pivoting.
pub fn analytic_lti_resolvent(a: &[Vec<f64>], c: &[f64], s: Complex64, x: &[f64]) -> Result<Complex64> {
    let n = check_lti(a, c)?;
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!("x has length {}, A has order {n}", x.len())));
    }
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { s - a[i][j] } else { Complex64::from(-a[i][j]) }).collect())
        .collect();
    let mut rhs: Vec<Complex64> = x.iter().map(|&v| v.into()).collect();
    let scale = m.iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let singular = || Error::SingularResolvent { re: s.re, im: s.im };
    if scale == 0.0 {
        return Err(singular());
    }

    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .expect("nonempty pivot range");
        if m[piv][col].norm() <= SINGULAR_PIVOT_RATIO * scale {
            return Err(singular());
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
            let r = rhs[col];
            rhs[row] -= f * r;
        }
    }
    let mut sol = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let acc: Complex64 = (row + 1..n).map(|k| m[row][k] * sol[k]).sum();
        sol[row] = (rhs[row] - acc) / m[row][row];
    }
    Ok(c.iter().zip(&sol).map(|(c, v)| v * c).sum())
}
