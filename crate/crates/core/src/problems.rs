//! Built-in experiment catalog. All four problems use the reaction `f(u) = u^2`.

use std::fmt;
use std::sync::Arc;

use crate::discretization::{BoundaryKind, BoundarySpec, EdgeKinds};
use crate::error::{Error, Result};
use crate::grid::{Edge, GridFunction, GridLevel};
use crate::scalar::Real;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type FieldFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Pointwise reaction `f` with its derivative.
#[derive(Clone)]
pub struct Reaction<T> {
    pub f: ScalarFn<T>,
    pub fprime: ScalarFn<T>,
}

impl<T> fmt::Debug for Reaction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Reaction")
    }
}

impl<T: Real> Reaction<T> {
    pub fn new(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        fprime: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), fprime: Arc::new(fprime) }
    }

    /// `f(u) = u^2`, `f'(u) = 2u`.
    pub fn quadratic() -> Self {
        Self::new(|u| u * u, |u| u + u)
    }

    pub fn zero() -> Self {
        Self::new(|_| T::zero(), |_| T::zero())
    }

    #[inline]
    pub fn eval(&self, u: T) -> T {
        (self.f)(u)
    }

    #[inline]
    pub fn derivative(&self, u: T) -> T {
        (self.fprime)(u)
    }
}

/// Full instance of `u_t = Laplace(u) + f(u)` with boundary data and initial condition.
#[derive(Clone)]
pub struct ProblemDef<T> {
    pub name: String,
    pub reaction: Reaction<T>,
    pub initial: FieldFn<T>,
    pub boundary: BoundarySpec<T>,
    pub t_end: T,
}

impl<T> fmt::Debug for ProblemDef<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ProblemDef<T> {
    pub fn initial_field(&self, level: GridLevel) -> GridFunction<T> {
        GridFunction::from_fn(level, |x, y| (self.initial)(x, y))
    }

    /// Largest mismatch between `u0` and the Dirichlet data at `t = 0`.
    pub fn initial_dirichlet_mismatch(&self, level: GridLevel) -> T {
        let u0 = self.initial_field(level);
        let data = self.boundary.sample(level, T::zero());
        let kinds = self.boundary.kinds;
        let n = level.n();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                if let Some(b) = data.dirichlet_value(&kinds, i, j) {
                    worst = worst.max((u0.get(i, j) - b).abs());
                }
            }
        }
        worst
    }
}

pub const CATALOG: [&str; 4] = ["dirichlet-test1", "neumann-n1", "neumann-n2", "mixed"];

pub fn catalog<T: Real>(name: &str) -> Result<ProblemDef<T>> {
    let problem = match name {
        "dirichlet-test1" => dirichlet_test1(),
        "neumann-n1" => neumann_n1(),
        "neumann-n2" => neumann_n2(),
        "mixed" => mixed(),
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    let mismatch = problem.initial_dirichlet_mismatch(GridLevel::new(7)?);
    if mismatch > T::lit(1e-12) {
        eprintln!("warning: {name}: initial data differs from Dirichlet data by {mismatch:e}");
    }
    Ok(problem)
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `b = 1 + t / (1 + x^2 + y^2 + t^2)`, `u0 = 1 + sin^2(pi x) sin^2(pi y)`.
fn dirichlet_test1<T: Real>() -> ProblemDef<T> {
    let pi = T::PI();
    ProblemDef {
        name: "dirichlet-test1".into(),
        reaction: Reaction::quadratic(),
        initial: Arc::new(move |x: T, y: T| {
            let sx = (pi * x).sin();
            let sy = (pi * y).sin();
            T::one() + sx * sx * sy * sy
        }),
        boundary: BoundarySpec::new(EdgeKinds::dirichlet(), |_, t: T, x: T, y: T| {
            T::one() + t / (T::one() + x * x + y * y + t * t)
        }),
        t_end: lit(0.1),
    }
}

/// Outward flux `+1` on `x = 1`, `y = 1` and `-1` on `x = 0`, `y = 0`.
fn neumann_n1<T: Real>() -> ProblemDef<T> {
    let pi = T::PI();
    ProblemDef {
        name: "neumann-n1".into(),
        reaction: Reaction::quadratic(),
        initial: Arc::new(move |x: T, y: T| {
            let sx = (pi * x).sin();
            let sy = (pi * y).sin();
            x + y + sx * sx * sy * sy
        }),
        boundary: BoundarySpec::new(EdgeKinds::neumann(), |edge, _t, _x, _y| match edge {
            Edge::Right | Edge::Top => T::one(),
            Edge::Left | Edge::Bottom => -T::one(),
        }),
        t_end: lit(0.1),
    }
}

fn gaussian_wave_initial<T: Real>() -> FieldFn<T> {
    let two_pi = T::PI() + T::PI();
    Arc::new(move |x: T, y: T| {
        let d = y - lit(0.5);
        lit::<T>(3.0) + (lit::<T>(-5.0) * d * d).exp() * (two_pi * (x + y)).cos()
    })
}

/// Outward normal derivative of the Gaussian wave `3 + exp(-5(y-1/2)^2) cos(2 pi (x+y))`.
/// `(-1)^x` and `(-1)^y` give the outward sign on each pair of opposite edges.
fn gaussian_wave_flux<T: Real>(edge: Edge, x: T, y: T) -> T {
    let pi = T::PI();
    let two = lit::<T>(2.0);
    let theta = two * pi * (x + y);
    let d = y - lit(0.5);
    let g = (lit::<T>(-5.0) * d * d).exp();
    match edge {
        Edge::Left | Edge::Right => {
            let sign = if edge == Edge::Left { T::one() } else { -T::one() };
            sign * two * pi * g * theta.sin()
        }
        Edge::Bottom | Edge::Top => {
            let sign = if edge == Edge::Bottom { T::one() } else { -T::one() };
            sign * two * g * (lit::<T>(5.0) * d * theta.cos() + pi * theta.sin())
        }
    }
}

fn neumann_n2<T: Real>() -> ProblemDef<T> {
    ProblemDef {
        name: "neumann-n2".into(),
        reaction: Reaction::quadratic(),
        initial: gaussian_wave_initial(),
        boundary: BoundarySpec::new(EdgeKinds::neumann(), |edge, _t, x, y| gaussian_wave_flux(edge, x, y)),
        t_end: lit(0.1),
    }
}

/// Neumann on `x in {0, 1}`, Dirichlet `3 + exp(-5/4) cos(2 pi (x+y))` on `y in {0, 1}`.
fn mixed<T: Real>() -> ProblemDef<T> {
    let kinds = EdgeKinds::neumann_sides_dirichlet_ends();
    let two_pi = T::PI() + T::PI();
    ProblemDef {
        name: "mixed".into(),
        reaction: Reaction::quadratic(),
        initial: gaussian_wave_initial(),
        boundary: BoundarySpec::new(kinds, move |edge, _t, x, y| match kinds.get(edge) {
            BoundaryKind::Neumann => gaussian_wave_flux(edge, x, y),
            BoundaryKind::Dirichlet => lit::<T>(3.0) + lit::<T>(-1.25).exp() * (two_pi * (x + y)).cos(),
        }),
        t_end: lit(0.1),
    }
}
