//! Sub-flows of the splitting: the linear diffusion flow, the pointwise
//! reaction flow, and a coupled semilinear integrator used for references.

use crate::discretization::{BoundarySpec, DiscreteOperator};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::problems::Reaction;
use crate::scalar::Real;

/// Accuracy targets of the adaptive sub-flow integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowTolerance<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_substeps: usize,
    /// Magnitude past which the reaction flow reports `BlowUp`.
    pub blowup_bound: T,
}

impl<T: Real> Default for FlowTolerance<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            max_substeps: 200_000,
            blowup_bound: T::lit(1e12),
        }
    }
}

impl<T: Real> FlowTolerance<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        Self { rel_tol, abs_tol: rel_tol * T::lit(1e-2), ..Self::default() }
    }
}

/// L-stable, stiffly accurate five-stage SDIRK of order 4 with an embedded
/// order-3 solution.
pub mod sdirk4 {
    pub const GAMMA: f64 = 0.25;
    pub const STAGES: usize = 5;
    pub const C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
    pub const A: [[f64; 5]; 5] = [
        [0.25, 0.0, 0.0, 0.0, 0.0],
        [0.5, 0.25, 0.0, 0.0, 0.0],
        [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
        [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
        [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
    ];
    pub const B: [f64; 5] = A[4];
    pub const B_HAT: [f64; 5] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];
}

/// Dormand-Prince 5(4) tableau.
mod dopri {
    #[cfg_attr(not(test), allow(dead_code))]
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    pub const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    pub const B_HAT: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Step-size controller shared by both integrators.
fn next_step<T: Real>(h: T, err: T, order: f64, accepted: bool) -> T {
    let fac = if err == T::zero() {
        T::lit(FAC_MAX)
    } else {
        T::lit(SAFETY) * err.powf(T::lit(-1.0 / order))
    };
    let hi = if accepted { T::lit(FAC_MAX) } else { T::one() };
    h * fac.max(T::lit(FAC_MIN)).min(hi)
}

/// Adaptive SDIRK4 in the eigenbasis of `op`. `stage(z, t, hg)` must return the
/// solution `Y` of `Y = z + hg * F(t, Y)` (all in eigen coordinates).
fn sdirk_eigen<T, S>(
    op: &DiscreteOperator<T>,
    mut y: Vec<T>,
    t0: T,
    dt: T,
    scale: T,
    tol: &FlowTolerance<T>,
    mut stage: S,
) -> Result<Vec<T>>
where
    T: Real,
    S: FnMut(&[T], T, T) -> Result<Vec<T>>,
{
    if dt == T::zero() {
        return Ok(y);
    }
    let lam = op.eigenvalues();
    let n = y.len();
    let inv_sqrt_n = T::one() / T::from_usize_lossy(n).sqrt();
    let gamma = T::lit(sdirk4::GAMMA);
    let denom = tol.abs_tol + tol.rel_tol * scale;
    let mut t = T::zero();
    let mut h = dt * T::lit(1e-3);
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; sdirk4::STAGES];
    let mut z = vec![T::zero(); n];
    let mut steps = 0usize;
    let mut rejected_last = false;
    while t < dt {
        steps += 1;
        if steps > tol.max_substeps {
            return Err(Error::StepFailure(format!(
                "diffusion flow exceeded {} substeps at t = {:e}",
                tol.max_substeps,
                (t0 + t).to_f64_lossy()
            )));
        }
        let last = t + h >= dt * (T::one() - T::lit(1e-12));
        if last {
            h = dt - t;
        }
        let hg = h * gamma;
        let mut y_new = Vec::new();
        let mut failed = false;
        for i in 0..sdirk4::STAGES {
            z.copy_from_slice(&y);
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = h * T::lit(sdirk4::A[i][j]);
                for (zz, &kk) in z.iter_mut().zip(kj) {
                    *zz += a * kk;
                }
            }
            let yi = match stage(&z, t0 + t + h * T::lit(sdirk4::C[i]), hg) {
                Ok(v) => v,
                Err(Error::StepFailure(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            for ((kk, &yy), &zz) in k[i].iter_mut().zip(&yi).zip(&z) {
                *kk = (yy - zz) / hg;
            }
            if i + 1 == sdirk4::STAGES {
                y_new = yi;
            }
        }
        if failed {
            h *= T::lit(0.25);
            rejected_last = true;
            continue;
        }
        let mut err2 = T::zero();
        for m in 0..n {
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                e += T::lit(sdirk4::B[j] - sdirk4::B_HAT[j]) * kj[m];
            }
            let e = h * e / (T::one() - hg * lam[m]);
            err2 += e * e;
        }
        let err = err2.sqrt() * inv_sqrt_n / denom;
        if !err.is_finite() {
            h *= T::lit(0.25);
            rejected_last = true;
            continue;
        }
        if err <= T::one() {
            y = y_new;
            t = if last { dt } else { t + h };
            let h_next = next_step(h, err, 4.0, !rejected_last);
            rejected_last = false;
            h = h_next;
        } else {
            h = next_step(h, err, 4.0, false);
            rejected_last = true;
        }
        if h <= dt * T::epsilon() {
            return Err(Error::StepFailure(format!(
                "diffusion step size underflow at t = {:e}",
                (t0 + t).to_f64_lossy()
            )));
        }
    }
    Ok(y)
}

/// Solves `v' = A v + r(t) + q` on `[t0, t0 + dt]`, `r(t)` the forcing of the
/// boundary data at time `t` and `q` an optional frozen source on the unknowns.
/// Dirichlet nodes of the result carry `b(t0 + dt)`.
pub fn diffusion_flow<T: Real>(
    op: &DiscreteOperator<T>,
    spec: &BoundarySpec<T>,
    v0: &GridFunction<T>,
    t0: T,
    dt: T,
    q: Option<&GridFunction<T>>,
    tol: &FlowTolerance<T>,
) -> Result<GridFunction<T>> {
    let q_hat = q.map(|q| op.to_eigen(&op.gather(q)));
    diffusion_flow_eigen(op, spec, v0, t0, dt, q_hat.as_deref(), tol)
}

/// As [`diffusion_flow`] with the source already in eigen coordinates.
pub fn diffusion_flow_eigen<T: Real>(
    op: &DiscreteOperator<T>,
    spec: &BoundarySpec<T>,
    v0: &GridFunction<T>,
    t0: T,
    dt: T,
    q_hat: Option<&[T]>,
    tol: &FlowTolerance<T>,
) -> Result<GridFunction<T>> {
    let level = op.level();
    let lam = op.eigenvalues().to_vec();
    let y0 = op.to_eigen(&op.gather(v0));
    let scale = v0.max_abs();
    let y = sdirk_eigen(op, y0, t0, dt, scale, tol, |z, t, hg| {
        let mut g = op.forcing_eigen(&spec.sample(level, t));
        if let Some(q) = q_hat {
            for (gg, &qq) in g.iter_mut().zip(q) {
                *gg += qq;
            }
        }
        Ok(z.iter()
            .zip(&g)
            .zip(&lam)
            .map(|((&zz, &gg), &l)| (zz + hg * gg) / (T::one() - hg * l))
            .collect())
    })?;
    let data = spec.sample(level, t0 + dt);
    Ok(op.scatter(&op.from_eigen(&y), &data))
}

/// Integrates the scalar ODE `w' = f(w) - q` over `[0, dt]`.
fn reaction_scalar<T: Real>(w0: T, reaction: &Reaction<T>, q: T, dt: T, tol: &FlowTolerance<T>) -> Result<T> {
    let rhs = |w: T| reaction.eval(w) - q;
    let mut w = w0;
    let mut t = T::zero();
    let mut h = dt;
    let mut k = [T::zero(); 7];
    k[0] = rhs(w);
    let mut steps = 0usize;
    let mut rejected_last = false;
    while t < dt {
        steps += 1;
        if steps > tol.max_substeps {
            return Err(Error::StepFailure(format!(
                "reaction flow exceeded {} substeps from w0 = {:e}",
                tol.max_substeps,
                w0.to_f64_lossy()
            )));
        }
        let last = t + h >= dt * (T::one() - T::lit(1e-12));
        if last {
            h = dt - t;
        }
        for i in 1..7 {
            let mut s = w;
            for (j, kj) in k.iter().enumerate().take(i) {
                s += h * T::lit(dopri::A[i][j]) * *kj;
            }
            k[i] = rhs(s);
        }
        let mut w_new = w;
        let mut e = T::zero();
        for j in 0..7 {
            w_new += h * T::lit(dopri::B[j]) * k[j];
            e += h * T::lit(dopri::B[j] - dopri::B_HAT[j]) * k[j];
        }
        let err = e.abs() / (tol.abs_tol + tol.rel_tol * w.abs().max(w_new.abs()));
        if err.is_finite() && err <= T::one() {
            if w_new.abs() > tol.blowup_bound {
                return Err(Error::BlowUp { bound: tol.blowup_bound.to_f64_lossy(), time: (t + h).to_f64_lossy() });
            }
            w = w_new;
            t = if last { dt } else { t + h };
            k[0] = k[6];
            h = next_step(h, err, 5.0, !rejected_last);
            rejected_last = false;
        } else {
            if !w_new.is_finite() && w.abs() > tol.blowup_bound.sqrt() {
                return Err(Error::BlowUp { bound: tol.blowup_bound.to_f64_lossy(), time: t.to_f64_lossy() });
            }
            let err = if err.is_finite() { err } else { T::lit(1e6) };
            h = next_step(h, err, 5.0, false);
            rejected_last = true;
        }
        if h <= dt.max(t) * T::epsilon() {
            if w.abs() > tol.blowup_bound.sqrt() {
                return Err(Error::BlowUp { bound: tol.blowup_bound.to_f64_lossy(), time: t.to_f64_lossy() });
            }
            return Err(Error::StepFailure(format!("reaction step size underflow at t = {:e}", t.to_f64_lossy())));
        }
    }
    Ok(w)
}

/// Solves `w' = f(w) - q` independently at every node over a step of length `dt`.
pub fn reaction_flow<T: Real>(
    w0: &GridFunction<T>,
    reaction: &Reaction<T>,
    dt: T,
    q: Option<&GridFunction<T>>,
    tol: &FlowTolerance<T>,
) -> Result<GridFunction<T>> {
    if let Some(q) = q {
        assert_eq!(q.level(), w0.level(), "source on the wrong level");
    }
    let mut out = w0.clone();
    for (idx, w) in out.values_mut().iter_mut().enumerate() {
        let qk = q.map_or(T::zero(), |q| q.values()[idx]);
        *w = reaction_scalar(*w, reaction, qk, dt, tol)?;
    }
    Ok(out)
}

/// Integrates the unsplit semi-discrete problem `u' = A u + r(t) + f(u)` on
/// `[t0, t0 + dt]` with the same SDIRK scheme as the diffusion flow. Each stage
/// is solved by a simplified Newton iteration preconditioned with
/// `I - hg (A + c I)`, `c` the mean of `f'` at the step start.
pub fn semilinear_flow<T: Real>(
    op: &DiscreteOperator<T>,
    spec: &BoundarySpec<T>,
    reaction: &Reaction<T>,
    u0: &GridFunction<T>,
    t0: T,
    dt: T,
    tol: &FlowTolerance<T>,
) -> Result<GridFunction<T>> {
    let level = op.level();
    let lam = op.eigenvalues().to_vec();
    let phys0 = op.gather(u0);
    let c = phys0.iter().map(|&u| reaction.derivative(u)).sum::<T>() / T::from_usize_lossy(phys0.len());
    let y0 = op.to_eigen(&phys0);
    let scale = u0.max_abs();
    let newton_tol = (tol.abs_tol + tol.rel_tol * scale) * T::lit(1e-2);
    let n = phys0.len();
    let inv_sqrt_n = T::one() / T::from_usize_lossy(n).sqrt();
    let mut guess = phys0;
    let y = sdirk_eigen(op, y0, t0, dt, scale, tol, |z, t, hg| {
        let r = op.forcing_eigen(&spec.sample(level, t));
        let mut phys = guess.clone();
        let mut yh = op.to_eigen(&phys);
        for _ in 0..12 {
            let f: Vec<T> = phys.iter().map(|&u| reaction.eval(u) - c * u).collect();
            let fh = op.to_eigen(&f);
            let mut delta = T::zero();
            for m in 0..n {
                let next = (z[m] + hg * (r[m] + fh[m])) / (T::one() - hg * (lam[m] + c));
                let d = next - yh[m];
                delta += d * d;
                yh[m] = next;
            }
            phys = op.from_eigen(&yh);
            if !delta.is_finite() {
                break;
            }
            if delta.sqrt() * inv_sqrt_n <= newton_tol {
                guess = phys;
                return Ok(yh);
            }
        }
        Err(Error::StepFailure("stage iteration did not converge".into()))
    })?;
    let data = spec.sample(level, t0 + dt);
    Ok(op.scatter(&op.from_eigen(&y), &data))
}
