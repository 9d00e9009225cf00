//! Correction functions `q_n` whose boundary trace or flux matches that of the
//! nonlinearity, and the moving-average amplification factor.

use std::fmt;

use crate::discretization::{compat_constant, BoundaryData, BoundaryKind, BoundarySpec, DiscreteOperator, EdgeKinds};
use crate::error::{Error, Result};
use crate::grid::{prolong, GridFunction, GridLevel};
use crate::problems::Reaction;
use crate::scalar::Real;

pub const DEFAULT_OMEGA: f64 = 2.0 / 3.0;
pub const DEFAULT_NU: usize = 3;
/// Level of the coarsest grid used by default in the half V-cycle (9 x 9 nodes).
pub const DEFAULT_COARSEST_LEVEL: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother<T> {
    Jacobi { omega: T },
    GaussSeidel,
}

impl<T: Real> Smoother<T> {
    pub fn jacobi() -> Self {
        Smoother::Jacobi { omega: T::lit(DEFAULT_OMEGA) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Smoother::Jacobi { .. } => "jacobi",
            Smoother::GaussSeidel => "gauss-seidel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionStrategy<T> {
    ExactElliptic,
    DirectF,
    /// Multilevel moving average; Dirichlet boundaries only.
    GridAverage,
    /// Coarse direct solve followed by prolongation and `nu` smoothing sweeps
    /// per level. The coarsest mesh width is `2^s h`; `None` picks the 9 x 9 grid.
    HalfVCycle { smoother: Smoother<T>, nu: usize, coarsest_s: Option<u32> },
    /// Always the zero field.
    Zero,
}

impl<T: Real> CorrectionStrategy<T> {
    pub fn half_vcycle(smoother: Smoother<T>, nu: usize) -> Self {
        CorrectionStrategy::HalfVCycle { smoother, nu, coarsest_s: None }
    }

    pub fn label(&self) -> String {
        match self {
            CorrectionStrategy::ExactElliptic => "exact-elliptic".into(),
            CorrectionStrategy::DirectF => "direct-f".into(),
            CorrectionStrategy::GridAverage => "grid-average".into(),
            CorrectionStrategy::HalfVCycle { smoother, nu, coarsest_s } => {
                let mut s = format!("half-vcycle-{}-nu{}", smoother.name(), nu);
                if let Some(c) = coarsest_s {
                    s.push_str(&format!("-s{c}"));
                }
                s
            }
            CorrectionStrategy::Zero => "zero".into(),
        }
    }

    /// Resolved `s` for a grid of the given level.
    pub fn coarsest_s(&self, level: GridLevel) -> Option<u32> {
        match self {
            CorrectionStrategy::HalfVCycle { coarsest_s, .. } => {
                Some(coarsest_s.unwrap_or_else(|| level.level().saturating_sub(DEFAULT_COARSEST_LEVEL).max(1)))
            }
            _ => None,
        }
    }

    pub fn validate(&self, level: GridLevel, kinds: EdgeKinds) -> Result<()> {
        match self {
            CorrectionStrategy::GridAverage if !kinds.all_dirichlet() => Err(Error::InvalidStrategy(
                "grid-average needs Dirichlet data on every edge; the moving average alters the boundary slope".into(),
            )),
            CorrectionStrategy::HalfVCycle { smoother, nu, .. } => {
                if *nu == 0 {
                    return Err(Error::InvalidStrategy("half-vcycle needs nu >= 1".into()));
                }
                if let Smoother::Jacobi { omega } = smoother {
                    if !(*omega > T::zero() && *omega <= T::one()) {
                        return Err(Error::InvalidStrategy(format!("jacobi weight {omega} outside (0, 1]")));
                    }
                }
                let s = self.coarsest_s(level).unwrap_or(1);
                if s == 0 || s >= level.level() {
                    return Err(Error::InvalidStrategy(format!(
                        "half-vcycle needs 1 <= s < level (s = {s}, level = {})",
                        level.level()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl<T: Real> fmt::Display for CorrectionStrategy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Boundary data of the correction problem at time `t` for state `u`:
/// `f(b)` on Dirichlet edges and `f'(u) b` on Neumann edges.
pub fn correction_data<T: Real>(
    spec: &BoundarySpec<T>,
    reaction: &Reaction<T>,
    u: &GridFunction<T>,
    t: T,
) -> BoundaryData<T> {
    let level = u.level();
    BoundaryData::from_node_fn(level, |edge, i, j| {
        let b = spec.eval(edge, t, level.coord(i), level.coord(j));
        match spec.kinds.get(edge) {
            BoundaryKind::Dirichlet => reaction.eval(b),
            BoundaryKind::Neumann => reaction.derivative(u.get(i, j)) * b,
        }
    })
}

/// Harmonic `q` with `q = f(b)` on the boundary.
pub fn correct_dirichlet_elliptic<T: Real>(op: &DiscreteOperator<T>, fb: &BoundaryData<T>) -> Result<GridFunction<T>> {
    if !op.kinds().all_dirichlet() {
        return Err(Error::InvalidStrategy("Dirichlet elliptic correction on a non-Dirichlet operator".into()));
    }
    op.solve_poisson(&vec![T::zero(); op.unknown_count()], fb)
}

/// Zero-mean `q` with `Laplace(q) = g` and normal derivative `flux`.
pub fn correct_neumann_elliptic<T: Real>(
    op: &DiscreteOperator<T>,
    flux: &BoundaryData<T>,
    g: T,
) -> Result<GridFunction<T>> {
    if !op.kinds().all_neumann() {
        return Err(Error::InvalidStrategy("Neumann elliptic correction on a non-Neumann operator".into()));
    }
    op.solve_poisson(&vec![g; op.unknown_count()], flux)
}

/// Elliptic correction for any edge kinds: Dirichlet edges carry `f(b)`,
/// Neumann edges `f'(u) b`; the source is the compatibility constant when no
/// Dirichlet edge is present and zero otherwise.
pub fn correct_elliptic<T: Real>(op: &DiscreteOperator<T>, data: &BoundaryData<T>) -> Result<GridFunction<T>> {
    if op.kinds().all_neumann() {
        correct_neumann_elliptic(op, data, compat_constant(data))
    } else {
        op.solve_poisson(&vec![T::zero(); op.unknown_count()], data)
    }
}

pub fn correct_direct<T: Real>(u: &GridFunction<T>, reaction: &Reaction<T>) -> GridFunction<T> {
    u.map(|v| reaction.eval(v))
}

/// Multilevel moving average of Dirichlet values `fb` (all edges Dirichlet).
pub fn correct_grid_average<T: Real>(fb: &BoundaryData<T>) -> Result<GridFunction<T>> {
    let kinds = EdgeKinds::dirichlet();
    let finest = fb.level();
    let fill_boundary = |q: &mut GridFunction<T>, data: &BoundaryData<T>| {
        let n = data.level().n();
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = data.dirichlet_value(&kinds, i, j) {
                    q.set(i, j, v);
                }
            }
        }
    };
    let seed = GridLevel::new(0)?;
    let mut coarse = GridFunction::zeros(seed);
    fill_boundary(&mut coarse, &fb.restrict_to(seed)?);

    let quarter = T::lit(0.25);
    let half = T::lit(0.5);
    let fifth = T::lit(0.2);
    for k in 1..=finest.level() {
        let level = GridLevel::new(k)?;
        let n_half = level.m() / 2;
        let mut q = GridFunction::zeros(level);
        for r in 1..n_half {
            for s in 1..n_half {
                q.set(2 * r, 2 * s, coarse.get(r, s));
            }
        }
        for r in 0..n_half {
            for s in 0..n_half {
                let avg = quarter
                    * (coarse.get(r, s) + coarse.get(r + 1, s) + coarse.get(r, s + 1) + coarse.get(r + 1, s + 1));
                q.set(2 * r + 1, 2 * s + 1, avg);
            }
        }
        fill_boundary(&mut q, &fb.restrict_to(level)?);
        for r in 0..n_half {
            for s in 1..n_half {
                let v = half * (q.get(2 * r + 1, 2 * s - 1) + q.get(2 * r + 1, 2 * s + 1));
                q.set(2 * r + 1, 2 * s, v);
                let w = half * (q.get(2 * s - 1, 2 * r + 1) + q.get(2 * s + 1, 2 * r + 1));
                q.set(2 * s, 2 * r + 1, w);
            }
        }
        coarse = smooth_five_point(&q, fifth);
    }
    Ok(coarse)
}

/// One simultaneous five-point moving-average sweep over the interior.
fn smooth_five_point<T: Real>(q: &GridFunction<T>, fifth: T) -> GridFunction<T> {
    let m = q.level().m();
    let mut out = q.clone();
    for i in 1..m {
        for j in 1..m {
            let v = q.get(i, j) + q.get(i - 1, j) + q.get(i + 1, j) + q.get(i, j - 1) + q.get(i, j + 1);
            out.set(i, j, fifth * v);
        }
    }
    out
}

/// `x + omega D^-1 (b - A x)` for diagonal `d`, given `ax = A x`.
pub fn weighted_jacobi_update<T: Real>(x: &[T], ax: &[T], b: &[T], d: &[T], omega: T) -> Vec<T> {
    x.iter()
        .zip(ax)
        .zip(b)
        .zip(d)
        .map(|(((&xi, &axi), &bi), &di)| xi + omega * (bi - axi) / di)
        .collect()
}

fn smooth<T: Real>(op: &DiscreteOperator<T>, smoother: Smoother<T>, x: &mut Vec<T>, b: &[T], sweeps: usize) {
    let diag = op.diagonal();
    let h = op.level().h::<T>();
    let h2 = h * h;
    let minus_four = -T::lit(4.0);
    match smoother {
        Smoother::Jacobi { omega } => {
            let d = vec![diag; x.len()];
            for _ in 0..sweeps {
                let ax = op.matvec(x);
                *x = weighted_jacobi_update(x, &ax, b, &d, omega);
            }
        }
        Smoother::GaussSeidel => {
            for _ in 0..sweeps {
                for k in 0..x.len() {
                    let off = op.neighbor_sum(x, k);
                    x[k] = (b[k] * h2 - off) / minus_four;
                }
            }
        }
    }
}

/// Operators for every level a strategy may touch, assembled once.
#[derive(Debug, Clone)]
pub struct OperatorLadder<T> {
    ops: Vec<Option<DiscreteOperator<T>>>,
}

impl<T: Real> OperatorLadder<T> {
    pub fn new(finest: GridLevel, kinds: EdgeKinds, coarsest: u32) -> Result<Self> {
        let mut ops = Vec::new();
        for k in 0..=finest.level() {
            ops.push(if k >= coarsest.max(1) {
                Some(DiscreteOperator::assemble(GridLevel::new(k)?, kinds)?)
            } else {
                None
            });
        }
        Ok(Self { ops })
    }

    pub fn get(&self, level: u32) -> Result<&DiscreteOperator<T>> {
        self.ops
            .get(level as usize)
            .and_then(|o| o.as_ref())
            .ok_or_else(|| Error::InvalidGrid(format!("no operator assembled for level {level}")))
    }

    pub fn finest(&self) -> &DiscreteOperator<T> {
        self.ops.last().and_then(|o| o.as_ref()).expect("finest operator")
    }
}

/// Half V-cycle for the correction problem with finest-level data `data`.
/// Every level restricts the data by injection; pure-Neumann problems use that
/// level's own compatibility constant and the result is shifted to zero mean.
pub fn correct_half_vcycle<T: Real>(
    ladder: &OperatorLadder<T>,
    data: &BoundaryData<T>,
    smoother: Smoother<T>,
    nu: usize,
    s: u32,
) -> Result<GridFunction<T>> {
    let finest = ladder.finest();
    let ell = finest.level().level();
    if s == 0 || s >= ell {
        return Err(Error::InvalidStrategy(format!("half-vcycle needs 1 <= s < level (s = {s}, level = {ell})")));
    }
    let kinds = finest.kinds();
    let source = |op: &DiscreteOperator<T>, d: &BoundaryData<T>| -> Vec<T> {
        let g = if kinds.all_neumann() { compat_constant(d) } else { T::zero() };
        vec![g; op.unknown_count()]
    };

    let coarsest = ell - s;
    let op = ladder.get(coarsest)?;
    let d = data.restrict_to(op.level())?;
    let mut q = op.solve_poisson_projected(&source(op, &d), &d)?;
    for k in coarsest + 1..=ell {
        let op = ladder.get(k)?;
        let d = data.restrict_to(op.level())?;
        let fine = prolong(&q)?;
        let forcing = op.forcing(&d);
        let b: Vec<T> = source(op, &d).iter().zip(&forcing).map(|(&g, &r)| g - r).collect();
        let mut x = op.gather(&fine);
        smooth(op, smoother, &mut x, &b, nu);
        q = op.scatter(&x, &d);
    }
    if finest.is_singular() {
        let mean = q.trapezoid_mean();
        q = q.map(|v| v - mean);
    }
    Ok(q)
}

/// `rho(m, n) = |1 + 2 cos(2 pi m/(M+1)) + 2 cos(2 pi n/(M+1))| / 5`.
pub fn amplification_factor<T: Real>(m: usize, n: usize, big_m: usize) -> T {
    let d = T::from_usize_lossy(big_m + 1);
    amplification_at_ratio(T::from_usize_lossy(m) / d, T::from_usize_lossy(n) / d)
}

/// Amplification factor as a function of the frequency ratios `m/(M+1)` and `n/(M+1)`.
pub fn amplification_at_ratio<T: Real>(rm: T, rn: T) -> T {
    let two = T::lit(2.0);
    let tau = two * T::PI();
    (T::one() + two * (tau * rm).cos() + two * (tau * rn).cos()).abs() / T::lit(5.0)
}

/// Builds `q_n` for one configured strategy, caching the operators it needs.
#[derive(Debug, Clone)]
pub struct CorrectionBuilder<T> {
    strategy: CorrectionStrategy<T>,
    level: GridLevel,
    ladder: Option<OperatorLadder<T>>,
}

impl<T: Real> CorrectionBuilder<T> {
    pub fn new(strategy: CorrectionStrategy<T>, level: GridLevel, kinds: EdgeKinds) -> Result<Self> {
        strategy.validate(level, kinds)?;
        let ladder = match strategy {
            CorrectionStrategy::ExactElliptic => Some(OperatorLadder::new(level, kinds, level.level())?),
            CorrectionStrategy::HalfVCycle { .. } => {
                let s = strategy.coarsest_s(level).expect("half-vcycle has s");
                Some(OperatorLadder::new(level, kinds, level.level() - s)?)
            }
            _ => None,
        };
        Ok(Self { strategy, level, ladder })
    }

    pub fn strategy(&self) -> &CorrectionStrategy<T> {
        &self.strategy
    }

    pub fn build(
        &self,
        spec: &BoundarySpec<T>,
        reaction: &Reaction<T>,
        u: &GridFunction<T>,
        t: T,
    ) -> Result<GridFunction<T>> {
        if u.level() != self.level {
            return Err(Error::InvalidGrid("state and correction builder on different levels".into()));
        }
        let ladder = || self.ladder.as_ref().expect("ladder assembled for this strategy");
        match self.strategy {
            CorrectionStrategy::ExactElliptic => correct_elliptic(ladder().finest(), &correction_data(spec, reaction, u, t)),
            CorrectionStrategy::DirectF => Ok(correct_direct(u, reaction)),
            CorrectionStrategy::GridAverage => correct_grid_average(&correction_data(spec, reaction, u, t)),
            CorrectionStrategy::HalfVCycle { smoother, nu, .. } => {
                let s = self.strategy.coarsest_s(self.level).expect("half-vcycle has s");
                correct_half_vcycle(ladder(), &correction_data(spec, reaction, u, t), smoother, nu, s)
            }
            CorrectionStrategy::Zero => Ok(GridFunction::zeros(self.level)),
        }
    }
}

/// Largest deviation between the one-sided second-order normal derivative of
/// `q` and the prescribed outward `flux`, over the Neumann-edge nodes that are
/// unknowns (corners owned by a Dirichlet edge carry no flux condition).
pub fn flux_defect<T: Real>(q: &GridFunction<T>, kinds: EdgeKinds, flux: &BoundaryData<T>) -> T {
    use crate::grid::Edge;
    let level = q.level();
    let m = level.m();
    let h = level.h::<T>();
    let (three, four, two) = (T::lit(3.0), T::lit(4.0), T::lit(2.0));
    let mut worst = T::zero();
    for edge in Edge::ALL {
        if kinds.get(edge) != BoundaryKind::Neumann {
            continue;
        }
        for k in 0..=m {
            let (i, j) = edge.node(level, k);
            if kinds.dirichlet_owner(level, i, j).is_some() {
                continue;
            }
            let at = |d: usize| match edge {
                Edge::Left => q.get(d, j),
                Edge::Right => q.get(m - d, j),
                Edge::Bottom => q.get(i, d),
                Edge::Top => q.get(i, m - d),
            };
            let dn = (three * at(0) - four * at(1) + at(2)) / (two * h);
            worst = worst.max((dn - flux.get(edge, k)).abs());
        }
    }
    worst
}
