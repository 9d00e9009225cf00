//! Five-point finite-difference Laplacian on the unit square with Dirichlet,
//! Neumann or mixed boundary conditions.
//!
//! Unknowns are the interior nodes plus the nodes of every Neumann edge; the
//! Neumann condition enters through a ghost node, `(v_ghost - v_inner) / 2h`
//! equal to the outward normal derivative. A node that lies on any Dirichlet
//! edge is a Dirichlet node, so the unknown set is always a tensor product of
//! one index range per axis and the operator splits as
//! `A = (T_x (x) I + I (x) T_y) / h^2`.
//!
//! That structure is what the solver exploits: each 1D second-difference
//! matrix is symmetrised by the trapezoidal weights, diagonalised once, and
//! every solve with `alpha I - beta A` becomes two dense transforms and a
//! pointwise division.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Edge, GridFunction, GridLevel};
use crate::linalg::{matmul, symmetric_tridiagonal_eigen, Mat};
use crate::scalar::Real;

/// Relative compatibility residual above which a pure-Neumann solve is rejected.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Boundary kind of each edge, in `Edge::slot` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeKinds(pub [BoundaryKind; 4]);

impl EdgeKinds {
    pub fn uniform(kind: BoundaryKind) -> Self {
        Self([kind; 4])
    }

    pub fn dirichlet() -> Self {
        Self::uniform(BoundaryKind::Dirichlet)
    }

    pub fn neumann() -> Self {
        Self::uniform(BoundaryKind::Neumann)
    }

    /// Neumann on `x in {0, 1}`, Dirichlet on `y in {0, 1}`.
    pub fn neumann_sides_dirichlet_ends() -> Self {
        use BoundaryKind::*;
        Self([Neumann, Neumann, Dirichlet, Dirichlet])
    }

    #[inline]
    pub fn get(&self, edge: Edge) -> BoundaryKind {
        self.0[edge.slot()]
    }

    pub fn all_dirichlet(&self) -> bool {
        self.0.iter().all(|&k| k == BoundaryKind::Dirichlet)
    }

    pub fn all_neumann(&self) -> bool {
        self.0.iter().all(|&k| k == BoundaryKind::Neumann)
    }

    pub fn any_dirichlet(&self) -> bool {
        self.0.iter().any(|&k| k == BoundaryKind::Dirichlet)
    }

    pub fn any_neumann(&self) -> bool {
        self.0.iter().any(|&k| k == BoundaryKind::Neumann)
    }

    /// Dirichlet edge whose data defines node `(i, j)`, if any. Corners take
    /// the bottom/top edge when it is Dirichlet.
    pub fn dirichlet_owner(&self, level: GridLevel, i: usize, j: usize) -> Option<(Edge, usize)> {
        let m = level.m();
        let is_d = |e: Edge| self.get(e) == BoundaryKind::Dirichlet;
        if j == 0 && is_d(Edge::Bottom) {
            return Some((Edge::Bottom, i));
        }
        if j == m && is_d(Edge::Top) {
            return Some((Edge::Top, i));
        }
        if i == 0 && is_d(Edge::Left) {
            return Some((Edge::Left, j));
        }
        if i == m && is_d(Edge::Right) {
            return Some((Edge::Right, j));
        }
        None
    }
}

/// Boundary data `b(edge, t, x, y)`; the edge argument disambiguates corners.
pub type BoundaryFn<T> = Arc<dyn Fn(Edge, T, T, T) -> T + Send + Sync>;

/// Boundary kinds together with time-dependent data. For Neumann edges the
/// data is the outward normal derivative.
#[derive(Clone)]
pub struct BoundarySpec<T> {
    pub kinds: EdgeKinds,
    pub data: BoundaryFn<T>,
}

impl<T> fmt::Debug for BoundarySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundarySpec").field("kinds", &self.kinds).finish_non_exhaustive()
    }
}

impl<T: Real> BoundarySpec<T> {
    pub fn new(kinds: EdgeKinds, data: impl Fn(Edge, T, T, T) -> T + Send + Sync + 'static) -> Self {
        Self { kinds, data: Arc::new(data) }
    }

    #[inline]
    pub fn eval(&self, edge: Edge, t: T, x: T, y: T) -> T {
        (self.data)(edge, t, x, y)
    }

    /// Samples the data at every node of every edge at time `t`.
    pub fn sample(&self, level: GridLevel, t: T) -> BoundaryData<T> {
        BoundaryData::from_fn(level, |edge, x, y| self.eval(edge, t, x, y))
    }
}

/// Per-edge nodal values, `M + 1` per edge including both corners.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData<T> {
    level: GridLevel,
    edges: [Vec<T>; 4],
}

impl<T: Real> BoundaryData<T> {
    pub fn from_fn(level: GridLevel, f: impl Fn(Edge, T, T) -> T) -> Self {
        Self::from_node_fn(level, |edge, i, j| f(edge, level.coord(i), level.coord(j)))
    }

    pub fn from_node_fn(level: GridLevel, f: impl Fn(Edge, usize, usize) -> T) -> Self {
        let edges = Edge::ALL.map(|edge| {
            (0..level.n())
                .map(|k| {
                    let (i, j) = edge.node(level, k);
                    f(edge, i, j)
                })
                .collect()
        });
        Self { level, edges }
    }

    pub fn constant(level: GridLevel, c: T) -> Self {
        Self::from_node_fn(level, |_, _, _| c)
    }

    /// Trace of a grid function on every edge.
    pub fn trace_of(g: &GridFunction<T>) -> Self {
        Self::from_node_fn(g.level(), |_, i, j| g.get(i, j))
    }

    #[inline]
    pub fn level(&self) -> GridLevel {
        self.level
    }

    #[inline]
    pub fn get(&self, edge: Edge, k: usize) -> T {
        self.edges[edge.slot()][k]
    }

    pub fn edge(&self, edge: Edge) -> &[T] {
        &self.edges[edge.slot()]
    }

    pub fn map(&self, f: impl Fn(Edge, usize, usize, T) -> T) -> Self {
        Self::from_node_fn(self.level, |edge, i, j| {
            let k = if edge.is_horizontal() { i } else { j };
            f(edge, i, j, self.get(edge, k))
        })
    }

    /// Injection onto the next coarser level.
    pub fn restrict(&self) -> Result<Self> {
        let coarse = self
            .level
            .coarser()
            .ok_or_else(|| Error::InvalidGrid("cannot restrict boundary data below level 0".into()))?;
        Ok(Self { level: coarse, edges: self.edges.clone().map(|v| v.into_iter().step_by(2).collect()) })
    }

    /// Injection onto an arbitrary coarser level.
    pub fn restrict_to(&self, level: GridLevel) -> Result<Self> {
        let mut out = self.clone();
        while out.level.level() > level.level() {
            out = out.restrict()?;
        }
        if out.level != level {
            return Err(Error::InvalidGrid(format!(
                "cannot restrict level {} data to finer level {}",
                self.level.level(),
                level.level()
            )));
        }
        Ok(out)
    }

    /// Value that a Dirichlet node takes under `kinds`.
    pub fn dirichlet_value(&self, kinds: &EdgeKinds, i: usize, j: usize) -> Option<T> {
        kinds.dirichlet_owner(self.level, i, j).map(|(edge, k)| self.get(edge, k))
    }
}

/// Composite trapezoidal approximation of `(1/|Omega|) * closed integral of flux ds`.
///
/// This is exactly the source constant that makes the ghost-node Neumann
/// system solvable.
pub fn compat_constant<T: Real>(flux: &BoundaryData<T>) -> T {
    let level = flux.level();
    let m = level.m();
    let half = T::lit(0.5);
    let mut total = T::zero();
    for edge in Edge::ALL {
        let vals = flux.edge(edge);
        let mut s = half * (vals[0] + vals[m]);
        for &v in &vals[1..m] {
            s += v;
        }
        total += s;
    }
    total * level.h::<T>()
}

/// Neumann flux data `f'(u) * b(t)` of the nonlinearity at the boundary nodes.
pub fn nonlinear_flux<T: Real>(
    spec: &BoundarySpec<T>,
    u: &GridFunction<T>,
    fprime: impl Fn(T) -> T,
    t: T,
) -> BoundaryData<T> {
    let level = u.level();
    BoundaryData::from_node_fn(level, |edge, i, j| {
        fprime(u.get(i, j)) * spec.eval(edge, t, level.coord(i), level.coord(j))
    })
}

/// Index range of the unknowns along one axis, with the kinds at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct AxisLayout {
    lo: usize,
    hi: usize,
    lo_kind: BoundaryKind,
    hi_kind: BoundaryKind,
}

impl AxisLayout {
    fn new(m: usize, lo_kind: BoundaryKind, hi_kind: BoundaryKind) -> Self {
        let lo = if lo_kind == BoundaryKind::Neumann { 0 } else { 1 };
        let hi = if hi_kind == BoundaryKind::Neumann { m } else { m - 1 };
        Self { lo, hi, lo_kind, hi_kind }
    }

    #[inline]
    fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    fn is_singular(&self) -> bool {
        self.lo_kind == BoundaryKind::Neumann && self.hi_kind == BoundaryKind::Neumann
    }
}

/// Diagonalisation of one axis' second-difference matrix, `T = V diag(lambda) V^-1`.
#[derive(Debug, Clone)]
struct AxisBasis<T> {
    eigenvalues: Vec<T>,
    v: Mat<T>,
    v_inv: Mat<T>,
    v_t: Mat<T>,
    v_inv_t: Mat<T>,
    /// Index of the exact zero eigenvalue (constant mode) for Neumann-Neumann axes.
    zero_mode: Option<usize>,
    /// `max_i 1/sqrt(d_i)` of the symmetrising weights.
    weight_bound: T,
}

impl<T: Real> AxisBasis<T> {
    fn new(layout: &AxisLayout) -> Result<Self> {
        let n = layout.len();
        let half = T::lit(0.5);
        let mut weights = vec![T::one(); n];
        if layout.lo_kind == BoundaryKind::Neumann {
            weights[0] = half;
        }
        if layout.hi_kind == BoundaryKind::Neumann {
            weights[n - 1] = half;
        }
        // D^{1/2} T D^{-1/2}: the ghost rows (2 on the off-diagonal) become sqrt(2).
        let diag = vec![T::lit(-2.0); n];
        let mut off = vec![T::one(); n.saturating_sub(1)];
        let root2 = T::lit(2.0).sqrt();
        if n >= 2 {
            if layout.lo_kind == BoundaryKind::Neumann {
                off[0] = root2;
            }
            if layout.hi_kind == BoundaryKind::Neumann {
                off[n - 2] = root2;
            }
        }
        let (mut eigenvalues, q) = symmetric_tridiagonal_eigen(&diag, &off)?;

        let zero_mode = if layout.is_singular() {
            let (k, _) = eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .expect("nonempty spectrum");
            eigenvalues[k] = T::zero();
            Some(k)
        } else {
            None
        };

        let mut v = Mat::zeros(n, n);
        let mut v_inv = Mat::zeros(n, n);
        for r in 0..n {
            let sd = weights[r].sqrt();
            for c in 0..n {
                v.set(r, c, q.get(r, c) / sd);
                v_inv.set(c, r, q.get(r, c) * sd);
            }
        }
        let weight_bound = weights.iter().fold(T::zero(), |acc, w| acc.max(T::one() / w.sqrt()));
        Ok(Self {
            eigenvalues,
            v_t: v.transpose(),
            v_inv_t: v_inv.transpose(),
            v,
            v_inv,
            zero_mode,
            weight_bound,
        })
    }
}

/// Boundary forcing of `A v + r` split by the side it enters from.
struct ForcingParts<T> {
    /// Added to the first unknown row along x (length `ny`).
    x_lo: Vec<T>,
    x_hi: Vec<T>,
    /// Added to the first unknown column along y (length `nx`).
    y_lo: Vec<T>,
    y_hi: Vec<T>,
}

/// Assembled five-point operator with its cached tensor diagonalisation.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    level: GridLevel,
    kinds: EdgeKinds,
    x: AxisLayout,
    y: AxisLayout,
    bx: AxisBasis<T>,
    by: AxisBasis<T>,
    inv_h2: T,
    /// 2D eigenvalues of `A`, laid out like the unknowns.
    eigenvalues: Vec<T>,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn assemble(level: GridLevel, kinds: EdgeKinds) -> Result<Self> {
        if level.level() < 1 {
            return Err(Error::InvalidGrid("the discrete Laplacian needs level >= 1".into()));
        }
        let m = level.m();
        let x = AxisLayout::new(m, kinds.get(Edge::Left), kinds.get(Edge::Right));
        let y = AxisLayout::new(m, kinds.get(Edge::Bottom), kinds.get(Edge::Top));
        if x.len() == 0 || y.len() == 0 {
            return Err(Error::InvalidGrid("empty unknown set".into()));
        }
        let bx = AxisBasis::new(&x)?;
        let by = AxisBasis::new(&y)?;
        let h = level.h::<T>();
        let inv_h2 = T::one() / (h * h);
        let mut eigenvalues = Vec::with_capacity(x.len() * y.len());
        for a in 0..x.len() {
            for b in 0..y.len() {
                eigenvalues.push((bx.eigenvalues[a] + by.eigenvalues[b]) * inv_h2);
            }
        }
        Ok(Self { level, kinds, x, y, bx, by, inv_h2, eigenvalues })
    }

    #[inline]
    pub fn level(&self) -> GridLevel {
        self.level
    }

    #[inline]
    pub fn kinds(&self) -> EdgeKinds {
        self.kinds
    }

    /// Unknown count along x and y.
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    #[inline]
    pub fn unknown_count(&self) -> usize {
        self.x.len() * self.y.len()
    }

    /// Pure Neumann: constants are in the nullspace.
    pub fn is_singular(&self) -> bool {
        self.x.is_singular() && self.y.is_singular()
    }

    #[inline]
    pub fn is_unknown(&self, i: usize, j: usize) -> bool {
        (self.x.lo..=self.x.hi).contains(&i) && (self.y.lo..=self.y.hi).contains(&j)
    }

    #[inline]
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        (i - self.x.lo) * self.y.len() + (j - self.y.lo)
    }

    /// Unknown nodes in solver (row-major) order.
    pub fn unknown_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.x.lo..=self.x.hi).flat_map(move |i| (self.y.lo..=self.y.hi).map(move |j| (i, j)))
    }

    /// Eigenvalues of `A` in the unknown layout; the pure-Neumann constant mode is exactly 0.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Index of the constant mode in the eigen layout (pure Neumann only).
    pub fn zero_mode(&self) -> Option<usize> {
        match (self.bx.zero_mode, self.by.zero_mode) {
            (Some(a), Some(b)) => Some(a * self.y.len() + b),
            _ => None,
        }
    }

    /// Bound `C` with `max|x| <= C * ||x_hat||_2` for `x_hat = to_eigen(x)`.
    pub fn eigen_to_max_bound(&self) -> T {
        self.bx.weight_bound * self.by.weight_bound
    }

    /// Trapezoidal weights of the unknowns (the left null vector in the singular case).
    pub fn unknown_weights(&self) -> Vec<T> {
        self.unknown_nodes()
            .map(|(i, j)| GridFunction::<T>::trapezoid_weight(self.level, i, j))
            .collect()
    }

    pub fn gather(&self, g: &GridFunction<T>) -> Vec<T> {
        assert_eq!(g.level(), self.level, "grid function on the wrong level");
        self.unknown_nodes().map(|(i, j)| g.get(i, j)).collect()
    }

    /// Grid function with the given unknowns and Dirichlet nodes taken from `data`.
    pub fn scatter(&self, unknowns: &[T], data: &BoundaryData<T>) -> GridFunction<T> {
        let mut g = GridFunction::zeros(self.level);
        self.scatter_into(unknowns, data, &mut g);
        g
    }

    pub fn scatter_into(&self, unknowns: &[T], data: &BoundaryData<T>, g: &mut GridFunction<T>) {
        debug_assert_eq!(unknowns.len(), self.unknown_count());
        let n = self.level.n();
        for i in 0..n {
            for j in 0..n {
                if self.is_unknown(i, j) {
                    g.set(i, j, unknowns[self.unknown_index(i, j)]);
                } else if let Some(v) = data.dirichlet_value(&self.kinds, i, j) {
                    g.set(i, j, v);
                }
            }
        }
    }

    /// `A x` without boundary forcing.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.unknown_count());
        let four = T::lit(4.0);
        (0..x.len())
            .map(|k| (self.neighbor_sum(x, k) - four * x[k]) * self.inv_h2)
            .collect()
    }

    /// Diagonal entry of `A` (the same for every row).
    #[inline]
    pub fn diagonal(&self) -> T {
        -T::lit(4.0) * self.inv_h2
    }

    /// Off-diagonal part of row `k` of `h^2 A` applied to `x`; a Neumann ghost
    /// node doubles the weight of its mirror neighbour.
    pub fn neighbor_sum(&self, x: &[T], k: usize) -> T {
        let (nx, ny) = self.shape();
        let (a, b) = (k / ny, k % ny);
        let two = T::lit(2.0);
        let west = if a > 0 { Some(x[k - ny]) } else { None };
        let east = if a + 1 < nx { Some(x[k + ny]) } else { None };
        let sx = match (west, east) {
            (Some(w), Some(e)) => w + e,
            (None, Some(e)) if self.x.lo_kind == BoundaryKind::Neumann => two * e,
            (Some(w), None) if self.x.hi_kind == BoundaryKind::Neumann => two * w,
            (w, e) => w.unwrap_or(T::zero()) + e.unwrap_or(T::zero()),
        };
        let south = if b > 0 { Some(x[k - 1]) } else { None };
        let north = if b + 1 < ny { Some(x[k + 1]) } else { None };
        let sy = match (south, north) {
            (Some(s), Some(n)) => s + n,
            (None, Some(n)) if self.y.lo_kind == BoundaryKind::Neumann => two * n,
            (Some(s), None) if self.y.hi_kind == BoundaryKind::Neumann => two * s,
            (s, n) => s.unwrap_or(T::zero()) + n.unwrap_or(T::zero()),
        };
        sx + sy
    }

    fn forcing_parts(&self, data: &BoundaryData<T>) -> ForcingParts<T> {
        assert_eq!(data.level(), self.level, "boundary data on the wrong level");
        let m = self.level.m();
        let h = self.level.h::<T>();
        let neumann_scale = T::lit(2.0) / h;
        let kinds = &self.kinds;
        let side = |kind: BoundaryKind, edge: Edge, fixed: usize, along: &mut dyn Iterator<Item = usize>| -> Vec<T> {
            along
                .map(|k| match kind {
                    BoundaryKind::Neumann => data.get(edge, k) * neumann_scale,
                    BoundaryKind::Dirichlet => {
                        let (i, j) = if edge.is_horizontal() { (k, fixed) } else { (fixed, k) };
                        data.dirichlet_value(kinds, i, j).expect("Dirichlet node") * self.inv_h2
                    }
                })
                .collect()
        };
        let ys = || self.y.lo..=self.y.hi;
        let xs = || self.x.lo..=self.x.hi;
        ForcingParts {
            x_lo: side(self.x.lo_kind, Edge::Left, 0, &mut ys()),
            x_hi: side(self.x.hi_kind, Edge::Right, m, &mut ys()),
            y_lo: side(self.y.lo_kind, Edge::Bottom, 0, &mut xs()),
            y_hi: side(self.y.hi_kind, Edge::Top, m, &mut xs()),
        }
    }

    /// Boundary forcing `r` such that `A v + r` is the five-point Laplacian of
    /// `v` with the boundary conditions described by `data`.
    pub fn forcing(&self, data: &BoundaryData<T>) -> Vec<T> {
        let (nx, ny) = self.shape();
        let p = self.forcing_parts(data);
        let mut r = vec![T::zero(); nx * ny];
        for b in 0..ny {
            r[b] += p.x_lo[b];
            r[(nx - 1) * ny + b] += p.x_hi[b];
        }
        for a in 0..nx {
            r[a * ny] += p.y_lo[a];
            r[a * ny + ny - 1] += p.y_hi[a];
        }
        r
    }

    /// `to_eigen(forcing(data))` in `O(n^2)` using that the forcing only lives
    /// on the outermost unknown rows and columns.
    pub fn forcing_eigen(&self, data: &BoundaryData<T>) -> Vec<T> {
        let (nx, ny) = self.shape();
        let p = self.forcing_parts(data);
        let vx = &self.bx.v_inv;
        let vy = &self.by.v_inv;
        // rank-one pieces: (Vx^-1 e_row) (Vy^-1 rho)^T and (Vx^-1 sigma) (Vy^-1 e_col)^T
        let rho_lo = vy.mul_vec(&p.x_lo);
        let rho_hi = vy.mul_vec(&p.x_hi);
        let sig_lo = vx.mul_vec(&p.y_lo);
        let sig_hi = vx.mul_vec(&p.y_hi);
        let mut out = vec![T::zero(); nx * ny];
        for a in 0..nx {
            let ca = vx.get(a, 0);
            let cb = vx.get(a, nx - 1);
            for b in 0..ny {
                out[a * ny + b] = ca * rho_lo[b]
                    + cb * rho_hi[b]
                    + sig_lo[a] * vy.get(b, 0)
                    + sig_hi[a] * vy.get(b, ny - 1);
            }
        }
        out
    }

    /// Five-point Laplacian of `v` at the unknowns, boundary data from `data`.
    pub fn apply(&self, v: &GridFunction<T>, data: &BoundaryData<T>) -> Vec<T> {
        let mut out = self.matvec(&self.gather(v));
        for (o, r) in out.iter_mut().zip(self.forcing(data)) {
            *o += r;
        }
        out
    }

    /// Coefficients in the eigenbasis: `X_hat = Vx^-1 X Vy^-T`.
    pub fn to_eigen(&self, x: &[T]) -> Vec<T> {
        let (nx, ny) = self.shape();
        let tmp = matmul(&self.bx.v_inv.data, x, nx, nx, ny);
        matmul(&tmp, &self.by.v_inv_t.data, nx, ny, ny)
    }

    /// Inverse of [`Self::to_eigen`].
    pub fn from_eigen(&self, xh: &[T]) -> Vec<T> {
        let (nx, ny) = self.shape();
        let tmp = matmul(&self.bx.v.data, xh, nx, nx, ny);
        matmul(&tmp, &self.by.v_t.data, nx, ny, ny)
    }

    /// Solves `(alpha I - beta A) x = rhs`. The caller guarantees the matrix is
    /// nonsingular (`alpha != 0` whenever the operator is singular).
    pub fn solve_shifted(&self, alpha: T, beta: T, rhs: &[T]) -> Vec<T> {
        let mut xh = self.to_eigen(rhs);
        for (v, &lam) in xh.iter_mut().zip(&self.eigenvalues) {
            *v /= alpha - beta * lam;
        }
        self.from_eigen(&xh)
    }

    /// Relative size of the component of `rhs` outside the range of a singular `A`.
    pub fn compatibility_residual(&self, rhs: &[T]) -> T {
        let w = self.unknown_weights();
        let mut s = T::zero();
        let mut sabs = T::zero();
        for (&wi, &ri) in w.iter().zip(rhs) {
            s += wi * ri;
            sabs += wi * ri.abs();
        }
        if sabs == T::zero() {
            T::zero()
        } else {
            s.abs() / sabs
        }
    }

    /// Solves `A q = rhs - r` on the unknowns, `r` the forcing of `data`.
    ///
    /// For a pure-Neumann operator the right-hand side must be compatible to
    /// [`COMPATIBILITY_TOLERANCE`]; its residual excess is projected out and
    /// the trapezoidal mean of `q` is pinned to zero.
    pub fn solve_poisson(&self, rhs: &[T], data: &BoundaryData<T>) -> Result<GridFunction<T>> {
        self.solve_poisson_inner(rhs, data, true)
    }

    /// As [`Self::solve_poisson`] but always projects onto the compatible subspace.
    pub fn solve_poisson_projected(&self, rhs: &[T], data: &BoundaryData<T>) -> Result<GridFunction<T>> {
        self.solve_poisson_inner(rhs, data, false)
    }

    fn solve_poisson_inner(&self, rhs: &[T], data: &BoundaryData<T>, strict: bool) -> Result<GridFunction<T>> {
        if rhs.len() != self.unknown_count() {
            return Err(Error::InvalidGrid(format!(
                "right-hand side has {} entries, operator has {} unknowns",
                rhs.len(),
                self.unknown_count()
            )));
        }
        let forcing = self.forcing(data);
        let b: Vec<T> = rhs.iter().zip(&forcing).map(|(&f, &r)| f - r).collect();
        if strict && self.is_singular() {
            let res = self.compatibility_residual(&b);
            if res > T::lit(COMPATIBILITY_TOLERANCE) {
                return Err(Error::SingularSystem { residual: res.to_f64_lossy() });
            }
        }
        let mut xh = self.to_eigen(&b);
        let zero = self.zero_mode();
        for (k, (v, &lam)) in xh.iter_mut().zip(&self.eigenvalues).enumerate() {
            if Some(k) == zero {
                *v = T::zero();
            } else {
                *v /= lam;
            }
        }
        let q = self.from_eigen(&xh);
        Ok(self.scatter(&q, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(l: u32) -> GridLevel {
        GridLevel::new(l).unwrap()
    }

    fn mixed_kinds() -> Vec<EdgeKinds> {
        use BoundaryKind::*;
        vec![
            EdgeKinds::dirichlet(),
            EdgeKinds::neumann(),
            EdgeKinds::neumann_sides_dirichlet_ends(),
            EdgeKinds([Dirichlet, Dirichlet, Neumann, Neumann]),
            EdgeKinds([Dirichlet, Neumann, Neumann, Dirichlet]),
        ]
    }

    #[test]
    fn quadratic_is_exact_under_dirichlet() {
        let level = lvl(4);
        let op = DiscreteOperator::<f64>::assemble(level, EdgeKinds::dirichlet()).unwrap();
        let v = GridFunction::from_fn(level, |x, y| x * x + y * y);
        let data = BoundaryData::trace_of(&v);
        let lap = op.apply(&v, &data);
        assert!(lap.iter().all(|&l| (l - 4.0).abs() < 1e-9));
    }

    #[test]
    fn single_interior_node() {
        let op = DiscreteOperator::<f64>::assemble(lvl(1), EdgeKinds::dirichlet()).unwrap();
        assert_eq!(op.unknown_count(), 1);
        let mut v = GridFunction::zeros(lvl(1));
        v.set(1, 1, 1.0);
        let lap = op.apply(&v, &BoundaryData::constant(lvl(1), 0.0));
        assert_eq!(lap, vec![-16.0]);
    }

    #[test]
    fn neumann_constants_in_nullspace() {
        let op = DiscreteOperator::<f64>::assemble(lvl(3), EdgeKinds::neumann()).unwrap();
        assert!(op.is_singular());
        let ones = vec![1.0; op.unknown_count()];
        assert!(op.matvec(&ones).iter().all(|&v| v == 0.0));
        let c = GridFunction::constant(lvl(3), 2.5);
        let lap = op.apply(&c, &BoundaryData::constant(lvl(3), 0.0));
        assert!(lap.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_ghost_matches_quadratic_flux() {
        // v = x^2 + y^2 has outward derivative 2 on right/top and 0 on left/bottom
        let level = lvl(3);
        for kinds in mixed_kinds() {
            let op = DiscreteOperator::<f64>::assemble(level, kinds).unwrap();
            let v = GridFunction::from_fn(level, |x, y| x * x + y * y);
            let data = BoundaryData::from_fn(level, |edge, x, y| match kinds.get(edge) {
                BoundaryKind::Dirichlet => x * x + y * y,
                BoundaryKind::Neumann => match edge {
                    Edge::Right | Edge::Top => 2.0,
                    _ => 0.0,
                },
            });
            let lap = op.apply(&v, &data);
            assert!(lap.iter().all(|&l| (l - 4.0).abs() < 1e-9), "{kinds:?}");
        }
    }

    #[test]
    fn dirichlet_matrix_is_symmetric() {
        let op = DiscreteOperator::<f64>::assemble(lvl(3), EdgeKinds::dirichlet()).unwrap();
        let n = op.unknown_count();
        let v: Vec<f64> = (0..n).map(|k| ((k * 37 % 11) as f64).sin()).collect();
        let w: Vec<f64> = (0..n).map(|k| ((k * 13 % 7) as f64).cos()).collect();
        let av = op.matvec(&v);
        let aw = op.matvec(&w);
        let lhs: f64 = av.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&aw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn eigen_transform_roundtrip_and_diagonalises() {
        for kinds in mixed_kinds() {
            let op = DiscreteOperator::<f64>::assemble(lvl(3), kinds).unwrap();
            let n = op.unknown_count();
            let x: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
            let back = op.from_eigen(&op.to_eigen(&x));
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
            // A x computed in the eigenbasis agrees with the stencil
            let mut xh = op.to_eigen(&x);
            for (v, l) in xh.iter_mut().zip(op.eigenvalues()) {
                *v *= l;
            }
            let ax = op.from_eigen(&xh);
            let ax_direct = op.matvec(&x);
            for (a, b) in ax.iter().zip(&ax_direct) {
                assert!((a - b).abs() < 1e-9 * 256.0, "{kinds:?}");
            }
        }
    }

    #[test]
    fn forcing_eigen_matches_transform() {
        for kinds in mixed_kinds() {
            let level = lvl(3);
            let op = DiscreteOperator::<f64>::assemble(level, kinds).unwrap();
            let data = BoundaryData::from_fn(level, |e, x: f64, y: f64| (e.slot() as f64 + 1.0) * (x - 2.0 * y).cos());
            let direct = op.to_eigen(&op.forcing(&data));
            let fast = op.forcing_eigen(&data);
            for (a, b) in direct.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn solve_poisson_constant_and_linear() {
        let level = lvl(4);
        let op = DiscreteOperator::<f64>::assemble(level, EdgeKinds::dirichlet()).unwrap();
        let zero = vec![0.0; op.unknown_count()];
        let q = op.solve_poisson(&zero, &BoundaryData::constant(level, 1.0)).unwrap();
        assert!(q.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let lin = GridFunction::from_fn(level, |x, y| x + y);
        let q = op.solve_poisson(&zero, &BoundaryData::trace_of(&lin)).unwrap();
        assert!(q.sub(&lin).max_abs() < 1e-12);
    }

    #[test]
    fn neumann_quadratic_solution() {
        let level = lvl(4);
        let op = DiscreteOperator::<f64>::assemble(level, EdgeKinds::neumann()).unwrap();
        let flux = BoundaryData::from_fn(level, |e, _, _| match e {
            Edge::Right | Edge::Top => 2.0f64,
            _ => 0.0,
        });
        let g = compat_constant(&flux);
        assert!((g - 4.0).abs() < 1e-14);
        let q = op.solve_poisson(&vec![g; op.unknown_count()], &flux).unwrap();
        let exact = GridFunction::from_fn(level, |x, y| x * x + y * y);
        let mean = exact.trapezoid_mean();
        let want = exact.map(|v| v - mean);
        assert!(q.sub(&want).max_abs() < 1e-11);
        assert!(q.trapezoid_mean().abs() < 1e-13);
    }

    #[test]
    fn incompatible_neumann_rhs_rejected() {
        let level = lvl(3);
        let op = DiscreteOperator::<f64>::assemble(level, EdgeKinds::neumann()).unwrap();
        let flux = BoundaryData::constant(level, 1.0);
        let err = op.solve_poisson(&vec![0.0; op.unknown_count()], &flux).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
        // projected variant accepts it
        assert!(op.solve_poisson_projected(&vec![0.0; op.unknown_count()], &flux).is_ok());
    }

    #[test]
    fn compat_constant_examples() {
        let level = lvl(5);
        assert!((compat_constant(&BoundaryData::constant(level, 1.0f64)) - 4.0).abs() < 1e-14);
        assert_eq!(compat_constant(&BoundaryData::constant(level, 0.0f64)), 0.0);
        let pm = BoundaryData::from_fn(level, |e, _, _| match e {
            Edge::Right | Edge::Top => 1.0f64,
            _ => -1.0,
        });
        assert!(compat_constant(&pm).abs() < 1e-15);
    }

    #[test]
    fn level_zero_rejected() {
        assert!(DiscreteOperator::<f64>::assemble(lvl(0), EdgeKinds::dirichlet()).is_err());
    }
}
