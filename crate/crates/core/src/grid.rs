//! Dyadic grids on the closed unit square, nodal grid functions and the
//! coarse/fine transfer operators.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest supported refinement level (`M = 2^14`).
pub const MAX_LEVEL: u32 = 14;

/// Uniform grid with `M = 2^level` intervals per direction.
///
/// Level 0 is the single unit cell made of the four corners; the elliptic
/// machinery requires level 1 or finer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridLevel {
    level: u32,
}

impl GridLevel {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidGrid(format!(
                "level {level} exceeds the maximum supported level {MAX_LEVEL}"
            )));
        }
        Ok(Self { level })
    }

    /// Level whose interval count is `m`; rejects non-dyadic sizes.
    pub fn from_intervals(m: usize) -> Result<Self> {
        if m == 0 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("{m} intervals is not a power of two")));
        }
        Self::new(m.trailing_zeros())
    }

    #[inline]
    pub fn level(self) -> u32 {
        self.level
    }

    /// Intervals per direction.
    #[inline]
    pub fn m(self) -> usize {
        1 << self.level
    }

    /// Nodes per direction, `M + 1`.
    #[inline]
    pub fn n(self) -> usize {
        self.m() + 1
    }

    #[inline]
    pub fn node_count(self) -> usize {
        self.n() * self.n()
    }

    /// Mesh width `2^-level`; exact in binary floating point.
    #[inline]
    pub fn h<T: Real>(self) -> T {
        T::one() / T::from_usize_lossy(self.m())
    }

    #[inline]
    pub fn coord<T: Real>(self, i: usize) -> T {
        T::from_usize_lossy(i) * self.h::<T>()
    }

    pub fn coarser(self) -> Option<Self> {
        self.level.checked_sub(1).map(|level| Self { level })
    }

    pub fn finer(self) -> Result<Self> {
        Self::new(self.level + 1)
    }

    #[inline]
    pub fn index(self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.m() && j <= self.m());
        i * self.n() + j
    }

    #[inline]
    pub fn is_boundary(self, i: usize, j: usize) -> bool {
        let m = self.m();
        i == 0 || j == 0 || i == m || j == m
    }
}

/// One side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    /// `x = 0`
    Left,
    /// `x = 1`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = 1`
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    #[inline]
    pub fn slot(self) -> usize {
        match self {
            Edge::Left => 0,
            Edge::Right => 1,
            Edge::Bottom => 2,
            Edge::Top => 3,
        }
    }

    /// Grid node of the `k`-th point along this edge (`k` runs along the edge).
    #[inline]
    pub fn node(self, level: GridLevel, k: usize) -> (usize, usize) {
        let m = level.m();
        match self {
            Edge::Left => (0, k),
            Edge::Right => (m, k),
            Edge::Bottom => (k, 0),
            Edge::Top => (k, m),
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Edge::Bottom | Edge::Top)
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        }
    }
}

/// Nodes owned by one edge. Corners are owned by the bottom and top edges,
/// so the four sets partition the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryIndexSet {
    pub edge: Edge,
    pub nodes: Vec<(usize, usize)>,
}

impl BoundaryIndexSet {
    pub fn new(level: GridLevel, edge: Edge) -> Self {
        let m = level.m();
        let nodes = match edge {
            Edge::Bottom | Edge::Top => (0..=m).map(|k| edge.node(level, k)).collect(),
            Edge::Left | Edge::Right => (1..m).map(|k| edge.node(level, k)).collect(),
        };
        Self { edge, nodes }
    }
}

/// Nodal values on the `(M+1) x (M+1)` grid, indexed `(i, j)` with `x = i h`, `y = j h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    level: GridLevel,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn constant(level: GridLevel, c: T) -> Self {
        Self { level, values: vec![c; level.node_count()] }
    }

    pub fn zeros(level: GridLevel) -> Self {
        Self::constant(level, T::zero())
    }

    pub fn from_values(level: GridLevel, values: Vec<T>) -> Result<Self> {
        if values.len() != level.node_count() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for level {}, got {}",
                level.node_count(),
                level.level(),
                values.len()
            )));
        }
        Ok(Self { level, values })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(level: GridLevel, f: impl Fn(T, T) -> T) -> Self {
        Self::from_index_fn(level, |i, j| f(level.coord(i), level.coord(j)))
    }

    pub fn from_index_fn(level: GridLevel, f: impl Fn(usize, usize) -> T) -> Self {
        let n = level.n();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { level, values }
    }

    #[inline]
    pub fn level(&self) -> GridLevel {
        self.level
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.level.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.level.index(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { level: self.level, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.level, other.level, "grid functions on different levels");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { level: self.level, values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Swaps the roles of `x` and `y`.
    pub fn transpose(&self) -> Self {
        Self::from_index_fn(self.level, |i, j| self.get(j, i))
    }

    /// Composite trapezoidal weight of node `(i, j)` in units of `h^2`.
    pub fn trapezoid_weight(level: GridLevel, i: usize, j: usize) -> T {
        let m = level.m();
        let half = T::lit(0.5);
        let wx = if i == 0 || i == m { half } else { T::one() };
        let wy = if j == 0 || j == m { half } else { T::one() };
        wx * wy
    }

    /// Trapezoidal-rule mean over the unit square.
    pub fn trapezoid_mean(&self) -> T {
        let n = self.level.n();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += Self::trapezoid_weight(self.level, i, j) * self.get(i, j);
            }
        }
        let m = T::from_usize_lossy(self.level.m());
        acc / (m * m)
    }

    /// Writes `i,j,x,y,value` rows in row-major order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,x,y,value")?;
        let n = self.level.n();
        for i in 0..n {
            for j in 0..n {
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e},{:.16e}",
                    i,
                    j,
                    self.level.coord::<T>(i),
                    self.level.coord::<T>(j),
                    self.get(i, j)
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: Vec<(usize, usize, T)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "i,j,x,y,value" {
                    return Err(Error::Io(format!("unexpected grid CSV header '{line}'")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::Io(format!("malformed grid CSV row {}: '{line}'", lineno + 1));
            if fields.len() != 5 {
                return Err(bad());
            }
            let i: usize = fields[0].trim().parse().map_err(|_| bad())?;
            let j: usize = fields[1].trim().parse().map_err(|_| bad())?;
            let v: f64 = fields[4].trim().parse().map_err(|_| bad())?;
            rows.push((i, j, T::lit(v)));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n < 2 || n * n != rows.len() {
            return Err(Error::Io(format!("grid CSV has {} rows, not a square grid", rows.len())));
        }
        let level = GridLevel::from_intervals(n - 1)?;
        let mut g = Self::zeros(level);
        for (i, j, v) in rows {
            if i >= n || j >= n {
                return Err(Error::Io(format!("node ({i},{j}) outside a {n}x{n} grid")));
            }
            g.set(i, j, v);
        }
        Ok(g)
    }
}

/// Bilinear prolongation from level `k-1` to level `k`.
///
/// Even/even nodes are copied, mixed-parity nodes average their two coarse
/// neighbours and odd/odd nodes average the four surrounding coarse nodes.
pub fn prolong<T: Real>(coarse: &GridFunction<T>) -> Result<GridFunction<T>> {
    let fine_level = coarse.level().finer()?;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let fine = GridFunction::from_index_fn(fine_level, |fi, fj| {
        let (i, j) = (fi / 2, fj / 2);
        match (fi % 2, fj % 2) {
            (0, 0) => coarse.get(i, j),
            (1, 0) => half * (coarse.get(i, j) + coarse.get(i + 1, j)),
            (0, 1) => half * (coarse.get(i, j) + coarse.get(i, j + 1)),
            _ => {
                quarter
                    * (coarse.get(i, j)
                        + coarse.get(i + 1, j)
                        + coarse.get(i, j + 1)
                        + coarse.get(i + 1, j + 1))
            }
        }
    });
    Ok(fine)
}

/// Injection: coarse node `(i, j)` takes the fine value at `(2i, 2j)`.
pub fn restrict_inject<T: Real>(fine: &GridFunction<T>) -> Result<GridFunction<T>> {
    let coarse_level = fine
        .level()
        .coarser()
        .ok_or_else(|| Error::InvalidGrid("cannot restrict below level 0".into()))?;
    Ok(GridFunction::from_index_fn(coarse_level, |i, j| fine.get(2 * i, 2 * j)))
}

/// Values of `g` at the boundary nodes owned by the requested edges, in
/// canonical edge order (left, right, bottom, top).
pub fn boundary_trace<T: Real>(g: &GridFunction<T>, edges: &[Edge]) -> Vec<((usize, usize), T)> {
    let mut out = Vec::new();
    for edge in Edge::ALL {
        if !edges.contains(&edge) {
            continue;
        }
        for (i, j) in BoundaryIndexSet::new(g.level(), edge).nodes {
            out.push(((i, j), g.get(i, j)));
        }
    }
    out
}
