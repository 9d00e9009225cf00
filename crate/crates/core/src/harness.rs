//! Reference solutions, discrete error norms, observed orders and convergence
//! tables.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use crate::discretization::{DiscreteOperator, EdgeKinds};
use crate::error::{Error, Result};
use crate::flows::{semilinear_flow, FlowTolerance};
use crate::grid::{GridFunction, GridLevel};
use crate::problems::ProblemDef;
use crate::scalar::Real;
use crate::splitting::{CorrectionTime, SchemeConfig, SchemeMode, Stepper, StrangOrder};

pub const CACHE_ENV: &str = "SPLITCORRECT_CACHE";
/// Bumped whenever the reference integrator changes its output.
const CACHE_VERSION: &str = "ref-v1";

/// Integrates the unsplit semi-discrete problem from `u0` to `t_end`.
pub fn reference_solution<T: Real>(
    problem: &ProblemDef<T>,
    level: GridLevel,
    t_end: T,
    tol: &FlowTolerance<T>,
) -> Result<GridFunction<T>> {
    let op = DiscreteOperator::assemble(level, problem.boundary.kinds)?;
    let u0 = problem.initial_field(level);
    if t_end == T::zero() {
        return Ok(u0);
    }
    semilinear_flow(&op, &problem.boundary, &problem.reaction, &u0, T::zero(), t_end, tol)
}

/// On-disk cache of reference solutions keyed by a hash of their configuration.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$SPLITCORRECT_CACHE`, or `splitcorrect-cache` under the system temp directory.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::new(PathBuf::from(d)),
            _ => Self::new(std::env::temp_dir().join("splitcorrect-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<T: Real>(problem: &str, level: GridLevel, t_end: T, tol: &FlowTolerance<T>) -> String {
        let desc = format!(
            "{CACHE_VERSION};problem={problem};level={};t_end={:e};rtol={:e};atol={:e};scalar={}",
            level.level(),
            t_end.to_f64_lossy(),
            tol.rel_tol.to_f64_lossy(),
            tol.abs_tol.to_f64_lossy(),
            std::any::type_name::<T>(),
        );
        hex::encode(Sha256::digest(desc.as_bytes()))
    }

    fn path<T: Real>(&self, problem: &str, level: GridLevel, t_end: T, tol: &FlowTolerance<T>) -> PathBuf {
        self.dir.join(format!("{}.csv", Self::key(problem, level, t_end, tol)))
    }

    /// The cached reference, if one is stored and readable.
    pub fn lookup<T: Real>(
        &self,
        problem: &str,
        level: GridLevel,
        t_end: T,
        tol: &FlowTolerance<T>,
    ) -> Option<GridFunction<T>> {
        let file = fs::File::open(self.path(problem, level, t_end, tol)).ok()?;
        GridFunction::read_csv(BufReader::new(file)).ok().filter(|g| g.level() == level)
    }

    pub fn get_or_compute<T: Real>(
        &self,
        problem: &ProblemDef<T>,
        level: GridLevel,
        t_end: T,
        tol: &FlowTolerance<T>,
    ) -> Result<GridFunction<T>> {
        if let Some(g) = self.lookup(&problem.name, level, t_end, tol) {
            return Ok(g);
        }
        let g = reference_solution(problem, level, t_end, tol)?;
        fs::create_dir_all(&self.dir)?;
        let path = self.path(&problem.name, level, t_end, tol);
        // Unique temporary name so concurrent writers never interleave.
        static WRITES: AtomicUsize = AtomicUsize::new(0);
        let tmp = path.with_extension(format!(
            "{}-{}.tmp",
            std::process::id(),
            WRITES.fetch_add(1, Ordering::Relaxed)
        ));
        g.write_csv(BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(&tmp, &path)?;
        Ok(g)
    }
}

/// Interior-only discrete norms `(l2, linf)` of `e`.
pub fn error_norms<T: Real>(e: &GridFunction<T>) -> (T, T) {
    let m = e.level().m();
    let mut sum = T::zero();
    let mut max = T::zero();
    for i in 1..m {
        for j in 1..m {
            let v = e.get(i, j);
            sum += v * v;
            max = max.max(v.abs());
        }
    }
    if m < 2 {
        return (T::zero(), T::zero());
    }
    let count = T::from_usize_lossy((m - 1) * (m - 1));
    ((sum / count).sqrt(), max)
}

/// Nodes over which study errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormRegion {
    /// `1 <= i, j <= M - 1`.
    #[default]
    Interior,
    /// Every node that is not fixed by Dirichlet data, so Neumann edges count.
    Unknowns,
}

impl NormRegion {
    pub fn name(&self) -> &'static str {
        match self {
            NormRegion::Interior => "interior",
            NormRegion::Unknowns => "unknowns",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(NormRegion::Interior),
            "unknowns" => Ok(NormRegion::Unknowns),
            other => Err(Error::InvalidConfig(format!("unknown norm region '{other}'"))),
        }
    }
}

/// `(l2, linf)` over `region`; the l2 norm is the root mean square over its nodes.
pub fn error_norms_on<T: Real>(e: &GridFunction<T>, kinds: &EdgeKinds, region: NormRegion) -> (T, T) {
    match region {
        NormRegion::Interior => error_norms(e),
        NormRegion::Unknowns => {
            let level = e.level();
            let n = level.n();
            let mut sum = T::zero();
            let mut max = T::zero();
            let mut count = 0usize;
            for i in 0..n {
                for j in 0..n {
                    if kinds.dirichlet_owner(level, i, j).is_none() {
                        let v = e.get(i, j);
                        sum += v * v;
                        max = max.max(v.abs());
                        count += 1;
                    }
                }
            }
            if count == 0 {
                return (T::zero(), T::zero());
            }
            ((sum / T::from_usize_lossy(count)).sqrt(), max)
        }
    }
}

/// `log2(e_coarse / e_fine)`.
pub fn observed_order<T: Real>(e_coarse: T, e_fine: T) -> Result<T> {
    let ok = |e: T| e.is_finite() && e > T::zero();
    if !ok(e_coarse) || !ok(e_fine) {
        return Err(Error::DegenerateError(format!(
            "observed order needs positive finite errors (got {e_coarse:e}, {e_fine:e})"
        )));
    }
    Ok((e_coarse / e_fine).log2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow<T> {
    pub tau: T,
    pub err_linf: T,
    pub order_linf: Option<T>,
    pub err_l2: T,
    pub order_l2: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta<T> {
    pub problem: String,
    pub level: u32,
    pub t_end: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub scheme: String,
    pub meta: ReportMeta<T>,
    pub rows: Vec<ReportRow<T>>,
}

pub const CSV_HEADER: &str = "scheme,tau,err_linf,order_linf,err_l2,order_l2";

impl<T: Real> ConvergenceReport<T> {
    /// Builds rows from `(tau, error field)` pairs ordered by decreasing `tau`.
    pub fn from_errors(scheme: String, meta: ReportMeta<T>, errors: &[(T, T, T)]) -> Result<Self> {
        let mut rows: Vec<ReportRow<T>> = Vec::with_capacity(errors.len());
        for (k, &(tau, linf, l2)) in errors.iter().enumerate() {
            let (order_linf, order_l2) = if k == 0 {
                (None, None)
            } else {
                let prev = &rows[k - 1];
                (Some(observed_order(prev.err_linf, linf)?), Some(observed_order(prev.err_l2, l2)?))
            };
            rows.push(ReportRow { tau, err_linf: linf, order_linf, err_l2: l2, order_l2 });
        }
        Ok(Self { scheme, meta, rows })
    }

    pub fn orders_linf(&self) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.order_linf).collect()
    }

    pub fn orders_l2(&self) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.order_l2).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |o: Option<T>| o.map(|v| format!("{:.16e}", v)).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{},{:.16e},{}",
                self.scheme,
                r.tau,
                r.err_linf,
                opt(r.order_linf),
                r.err_l2,
                opt(r.order_l2)
            );
        }
        s
    }
}

/// Side-by-side table of several reports over the same `tau` sequence.
pub fn format_table<T: Real>(reports: &[ConvergenceReport<T>]) -> String {
    let mut s = String::new();
    let Some(first) = reports.first() else {
        return s;
    };
    let _ = writeln!(
        s,
        "problem {}, level {}, t_end {}",
        first.meta.problem,
        first.meta.level,
        first.meta.t_end.to_f64_lossy()
    );
    for (norm, pick) in [("l_inf", 0usize), ("l_2", 1)] {
        let _ = writeln!(s, "\n{norm} errors");
        let _ = write!(s, "{:>12}", "tau");
        for r in reports {
            let _ = write!(s, " | {:>34}", r.scheme);
        }
        s.push('\n');
        for (k, row) in first.rows.iter().enumerate() {
            let _ = write!(s, "{:>12.4e}", row.tau.to_f64_lossy());
            for r in reports {
                match r.rows.get(k) {
                    Some(rr) => {
                        let (e, o) = if pick == 0 { (rr.err_linf, rr.order_linf) } else { (rr.err_l2, rr.order_l2) };
                        let o = o.map(|v| format!("{:.2}", v.to_f64_lossy())).unwrap_or_else(|| "--".into());
                        let _ = write!(s, " | {:>24.3e} {:>9}", e.to_f64_lossy(), o);
                    }
                    None => {
                        let _ = write!(s, " | {:>34}", "");
                    }
                }
            }
            s.push('\n');
        }
    }
    s
}

/// Checks that `taus` halves at every entry.
pub fn check_halving<T: Real>(taus: &[T]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidConfig("empty tau list".into()));
    }
    for w in taus.windows(2) {
        let ratio = w[0] / w[1];
        if (ratio - T::lit(2.0)).abs() > T::lit(1e-9) {
            return Err(Error::InvalidConfig(format!(
                "tau list must halve at every entry ({} -> {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Scheme variant and measurement settings shared by every cell of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions<T> {
    pub flow_tol: FlowTolerance<T>,
    pub order: StrangOrder,
    pub correction_time: CorrectionTime,
    pub norms: NormRegion,
}

impl<T: Real> Default for StudyOptions<T> {
    fn default() -> Self {
        Self {
            flow_tol: FlowTolerance::default(),
            order: StrangOrder::default(),
            correction_time: CorrectionTime::default(),
            norms: NormRegion::default(),
        }
    }
}

impl<T: Real> StudyOptions<T> {
    /// Half reaction steps outside, boundary data for `q_n` at the step
    /// midpoint, errors over all unknown nodes.
    pub fn reaction_outer() -> Self {
        Self {
            flow_tol: FlowTolerance::default(),
            order: StrangOrder::ReactionOuter,
            correction_time: CorrectionTime::Midpoint,
            norms: NormRegion::Unknowns,
        }
    }
}

/// Runs every scheme at every `tau` and compares with `reference` at `t_end`.
/// Cells run on all available cores.
pub fn convergence_study<T: Real>(
    problem: &ProblemDef<T>,
    level: GridLevel,
    schemes: &[SchemeMode<T>],
    taus: &[T],
    t_end: T,
    reference: &GridFunction<T>,
    opts: &StudyOptions<T>,
) -> Result<Vec<ConvergenceReport<T>>> {
    check_halving(taus)?;
    if reference.level() != level {
        return Err(Error::InvalidGrid("reference solution on a different level".into()));
    }
    let h = level.h::<T>();
    if let Some(&smallest) = taus.last() {
        if smallest <= h * h {
            eprintln!(
                "note: tau = {:e} is not large against h^2 = {:e}; the study leaves the stiff regime",
                smallest.to_f64_lossy(),
                (h * h).to_f64_lossy()
            );
        }
    }
    let op = DiscreteOperator::assemble(level, problem.boundary.kinds)?;
    let u0 = problem.initial_field(level);
    let meta = ReportMeta { problem: problem.name.clone(), level: level.level(), t_end };
    let cells: Vec<(usize, T)> = (0..schemes.len()).flat_map(|s| taus.iter().map(move |&t| (s, t))).collect();
    let run_cell = |&(s, tau): &(usize, T)| -> Result<(T, T, T)> {
        let cfg = SchemeConfig::new(schemes[s], tau, t_end)
            .with_tol(opts.flow_tol)
            .with_order(opts.order)
            .with_correction_time(opts.correction_time);
        let u = Stepper::new(&op, problem, cfg)?.run(&u0)?;
        let (l2, linf) = error_norms_on(&u.sub(reference), &problem.boundary.kinds, opts.norms);
        Ok((tau, linf, l2))
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Result<(T, T, T)>>> = (0..cells.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= cells.len() {
                            break done;
                        }
                        done.push((k, run_cell(&cells[k])));
                    }
                })
            })
            .collect();
        for handle in handles {
            for (k, r) in handle.join().expect("study worker panicked") {
                results[k] = Some(r);
            }
        }
    });
    let mut results = results.into_iter().map(|r| r.expect("every cell is run"));
    let mut reports = Vec::with_capacity(schemes.len());
    for mode in schemes {
        let errors = results.by_ref().take(taus.len()).collect::<Result<Vec<_>>>()?;
        reports.push(ConvergenceReport::from_errors(mode.label(), meta.clone(), &errors)?);
    }
    Ok(reports)
}

/// `tau_0, tau_0/2, ...` with `count` entries.
pub fn halving_sequence<T: Real>(tau0: T, count: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(count);
    let mut t = tau0;
    for _ in 0..count {
        v.push(t);
        t = t * T::lit(0.5);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{BoundarySpec, EdgeKinds};
    use crate::problems::Reaction;
    use std::sync::Arc;

    #[test]
    fn norm_examples() {
        let level = GridLevel::new(2).unwrap();
        assert_eq!(error_norms(&GridFunction::<f64>::zeros(level)), (0.0, 0.0));
        let ones = GridFunction::from_index_fn(level, |i, j| if level.is_boundary(i, j) { 7.0 } else { 1.0f64 });
        assert_eq!(error_norms(&ones), (1.0, 1.0));
        let spike = GridFunction::from_index_fn(level, |i, j| if (i, j) == (2, 1) { 3.0f64 } else { 0.0 });
        let (l2, linf) = error_norms(&spike);
        assert_eq!(linf, 3.0);
        assert!((l2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_examples() {
        assert!((observed_order(4e-4f64, 1e-4).unwrap() - 2.0).abs() < 1e-12);
        assert!((observed_order(1.51e-2f64, 7.45e-3).unwrap() - 1.02).abs() < 5e-3);
        assert!((observed_order(9.40e-3f64, 3.38e-3).unwrap() - 1.48).abs() < 5e-3);
        assert!(matches!(observed_order(0.0f64, 1.0), Err(Error::DegenerateError(_))));
        assert!(observed_order(1.0f64, f64::NAN).is_err());
    }

    #[test]
    fn csv_layout() {
        let meta = ReportMeta { problem: "p".into(), level: 3, t_end: 0.1 };
        let r = ConvergenceReport::from_errors("standard".into(), meta, &[(0.1, 4e-4, 2e-4), (0.05, 1e-4, 1e-4)])
            .unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').nth(3), Some(""));
        assert_eq!(lines[1].split(',').nth(5), Some(""));
        let order: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
        assert!((order - 2.0).abs() < 1e-12);
        let single = ConvergenceReport::from_errors("x".into(), r.meta.clone(), &[(0.1, 1.0, 1.0)]).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.rows[0].order_linf.is_none());
    }

    #[test]
    fn halving_checks() {
        assert!(check_halving(&halving_sequence(0.025f64, 5)).is_ok());
        assert!(check_halving::<f64>(&[]).is_err());
        assert!(check_halving(&[0.1f64, 0.04]).is_err());
    }

    #[test]
    fn reference_eigen_decay_and_zero_time() {
        let level = GridLevel::new(4).unwrap();
        let h = level.h::<f64>();
        let pi = std::f64::consts::PI;
        let p = ProblemDef {
            name: "decay".into(),
            reaction: Reaction::zero(),
            initial: Arc::new(move |x: f64, y: f64| (pi * x).sin() * (pi * y).sin()),
            boundary: BoundarySpec::new(EdgeKinds::dirichlet(), |_, _, _, _| 0.0),
            t_end: 0.1,
        };
        let tol = FlowTolerance::default();
        let u0 = p.initial_field(level);
        assert_eq!(reference_solution(&p, level, 0.0, &tol).unwrap(), u0);
        let u = reference_solution(&p, level, 0.05, &tol).unwrap();
        let decay = (-(2.0 / (h * h)) * (2.0 - 2.0 * (pi * h).cos()) * 0.05).exp();
        for (a, b) in u.values().iter().zip(u0.values()) {
            assert!((a - decay * b).abs() <= 1e-8 * decay);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path());
        let p = crate::problems::catalog::<f64>("neumann-n1").unwrap();
        let level = GridLevel::new(3).unwrap();
        let tol = FlowTolerance::default();
        let a = cache.get_or_compute(&p, level, 0.01, &tol).unwrap();
        let b = cache.get_or_compute(&p, level, 0.01, &tol).unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_ne!(
            ReferenceCache::key("a", level, 0.1f64, &tol),
            ReferenceCache::key("a", level, 0.2f64, &tol)
        );
    }
}
