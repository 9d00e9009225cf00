//! Strang composition of the diffusion and reaction flows, with or without a
//! correction function, and the fixed-step time loop.

use crate::correction::{CorrectionBuilder, CorrectionStrategy};
use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::flows::{diffusion_flow_eigen, reaction_flow, FlowTolerance};
use crate::grid::GridFunction;
use crate::problems::ProblemDef;
use crate::scalar::Real;

/// Relative tolerance for `t_end` being a whole number of steps.
pub const STEP_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeMode<T> {
    Standard,
    Modified(CorrectionStrategy<T>),
}

impl<T: Real> SchemeMode<T> {
    pub fn label(&self) -> String {
        match self {
            SchemeMode::Standard => "standard".into(),
            SchemeMode::Modified(s) => format!("modified-{}", s.label()),
        }
    }
}

/// Which sub-flow takes the two half steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrangOrder {
    /// `phi_{tau/2} psi_tau phi_{tau/2}`.
    #[default]
    DiffusionOuter,
    /// `psi_{tau/2} phi_tau psi_{tau/2}`.
    ReactionOuter,
}

impl StrangOrder {
    pub fn name(&self) -> &'static str {
        match self {
            StrangOrder::DiffusionOuter => "diffusion-outer",
            StrangOrder::ReactionOuter => "reaction-outer",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "diffusion-outer" => Ok(StrangOrder::DiffusionOuter),
            "reaction-outer" => Ok(StrangOrder::ReactionOuter),
            other => Err(Error::InvalidConfig(format!("unknown Strang order '{other}'"))),
        }
    }
}

/// Time at which boundary data enters the per-step correction `q_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionTime {
    #[default]
    StepStart,
    /// `t_n + tau/2`; the state is still `u_n`.
    Midpoint,
}

impl CorrectionTime {
    pub fn name(&self) -> &'static str {
        match self {
            CorrectionTime::StepStart => "start",
            CorrectionTime::Midpoint => "midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "start" => Ok(CorrectionTime::StepStart),
            "midpoint" => Ok(CorrectionTime::Midpoint),
            other => Err(Error::InvalidConfig(format!("unknown correction time '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<T> {
    pub mode: SchemeMode<T>,
    pub tau: T,
    pub t_end: T,
    pub tol: FlowTolerance<T>,
    pub order: StrangOrder,
    pub correction_time: CorrectionTime,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(mode: SchemeMode<T>, tau: T, t_end: T) -> Self {
        Self {
            mode,
            tau,
            t_end,
            tol: FlowTolerance::default(),
            order: StrangOrder::default(),
            correction_time: CorrectionTime::default(),
        }
    }

    pub fn with_tol(mut self, tol: FlowTolerance<T>) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_correction_time(mut self, time: CorrectionTime) -> Self {
        self.correction_time = time;
        self
    }

    pub fn with_order(mut self, order: StrangOrder) -> Self {
        self.order = order;
        self
    }

    /// `round(t_end / tau)`, rejecting step sizes that do not divide `t_end`.
    pub fn step_count(&self) -> Result<usize> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.t_end < T::zero() || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        let ratio = (self.t_end / self.tau).round();
        let n = ratio
            .to_usize()
            .ok_or_else(|| Error::InvalidConfig(format!("step count {ratio} out of range")))?;
        let mismatch = (ratio * self.tau - self.t_end).abs();
        if mismatch > T::lit(STEP_ROUNDING) * self.t_end {
            return Err(Error::InvalidConfig(format!(
                "tau = {} does not divide t_end = {} (rounding error {:e})",
                self.tau,
                self.t_end,
                mismatch.to_f64_lossy()
            )));
        }
        Ok(n)
    }
}

/// A scheme bound to one problem and grid; holds the correction operators.
pub struct Stepper<'a, T> {
    op: &'a DiscreteOperator<T>,
    problem: &'a ProblemDef<T>,
    cfg: SchemeConfig<T>,
    builder: Option<CorrectionBuilder<T>>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(op: &'a DiscreteOperator<T>, problem: &'a ProblemDef<T>, cfg: SchemeConfig<T>) -> Result<Self> {
        if op.kinds() != problem.boundary.kinds {
            return Err(Error::InvalidConfig("operator and problem have different boundary kinds".into()));
        }
        let builder = match cfg.mode {
            SchemeMode::Standard => None,
            SchemeMode::Modified(strategy) => Some(CorrectionBuilder::new(strategy, op.level(), op.kinds())?),
        };
        Ok(Self { op, problem, cfg, builder })
    }

    /// The correction `q_n` this scheme would use at `(t, u)`; `None` in standard mode.
    pub fn correction(&self, u: &GridFunction<T>, t: T) -> Result<Option<GridFunction<T>>> {
        self.builder
            .as_ref()
            .map(|b| b.build(&self.problem.boundary, &self.problem.reaction, u, t))
            .transpose()
    }

    /// One Strang step from `t_n` in the configured order.
    pub fn step(&self, u: &GridFunction<T>, t_n: T) -> Result<GridFunction<T>> {
        let op = self.op;
        let spec = &self.problem.boundary;
        let reaction = &self.problem.reaction;
        let tau = self.cfg.tau;
        let half = tau * T::lit(0.5);
        let tol = &self.cfg.tol;
        let t_q = match self.cfg.correction_time {
            CorrectionTime::StepStart => t_n,
            CorrectionTime::Midpoint => t_n + half,
        };
        let q = self.correction(u, t_q)?;
        let q_hat = q.as_ref().map(|q| op.to_eigen(&op.gather(q)));
        match self.cfg.order {
            StrangOrder::DiffusionOuter => {
                let v = diffusion_flow_eigen(op, spec, u, t_n, half, q_hat.as_deref(), tol)?;
                let w = reaction_flow(&v, reaction, tau, q.as_ref(), tol)?;
                diffusion_flow_eigen(op, spec, &w, t_n + half, half, q_hat.as_deref(), tol)
            }
            StrangOrder::ReactionOuter => {
                let w = reaction_flow(u, reaction, half, q.as_ref(), tol)?;
                let v = diffusion_flow_eigen(op, spec, &w, t_n, tau, q_hat.as_deref(), tol)?;
                reaction_flow(&v, reaction, half, q.as_ref(), tol)
            }
        }
    }

    /// Applies `step` `round(t_end / tau)` times from `t = 0`.
    pub fn run(&self, u0: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.run_with(u0, |_, _| {})
    }

    /// As [`Self::run`], reporting `(steps done, total)` after every step.
    pub fn run_with(&self, u0: &GridFunction<T>, mut progress: impl FnMut(usize, usize)) -> Result<GridFunction<T>> {
        let n = self.cfg.step_count()?;
        let mut u = u0.clone();
        for k in 0..n {
            let t_n = T::from_usize_lossy(k) * self.cfg.tau;
            u = self.step(&u, t_n)?;
            progress(k + 1, n);
        }
        Ok(u)
    }
}

pub fn strang_step<T: Real>(
    state: &GridFunction<T>,
    t_n: T,
    cfg: &SchemeConfig<T>,
    op: &DiscreteOperator<T>,
    problem: &ProblemDef<T>,
) -> Result<GridFunction<T>> {
    Stepper::new(op, problem, *cfg)?.step(state, t_n)
}

pub fn run<T: Real>(
    u0: &GridFunction<T>,
    cfg: &SchemeConfig<T>,
    op: &DiscreteOperator<T>,
    problem: &ProblemDef<T>,
) -> Result<GridFunction<T>> {
    Stepper::new(op, problem, *cfg)?.run(u0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{BoundarySpec, EdgeKinds};
    use crate::flows::diffusion_flow;
    use crate::grid::GridLevel;
    use crate::problems::{catalog, Reaction};
    use std::sync::Arc;

    #[test]
    fn step_count_rounding() {
        let cfg = SchemeConfig::<f64>::new(SchemeMode::Standard, 0.025, 0.1);
        assert_eq!(cfg.step_count().unwrap(), 4);
        let cfg = SchemeConfig::<f64>::new(SchemeMode::Standard, 1.5625e-3, 0.1);
        assert_eq!(cfg.step_count().unwrap(), 64);
        let cfg = SchemeConfig::<f64>::new(SchemeMode::Standard, 0.03, 0.1);
        assert!(matches!(cfg.step_count(), Err(Error::InvalidConfig(_))));
        let cfg = SchemeConfig::<f64>::new(SchemeMode::Standard, 0.0, 0.1);
        assert!(cfg.step_count().is_err());
    }

    #[test]
    fn zero_steps_returns_initial() {
        let p = catalog::<f64>("dirichlet-test1").unwrap();
        let level = GridLevel::new(3).unwrap();
        let op = DiscreteOperator::assemble(level, p.boundary.kinds).unwrap();
        let u0 = p.initial_field(level);
        let cfg = SchemeConfig::new(SchemeMode::Standard, 0.01, 0.0);
        assert_eq!(run(&u0, &cfg, &op, &p).unwrap(), u0);
    }

    #[test]
    fn no_reaction_equals_full_diffusion() {
        let mut p = catalog::<f64>("dirichlet-test1").unwrap();
        p.reaction = Reaction::zero();
        let level = GridLevel::new(4).unwrap();
        let op = DiscreteOperator::assemble(level, p.boundary.kinds).unwrap();
        let u0 = p.initial_field(level);
        let cfg = SchemeConfig::new(SchemeMode::Standard, 0.02, 0.02);
        let split = strang_step(&u0, 0.0, &cfg, &op, &p).unwrap();
        let full = diffusion_flow(&op, &p.boundary, &u0, 0.0, 0.02, None, &cfg.tol).unwrap();
        assert!(split.sub(&full).max_abs() < 1e-8);
    }

    #[test]
    fn direct_f_keeps_constant_equilibrium() {
        let c = 1.3;
        let kinds = EdgeKinds::dirichlet();
        let p = ProblemDef {
            name: "constant".into(),
            reaction: Reaction::quadratic(),
            initial: Arc::new(move |_, _| c),
            boundary: BoundarySpec::new(kinds, move |_, _, _, _| c),
            t_end: 0.1,
        };
        let level = GridLevel::new(4).unwrap();
        let op = DiscreteOperator::assemble(level, kinds).unwrap();
        let u0 = p.initial_field(level);
        let cfg = SchemeConfig::new(SchemeMode::Modified(CorrectionStrategy::DirectF), 0.05, 0.1);
        let stepper = Stepper::new(&op, &p, cfg).unwrap();
        let q = stepper.correction(&u0, 0.0).unwrap().unwrap();
        assert!(q.values().iter().all(|&v| v == c * c));
        let w = reaction_flow(&u0, &p.reaction, cfg.tau, Some(&q), &cfg.tol).unwrap();
        assert!(w.sub(&u0).max_abs() < 1e-12);
    }

    #[test]
    fn zero_correction_is_standard_bit_for_bit() {
        let p = catalog::<f64>("neumann-n2").unwrap();
        let level = GridLevel::new(4).unwrap();
        let op = DiscreteOperator::assemble(level, p.boundary.kinds).unwrap();
        let u0 = p.initial_field(level);
        let std = run(&u0, &SchemeConfig::new(SchemeMode::Standard, 0.025, 0.05), &op, &p).unwrap();
        let zero = run(
            &u0,
            &SchemeConfig::new(SchemeMode::Modified(CorrectionStrategy::Zero), 0.025, 0.05),
            &op,
            &p,
        )
        .unwrap();
        assert_eq!(std.values(), zero.values());
    }

    #[test]
    fn runs_are_deterministic() {
        let p = catalog::<f64>("mixed").unwrap();
        let level = GridLevel::new(4).unwrap();
        let op = DiscreteOperator::assemble(level, p.boundary.kinds).unwrap();
        let u0 = p.initial_field(level);
        let cfg = SchemeConfig::new(SchemeMode::Modified(CorrectionStrategy::ExactElliptic), 0.05, 0.1);
        assert_eq!(run(&u0, &cfg, &op, &p).unwrap(), run(&u0, &cfg, &op, &p).unwrap());
    }
}
