//! Command-line front end. Flags override a flat `key = value` config file;
//! every failure is reported as one `splitcorrect: <kind>: <message>` line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::correction::{amplification_at_ratio, CorrectionBuilder, CorrectionStrategy, Smoother};
use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::flows::FlowTolerance;
use crate::grid::GridLevel;
use crate::harness::{
    convergence_study, error_norms_on, format_table, halving_sequence, ConvergenceReport, NormRegion, ReferenceCache,
    ReportMeta, StudyOptions,
};
use crate::problems::{catalog, ProblemDef};
use crate::splitting::{CorrectionTime, SchemeConfig, SchemeMode, Stepper, StrangOrder};

pub const DEFAULT_LEVEL: u32 = 7;
pub const DEFAULT_T_END: f64 = 0.1;
pub const DEFAULT_TAU0: f64 = 2.5e-2;
pub const DEFAULT_TAU_COUNT: usize = 5;
pub const DEFAULT_REF_TOL: f64 = 1e-10;
pub const DEFAULT_OUT: &str = "splitcorrect-out";

#[derive(Debug, Parser)]
#[command(name = "splitcorrect", version, about = "Boundary-corrected Strang splitting for 2D diffusion-reaction problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scheme at one step size and write the final field.
    Run(CommonArgs),
    /// Run a step-size halving study and write one CSV per scheme.
    Converge(CommonArgs),
    /// Write the correction q_n built from the scheme state at --time.
    CorrectionDump(CommonArgs),
    /// Write the moving-average amplification curve at a fixed n/(M+1).
    Amplification(AmpArgs),
}

/// Flags shared by the scheme-running subcommands; unset flags fall back to
/// the config file and then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Comma-separated halving sequence, e.g. `0.025,0.0125`.
    #[arg(long)]
    pub tau_list: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated schemes: `standard`, `modified` (uses --strategy) or a
    /// strategy label such as `exact-elliptic` or `half-vcycle-gauss-seidel-nu20`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// exact-elliptic | direct-f | grid-average | half-vcycle | zero
    #[arg(long)]
    pub strategy: Option<String>,
    /// jacobi | gauss-seidel
    #[arg(long)]
    pub smoother: Option<String>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub coarsest_s: Option<u32>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative tolerance of the reference integrator.
    #[arg(long)]
    pub ref_tol: Option<f64>,
    /// diffusion-outer | reaction-outer
    #[arg(long)]
    pub order: Option<String>,
    /// start | midpoint: time of the boundary data inside q_n.
    #[arg(long)]
    pub correction_time: Option<String>,
    /// interior | unknowns: nodes entering the error norms.
    #[arg(long)]
    pub norms: Option<String>,
    /// correction-dump: time of the dumped correction.
    #[arg(long)]
    pub time: Option<f64>,
    /// run: also write a one-row error report against the reference.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AmpArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid parameter M (nodes per direction minus one).
    #[arg(long)]
    pub size: Option<usize>,
    /// Fixed n/(M+1), in [0, 0.5].
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved and validated configuration of a scheme-running command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub level: u32,
    pub t_end: f64,
    pub tau: Option<f64>,
    pub tau_list: Option<Vec<f64>>,
    pub schemes: Vec<SchemeMode<f64>>,
    pub strategy: CorrectionStrategy<f64>,
    pub out: PathBuf,
    pub ref_tol: f64,
    pub order: StrangOrder,
    pub correction_time: CorrectionTime,
    pub norms: NormRegion,
    pub time: Option<f64>,
    pub reference: bool,
}

/// Reads a flat config file. `[section]` headers are accepted and ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key = value", n + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", p.display())))?;
            parse_config_file(&text)
        }
    }
}

fn check_keys(map: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidConfig(format!("unknown config key '{k}'"))),
        None => Ok(()),
    }
}

fn parse_num<V: std::str::FromStr>(field: &str, s: &str) -> Result<V> {
    s.trim().parse().map_err(|_| Error::InvalidConfig(format!("{field}: cannot parse '{s}'")))
}

fn merged<V: std::str::FromStr + Clone>(
    field: &str,
    flag: &Option<V>,
    file: &BTreeMap<String, String>,
) -> Result<Option<V>> {
    match (flag, file.get(field)) {
        (Some(v), _) => Ok(Some(v.clone())),
        (None, Some(s)) => parse_num(field, s).map(Some),
        (None, None) => Ok(None),
    }
}

pub fn parse_tau_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| parse_num("tau-list", t)).collect()
}

pub fn parse_smoother(name: &str, omega: Option<f64>) -> Result<Smoother<f64>> {
    match name {
        "jacobi" => Ok(omega.map_or_else(Smoother::jacobi, |omega| Smoother::Jacobi { omega })),
        "gauss-seidel" | "gs" => Ok(Smoother::GaussSeidel),
        other => Err(Error::InvalidConfig(format!("smoother: unknown '{other}'"))),
    }
}

/// Parses a strategy name or a full half-vcycle label
/// (`half-vcycle-<smoother>-nu<N>[-s<S>]`); bare `half-vcycle` takes `hvc`.
pub fn parse_strategy(name: &str, hvc: CorrectionStrategy<f64>) -> Result<CorrectionStrategy<f64>> {
    let name = name.strip_prefix("modified-").unwrap_or(name);
    match name {
        "exact-elliptic" => return Ok(CorrectionStrategy::ExactElliptic),
        "direct-f" => return Ok(CorrectionStrategy::DirectF),
        "grid-average" => return Ok(CorrectionStrategy::GridAverage),
        "zero" => return Ok(CorrectionStrategy::Zero),
        "half-vcycle" => return Ok(hvc),
        _ => {}
    }
    let bad = || Error::InvalidConfig(format!("strategy: unknown '{name}'"));
    let rest = name.strip_prefix("half-vcycle-").ok_or_else(bad)?;
    let (smoother_name, tail) = rest.split_once("-nu").ok_or_else(bad)?;
    let (nu, s) = match tail.split_once("-s") {
        Some((nu, s)) => (nu, Some(parse_num::<u32>("coarsest-s", s)?)),
        None => (tail, None),
    };
    let omega = match hvc {
        CorrectionStrategy::HalfVCycle { smoother: Smoother::Jacobi { omega }, .. } => Some(omega),
        _ => None,
    };
    Ok(CorrectionStrategy::HalfVCycle {
        smoother: parse_smoother(smoother_name, omega)?,
        nu: parse_num("nu", nu)?,
        coarsest_s: s,
    })
}

pub fn parse_scheme(name: &str, strategy: CorrectionStrategy<f64>) -> Result<SchemeMode<f64>> {
    match name {
        "standard" => Ok(SchemeMode::Standard),
        "modified" => Ok(SchemeMode::Modified(strategy)),
        other => parse_strategy(other, strategy).map(SchemeMode::Modified),
    }
}

const COMMON_KEYS: [&str; 19] = [
    "problem",
    "level",
    "tau",
    "tau-list",
    "t-end",
    "scheme",
    "strategy",
    "smoother",
    "nu",
    "omega",
    "coarsest-s",
    "out",
    "ref-tol",
    "order",
    "correction-time",
    "norms",
    "time",
    "reference",
    "config",
];

impl RunConfig {
    /// Merges flags over the config file and validates every field against the
    /// problem; nothing is computed here.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = load_config(args.config.as_deref())?;
        check_keys(&file, &COMMON_KEYS)?;
        let text = |field: &str, flag: &Option<String>| flag.clone().or_else(|| file.get(field).cloned());

        let problem = text("problem", &args.problem).unwrap_or_else(|| "dirichlet-test1".into());
        let def = catalog::<f64>(&problem)?;
        let level = merged("level", &args.level, &file)?.unwrap_or(DEFAULT_LEVEL);
        let grid = GridLevel::new(level)?;
        let t_end = merged("t-end", &args.t_end, &file)?.unwrap_or(DEFAULT_T_END);
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t-end: must be >= 0, got {t_end}")));
        }
        let tau = merged("tau", &args.tau, &file)?;
        let tau_list = text("tau-list", &args.tau_list).map(|s| parse_tau_list(&s)).transpose()?;

        let nu = merged("nu", &args.nu, &file)?.unwrap_or(crate::correction::DEFAULT_NU);
        let omega = merged("omega", &args.omega, &file)?;
        let smoother = parse_smoother(&text("smoother", &args.smoother).unwrap_or_else(|| "jacobi".into()), omega)?;
        let coarsest_s = merged("coarsest-s", &args.coarsest_s, &file)?;
        let hvc = CorrectionStrategy::HalfVCycle { smoother, nu, coarsest_s };
        let strategy = parse_strategy(&text("strategy", &args.strategy).unwrap_or_else(|| "exact-elliptic".into()), hvc)?;

        let schemes = match text("scheme", &args.scheme) {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_scheme(s, strategy))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        for mode in &schemes {
            if let SchemeMode::Modified(s) = mode {
                s.validate(grid, def.boundary.kinds)?;
            }
        }

        let ref_tol = merged("ref-tol", &args.ref_tol, &file)?.unwrap_or(DEFAULT_REF_TOL);
        if !(ref_tol > 0.0 && ref_tol < 1.0) {
            return Err(Error::InvalidConfig(format!("ref-tol: must lie in (0, 1), got {ref_tol}")));
        }
        let order = text("order", &args.order).map(|s| StrangOrder::parse(&s)).transpose()?.unwrap_or_default();
        let correction_time = text("correction-time", &args.correction_time)
            .map(|s| CorrectionTime::parse(&s))
            .transpose()?
            .unwrap_or_default();
        let norms = text("norms", &args.norms).map(|s| NormRegion::parse(&s)).transpose()?.unwrap_or_default();
        let time = merged("time", &args.time, &file)?;
        let reference = args.reference || file.get("reference").is_some_and(|v| v == "true");
        let out = args.out.clone().or_else(|| file.get("out").map(PathBuf::from)).unwrap_or_else(|| DEFAULT_OUT.into());

        Ok(Self {
            problem,
            level,
            t_end,
            tau,
            tau_list,
            schemes,
            strategy,
            out,
            ref_tol,
            order,
            correction_time,
            norms,
            time,
            reference,
        })
    }

    pub fn grid(&self) -> Result<GridLevel> {
        GridLevel::new(self.level)
    }

    pub fn problem_def(&self) -> Result<ProblemDef<f64>> {
        catalog(&self.problem)
    }

    pub fn ref_tolerance(&self) -> FlowTolerance<f64> {
        FlowTolerance::with_rel_tol(self.ref_tol)
    }

    pub fn scheme_config(&self, mode: SchemeMode<f64>, tau: f64, t_end: f64) -> SchemeConfig<f64> {
        SchemeConfig::new(mode, tau, t_end).with_order(self.order).with_correction_time(self.correction_time)
    }

    pub fn study_options(&self) -> StudyOptions<f64> {
        StudyOptions {
            flow_tol: FlowTolerance::default(),
            order: self.order,
            correction_time: self.correction_time,
            norms: self.norms,
        }
    }

    /// Schemes of a convergence study: the configured list, or standard plus
    /// every modified strategy that suits the problem's boundary kinds.
    pub fn study_schemes(&self, def: &ProblemDef<f64>) -> Vec<SchemeMode<f64>> {
        if !self.schemes.is_empty() {
            return self.schemes.clone();
        }
        let mut v = vec![
            SchemeMode::Standard,
            SchemeMode::Modified(CorrectionStrategy::ExactElliptic),
            SchemeMode::Modified(CorrectionStrategy::DirectF),
        ];
        if def.boundary.kinds.all_dirichlet() {
            v.push(SchemeMode::Modified(CorrectionStrategy::GridAverage));
        } else {
            v.push(SchemeMode::Modified(CorrectionStrategy::half_vcycle(Smoother::jacobi(), crate::correction::DEFAULT_NU)));
        }
        v
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn fmt_time(t: f64) -> String {
    format!("{t:e}")
}

pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let def = cfg.problem_def()?;
    let level = cfg.grid()?;
    let tau = cfg.tau.ok_or_else(|| Error::InvalidConfig("tau: run needs --tau".into()))?;
    let mode = match cfg.schemes.as_slice() {
        [] => SchemeMode::Standard,
        [one] => *one,
        _ => return Err(Error::InvalidConfig("scheme: run takes a single scheme".into())),
    };
    let sc = cfg.scheme_config(mode, tau, cfg.t_end);
    sc.step_count()?;
    let op = DiscreteOperator::assemble(level, def.boundary.kinds)?;
    let stepper = Stepper::new(&op, &def, sc)?;
    let cache = ReferenceCache::from_env();
    let ref_tol = cfg.ref_tolerance();
    let reference = if cfg.reference {
        Some(cache.get_or_compute(&def, level, cfg.t_end, &ref_tol)?)
    } else {
        cache.lookup(&def.name, level, cfg.t_end, &ref_tol)
    };

    let u = stepper.run_with(&def.initial_field(level), |k, n| {
        if k == n || k % 64 == 0 {
            eprint!("\rstep {k}/{n}");
            if k == n {
                eprintln!();
            }
        }
    })?;

    create_out(&cfg.out)?;
    let label = mode.label();
    let mut written = Vec::new();
    let field = cfg.out.join(format!("{}_{}_tau{}.csv", def.name, label, fmt_time(tau)));
    let mut w = BufWriter::new(
        fs::File::create(&field).map_err(|e| Error::Io(format!("cannot write {}: {e}", field.display())))?,
    );
    u.write_csv(&mut w)?;
    w.flush()?;
    written.push(field);

    if let Some(r) = reference {
        let (l2, linf) = error_norms_on(&u.sub(&r), &def.boundary.kinds, cfg.norms);
        let meta = ReportMeta { problem: def.name.clone(), level: cfg.level, t_end: cfg.t_end };
        let report = ConvergenceReport::from_errors(label.clone(), meta, &[(tau, linf, l2)])?;
        let path = cfg.out.join(format!("{}_{}_tau{}_error.csv", def.name, label, fmt_time(tau)));
        write_file(&path, &report.to_csv())?;
        println!("{label}: tau = {tau:e}, l_inf = {linf:.6e}, l2 = {l2:.6e}");
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let def = cfg.problem_def()?;
    let level = cfg.grid()?;
    let taus = match (&cfg.tau_list, cfg.tau) {
        (Some(list), _) => list.clone(),
        (None, Some(tau)) => vec![tau],
        (None, None) => halving_sequence(DEFAULT_TAU0, DEFAULT_TAU_COUNT),
    };
    crate::harness::check_halving(&taus)?;
    for &tau in &taus {
        SchemeConfig::new(SchemeMode::<f64>::Standard, tau, cfg.t_end).step_count()?;
    }
    let schemes = cfg.study_schemes(&def);
    let reference = ReferenceCache::from_env().get_or_compute(&def, level, cfg.t_end, &cfg.ref_tolerance())?;
    let reports = convergence_study(&def, level, &schemes, &taus, cfg.t_end, &reference, &cfg.study_options())?;

    create_out(&cfg.out)?;
    let mut written = Vec::new();
    for r in &reports {
        let path = cfg.out.join(format!("{}_{}.csv", def.name, r.scheme));
        write_file(&path, &r.to_csv())?;
        written.push(path);
    }
    print!("{}", format_table(&reports));
    Ok(written)
}

pub fn cmd_correction_dump(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let def = cfg.problem_def()?;
    let level = cfg.grid()?;
    let strategy = match cfg.schemes.as_slice() {
        [] => cfg.strategy,
        [SchemeMode::Modified(s)] => *s,
        _ => return Err(Error::InvalidConfig("scheme: correction-dump takes one modified scheme".into())),
    };
    strategy.validate(level, def.boundary.kinds)?;
    let t = cfg.time.unwrap_or(cfg.t_end);
    let mode = SchemeMode::Modified(strategy);
    let u0 = def.initial_field(level);
    let op = DiscreteOperator::assemble(level, def.boundary.kinds)?;
    let u = if t > 0.0 {
        let tau = cfg.tau.unwrap_or(DEFAULT_TAU0 / 16.0);
        let sc = cfg.scheme_config(mode, tau, t);
        sc.step_count()?;
        Stepper::new(&op, &def, sc)?.run(&u0)?
    } else if t == 0.0 {
        u0
    } else {
        return Err(Error::InvalidConfig(format!("time: must be >= 0, got {t}")));
    };
    let builder = CorrectionBuilder::new(strategy, level, def.boundary.kinds)?;
    let q = builder.build(&def.boundary, &def.reaction, &u, t)?;

    create_out(&cfg.out)?;
    let path = cfg.out.join(format!("{}_q_{}_t{}.csv", def.name, strategy.label(), fmt_time(t)));
    let mut w =
        BufWriter::new(fs::File::create(&path).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?);
    q.write_csv(&mut w)?;
    w.flush()?;
    Ok(vec![path])
}

/// Rows `(m/(M+1), rho)` for `m = 0..=M` at the fixed ratio `n/(M+1)`.
pub fn amplification_curve(size: usize, ratio: f64) -> Result<Vec<(f64, f64)>> {
    if size == 0 {
        return Err(Error::InvalidConfig("size: must be >= 1".into()));
    }
    if !(0.0..=0.5).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("ratio: must lie in [0, 0.5], got {ratio}")));
    }
    let d = (size + 1) as f64;
    Ok((0..=size)
        .map(|m| {
            let rm = m as f64 / d;
            (rm, amplification_at_ratio(rm, ratio))
        })
        .collect())
}

pub fn cmd_amplification(args: &AmpArgs) -> Result<Vec<PathBuf>> {
    let file = load_config(args.config.as_deref())?;
    check_keys(&file, &["size", "ratio", "out", "config"])?;
    let size = merged("size", &args.size, &file)?.unwrap_or(1usize << DEFAULT_LEVEL);
    let ratio = merged("ratio", &args.ratio, &file)?.unwrap_or(0.25);
    let curve = amplification_curve(size, ratio)?;
    let out = args.out.clone().or_else(|| file.get("out").map(PathBuf::from)).unwrap_or_else(|| DEFAULT_OUT.into());
    create_out(&out)?;
    let mut csv = String::from("m_ratio,rho\n");
    for (rm, rho) in curve {
        csv.push_str(&format!("{rm:.16e},{rho:.16e}\n"));
    }
    let path = out.join(format!("amplification_M{size}_n{ratio}.csv"));
    write_file(&path, &csv)?;
    Ok(vec![path])
}

/// Short machine-readable tag for an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGrid(_) => "invalid-grid",
        Error::SingularSystem { .. } => "singular-system",
        Error::StepFailure(_) => "step-failure",
        Error::BlowUp { .. } => "blow-up",
        Error::UnknownProblem(_) => "unknown-problem",
        Error::InvalidStrategy(_) => "invalid-strategy",
        Error::InvalidConfig(_) => "invalid-config",
        Error::DegenerateError(_) => "degenerate-error",
        Error::Io(_) => "io",
    }
}

/// 2 for configuration problems, 1 for failures during computation.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidGrid(_) | Error::UnknownProblem(_) | Error::InvalidStrategy(_) | Error::InvalidConfig(_) => 2,
        _ => 1,
    }
}

pub fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Run(a) => cmd_run(&RunConfig::resolve(a)?),
        Command::Converge(a) => cmd_converge(&RunConfig::resolve(a)?),
        Command::CorrectionDump(a) => cmd_correction_dump(&RunConfig::resolve(a)?),
        Command::Amplification(a) => cmd_amplification(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            eprintln!("splitcorrect: usage: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("splitcorrect: {}: {}", error_kind(&e), e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# study\n[run]\nproblem = mixed\nt_end=0.05 # short\n\n").unwrap();
        assert_eq!(m.get("problem").map(String::as_str), Some("mixed"));
        assert_eq!(m.get("t-end").map(String::as_str), Some("0.05"));
        assert!(parse_config_file("just words").is_err());
    }

    #[test]
    fn strategy_labels_round_trip() {
        let hvc = CorrectionStrategy::half_vcycle(Smoother::jacobi(), 3);
        for s in [
            CorrectionStrategy::ExactElliptic,
            CorrectionStrategy::DirectF,
            CorrectionStrategy::GridAverage,
            CorrectionStrategy::Zero,
            CorrectionStrategy::half_vcycle(Smoother::GaussSeidel, 20),
            CorrectionStrategy::HalfVCycle { smoother: Smoother::jacobi(), nu: 5, coarsest_s: Some(2) },
        ] {
            assert_eq!(parse_strategy(&s.label(), hvc).unwrap(), s);
            assert_eq!(parse_scheme(&SchemeMode::Modified(s).label(), hvc).unwrap(), SchemeMode::Modified(s));
        }
        assert_eq!(parse_strategy("half-vcycle", hvc).unwrap(), hvc);
        assert!(parse_strategy("multigrid", hvc).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "problem = mixed\nlevel = 4\nnu = 9\nsmoother = gauss-seidel\nstrategy = half-vcycle\n").unwrap();
        let args = CommonArgs { config: Some(path.clone()), level: Some(5), ..Default::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.problem, "mixed");
        assert_eq!(cfg.level, 5);
        assert_eq!(cfg.strategy, CorrectionStrategy::HalfVCycle { smoother: Smoother::GaussSeidel, nu: 9, coarsest_s: None });

        fs::write(&path, "colour = red\n").unwrap();
        let err = RunConfig::resolve(&CommonArgs { config: Some(path), ..Default::default() }).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn grid_average_rejected_on_neumann() {
        let args = CommonArgs {
            problem: Some("neumann-n1".into()),
            scheme: Some("grid-average".into()),
            ..Default::default()
        };
        let err = RunConfig::resolve(&args).unwrap_err();
        assert!(matches!(err, Error::InvalidStrategy(_)));
        assert!(err.to_string().contains("slope"));
    }

    #[test]
    fn amplification_curve_values() {
        let c = amplification_curve(127, 0.25).unwrap();
        assert_eq!(c.len(), 128);
        assert!((c[0].1 - 0.6).abs() < 1e-15);
        assert_eq!(amplification_curve(10, 0.0).unwrap()[0].1, 1.0);
        assert!(amplification_curve(10, 0.6).is_err());
    }
}
