use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use twopoint::disintegration::{decompose, decompose_exact, partners, sample_pairs};
use twopoint::estimator::{bootstrap_ci, BootstrapConfig, Calibration, ThetaMode, DEFAULT_RESAMPLES};
use twopoint::invariants::{verify, VerifyOptions, VerifyReport};
use twopoint::io::{
    parse_alternative, read_pairs, read_samples, to_canonical_json, write_table, ComponentRecord, IoError,
    MeasureSpec,
};
use twopoint::modeling::{validate_curve, CurveReport, FamilySpec, ShapeParam};
use twopoint::optimal::{
    cost_compare, marginal_check, norm_report, CostComparison, CostFunction, CostSpec, MarginalReport, NormReport,
    RatioSide,
};
use twopoint::selfnorm::{asymmetry_certificate, conservative_test, lambda_star, Statistic, TestMode};
use twopoint::ZeroMeanMeasure;

#[derive(Parser)]
#[command(name = "twopoint", version, about = "Two-point zero-mean disintegrations and self-normalized tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical decomposition of a measure (JSON), or seeded (x, r, u) pairs (CSV) with --n.
    Disintegrate {
        #[command(flatten)]
        input: MeasureInput,
        /// Number of pair samples to draw instead of the decomposition.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the invariant suite on a measure.
    Verify {
        #[command(flatten)]
        input: MeasureInput,
        /// Levels probed in [0, m].
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Sample size of the Monte Carlo uniformity checks (needs --seed).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Conservative self-normalized test on pairs (CSV columns x,r or x only).
    Test {
        /// Pair CSV.
        #[arg(long)]
        input: PathBuf,
        /// Measure used to compute r when the CSV has no r column (needs --seed).
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TestKind::Gaussian)]
        mode: TestKind,
        /// Asymmetry level for the Bernoulli bound; taken from --measure when omitted.
        #[arg(long)]
        p: Option<f64>,
        /// Power in the denominator of the Bernoulli statistic; defaults to the optimal value for p.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Tabulate and validate a parametric reciprocating function.
    Model {
        /// Family name (power, power_kink, hyperbolic, cubic_rate), inline JSON spec, or a JSON file.
        #[arg(long)]
        family: String,
        /// Shape for the power family: a number, "inf" or "-inf".
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Number of table rows and validation probes.
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = ModelFormat::Table)]
        format: ModelFormat,
    },
    /// Compare an alternative disintegration with the canonical one.
    Optimal {
        #[command(flatten)]
        input: MeasureInput,
        /// Alternative in the decomposition JSON schema.
        #[arg(long)]
        alt: PathBuf,
        /// Cost spec as inline JSON or a JSON file; repeatable.
        #[arg(long)]
        cost: Vec<String>,
        /// Exponent for the norm comparisons.
        #[arg(long)]
        p: Option<f64>,
        /// Monte Carlo draws for the tilted-law estimates (needs --seed).
        #[arg(long, default_value_t = 0)]
        n: usize,
    },
    /// Bootstrap confidence interval for the mean from a one-column sample CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Use the Bernoulli-type statistic with this power; the width statistic otherwise.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long = "B", default_value_t = DEFAULT_RESAMPLES)]
        b: usize,
        #[arg(long, value_enum, default_value_t = PivotMode::Recompute)]
        mode: PivotMode,
        #[arg(long, value_enum, default_value_t = CalibrationKind::Bootstrap)]
        calibration: CalibrationKind,
        /// Points in the reported theta grid.
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
}

#[derive(Args)]
struct MeasureInput {
    /// Measure JSON, or a one-column sample CSV (by extension).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Gaussian,
    Bernoulli,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelFormat {
    Table,
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum PivotMode {
    Recompute,
    FixedDenominator,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationKind {
    Bootstrap,
    Conservative,
}

/// A run that ends with exit code 1 (invalid input content, failed checks)
/// or 2 (usage: bad arguments, unreadable files).
enum Failure {
    Usage(String),
    Invalid(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn io_failure(e: IoError) -> Failure {
    match e {
        IoError::Measure(_) | IoError::Schema(_) | IoError::BadNumber(_) => invalid(e),
        IoError::Json(_) | IoError::Csv(_) | IoError::Io(_) => usage(e),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(usage)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_measure(path: &Path) -> Result<Result<ZeroMeanMeasure, twopoint::MeasureError>, Failure> {
    let text = read_text(path)?;
    let spec = if is_csv(path) {
        MeasureSpec::Empirical { samples: read_samples(text.as_bytes()).map_err(io_failure)? }
    } else {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    match spec.build() {
        Ok(m) => Ok(Ok(m)),
        Err(IoError::Measure(e)) => Ok(Err(e)),
        Err(e) => Err(io_failure(e)),
    }
}

fn measure(path: &Path) -> Result<ZeroMeanMeasure, Failure> {
    load_measure(path)?.map_err(|e| invalid(format!("{}: {e}", e.kind())))
}

/// Inline JSON, or the contents of a file.
fn json_arg(arg: &str) -> Result<String, Failure> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        read_text(Path::new(arg))
    }
}

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| usage(format!("{what} is stochastic: pass --seed")))
}

struct Sink(Option<PathBuf>);

impl Sink {
    fn write(&self, text: &str) -> Outcome {
        match &self.0 {
            Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
            None => io::stdout().write_all(text.as_bytes()).map_err(usage),
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Outcome {
        self.write(&to_canonical_json(value).map_err(invalid)?)
    }
}

#[derive(Serialize)]
struct DecompositionOut {
    m: f64,
    components: Vec<ComponentOut>,
}

#[derive(Serialize)]
struct ComponentOut {
    a: f64,
    b: f64,
    w: f64,
    /// Rational values when the measure is exact.
    exact: Option<ComponentRecord>,
}

fn disintegrate(path: &Path, n: Option<usize>, seed: Option<u64>, out: &Sink) -> Outcome {
    let mu = measure(path)?;
    if let Some(n) = n {
        let pairs = sample_pairs(&mu, n, need_seed(seed, "pair sampling")?);
        return out.write(&write_table(&["x", "r", "u"], pairs.iter().map(|s| vec![s.x, s.r, s.u])));
    }
    let floats = decompose(&mu).map_err(invalid)?;
    let exact = decompose_exact(&mu).ok();
    let components = floats
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| ComponentOut {
            a: c.law.a,
            b: c.law.b,
            w: c.weight,
            exact: exact.as_ref().map(|d| {
                let c = &d.components[i];
                let text = |q: &twopoint::Rational| twopoint::io::Num::Text(q.to_string());
                ComponentRecord { a: text(&c.law.a), b: text(&c.law.b), w: text(&c.weight) }
            }),
        })
        .collect();
    out.json(&DecompositionOut { m: mu.m(), components })
}

fn run_verify(path: &Path, grid: usize, n: Option<usize>, seed: Option<u64>, out: &Sink) -> Outcome {
    let monte_carlo = match n {
        Some(n) => Some((n, need_seed(seed, "the uniformity check")?)),
        None => None,
    };
    let report = match load_measure(path)? {
        Ok(mu) => verify(&mu, &VerifyOptions { grid, monte_carlo }),
        Err(e) => VerifyReport::construction_error(&e),
    };
    out.json(&report)?;
    if let Some(e) = &report.error {
        return Err(invalid(format!("{}: {}", e.kind, e.message)));
    }
    if report.failed > 0 {
        return Err(invalid(format!("{} of {} checks failed", report.failed, report.failed + report.passed)));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_test(
    input: &Path,
    measure_path: Option<&Path>,
    kind: TestKind,
    p: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    out: &Sink,
) -> Outcome {
    let (xs, rs) = read_pairs(read_text(input)?.as_bytes()).map_err(io_failure)?;
    let mu = measure_path.map(measure).transpose()?;
    let rs = match (rs, &mu) {
        (Some(rs), _) => rs,
        (None, Some(mu)) => partners(mu, &xs, need_seed(seed, "computing r")?).into_iter().map(|s| s.r).collect(),
        (None, None) => return Err(usage("the input has no r column: pass --measure")),
    };
    let mode = match kind {
        TestKind::Gaussian => TestMode::Gaussian,
        TestKind::Bernoulli => {
            let p = match (p, &mu) {
                (Some(p), _) => p,
                (None, Some(mu)) => asymmetry_certificate(mu).map_err(invalid)?.0,
                (None, None) => return Err(usage("bernoulli mode needs --p or --measure")),
            };
            let lambda = match lambda {
                Some(l) => l,
                None => lambda_star(p).map_err(invalid)?,
            };
            TestMode::Bernoulli { p, lambda }
        }
    };
    out.json(&conservative_test(&xs, &rs, mode).map_err(invalid)?)
}

fn family_spec(family: &str, p: Option<String>, c: Option<f64>, alpha: Option<f64>) -> Result<FamilySpec, Failure> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("family {family} needs --{flag}")));
    match family {
        "power" => {
            let p = p.ok_or_else(|| usage("family power needs --p"))?;
            let shape = p.parse::<f64>().map_or(ShapeParam::Tag(p), ShapeParam::Num);
            Ok(FamilySpec::Power { p: shape, c: c.unwrap_or(1.0) })
        }
        "power_kink" => Ok(FamilySpec::PowerKink { kappa: need(c, "c")? }),
        "hyperbolic" => Ok(FamilySpec::Hyperbolic { alpha: need(alpha, "alpha")?, c: c.unwrap_or(1.0) }),
        "cubic_rate" => Ok(FamilySpec::CubicRate { alpha: need(alpha, "alpha")?, c: c.unwrap_or(1.0) }),
        other => serde_json::from_str(&json_arg(other)?).map_err(usage),
    }
}

fn run_model(spec: &FamilySpec, grid: usize, tol: f64, format: ModelFormat, out: &Sink) -> Outcome {
    let curve = spec.build().map_err(invalid)?;
    let report: CurveReport = validate_curve(&curve, grid.max(3), tol, curve.smooth_at_zero());
    match format {
        ModelFormat::Table => out.write(&write_table(&["x", "r"], curve.table(grid).into_iter().map(|(x, r)| vec![x, r])))?,
        ModelFormat::Report => out.json(&report)?,
    }
    if report.passed() {
        Ok(())
    } else {
        Err(invalid(report.violations.join("; ")))
    }
}

#[derive(Serialize)]
struct OptimalOut {
    marginal: MarginalReport,
    costs: Vec<CostComparison>,
    norms: Option<NormReport>,
    ok: bool,
}

fn default_costs() -> Vec<CostSpec> {
    vec![CostSpec::NegAbsDiffPow { p: 1.0 }, CostSpec::RatioPow { p: 1.0, side: RatioSide::Plus }]
}

fn run_optimal(path: &Path, alt: &Path, costs: &[String], p: Option<f64>, n: usize, seed: Option<u64>, out: &Sink) -> Outcome {
    let mu = measure(path)?;
    let alt = parse_alternative(&read_text(alt)?).map_err(io_failure)?;
    let seed = if n > 0 { need_seed(seed, "the Monte Carlo comparison")? } else { 0 };
    let specs = if costs.is_empty() {
        default_costs()
    } else {
        costs.iter().map(|c| serde_json::from_str(&json_arg(c)?).map_err(usage)).collect::<Result<_, _>>()?
    };
    let marginal = marginal_check(&alt, &mu).map_err(invalid)?;
    let mut comparisons = Vec::new();
    if marginal.matches {
        for spec in &specs {
            let k = CostFunction::from_spec(spec).map_err(invalid)?;
            comparisons.push(cost_compare(&alt, &mu, &k, n, seed).map_err(invalid)?);
        }
    }
    let norms = match p {
        Some(p) if marginal.matches => Some(norm_report(&alt, &mu, p).map_err(invalid)?),
        _ => None,
    };
    let ok = marginal.matches && comparisons.iter().all(|c| c.dominated) && norms.as_ref().is_none_or(NormReport::all_hold);
    out.json(&OptimalOut { marginal, costs: comparisons, norms, ok })?;
    if ok {
        Ok(())
    } else {
        Err(invalid("the alternative is not a disintegration of the measure, or a comparison failed"))
    }
}

fn run() -> Outcome {
    let cli = Cli::parse();
    let out = Sink(cli.output);
    match cli.command {
        Command::Disintegrate { input, n } => disintegrate(&input.input, n, cli.seed, &out),
        Command::Verify { input, grid, n } => run_verify(&input.input, grid, n, cli.seed, &out),
        Command::Test { input, measure, mode, p, lambda } => {
            run_test(&input, measure.as_deref(), mode, p, lambda, cli.seed, &out)
        }
        Command::Model { family, p, c, alpha, grid, tol, format } => {
            run_model(&family_spec(&family, p, c, alpha)?, grid, tol, format, &out)
        }
        Command::Optimal { input, alt, cost, p, n } => run_optimal(&input.input, &alt, &cost, p, n, cli.seed, &out),
        Command::Estimate { input, lambda, level, b, mode, calibration, grid } => {
            let seed = need_seed(cli.seed, "estimate")?;
            let xs = read_samples(read_text(&input)?.as_bytes()).map_err(io_failure)?;
            let cfg = BootstrapConfig {
                level,
                b,
                seed,
                grid,
                mode: match mode {
                    PivotMode::Recompute => ThetaMode::Recompute,
                    PivotMode::FixedDenominator => ThetaMode::FixedDenominator,
                },
                calibration: match calibration {
                    CalibrationKind::Bootstrap => Calibration::BootstrapPercentile,
                    CalibrationKind::Conservative => Calibration::Conservative,
                },
            };
            let kind = lambda.map_or(Statistic::W, |lambda| Statistic::Y { lambda });
            out.json(&bootstrap_ci(&xs, kind, &cfg).map_err(invalid)?)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("twopoint: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("twopoint: {msg}");
            ExitCode::from(2)
        }
    }
}
