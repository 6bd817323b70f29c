//! Command-line front end: calibration, ARL tables, data monitoring,
//! covariance self-checks, and test-data generation.
//!
//! Exit codes: 0 success, 2 invalid input or malformed data, 3 calibration
//! failure (no bracketing limit found).

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::chart::{self, ChartConfig};
use crate::error::{Error, Result};
use crate::estimate;
use crate::model::{build_model, CoefMatrix, ErrorCovariance, ProcessModel, SampleMatrix};
use crate::simulate::{
    self, replication_rng, ShiftScenario, SimulationConfig, DEFAULT_SEED,
};
use crate::tables::{self, TableRow};

/// Monitoring of multivariate simple linear profiles.
#[derive(Debug, Parser)]
#[command(name = "mslp", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the control-limit multiplier for a target in-control ARL.
    Calibrate(CalibrateArgs),
    /// Estimate ARLs for a built-in grid or a custom scenario file.
    Arl(ArlArgs),
    /// Run the chart over observed samples, emitting one JSON record each.
    Monitor(MonitorArgs),
    /// Cross-check analytic estimator covariances against simulation.
    CheckCov(CheckCovArgs),
    /// Generate synthetic sample data in the monitor input format.
    SimulateData(SimulateDataArgs),
}

/// Options shared by every subcommand that needs a process model.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON model file; defaults to the built-in bivariate reference process
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Error correlation for the built-in reference process
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 200.0)]
    pub target_arl: f64,
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Calibrate the single-sample (Shewhart) multiplier instead
    #[arg(long)]
    pub shewhart: bool,
}

#[derive(Debug, Args)]
pub struct ArlArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Built-in grid id (1..=8); mutually exclusive with --scenario-file
    #[arg(long, conflicts_with = "scenario_file")]
    pub table: Option<u8>,
    /// JSON file holding one scenario or a list of scenarios
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 3.6233)]
    pub l_b: f64,
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_steps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// CSV output path (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Input CSV: sample_id,x,y1,...,yp with rows grouped by sample_id
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 3.6233)]
    pub l_b: f64,
    /// Use the asymptotic control limit from the first sample on
    #[arg(long)]
    pub steady_state_limit: bool,
    /// JSONL output path (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckCovArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateDataArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Optional JSON shift scenario applied to the generating process
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// CSV output path (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// On-disk model description.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub x: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl ModelSpec {
    pub fn into_model(self) -> Result<ProcessModel> {
        build_model(
            self.x,
            CoefMatrix::new(self.intercepts, self.slopes)?,
            ErrorCovariance::new(self.sigma)?,
        )
    }
}

/// One line of monitor output.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MonitorRecord {
    pub sample_id: String,
    pub v: f64,
    pub limit: f64,
    pub signal: bool,
    pub worst_point: usize,
    pub z0: f64,
    pub z1: f64,
    pub b0_hat: Vec<f64>,
    pub b1_hat: Vec<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| {
        Error::InvalidParameter(format!("cannot open {}: {e}", path.display()))
    })?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        Error::InvalidParameter(format!("cannot parse {}: {e}", path.display()))
    })
}

/// Reference bivariate process: x = 2,4,6,8, y1 = 3 + 2x, y2 = 2 + x,
/// unit variances, correlation `rho`.
pub fn reference_model(rho: f64) -> Result<ProcessModel> {
    build_model(
        vec![2.0, 4.0, 6.0, 8.0],
        CoefMatrix::new(vec![3.0, 2.0], vec![2.0, 1.0])?,
        ErrorCovariance::new(vec![vec![1.0, rho], vec![rho, 1.0]])?,
    )
}

fn load_model(args: &ModelArgs) -> Result<ProcessModel> {
    match &args.model {
        Some(path) => read_json::<ModelSpec>(path)?.into_model(),
        None => reference_model(args.rho),
    }
}

/// Scenario file contents: a single scenario or a list.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    One(ShiftScenario),
    Many(Vec<ShiftScenario>),
}

fn load_scenarios(path: &Path) -> Result<Vec<ShiftScenario>> {
    match read_json::<ScenarioFile>(path)? {
        ScenarioFile::One(s) => Ok(vec![s]),
        ScenarioFile::Many(v) if !v.is_empty() => Ok(v),
        ScenarioFile::Many(_) => {
            Err(Error::InvalidParameter("scenario file holds an empty list".into()))
        }
    }
}

/// Six significant digits, for human-facing and CSV numbers.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

fn writer_for(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| {
                Error::InvalidParameter(format!("cannot create {}: {e}", path.display()))
            })?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Arl(args) => cmd_arl(args),
        Command::Monitor(args) => cmd_monitor(args),
        Command::CheckCov(args) => cmd_check_cov(args),
        Command::SimulateData(args) => cmd_simulate_data(args),
    }
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let config = SimulationConfig {
        replications: args.reps,
        max_steps: 20_000,
        seed: args.seed,
    };
    if args.shewhart {
        let m_alpha = simulate::calibrate_shewhart(&model, args.target_arl, &config)?;
        println!("m_alpha = {}", fmt_sig(m_alpha));
        let est = simulate::estimate_arl_shewhart(
            &model,
            &ShiftScenario::in_control(model.p()),
            &config,
            m_alpha,
        )?;
        println!(
            "in-control ARL = {} (se {}, {} reps, {} censored)",
            fmt_sig(est.mean_rl),
            fmt_sig(est.std_err),
            est.replications,
            est.censored
        );
    } else {
        let (l_b, est) =
            simulate::calibrate_limit_detailed(&model, args.theta, args.target_arl, &config)?;
        println!("l_b = {}", fmt_sig(l_b));
        println!(
            "in-control ARL = {} (se {}, {} reps, {} censored)",
            fmt_sig(est.mean_rl),
            fmt_sig(est.std_err),
            est.replications,
            est.censored
        );
    }
    Ok(())
}

const ARL_CSV_HEADER: &str =
    "table,kind,rho,lambda1,lambda2,mean_rl,std_err,replications,censored,published_arl,reference_arl";

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

fn cmd_arl(args: ArlArgs) -> Result<()> {
    let chart_config = ChartConfig::new(args.theta, args.l_b)?;
    let config = SimulationConfig {
        replications: args.reps,
        max_steps: args.max_steps,
        seed: args.seed,
    };
    let mut out = writer_for(&args.out)?;

    match (args.table, &args.scenario_file) {
        (Some(id), _) => {
            let base = load_model(&args.model)?;
            let rows = tables::table_rows(id)?;
            writeln!(out, "{ARL_CSV_HEADER}").map_err(io_err)?;
            for (idx, row) in rows.iter().enumerate() {
                let model = tables::with_correlation(&base, row.rho)?;
                let est = simulate::estimate_arl_streamed(
                    &model,
                    &row.scenario,
                    &config,
                    &chart_config,
                    (idx as u64) << 32,
                )?;
                write_table_row(&mut out, id, row, &est)?;
            }
        }
        (None, Some(path)) => {
            let model = load_model(&args.model)?;
            let scenarios = load_scenarios(path)?;
            writeln!(out, "{ARL_CSV_HEADER}").map_err(io_err)?;
            for (idx, sc) in scenarios.iter().enumerate() {
                let est = simulate::estimate_arl_streamed(
                    &model,
                    sc,
                    &config,
                    &chart_config,
                    (idx as u64) << 32,
                )?;
                writeln!(
                    out,
                    ",custom,,,,{},{},{},{},,",
                    fmt_sig(est.mean_rl),
                    fmt_sig(est.std_err),
                    est.replications,
                    est.censored
                )
                .map_err(io_err)?;
            }
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "either --table or --scenario-file is required".into(),
            ));
        }
    }
    out.flush().map_err(io_err)
}

fn write_table_row(
    out: &mut dyn Write,
    id: u8,
    row: &TableRow,
    est: &simulate::ArlEstimate,
) -> Result<()> {
    writeln!(
        out,
        "{id},{},{},{},{},{},{},{},{},{},{}",
        row.kind.as_str(),
        fmt_sig(row.rho),
        fmt_sig(row.lambda1),
        opt_cell(row.lambda2),
        fmt_sig(est.mean_rl),
        fmt_sig(est.std_err),
        est.replications,
        est.censored,
        opt_cell(row.published_arl),
        opt_cell(row.reference_arl),
    )
    .map_err(io_err)
}

fn io_err(e: io::Error) -> Error {
    Error::InvalidParameter(format!("i/o error: {e}"))
}

/// Parsed monitor input: samples in file order.
struct MonitorInput {
    samples: Vec<(String, SampleMatrix)>,
}

fn parse_monitor_csv(path: &Path, model: &ProcessModel) -> Result<MonitorInput> {
    let file = File::open(path).map_err(|e| {
        Error::InvalidParameter(format!("cannot open {}: {e}", path.display()))
    })?;
    let n = model.n();
    let p = model.p();
    let x = model.design().x();

    let mut samples: Vec<(String, SampleMatrix)> = Vec::new();
    let mut current: Option<(String, Vec<Vec<f64>>)> = None;
    let mut line_no = 0usize;

    let fail = |line_no: usize, msg: String| -> Error {
        Error::InvalidParameter(format!("{}:{line_no}: {msg}", path.display()))
    };

    let flush = |cur: Option<(String, Vec<Vec<f64>>)>,
                     samples: &mut Vec<(String, SampleMatrix)>,
                     line_no: usize|
     -> Result<()> {
        if let Some((id, rows)) = cur {
            if rows.len() != n {
                return Err(fail(
                    line_no,
                    format!("sample '{id}' has {} rows, expected {n}", rows.len()),
                ));
            }
            samples.push((id, SampleMatrix::from_rows(rows)?));
        }
        Ok(())
    };

    for line in BufReader::new(file).lines() {
        line_no += 1;
        let line = line.map_err(io_err)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if line_no == 1 && fields.first() == Some(&"sample_id") {
            continue; // header
        }
        if fields.len() != p + 2 {
            return Err(fail(
                line_no,
                format!("expected {} fields (sample_id,x,y1..y{p}), got {}", p + 2, fields.len()),
            ));
        }
        let id = fields[0].to_string();
        let xv: f64 = fields[1]
            .parse()
            .map_err(|_| fail(line_no, format!("bad x value '{}'", fields[1])))?;
        let ys: Vec<f64> = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| fail(line_no, format!("bad response value '{f}'")))
            })
            .collect::<Result<_>>()?;

        let start_new = current.as_ref().map_or(true, |(cid, _)| *cid != id);
        if start_new {
            flush(current.take(), &mut samples, line_no)?;
            current = Some((id, Vec::with_capacity(n)));
        }
        let (_, rows) = current.as_mut().expect("just set");
        let i = rows.len();
        if i >= n {
            return Err(fail(line_no, format!("sample has more than {n} rows")));
        }
        if xv != x[i] {
            return Err(fail(
                line_no,
                format!("x value {xv} does not match design point {} at row {i}", x[i]),
            ));
        }
        rows.push(ys);
    }
    flush(current.take(), &mut samples, line_no)?;
    Ok(MonitorInput { samples })
}

fn cmd_monitor(args: MonitorArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let chart_config = ChartConfig::new(args.theta, args.l_b)?
        .with_steady_state_limit(args.steady_state_limit);
    let sb = estimate::sigma_b(model.sigma(), model.design())?;
    let input = parse_monitor_csv(&args.data, &model)?;
    let mut out = writer_for(&args.out)?;

    let mut state = chart::ewma_init(&model);
    for (id, sample) in &input.samples {
        let fitted = estimate::fit_profiles(sample, model.design())?;
        let (next, verdict) = chart::process_sample(&state, sample, &model, &sb, &chart_config)?;
        state = next;
        let record = MonitorRecord {
            sample_id: id.clone(),
            v: verdict.v,
            limit: verdict.limit,
            signal: verdict.signal,
            worst_point: verdict.worst_point,
            z0: state.z.b0_sum,
            z1: state.z.b1_sum,
            b0_hat: fitted.intercepts.clone(),
            b1_hat: fitted.slopes.clone(),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| Error::InvalidParameter(format!("serialize: {e}")))?;
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Monte Carlo check of every pairwise estimator covariance and of the
/// assembled summed-coefficient covariance.
fn cmd_check_cov(args: CheckCovArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let reps = args.reps.max(2);
    let p = model.p();
    let design = model.design();

    // accumulate intercept/slope estimates per response
    let dim = 2 * p; // layout: [b0_1..b0_p, b1_1..b1_p]
    let mut sums = vec![0.0; dim];
    let mut cross = vec![0.0; dim * dim];
    let (mut s0_sum, mut s1_sum, mut s00, mut s11, mut s01) = (0.0, 0.0, 0.0, 0.0, 0.0);

    let mut rng = replication_rng(args.seed, 0);
    for _ in 0..reps {
        let sample = simulate::generate_sample(&model, &mut rng);
        let fitted = estimate::fit_profiles(&sample, design)?;
        let mut v = Vec::with_capacity(dim);
        v.extend_from_slice(&fitted.intercepts);
        v.extend_from_slice(&fitted.slopes);
        for a in 0..dim {
            sums[a] += v[a];
            for b in 0..dim {
                cross[a * dim + b] += v[a] * v[b];
            }
        }
        let s = estimate::coef_sum(&fitted);
        s0_sum += s.b0_sum;
        s1_sum += s.b1_sum;
        s00 += s.b0_sum * s.b0_sum;
        s11 += s.b1_sum * s.b1_sum;
        s01 += s.b0_sum * s.b1_sum;
    }

    let nf = reps as f64;
    let emp_cov = |a: usize, b: usize| -> f64 {
        (cross[a * dim + b] - sums[a] * sums[b] / nf) / (nf - 1.0)
    };
    let emp_var = |a: usize| emp_cov(a, a);

    // standard error of an empirical covariance under joint normality
    let cov_se =
        |va: f64, vb: f64, cab: f64| -> f64 { ((va * vb + cab * cab) / nf).sqrt() };

    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut check = |label: String, analytic: f64, empirical: f64, se: f64| {
        checks += 1;
        let ok = (empirical - analytic).abs() <= 4.0 * se;
        if !ok {
            failures += 1;
        }
        println!(
            "{} analytic={} empirical={} se={} {}",
            label,
            fmt_sig(analytic),
            fmt_sig(empirical),
            fmt_sig(se),
            if ok { "ok" } else { "FAIL" }
        );
    };

    for u in 0..p {
        for v in u..p {
            let suv = model.sigma().entry(u, v);
            let a00 = estimate::cov_intercepts(suv, design);
            let a11 = estimate::cov_slopes(suv, design);
            let a01 = estimate::cov_intercept_slope(suv, design);
            let se00 = cov_se(emp_var(u), emp_var(v), emp_cov(u, v));
            let se11 = cov_se(emp_var(p + u), emp_var(p + v), emp_cov(p + u, p + v));
            let se01 = cov_se(emp_var(u), emp_var(p + v), emp_cov(u, p + v));
            check(format!("cov(b0_{u},b0_{v})"), a00, emp_cov(u, v), se00);
            check(format!("cov(b1_{u},b1_{v})"), a11, emp_cov(p + u, p + v), se11);
            check(format!("cov(b0_{u},b1_{v})"), a01, emp_cov(u, p + v), se01);
        }
    }

    let sb = estimate::sigma_b(model.sigma(), design)?;
    let e_s00 = (s00 - s0_sum * s0_sum / nf) / (nf - 1.0);
    let e_s11 = (s11 - s1_sum * s1_sum / nf) / (nf - 1.0);
    let e_s01 = (s01 - s0_sum * s1_sum / nf) / (nf - 1.0);
    check("sum var(b0)".into(), sb.s11, e_s00, cov_se(e_s00, e_s00, e_s00));
    check("sum var(b1)".into(), sb.s22, e_s11, cov_se(e_s11, e_s11, e_s11));
    check("sum cov(b0,b1)".into(), sb.s12, e_s01, cov_se(e_s00, e_s11, e_s01));

    // the variant reading the intercept variance with a linear (unsquared)
    // mean term is reported for contrast; it should not match
    let mut variant_fails = 0usize;
    for u in 0..p {
        for v in u..p {
            let a = estimate::cov_intercepts_xbar_variant(model.sigma().entry(u, v), design);
            let se = cov_se(emp_var(u), emp_var(v), emp_cov(u, v));
            if (emp_cov(u, v) - a).abs() > 4.0 * se {
                variant_fails += 1;
            }
        }
    }
    println!(
        "linear-mean-term intercept variant rejected in {variant_fails} of {} cells",
        p * (p + 1) / 2
    );

    println!("{} of {checks} covariance checks passed", checks - failures);
    if failures > 0 {
        return Err(Error::InvalidParameter(format!(
            "{failures} covariance checks failed"
        )));
    }
    Ok(())
}

fn cmd_simulate_data(args: SimulateDataArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let scenario = match &args.scenario_file {
        Some(path) => {
            let list = load_scenarios(path)?;
            if list.len() != 1 {
                return Err(Error::InvalidParameter(
                    "simulate-data takes exactly one scenario".into(),
                ));
            }
            list.into_iter().next().expect("len checked")
        }
        None => ShiftScenario::in_control(model.p()),
    };
    let shifted = simulate::apply_scenario(&model, &scenario)?;
    let mut out = writer_for(&args.out)?;

    write!(out, "sample_id,x").map_err(io_err)?;
    for j in 1..=model.p() {
        write!(out, ",y{j}").map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;

    let mut rng = replication_rng(args.seed, 0);
    let x = model.design().x();
    for s in 1..=args.samples {
        let sample = simulate::generate_sample(&shifted, &mut rng);
        for i in 0..model.n() {
            write!(out, "s{s},{}", x[i]).map_err(io_err)?;
            for j in 0..model.p() {
                // `{}` keeps full precision so monitor round-trips exactly
                write!(out, ",{}", sample.get(i, j)).map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Maps an error to the documented process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoBracket { .. } => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_examples() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(3.6233), "3.62330");
        assert_eq!(fmt_sig(199.57), "199.570");
        assert_eq!(fmt_sig(0.000123456), "0.000123456");
        assert_eq!(fmt_sig(123456.7), "123457");
    }

    #[test]
    fn model_spec_round_trip() {
        let spec = ModelSpec {
            x: vec![2.0, 4.0, 6.0, 8.0],
            intercepts: vec![3.0, 2.0],
            slopes: vec![2.0, 1.0],
            sigma: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        let m = back.into_model().unwrap();
        assert_eq!(m.p(), 2);
        assert_eq!(m.n(), 4);
    }

    #[test]
    fn monitor_record_round_trip() {
        let rec = MonitorRecord {
            sample_id: "s1".into(),
            v: 1.25,
            limit: 0.724660,
            signal: true,
            worst_point: 2,
            z0: 5.1,
            z1: 2.9,
            b0_hat: vec![3.2, 1.9],
            b1_hat: vec![2.05, 0.98],
        };
        let line = serde_json::to_string(&rec).unwrap();
        let back: MonitorRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::DegenerateDesign), 2);
        assert_eq!(exit_code(&Error::NoBracket { target: 200.0, max_limit: 20.0 }), 3);
    }
}
