//! Command-line surface: binds panel loading, marginal filtering, testing,
//! break dating, simulation, and the Monte Carlo studies into reproducible
//! batch runs.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad data, failed fit),
//! 2 on a usage error (unknown flag, malformed spec). Output files are
//! written atomically (write to a temporary file, then rename), so an
//! interrupted run never leaves a partial report behind.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use chrono::NaiveDate;

use crate::bootstrap::{
    alpha_for_common_break, break_ci_bootstrap, same_break, BootstrapConfig,
};
use crate::copsim::{sample_panel, DgpSpec};
use crate::depmeasures::{MeasureSpec, TiePolicy};
use crate::error::{Error, Result};
use crate::marginal::{filter_panel, FilterMode, MarginalFit};
use crate::panel::{load_panel, save_panel, LoadOptions, ResidualPanel};
use crate::report::{Report, ReportFormat, Table, Value};
use crate::study::{
    full_sample_test_residuals, mc_coverage_single, mc_coverage_two_break,
    mc_rejection_table, rolling_scan, rolling_spearman_series, MULTIPLE_TESTING_NOTE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Human-readable `key = value` report with an aligned table block.
    Text,
    /// Machine-readable report: `# key = value` header, then CSV rows.
    Csv,
}

impl FormatArg {
    fn to_format(self) -> ReportFormat {
        match self {
            FormatArg::Text => ReportFormat::StructuredText,
            FormatArg::Csv => ReportFormat::Delimited,
        }
    }
}

/// Run parameters shared by every analysis command (measure spec excluded,
/// so commands that take a measure grid can reuse these without a flag
/// collision).
#[derive(Debug, Args, Clone)]
struct RunOpts {
    /// Trimming fraction for the CUSUM grid.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Test level (also the break-interval level).
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate the dependence path every `stride`-th grid point (1 = exact).
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Tie handling: "fail" or "jitter" (seeded infinitesimal perturbation).
    #[arg(long, default_value = "fail")]
    ties: String,
    /// Report destination; omitted = stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

impl RunOpts {
    fn bootstrap_config(&self) -> Result<BootstrapConfig> {
        let ties = match self.ties.trim().to_ascii_lowercase().as_str() {
            "fail" => TiePolicy::Fail,
            // Offset keeps the jitter stream disjoint from bootstrap streams.
            "jitter" => TiePolicy::Jitter { seed: self.seed ^ 0x9E37_79B9_7F4A_7C15 },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown tie policy {other:?}; expected \"fail\" or \"jitter\""
                )))
            }
        };
        let config = BootstrapConfig {
            b: self.b,
            alpha: self.alpha,
            seed: self.seed,
            epsilon: self.epsilon,
            stride: self.stride,
            ties,
        };
        config.validate()?;
        Ok(config)
    }

    fn echo(&self, report: &mut Report, command: &str) {
        report.push("command", command);
        report.push("epsilon", self.epsilon);
        report.push("alpha", self.alpha);
        report.push("B", self.b);
        report.push("seed", self.seed as i64);
        report.push("stride", self.stride);
        report.push("ties", self.ties.as_str());
    }
}

/// Run parameters plus a single measure specification.
#[derive(Debug, Args, Clone)]
struct CommonOpts {
    /// Measure specification: preset m1..m5 or a list like "rho,q0.05".
    #[arg(long, default_value = "m1")]
    measures: String,
    #[command(flatten)]
    run: RunOpts,
}

impl CommonOpts {
    fn bootstrap_config(&self) -> Result<BootstrapConfig> {
        self.run.bootstrap_config()
    }

    fn spec(&self) -> Result<MeasureSpec> {
        MeasureSpec::parse(&self.measures)
    }

    fn echo(&self, report: &mut Report, command: &str) {
        self.run.echo(report, command);
        report.push("measures", self.measures.as_str());
    }
}

/// Flags shared by commands that read a panel from disk.
#[derive(Debug, Args, Clone)]
struct InputOpts {
    /// CSV panel: a `date` column followed by one column per series.
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as price levels and convert to log returns first.
    #[arg(long, default_value_t = false)]
    prices: bool,
    /// Marginal filter applied before testing: "ar1-garch11" or "none".
    #[arg(long, default_value = "none")]
    marginal: String,
}

impl InputOpts {
    fn mode(&self) -> Result<FilterMode> {
        self.marginal.parse()
    }

    fn load_residuals(&self) -> Result<ResidualPanel> {
        let mut panel = load_panel(&self.input, &LoadOptions::default())?;
        if self.prices {
            panel = panel.to_log_returns()?;
        }
        filter_panel(&panel, self.mode()?)
    }

    fn echo(&self, report: &mut Report) {
        report.push("input", self.input.display().to_string());
        report.push("prices", self.prices);
        report.push("marginal", self.marginal.as_str());
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "copubreak",
    version,
    about = "Detect and date breaks in the cross-sectional dependence of a panel",
    disable_help_subcommand = true
)]
struct CliArgs {
    /// Worker threads (default: all cores). Results never depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full-sample break test; attaches a break interval on rejection.
    Test {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rolling-window scan for multiple breaks.
    Scan {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        common: CommonOpts,
        /// Window length in rows.
        #[arg(long)]
        window: usize,
        /// Advance on non-rejection (> 1 trades resolution for speed).
        #[arg(long, default_value_t = 1)]
        step: usize,
    },
    /// Bootstrap confidence interval for the break date.
    Ci {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        common: CommonOpts,
        /// Break fraction to centre on; estimated from the data if omitted.
        #[arg(long)]
        s_hat: Option<f64>,
    },
    /// Decide whether two measure settings date the same break.
    CommonBreak {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        common: CommonOpts,
        /// Second measure specification to compare against `--measures`.
        #[arg(long, default_value = "m3")]
        measures2: String,
        /// Family-wise level for the joint decision.
        #[arg(long, default_value_t = 0.05)]
        alpha_star: f64,
    },
    /// Draw a synthetic panel from a dependence-break model.
    Simulate {
        /// Model spec, e.g. "factor:theta0=1,theta1=2.5,s0=0.5" or
        /// "clayton:theta0=2.5".
        #[arg(long)]
        dgp: String,
        /// Rows to simulate.
        #[arg(long, default_value_t = 1000)]
        t: usize,
        /// Columns to simulate.
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination CSV.
        #[arg(long)]
        output: PathBuf,
    },
    /// Monte Carlo rejection-rate table over DGP and measure grids.
    McSizePower {
        /// Model spec per table column; repeat the flag for a grid.
        #[arg(long = "dgp", required = true)]
        dgps: Vec<String>,
        /// Measure spec per table row; repeat the flag for several.
        #[arg(long = "measures", default_value = "m1")]
        measure_list: Vec<String>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 400)]
        t: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Monte Carlo coverage of the break-date interval.
    McCoverage {
        /// Single-break model (must carry s0); first panel of the two-break
        /// design when --dgp2 is given.
        #[arg(long)]
        dgp: String,
        /// Second model: switches to the two-break separation design.
        #[arg(long)]
        dgp2: Option<String>,
        /// Measure specification for the second interval.
        #[arg(long, default_value = "m3")]
        measures2: String,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        t: usize,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rolling-window averaged Spearman series for descriptive plots.
    Describe {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        common: CommonOpts,
        /// Rolling window length.
        #[arg(long, default_value_t = 150)]
        window: usize,
        /// Dates (YYYY-MM-DD) to flag in a marker column; repeatable.
        #[arg(long = "mark")]
        marks: Vec<String>,
    },
}

/// Entry point used by `main`; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            // clap exits 0 for --help/--version and 2 for usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(workers) = args.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return 2;
        }
        // Ignore "already initialised": only possible in in-process tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    match dispatch(args.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Test { input, common } => cmd_test(input, common),
        Command::Scan { input, common, window, step } => {
            cmd_scan(input, common, window, step)
        }
        Command::Ci { input, common, s_hat } => cmd_ci(input, common, s_hat),
        Command::CommonBreak { input, common, measures2, alpha_star } => {
            cmd_common_break(input, common, measures2, alpha_star)
        }
        Command::Simulate { dgp, t, n, seed, output } => {
            cmd_simulate(dgp, t, n, seed, output)
        }
        Command::McSizePower { dgps, measure_list, reps, t, n, run } => {
            cmd_mc_size_power(dgps, measure_list, reps, t, n, run)
        }
        Command::McCoverage { dgp, dgp2, measures2, reps, t, n, common } => {
            cmd_mc_coverage(dgp, dgp2, measures2, reps, t, n, common)
        }
        Command::Describe { input, common, window, marks } => {
            cmd_describe(input, common, window, marks)
        }
    }
}

fn emit(report: &Report, run: &RunOpts) -> Result<()> {
    let text = report.render(run.format.to_format());
    match &run.output {
        Some(path) => crate::report::write_atomically(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn push_marginal_fits(report: &mut Report, fits: &Option<Vec<MarginalFit>>) {
    if let Some(fits) = fits {
        for fit in fits {
            let base = format!("marginal.{}", fit.column);
            report.push(format!("{base}.alpha"), fit.alpha);
            report.push(format!("{base}.beta"), fit.beta);
            report.push(format!("{base}.gamma0"), fit.gamma0);
            report.push(format!("{base}.gamma1"), fit.gamma1);
            report.push(format!("{base}.gamma2"), fit.gamma2);
            report.push(format!("{base}.converged"), fit.converged);
        }
    }
}

fn cmd_test(input: InputOpts, common: CommonOpts) -> Result<()> {
    let spec = common.spec()?;
    let config = common.bootstrap_config()?;
    let residuals = input.load_residuals()?;
    let outcome = full_sample_test_residuals(&residuals, &spec, &config)?;

    let mut report = Report::new();
    common.echo(&mut report, "test");
    input.echo(&mut report);
    report.push("rows_tested", outcome.residual_rows);
    report.push("statistic", outcome.test.cusum.statistic);
    report.push("critical_value", outcome.test.critical_value);
    report.push("p_value", outcome.test.p_value);
    report.push("reject", outcome.test.reject);
    report.push("s_hat", outcome.test.cusum.s_hat);
    report.push("k_hat", outcome.test.cusum.k_hat);
    match outcome.test.break_date {
        Some(d) => report.push("break_date", d),
        None => report.push("break_date", Value::None),
    }
    match &outcome.break_ci {
        Some(ci) => {
            report.push("ci_lower", ci.lower);
            report.push("ci_upper", ci.upper);
        }
        None => {
            report.push("ci_lower", Value::None);
            report.push("ci_upper", Value::None);
        }
    }
    push_marginal_fits(&mut report, &residuals.fits);
    emit(&report, &common.run)
}

fn cmd_scan(input: InputOpts, common: CommonOpts, window: usize, step: usize) -> Result<()> {
    let spec = common.spec()?;
    let config = common.bootstrap_config()?;
    let mode = input.mode()?;
    let mut panel = load_panel(&input.input, &LoadOptions::default())?;
    if input.prices {
        panel = panel.to_log_returns()?;
    }
    let scan = rolling_scan(&panel, &spec, window, mode, step, &config)?;

    let mut report = Report::new();
    common.echo(&mut report, "scan");
    input.echo(&mut report);
    report.push("window", window);
    report.push("step", step);
    report.push("note", MULTIPLE_TESTING_NOTE);
    report.push("windows_tested", scan.windows_tested);
    report.push("breaks_found", scan.breaks.len());
    if scan.breaks.is_empty() {
        report.push("mean_break_index", Value::None);
    } else {
        let mean =
            scan.breaks.iter().map(|b| b.k_abs as f64).sum::<f64>() / scan.breaks.len() as f64;
        report.push("mean_break_index", mean);
    }
    let mut table = Table {
        columns: vec![
            "window_start".into(),
            "k".into(),
            "date".into(),
            "s_hat".into(),
            "statistic".into(),
            "critical_value".into(),
        ],
        rows: Vec::new(),
    };
    for b in &scan.breaks {
        table.rows.push(vec![
            b.window_start.into(),
            b.k_abs.into(),
            b.date.into(),
            b.s_hat_window.into(),
            b.statistic.into(),
            b.critical_value.into(),
        ]);
    }
    report.set_table(table);
    emit(&report, &common.run)
}

fn cmd_ci(input: InputOpts, common: CommonOpts, s_hat: Option<f64>) -> Result<()> {
    let spec = common.spec()?;
    let config = common.bootstrap_config()?;
    let residuals = input.load_residuals()?;
    let s_hat = match s_hat {
        Some(s) => s,
        None => {
            let dep = config.dep_config();
            crate::cusum::cusum_statistic(&crate::depmeasures::dependence_path(
                &residuals, &spec, &dep,
            )?)?
            .s_hat
        }
    };
    let ci = break_ci_bootstrap(&residuals, &spec, s_hat, &config)?;

    let mut report = Report::new();
    common.echo(&mut report, "ci");
    input.echo(&mut report);
    report.push("s_hat", ci.s_hat);
    report.push("ci_lower", ci.lower);
    report.push("ci_upper", ci.upper);
    report.push("ci_raw_lower", ci.raw_lower);
    report.push("ci_raw_upper", ci.raw_upper);
    report.push("bootstrap_quantile_lower", ci.c_lower);
    report.push("bootstrap_quantile_upper", ci.c_upper);
    emit(&report, &common.run)
}

fn cmd_common_break(
    input: InputOpts,
    common: CommonOpts,
    measures2: String,
    alpha_star: f64,
) -> Result<()> {
    let spec_a = common.spec()?;
    let spec_b = MeasureSpec::parse(&measures2)?;
    let alpha_each = alpha_for_common_break(alpha_star)?;
    let config = BootstrapConfig { alpha: alpha_each, ..common.bootstrap_config()? };
    let residuals = input.load_residuals()?;

    let dep = config.dep_config();
    let mut results = Vec::new();
    for spec in [&spec_a, &spec_b] {
        let s_hat = crate::cusum::cusum_statistic(&crate::depmeasures::dependence_path(
            &residuals, spec, &dep,
        )?)?
        .s_hat;
        let ci = break_ci_bootstrap(&residuals, spec, s_hat, &config)?;
        results.push((s_hat, ci));
    }
    let verdict = same_break(results[0].0, &results[0].1, results[1].0, &results[1].1);

    let mut report = Report::new();
    common.echo(&mut report, "common-break");
    input.echo(&mut report);
    report.push("measures2", measures2.as_str());
    report.push("alpha_star", alpha_star);
    report.push("alpha_each", alpha_each);
    report.push("s_hat_1", results[0].0);
    report.push("ci_1_lower", results[0].1.lower);
    report.push("ci_1_upper", results[0].1.upper);
    report.push("s_hat_2", results[1].0);
    report.push("ci_2_lower", results[1].1.lower);
    report.push("ci_2_upper", results[1].1.upper);
    report.push("same_break", verdict);
    emit(&report, &common.run)
}

fn cmd_simulate(dgp: String, t: usize, n: usize, seed: u64, output: PathBuf) -> Result<()> {
    let spec = DgpSpec::parse(&dgp, t, n)?;
    let panel = sample_panel(&spec, seed)?;
    let as_returns = crate::panel::ReturnPanel::new(
        panel.dates.clone(),
        panel.names.clone(),
        panel.values.clone(),
    )?;
    save_panel(&as_returns, &output)?;
    println!(
        "wrote {} rows x {} columns from {} (seed {seed}) to {}",
        t,
        n,
        spec.render(),
        output.display()
    );
    Ok(())
}

fn cmd_mc_size_power(
    dgps: Vec<String>,
    measure_list: Vec<String>,
    reps: usize,
    t: usize,
    n: usize,
    run: RunOpts,
) -> Result<()> {
    let dgp_specs = dgps
        .iter()
        .map(|d| DgpSpec::parse(d, t, n))
        .collect::<Result<Vec<_>>>()?;
    // A measure argument is one specification ("rho,q0.05") when it parses
    // whole; otherwise it is treated as a comma-separated list of
    // specifications ("m1,m2,m5"), so preset grids fit in one flag.
    let specs = measure_list
        .iter()
        .flat_map(|m| match MeasureSpec::parse(m) {
            Ok(spec) => vec![Ok(spec)],
            Err(_) => m.split(',').map(|tok| MeasureSpec::parse(tok.trim())).collect(),
        })
        .collect::<Result<Vec<_>>>()?;
    let config = run.bootstrap_config()?;
    let table = mc_rejection_table(&dgp_specs, &specs, reps, &config, run.seed)?;

    let mut report = Report::new();
    run.echo(&mut report, "mc-size-power");
    report.push("t", t);
    report.push("n", n);
    report.push("reps", reps);
    let mut out = Table {
        columns: vec![
            "dgp".into(),
            "measures".into(),
            "rate".into(),
            "se".into(),
            "reps".into(),
        ],
        rows: Vec::new(),
    };
    for cell in &table.cells {
        out.rows.push(vec![
            cell.dgp.render().into(),
            cell.spec.to_string().into(),
            cell.rate.into(),
            cell.se.into(),
            cell.reps.into(),
        ]);
    }
    report.set_table(out);
    emit(&report, &run)
}

fn cmd_mc_coverage(
    dgp: String,
    dgp2: Option<String>,
    measures2: String,
    reps: usize,
    t: usize,
    n: usize,
    common: CommonOpts,
) -> Result<()> {
    let spec_a = common.spec()?;
    let spec_b = MeasureSpec::parse(&measures2)?;
    let dgp_a = DgpSpec::parse(&dgp, t, n)?;
    let config = common.bootstrap_config()?;

    let mut report = Report::new();
    common.echo(&mut report, "mc-coverage");
    report.push("t", t);
    report.push("n", n);
    report.push("reps", reps);
    report.push("measures2", measures2.as_str());
    report.push("dgp", dgp_a.render());
    match dgp2 {
        None => {
            let cell = mc_coverage_single(&dgp_a, &spec_a, &spec_b, reps, &config, common.run.seed)?;
            report.push("design", "single-break");
            report.push("p_cover_first", cell.p_first);
            report.push("p_cover_second", cell.p_second);
            report.push("p_cover_both", cell.p_both);
        }
        Some(second) => {
            let dgp_b = DgpSpec::parse(&second, t, n)?;
            report.push("design", "two-break");
            report.push("dgp2", dgp_b.render());
            let cell = mc_coverage_two_break(
                &dgp_a, &dgp_b, &spec_a, &spec_b, reps, &config, common.run.seed,
            )?;
            report.push("p_joint_intersection", cell.p_joint);
        }
    }
    emit(&report, &common.run)
}

fn cmd_describe(
    input: InputOpts,
    common: CommonOpts,
    window: usize,
    marks: Vec<String>,
) -> Result<()> {
    let residuals = input.load_residuals()?;
    let marks = marks
        .iter()
        .map(|m| {
            NaiveDate::parse_from_str(m, "%Y-%m-%d").map_err(|e| {
                Error::InvalidConfig(format!("bad --mark date {m:?}: {e}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = rolling_spearman_series(&residuals, window)?;

    let mut report = Report::new();
    common.echo(&mut report, "describe");
    input.echo(&mut report);
    report.push("window", window);
    let mut columns = vec!["date".to_string(), "spearman".to_string()];
    if !marks.is_empty() {
        columns.push("marker".into());
    }
    let mut table = Table { columns, rows: Vec::new() };
    for (date, value) in &series {
        let mut row: Vec<Value> = vec![(*date).into(), (*value).into()];
        if !marks.is_empty() {
            row.push(Value::Int(i64::from(marks.contains(date))));
        }
        table.rows.push(row);
    }
    report.set_table(table);
    emit(&report, &common.run)
}
