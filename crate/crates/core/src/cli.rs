//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 validation error,
//! 3 infeasible, 4 search budget or oracle scale guard, 5 I/O.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::freshness::{system_freshness, user_freshness};
use crate::model::{validate_scheme, CacheScheme, Scenario};
use crate::oracle::{brute_force_assignments, grid_allocate, GRID_MAX_ENTRIES};
use crate::rate_alloc::{allocate, allocation_objective, kkt_check, AllocationEntry, AllocationInput, RateAllocation};
use crate::scenario_io::{
    fixture_text, format_number, parse_rates, parse_scenario, parse_scheme, write_result_table, write_table,
    write_trace, ResultTable, TableStyle,
};
use crate::search::{solve_exhaustive, solve_sampled, SearchConfig, SolveResult, DEFAULT_ASSIGNMENT_LIMIT};
use crate::simulator::simulate_system;

#[derive(Debug, Parser)]
#[command(name = "freshcache", version, about = "Freshness-optimal cache placement and relay rate allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    User,
    Server,
}

#[derive(Debug, clap::Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: Mode,
    /// Evaluations in sampled mode.
    #[arg(long, default_value_t = 20_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Let a relay cache nothing.
    #[arg(long)]
    pub allow_empty_relay: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Largest number of placements the exhaustive search may visit.
    #[arg(long, default_value_t = DEFAULT_ASSIGNMENT_LIMIT)]
    pub limit: u128,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            limit: self.limit,
            allow_empty_relay: self.allow_empty_relay,
            threads: self.threads,
        }
    }

    fn solve(&self, scenario: &Scenario) -> Result<SolveResult> {
        match self.mode {
            Mode::Exhaustive => solve_exhaustive(scenario, &self.config()),
            Mode::Sampled => solve_sampled(scenario, self.budget, self.seed, &self.config()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for the best cache placement.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the best-so-far trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Allocate relay rates for a given placement and check optimality.
    Allocate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
    },
    /// Evaluate the objective for a placement and rates.
    Freshness {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        rates: PathBuf,
    },
    /// Monte Carlo estimate of per-holding and system freshness.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-check the solver against brute-force oracles.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-solve with all user or server rates scaled by each factor.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        scale: Scale,
        #[arg(long, value_delimiter = ',', required = true)]
        factors: Vec<f64>,
        #[command(flatten)]
        search: SearchArgs,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Reads a scenario from `path`, `path` + `.toml`, or the bundled fixture
/// named by the path's stem, in that order.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    if path.is_file() {
        return parse_scenario(&read(path)?);
    }
    let with_ext = path.with_extension("toml");
    if path.extension().is_none() && with_ext.is_file() {
        return parse_scenario(&read(&with_ext)?);
    }
    if let Some(text) = path.file_stem().and_then(|s| s.to_str()).and_then(fixture_text) {
        return parse_scenario(text);
    }
    Err(Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled fixture"),
    })
}

fn load_scheme(scenario: &Scenario, path: &Path) -> Result<CacheScheme> {
    let scheme = parse_scheme(&read(path)?)?;
    let report = validate_scheme(scenario, &scheme);
    if !report.is_valid() {
        return Err(Error::InvalidScheme(report));
    }
    Ok(scheme)
}

fn relay_input(scenario: &Scenario, scheme: &CacheScheme, relay: u32) -> Option<AllocationInput> {
    let entries: Vec<AllocationEntry> = scenario
        .holdings()
        .into_iter()
        .filter(|h| scheme.relay_of(h.user, h.file) == Some(relay))
        .map(|h| AllocationEntry::new((h.user, h.file), h.user_rate, h.server_rate))
        .collect();
    let budget = scenario.relay(relay)?.rate_budget;
    (!entries.is_empty()).then(|| AllocationInput::new(entries, budget))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

fn render(result: &SolveResult, format: Format) -> Result<String> {
    Ok(match format {
        Format::Table => write_result_table(result, TableStyle::Aligned),
        Format::Csv => write_result_table(result, TableStyle::Csv),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(result)
                .map_err(|e| Error::Domain(format!("cannot encode result: {e}")))?;
            s.push('\n');
            s
        }
    })
}

/// Runs one command; returns the process exit code. Diagnostics go to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            code
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Solve { scenario, search, out: out_path, trace, format } => {
            let scenario = load_scenario(&scenario)?;
            let result = search.solve(&scenario)?;
            let text = render(&result, format)?;
            match out_path {
                Some(p) => write_file(&p, &text)?,
                None => emit(out, &text)?,
            }
            if let Some(p) = trace {
                write_file(&p, &write_trace(&result))?;
            }
            Ok(0)
        }

        Command::Allocate { scenario, scheme } => {
            let scenario = load_scenario(&scenario)?;
            let scheme = load_scheme(&scenario, &scheme)?;
            let mut rates = Vec::with_capacity(scenario.relay_count());
            let mut report_text = String::from("relay,entries,water_level,stationarity,budget_slackness,rate_slackness,dual_feasibility,kkt_satisfied\n");
            for relay in &scenario.relays {
                let Some(input) = relay_input(&scenario, &scheme, relay.id) else {
                    rates.push(RateAllocation::empty());
                    report_text.push_str(&format!("{},0,,,,,,true\n", relay.id));
                    continue;
                };
                let alloc = allocate(&input)?;
                let kkt = kkt_check(&input, &alloc, 1e-6)?;
                report_text.push_str(&format!(
                    "{},{},{:.6e},{:.3e},{:.3e},{:.3e},{:.3e},{}\n",
                    relay.id,
                    input.entries.len(),
                    kkt.water_level,
                    kkt.stationarity_residual,
                    kkt.budget_slackness_residual,
                    kkt.rate_slackness_residual,
                    kkt.dual_feasibility_residual,
                    kkt.satisfied
                ));
                rates.push(alloc);
            }
            let objective = system_freshness(&scenario, &scheme, &rates)?;
            let table = ResultTable::build(&scenario, &scheme, &rates, objective)?;
            emit(out, &write_table(&table, TableStyle::Csv))?;
            emit(out, "\n")?;
            emit(out, &report_text)?;
            Ok(0)
        }

        Command::Freshness { scenario, scheme, rates } => {
            let scenario = load_scenario(&scenario)?;
            let scheme = load_scheme(&scenario, &scheme)?;
            let rates = parse_rates(&read(&rates)?, scenario.relay_count())?;
            let mut text = String::from("user,freshness\n");
            for u in &scenario.users {
                let f = user_freshness(&scenario, &scheme, &rates, u.id)?;
                text.push_str(&format!("{},{:.6}\n", u.id, f.value()));
            }
            let obj = system_freshness(&scenario, &scheme, &rates)?;
            text.push_str(&format!("objective_sum={:.6}\nobjective_mean={:.6}\n", obj.sum_form, obj.mean_form));
            emit(out, &text)?;
            Ok(0)
        }

        Command::Simulate { scenario, scheme, rates, horizon, seed } => {
            let scenario = load_scenario(&scenario)?;
            let scheme = load_scheme(&scenario, &scheme)?;
            let rates = parse_rates(&read(&rates)?, scenario.relay_count())?;
            let sim = simulate_system(&scenario, &scheme, &rates, horizon, seed)?;
            let mut text = String::from("user,file,relay,analytic,empirical,half_width_95,cycles\n");
            for r in &sim.rows {
                text.push_str(&format!(
                    "{},{},{},{:.6},{:.6},{:.6},{}\n",
                    r.user, r.file, r.relay, r.analytic, r.estimate.freshness_estimate, r.estimate.half_width_95,
                    r.estimate.cycles_observed
                ));
            }
            text.push_str(&format!(
                "analytic_sum={:.6}\nempirical_sum={:.6}\nempirical_half_width_95={:.6}\n",
                sim.analytic.sum_form, sim.aggregate.sum_form, sim.aggregate_half_width_95
            ));
            emit(out, &text)?;
            Ok(0)
        }

        Command::Verify { scenario, threads } => {
            let scenario = load_scenario(&scenario)?;
            let config = SearchConfig { threads, ..SearchConfig::default() };
            let solved = solve_exhaustive(&scenario, &config)?;
            let oracle = brute_force_assignments(&scenario)?;
            let mut ok = true;
            let mut text = String::new();

            let same = solved.objective.sum_form == oracle.objective.sum_form
                && solved.best_scheme == oracle.best_scheme
                && solved.evaluated_count == oracle.evaluated_count;
            ok &= same;
            text.push_str(&format!(
                "{} search-vs-brute-force: objective {} vs {}, evaluated {} vs {}\n",
                if same { "PASS" } else { "FAIL" },
                solved.objective.sum_form,
                oracle.objective.sum_form,
                solved.evaluated_count,
                oracle.evaluated_count
            ));

            for relay in &scenario.relays {
                let Some(input) = relay_input(&scenario, &solved.best_scheme, relay.id) else {
                    continue;
                };
                let alloc = allocate(&input)?;
                let kkt = kkt_check(&input, &alloc, 1e-6)?;
                ok &= kkt.satisfied;
                text.push_str(&format!(
                    "{} relay {} kkt: stationarity {:.3e}\n",
                    if kkt.satisfied { "PASS" } else { "FAIL" },
                    relay.id,
                    kkt.stationarity_residual
                ));
                if input.entries.len() <= GRID_MAX_ENTRIES {
                    let closed: Vec<f64> = input.entries.iter().map(|e| alloc.rates[&e.key]).collect();
                    let closed = allocation_objective(&input, &closed);
                    let (_, grid) = grid_allocate(&input, 1000)?;
                    let pass = grid <= closed + 1e-4;
                    ok &= pass;
                    text.push_str(&format!(
                        "{} relay {} grid: closed form {:.6} vs grid {:.6}\n",
                        if pass { "PASS" } else { "FAIL" },
                        relay.id,
                        closed,
                        grid
                    ));
                }
            }
            emit(out, &text)?;
            Ok(if ok { 0 } else { 1 })
        }

        Command::Sweep { scenario, scale, factors, search } => {
            let scenario = load_scenario(&scenario)?;
            let mut text = String::from("factor,objective_sum,objective_mean\n");
            for &factor in &factors {
                if !factor.is_finite() || factor <= 0.0 {
                    return Err(Error::Domain(format!("scale factor must be > 0, got {factor}")));
                }
                let scaled = match scale {
                    Scale::User => scenario.scale_user_rates(factor),
                    Scale::Server => scenario.scale_server_rates(factor),
                };
                let result = search.solve(&scaled)?;
                text.push_str(&format!(
                    "{},{:.6},{:.6}\n",
                    format_number(factor),
                    result.objective.sum_form,
                    result.objective.mean_form
                ));
            }
            emit(out, &text)?;
            Ok(0)
        }
    }
}
