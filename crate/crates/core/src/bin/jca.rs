use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jca_core::engine::{classify_regime, run, RunTrace};
use jca_core::sweep::{run_sweep_on, SweepSpec};
use jca_core::trace_io::{emit_trace, fmt_num};
use jca_core::{table1_scenario, DecayPolicy, Scenario};

/// Distributed utility-proportional-fair carrier aggregation simulator.
#[derive(Parser)]
#[command(name = "jca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and print the final allocation.
    Run { scenario: PathBuf },
    /// Sweep one carrier's capacity as described by a sweep file.
    Sweep { spec: PathBuf },
    /// Classify a scenario as abundant, borderline or scarce.
    Regime { scenario: PathBuf },
    /// Run the built-in two-carrier, twelve-UE scenario.
    Table1 {
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        /// Print the scenario as JSON instead of running it.
        #[arg(long)]
        print_scenario: bool,
    },
}

#[derive(Args)]
struct Overrides {
    /// Bid decay: off, exp:h1,h2 or rat:h3.
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<DecayPolicy>())]
    decay: Option<DecayPolicy>,
    /// Stop threshold on bid changes.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<u64>,
    /// Write the per-iteration trace CSV here.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Run everything twice and fail unless both results are bit-identical.
    #[arg(long, global = true)]
    seedless: bool,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(d) = self.decay {
            s.settings.decay = d;
        }
        if let Some(d) = self.delta {
            s.settings.delta = d;
        }
        if let Some(n) = self.max_iters {
            s.settings.max_iterations = n;
        }
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Res<()> {
    let o = &cli.overrides;
    match &cli.command {
        Command::Run { scenario } => {
            let mut s = Scenario::load(scenario)?;
            o.apply(&mut s);
            run_and_report(&s, o)
        }
        Command::Table1 { r1, r2, print_scenario } => {
            let mut s = table1_scenario(*r1, *r2);
            o.apply(&mut s);
            if *print_scenario {
                println!("{}", s.to_json_pretty());
                return Ok(());
            }
            run_and_report(&s, o)
        }
        Command::Regime { scenario } => {
            let mut s = Scenario::load(scenario)?;
            o.apply(&mut s);
            regime(&s)
        }
        Command::Sweep { spec } => sweep(spec, o),
    }
}

fn run_checked(s: &Scenario, seedless: bool) -> Res<RunTrace> {
    let trace = run(s)?;
    if seedless && run(s)? != trace {
        return Err("two runs of the same scenario differ".into());
    }
    Ok(trace)
}

fn run_and_report(s: &Scenario, o: &Overrides) -> Res<()> {
    let trace = run_checked(s, o.seedless)?;
    if let Some(path) = &o.trace {
        emit_trace(&trace, path)?;
    }
    let carriers = s.carrier_ids();
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let mut header = vec!["ue_id".to_string()];
    header.extend(carriers.iter().map(|c| format!("r_carrier_{c}")));
    header.push("total".into());
    header.extend(carriers.iter().map(|c| format!("p_{c}")));
    header.extend(["iterations".into(), "converged".into()]);
    w.write_record(&header)?;
    let mut users: Vec<_> = s.users.iter().map(|u| u.id).collect();
    users.sort_unstable();
    for ue in users {
        let mut rec = vec![ue.to_string()];
        rec.extend(carriers.iter().map(|&c| fmt_num(trace.allocation.rate(ue, c))));
        rec.push(fmt_num(trace.total_rate(ue)));
        rec.extend(carriers.iter().map(|&c| fmt_num(trace.price(c).unwrap_or(0.0))));
        rec.push(trace.iterations_used.to_string());
        rec.push(trace.converged.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    if !trace.converged {
        eprintln!("warning: no convergence within {} iterations", trace.iterations_used);
    }
    Ok(())
}

fn regime(s: &Scenario) -> Res<()> {
    let report = classify_regime(s)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["carrier_id", "capacity", "inflection_sum", "price_ceiling", "regime"])?;
    for c in &report.carriers {
        w.write_record([
            c.carrier.to_string(),
            fmt_num(c.capacity),
            fmt_num(c.inflection_sum),
            c.price_ceiling.map(|p| fmt_num(p.larger())).unwrap_or_default(),
            format!("{:?}", report.regime),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(path: &Path, o: &Overrides) -> Res<()> {
    if o.trace.is_some() {
        return Err("--trace applies to single runs, not sweeps".into());
    }
    let spec = SweepSpec::load(path)?;
    let mut base = spec.base_scenario()?;
    o.apply(&mut base);
    base.validate()?;
    spec.validate(&base)?;
    let values = spec.values.expand();
    let table = run_sweep_on(&base, spec.carrier, &values);
    if o.seedless && run_sweep_on(&base, spec.carrier, &values) != table {
        return Err("two sweeps of the same spec differ".into());
    }
    match &spec.output {
        Some(dir) => {
            let written = table.write_to(dir)?;
            eprintln!("wrote {}", written.display());
        }
        None => {
            table.write_csv(io::stdout().lock())?;
            io::stdout().flush()?;
        }
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} rows failed");
    }
    Ok(())
}
