use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cvv_core::assertions::{check_suite, parse_assertions, TraceStore};
use cvv_core::automata::{load_property, parse_controller, reachability, replay, ControllerFile};
use cvv_core::corroboration::{
    detect_conflicts, run_campaign, write_outputs, Binding, Campaign, PropertyBinding, Status,
    Strategy,
};
use cvv_core::sim::{run, Scenario, Sensing, Trace};

#[derive(Parser)]
#[command(name = "cvv", version, about = "Verify, simulate and corroborate traffic-rule controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a controller on a scenario and write a JSONL trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        controller: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Check assertions on a trace. Exits 1 when any assertion fails.
    Check {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        assertions: PathBuf,
        /// text or json
        #[arg(long, default_value = "text")]
        format: String,
        /// Also write the trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Model-check a controller against a safety property. Exits 1 when
    /// the property is violated.
    Verify {
        #[arg(long)]
        controller: PathBuf,
        #[arg(long)]
        property: PathBuf,
        /// Write the verdict (with witness) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Formal check plus a simulation campaign around the exported
    /// assumptions. Exits 0 when corroborated, 1 when refuted, 3 when
    /// inconclusive.
    Corroborate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        controller: PathBuf,
        #[arg(long)]
        property: PathBuf,
        #[arg(long)]
        binding: PathBuf,
        /// Bindings of further properties, used for conflict detection.
        #[arg(long = "conflict-binding")]
        conflict_bindings: Vec<PathBuf>,
        #[arg(long, default_value = "boundary")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_controller(path: &Path) -> Result<(ControllerFile, String)> {
    let text = read(path)?;
    let c = parse_controller(&text).with_context(|| format!("{}", path.display()))?;
    Ok((c, cvv_core::digest(text.as_bytes())))
}

fn simulate(
    scenario: &Path,
    controller: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
    duration: Option<f64>,
) -> Result<ExitCode> {
    let mut scn = Scenario::parse(&read(scenario)?).with_context(|| format!("{}", scenario.display()))?;
    if let Some(s) = seed {
        scn.sim.seed = s;
    }
    if let Some(d) = dt {
        scn.sim.dt = d;
    }
    if let Some(d) = duration {
        scn.sim.duration = d;
    }
    scn.validate()?;
    let (ctl, ctl_digest) = load_controller(controller)?;
    let Some(spec) = &ctl.sensing else {
        bail!("{} has no [sensing] section binding its observations", controller.display());
    };
    let sensing = Sensing::parse(spec)?;
    let scn_digest = cvv_core::digest(scn.to_toml().as_bytes());
    let trace = run(&scn, &ctl.automaton, &sensing, &scn_digest, &ctl_digest)?;
    fs::write(out, trace.to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    println!("{} steps written to {}", trace.steps.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn check(trace: &Path, assertions: &Path, format: &str, csv: Option<&Path>) -> Result<ExitCode> {
    let t = Trace::from_jsonl(&read(trace)?).with_context(|| format!("{}", trace.display()))?;
    let suite = parse_assertions(&read(assertions)?).with_context(|| format!("{}", assertions.display()))?;
    let store = TraceStore::new(t);
    if let Some(p) = csv {
        fs::write(p, store.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    let report = check_suite(&store, &suite);
    match format {
        "json" => println!("{}", serde_json::to_string_pretty(&report)?),
        "text" => print!("{}", report.render_text()),
        _ => bail!("unknown format '{format}' (text or json)"),
    }
    Ok(if report.summary.fail == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn verify(controller: &Path, property: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let (ctl, _) = load_controller(controller)?;
    let ta = &ctl.automaton;
    let pf = load_property(&read(property)?, ta).with_context(|| format!("{}", property.display()))?;
    let verdict = reachability(ta, &pf.property, &pf.environment)?;
    if let Some(w) = verdict.witness() {
        replay(ta, &pf.property, &pf.environment, w).context("witness failed to replay")?;
    }
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&verdict)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    let name = &pf.property.name;
    match verdict.witness() {
        None => {
            println!("{name}: safe");
            Ok(ExitCode::SUCCESS)
        }
        Some(w) => {
            let mut path = vec![ta.locations[ta.initial].name.as_str()];
            path.extend(w.edges().iter().map(|&e| ta.locations[ta.edges[e].target].name.as_str()));
            println!("{name}: unsafe");
            println!("witness: {}", path.join(" -> "));
            Ok(ExitCode::from(1))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn corroborate(
    scenario: &Path,
    controller: &Path,
    property: &Path,
    binding: &Path,
    conflict_bindings: &[PathBuf],
    strategy: Strategy,
    epsilon: f64,
    trials: usize,
    seed: u64,
    workers: usize,
    out: &Path,
) -> Result<ExitCode> {
    let base = Scenario::parse(&read(scenario)?).with_context(|| format!("{}", scenario.display()))?;
    let (ctl, ctl_digest) = load_controller(controller)?;
    let pf = load_property(&read(property)?, &ctl.automaton).with_context(|| format!("{}", property.display()))?;
    let b = Binding::parse(&read(binding)?).with_context(|| format!("{}", binding.display()))?;
    let pb = PropertyBinding::new(&ctl, pf, b)?;
    let campaign = Campaign::new(
        base,
        &pb.binding.axes,
        &pb.assumptions(),
        strategy,
        epsilon,
        trials,
        seed,
    )?;
    let mut result = run_campaign(&pb, &campaign, workers, &ctl_digest)?;
    if !conflict_bindings.is_empty() {
        let mut others = Vec::new();
        for p in conflict_bindings {
            others.push(Binding::parse(&read(p)?).with_context(|| format!("{}", p.display()))?);
        }
        let mut all = vec![&pb.binding];
        all.extend(others.iter());
        let mut stores = Vec::new();
        for t in &result.report.trials {
            if let Some(text) = t.trace.as_ref().and_then(|p| result.files.get(p)) {
                stores.push((t.id.clone(), TraceStore::new(Trace::from_jsonl(text)?)));
            }
        }
        result.report.conflicts = detect_conflicts(&all, &stores);
    }
    write_outputs(out, &result)?;
    let r = &result.report;
    println!("{}: {}", r.property, r.status.as_str());
    println!(
        "formal {}; {} trial(s); {} conflict(s); report in {}",
        r.formal.verdict,
        r.trials.len(),
        r.conflicts.len(),
        out.display()
    );
    Ok(match r.status {
        Status::Corroborated => ExitCode::SUCCESS,
        Status::Refuted => ExitCode::from(1),
        Status::Inconclusive => ExitCode::from(3),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            controller,
            out,
            seed,
            dt,
            duration,
        } => simulate(&scenario, &controller, &out, seed, dt, duration),
        Command::Check {
            trace,
            assertions,
            format,
            csv,
        } => check(&trace, &assertions, &format, csv.as_deref()),
        Command::Verify {
            controller,
            property,
            out,
        } => verify(&controller, &property, out.as_deref()),
        Command::Corroborate {
            scenario,
            controller,
            property,
            binding,
            conflict_bindings,
            strategy,
            epsilon,
            trials,
            seed,
            workers,
            out,
        } => corroborate(
            &scenario,
            &controller,
            &property,
            &binding,
            &conflict_bindings,
            strategy,
            epsilon,
            trials,
            seed,
            workers,
            &out,
        ),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
