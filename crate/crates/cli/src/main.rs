use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use clafd_core::sim::{
    self, build_scenario, concavity_sweep, default_r_grid, default_scale_grid, output, run_monte_carlo, sweep_input,
    ExperimentConfig, Method, TrialContext,
};

/// Closed-loop active fault diagnosis experiments.
#[derive(Parser)]
#[command(name = "clafd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo batch over every true model; writes summary.csv.
    Run {
        /// Built-in scenario name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        /// Comma-separated methods (bd, qta, bc, sbc, ol, none).
        #[arg(long, value_delimiter = ',', default_value = "ol,bd,qta,bc,sbc")]
        method: Vec<String>,
        #[arg(long, default_value_t = 20)]
        runs_per_model: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Concavity pass/fail grid over noise level and output-matrix scale; writes sweep.csv.
    SweepConcavity {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Single experiment; prints the outcome and optionally writes trace_<id>.csv.
    Trial {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        true_model: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        method: Option<String>,
        /// Write the per-step trace.
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Prints a built-in scenario as JSON.
    Scenario { name: String },
}

fn load_scenario(spec: &str) -> Result<ExperimentConfig> {
    if sim::SCENARIOS.contains(&spec) {
        return Ok(build_scenario(spec)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!("'{spec}' is neither a built-in scenario ({}) nor a file", sim::SCENARIOS.join(", "));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names.iter().map(|n| n.trim().parse::<Method>().map_err(Into::into)).collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, method, runs_per_model, seed, out } => {
            let cfg = load_scenario(&scenario)?;
            let methods = parse_methods(&method)?;
            let result = run_monte_carlo(&cfg, &methods, runs_per_model, seed)?;
            fs::create_dir_all(&out)?;
            let path = out.join("summary.csv");
            output::write_summary_file(&path, &result.records)?;
            println!("{:<6} {:>7} {:>9} {:>8} {:>9} {:>10} {:>10}", "method", "trials", "median", "decided", "accuracy", "design_ms", "certified");
            for s in &result.summaries {
                let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{:<6} {:>7} {:>9.1} {:>8.3} {:>9} {:>10.3} {:>10}",
                    s.method.name(),
                    s.trials,
                    s.median_steps,
                    s.decide_rate,
                    opt(s.accuracy),
                    s.mean_design_ms,
                    opt(s.certified_fraction)
                );
            }
            println!("wrote {}", path.display());
        }
        Command::SweepConcavity { out } => {
            let base = build_scenario("uncontrolled-polytope")?;
            let cells = concavity_sweep(&base, &default_r_grid(), &default_scale_grid(), &sweep_input())?;
            fs::create_dir_all(&out)?;
            let path = out.join("sweep.csv");
            output::write_sweep_file(&path, &cells)?;
            println!("wrote {} ({} cells)", path.display(), cells.len());
        }
        Command::Trial { scenario, true_model, seed, method, trace, out } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(m) = method {
                cfg.method = m.parse()?;
            }
            cfg.seed = seed;
            let true_index = true_model.or(cfg.true_model).unwrap_or(0);
            let ctx = TrialContext::new(&cfg)?;
            let record = sim::run_trial_with(&ctx, true_index, seed, seed)?;
            let decided = record.decided.map_or("none".to_string(), |d| d.to_string());
            println!(
                "method={} true_model={} decided={} steps={} mean_design_ms={:.3}",
                cfg.method,
                record.true_model,
                decided,
                record.steps,
                record.mean_design_ms()
            );
            if trace {
                fs::create_dir_all(&out)?;
                let path = out.join(format!("trace_{}.csv", record.trial_id));
                let m = &cfg.candidates[0].model;
                output::write_trace(fs::File::create(&path)?, &record, m.n_u(), m.n_y(), cfg.n_models())?;
                println!("wrote {}", path.display());
            }
        }
        Command::Scenario { name } => {
            println!("{}", build_scenario(&name)?.to_json()?);
        }
    }
    Ok(())
}
