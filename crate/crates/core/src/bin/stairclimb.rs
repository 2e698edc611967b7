use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stairclimb::harness::{self, CaseConfig, CaseReport, Goal};
use stairclimb::Result;

#[derive(Parser)]
#[command(name = "stairclimb", version, about = "Stair-climbing biped: plan, solve, tune and simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    /// Case configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then
    /// `$STAIRCLIMB_OUT/<case_id>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the gait, with knot shifting when configured.
    Plan(CaseArgs),
    /// Plan and solve the joint trajectory.
    Ik(CaseArgs),
    /// Roll out the joint trajectory with fixed gains.
    Simulate(CaseArgs),
    /// Tune gains and torso pitch.
    Tune(CaseArgs),
    /// Tune, then roll out with the tuned gains.
    RunCase(CaseArgs),
    /// Run the three shipped cases, or the given configs, end to end.
    ReproduceCases {
        /// Case configurations; the shipped cases when omitted.
        #[arg(long)]
        config: Vec<PathBuf>,
        /// Output root; one directory per case plus `summary.json`.
        #[arg(long, env = "STAIRCLIMB_OUT", default_value = "out")]
        out: PathBuf,
        /// Replaces every case seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn default_root() -> PathBuf {
    std::env::var_os("STAIRCLIMB_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

fn print_report(r: &CaseReport, dir: &Path) {
    println!("{}: written to {}", r.case_id, dir.display());
    if let Some(p) = &r.plan {
        println!("  plan: {} samples, peak joint jerk {:.6e} rad/s^3", p.samples, p.planned_max_jerk);
    }
    if let Some(ik) = &r.ik {
        println!("  ik: {} poses, {} epochs, max error {:.3e}", ik.poses, ik.total_epochs, ik.max_error);
    }
    if let Some(t) = &r.tuning {
        println!(
            "  tune: cost {:.6e}, K_p {:.4}, K_d {:.4}, q5 {:.4}",
            t.best_cost, t.gains.k_p[0], t.gains.k_d[0], t.gains.q5_torso
        );
    }
    if let (Some(ro), Some(z)) = (&r.rollout, &r.zmp) {
        println!(
            "  rollout: cost {:.6e}, tracking {:.6e}, stable SSP {}/{} ({:.1}%)",
            ro.cost,
            ro.tracking_cost,
            z.stable_ssp,
            z.supported_ssp,
            100.0 * z.stable_fraction
        );
        if let Some(f) = &ro.failure {
            println!("  rollout failed: {f}");
        }
    }
}

fn run_one(args: &CaseArgs, goal: Goal) -> Result<()> {
    let mut cfg = CaseConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| default_root().join(&cfg.case_id));
    let outcome = harness::run(&cfg, goal, Some(&dir))?;
    print_report(&outcome.report, &dir);
    Ok(())
}

fn reproduce(configs: &[PathBuf], out: &Path, seed: Option<u64>) -> Result<()> {
    let cases = if configs.is_empty() {
        harness::shipped_cases()
    } else {
        configs.iter().map(|p| CaseConfig::load(p)).collect::<Result<_>>()?
    };
    let summary = harness::reproduce_cases(&cases, out, seed)?;
    for row in &summary.cases {
        println!(
            "{}: run {:.4} m, rise {:.4} m, planned jerk {:.6e}, cost {:.6e}, stable SSP {:.1}%",
            row.case_id,
            row.run,
            row.rise,
            row.planned_max_jerk,
            row.cost,
            100.0 * row.stable_fraction
        );
    }
    println!("planned jerk order: {}", summary.jerk_order.join(" < "));
    println!("written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => run_one(a, Goal::Plan),
        Command::Ik(a) => run_one(a, Goal::Ik),
        Command::Simulate(a) => run_one(a, Goal::Simulate),
        Command::Tune(a) => run_one(a, Goal::Tune),
        Command::RunCase(a) => run_one(a, Goal::RunCase),
        Command::ReproduceCases { config, out, seed } => reproduce(config, out, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
