use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use attitude_ftc::bounds::{gain_sweep, predict_with, BoundError};
use attitude_ftc::harness::{
    run_campaign, run_scenario, steady_state_stats, verify, write_bound_trace_jsonl,
    write_campaign_jsonl, write_plot_data, write_trace_csv, HarnessError, Scenario,
};
use attitude_ftc::so3::Mat3;
use attitude_ftc::units::rad_to_deg;
use clap::{Args, Parser, Subcommand};

const EXIT_INVALID: u8 = 2;
const EXIT_VIOLATED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ftc",
    version,
    about = "Fault-tolerant attitude tracking: simulation and bound prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file or preset name
    #[arg(long)]
    scenario: String,
    /// Override the simulated duration, s
    #[arg(long)]
    duration: Option<f64>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario> {
        let mut s = Scenario::load(&self.scenario)
            .with_context(|| format!("loading scenario '{}'", self.scenario))?;
        if let Some(d) = self.duration {
            s.duration = d;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct OutArg {
    /// Output directory
    #[arg(long, env = "FTC_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

impl OutArg {
    fn dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop instance and write its trace
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a Monte Carlo campaign and write per-instance tail statistics
    Montecarlo {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the bound iteration and write the iterates
    PredictBounds {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        eta: Option<f64>,
        /// Stop after the first loop
        #[arg(long)]
        no_loop2: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check campaign tail maxima against the predicted bounds
    Verify {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Evaluate the stability conditions on the configured gains
    CheckGains {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Predict bounds over a grid of scalar feedback gains K = κI and sliding gains k
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated diagonal values of K
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.7, 1.0, 1.5])]
        feedback: Vec<f64>,
        /// Comma-separated sliding gains k
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3])]
        sliding: Vec<f64>,
        #[arg(long)]
        eta: Option<f64>,
    },
}

fn print_notes(s: &Scenario) -> Result<()> {
    for n in s.validate()? {
        eprintln!("warning: {n}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out,
        } => {
            let s = scenario.load()?;
            print_notes(&s)?;
            let seed = seed.unwrap_or(s.seed);
            let trace = run_scenario(&s, seed)?;
            let dir = out.dir()?;
            write_trace_csv(&trace, &dir.join("trace.csv"))?;
            write_plot_data(&trace, &dir.join("plot.json"))?;
            let stats = steady_state_stats(&trace, s.tail_fraction)?;
            std::fs::write(
                dir.join("stats.json"),
                serde_json::to_string_pretty(&stats)?,
            )?;
            println!(
                "scenario {} seed {seed}: {} samples",
                s.name,
                trace.samples.len()
            );
            println!(
                "tail theta_e max {:.6} deg, |omega_e| max {:.3e} deg/s",
                rad_to_deg(stats.theta_e_max),
                rad_to_deg(stats.omega_e_max)
            );
            println!("wrote {}", dir.display());
        }
        Command::Montecarlo { scenario, n, out } => {
            let s = scenario.load()?;
            print_notes(&s)?;
            let summary = run_campaign(&s, n)?;
            let dir = out.dir()?;
            write_campaign_jsonl(&summary, &dir.join("campaign.jsonl"))?;
            println!(
                "{:>5} {:>20} {:>14} {:>16}",
                "inst", "seed", "theta_e [deg]", "|w_e| [deg/s]"
            );
            for i in &summary.instances {
                match (&i.stats, &i.error) {
                    (Some(st), _) => println!(
                        "{:>5} {:>20} {:>14.6} {:>16.3e}",
                        i.index,
                        i.seed,
                        rad_to_deg(st.theta_e_max),
                        rad_to_deg(st.omega_e_max)
                    ),
                    (None, e) => println!(
                        "{:>5} {:>20} failed: {}",
                        i.index,
                        i.seed,
                        e.as_deref().unwrap_or("")
                    ),
                }
            }
            println!(
                "max   theta_e {:.6} deg, |omega_e| {:.3e} deg/s, failed {}",
                rad_to_deg(summary.max.theta_e_max),
                rad_to_deg(summary.max.omega_e_max),
                summary.failed
            );
            if summary.failed > 0 {
                anyhow::bail!("{} instance(s) failed", summary.failed);
            }
        }
        Command::PredictBounds {
            scenario,
            eta,
            no_loop2,
            out,
        } => {
            let s = scenario.load()?;
            print_notes(&s)?;
            let eta = eta.unwrap_or(s.eta);
            let trace = predict_with(&s.predictor()?, eta, !no_loop2)?;
            let dir = out.dir()?;
            write_bound_trace_jsonl(&trace, &dir.join("bounds.jsonl"))?;
            for (i, b) in trace.loop1.iter().enumerate() {
                println!("loop 1  i={:<3} s={:.6e}  q={:.6e}", i + 1, b.s, b.q);
            }
            for (i, b) in trace.loop2.iter().enumerate() {
                println!("loop 2  i={:<3} s={:.6e}  q={:.6e}", i + 1, b.s, b.q);
            }
            println!("loop 2: {:?}", trace.loop2_status);
            println!(
                "bounds: |q_e| <= {:.4e}, theta_e <= {:.5} deg, |omega_e| <= {:.5} deg/s",
                trace.q_final,
                rad_to_deg(trace.theta_bound),
                rad_to_deg(trace.omega_bound)
            );
        }
        Command::Verify { scenario, n, eta } => {
            let s = scenario.load()?;
            print_notes(&s)?;
            let report = verify(&s, n, eta.unwrap_or(s.eta))?;
            println!(
                "predicted theta_e {:.5} deg, |omega_e| {:.5} deg/s",
                rad_to_deg(report.predicted.theta_e),
                rad_to_deg(report.predicted.omega_e)
            );
            println!(
                "observed  theta_e {:.5} deg, |omega_e| {:.3e} deg/s over {n} instances",
                rad_to_deg(report.campaign.max.theta_e_max),
                rad_to_deg(report.campaign.max.omega_e_max)
            );
            println!(
                "margins   theta_e x{:.2}, |omega_e| x{:.2}",
                report.margins.theta_e, report.margins.omega_e
            );
            println!("PASS");
        }
        Command::CheckGains { scenario } => {
            let s = scenario.load()?;
            let r = s.gain_report();
            println!(
                "lambda_min(K) = {:.6} vs threshold {:.6}: {}",
                r.lambda_min_k,
                r.threshold,
                if r.feedback_ok { "ok" } else { "FAIL" }
            );
            println!(
                "epsilon = {} vs rho_s = {:.6e}: {}",
                s.gains.epsilon,
                r.rho_s,
                if r.boundary_ok { "ok" } else { "FAIL" }
            );
            if !r.passed() {
                return Err(HarnessError::Invalid("gain conditions not met".into()).into());
            }
        }
        Command::Sweep {
            scenario,
            feedback,
            sliding,
            eta,
        } => {
            let s = scenario.load()?;
            let grid: Vec<_> = sliding
                .iter()
                .flat_map(|&k| {
                    feedback
                        .iter()
                        .map(move |&kk| attitude_ftc::ControllerGains {
                            k,
                            k_matrix: Mat3::identity() * kk,
                            ..s.gains
                        })
                })
                .collect();
            let rows = gain_sweep(&s.budget(), &grid, eta.unwrap_or(s.eta));
            println!(
                "{:>6} {:>6} {:>5} {:>12} {:>14} {:>16}",
                "k", "K", "gain", "|q_e|", "theta_e [deg]", "|w_e| [deg/s]"
            );
            for r in rows {
                let kk = r.gains.k_matrix[(0, 0)];
                match (r.q_bound, r.theta_bound, r.omega_bound) {
                    (Some(q), Some(th), Some(w)) => println!(
                        "{:>6} {:>6} {:>5} {:>12.4e} {:>14.5} {:>16.5}",
                        r.gains.k,
                        kk,
                        if r.gain_ok { "ok" } else { "fail" },
                        q,
                        rad_to_deg(th),
                        rad_to_deg(w)
                    ),
                    _ => println!(
                        "{:>6} {:>6} {:>5} {}",
                        r.gains.k,
                        kk,
                        if r.gain_ok { "ok" } else { "fail" },
                        r.error.unwrap_or_default()
                    ),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<HarnessError>() {
                Some(HarnessError::BoundViolated { .. }) => EXIT_VIOLATED,
                Some(
                    HarnessError::Invalid(_)
                    | HarnessError::UnknownPreset(_)
                    | HarnessError::Parse(_)
                    | HarnessError::Bound(_)
                    | HarnessError::Actuation(_),
                ) => EXIT_INVALID,
                None if e.downcast_ref::<BoundError>().is_some() => EXIT_INVALID,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
