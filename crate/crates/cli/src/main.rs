use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irb_core::protocols::Shots;
use irb_lab::{
    bundled_inputs, cmd_calibrate, cmd_classify, cmd_irb, cmd_rb, cmd_sweep_gate_time, config_schema,
    init_threads_from_env, load_config, write_outcome, BackendKind, ClassifyInput, CliError, ExperimentConfig, Outcome,
    EXIT_INCONCLUSIVE,
};

#[derive(Parser)]
#[command(name = "irb-lab", version, about = "Iterative randomized benchmarking simulations")]
struct Cli {
    /// Print the JSON schema of the config file and exit.
    #[arg(long, global = true)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config, or a report from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the random sequences.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gate model for rb and irb.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// `exact` or a number of repetitions per sequence.
    #[arg(long)]
    shots: Option<Shots>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Standard randomized benchmarking.
    Rb(Common),
    /// Iterative interleaved benchmarking plus model selection.
    Irb(Common),
    /// Closed-loop amplitude and DRAG calibration on the pulse simulator.
    Calibrate(Common),
    /// RB error against gate length with and without DRAG.
    SweepGateTime(Common),
    /// Linear/quadratic model selection on IRB data.
    Classify {
        #[command(flatten)]
        common: Common,
        /// IRB report (JSON) or CSV with x, y, y_err columns; repeatable.
        #[arg(long)]
        input: Vec<PathBuf>,
        /// Use the three bundled data sets.
        #[arg(long)]
        bundled: bool,
    },
}

fn apply(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.rb.seed = seed;
        cfg.irb.base.seed = seed;
    }
    if let Some(shots) = common.shots {
        cfg.rb.shots = shots;
        cfg.irb.base.shots = shots;
    }
    if let Some(b) = common.backend {
        cfg.backend = b;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: Cmd) -> Result<Outcome, CliError> {
    let outcome = match cmd {
        Cmd::Rb(c) => cmd_rb(&apply(&c)?)?,
        Cmd::Irb(c) => cmd_irb(&apply(&c)?)?,
        Cmd::Calibrate(c) => cmd_calibrate(&apply(&c)?)?,
        Cmd::SweepGateTime(c) => cmd_sweep_gate_time(&apply(&c)?)?,
        Cmd::Classify { common, input, bundled } => {
            let cfg = apply(&common)?;
            let mut inputs = if bundled { bundled_inputs()? } else { Vec::new() };
            for p in &input {
                inputs.push(ClassifyInput::load(p)?);
            }
            cmd_classify(&cfg, &inputs)?
        }
    };
    Ok(outcome)
}

fn summary(outcome: &Outcome) -> String {
    use irb_lab::Results::*;
    match &outcome.report.results {
        Rb { fit, .. } => format!("alpha = {:.6}, error per gate = {:.3e}", fit.alpha, fit.r_generator),
        Irb { classification, .. } => match classification {
            Some(c) => format!("verdict: {} (winner {})", c.verdict, c.winner),
            None => "fewer than 5 repeat counts; no classification".into(),
        },
        Calibrate { calibration, .. } => format!(
            "converged after {} rounds: eps_pi = {:.2e}, eps_pi/2 = {:.2e}, drag = {:.3}",
            calibration.rounds.len(),
            calibration.final_pi.epsilon,
            calibration.final_half_pi.epsilon,
            calibration.gates.x90.drag_lambda
        ),
        SweepGateTime { points } => format!("{} gate lengths", points.len()),
        Classify { table, .. } => table.render(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        println!(
            "{}",
            serde_json::to_string_pretty(&config_schema()).expect("schema serializes")
        );
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no command given; see --help");
        return ExitCode::from(2);
    };
    if let Err(e) = init_threads_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let outcome = match run(cmd) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match write_outcome(&outcome) {
        Ok((json, csv)) => {
            println!("{}", summary(&outcome));
            println!("wrote {} and {}", json.display(), csv.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    if outcome.inconclusive {
        eprintln!("warning: classification inconclusive (runner-up probability at or above threshold)");
        return ExitCode::from(EXIT_INCONCLUSIVE as u8);
    }
    ExitCode::SUCCESS
}
