use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use terrain_hto::app::{self, Ablation, AppError, Scenario};

#[derive(Parser)]
#[command(version, about = "Plan and simulate tracked-robot terrain traversal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write logs and metrics.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also run without one cost term and report both.
        #[arg(long, value_parser = parse_ablation)]
        ablate: Option<Ablation>,
        /// Let the robot rest on the sampled profile instead of the segments.
        #[arg(long)]
        raw_contact: bool,
        /// Perturb the profile and start reproducibly.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from a written episode.csv.
    Metrics { episode: PathBuf },
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::parse(s).ok_or_else(|| format!("expected time, stab or smo, got {s:?}"))
}

fn report(r: &app::RunResult) {
    let s = r.summary();
    let m = &s.metrics;
    println!("scenario {} outcome {:?}", s.scenario, s.outcome);
    println!("segments {} modes {}", s.segments, s.mode_sequence.join(" "));
    println!(
        "time {:.2} s, max pitch {:.2} deg, max pitch rate {:.2} deg/s, rotation {:.2} deg, max z accel {:.3} m/s^2",
        m.total_time, m.max_abs_pitch_deg, m.max_abs_pitch_rate_deg_s, m.rotation_angle_deg, m.max_z_accel
    );
    println!(
        "replans {} (median {:.1} ms, p95 {:.1} ms, max {:.1} ms), tracking {:.4} m {:.2} deg {:.2} deg",
        m.latency.count, m.latency.median, m.latency.p95, m.latency.max, s.tracking[0], s.tracking[1], s.tracking[2]
    );
}

fn run(cli: Cli) -> Result<i32, AppError> {
    match cli.command {
        Command::Run { scenario, out, ablate, raw_contact, seed } => {
            let sc = Scenario::load(&scenario)?;
            let raw = raw_contact || sc.raw_contact;
            let seed = seed.or(sc.seed);
            match ablate.or(sc.ablate) {
                None => {
                    let r = app::run_once(&sc, None, raw, seed)?;
                    app::write_outputs(&out, &r)?;
                    report(&r);
                    Ok(app::outcome_code(&r.log.outcome))
                }
                Some(drop) => {
                    let rep = app::ablate(&sc, drop, raw, seed)?;
                    app::write_outputs(&out.join("full"), &rep.full)?;
                    app::write_outputs(&out.join(format!("no_{}", drop.name())), &rep.ablated)?;
                    report(&rep.full);
                    report(&rep.ablated);
                    print!("{}", rep.table());
                    Ok(app::outcome_code(&rep.full.log.outcome))
                }
            }
        }
        Command::Metrics { episode } => {
            let text = std::fs::read_to_string(&episode).map_err(|e| AppError::io(&episode, e))?;
            let rows = app::parse_episode_csv(&text)?;
            let m = app::compute_metrics(&rows, &[])?;
            println!("{}", serde_json::to_string_pretty(&m).expect("metrics serialise"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
