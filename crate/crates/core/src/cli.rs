//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::control::{compute_omega, compute_varpi};
use crate::matgraph::{check_assumption1, check_assumption2, find_gauge, DEFAULT_NULLSPACE_TOL};
use crate::output::{fmt_num, write_outputs};
use crate::plot::{render_plot, PlotError, PlotKind};
use crate::scenario::{load_scenario, Scenario};
use crate::sim::{bipartite_disagreement, leader_tracking_error, zeno_report};

#[derive(Debug, Parser)]
#[command(
    name = "mwcons",
    version,
    about = "Event-triggered bipartite consensus on matrix-weighted signed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a scenario and print its partition, assumption verdicts and gains.
    Check {
        /// Scenario file path or bundled name (g1_leaderless, g1_leader_follower).
        scenario: String,
    },
    /// Print the per-agent trigger gain table.
    Params { scenario: String },
    /// Simulate a scenario and write CSV output.
    Run {
        scenario: String,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also render SVG plots of states, controls, events and psi.
        #[arg(long)]
        plots: bool,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the event-triggered mode and its continuous baseline side by side.
    Compare {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load(name: &str, seed: Option<u64>) -> Result<Scenario, String> {
    let sc = load_scenario(name).map_err(|e| e.to_string())?;
    Ok(match seed {
        Some(s) => sc.with_seed(s),
        None => sc,
    })
}

fn set_str(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn print_gains(sc: &Scenario) {
    let g = sc.network();
    if g.has_leaders() {
        println!("{:>5}  {:>12}  {:>12}", "agent", "varpi", "omega");
        for i in 0..g.n() {
            println!("{:>5}  {:>12.1}  {:>12.1}", i + 1, compute_varpi(g, i), compute_omega(g, i));
        }
    } else {
        println!("{:>5}  {:>12}", "agent", "varpi");
        for i in 0..g.n() {
            println!("{:>5}  {:>12.1}", i + 1, compute_varpi(g, i));
        }
    }
}

fn execute(cmd: Command) -> Result<(), String> {
    match cmd {
        Command::Check { scenario } => {
            let sc = load(&scenario, None)?;
            let g = sc.network();
            let gauge = find_gauge(g).map_err(|e| e.to_string())?;
            let (v1, v2) = gauge.partition();
            println!("scenario: {scenario}");
            println!("mode: {}", sc.mode().name());
            println!("agents: {}, dimension: {}, edges: {}", g.n(), g.d(), g.edges().len());
            println!("partition: V1 = {}, V2 = {}", set_str(&v1), set_str(&v2));
            let a1 = check_assumption1(g, &gauge, DEFAULT_NULLSPACE_TOL);
            println!("null-space condition (null(D*LD*) = range(D*(1 ⊗ I))): {}", verdict(a1));
            if g.has_leaders() {
                println!("leader condition (sum of |B_il| positive definite): {}", verdict(check_assumption2(g)));
            } else {
                println!("leader condition: not applicable (no leaders)");
            }
            print_gains(&sc);
            Ok(())
        }
        Command::Params { scenario } => {
            let sc = load(&scenario, None)?;
            print_gains(&sc);
            Ok(())
        }
        Command::Run {
            scenario,
            out,
            plots,
            seed,
        } => {
            let sc = load(&scenario, seed)?;
            let rec = sc.run().map_err(|e| e.to_string())?;
            write_outputs(&rec, sc.network(), &out).map_err(|e| format!("{}: {e}", out.display()))?;
            if plots {
                for kind in PlotKind::ALL {
                    let path = out.join(kind.file_name());
                    match render_plot(&rec, kind, &path) {
                        Ok(()) | Err(PlotError::EmptySeries(_)) => {}
                        Err(e) => return Err(format!("{}: {e}", path.display())),
                    }
                }
            }
            println!(
                "{}: {} samples, {} events, output in {}",
                sc.mode().name(),
                rec.len(),
                rec.total_events(),
                out.display()
            );
            Ok(())
        }
        Command::Compare { scenario, seed } => {
            let sc = load(&scenario, seed)?;
            let event_sc = sc.with_mode(sc.mode().event_triggered()).map_err(|e| e.to_string())?;
            let cont_sc = sc.with_mode(sc.mode().continuous()).map_err(|e| e.to_string())?;
            let ev = event_sc.run().map_err(|e| e.to_string())?;
            let ct = cont_sc.run().map_err(|e| e.to_string())?;
            let g = sc.network();
            let zeno = zeno_report(&ev, g);
            println!("event-triggered ({}): {} events", ev.mode.name(), ev.total_events());
            println!(
                "continuous ({}): {} samples (one control update per sample)",
                ct.mode.name(),
                ct.len()
            );
            if let Some(gap) = zeno.min_gap {
                println!("minimum inter-event gap: {}", fmt_num(gap));
            }
            if let (Some(xe), Some(xc)) = (ev.final_state(), ct.final_state()) {
                println!("final-state difference (max abs): {}", fmt_num((xe - xc).amax()));
                println!(
                    "final disagreement: event {} / continuous {}",
                    fmt_num(bipartite_disagreement(xe, g)),
                    fmt_num(bipartite_disagreement(xc, g))
                );
                if let Some(w0) = g.common_input() {
                    println!(
                        "final tracking error: event {} / continuous {}",
                        fmt_num(leader_tracking_error(xe, w0)),
                        fmt_num(leader_tracking_error(xc, w0))
                    );
                }
            }
            Ok(())
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "fails"
    }
}
