use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relvac_lab::campaign::{self, Options, Outcome};
use relvac_lab::commands::{self, Overrides};
use relvac_lab::{LabError, Scenario};

#[derive(Parser)]
#[command(name = "relvac", version, about = "Free-boundary relativistic Euler with a physical vacuum: runs and checks")]
struct Cli {
    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a bundled name: blob1d, offcenter1d, disk2d.
    #[arg(long, default_value = "blob1d")]
    scenario: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// One value, or a comma-separated sweep.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Energy level 2k.
    #[arg(long)]
    level: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve a scenario and write energy.csv, snapshots/ and report.json.
    Simulate(Common),
    /// Evolve a scenario and perturbed copies; write pair CSVs and sweep.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Perturbation sizes, overriding the scenario's `delta`.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
    },
    /// Run a property suite (ops, spaces, energy, distance, all) or single criteria.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, value_delimiter = ',')]
        criterion: Option<Vec<u32>>,
        /// Use the shifted flux divergence in the adjoint checks.
        #[arg(long)]
        tampered: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Interpolation ratios on the smooth test family; writes interp.csv.
    InterpTest(Common),
    /// Energy and elliptic coercivity ratios; writes coercivity.json.
    CoercivityTest(Common),
}

fn overrides(c: &Common, delta: Option<Vec<f64>>) -> Overrides {
    Overrides { eps: c.eps.clone(), level: c.level, seed: c.seed, delta }
}

fn print_outcome(o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("{status} {:>2} {} ({:.1} s){}", o.id, o.title, o.seconds, if o.note.is_empty() { String::new() } else { format!(": {}", o.note) });
}

fn execute(cli: Cli) -> Result<(), LabError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| LabError::Config(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Simulate(c) => {
            let sc = Scenario::load(&c.scenario)?;
            for r in commands::simulate(&sc, &overrides(&c, None), &c.out)? {
                println!("eps {} steps {} t {:.6} E {:.6e} -> {:.6e}", r.scenario.eps, r.steps, r.t_final, r.energy_initial, r.energy_final);
            }
        }
        Cmd::Compare { common, delta } => {
            let sc = Scenario::load(&common.scenario)?;
            for r in commands::compare(&sc, &overrides(&common, delta), &common.out)? {
                println!("delta {:e} amplification {:.6} equivalence {:.4}", r.delta, r.amplification, r.equivalence);
            }
        }
        Cmd::Verify { suite, criterion, tampered, out, seed } => {
            let ids: Vec<u32> = match criterion {
                Some(ids) => {
                    if let Some(bad) = ids.iter().find(|i| !campaign::ALL.contains(i)) {
                        return Err(LabError::Config(format!("no criterion {bad}")));
                    }
                    ids
                }
                None => campaign::suite(&suite).ok_or_else(|| LabError::Config(format!("unknown suite `{suite}`")))?.to_vec(),
            };
            commands::verify(&ids, &Options { tampered, seed }, out.as_deref(), print_outcome)?;
        }
        Cmd::InterpTest(c) => {
            let sc = Scenario::load(&c.scenario)?;
            let n = commands::interp_test(&sc, &c.out)?;
            println!("{n} exponent choices, all ratios finite");
        }
        Cmd::CoercivityTest(c) => {
            let sc = Scenario::load(&c.scenario)?;
            let r = commands::coercivity_test(&sc, &overrides(&c, None), &c.out)?;
            println!("level {} energy ratio {:.6}", r.level, r.energy_ratio);
            if let (Some(a), Some(b)) = (r.tl1_ratio, r.tl23_ratio) {
                println!("elliptic ratios TL1 {a:.6} TL23 {b:.6}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
