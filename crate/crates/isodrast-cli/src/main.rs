//! Batch front-end: run verification suites, evaluate pairings on loop
//! files, and integrate loop flows with CSV logging.
//!
//! Exit codes: 0 success, 1 gate or property failure, 2 configuration or
//! schema problem. Reports are deterministic for a fixed seed and flag set;
//! the timestamp field is the only wall-clock content.

use clap::{Parser, Subcommand};
use isodrast::error::Error;
use isodrast::flows::{self, FlowField};
use isodrast::io;
use isodrast::loops::{LoopEmbedding, TangentVector, Weighting};
use isodrast::pairings;
use isodrast::suites::{run_suite, SuiteConfig};
use isodrast::tol;
use isodrast::HamiltonianFn;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "isodrast",
    version,
    about = "Symplectic pairings on weighted loops and metric fields: verification suites, file pairings, flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named verification suite and print its JSON report
    Verify {
        /// One of: pairings, flows, moment, poisson, metrics, all
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Grid size N for the seeded random data (even, >= 16)
        #[arg(long, default_value_t = 128)]
        samples: usize,
        /// Override one gate, repeatable: --tolerance leibniz=1e-9
        #[arg(long = "tolerance", value_name = "NAME=VALUE")]
        tolerance: Vec<String>,
        /// Step for every central difference in the suite
        #[arg(long, default_value_t = tol::FD_STEP)]
        fd_step: f64,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one pairing on a loop file and print {value, residuals}
    Pair {
        /// Loop JSON file (samples, optional weighting and tangents)
        input: PathBuf,
        /// One of: omega_weighted, omega_donaldson, omega_reduced,
        /// theta_momentum, omega_momentum
        #[arg(long)]
        pairing: String,
    },
    /// Integrate a loop flow and log trajectory + action CSVs
    Flow {
        /// Loop JSON file; tangents are ignored
        input: PathBuf,
        /// Hamiltonian expression in q1..,p1.. (or the `radial` preset)
        #[arg(long)]
        hamiltonian: String,
        #[arg(short = 'T', long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Fail (exit 1) if the action drifts beyond this
        #[arg(long, default_value_t = tol::DRIFT_GATE_DEFAULT)]
        drift_gate: f64,
        /// Prefix for <prefix>_trajectory.csv and <prefix>_action.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify {
            suite,
            seed,
            samples,
            tolerance,
            fd_step,
            out,
        } => cmd_verify(&suite, seed, samples, &tolerance, fd_step, out.as_deref()),
        Command::Pair { input, pairing } => cmd_pair(&input, &pairing),
        Command::Flow {
            input,
            hamiltonian,
            t_final,
            steps,
            drift_gate,
            out,
        } => cmd_flow(
            &input,
            &hamiltonian,
            t_final,
            steps,
            drift_gate,
            out.as_deref(),
        ),
    };
    match code {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_overrides(flags: &[String]) -> Result<BTreeMap<String, f64>, Error> {
    let mut map = BTreeMap::new();
    for flag in flags {
        let (name, value) = flag.split_once('=').ok_or_else(|| {
            Error::Config(format!("--tolerance expects NAME=VALUE, got '{flag}'"))
        })?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("tolerance value '{value}' is not a number")))?;
        if value.is_nan() || value < 0.0 {
            return Err(Error::Config(format!("tolerance '{name}' must be >= 0")));
        }
        map.insert(name.to_string(), value);
    }
    Ok(map)
}

fn cmd_verify(
    suite: &str,
    seed: u64,
    samples: usize,
    tolerance: &[String],
    fd_step: f64,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    if fd_step.is_nan() || fd_step <= 0.0 {
        return Err(Error::Config("--fd-step must be positive".into()));
    }
    let cfg = SuiteConfig {
        seed,
        samples,
        fd_step,
        overrides: parse_overrides(tolerance)?,
    };
    let report = run_suite(suite, &cfg)?;
    let json = report.to_json_pretty();
    println!("{json}");
    if let Some(path) = out {
        std::fs::write(path, &json)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn read_loop_file(
    path: &std::path::Path,
) -> Result<(LoopEmbedding, Weighting, Vec<TangentVector>), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        pos: e.column(),
        message: format!("{}: {e}", path.display()),
    })?;
    io::loop_from_json(&value)
}

fn cmd_pair(input: &std::path::Path, pairing: &str) -> Result<ExitCode, Error> {
    let (lp, w, tangents) = read_loop_file(input)?;
    let tangent = |i: usize| -> TangentVector {
        tangents
            .get(i)
            .cloned()
            .unwrap_or_else(|| TangentVector::zero(lp.n_samples(), lp.ambient.dim()))
    };
    let (xi1, xi2) = (tangent(0), tangent(1));
    let report = match pairing {
        "omega_weighted" => pairings::omega_weighted(&lp, &w, &xi1, &xi2),
        "omega_donaldson" => Ok(pairings::PairingReport {
            value: pairings::omega_donaldson(&lp, &xi1.x, &xi2.x, &w),
            residuals: BTreeMap::new(),
        }),
        "omega_reduced" => pairings::omega_reduced(&lp, &w, &xi1.x, &xi2.x),
        "theta_momentum" => pairings::theta_momentum(&lp, &w, &xi1),
        "omega_momentum" => pairings::omega_momentum(&lp, &w, &xi1, &xi2),
        other => {
            return Err(Error::Config(format!(
                "unknown pairing '{other}' (expected omega_weighted, omega_donaldson, omega_reduced, theta_momentum, omega_momentum)"
            )))
        }
    };
    match report {
        Ok(rep) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "value": rep.value,
                    "residuals": rep.residuals,
                }))
                .expect("report serializes")
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Exactness { residual, gate }) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "error": "one-form is not exact",
                    "residual": residual,
                    "gate": gate,
                }))
                .expect("error report serializes")
            );
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e),
    }
}

fn cmd_flow(
    input: &std::path::Path,
    hamiltonian: &str,
    t_final: f64,
    steps: usize,
    drift_gate: f64,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    let (lp, _, _) = read_loop_file(input)?;
    let field = if hamiltonian == "radial" {
        FlowField::Radial
    } else {
        FlowField::Hamiltonian(HamiltonianFn::from_expr(
            "H",
            hamiltonian,
            lp.ambient.half_dim,
        )?)
    };
    let trajectory = if t_final == 0.0 {
        vec![lp]
    } else {
        flows::flow_loop(&lp, &field, t_final, steps)?
    };
    if let Some(prefix) = out {
        let base = prefix.display();
        let write = |suffix: &str, body: String| -> Result<(), Error> {
            let path = format!("{base}_{suffix}.csv");
            std::fs::write(&path, body)
                .map_err(|e| Error::Config(format!("cannot write {path}: {e}")))
        };
        write("trajectory", io::trajectory_csv(&trajectory, t_final))?;
        write("action", io::action_csv(&trajectory, t_final))?;
    }
    let drift = flows::isodrast_drift(&trajectory);
    let pass = drift <= drift_gate;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "drift": drift,
            "drift_gate": drift_gate,
            "steps": trajectory.len() - 1,
            "pass": pass,
        }))
        .expect("drift report serializes")
    );
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
