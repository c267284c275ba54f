use std::io::{stderr, stdout, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use r4varifold_cli::commands::{self, CertVariant, Outcome};
use r4varifold_cli::mesh::Projection;
use r4varifold_cli::suites::Suite;
use r4varifold_cli::{CliError, Scenario, THREADS_VAR};

#[derive(Parser, Debug)]
#[command(name = "r4varifold", version, about = "Build and check stationary 2-varifolds in R^4")]
struct Cli {
    /// Scenario file (key = value lines); defaults apply when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Where to write the CSV/mesh artifact, or the JSON report for commands without one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Gauss-Legendre order, `n` or `n,m`.
    #[arg(long, global = true, value_parser = parse_order)]
    quad_order: Option<[usize; 2]>,
    /// Target relative error of the adaptive quadrature.
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    /// Truncation depths: innermost shells for `full`, level m for `layer`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    truncation: Option<Vec<i32>>,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run check suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// CSV of r, mass(A_0^r), ratio and density bands.
    MassProfile {
        #[arg(long)]
        r_min: f64,
        #[arg(long)]
        r_max: f64,
        #[arg(long, default_value_t = 32)]
        steps: usize,
        /// Geometric instead of even spacing.
        #[arg(long)]
        log: bool,
    },
    /// First variation of the scenario's construction against its boundary formula.
    Variation {
        /// Index of a single scenario field.
        #[arg(long)]
        field: Option<usize>,
    },
    /// Masses of blow-ups about the origin.
    Blowup {
        #[arg(long, value_delimiter = ',', default_value = "1")]
        lambda: Vec<f64>,
        #[arg(long, value_parser = parse_pair, default_value = "1,2")]
        annulus: (f64, f64),
        /// Also classify the blow-up into the direction bands at this epsilon.
        #[arg(long)]
        bands: Option<f64>,
    },
    /// Non-conical or distinct-tangent certificate at index i.
    Certify {
        #[arg(long, default_value = "nonconical")]
        variant: CertVariant,
        #[arg(long, default_value_t = 3)]
        i: u32,
    },
    /// Ring surface as an OBJ quad mesh.
    ExportMesh {
        /// d,alpha0,t1,t2; the scenario ring (or the default ring) otherwise.
        #[arg(long, value_parser = parse_ring)]
        ring: Option<[f64; 4]>,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value = "drop-axis")]
        projection: Projection,
        /// Axis removed by drop-axis, 1 to 4.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=4))]
        drop: u8,
    },
}

fn floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}")))
        .collect()
}

fn parse_order(s: &str) -> Result<[usize; 2], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("{x}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [n] => Ok([n, n]),
        [a, b] => Ok([a, b]),
        _ => Err("expected n or n,m".into()),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match floats(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err("expected a,b".into()),
    }
}

fn parse_ring(s: &str) -> Result<[f64; 4], String> {
    floats(s)?.try_into().map_err(|_| "expected d,alpha0,t1,t2".to_string())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Parse(format!("{THREADS_VAR} must be a positive integer, got {v}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Parse(format!("thread pool: {e}")))
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut sc = match &cli.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            Scenario::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => Scenario::default(),
    };
    if let Some(o) = cli.quad_order {
        sc.quad.order = o;
    }
    if let Some(t) = cli.quad_tol {
        sc.quad.target_rel_error = t;
    }
    sc.quad.validate().map_err(|e| CliError::Parse(format!("quadrature: {e}")))?;
    Ok(sc)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// A closed downstream pipe (`| head`) is not an error.
fn emit(mut w: impl Write, text: &str) -> Result<(), CliError> {
    match w.write_all(text.as_bytes()).and_then(|_| w.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e)),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    init_threads()?;
    let sc = load_scenario(&cli)?;
    let trunc = cli.truncation.as_deref();
    let start = Instant::now();
    let Outcome { mut report, artifact } = match cli.command {
        Command::Verify { suite } => commands::verify(&sc, suite, trunc)?,
        Command::MassProfile { r_min, r_max, steps, log } => commands::mass_profile(&sc, r_min, r_max, steps, log)?,
        Command::Variation { field } => commands::variation(&sc, field, trunc)?,
        Command::Blowup { lambda, annulus, bands } => commands::blowup(&sc, &lambda, annulus, bands)?,
        Command::Certify { variant, i } => commands::certify(&sc, variant, i)?,
        Command::ExportMesh {
            ring,
            resolution,
            projection,
            drop,
        } => {
            let projection = match projection {
                Projection::DropAxis(_) => Projection::DropAxis(drop as usize),
                p => p,
            };
            commands::export_mesh(&sc, ring, resolution, projection)?
        }
    };
    report.timing_ms = start.elapsed().as_millis() as u64;

    let target = cli.out.clone().or_else(|| sc.output.as_ref().map(PathBuf::from));
    match (artifact, &target) {
        (Some(a), Some(path)) => {
            write(path, &a)?;
            emit(stdout(), &if cli.json { report.to_json() + "\n" } else { report.to_text() })?;
        }
        (Some(a), None) if cli.json => {
            if let serde_json::Value::Object(m) = &mut report.details {
                m.insert("artifact".into(), serde_json::Value::String(a));
            }
            emit(stdout(), &(report.to_json() + "\n"))?;
        }
        (Some(a), None) => {
            emit(stdout(), &a)?;
            emit(stderr(), &report.to_text())?;
        }
        (None, path) => {
            if let Some(p) = path {
                write(p, &(report.to_json() + "\n"))?;
            }
            emit(stdout(), &if cli.json { report.to_json() + "\n" } else { report.to_text() })?;
        }
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
