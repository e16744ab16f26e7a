//! Command-line runner for polelab experiments.
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polelab::geometry::WarpedManifold;
use polelab::profile::{RadialProfile, BUILTIN_T_MAX, DEFAULT_GRID_SIZE};
use polelab::report::{
    emit_csv, emit_json, parse_report, riccati_verdict, run_experiment, run_riccati,
    ExperimentConfig, ExperimentError, ExperimentReport, EXIT_ERROR, EXIT_OK, EXIT_VALIDATION,
    EXIT_VERDICT,
};

#[derive(Parser)]
#[command(
    version,
    about = "Curvature-integral experiments on 3-manifolds with a pole"
)]
struct Cli {
    /// Worker threads for parallel suites (0 = one per core)
    #[arg(long, env = "POLELAB_WORKERS", default_value_t = 0, global = true)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the pole and Rc ≥ 0 conditions for a profile; prints the validation report
    Validate {
        /// DSL expression in `t` or `builtin:name[params]`
        profile: String,
        /// Right end of the validated domain
        #[arg(long, default_value_t = BUILTIN_T_MAX)]
        t_max: f64,
        /// Validation grid size
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid: usize,
    },
    /// Print pointwise curvature quantities as JSON
    Quantities {
        profile: String,
        /// Comma-separated radii
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = BUILTIN_T_MAX)]
        t_max: f64,
    },
    /// Run every configured suite and print the JSON report
    Verify {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run only the Jacobi-field suite from the config's `riccati` section
    Riccati {
        config: PathBuf,
        /// Curvature field label, overriding the config
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a report as JSON or as CSV convergence tables
    Report {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Output file for JSON, output directory for CSV
        #[arg(long)]
        out: PathBuf,
        /// Run this config to produce the report
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        config: Option<PathBuf>,
        /// Convert an existing JSON report instead of running
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Profile spec, overriding `profile_spec`
    #[arg(long)]
    profile: Option<String>,
    /// Largest sample radius, overriding `r_max`
    #[arg(long)]
    r_max: Option<f64>,
    /// Mean-value ε, overriding `eps`
    #[arg(long)]
    eps: Option<f64>,
    /// Leave out the timing section so repeated runs are byte-identical
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn load_config(path: &Path, o: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(p) = &o.profile {
        config.profile_spec = p.clone();
    }
    if let Some(r) = o.r_max {
        config.r_max = Some(r);
    }
    if let Some(e) = o.eps {
        config.eps = e;
    }
    if o.no_timing {
        config.timing = false;
    }
    config.check()?;
    Ok(config)
}

fn write_out(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_config(config: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    let report = run_experiment(config)?;
    if let Some(p) = &config.output.json {
        fs::write(p, emit_json(&report)?).with_context(|| format!("writing {p}"))?;
    }
    if let Some(dir) = &config.output.csv_dir {
        write_csv(&report, Path::new(dir))?;
    }
    Ok(report)
}

fn write_csv(report: &ExperimentReport, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in emit_csv(report)? {
        fs::write(dir.join(&name), body).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Validate {
            profile,
            t_max,
            grid,
        } => {
            let p = if profile.trim().starts_with("builtin:") {
                RadialProfile::from_spec(&profile, t_max)?
            } else {
                RadialProfile::from_source(&profile, t_max, grid)?
            };
            println!("{}", serde_json::to_string_pretty(p.validation())?);
            Ok(if p.validation().passed {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            })
        }
        Command::Quantities { profile, t, t_max } => {
            let p = RadialProfile::from_spec(&profile, t_max)?;
            if !p.validation().passed {
                eprintln!("warning: profile fails validation; values carry no guarantee");
            }
            let m = WarpedManifold::unvalidated(p);
            let rows = t
                .iter()
                .map(|&x| m.point_curvatures(x))
                .collect::<Result<Vec<_>, _>>()?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(EXIT_OK)
        }
        Command::Verify {
            config,
            overrides,
            out,
        } => {
            let config = load_config(&config, &overrides)?;
            let report = run_config(&config)?;
            write_out(out.as_deref(), &emit_json(&report)?)?;
            Ok(report.exit_code())
        }
        Command::Riccati { config, field, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let parsed: ExperimentConfig = serde_json::from_str(&text)?;
            let Some(mut r) = parsed.riccati else {
                bail!("{} has no `riccati` section", config.display());
            };
            if let Some(f) = field {
                r.field = f;
            }
            let result = run_riccati(&r)?;
            let code = if riccati_verdict(&result) {
                EXIT_OK
            } else {
                EXIT_VERDICT
            };
            let mut text = serde_json::to_string_pretty(&result)?;
            text.push('\n');
            write_out(out.as_deref(), &text)?;
            Ok(code)
        }
        Command::Report {
            format,
            out,
            config,
            input,
            overrides,
        } => {
            let report = match (config, input) {
                (Some(c), _) => run_config(&load_config(&c, &overrides)?)?,
                (None, Some(i)) => parse_report(&fs::read_to_string(&i)?)?,
                (None, None) => bail!("either --config or --input is required"),
            };
            match format {
                Format::Json => fs::write(&out, emit_json(&report)?)?,
                Format::Csv => write_csv(&report, &out)?,
            }
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build_global()
    {
        eprintln!("error: worker pool: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<ExperimentError>()
                .map_or(EXIT_ERROR, ExperimentError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
