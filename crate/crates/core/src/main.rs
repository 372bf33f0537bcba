use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use fibercorr::config::{parse_config, parse_physical_config, GridConfig, RunConfig, TimeSlots};
use fibercorr::output::{write_trajectory, Precision};
use fibercorr::pipeline::{execute, write_bundle, Stages};
use fibercorr::quantum_meas::CorrelationKind;
use fibercorr::scenarios::{physical_run_config, run_scenario, Overrides, Scenario};
use fibercorr::Error;

#[derive(Parser)]
#[command(name = "fibercorr", version, about = "Pulse propagation and photon-number correlations in Kerr fibers")]
struct Cli {
    /// Suppress progress messages.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; defaults to `[output] dir` of the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the classical pulse and write intensity and spectra.
    Propagate {
        #[command(flatten)]
        common: Common,
        /// Also export every K-th snapshot to trajectory.bin.
        #[arg(long, value_name = "K")]
        trajectory_stride: Option<usize>,
        /// Export complex128 samples instead of complex64.
        #[arg(long)]
        double: bool,
    },
    /// Optimize the local oscillator phase and report the squeezing ratio.
    Squeeze {
        #[command(flatten)]
        common: Common,
    },
    /// Time-domain photon-number correlation matrices.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Correlation kind (xx, yy, xy, complete); repeatable. Overrides
        /// `[measure] kinds`.
        #[arg(short, long)]
        kind: Vec<String>,
    },
    /// Output spectra and frequency-domain correlation matrices.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Run a named preset.
    Scenario(ScenarioArgs),
    /// Convert a physical-units description into a run configuration.
    Convert {
        /// Physical-units description.
        #[arg(short, long)]
        config: PathBuf,
        /// Where to write the normalized configuration.
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name; see --list.
    name: Option<String>,
    /// List the preset names.
    #[arg(long)]
    list: bool,
    /// Write the preset's configuration to this file instead of running it.
    #[arg(long, value_name = "FILE")]
    print_config: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    tau_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    time_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    time_end: Option<f64>,
    #[arg(long)]
    time_count: Option<usize>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Overrides {
        let grid_default = GridConfig::default();
        let slots_default = TimeSlots::default();
        let grid_given = self.n_points.is_some() || self.tau_min.is_some() || self.tau_max.is_some();
        let slots_given = self.time_start.is_some() || self.time_end.is_some() || self.time_count.is_some();
        Overrides {
            grid: grid_given.then(|| GridConfig {
                n_points: self.n_points.unwrap_or(grid_default.n_points),
                tau_min: self.tau_min.unwrap_or(grid_default.tau_min),
                tau_max: self.tau_max.unwrap_or(grid_default.tau_max),
            }),
            n_steps: self.steps,
            time_slots: slots_given.then(|| TimeSlots {
                start: self.time_start.unwrap_or(slots_default.start),
                end: self.time_end.unwrap_or(slots_default.end),
                count: self.time_count.unwrap_or(slots_default.count),
            }),
        }
    }
}

fn load(common: &Common) -> anyhow::Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let cfg = parse_config(&text).map_err(Error::from)?;
    let out = match (&common.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => {
            return Err(Error::InvalidArgument("no output directory: pass --out or set [output] dir".into()).into())
        }
    };
    Ok((cfg, out))
}

fn run_stages(cfg: &RunConfig, out: &Path, stages: Stages, progress: &dyn Fn(&str)) -> anyhow::Result<()> {
    let outcome = execute(cfg, stages, progress)?;
    write_bundle(&outcome, out)?;
    progress(&format!("wrote {}", out.display()));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let quiet = cli.quiet;
    let progress = move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let started = Instant::now();
    match cli.command {
        Command::Propagate {
            common,
            trajectory_stride,
            double,
        } => {
            let (cfg, out) = load(&common)?;
            let outcome = execute(&cfg, Stages::CLASSICAL, &progress)?;
            write_bundle(&outcome, &out)?;
            if let Some(stride) = trajectory_stride {
                let p = if double {
                    Precision::Complex128
                } else {
                    Precision::Complex64
                };
                write_trajectory(&out.join("trajectory.bin"), &outcome.trajectory, p, stride)?;
            }
        }
        Command::Squeeze { common } => {
            let (cfg, out) = load(&common)?;
            let stages = Stages {
                squeeze: true,
                ..Stages::CLASSICAL
            };
            run_stages(&cfg, &out, stages, &progress)?;
        }
        Command::Correlate { common, kind } => {
            let (mut cfg, out) = load(&common)?;
            if !kind.is_empty() {
                cfg.kinds = kind
                    .iter()
                    .map(|k| {
                        CorrelationKind::parse(k)
                            .ok_or_else(|| Error::InvalidArgument(format!("unknown correlation kind `{k}`")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            let stages = Stages {
                correlations: true,
                ..Stages::CLASSICAL
            };
            run_stages(&cfg, &out, stages, &progress)?;
        }
        Command::Spectrum { common } => {
            let (cfg, out) = load(&common)?;
            let stages = Stages {
                spectral: true,
                ..Stages::CLASSICAL
            };
            run_stages(&cfg, &out, stages, &progress)?;
        }
        Command::Scenario(args) => {
            if args.list {
                for s in Scenario::ALL {
                    println!("{s}");
                }
                return Ok(());
            }
            let Some(name) = args.name.as_deref() else {
                return Err(Error::InvalidArgument("scenario name required (see --list)".into()).into());
            };
            if let Some(path) = &args.print_config {
                let mut cfg = Scenario::parse(name)?.config();
                args.overrides().apply(&mut cfg);
                std::fs::write(path, cfg.to_config_text()).with_context(|| format!("writing {}", path.display()))?;
                return Ok(());
            }
            let Some(out) = args.out.as_deref() else {
                return Err(Error::InvalidArgument("--out is required to run a scenario".into()).into());
            };
            run_scenario(name, &args.overrides(), Some(out), &progress)?;
            progress(&format!("wrote {}", out.display()));
        }
        Command::Convert { config, out } => {
            let text =
                std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let input = parse_physical_config(&text).map_err(Error::from)?;
            let (cfg, report) = physical_run_config(&input)?;
            let body = format!("{}{}", report.to_text("# scale: "), cfg.to_config_text());
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&out, body).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    progress(&format!("done in {:.1} s", started.elapsed().as_secs_f64()));
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
