//! `cqed` command-line front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cqed_core::Execution;

use crate::config::{parse_document, Document, Overrides};
use crate::error::{CliError, Result};
use crate::output::plot_script;

#[derive(Parser, Debug)]
#[command(name = "cqed", version, about = "Transmission spectra and polariton modes of a cavity coupled to multi-level atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Source {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named parameter set (see `cqed preset list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Collective coupling g√N; bare numbers are in the display unit.
    #[arg(long = "gN", value_name = "FREQ", allow_hyphen_values = true)]
    g_sqrt_n: Option<String>,
    #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
    delta_c: Option<String>,
    #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
    dp_min: Option<String>,
    #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
    dp_max: Option<String>,
    /// Number of probe-detuning samples.
    #[arg(long)]
    points: Option<usize>,
    /// Run scans on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct Sink {
    /// Output file (default: standard output).
    #[arg(long, short, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write a matplotlib script plotting the output (needs --out).
    #[arg(long, value_name = "PATH", requires = "out")]
    plot: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmission spectrum over the probe scan (CSV).
    Spectrum {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Susceptibility over the probe scan (CSV).
    Chi {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Polariton eigenvalues and weights (CSV).
    Modes {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Reference quartic vs determinant expansion (JSON).
    Poly {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Sorted eigenvalues over a cavity-detuning scan (CSV).
    Branches {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
        #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
        dc_min: Option<String>,
        #[arg(long, value_name = "FREQ", allow_hyphen_values = true)]
        dc_max: Option<String>,
        #[arg(long)]
        dc_points: Option<usize>,
    },
    /// Time integration toward the steady state at one probe detuning (CSV).
    Dynamics {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
        /// Probe detuning.
        #[arg(long, value_name = "FREQ", allow_hyphen_values = true, default_value = "0")]
        dp: String,
        /// Step in 1/Γ (default: min(0.01, 1/spectral radius)).
        #[arg(long)]
        dt: Option<f64>,
        /// End time in 1/Γ.
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
        /// Write every n-th step (default: at most ~2000 rows).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Peak table with matched mode eigenvalues (CSV).
    Peaks {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
        #[arg(long, default_value_t = cqed_core::analysis::DEFAULT_MIN_PROMINENCE)]
        min_prominence: f64,
        /// Largest peak/eigenvalue distance counted as a match.
        #[arg(long, value_name = "FREQ", default_value = "1 gamma")]
        match_tol: String,
    },
    /// Least-squares fit to a measured spectrum (JSON report + model CSV).
    Fit {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
        /// CSV with header delta_p,intensity[,weight].
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Comma-separated free parameters, overriding fit.free.
        #[arg(long, value_name = "LIST")]
        free: Option<String>,
        /// Where to write delta_p,observed,model,residual.
        #[arg(long, value_name = "PATH")]
        model_out: Option<PathBuf>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// List presets or print one as TOML.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    List,
    Show { name: String },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn preset_or_error(name: &str) -> Result<String> {
    presets::preset_text(name).ok_or_else(|| {
        CliError::usage(format!("unknown preset {name:?}; available: {}", presets::names().join(", ")))
    })
}

impl Source {
    fn document(&self) -> Result<Document> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => read(path)?,
            (None, Some(name)) => preset_or_error(name)?,
            (None, None) => return Err(CliError::usage("give --config PATH or --preset NAME")),
        };
        let mut doc = parse_document(&text)?;
        doc.apply(&Overrides {
            g_sqrt_n: self.g_sqrt_n.clone(),
            delta_c: self.delta_c.clone(),
            kappa: self.kappa.clone(),
            dp_min: self.dp_min.clone(),
            dp_max: self.dp_max.clone(),
            points: self.points,
        })?;
        Ok(doc)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

impl Sink {
    fn emit(&self, text: &str, x: &str, ys: &[&str], xlabel: &str, ylabel: &str) -> Result<()> {
        match &self.out {
            Some(path) => write(path, text)?,
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::usage(format!("stdout: {e}")))?,
        }
        if let (Some(script), Some(data)) = (&self.plot, &self.out) {
            write(script, &plot_script(data, x, ys, xlabel, ylabel))?;
        }
        Ok(())
    }
}

fn unit_label(doc_unit: &str, what: &str) -> String {
    format!("{what} [{doc_unit}]")
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Spectrum { source, sink } => {
            let r = source.document()?.resolve()?;
            let text = commands::spectrum(&r, source.execution())?;
            sink.emit(&text, "delta_p", &["intensity"], &unit_label(r.display_name(), "probe detuning"), "transmission")
        }
        Command::Chi { source, sink } => {
            let r = source.document()?.resolve()?;
            let text = commands::chi(&r, source.execution())?;
            sink.emit(&text, "delta_p", &["re_chi", "im_chi"], &unit_label(r.display_name(), "probe detuning"), &unit_label(r.display_name(), "chi"))
        }
        Command::Modes { source, sink } => {
            let r = source.document()?.resolve()?;
            let text = commands::modes(&r)?;
            sink.emit(&text, "eigenvalue", &["photonic_fraction"], &unit_label(r.display_name(), "eigenvalue"), "photonic fraction")
        }
        Command::Poly { source, sink } => {
            let r = source.document()?.resolve()?;
            let text = commands::poly(&r)?;
            if sink.plot.is_some() {
                return Err(CliError::usage("poly writes JSON; --plot does not apply"));
            }
            sink.emit(&text, "", &[], "", "")
        }
        Command::Branches { source, sink, dc_min, dc_max, dc_points } => {
            let doc = source.document()?;
            let mut r = doc.resolve()?;
            if let Some(s) = dc_min {
                r.branches.0 = doc.frequency_flag(&s, "--dc-min")?;
            }
            if let Some(s) = dc_max {
                r.branches.1 = doc.frequency_flag(&s, "--dc-max")?;
            }
            if let Some(n) = dc_points {
                r.branches.2 = n;
            }
            if r.branches.2 < 2 {
                return Err(CliError::usage("--dc-points must be ≥ 2"));
            }
            let text = commands::branches(&r, source.execution())?;
            let m = r.system.ladder.len() + 1;
            let cols: Vec<String> = (1..=m).map(|i| format!("lambda_{i}")).collect();
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            sink.emit(&text, "delta_c", &cols, &unit_label(r.display_name(), "cavity detuning"), &unit_label(r.display_name(), "eigenvalue"))
        }
        Command::Dynamics { source, sink, dp, dt, t_end, stride } => {
            let doc = source.document()?;
            let r = doc.resolve()?;
            let options = commands::DynamicsOptions {
                dp: doc.frequency_flag(&dp, "--dp")?,
                dt,
                t_end,
                stride,
            };
            let text = commands::dynamics(&r, &options)?;
            sink.emit(&text, "t", &["intensity"], "time [1/gamma]", "normalized cavity intensity")
        }
        Command::Peaks { source, sink, min_prominence, match_tol } => {
            let doc = source.document()?;
            let r = doc.resolve()?;
            let tol = doc.frequency_flag(&match_tol, "--match-tol")?;
            let text = commands::peaks(&r, source.execution(), min_prominence, tol)?;
            sink.emit(&text, "position", &["height"], &unit_label(r.display_name(), "peak position"), "height")
        }
        Command::Fit { source, sink, data, free, model_out, max_iterations } => {
            let mut r = source.document()?.resolve()?;
            if let Some(list) = free {
                r.fit.free = list
                    .split(',')
                    .map(|n| config::parse_parameter(n.trim(), r.per_transition, "--free"))
                    .collect::<std::result::Result<_, _>>()?;
            }
            if let Some(n) = max_iterations {
                r.fit.max_iterations = n.max(1);
            }
            let observations = commands::parse_data(&read(&data)?, &r)?;
            let problem = commands::fit_problem(&r, observations)?;
            let out = commands::fit(&r, &problem)?;
            if let Some(path) = &model_out {
                write(path, &out.model_csv)?;
            }
            if let (Some(script), Some(path)) = (&sink.plot, &model_out) {
                write(script, &plot_script(path, "delta_p", &["observed", "model"], &unit_label(r.display_name(), "probe detuning"), "transmission"))?;
            } else if sink.plot.is_some() {
                return Err(CliError::usage("fit --plot needs --model-out"));
            }
            match &sink.out {
                Some(path) => write(path, &out.report)?,
                None => print!("{}", out.report),
            }
            if !out.result.converged {
                return Err(CliError::Numerical(format!(
                    "fit did not converge in {} iterations (gradient {:e})",
                    out.result.iterations, out.result.gradient_norm
                )));
            }
            Ok(())
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    println!("{:<10} {}", p.name, p.summary);
                }
                Ok(())
            }
            PresetAction::Show { name } => {
                print!("{}", preset_or_error(&name)?);
                Ok(())
            }
        },
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
