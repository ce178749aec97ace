use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use supermode_lab::config::{parse_config_file, RunConfig};
use supermode_lab::dispersion::{gaussian_validity, presets};
use supermode_lab::emit::{emit, Format};
use supermode_lab::run::{run, RunReport};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Supermodes, thresholds and squeezing spectra of synchronously pumped OPOs.
#[derive(Parser)]
#[command(name = "supermode-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in a JSON config.
    Run {
        config: PathBuf,
        /// Directory for report.json and the CSV files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Output formats, comma separated.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "json")]
        format: Vec<Format>,
        /// Scale factor override (replaces numerics.kappa).
        #[arg(long)]
        kappa: Option<f64>,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
    /// Built-in crystal presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Parse a config and print it with every default filled in.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SUPERMODE_LAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("SUPERMODE_LAB_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("SUPERMODE_LAB_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(path: &Path, kappa: Option<f64>) -> Result<RunConfig, ExitCode> {
    let mut config = parse_config_file(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    if let Some(k) = kappa {
        if !(k >= 1.0 && k.is_finite()) {
            eprintln!("error: --kappa must be >= 1, got {k}");
            return Err(ExitCode::from(EXIT_CONFIG));
        }
        config.numerics.kappa = Some(k);
    }
    Ok(config)
}

fn summary(report: &RunReport) {
    println!("regime: {:?}", report.validity.regime);
    if let Some(s) = &report.spectrum {
        println!("Lambda_0 = {:.4} ({} significant of {})", s.lambda0, s.n_significant, s.dimension);
    }
    if let Some(t) = &report.threshold {
        println!("threshold: {:.4e} W/m^2, {:.4} mW (P0 = {:.4e} W/m^2)", t.report.p_thr, t.report.power_thr * 1e3, t.report.p0);
    }
    for s in &report.squeezing {
        for m in &s.per_mode {
            print!("k={} perfect {:.2} dB", m.k, m.best_db);
            for lo in s.lo_results.iter().filter(|lo| lo.k == m.k) {
                print!(", {} {:.2} dB", lo.descriptor, lo.variance_db);
            }
            println!();
        }
    }
    for o in &report.lo_optima {
        println!("best GH LO k={}: N_L = {:.4e}, {:.2} dB", o.optimum.k, o.optimum.n_l, o.optimum.variance_db);
    }
    for c in &report.counts {
        for n in &c.counts {
            println!("{} modes below {} dB (r = {})", n.count, n.bound_db, c.pump_ratio);
        }
        for b in &c.bands {
            println!("{} modes in ({}, {}) dB", b.count, b.lower_db, b.upper_db);
        }
    }
    if let Some(rows) = &report.sweep {
        for r in rows {
            println!("l = {:.4e} m: Lambda_0 = {:.4}, analytic {:.4}", r.length, r.lambda0_numeric, r.lambda0_analytic);
        }
    }
    println!("wall time {:.2} s", report.provenance.wall_time_s);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Command::Presets { action: PresetAction::List } => {
            let mut out = std::io::stdout().lock();
            for p in presets() {
                let note = if p.values.is_some() { "" } else { " (values required inline)" };
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(out, "{:<20} {}{note}", p.name, p.description).is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let config = match load(&config, None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let validity = gaussian_validity(&config.crystal, &config.spopo);
            let doc = serde_json::json!({ "config": config.to_json(), "validity": validity });
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            ExitCode::SUCCESS
        }
        Command::Run { config, out_dir, format, kappa, quiet } => {
            let config = match load(&config, kappa) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let output = match run(&config) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_NUMERIC });
                }
            };
            let mut formats = format;
            formats.dedup();
            for f in formats {
                match emit(&output, f, &out_dir) {
                    Ok(files) if !quiet => files.iter().for_each(|p| println!("wrote {}", p.display())),
                    Ok(_) => {}
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(EXIT_IO);
                    }
                }
            }
            if !quiet {
                summary(&output.report);
            }
            ExitCode::SUCCESS
        }
    }
}
