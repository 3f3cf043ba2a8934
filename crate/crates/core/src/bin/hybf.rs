use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hybf::channel::{generate_scenario, ArrayGeometry, ChannelSet, Scenario, ScenarioParams};
use hybf::composition::{mb_sbc, CompositionVariant};
use hybf::gradproj::{gp_optimize, write_trace_csv, GpConfig};
use hybf::harness::{read_records, run_experiment, scenario_hash, summarize, ExperimentSpec, TableKind};
use hybf::methods::{run_method, Method, MethodOutcome, MethodSettings};
use hybf::objective::{beam_pattern_gain, network_utility, BeamMatrix};
use hybf::sdr::RoundingConfig;
use hybf::{HybfError, Result};

#[derive(Parser)]
#[command(name = "hybf", version, about = "Hybrid beamforming design for massive phased arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random macro-cell scenario.
    Generate {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional TOML file with further scenario parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method on a scenario.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 1000)]
        n_trial: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the gradient-projection trace as CSV (GP and MB-GP only).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment described by a TOML file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Export beam-pattern gains of an optimization result.
    Pattern {
        #[arg(long)]
        beams: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        grid_deg: f64,
        /// Elevation cut; defaults to the mean hotspot elevation.
        #[arg(long, allow_hyphen_values = true)]
        elevation_deg: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate experiment records.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "utility")]
        table: TableKind,
        /// Emit CSV instead of the aligned text table.
        #[arg(long)]
        csv: bool,
    },
}

/// Output of `optimize`, input of `pattern`.
#[derive(Serialize, Deserialize)]
struct OptimizeResult {
    method: Method,
    utility_bits: f64,
    wall_time_seconds: f64,
    scenario_hash: String,
    geometry: ArrayGeometry,
    /// Mean hotspot elevation, radians.
    mean_elevation: f64,
    beams: Option<BeamMatrix>,
    diagnostics: serde_json::Value,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<HybfError> for Failure {
    fn from(e: HybfError) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let sc = Scenario::from_json(&text)?;
    sc.validate()?;
    Ok(sc)
}

fn generate(k: usize, l: usize, seed: u64, params: Option<PathBuf>, out: PathBuf) -> std::result::Result<(), Failure> {
    let base: ScenarioParams = match params {
        Some(p) => toml::from_str(&read(&p)?).map_err(|e| Failure::Input(e.to_string()))?,
        None => ScenarioParams::default(),
    };
    let sc = generate_scenario(&ScenarioParams {
        num_hotspots: k,
        num_sections: l,
        seed,
        ..base
    })?;
    fs::write(out, sc.to_json()?)?;
    Ok(())
}

fn optimize(
    scenario: PathBuf,
    method: Method,
    n_trial: usize,
    seed: u64,
    trace: Option<PathBuf>,
    out: PathBuf,
) -> std::result::Result<(), Failure> {
    let sc = load_scenario(&scenario)?;
    let full = ChannelSet::from_scenario(&sc);
    let channels = if method.is_single_beam() { full.merged() } else { full };
    let settings = MethodSettings {
        n_trial,
        seed,
        gp: GpConfig::default(),
        rounding: RoundingConfig::new(n_trial, seed),
        ..MethodSettings::default()
    };
    let outcome = match trace {
        Some(path) if matches!(method, Method::Gp | Method::MbGp) => {
            let start = Instant::now();
            let init = mb_sbc(&channels, CompositionVariant::Plain)?.beams;
            let (beams, tr) = gp_optimize(&init, &channels, &settings.gp)?;
            let wall_time = start.elapsed();
            write_trace_csv(&tr, fs::File::create(path)?)?;
            MethodOutcome {
                method,
                utility_bits: network_utility(&beams, &channels)?.utility_bits,
                beams: Some(beams),
                wall_time,
                diagnostics: serde_json::json!({"iterations": tr.iterations, "termination": tr.termination_reason}),
            }
        }
        Some(_) => return Err(Failure::Input("--trace is only available for GP and MB-GP".into())),
        None => run_method(&channels, method, &settings)?,
    };
    let mean_elevation = sc.hotspots.iter().map(|h| h.elevation).sum::<f64>() / sc.hotspots.len() as f64;
    let result = OptimizeResult {
        method,
        utility_bits: outcome.utility_bits,
        wall_time_seconds: outcome.wall_time.as_secs_f64(),
        scenario_hash: scenario_hash(&sc)?,
        geometry: sc.geometry,
        mean_elevation,
        beams: outcome.beams,
        diagnostics: outcome.diagnostics,
    };
    fs::write(out, serde_json::to_string_pretty(&result).map_err(HybfError::from)?)?;
    println!("{method}: {:.4} bps/Hz", result.utility_bits);
    Ok(())
}

fn sweep(config: PathBuf, out_dir: Option<PathBuf>) -> std::result::Result<(), Failure> {
    let mut spec = ExperimentSpec::from_toml(&read(&config)?)?;
    if out_dir.is_some() {
        spec.output_dir = out_dir;
    }
    let records = run_experiment(&spec)?;
    print!("{}", summarize(&records).render(TableKind::Utility));
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} of {} records failed", records.len())));
    }
    Ok(())
}

fn pattern(beams: PathBuf, grid_deg: f64, elevation_deg: Option<f64>, out: PathBuf) -> std::result::Result<(), Failure> {
    if !(grid_deg > 0.0 && grid_deg <= 180.0) {
        return Err(Failure::Input(format!("grid step must be in (0, 180] degrees, got {grid_deg}")));
    }
    let result: OptimizeResult =
        serde_json::from_str(&read(&beams)?).map_err(|e| Failure::Input(format!("{}: {e}", beams.display())))?;
    let w = result
        .beams
        .ok_or_else(|| Failure::Input(format!("{} has no beam matrix", result.method)))?;
    if w.num_elements() != result.geometry.num_elements() {
        return Err(HybfError::DimensionMismatch {
            expected: format!("{} elements", result.geometry.num_elements()),
            got: format!("{} elements", w.num_elements()),
        }
        .into());
    }
    let elevation = elevation_deg.map_or(result.mean_elevation, f64::to_radians);
    let steps = (180.0 / grid_deg).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| -90.0 + k as f64 * grid_deg).collect();
    let radians: Vec<f64> = grid.iter().map(|d| d.to_radians()).collect();
    let gains: Vec<Vec<f64>> = (0..w.num_beams())
        .map(|s| beam_pattern_gain(&w.column(s), &result.geometry, &radians, elevation))
        .collect();
    let mut wr = csv::Writer::from_path(&out).map_err(|e| Failure::Input(e.to_string()))?;
    let mut header = vec!["azimuth_deg".to_string()];
    header.extend((0..w.num_beams()).map(|s| format!("beam{s}_gain_db")));
    wr.write_record(&header).map_err(|e| Failure::Input(e.to_string()))?;
    for (k, az) in grid.iter().enumerate() {
        let mut row = vec![format!("{az:.4}")];
        row.extend(gains.iter().map(|g| format!("{:.6}", g[k])));
        wr.write_record(&row).map_err(|e| Failure::Input(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn report(records: PathBuf, table: TableKind, csv: bool) -> std::result::Result<(), Failure> {
    let recs = read_records(&records)?;
    if recs.is_empty() {
        return Err(Failure::Input(format!("{} contains no records", records.display())));
    }
    let summary = summarize(&recs);
    let text = match (table, csv) {
        (TableKind::Cdf, _) => summary.cdf_csv()?,
        (_, true) => summary.to_csv()?,
        (kind, false) => summary.render(kind),
    };
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Generate { k, l, seed, params, out } => generate(k, l, seed, params, out),
        Command::Optimize {
            scenario,
            method,
            n_trial,
            seed,
            trace,
            out,
        } => optimize(scenario, method, n_trial, seed, trace, out),
        Command::Sweep { config, out_dir } => sweep(config, out_dir),
        Command::Pattern {
            beams,
            grid_deg,
            elevation_deg,
            out,
        } => pattern(beams, grid_deg, elevation_deg, out),
        Command::Report { records, table, csv } => report(records, table, csv),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(2)
        }
    }
}
