//! Monte-Carlo experiment runner and summary statistics.
//!
//! Every realization draws one scenario from a seed derived from the master
//! seed and the realization index, so all methods see identical channels and
//! results do not depend on scheduling. Methods that design a single beam run
//! on the merged single-section view of the scenario (see
//! [`ChannelSet::merged`]); multi-beam methods use all sections.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::channel::{generate_scenario, ChannelSet, Scenario, ScenarioParams};
use crate::error::{HybfError, Result};
use crate::gradproj::GpConfig;
use crate::methods::{round_relaxed, run_method, GpInit, Method, MethodSettings};
use crate::objective::BeamMatrix;
use crate::sdr::{solve_relaxed, CandidateScaling, RandomizationDistribution, RelaxedSolution, RoundingConfig, SdrConfig};
use crate::seed::mix_seed;

/// Trial counts, either shared by every trial-based method or given per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialCounts {
    Shared(Vec<usize>),
    PerMethod(BTreeMap<Method, Vec<usize>>),
}

impl Default for TrialCounts {
    fn default() -> Self {
        TrialCounts::Shared(vec![1000])
    }
}

impl TrialCounts {
    /// Counts to run for `method`; `[None]` for methods without trials.
    pub fn for_method(&self, method: Method) -> Vec<Option<usize>> {
        if !method.uses_trials() {
            return vec![None];
        }
        let list = match self {
            TrialCounts::Shared(v) => v.clone(),
            TrialCounts::PerMethod(map) => map.get(&method).cloned().unwrap_or_else(|| vec![1000]),
        };
        list.into_iter().map(Some).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    #[serde(alias = "scenario")]
    pub scenario_params: ScenarioParams,
    pub methods: Vec<Method>,
    pub num_realizations: usize,
    pub n_trial: TrialCounts,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
    pub save_beams: bool,
    pub gp: GpConfig,
    pub gp_init: GpInit,
    pub sdr: SdrConfig,
    pub rounding_scaling: CandidateScaling,
    pub rounding_distribution: RandomizationDistribution,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario_params: ScenarioParams::default(),
            methods: vec![Method::SbSbc, Method::SbPosbc, Method::SdrR, Method::Gp, Method::Ub],
            num_realizations: 100,
            n_trial: TrialCounts::default(),
            master_seed: 0,
            output_dir: None,
            workers: 0,
            save_beams: false,
            gp: GpConfig::default(),
            gp_init: GpInit::Sbc,
            sdr: SdrConfig::default(),
            rounding_scaling: CandidateScaling::default(),
            rounding_distribution: RandomizationDistribution::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HybfError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario_params.validate()?;
        if self.methods.is_empty() {
            return Err(HybfError::Config("no methods requested".into()));
        }
        if self.num_realizations == 0 {
            return Err(HybfError::Config("num_realizations must be positive".into()));
        }
        for m in &self.methods {
            if self.n_trial.for_method(*m).contains(&Some(0)) {
                return Err(HybfError::Config(format!("{m}: trial counts must be positive")));
            }
        }
        self.gp.validate()
    }

    /// Seed of the scenario for realization `r`.
    pub fn realization_seed(&self, r: usize) -> u64 {
        mix_seed(self.master_seed, r as u64)
    }

    fn settings(&self, seed: u64, n_trial: Option<usize>) -> MethodSettings {
        MethodSettings {
            n_trial: n_trial.unwrap_or(1),
            seed,
            gp: self.gp,
            gp_init: self.gp_init,
            sdr: self.sdr,
            rounding: RoundingConfig {
                distribution: self.rounding_distribution,
                scaling: self.rounding_scaling,
                ..RoundingConfig::new(n_trial.unwrap_or(1), seed)
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub realization_id: usize,
    pub method: Method,
    pub num_hotspots: usize,
    pub num_sections: usize,
    pub n_trial: Option<usize>,
    /// `None` when the method failed.
    pub utility_bits: Option<f64>,
    pub wall_time_seconds: f64,
    pub scenario_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_matrix: Option<BeamMatrix>,
    pub diagnostics: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Hex SHA-256 of the scenario's JSON form.
pub fn scenario_hash(scenario: &Scenario) -> Result<String> {
    let digest = Sha256::digest(scenario.to_json()?.as_bytes());
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Runs every requested method on every realization.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let run = || -> Result<Vec<ResultRecord>> {
        let per_realization: Vec<Result<Vec<ResultRecord>>> = (0..spec.num_realizations)
            .into_par_iter()
            .map(|r| run_realization(spec, r))
            .collect();
        let mut records = Vec::new();
        for batch in per_realization {
            records.extend(batch?);
        }
        Ok(records)
    };
    let records = if spec.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| HybfError::Config(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    if let Some(dir) = &spec.output_dir {
        std::fs::create_dir_all(dir)?;
        write_records(&dir.join("records.jsonl"), &records)?;
        let summary = summarize(&records);
        std::fs::write(dir.join("summary.csv"), summary.to_csv()?)?;
        std::fs::write(dir.join("summary.txt"), summary.render(TableKind::Utility))?;
    }
    Ok(records)
}

/// Cached relaxation for one realization, shared by SDR-R and UB.
struct RelaxationCache {
    solved: Option<std::result::Result<(RelaxedSolution, Duration), String>>,
}

impl RelaxationCache {
    fn get(&mut self, channels: &ChannelSet, cfg: &SdrConfig) -> std::result::Result<&(RelaxedSolution, Duration), String> {
        self.solved
            .get_or_insert_with(|| {
                let start = Instant::now();
                solve_relaxed(&channels.sections[0], cfg)
                    .map(|s| (s, start.elapsed()))
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// Runs all methods on realization `r`.
pub fn run_realization(spec: &ExperimentSpec, r: usize) -> Result<Vec<ResultRecord>> {
    let seed = spec.realization_seed(r);
    let scenario = generate_scenario(&ScenarioParams {
        seed,
        ..spec.scenario_params.clone()
    })?;
    let hash = scenario_hash(&scenario)?;
    let full = ChannelSet::from_scenario(&scenario);
    let merged = full.merged();
    let mut cache = RelaxationCache { solved: None };
    let mut records = Vec::new();

    for &method in &spec.methods {
        let channels = if method.is_single_beam() { &merged } else { &full };
        let method_seed = mix_seed(seed, method.seed_tag());
        for n_trial in spec.n_trial.for_method(method) {
            let settings = spec.settings(method_seed, n_trial);
            let outcome = match method {
                Method::SdrR | Method::Ub => cached_relaxation(&mut cache, channels, method, &settings),
                _ => run_method(channels, method, &settings)
                    .map(|o| (o.utility_bits, o.beams, o.wall_time, o.diagnostics))
                    .map_err(|e| e.to_string()),
            };
            let mut record = ResultRecord {
                realization_id: r,
                method,
                num_hotspots: scenario.hotspots.len(),
                num_sections: scenario.num_sections,
                n_trial,
                utility_bits: None,
                wall_time_seconds: 0.0,
                scenario_hash: hash.clone(),
                beam_matrix: None,
                diagnostics: json!({}),
                error: None,
            };
            match outcome {
                Ok((utility, beams, time, diagnostics)) => {
                    record.utility_bits = Some(utility);
                    record.wall_time_seconds = time.as_secs_f64();
                    record.diagnostics = diagnostics;
                    if spec.save_beams {
                        record.beam_matrix = beams;
                    }
                }
                Err(e) => record.error = Some(e),
            }
            records.push(record);
        }
    }
    Ok(records)
}

type Outcome = std::result::Result<(f64, Option<BeamMatrix>, Duration, serde_json::Value), String>;

fn cached_relaxation(cache: &mut RelaxationCache, channels: &ChannelSet, method: Method, settings: &MethodSettings) -> Outcome {
    let (solution, solve_time) = cache.get(channels, &settings.sdr)?;
    if method == Method::Ub {
        let diag = json!({
            "kkt_residual": solution.kkt_residual,
            "duality_gap_nats": solution.duality_gap,
            "rank_one": solution.rank_one,
            "solver_iterations": solution.diagnostics.iterations,
        });
        return Ok((solution.upper_bound_bits(), None, *solve_time, diag));
    }
    let start = Instant::now();
    let (beams, diag) = round_relaxed(solution, channels, settings).map_err(|e| e.to_string())?;
    let time = *solve_time + start.elapsed();
    let utility = crate::objective::network_utility(&beams, channels)
        .map_err(|e| e.to_string())?
        .utility_bits;
    Ok((utility, Some(beams), time, diag))
}

pub fn write_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}

/// Step points `(x_(i), i/n)` of the empirical CDF; ties collapse to one step.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(HybfError::EmptyInput("cdf values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.into_iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => points.push((v, p)),
        }
    }
    Ok(points)
}

/// Lower empirical quantile: the smallest value whose CDF reaches `p`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    let cdf = empirical_cdf(values)?;
    Ok(cdf
        .iter()
        .find(|(_, q)| *q >= p - 1e-12)
        .map_or(cdf[cdf.len() - 1].0, |(v, _)| *v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Utility,
    Runtime,
    Cdf,
}

impl std::str::FromStr for TableKind {
    type Err = HybfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utility" => Ok(TableKind::Utility),
            "runtime" => Ok(TableKind::Runtime),
            "cdf" => Ok(TableKind::Cdf),
            other => Err(HybfError::InvalidInput(format!("unknown table '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub num_hotspots: usize,
    pub num_sections: usize,
    pub method: Method,
    pub n_trial: Option<usize>,
    pub count: usize,
    pub failures: usize,
    pub mean_utility_bits: f64,
    pub mean_wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Per `(K, L, method, n_trial)` group: CDF of the successful utilities.
    pub cdfs: Vec<(SummaryKey, Vec<(f64, f64)>)>,
}

pub type SummaryKey = (usize, usize, Method, Option<usize>);

/// Means per `(K, L, method, n_trial)`; failed records are counted but
/// excluded from the means.
pub fn summarize(records: &[ResultRecord]) -> Summary {
    let mut groups: BTreeMap<SummaryKey, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.num_hotspots, r.num_sections, r.method, r.n_trial))
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    let mut cdfs = Vec::new();
    for (key, recs) in groups {
        let ok: Vec<&ResultRecord> = recs.iter().copied().filter(|r| !r.failed()).collect();
        let utilities: Vec<f64> = ok.iter().filter_map(|r| r.utility_bits).collect();
        let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let times: Vec<f64> = ok.iter().map(|r| r.wall_time_seconds).collect();
        rows.push(SummaryRow {
            num_hotspots: key.0,
            num_sections: key.1,
            method: key.2,
            n_trial: key.3,
            count: recs.len(),
            failures: recs.len() - ok.len(),
            mean_utility_bits: mean(&utilities),
            mean_wall_time_seconds: mean(&times),
        });
        if let Ok(cdf) = empirical_cdf(&utilities) {
            cdfs.push((key, cdf));
        }
    }
    Summary { rows, cdfs }
}

impl Summary {
    pub fn row(&self, k: usize, l: usize, method: Method, n_trial: Option<usize>) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.num_hotspots == k && r.num_sections == l && r.method == method && r.n_trial == n_trial)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "K",
            "L",
            "method",
            "n_trial",
            "count",
            "failures",
            "mean_utility_bits",
            "mean_wall_time_seconds",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.num_hotspots.to_string(),
                r.num_sections.to_string(),
                r.method.to_string(),
                r.n_trial.map_or(String::new(), |n| n.to_string()),
                r.count.to_string(),
                r.failures.to_string(),
                format!("{:.6}", r.mean_utility_bits),
                format!("{:.6}", r.mean_wall_time_seconds),
            ])
            .map_err(csv_err)?;
        }
        csv_string(w)
    }

    /// CDF points as CSV with columns `K, L, method, n_trial, utility_bits, probability`.
    pub fn cdf_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["K", "L", "method", "n_trial", "utility_bits", "probability"])
            .map_err(csv_err)?;
        for ((k, l, m, n), points) in &self.cdfs {
            for (v, p) in points {
                w.write_record([
                    k.to_string(),
                    l.to_string(),
                    m.to_string(),
                    n.map_or(String::new(), |n| n.to_string()),
                    format!("{v:.6}"),
                    format!("{p:.6}"),
                ])
                .map_err(csv_err)?;
            }
        }
        csv_string(w)
    }

    /// Human-readable table: one row per method and trial count, one column
    /// per `(K, L)`.
    pub fn render(&self, kind: TableKind) -> String {
        if kind == TableKind::Cdf {
            return self.cdf_csv().unwrap_or_default();
        }
        let mut setups: Vec<(usize, usize)> = self.rows.iter().map(|r| (r.num_hotspots, r.num_sections)).collect();
        setups.sort();
        setups.dedup();
        let mut lines: Vec<(Method, Option<usize>)> = self.rows.iter().map(|r| (r.method, r.n_trial)).collect();
        lines.sort();
        lines.dedup();

        let mut out = String::new();
        let title = match kind {
            TableKind::Utility => "mean network utility (bps/Hz)",
            _ => "mean run time (s)",
        };
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<10} {:>8}", "method", "N_trial");
        for (k, l) in &setups {
            let _ = write!(out, " {:>12}", format!("K={k} L={l}"));
        }
        out.push('\n');
        for (m, n) in lines {
            let _ = write!(out, "{:<10} {:>8}", m.name(), n.map_or("-".to_string(), |n| n.to_string()));
            for (k, l) in &setups {
                let cell = self.row(*k, *l, m, n).map_or("".to_string(), |r| {
                    let v = match kind {
                        TableKind::Utility => r.mean_utility_bits,
                        _ => r.mean_wall_time_seconds,
                    };
                    if r.failures > 0 {
                        format!("{v:.4}*")
                    } else {
                        format!("{v:.4}")
                    }
                });
                let _ = write!(out, " {cell:>12}");
            }
            out.push('\n');
        }
        if self.rows.iter().any(|r| r.failures > 0) {
            out.push_str("* some records failed and were excluded\n");
        }
        out
    }
}

fn csv_err(e: csv::Error) -> HybfError {
    HybfError::Io(std::io::Error::other(e))
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| HybfError::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| HybfError::Io(std::io::Error::other(e)))
}
