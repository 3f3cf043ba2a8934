//! Uniform entry point over all beam design methods.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channel::ChannelSet;
use crate::composition::{mb_sbc, sb_posbc, sb_sbc, CompositionVariant, PhaseTrialConfig};
use crate::error::{HybfError, Result};
use crate::gradproj::{gp_optimize, GpConfig};
use crate::objective::{network_utility, single_beam_utility, BeamMatrix};
use crate::projection::project_to_papc;
use crate::sdr::{randomize_round, solve_relaxed, RelaxedSolution, RoundingConfig, SdrConfig};
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SB-SBC")]
    SbSbc,
    #[serde(rename = "SB-POSBC")]
    SbPosbc,
    #[serde(rename = "SDR-R")]
    SdrR,
    #[serde(rename = "GP")]
    Gp,
    #[serde(rename = "MB-SBC")]
    MbSbc,
    #[serde(rename = "MB-POSBC")]
    MbPosbc,
    #[serde(rename = "MB-GP")]
    MbGp,
    #[serde(rename = "UB")]
    Ub,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::SbSbc,
        Method::SbPosbc,
        Method::SdrR,
        Method::Gp,
        Method::MbSbc,
        Method::MbPosbc,
        Method::MbGp,
        Method::Ub,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SbSbc => "SB-SBC",
            Method::SbPosbc => "SB-POSBC",
            Method::SdrR => "SDR-R",
            Method::Gp => "GP",
            Method::MbSbc => "MB-SBC",
            Method::MbPosbc => "MB-POSBC",
            Method::MbGp => "MB-GP",
            Method::Ub => "UB",
        }
    }

    /// Methods that design one beam for all hotspots.
    pub fn is_single_beam(&self) -> bool {
        !matches!(self, Method::MbSbc | Method::MbPosbc | Method::MbGp)
    }

    /// Methods whose result depends on a random-trial count.
    pub fn uses_trials(&self) -> bool {
        matches!(self, Method::SbPosbc | Method::SdrR | Method::MbPosbc)
    }

    /// Stable per-method tag used to derive method seeds.
    pub fn seed_tag(&self) -> u64 {
        Method::ALL.iter().position(|m| m == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HybfError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == norm)
            .ok_or_else(|| HybfError::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Starting point for gradient projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpInit {
    /// Multi-beam sub-beam composition (plain SBC per section).
    #[default]
    Sbc,
    /// Phase-optimized composition per section.
    Posbc,
    /// Random feasible matrix.
    Random,
}

/// Tunables shared by every method run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    pub n_trial: usize,
    pub seed: u64,
    pub gp: GpConfig,
    pub gp_init: GpInit,
    pub sdr: SdrConfig,
    pub rounding: RoundingConfig,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            n_trial: 1000,
            seed: 0,
            gp: GpConfig::default(),
            gp_init: GpInit::Sbc,
            sdr: SdrConfig::default(),
            rounding: RoundingConfig::new(1000, 0),
        }
    }
}

/// Result of one method run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `None` for the upper bound, which has no beamformer.
    pub beams: Option<BeamMatrix>,
    pub utility_bits: f64,
    pub wall_time: Duration,
    pub diagnostics: serde_json::Value,
}

fn require_single_section(channels: &ChannelSet, method: Method) -> Result<()> {
    if channels.num_sections() != 1 {
        return Err(HybfError::InvalidInput(format!(
            "{method} designs a single beam but the scenario has {} sections",
            channels.num_sections()
        )));
    }
    Ok(())
}

fn bits_of(beams: &BeamMatrix, channels: &ChannelSet) -> Result<f64> {
    Ok(network_utility(beams, channels)?.utility_bits)
}

fn gp_start(channels: &ChannelSet, settings: &MethodSettings) -> Result<BeamMatrix> {
    match settings.gp_init {
        GpInit::Sbc => Ok(mb_sbc(channels, CompositionVariant::Plain)?.beams),
        GpInit::Posbc => Ok(mb_sbc(
            channels,
            CompositionVariant::PhaseOptimized(PhaseTrialConfig::new(settings.n_trial.max(1), settings.seed)),
        )?
        .beams),
        GpInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let raw = CMatrix::from_fn(channels.num_elements, channels.num_sections(), |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            project_to_papc(&raw)
        }
    }
}

/// Rounds an already-solved relaxation; split out so callers can share one
/// solve across several trial counts.
pub fn round_relaxed(
    solution: &RelaxedSolution,
    channels: &ChannelSet,
    settings: &MethodSettings,
) -> Result<(BeamMatrix, serde_json::Value)> {
    let links = &channels.sections[0];
    let cfg = RoundingConfig {
        num_trials: settings.n_trial,
        seed: settings.seed,
        ..settings.rounding
    };
    let out = randomize_round(solution, &cfg, |w| single_beam_utility(w, links));
    let diag = json!({
        "upper_bound_bits": solution.upper_bound_bits(),
        "rank_one": solution.rank_one,
        "kkt_residual": solution.kkt_residual,
        "solver_iterations": solution.diagnostics.iterations,
        "candidate_index": out.candidate_index,
    });
    Ok((BeamMatrix::from_column(&out.beam), diag))
}

/// Runs `method` on `channels` and evaluates the resulting utility.
pub fn run_method(channels: &ChannelSet, method: Method, settings: &MethodSettings) -> Result<MethodOutcome> {
    let start = Instant::now();
    let (beams, diagnostics) = match method {
        Method::SbSbc => {
            require_single_section(channels, method)?;
            (BeamMatrix::from_column(&sb_sbc(&channels.sections[0])?), json!({}))
        }
        Method::SbPosbc => {
            require_single_section(channels, method)?;
            let links = &channels.sections[0];
            let cfg = PhaseTrialConfig::new(settings.n_trial, settings.seed);
            let out = sb_posbc(links, &cfg, |w| single_beam_utility(w, links))?;
            (
                BeamMatrix::from_column(&out.beam),
                json!({"phases": out.phases, "trial_index": out.trial_index}),
            )
        }
        Method::SdrR | Method::Ub => {
            require_single_section(channels, method)?;
            let solution = solve_relaxed(&channels.sections[0], &settings.sdr)?;
            if method == Method::Ub {
                let diag = json!({
                    "rank_one": solution.rank_one,
                    "kkt_residual": solution.kkt_residual,
                    "solver": solution.diagnostics,
                    "eigenvalues": solution.eigenvalues.iter().take(4).collect::<Vec<_>>(),
                });
                return Ok(MethodOutcome {
                    method,
                    beams: None,
                    utility_bits: solution.upper_bound_bits(),
                    wall_time: start.elapsed(),
                    diagnostics: diag,
                });
            }
            round_relaxed(&solution, channels, settings)?
        }
        Method::Gp => {
            require_single_section(channels, method)?;
            run_gp(channels, settings)?
        }
        Method::MbGp => run_gp(channels, settings)?,
        Method::MbSbc => (mb_sbc(channels, CompositionVariant::Plain)?.beams, json!({})),
        Method::MbPosbc => {
            let cfg = PhaseTrialConfig::new(settings.n_trial, settings.seed);
            let out = mb_sbc(channels, CompositionVariant::PhaseOptimized(cfg))?;
            (out.beams, json!({"phases": out.phases}))
        }
    };
    let wall_time = start.elapsed();
    Ok(MethodOutcome {
        method,
        utility_bits: bits_of(&beams, channels)?,
        beams: Some(beams),
        wall_time,
        diagnostics,
    })
}

fn run_gp(channels: &ChannelSet, settings: &MethodSettings) -> Result<(BeamMatrix, serde_json::Value)> {
    let init = gp_start(channels, settings)?;
    let (beams, trace) = gp_optimize(&init, channels, &settings.gp)?;
    let diag = json!({
        "iterations": trace.iterations,
        "termination": trace.termination_reason,
        "initial_utility_bits": trace.utilities[0] / LN_2,
    });
    Ok((beams, diag))
}
