//! Sub-beam composition heuristics.
//!
//! A single-section beam is built by summing the conjugate beams of the
//! section's hotspots, optionally rotating each by a trial phase, and
//! projecting the sum onto the power constraint set. Multi-beam variants run
//! the single-section routine per section and split the power equally.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{unit_phasor, ChannelSet, Link};
use crate::error::{HybfError, Result};
use crate::objective::{single_beam_utility, BeamMatrix};
use crate::projection::project_in_place;
use crate::seed::mix_seed;
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTrialConfig {
    pub num_trials: usize,
    pub seed: u64,
    /// Use the all-zero phase vector as the first trial.
    pub include_zero_phases: bool,
}

impl PhaseTrialConfig {
    pub fn new(num_trials: usize, seed: u64) -> Self {
        Self {
            num_trials,
            seed,
            include_zero_phases: true,
        }
    }
}

impl Default for PhaseTrialConfig {
    fn default() -> Self {
        Self::new(1000, 0)
    }
}

/// Best phase-optimized beam after some number of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PosbcOutcome {
    pub beam: CVector,
    pub phases: Vec<f64>,
    /// Evaluator value of `beam`.
    pub utility: f64,
    /// Zero-based index of the winning trial.
    pub trial_index: usize,
    pub trials_run: usize,
}

/// Conjugate beam `h/√M`; every antenna sits exactly at the power cap.
pub fn conjugate_bf(h: &CVector) -> CVector {
    h / C64::new((h.len() as f64).sqrt(), 0.0)
}

fn composed(links: &[Link], phases: Option<&[f64]>) -> CVector {
    let m = links[0].steering.len();
    let mut sum = CVector::zeros(m);
    for (i, l) in links.iter().enumerate() {
        let rot = phases.map_or(C64::new(1.0, 0.0), |p| unit_phasor(p[i]));
        sum.axpy(rot, &l.steering, C64::new(1.0, 0.0));
    }
    sum /= C64::new((m as f64).sqrt(), 0.0);
    let mut mat = CMatrix::from_column_slice(m, 1, sum.as_slice());
    project_in_place(&mut mat);
    CVector::from_column_slice(mat.as_slice())
}

/// Projected sum of the conjugate beams of one section.
pub fn sb_sbc(links: &[Link]) -> Result<CVector> {
    if links.is_empty() {
        return Err(HybfError::EmptyInput("section hotspots"));
    }
    Ok(composed(links, None))
}

/// Phase-optimized composition with random trials; keeps the best trial
/// under `evaluator` (ties go to the earliest trial).
pub fn sb_posbc<F>(links: &[Link], trials: &PhaseTrialConfig, evaluator: F) -> Result<PosbcOutcome>
where
    F: Fn(&CVector) -> f64,
{
    let mut out = sb_posbc_checkpoints(links, trials, &[trials.num_trials], evaluator)?;
    Ok(out.pop().expect("one checkpoint requested"))
}

/// Runs one trial sequence and reports the incumbent after each checkpoint
/// trial count. Because trial sequences are nested, results for smaller
/// counts are exactly what a shorter run with the same seed would return.
pub fn sb_posbc_checkpoints<F>(
    links: &[Link],
    trials: &PhaseTrialConfig,
    checkpoints: &[usize],
    evaluator: F,
) -> Result<Vec<PosbcOutcome>>
where
    F: Fn(&CVector) -> f64,
{
    if links.is_empty() {
        return Err(HybfError::EmptyInput("section hotspots"));
    }
    if trials.num_trials == 0 {
        return Err(HybfError::InvalidInput("need at least one phase trial".into()));
    }
    if checkpoints.iter().any(|&c| c == 0) {
        return Err(HybfError::InvalidInput("trial checkpoints must be positive".into()));
    }
    let total = checkpoints.iter().copied().max().unwrap_or(trials.num_trials);
    let mut rng = ChaCha8Rng::seed_from_u64(trials.seed);
    let mut best: Option<PosbcOutcome> = None;
    let mut reports: Vec<Option<PosbcOutcome>> = vec![None; checkpoints.len()];
    let mut phases = vec![0.0; links.len()];
    for t in 0..total {
        if t > 0 || !trials.include_zero_phases {
            for p in phases.iter_mut() {
                *p = rng.gen_range(0.0..2.0 * PI);
            }
        }
        let beam = composed(links, Some(&phases));
        let u = evaluator(&beam);
        if best.as_ref().map_or(true, |b| u > b.utility) {
            best = Some(PosbcOutcome {
                beam,
                phases: phases.clone(),
                utility: u,
                trial_index: t,
                trials_run: t + 1,
            });
        }
        for (slot, _) in reports.iter_mut().zip(checkpoints).filter(|(_, &c)| c == t + 1) {
            let mut b = best.clone().expect("at least one trial evaluated");
            b.trials_run = t + 1;
            *slot = Some(b);
        }
    }
    Ok(reports.into_iter().map(|r| r.expect("checkpoint reached")).collect())
}

/// Which single-section routine the multi-beam composition uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompositionVariant {
    Plain,
    PhaseOptimized(PhaseTrialConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiBeamOutcome {
    pub beams: BeamMatrix,
    /// Winning phase vector per section (empty for the plain variant).
    pub phases: Vec<Vec<f64>>,
}

/// Multi-beam composition: one independently designed beam per section,
/// each scaled by `1/√L`. Inter-beam interference is ignored by design of the
/// heuristic.
pub fn mb_sbc(channels: &ChannelSet, variant: CompositionVariant) -> Result<MultiBeamOutcome> {
    let l = channels.num_sections();
    if l == 0 {
        return Err(HybfError::EmptyInput("sections"));
    }
    let scale = C64::new(1.0 / (l as f64).sqrt(), 0.0);
    let mut cols = Vec::with_capacity(l);
    let mut phases = Vec::with_capacity(l);
    for (s, links) in channels.sections.iter().enumerate() {
        if links.is_empty() {
            return Err(HybfError::InvalidInput(format!("section {s} has no hotspots")));
        }
        let beam = match variant {
            CompositionVariant::Plain => {
                phases.push(Vec::new());
                sb_sbc(links)?
            }
            CompositionVariant::PhaseOptimized(cfg) => {
                let section_cfg = PhaseTrialConfig {
                    seed: mix_seed(cfg.seed, s as u64),
                    ..cfg
                };
                let best = sb_posbc(links, &section_cfg, |w| single_beam_utility(w, links))?;
                phases.push(best.phases);
                best.beam
            }
        };
        cols.push(beam * scale);
    }
    Ok(MultiBeamOutcome {
        beams: BeamMatrix::from_columns(&cols)?,
        phases,
    })
}
