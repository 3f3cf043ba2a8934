//! Array geometry, long-term channel model and random scenario generation.
//!
//! Channels are line-of-sight Vandermonde steering vectors scaled by a
//! distance-based pathloss. A [`Scenario`] is the serializable problem
//! instance; a [`ChannelSet`] is the derived numeric form consumed by the
//! optimizers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HybfError, Result};
use crate::{CMatrix, CVector, C64};

/// Scenario resampling budget when a section ends up without hotspots.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Tolerance used when checking that section weights sum to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Element layout of the phased array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrayLayout {
    /// Uniform linear array with `elements` antennas along the horizontal axis.
    Linear { elements: usize },
    /// Uniform rectangular array; rows are stacked vertically, columns run horizontally.
    Rectangular { rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub layout: ArrayLayout,
    /// Element spacing in wavelengths (d/λ).
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn linear(elements: usize, spacing: f64) -> Result<Self> {
        let g = Self {
            layout: ArrayLayout::Linear { elements },
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn rectangular(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        let g = Self {
            layout: ArrayLayout::Rectangular { rows, cols },
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// The 4×12 half-wavelength array used in the macro-cell experiments.
    pub fn macro_cell_default() -> Self {
        Self {
            layout: ArrayLayout::Rectangular { rows: 4, cols: 12 },
            spacing: 0.5,
        }
    }

    pub fn num_elements(&self) -> usize {
        match self.layout {
            ArrayLayout::Linear { elements } => elements,
            ArrayLayout::Rectangular { rows, cols } => rows * cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count_ok = match self.layout {
            ArrayLayout::Linear { elements } => elements >= 1,
            ArrayLayout::Rectangular { rows, cols } => rows >= 1 && cols >= 1,
        };
        if !count_ok {
            return Err(HybfError::InvalidInput(
                "array must have at least one element".into(),
            ));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(HybfError::InvalidInput(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }
}

/// A cluster of users sharing one long-term channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    /// Zero-based section (beam) index.
    pub section: usize,
    /// Radians relative to array broadside.
    pub azimuth: f64,
    /// Radians, 0 at the horizon, negative below the array.
    pub elevation: f64,
    /// Metres (3D distance).
    pub distance: f64,
    /// Fraction of the section's users located at this hotspot.
    pub weight: f64,
    /// Linear pathloss gain β.
    pub pathloss: f64,
}

/// How hotspot radii are drawn inside the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialPlacement {
    /// Uniform over the annulus area (radius CDF ∝ r²).
    #[default]
    AreaUniform,
    /// Uniform in radius.
    RadiusUniform,
}

/// Parameter record for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub num_hotspots: usize,
    pub num_sections: usize,
    /// Ground distance, metres.
    pub ring_inner: f64,
    /// Ground distance, metres.
    pub ring_outer: f64,
    /// Radians, centred on broadside.
    pub sector_width: f64,
    pub geometry: ArrayGeometry,
    /// Watts.
    pub tx_power: f64,
    /// Watts.
    pub noise_power: f64,
    /// Metres above ground.
    pub bs_height: f64,
    /// Metres above ground.
    pub hotspot_height: f64,
    pub radial: RadialPlacement,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            num_hotspots: 4,
            num_sections: 1,
            ring_inner: 300.0,
            ring_outer: 577.0,
            sector_width: 120f64.to_radians(),
            geometry: ArrayGeometry::macro_cell_default(),
            tx_power: dbm_to_watts(20.0),
            noise_power: thermal_noise_watts(-174.0, 20e6),
            bs_height: 30.0,
            hotspot_height: 1.5,
            radial: RadialPlacement::AreaUniform,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.num_sections == 0 {
            return Err(HybfError::InvalidInput("need at least one section".into()));
        }
        if self.num_hotspots < self.num_sections {
            return Err(HybfError::InvalidInput(format!(
                "{} hotspots cannot populate {} sections",
                self.num_hotspots, self.num_sections
            )));
        }
        if !(self.ring_inner >= 0.0 && self.ring_inner < self.ring_outer) {
            return Err(HybfError::InvalidInput(format!(
                "ring radii must satisfy 0 <= inner < outer (got {} / {})",
                self.ring_inner, self.ring_outer
            )));
        }
        if !(self.sector_width > 0.0 && self.sector_width < PI) {
            return Err(HybfError::InvalidInput(
                "sector width must be in (0, π)".into(),
            ));
        }
        if !(self.tx_power > 0.0 && self.noise_power > 0.0) {
            return Err(HybfError::InvalidInput(
                "transmit and noise power must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Provenance block stored alongside generated scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub generator: Option<ScenarioParams>,
    pub seed: Option<u64>,
}

/// A complete single-cell problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub num_sections: usize,
    pub hotspots: Vec<Hotspot>,
    /// Watts.
    pub tx_power: f64,
    /// Watts.
    pub noise_power: f64,
    /// Azimuth interval `[lo, hi)` of each section, radians.
    pub section_boundaries: Vec<(f64, f64)>,
    #[serde(default)]
    pub metadata: Option<ScenarioMetadata>,
}

/// Hotspot position used by [`Scenario::from_placements`].
#[derive(Debug, Clone, Copy)]
pub struct Placement {
    pub section: usize,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

impl Scenario {
    /// Builds a scenario from explicit hotspot positions, with equal weights
    /// per section and pathloss derived from distance.
    pub fn from_placements(
        geometry: ArrayGeometry,
        section_boundaries: Vec<(f64, f64)>,
        placements: &[Placement],
        tx_power: f64,
        noise_power: f64,
    ) -> Result<Self> {
        let num_sections = section_boundaries.len();
        let mut counts = vec![0usize; num_sections];
        for p in placements {
            if p.section >= num_sections {
                return Err(HybfError::InvalidInput(format!(
                    "hotspot section {} out of range",
                    p.section
                )));
            }
            counts[p.section] += 1;
        }
        let hotspots = placements
            .iter()
            .map(|p| {
                Ok(Hotspot {
                    section: p.section,
                    azimuth: p.azimuth,
                    elevation: p.elevation,
                    distance: p.distance,
                    weight: 1.0 / counts[p.section] as f64,
                    pathloss: pathloss(p.distance / 1000.0)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sc = Scenario {
            geometry,
            num_sections,
            hotspots,
            tx_power,
            noise_power,
            section_boundaries,
            metadata: None,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.num_elements()
    }

    /// SNR coefficient γ = Pβ/σ² of one hotspot.
    pub fn snr_coeff(&self, hotspot: &Hotspot) -> f64 {
        self.tx_power * hotspot.pathloss / self.noise_power
    }

    /// Number of hotspots in each section.
    pub fn section_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_sections];
        for h in &self.hotspots {
            if h.section < self.num_sections {
                counts[h.section] += 1;
            }
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.num_sections == 0 {
            return Err(HybfError::InvalidInput("scenario has no sections".into()));
        }
        if self.section_boundaries.len() != self.num_sections {
            return Err(HybfError::InvalidInput(format!(
                "{} section boundaries for {} sections",
                self.section_boundaries.len(),
                self.num_sections
            )));
        }
        if !(self.tx_power > 0.0 && self.noise_power > 0.0) {
            return Err(HybfError::InvalidInput(
                "transmit and noise power must be positive".into(),
            ));
        }
        let mut weight_sums = vec![0.0; self.num_sections];
        for (k, h) in self.hotspots.iter().enumerate() {
            if h.section >= self.num_sections {
                return Err(HybfError::InvalidInput(format!(
                    "hotspot {k} refers to section {}",
                    h.section
                )));
            }
            if !(h.distance > 0.0 && h.pathloss > 0.0) {
                return Err(HybfError::InvalidInput(format!(
                    "hotspot {k} needs positive distance and pathloss"
                )));
            }
            if !(h.weight > 0.0 && h.weight <= 1.0) {
                return Err(HybfError::InvalidInput(format!(
                    "hotspot {k} weight {} outside (0, 1]",
                    h.weight
                )));
            }
            let (lo, hi) = self.section_boundaries[h.section];
            if h.azimuth < lo || h.azimuth > hi {
                return Err(HybfError::InvalidInput(format!(
                    "hotspot {k} azimuth {} outside section interval [{lo}, {hi}]",
                    h.azimuth
                )));
            }
            weight_sums[h.section] += h.weight;
        }
        for (s, sum) in weight_sums.iter().enumerate() {
            if *sum == 0.0 {
                return Err(HybfError::InvalidInput(format!("section {s} has no hotspots")));
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(HybfError::InvalidInput(format!(
                    "weights of section {s} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Channel of one hotspot as seen by the optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    /// Unit-modulus spatial signature h.
    pub steering: CVector,
    /// SNR coefficient γ = Pβ/σ².
    pub gamma: f64,
    /// User-fraction weight α.
    pub weight: f64,
}

/// Numeric channel data grouped by section.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub num_elements: usize,
    pub sections: Vec<Vec<Link>>,
}

impl ChannelSet {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let mut sections = vec![Vec::new(); scenario.num_sections];
        for h in &scenario.hotspots {
            sections[h.section].push(Link {
                steering: steering_vector(&scenario.geometry, h.azimuth, h.elevation),
                gamma: scenario.snr_coeff(h),
                weight: h.weight,
            });
        }
        Self {
            num_elements: scenario.num_elements(),
            sections,
        }
    }

    /// Single-section channel set from explicit links.
    pub fn single_section(links: Vec<Link>) -> Self {
        let num_elements = links.first().map_or(0, |l| l.steering.len());
        Self {
            num_elements,
            sections: vec![links],
        }
    }

    /// All hotspots in one section, as served by a single beam. A hotspot's
    /// weight becomes `α·K_s/K`: the fraction of all users it holds.
    pub fn merged(&self) -> Self {
        let total = self.num_hotspots() as f64;
        let links = self
            .sections
            .iter()
            .flat_map(|sec| {
                let scale = sec.len() as f64 / total;
                sec.iter().map(move |l| Link {
                    weight: l.weight * scale,
                    ..l.clone()
                })
            })
            .collect();
        Self {
            num_elements: self.num_elements,
            sections: vec![links],
        }
    }

    pub fn num_sections(&self) -> usize {
        self.sections.len()
    }

    pub fn num_hotspots(&self) -> usize {
        self.sections.iter().map(Vec::len).sum()
    }

    pub fn link(&self, section: usize, index: usize) -> Result<&Link> {
        self.sections
            .get(section)
            .and_then(|s| s.get(index))
            .ok_or(HybfError::UnknownHotspot { section, index })
    }

    /// Iterates `(section, index, link)` over every hotspot.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Link)> {
        self.sections
            .iter()
            .enumerate()
            .flat_map(|(s, links)| links.iter().enumerate().map(move |(i, l)| (s, i, l)))
    }
}

fn vandermonde(len: usize, theta: f64) -> impl Iterator<Item = f64> {
    (1..=len).map(move |m| m as f64 * theta)
}

/// Array response toward (azimuth, elevation).
///
/// A linear array uses `e^{j m θ}` with `θ = 2π d sin(azimuth)`, m = 1..M. A
/// rectangular array is the Kronecker product of a vertical response
/// (phase ∝ sin(elevation)) and a horizontal one (phase ∝ sin(azimuth)·cos(elevation)),
/// element index `row * cols + col`.
pub fn steering_vector(geometry: &ArrayGeometry, azimuth: f64, elevation: f64) -> CVector {
    let k = 2.0 * PI * geometry.spacing;
    match geometry.layout {
        ArrayLayout::Linear { elements } => {
            let theta = k * azimuth.sin();
            DVector::from_iterator(elements, vandermonde(elements, theta).map(unit_phasor))
        }
        ArrayLayout::Rectangular { rows, cols } => {
            let theta_h = k * azimuth.sin() * elevation.cos();
            let theta_v = k * elevation.sin();
            let mut h = DVector::zeros(rows * cols);
            for (r, pv) in vandermonde(rows, theta_v).enumerate() {
                for (c, ph) in vandermonde(cols, theta_h).enumerate() {
                    h[r * cols + c] = unit_phasor(pv + ph);
                }
            }
            h
        }
    }
}

#[inline]
pub(crate) fn unit_phasor(phase: f64) -> C64 {
    let (s, c) = phase.sin_cos();
    C64::new(c, s)
}

/// Linear pathloss gain from the macro-cell model `128.1 + 37.6 log10(d_km)` dB.
pub fn pathloss(distance_km: f64) -> Result<f64> {
    if !(distance_km.is_finite() && distance_km > 0.0) {
        return Err(HybfError::InvalidInput(format!(
            "distance must be positive, got {distance_km} km"
        )));
    }
    Ok(10f64.powf(-pathloss_db(distance_km) / 10.0))
}

pub fn pathloss_db(distance_km: f64) -> f64 {
    128.1 + 37.6 * distance_km.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power over `bandwidth_hz` for a density given in dBm/Hz.
pub fn thermal_noise_watts(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// Rank-one matrix `γ h hᴴ` of a hotspot.
pub fn build_q(channels: &ChannelSet, section: usize, index: usize) -> Result<CMatrix> {
    let link = channels.link(section, index)?;
    let h = &link.steering;
    Ok(DMatrix::from_fn(h.len(), h.len(), |r, c| {
        h[r] * h[c].conj() * link.gamma
    }))
}

/// Equal azimuth sub-sectors partitioning a sector centred on broadside.
pub fn equal_sections(sector_width: f64, num_sections: usize) -> Vec<(f64, f64)> {
    let lo = -sector_width / 2.0;
    let step = sector_width / num_sections as f64;
    (0..num_sections)
        .map(|s| {
            let a = lo + step * s as f64;
            let b = if s + 1 == num_sections {
                sector_width / 2.0
            } else {
                lo + step * (s + 1) as f64
            };
            (a, b)
        })
        .collect()
}

/// Draws a random macro-cell scenario. Pure function of `params` (seed included).
pub fn generate_scenario(params: &ScenarioParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let boundaries = equal_sections(params.sector_width, params.num_sections);
    let half = params.sector_width / 2.0;
    let step = params.sector_width / params.num_sections as f64;
    let dh = params.hotspot_height - params.bs_height;
    let (ri2, ro2) = (params.ring_inner.powi(2), params.ring_outer.powi(2));

    let mut last_empty = 0;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut placements = Vec::with_capacity(params.num_hotspots);
        for _ in 0..params.num_hotspots {
            let u: f64 = rng.gen();
            let ground = match params.radial {
                RadialPlacement::AreaUniform => (ri2 + u * (ro2 - ri2)).sqrt(),
                RadialPlacement::RadiusUniform => {
                    params.ring_inner + u * (params.ring_outer - params.ring_inner)
                }
            };
            let azimuth = rng.gen_range(-half..half);
            let section = (((azimuth + half) / step).floor() as usize).min(params.num_sections - 1);
            placements.push(Placement {
                section,
                azimuth,
                elevation: dh.atan2(ground),
                distance: ground.hypot(dh),
            });
        }
        let mut counts = vec![0usize; params.num_sections];
        for p in &placements {
            counts[p.section] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            last_empty = empty;
            continue;
        }
        let mut sc = Scenario::from_placements(
            params.geometry,
            boundaries,
            &placements,
            params.tx_power,
            params.noise_power,
        )?;
        sc.metadata = Some(ScenarioMetadata {
            generator: Some(params.clone()),
            seed: Some(params.seed),
        });
        return Ok(sc);
    }
    Err(HybfError::EmptySection {
        section: last_empty,
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}
