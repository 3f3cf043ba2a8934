//! SINR, weighted network utility, its gradient, and beam-pattern gain.
//!
//! Quadratic forms `wᴴ Q w` are evaluated through the rank-one factorization
//! `γ |hᴴ w|²` so no M×M matrix is ever formed on the hot path.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::channel::{steering_vector, ArrayGeometry, ChannelSet, Link};
use crate::error::{HybfError, Result};
use crate::projection::{feasibility_margin, FEASIBILITY_TOL};
use crate::{CMatrix, CVector, C64};

/// Floor applied to beam-pattern gains, dB.
pub const PATTERN_FLOOR_DB: f64 = -100.0;

/// Complex M×L beamforming matrix; column `s` drives beam `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix(CMatrix);

impl BeamMatrix {
    pub fn new(entries: CMatrix) -> Self {
        Self(entries)
    }

    pub fn zeros(num_elements: usize, num_beams: usize) -> Self {
        Self(DMatrix::zeros(num_elements, num_beams))
    }

    pub fn from_column(w: &CVector) -> Self {
        Self(DMatrix::from_column_slice(w.len(), 1, w.as_slice()))
    }

    /// Stacks per-beam vectors as columns. All vectors must share a length.
    pub fn from_columns(columns: &[CVector]) -> Result<Self> {
        let m = columns.first().map(|c| c.len()).ok_or(HybfError::EmptyInput("beam columns"))?;
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(HybfError::DimensionMismatch {
                expected: format!("{m} elements"),
                got: format!("{} elements", bad.len()),
            });
        }
        Ok(Self(DMatrix::from_columns(columns)))
    }

    pub fn num_elements(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_beams(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn column(&self, s: usize) -> CVector {
        self.0.column(s).into_owned()
    }

    /// Summed power Σ_s |W_ms|² fed to antenna `m`.
    pub fn row_power(&self, m: usize) -> f64 {
        self.0.row(m).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_feasible(&self) -> bool {
        feasibility_margin(self) <= FEASIBILITY_TOL
    }
}

/// Serialized as a list of rows, each a list of `[re, im]` pairs.
impl serde::Serialize for BeamMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.num_elements())
            .map(|m| self.0.row(m).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for BeamMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("beam matrix must be a non-empty rectangular array"));
        }
        Ok(Self(DMatrix::from_fn(rows.len(), cols, |m, s| {
            C64::new(rows[m][s][0], rows[m][s][1])
        })))
    }
}

/// Result of [`network_utility`].
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityReport {
    /// Linear SINR indexed `[section][hotspot]`.
    pub per_hotspot_sinr: Vec<Vec<f64>>,
    pub utility_nats: f64,
    pub utility_bits: f64,
}

fn check_dims(w: &BeamMatrix, channels: &ChannelSet) -> Result<()> {
    if w.num_elements() != channels.num_elements || w.num_beams() != channels.num_sections() {
        return Err(HybfError::DimensionMismatch {
            expected: format!("{}x{}", channels.num_elements, channels.num_sections()),
            got: format!("{}x{}", w.num_elements(), w.num_beams()),
        });
    }
    Ok(())
}

#[inline]
fn projection_onto(link: &Link, w: nalgebra::DVectorView<'_, C64>) -> C64 {
    link.steering.dotc(&w)
}

/// Received power `γ |hᴴ w_t|²` from every beam t at one hotspot.
fn received_powers(w: &CMatrix, link: &Link, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        w.column_iter()
            .map(|col| link.gamma * projection_onto(link, col).norm_sqr()),
    );
}

/// SINR of hotspot `i` in section `s` under beamforming matrix `w`.
pub fn sinr(w: &BeamMatrix, channels: &ChannelSet, s: usize, i: usize) -> Result<f64> {
    check_dims(w, channels)?;
    let link = channels.link(s, i)?;
    let mut p = Vec::new();
    received_powers(w.as_matrix(), link, &mut p);
    Ok(sinr_from_powers(&p, s))
}

#[inline]
fn sinr_from_powers(p: &[f64], s: usize) -> f64 {
    let interference: f64 = p.iter().enumerate().filter(|(t, _)| *t != s).map(|(_, v)| v).sum();
    p[s] / (1.0 + interference)
}

/// Cross-beam power `Σ_{t≠s} γ |hᴴ w_t|²` received at each hotspot, `[section][hotspot]`.
pub fn interference_powers(w: &BeamMatrix, channels: &ChannelSet) -> Result<Vec<Vec<f64>>> {
    check_dims(w, channels)?;
    let mut p = Vec::new();
    Ok(channels
        .sections
        .iter()
        .enumerate()
        .map(|(s, links)| {
            links
                .iter()
                .map(|l| {
                    received_powers(w.as_matrix(), l, &mut p);
                    p.iter().enumerate().filter(|(t, _)| *t != s).map(|(_, v)| v).sum()
                })
                .collect()
        })
        .collect())
}

/// Weighted sum-log utility in nats without feasibility checks.
///
/// Panics if `w` does not have one column per section.
pub fn utility_nats(w: &BeamMatrix, channels: &ChannelSet) -> f64 {
    assert_eq!(w.num_beams(), channels.num_sections(), "beam count != section count");
    let mut p = Vec::with_capacity(w.num_beams());
    let mut total = 0.0;
    for (s, links) in channels.sections.iter().enumerate() {
        for link in links {
            received_powers(w.as_matrix(), link, &mut p);
            total += link.weight * sinr_from_powers(&p, s).ln_1p();
        }
    }
    total
}

/// Interference-free utility of a single beam over one section's hotspots, nats.
pub fn single_beam_utility(w: &CVector, links: &[Link]) -> f64 {
    links
        .iter()
        .map(|l| l.weight * (l.gamma * l.steering.dotc(w).norm_sqr()).ln_1p())
        .sum()
}

/// Evaluates SINRs and utility of a feasible beamforming matrix.
///
/// Infeasible input is rejected instead of being projected.
pub fn network_utility(w: &BeamMatrix, channels: &ChannelSet) -> Result<UtilityReport> {
    check_dims(w, channels)?;
    if !w.0.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(HybfError::NonFinite);
    }
    let margin = feasibility_margin(w);
    if margin > FEASIBILITY_TOL {
        return Err(HybfError::Infeasible { excess: margin });
    }
    let mut p = Vec::with_capacity(w.num_beams());
    let mut nats = 0.0;
    let per_hotspot_sinr = channels
        .sections
        .iter()
        .enumerate()
        .map(|(s, links)| {
            links
                .iter()
                .map(|link| {
                    received_powers(w.as_matrix(), link, &mut p);
                    let v = sinr_from_powers(&p, s);
                    nats += link.weight * v.ln_1p();
                    v
                })
                .collect()
        })
        .collect();
    Ok(UtilityReport {
        per_hotspot_sinr,
        utility_nats: nats,
        utility_bits: nats / LN_2,
    })
}

/// Conjugate Wirtinger gradient `∂R/∂W*` of the utility (nats).
///
/// With this convention the real directional derivative along Δ is
/// `2 Re Tr(Gᴴ Δ)`.
pub fn utility_gradient(w: &BeamMatrix, channels: &ChannelSet) -> CMatrix {
    let wm = w.as_matrix();
    let nbeams = wm.ncols();
    let mut grad = CMatrix::zeros(wm.nrows(), nbeams);
    let mut proj = vec![C64::new(0.0, 0.0); nbeams];
    for (t, links) in channels.sections.iter().enumerate() {
        for link in links {
            let mut interference = 0.0;
            for (s, col) in wm.column_iter().enumerate() {
                proj[s] = projection_onto(link, col);
                if s != t {
                    interference += link.gamma * proj[s].norm_sqr();
                }
            }
            let noise_plus = 1.0 + interference;
            let signal = link.gamma * proj[t].norm_sqr();
            for (s, &ps) in proj.iter().enumerate() {
                let c = if s == t {
                    link.weight / (noise_plus + signal)
                } else {
                    -link.weight * signal / (noise_plus * (noise_plus + signal))
                };
                if c == 0.0 {
                    continue;
                }
                let scale = ps * (c * link.gamma);
                grad.column_mut(s).axpy(scale, &link.steering, C64::new(1.0, 0.0));
            }
        }
    }
    grad
}

/// Radiated gain `10 log10 |h(ψ)ᴴ w|²` of one beam over an azimuth grid.
pub fn beam_pattern_gain(
    w: &CVector,
    geometry: &ArrayGeometry,
    azimuth_grid: &[f64],
    elevation: f64,
) -> Vec<f64> {
    azimuth_grid
        .iter()
        .map(|&az| {
            let g = steering_vector(geometry, az, elevation).dotc(w).norm_sqr();
            if g > 0.0 {
                (10.0 * g.log10()).max(PATTERN_FLOOR_DB)
            } else {
                PATTERN_FLOOR_DB
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_scenario, ScenarioParams};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones(m: usize) -> CVector {
        DVector::from_element(m, C64::new(1.0, 0.0))
    }

    fn link(h: CVector, gamma: f64, weight: f64) -> Link {
        Link {
            steering: h,
            gamma,
            weight,
        }
    }

    fn random_feasible(rng: &mut impl Rng, m: usize, l: usize) -> BeamMatrix {
        let w = CMatrix::from_fn(m, l, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        crate::projection::project_to_papc(&w).unwrap()
    }

    /// Entry-by-entry evaluation of wᴴ Q w with an explicit Q.
    fn naive_quad(q: &CMatrix, w: &CVector) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..w.len() {
            for b in 0..w.len() {
                acc += w[a].conj() * q[(a, b)] * w[b];
            }
        }
        assert!(acc.im.abs() < 1e-10 * acc.re.abs().max(1.0));
        acc.re
    }

    fn naive_utility_bits(w: &BeamMatrix, ch: &ChannelSet) -> f64 {
        let mut total = 0.0;
        for (s, i, l) in ch.iter() {
            let q = crate::channel::build_q(ch, s, i).unwrap();
            let num = naive_quad(&q, &w.column(s));
            let den: f64 = 1.0
                + (0..w.num_beams())
                    .filter(|&t| t != s)
                    .map(|t| naive_quad(&q, &w.column(t)))
                    .sum::<f64>();
            total += l.weight * (1.0 + num / den).log2();
        }
        total
    }

    #[test]
    fn conjugate_beam_sinr_is_array_gain() {
        let m = 6;
        let ch = ChannelSet::single_section(vec![link(ones(m), 1.0, 1.0)]);
        let w = BeamMatrix::from_column(&(ones(m) / C64::new((m as f64).sqrt(), 0.0)));
        assert!((sinr(&w, &ch, 0, 0).unwrap() - m as f64).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_beam_gives_zero_sinr() {
        let ch = ChannelSet::single_section(vec![link(ones(2), 1.0, 1.0)]);
        let r = 1.0 / 2f64.sqrt();
        let w = BeamMatrix::new(CMatrix::from_column_slice(2, 1, &[C64::new(r, 0.0), C64::new(-r, 0.0)]));
        assert!(sinr(&w, &ch, 0, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sinr_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = crate::channel::ArrayGeometry::linear(4, 0.5).unwrap();
        let mk = |rng: &mut ChaCha8Rng| {
            link(steering_vector(&g, rng.gen_range(-1.0..1.0), 0.0), rng.gen_range(0.5..5.0), 0.5)
        };
        let ch = ChannelSet {
            num_elements: 4,
            sections: vec![vec![mk(&mut rng), mk(&mut rng)], vec![mk(&mut rng), mk(&mut rng)]],
        };
        for _ in 0..50 {
            let w = random_feasible(&mut rng, 4, 2);
            for (s, i, _) in ch.iter() {
                let q = crate::channel::build_q(&ch, s, i).unwrap();
                let other = 1 - s;
                let want = naive_quad(&q, &w.column(s)) / (1.0 + naive_quad(&q, &w.column(other)));
                let got = sinr(&w, &ch, s, i).unwrap();
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn single_hotspot_utility() {
        // γM = 4 → log2(5)
        let ch = ChannelSet::single_section(vec![link(ones(4), 1.0, 1.0)]);
        let w = BeamMatrix::from_column(&(ones(4) * C64::new(0.5, 0.0)));
        let r = network_utility(&w, &ch).unwrap();
        assert!((r.utility_bits - 5f64.log2()).abs() < 1e-12);
        assert_eq!(r.utility_bits, r.utility_nats / LN_2);
    }

    #[test]
    fn zero_beam_zero_utility() {
        let ch = ChannelSet::single_section(vec![link(ones(4), 3.0, 1.0)]);
        let r = network_utility(&BeamMatrix::zeros(4, 1), &ch).unwrap();
        assert_eq!(r.utility_nats, 0.0);
    }

    #[test]
    fn beam_matrix_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = BeamMatrix::new(CMatrix::from_fn(5, 2, |_, _| C64::new(rng.gen(), rng.gen())));
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<BeamMatrix>(&text).unwrap(), w);
        assert!(text.starts_with("[[["));
        assert!(serde_json::from_str::<BeamMatrix>("[[[1,0]],[]]").is_err());
        assert!(serde_json::from_str::<BeamMatrix>("[]").is_err());
    }

    #[test]
    fn infeasible_rejected() {
        let ch = ChannelSet::single_section(vec![link(ones(4), 3.0, 1.0)]);
        let w = BeamMatrix::from_column(&ones(4));
        match network_utility(&w, &ch) {
            Err(HybfError::Infeasible { excess }) => assert!((excess - 0.75).abs() < 1e-12),
            other => panic!("expected infeasible error, got {other:?}"),
        }
        assert!(network_utility(&BeamMatrix::zeros(3, 1), &ch).is_err());
    }

    #[test]
    fn utility_matches_naive_oracle_on_generated_scenario() {
        let sc = generate_scenario(&ScenarioParams {
            num_hotspots: 4,
            num_sections: 2,
            seed: 17,
            ..Default::default()
        })
        .unwrap();
        let ch = ChannelSet::from_scenario(&sc);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_feasible(&mut rng, 48, 2);
        let got = network_utility(&w, &ch).unwrap().utility_bits;
        let want = naive_utility_bits(&w, &ch);
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn gradient_single_term_closed_form() {
        let h = ones(2);
        let ch = ChannelSet::single_section(vec![link(h.clone(), 1.0, 1.0)]);
        let w = &h / C64::new(2f64.sqrt(), 0.0);
        let g = utility_gradient(&BeamMatrix::from_column(&w), &ch);
        let want = &w * C64::new(2.0 / 3.0, 0.0);
        assert!((g.column(0) - want).norm() < 1e-14);
    }

    #[test]
    fn gradient_vanishes_orthogonal() {
        let ch = ChannelSet::single_section(vec![link(ones(2), 1.0, 1.0)]);
        let w = CVector::from_vec(vec![C64::new(0.5, 0.0), C64::new(-0.5, 0.0)]);
        let g = utility_gradient(&BeamMatrix::from_column(&w), &ch);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sc = generate_scenario(&ScenarioParams {
            num_hotspots: 6,
            num_sections: 2,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let ch = ChannelSet::from_scenario(&sc);
        for _ in 0..20 {
            let w = random_feasible(&mut rng, 48, 2);
            let d = CMatrix::from_fn(48, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let eps = 1e-6;
            let plus = BeamMatrix::new(w.as_matrix() + &d * C64::new(eps, 0.0));
            let minus = BeamMatrix::new(w.as_matrix() - &d * C64::new(eps, 0.0));
            let fd = (utility_nats(&plus, &ch) - utility_nats(&minus, &ch)) / (2.0 * eps);
            let g = utility_gradient(&w, &ch);
            let analytic = 2.0 * g.dotc(&d).re;
            assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn column_phase_invariance() {
        let sc = generate_scenario(&ScenarioParams {
            num_hotspots: 6,
            num_sections: 2,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let ch = ChannelSet::from_scenario(&sc);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_feasible(&mut rng, 48, 2);
        let mut rotated = w.as_matrix().clone();
        let phase = crate::channel::unit_phasor(1.234);
        for z in rotated.column_mut(1).iter_mut() {
            *z *= phase;
        }
        let a = utility_nats(&w, &ch);
        let b = utility_nats(&BeamMatrix::new(rotated), &ch);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn higher_snr_increases_utility() {
        let sc = generate_scenario(&ScenarioParams {
            num_hotspots: 4,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let mut ch = ChannelSet::from_scenario(&sc);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_feasible(&mut rng, 48, 1);
        let base = utility_nats(&w, &ch);
        for l in ch.sections.iter_mut().flatten() {
            l.gamma *= 1.5;
        }
        assert!(utility_nats(&w, &ch) > base);
    }

    #[test]
    fn pattern_peak_is_array_gain() {
        let g = crate::channel::ArrayGeometry::linear(8, 0.5).unwrap();
        let psi0 = 0.3;
        let w = steering_vector(&g, psi0, 0.0) / C64::new(8f64.sqrt(), 0.0);
        let gains = beam_pattern_gain(&w, &g, &[psi0], 0.0);
        assert!((gains[0] - 10.0 * 8f64.log10()).abs() < 1e-10);
    }

    #[test]
    fn uniform_weights_nulls_follow_array_factor() {
        // Uniform weights: |AF|² = |sin(Mπd sinψ)/sin(πd sinψ)|², nulls at sinψ = k/(M d).
        let m = 8;
        let d = 0.5;
        let g = crate::channel::ArrayGeometry::linear(m, d).unwrap();
        let w = ones(m) / C64::new((m as f64).sqrt(), 0.0);
        let grid: Vec<f64> = (0..=2000).map(|k| -1.5 + 3.0 * k as f64 / 2000.0).collect();
        let gains = beam_pattern_gain(&w, &g, &grid, 0.0);
        for (psi, db) in grid.iter().zip(&gains) {
            let u = std::f64::consts::PI * d * psi.sin();
            let af = if u.sin().abs() < 1e-12 {
                (m * m) as f64
            } else {
                ((m as f64 * u).sin() / u.sin()).powi(2)
            } / m as f64;
            let want = if af > 0.0 { (10.0 * af.log10()).max(PATTERN_FLOOR_DB) } else { PATTERN_FLOOR_DB };
            if want > -60.0 {
                assert!((db - want).abs() < 1e-8, "ψ={psi}: {db} vs {want}");
            }
        }
        for k in 1..m {
            let psi = (k as f64 / (m as f64 * d)).asin();
            let db = beam_pattern_gain(&w, &g, &[psi], 0.0)[0];
            assert!(db < -80.0, "null at {psi}: {db}");
        }
    }
}
