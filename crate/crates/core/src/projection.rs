//! Euclidean projection onto the per-antenna power constraint set
//! `{W : Σ_s |W_ms|² ≤ 1/M for every antenna m}`.
//!
//! The projection decouples across antennas: a row already inside its ball is
//! kept, a row outside is radially scaled back onto the sphere of radius
//! `1/√M`. Phases are never changed.

use crate::error::{HybfError, Result};
use crate::objective::BeamMatrix;
use crate::CMatrix;

/// Slack allowed when deciding feasibility of a row power.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Projects `w` onto the per-antenna power constraint set.
pub fn project_to_papc(w: &CMatrix) -> Result<BeamMatrix> {
    if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(HybfError::NonFinite);
    }
    let mut out = w.clone();
    project_in_place(&mut out);
    Ok(BeamMatrix::new(out))
}

/// In-place variant of [`project_to_papc`] for callers that already know the
/// entries are finite.
pub fn project_in_place(w: &mut CMatrix) {
    let m = w.nrows();
    let cap = 1.0 / m as f64;
    for r in 0..m {
        let power: f64 = w.row(r).iter().map(|z| z.norm_sqr()).sum();
        if power > cap {
            let scale = 1.0 / (m as f64 * power).sqrt();
            for z in w.row_mut(r).iter_mut() {
                *z *= scale;
            }
        }
    }
}

/// `max_m (Σ_s |W_ms|² − 1/M)`; non-positive exactly when `w` is feasible.
pub fn feasibility_margin(w: &BeamMatrix) -> f64 {
    let m = w.num_elements();
    let cap = 1.0 / m as f64;
    (0..m)
        .map(|r| w.row_power(r) - cap)
        .fold(f64::NEG_INFINITY, f64::max)
}
