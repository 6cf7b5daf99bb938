//! User-side decisions: quality selection for the next chunk and the
//! auxiliary utility variable feeding the virtual queue.

use serde::{Deserialize, Serialize};

use crate::video::{LevelProfile, QualityBounds};

/// Concave, continuous, nondecreasing utility of average quality.
pub trait Utility {
    fn value(&self, quality: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Utility for F {
    fn value(&self, quality: f64) -> f64 {
        self(quality)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityKind {
    /// Proportional fairness.
    #[default]
    Log,
    Linear,
    /// `x^exponent` with `0 < exponent <= 1`.
    Power {
        exponent: f64,
    },
}

impl Utility for UtilityKind {
    fn value(&self, quality: f64) -> f64 {
        match *self {
            UtilityKind::Log => quality.ln(),
            UtilityKind::Linear => quality,
            UtilityKind::Power { exponent } => quality.powf(exponent),
        }
    }
}

/// Level minimizing `k*Q*B(m) - Θ*D(m)`; ties go to the lowest level.
///
/// `backlog` and `pixels_per_chunk` must be in the same bit unit, so the
/// first term is a product of two bit counts.
pub fn select_quality(backlog: f64, theta: f64, profile: &[LevelProfile], pixels_per_chunk: f64) -> usize {
    let mut best = profile[0].level;
    let mut best_cost = f64::INFINITY;
    for level in profile {
        let cost = pixels_per_chunk * backlog * level.bits_per_pixel - theta * level.quality;
        if cost < best_cost {
            best_cost = cost;
            best = level.level;
        }
    }
    best
}

/// Absolute tolerance of the golden-section search.
pub const AUX_TOLERANCE: f64 = 1e-9;

/// Maximizer of `V*φ(γ) - Θ*γ` over `[d_min, d_max]`.
pub fn choose_auxiliary(theta: f64, v: f64, bounds: QualityBounds, utility: &UtilityKind) -> f64 {
    match utility {
        UtilityKind::Log => {
            if theta <= 0.0 {
                bounds.d_max
            } else {
                (v / theta).clamp(bounds.d_min, bounds.d_max)
            }
        }
        other => choose_auxiliary_with(theta, v, bounds, other),
    }
}

/// Golden-section maximization for an arbitrary concave utility.
pub fn choose_auxiliary_with<U: Utility + ?Sized>(theta: f64, v: f64, bounds: QualityBounds, utility: &U) -> f64 {
    let objective = |g: f64| v * utility.value(g) - theta * g;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (bounds.d_min, bounds.d_max);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while hi - lo > AUX_TOLERANCE {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        }
    }
    // The box edges are where linear-ish utilities peak.
    let mid = 0.5 * (lo + hi);
    [bounds.d_min, mid, bounds.d_max]
        .into_iter()
        .fold((mid, objective(mid)), |best, g| {
            let f = objective(g);
            if f > best.1 {
                (g, f)
            } else {
                best
            }
        })
        .0
}
