//! Test support shared by the integration suites: an independent
//! straight-line re-derivation of fleet totals, and seeded random fleets.

pub mod gen;
pub mod oracle;

/// Relative difference, 0 when both values are equal.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
