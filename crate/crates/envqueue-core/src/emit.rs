//! Deterministic CSV emission.
//!
//! All floats print through one fixed-precision formatter so that reruns of
//! the same experiment produce byte-identical files.

use crate::discrete::DiscretePi;
use crate::joint::OccupationMatrix;
use std::fmt::Write as _;

/// Canonical float formatting: 12 significant digits, scientific.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.12e}")
    }
}

/// Stationary vector as CSV rows `n,z_index,mass`.
pub fn discrete_pi_csv(pi: &DiscretePi) -> String {
    let mut out = String::from("n,z_index,mass\n");
    for n in 0..=pi.n_max {
        for zi in 0..pi.m {
            let _ = writeln!(out, "{n},{zi},{}", fmt_f64(pi.weights[pi.index(n, zi)]));
        }
    }
    out
}

/// Transient distribution as CSV rows `n,z_index,mass`.
pub fn law_csv(law: &[f64], n_max: u32, m: usize) -> String {
    let mut out = String::from("n,z_index,mass\n");
    for n in 0..=n_max {
        for zi in 0..m {
            let _ = writeln!(out, "{n},{zi},{}", fmt_f64(law[n as usize * m + zi]));
        }
    }
    out
}

/// Occupation matrix as CSV rows `n,bin_low,bin_high,fraction`; the overflow
/// layer is labeled with `n = n_cap + 1`.
pub fn occupation_csv(occ: &OccupationMatrix) -> String {
    let mut out = String::from("n,bin_low,bin_high,fraction\n");
    let width = (occ.coord_hi - occ.coord_lo) / occ.bins as f64;
    for layer in 0..occ.n_cap as usize + 2 {
        for b in 0..occ.bins {
            let lo = occ.coord_lo + b as f64 * width;
            let hi = lo + width;
            let _ = writeln!(
                out,
                "{layer},{},{},{}",
                fmt_f64(lo),
                fmt_f64(hi),
                fmt_f64(occ.fractions[layer * occ.bins + b])
            );
        }
    }
    out
}

/// Queue-transition event log as CSV rows `t,n,z`.
pub fn events_csv(events: &[(f64, u32, f64)]) -> String {
    let mut out = String::from("t,n,z\n");
    for (t, n, z) in events {
        let _ = writeln!(out, "{},{n},{}", fmt_f64(*t), fmt_f64(*z));
    }
    out
}

/// Density table as CSV rows `z,q_normalized`.
pub fn density_csv(zs: &[f64], qs: &[f64]) -> String {
    let mut out = String::from("z,q_normalized\n");
    for (z, q) in zs.iter().zip(qs) {
        let _ = writeln!(out, "{},{}", fmt_f64(*z), fmt_f64(*q));
    }
    out
}
