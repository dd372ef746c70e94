use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounded_lipschitz::d_bl;
use crate::measure::{MeasureFamily, Trajectory};

/// Adjacent-fiber `d_BL` at one stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampModulus {
    pub time: f64,
    /// `d_BL(μ^{x_i}, μ^{x_{i+1}})` for every cell `i`, cyclically.
    pub adjacent: Vec<f64>,
    pub max: f64,
    /// Cell `i` of the pair `(i, i+1)` attaining `max`.
    pub argmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub resolution: usize,
    pub stamps: Vec<StampModulus>,
}

impl ModulusReport {
    pub fn max_over_stamps(&self) -> f64 {
        self.stamps.iter().map(|s| s.max).fold(0.0, f64::max)
    }

    /// Median over stamps of the per-stamp maximum.
    pub fn median(&self) -> f64 {
        let mut m: Vec<f64> = self.stamps.iter().map(|s| s.max).collect();
        if m.is_empty() {
            return 0.0;
        }
        m.sort_by(f64::total_cmp);
        let k = m.len();
        if k % 2 == 1 {
            m[k / 2]
        } else {
            0.5 * (m[k / 2 - 1] + m[k / 2])
        }
    }
}

pub fn adjacent_modulus(mu: &MeasureFamily) -> Vec<f64> {
    let f = mu.fibers();
    let n = f.len();
    (0..n)
        .into_par_iter()
        .map(|i| if n < 2 { 0.0 } else { d_bl(&f[i], &f[(i + 1) % n]) })
        .collect()
}

/// Max adjacent-fiber `d_BL` per stamp. Diagnostic only, never fails.
pub fn continuity_in_x_diagnostic(traj: &Trajectory) -> ModulusReport {
    let stamps = traj
        .times()
        .iter()
        .zip(traj.families())
        .map(|(&time, fam)| {
            let adjacent = adjacent_modulus(fam);
            let (argmax, max) = adjacent
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            StampModulus { time, adjacent, max, argmax }
        })
        .collect();
    ModulusReport {
        resolution: traj.grid().resolution(),
        stamps,
    }
}

/// `(coarse median, fine median, fine < coarse)` for a refinement pair.
pub fn refinement_trend(coarse: &ModulusReport, fine: &ModulusReport) -> (f64, f64, bool) {
    let (c, f) = (coarse.median(), fine.median());
    (c, f, f < c)
}
