use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ScalePoint;

/// Slack of the triangle inequality between the three gap columns.
pub const TRIANGLE_SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "n,M,K,seed,emp_vs_vfpe_K,vfpe_K_vs_vfpe_inf,emp_vs_vfpe_inf";
pub const SCALING_HEADER: &str = "n,M,K,seed,emp_vs_vfpe_K";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    /// `sup_t d̄^{b,m}(empirical, VFPE^K)`.
    pub emp_vs_vfpe_k: f64,
    /// `sup_t d̄^{b,m}(VFPE^K, VFPE^∞)`.
    pub vfpe_k_vs_vfpe_inf: f64,
    /// `sup_t d̄^{b,m}(empirical, VFPE^∞)`.
    pub emp_vs_vfpe_inf: f64,
    pub error: Option<String>,
}

impl ReportRow {
    pub fn new(instance: &str, p: ScalePoint, k: usize, seed: u64) -> Self {
        Self {
            instance: instance.to_string(),
            n: p.n,
            m: p.m,
            k,
            seed,
            emp_vs_vfpe_k: f64::NAN,
            vfpe_k_vs_vfpe_inf: f64::NAN,
            emp_vs_vfpe_inf: f64::NAN,
            error: None,
        }
    }

    pub fn triangle_holds(&self) -> bool {
        self.emp_vs_vfpe_inf <= self.emp_vs_vfpe_k + self.vfpe_k_vs_vfpe_inf + TRIANGLE_SLACK
    }
}

/// Seed medians of the three columns at one `(n, M, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub emp_vs_vfpe_k: f64,
    pub vfpe_k_vs_vfpe_inf: f64,
    pub emp_vs_vfpe_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    /// Differences below this count as ties in the trend checks.
    pub tie_tolerance: f64,
}

/// Outcome of the acceptance trends; empty `violations` means pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrendCheck {
    pub violations: Vec<String>,
}

impl TrendCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Median of the finite entries; NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

fn ordered_unique<T: PartialEq + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in it {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

impl ConvergenceReport {
    pub fn instances(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.instance) {
                out.push(r.instance.clone());
            }
        }
        out
    }

    fn rows_of<'a>(&'a self, instance: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.instance == instance)
    }

    /// The frozen CSV for one instance, rows in run order.
    pub fn to_csv(&self, instance: &str) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in self.rows_of(instance) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.n,
                r.m,
                r.k,
                r.seed,
                fmt(r.emp_vs_vfpe_k),
                fmt(r.vfpe_k_vs_vfpe_inf),
                fmt(r.emp_vs_vfpe_inf)
            );
        }
        s
    }

    /// Failed rows as `instance,n,M,K,seed,error`; `None` when every row succeeded.
    pub fn failures_csv(&self) -> Option<String> {
        let failed: Vec<&ReportRow> = self.rows.iter().filter(|r| r.error.is_some()).collect();
        if failed.is_empty() {
            return None;
        }
        let mut s = String::from("instance,n,M,K,seed,error\n");
        for r in failed {
            let e = r.error.as_deref().unwrap_or_default().replace(['\n', ','], " ");
            let _ = writeln!(s, "{},{},{},{},{},{}", r.instance, r.n, r.m, r.k, r.seed, e);
        }
        Some(s)
    }

    pub fn medians(&self, instance: &str) -> Vec<MedianRow> {
        let keys = ordered_unique(self.rows_of(instance).map(|r| (r.n, r.m, r.k)));
        keys.into_iter()
            .map(|(n, m, k)| {
                let sel: Vec<&ReportRow> = self.rows_of(instance).filter(|r| (r.n, r.m, r.k) == (n, m, k)).collect();
                MedianRow {
                    n,
                    m,
                    k,
                    emp_vs_vfpe_k: median(sel.iter().map(|r| r.emp_vs_vfpe_k)),
                    vfpe_k_vs_vfpe_inf: median(sel.iter().map(|r| r.vfpe_k_vs_vfpe_inf)),
                    emp_vs_vfpe_inf: median(sel.iter().map(|r| r.emp_vs_vfpe_inf)),
                }
            })
            .collect()
    }

    pub fn triangle_violations(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.error.is_none() && !r.triangle_holds()).collect()
    }

    /// Middle column non-increasing in `K` at every `(n, M)`; first column
    /// strictly decreasing along the `(n, M)` schedule at every `K`; triangle
    /// consistency on every row; no failed rows.
    pub fn check(&self) -> TrendCheck {
        let mut v = Vec::new();
        for r in &self.rows {
            if let Some(e) = &r.error {
                v.push(format!("{} n={} M={} K={} seed={}: failed: {e}", r.instance, r.n, r.m, r.k, r.seed));
            }
        }
        for r in self.triangle_violations() {
            v.push(format!(
                "{} n={} M={} K={} seed={}: triangle {} > {} + {}",
                r.instance, r.n, r.m, r.k, r.seed, r.emp_vs_vfpe_inf, r.emp_vs_vfpe_k, r.vfpe_k_vs_vfpe_inf
            ));
        }
        for inst in self.instances() {
            let med = self.medians(&inst);
            for (n, m) in ordered_unique(med.iter().map(|r| (r.n, r.m))) {
                let mut seq: Vec<&MedianRow> = med.iter().filter(|r| (r.n, r.m) == (n, m)).collect();
                seq.sort_by_key(|r| r.k);
                for w in seq.windows(2) {
                    if !(w[1].vfpe_k_vs_vfpe_inf <= w[0].vfpe_k_vs_vfpe_inf + self.tie_tolerance) {
                        v.push(format!(
                            "{inst} n={n} M={m}: middle column rises from {} (K={}) to {} (K={})",
                            w[0].vfpe_k_vs_vfpe_inf, w[0].k, w[1].vfpe_k_vs_vfpe_inf, w[1].k
                        ));
                    }
                }
            }
            for k in ordered_unique(med.iter().map(|r| r.k)) {
                let seq: Vec<&MedianRow> = med.iter().filter(|r| r.k == k).collect();
                for w in seq.windows(2) {
                    if !(w[1].emp_vs_vfpe_k < w[0].emp_vs_vfpe_k) {
                        v.push(format!(
                            "{inst} K={k}: first column does not decrease from {} (n={}, M={}) to {} (n={}, M={})",
                            w[0].emp_vs_vfpe_k, w[0].n, w[0].m, w[1].emp_vs_vfpe_k, w[1].n, w[1].m
                        ));
                    }
                }
            }
        }
        TrendCheck { violations: v }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub instance: String,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    /// `sup_t d̄^{b,m}(empirical, VFPE^K)`.
    pub gap: f64,
    /// The gap at each metric stamp.
    pub series: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Times of the metric stamps.
    pub stamps: Vec<f64>,
}

impl ScalingReport {
    pub fn to_csv(&self, instance: &str) -> String {
        let mut s = String::from(SCALING_HEADER);
        s.push('\n');
        for r in self.rows.iter().filter(|r| r.instance == instance) {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.m, r.k, r.seed, fmt(r.gap));
        }
        s
    }

    /// Seed medians along the `(n, M)` schedule.
    pub fn medians(&self, instance: &str) -> Vec<(usize, usize, f64)> {
        let keys = ordered_unique(self.rows.iter().filter(|r| r.instance == instance).map(|r| (r.n, r.m)));
        keys.into_iter()
            .map(|(n, m)| {
                let g = median(
                    self.rows
                        .iter()
                        .filter(|r| r.instance == instance && (r.n, r.m) == (n, m))
                        .map(|r| r.gap),
                );
                (n, m, g)
            })
            .collect()
    }

    /// Medians non-increasing along the schedule for every instance.
    pub fn check(&self) -> TrendCheck {
        let mut v: Vec<String> = self
            .rows
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("{} n={} M={} seed={}: failed: {e}", r.instance, r.n, r.m, r.seed)))
            .collect();
        let instances = ordered_unique(self.rows.iter().map(|r| r.instance.as_str()));
        for inst in instances {
            for w in self.medians(inst).windows(2) {
                if !(w[1].2 <= w[0].2) {
                    v.push(format!("{inst}: median rises from {} (n={}) to {} (n={})", w[0].2, w[0].0, w[1].2, w[1].0));
                }
            }
        }
        TrendCheck { violations: v }
    }
}
