use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::ConvergenceReport;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Values at or below this are drawn on the floor of the log axis.
const LOG_FLOOR: f64 = 1e-12;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn log_range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A log-log line plot. Series with one point get a marker and no line.
pub fn render_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let lx = |x: f64| x.max(LOG_FLOOR).log10();
    let (x0, x1) = log_range(series.iter().flat_map(|s| s.points.iter().map(|p| lx(p.0))));
    let (y0, y1) = log_range(series.iter().flat_map(|s| s.points.iter().map(|p| lx(p.1))));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (lx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - lx(y)) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str("<!-- data\nseries,x,y\n");
    for se in series {
        for &(x, y) in &se.points {
            let _ = writeln!(s, "{},{x},{y}", se.label.replace("--", "- -"));
        }
    }
    s.push_str("-->\n");
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for d in (x0 as i64)..=(x1 as i64) {
        let x = LEFT + (d as f64 - x0) / (x1 - x0) * pw;
        if (LEFT - 1e-9..=LEFT + pw + 1e-9).contains(&x) {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 20.0
            );
        }
    }
    for d in (y0 as i64)..=(y1 as i64) {
        let y = TOP + (y1 - d as f64) / (y1 - y0) * ph;
        if (TOP - 1e-9..=TOP + ph + 1e-9).contains(&y) {
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0
            );
        }
    }
    for (i, se) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = se.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() > 1 {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        for &(x, y) in &se.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 35.0,
            ly + 4.0,
            escape(&se.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// The three gap plots of one instance: two against `N = nM` per `K`, one against `K` per `n`.
pub fn instance_plots(report: &ConvergenceReport, instance: &str) -> Vec<(String, String)> {
    let med = report.medians(instance);
    let mut ks: Vec<usize> = med.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut ns: Vec<(usize, usize)> = med.iter().map(|r| (r.n, r.m)).collect();
    ns.sort_unstable();
    ns.dedup();
    let per_k = |f: &dyn Fn(&crate::report::MedianRow) -> f64| -> Vec<Series> {
        ks.iter()
            .map(|&k| Series {
                label: format!("K={k}"),
                points: med.iter().filter(|r| r.k == k).map(|r| ((r.n * r.m) as f64, f(r))).collect(),
            })
            .collect()
    };
    let per_n: Vec<Series> = ns
        .iter()
        .map(|&(n, m)| Series {
            label: format!("n={n}, M={m}"),
            points: med
                .iter()
                .filter(|r| (r.n, r.m) == (n, m))
                .map(|r| (r.k as f64, r.vfpe_k_vs_vfpe_inf))
                .collect(),
        })
        .collect();
    vec![
        (
            format!("{instance}_emp_vs_vfpe_K.svg"),
            render_svg(
                &format!("{instance}: empirical vs VFPE^K"),
                "N = nM",
                "median sup_t gap",
                &per_k(&|r| r.emp_vs_vfpe_k),
            ),
        ),
        (
            format!("{instance}_vfpe_K_vs_vfpe_inf.svg"),
            render_svg(&format!("{instance}: VFPE^K vs VFPE^inf"), "K", "median sup_t gap", &per_n),
        ),
        (
            format!("{instance}_emp_vs_vfpe_inf.svg"),
            render_svg(
                &format!("{instance}: empirical vs VFPE^inf"),
                "N = nM",
                "median sup_t gap",
                &per_k(&|r| r.emp_vs_vfpe_inf),
            ),
        ),
    ]
}

/// Writes every instance's plots into `dir`. An empty report writes nothing.
pub fn emit_plots(report: &ConvergenceReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        log::warn!("empty report: no plots written");
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for inst in report.instances() {
        for (name, svg) in instance_plots(report, &inst) {
            let p = dir.join(name);
            std::fs::write(&p, svg)?;
            out.push(p);
        }
    }
    Ok(out)
}
