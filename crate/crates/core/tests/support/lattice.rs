//! Dense-grid oracle for `d_BL` on measures supported on the lattice
//! `{k h : 0 ≤ k < GRID}`, `h = 2π / GRID`.
//!
//! Test functions are piecewise linear on the lattice. With all mass on lattice
//! points every vertex of the grid LP takes values in `{k h} ∪ {1 − k h}`, so a
//! dynamic program over those levels is exact.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::TAU;

pub const GRID: usize = 4096;

pub fn h() -> f64 {
    TAU / GRID as f64
}

/// Sorted levels `{k h} ∪ {1 − k h}` inside `[0, 1]`.
pub fn levels() -> Vec<f64> {
    let h = h();
    let mut l: Vec<f64> = Vec::new();
    let mut k = 0usize;
    while k as f64 * h <= 1.0 {
        l.push(k as f64 * h);
        l.push(1.0 - k as f64 * h);
        k += 1;
    }
    l.sort_by(f64::total_cmp);
    l.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    l
}

/// `out[l] = max { v[l'] : |lv[l'] − lv[l]| ≤ w }`.
fn window_max(lv: &[f64], v: &[f64], w: f64) -> Vec<f64> {
    let n = lv.len();
    if w >= 1.0 {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return vec![m; n];
    }
    let eps = 1e-12;
    let mut out = vec![f64::NEG_INFINITY; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut hi = 0usize;
    for l in 0..n {
        while hi < n && lv[hi] <= lv[l] + w + eps {
            while dq.back().is_some_and(|&b| v[b] <= v[hi]) {
                dq.pop_back();
            }
            dq.push_back(hi);
            hi += 1;
        }
        while dq.front().is_some_and(|&f| lv[f] < lv[l] - w - eps) {
            dq.pop_front();
        }
        out[l] = dq.front().map_or(f64::NEG_INFINITY, |&f| v[f]);
    }
    out
}

/// Signed masses on the lattice, merged and sorted by index.
fn signed(mu: &[(usize, f64)], nu: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut s = vec![0.0; GRID];
    for &(i, w) in mu {
        s[i % GRID] += w;
    }
    for &(i, w) in nu {
        s[i % GRID] -= w;
    }
    s.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect()
}

/// `max Σ s_i f(p_i)` with `f(p_0) = lv[j0]`.
fn with_start(pts: &[(usize, f64)], lv: &[f64], j0: usize) -> f64 {
    let h = h();
    let m = pts.len();
    let mut v = vec![f64::NEG_INFINITY; lv.len()];
    v[j0] = pts[0].1 * lv[j0];
    for i in 1..m {
        let g = (pts[i].0 - pts[i - 1].0) as f64 * h;
        let best = window_max(lv, &v, g);
        v = best.iter().zip(lv).map(|(b, l)| b + pts[i].1 * l).collect();
    }
    let closing = (pts[0].0 + GRID - pts[m - 1].0) as f64 * h;
    let lo = lv[j0] - closing - 1e-12;
    let hi = lv[j0] + closing + 1e-12;
    lv.iter()
        .zip(&v)
        .filter(|(l, _)| **l >= lo && **l <= hi)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_f Σ s f` over `[0, 1]`-valued 1-Lipschitz `f`, ternary search over the
/// (concave) value as a function of the level at the first point.
fn one_sided(pts: &[(usize, f64)], lv: &[f64], exhaustive: bool) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let g = |j| with_start(pts, lv, j);
    if exhaustive {
        return (0..lv.len()).map(g).fold(f64::NEG_INFINITY, f64::max);
    }
    let (mut lo, mut hi) = (0usize, lv.len() - 1);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if g(m1) < g(m2) {
            lo = m1 + 1;
        } else {
            hi = m2;
        }
    }
    (lo..=hi).map(g).fold(f64::NEG_INFINITY, f64::max)
}

/// `d_BL(μ, ν)` for lattice-supported measures given as `(index, weight)`.
pub fn lattice_d_bl(mu: &[(usize, f64)], nu: &[(usize, f64)], exhaustive: bool) -> f64 {
    let lv = levels();
    let pos = signed(mu, nu);
    let neg: Vec<(usize, f64)> = pos.iter().map(|&(i, w)| (i, -w)).collect();
    one_sided(&pos, &lv, exhaustive).max(one_sided(&neg, &lv, exhaustive))
}

/// Lattice indices to phase positions.
pub fn to_particles(m: &[(usize, f64)]) -> Vec<(f64, f64)> {
    m.iter().map(|&(i, w)| (i as f64 * h(), w)).collect()
}
