//! The bounded-Lipschitz distance between particle measures on the phase circle,
//!
//! `d_BL(μ, ν) = sup { |∫ f d(μ − ν)| : f: 𝕋 → [0, 1], Lip(f) ≤ 1 }`.
//!
//! On a finite support the supremum is a linear program in the values `f_i`
//! at the sorted support points. The circle distance is a path metric, so the
//! pairwise Lipschitz constraints reduce to those between cyclic neighbours, and
//! the program becomes a chain closed into a cycle. The chain is solved by
//! dynamic programming over concave piecewise-linear value functions; the cycle
//! is closed by fixing `f_0 = y` and maximizing the (concave) value over `y`.
//!
//! Replacing `f` by `1 − f` shows `sup ∫ f d(ν − μ) = sup ∫ f d(μ − ν) − S` with
//! `S = μ(𝕋) − ν(𝕋)`, so one program suffices.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::measure::PhaseMeasure;

/// Support points closer than this are merged.
const MERGE_EPS: f64 = 1e-15;
/// Width at which the search over `f_0` stops.
const SEARCH_TOL: f64 = 1e-13;

/// Concave piecewise-linear function on `[lo, lo + len] ⊆ [0, 1]`.
///
/// Segments run left to right with non-increasing slopes; stored slopes are
/// offset by the lazily added `off`.
#[derive(Debug)]
struct Concave {
    lo: f64,
    len: f64,
    v_lo: f64,
    off: f64,
    segs: VecDeque<(f64, f64)>,
}

impl Concave {
    fn point(y: f64, value: f64) -> Self {
        Self {
            lo: y,
            len: 0.0,
            v_lo: value,
            off: 0.0,
            segs: VecDeque::new(),
        }
    }

    fn linear(slope: f64) -> Self {
        let mut segs = VecDeque::new();
        segs.push_back((1.0, slope));
        Self {
            lo: 0.0,
            len: 1.0,
            v_lo: 0.0,
            off: 0.0,
            segs,
        }
    }

    fn max(&self) -> f64 {
        let mut v = self.v_lo;
        for &(l, s) in &self.segs {
            let s = s + self.off;
            if s <= 0.0 {
                break;
            }
            v += l * s;
        }
        v
    }

    fn eval(&self, y: f64) -> f64 {
        let mut x = self.lo;
        let mut v = self.v_lo;
        for &(l, s) in &self.segs {
            let s = s + self.off;
            if y <= x + l {
                return v + (y - x).max(0.0) * s;
            }
            v += l * s;
            x += l;
        }
        v
    }

    /// `z ↦ max_{|y − z| ≤ g} V(y)`, then restricted to `[0, 1]`.
    fn window(&mut self, g: f64) {
        if g >= 1.0 {
            let m = self.max();
            self.segs.clear();
            self.segs.push_back((1.0, -self.off));
            self.lo = 0.0;
            self.len = 1.0;
            self.v_lo = m;
            return;
        }
        let off = self.off;
        let k = self.segs.partition_point(|&(_, s)| s + off > 0.0);
        self.segs.insert(k, (2.0 * g, -off));
        self.lo -= g;
        self.len += 2.0 * g;
        self.clip();
    }

    fn clip(&mut self) {
        if self.lo < 0.0 {
            let mut d = -self.lo;
            while d > 0.0 {
                let Some(front) = self.segs.front_mut() else { break };
                let s = front.1 + self.off;
                if front.0 <= d {
                    self.v_lo += front.0 * s;
                    d -= front.0;
                    self.len -= front.0;
                    self.segs.pop_front();
                } else {
                    self.v_lo += d * s;
                    front.0 -= d;
                    self.len -= d;
                    d = 0.0;
                }
            }
            self.lo = 0.0;
        }
        let mut excess = self.lo + self.len - 1.0;
        while excess > 0.0 {
            let Some(back) = self.segs.back_mut() else { break };
            if back.0 <= excess {
                excess -= back.0;
                self.len -= back.0;
                self.segs.pop_back();
            } else {
                back.0 -= excess;
                self.len -= excess;
                excess = 0.0;
            }
        }
    }

    /// Add `s·z`.
    fn add_linear(&mut self, s: f64) {
        self.v_lo += s * self.lo;
        self.off += s;
    }
}

/// Sorted, merged support with signed weights and the cyclic gaps
/// `gap[i] = dist(p_i, p_{i+1})`, the last one wrapping around.
fn support(signed: impl IntoIterator<Item = (f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<(f64, f64)> = signed.into_iter().filter(|p| p.1 != 0.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pos: Vec<f64> = Vec::with_capacity(pts.len());
    let mut s: Vec<f64> = Vec::with_capacity(pts.len());
    for (p, w) in pts {
        match pos.last() {
            Some(&q) if p - q <= MERGE_EPS => *s.last_mut().expect("same length") += w,
            _ => {
                pos.push(p);
                s.push(w);
            }
        }
    }
    if pos.len() > 1 && pos[0] + TAU - pos[pos.len() - 1] <= MERGE_EPS {
        let w = s.pop().expect("nonempty");
        pos.pop();
        s[0] += w;
    }
    let m = pos.len();
    let gaps = (0..m)
        .map(|i| {
            if i + 1 < m {
                pos[i + 1] - pos[i]
            } else {
                pos[0] + TAU - pos[m - 1]
            }
        })
        .collect();
    (s, gaps)
}

/// Chain started right after node `start`'s predecessor gap, i.e. nodes
/// `start, start+1, …` with the gap into `start` ignored.
fn chain_value(s: &[f64], gaps: &[f64], start: usize) -> f64 {
    let m = s.len();
    let mut v = Concave::linear(s[start]);
    for t in 1..m {
        let i = (start + t) % m;
        let prev = (start + t - 1) % m;
        v.window(gaps[prev]);
        v.add_linear(s[i]);
    }
    v.max()
}

/// Best value with `f_0 = y` on the closed cycle.
fn cycle_value(s: &[f64], gaps: &[f64], y: f64) -> f64 {
    let m = s.len();
    let mut v = Concave::point(y, s[0] * y);
    for i in 1..m {
        v.window(gaps[i - 1]);
        v.add_linear(s[i]);
    }
    v.window(gaps[m - 1]);
    v.eval(y)
}

/// `max Σ s_i f_i` over `[0,1]`-valued 1-Lipschitz `f` on the support.
fn lp_value(s: &[f64], gaps: &[f64]) -> f64 {
    let m = s.len();
    if m == 0 {
        return 0.0;
    }
    // a gap of length >= 1 never binds, which opens the cycle into a chain
    if let Some(k) = gaps.iter().position(|&g| g >= 1.0) {
        return chain_value(s, gaps, (k + 1) % m);
    }
    let g = |y: f64| cycle_value(s, gaps, y);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut best = g(0.0).max(g(1.0));
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    while b - a > SEARCH_TOL {
        best = best.max(f1).max(f2);
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        }
    }
    best.max(f1).max(f2)
}

/// `sup_f ∫ f dσ` for the signed atomic measure `σ = Σ s_i δ_{p_i}` (positions in `[0, 2π)`).
pub fn signed_sup(signed: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (s, gaps) = support(signed);
    lp_value(&s, &gaps)
}

/// `d_BL` of a signed atomic measure `σ`: `sup_f |∫ f dσ|`.
pub fn signed_norm(signed: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (s, gaps) = support(signed);
    let total: f64 = s.iter().sum();
    (lp_value(&s, &gaps) + (-total).max(0.0)).max(0.0)
}

/// The bounded-Lipschitz distance between two particle measures.
pub fn d_bl(mu: &PhaseMeasure, nu: &PhaseMeasure) -> f64 {
    signed_norm(
        mu.particles()
            .iter()
            .copied()
            .chain(nu.particles().iter().map(|&(p, w)| (p, -w))),
    )
}

/// Upper bound `Σ w_k min(dist(p_k, q_k), 1)` for two measures whose particles
/// are paired index by index with equal weights.
pub fn paired_upper_bound(mu: &PhaseMeasure, nu: &PhaseMeasure) -> Option<f64> {
    if mu.len() != nu.len() {
        return None;
    }
    let mut acc = 0.0;
    for (&(p, w), &(q, v)) in mu.particles().iter().zip(nu.particles()) {
        if w != v {
            return None;
        }
        acc += w * crate::torus::circle_dist(p, q, TAU).min(1.0);
    }
    Some(acc)
}
