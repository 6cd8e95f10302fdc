//! Largest origin-centered ball in the grasp wrench space.
//!
//! The wrench space is the convex hull of the contact wrenches obtained from
//! a `k`-edge friction pyramid with unit normal force at every contact.
//! The ball radius equals `min_d h(d)` over unit 6-vectors `d`, where
//! `h(d) = max_w w.d` is the support function of the wrench set. We sample
//! `d` uniformly on the sphere, then polish the best samples by descent on a
//! log-sum-exp smoothing of `h`. Every evaluated direction gives an upper
//! bound, so the estimate only improves with more work.
//!
//! A wrench set that does not span all six dimensions has the origin on its
//! boundary at best, so its radius is exactly zero; this is checked first
//! rather than left to sampling, which would only approach zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Contact;
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonOptions {
    pub pyramid_edges: usize,
    pub directions: usize,
    /// Number of best sampled directions handed to the local refinement.
    pub refine_starts: usize,
    pub seed: u64,
}

impl Default for EpsilonOptions {
    fn default() -> Self {
        EpsilonOptions { pyramid_edges: 8, directions: 1024, refine_starts: 32, seed: 0 }
    }
}

/// A wrench as `[force, torque / rho]`.
pub type W6 = [f64; 6];

fn dot6(a: &W6, b: &W6) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize6(mut d: W6) -> W6 {
    let n = dot6(&d, &d).sqrt();
    if n > 0.0 {
        d.iter_mut().for_each(|x| *x /= n);
    }
    d
}

/// Edge wrenches of every contact's friction pyramid; torques about `com`
/// divided by `rho` so both halves are in newtons.
pub fn pyramid_wrenches(contacts: &[Contact], mu: f64, com: Vec3, rho: f64, edges: usize) -> Vec<W6> {
    let mut out = Vec::with_capacity(contacts.len() * edges);
    for c in contacts {
        let n = c.normal.normalized();
        let t1 = n.any_orthonormal();
        let t2 = n.cross(t1);
        let r = c.point - com;
        for j in 0..edges {
            let th = 2.0 * std::f64::consts::PI * j as f64 / edges as f64;
            let f = n + (t1.scale(th.cos()) + t2.scale(th.sin())).scale(mu);
            let tau = r.cross(f).scale(1.0 / rho);
            out.push([f.x, f.y, f.z, tau.x, tau.y, tau.z]);
        }
    }
    out
}

/// Rank of the 6 x n matrix whose columns are `ws`, by Gaussian elimination
/// on its Gram matrix with a relative pivot tolerance.
fn rank(ws: &[W6]) -> usize {
    let mut g = [[0.0; 6]; 6];
    for w in ws {
        for i in 0..6 {
            for j in 0..6 {
                g[i][j] += w[i] * w[j];
            }
        }
    }
    let scale = (0..6).map(|i| g[i][i]).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let tol = scale * 1e-12;
    let mut r = 0;
    let mut used = [false; 6];
    for _ in 0..6 {
        // Full pivoting over the remaining diagonal block.
        let mut best = (0.0, 0usize);
        for i in 0..6 {
            if !used[i] && g[i][i].abs() > best.0 {
                best = (g[i][i].abs(), i);
            }
        }
        if best.0 <= tol {
            break;
        }
        let p = best.1;
        used[p] = true;
        r += 1;
        let piv = g[p][p];
        let row = g[p];
        for i in 0..6 {
            if i != p {
                let f = g[i][p] / piv;
                for j in 0..6 {
                    g[i][j] -= f * row[j];
                }
            }
        }
    }
    r
}

fn support(ws: &[W6], d: &W6) -> f64 {
    ws.iter().map(|w| dot6(w, d)).fold(f64::NEG_INFINITY, f64::max)
}

/// Smoothed support `tau log sum exp(w.d / tau)` and its gradient.
fn smooth_support(ws: &[W6], d: &W6, tau: f64) -> (f64, W6) {
    let dots: Vec<f64> = ws.iter().map(|w| dot6(w, d)).collect();
    let m = dots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut g = [0.0; 6];
    for (w, &s) in ws.iter().zip(&dots) {
        let e = ((s - m) / tau).exp();
        z += e;
        for k in 0..6 {
            g[k] += e * w[k];
        }
    }
    g.iter_mut().for_each(|x| *x /= z);
    (m + tau * z.ln(), g)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve6(mut a: [[f64; 6]; 6], mut b: W6) -> Option<W6> {
    for c in 0..6 {
        let p = (c..6).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..6 {
            let f = a[r][c] / a[c][c];
            for k in c..6 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 6];
    for c in (0..6).rev() {
        let s: f64 = (c + 1..6).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Snaps a near-optimal direction onto a hull facet: hyperplanes through six
/// of the wrenches that are most nearly active at `d`. Returns the smallest
/// exact support value among the resulting normals.
fn snap_to_facet(ws: &[W6], d: &W6) -> f64 {
    let mut order: Vec<usize> = (0..ws.len()).collect();
    order.sort_by(|&i, &j| dot6(&ws[j], d).total_cmp(&dot6(&ws[i], d)));
    let top: Vec<usize> = order.into_iter().take(8).collect();
    let mut best = f64::INFINITY;
    if top.len() < 6 {
        return best;
    }
    // All 6-subsets of the (at most 8) most active wrenches.
    let n = top.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != 6 {
            continue;
        }
        let rows: Vec<W6> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ws[top[i]]).collect();
        let a: [[f64; 6]; 6] = std::array::from_fn(|i| rows[i]);
        if let Some(y) = solve6(a, [1.0; 6]) {
            if dot6(&y, d) > 0.0 {
                best = best.min(support(ws, &normalize6(y)));
            }
        }
    }
    best
}

/// Local descent of the support function on the unit sphere from `d`.
/// Returns the smallest exact support value seen.
fn refine(ws: &[W6], mut d: W6, scale: f64) -> f64 {
    let mut best = support(ws, &d);
    let mut tau = 0.05 * scale;
    while tau > 1e-7 * scale {
        let mut step = 0.1;
        for _ in 0..60 {
            let (f, g) = smooth_support(ws, &d, tau);
            // Tangential component of the gradient.
            let radial = dot6(&g, &d);
            let mut t = g;
            for k in 0..6 {
                t[k] -= radial * d[k];
            }
            let tn = dot6(&t, &t).sqrt();
            if tn < 1e-14 * scale {
                break;
            }
            let mut moved = false;
            while step > 1e-12 {
                let mut cand = d;
                for k in 0..6 {
                    cand[k] -= step * t[k] / tn;
                }
                let cand = normalize6(cand);
                let (fc, _) = smooth_support(ws, &cand, tau);
                if fc < f {
                    d = cand;
                    best = best.min(support(ws, &d));
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        tau *= 0.3;
    }
    best.min(snap_to_facet(ws, &d))
}

/// Estimated radius of the largest origin-centered ball in the grasp
/// wrench space; 0 when the grasp is not force closure.
///
/// `mu` is the friction coefficient, `com` the object center of mass and
/// `rho` the torque length scale (the object's bounding radius).
pub fn epsilon_metric(contacts: &[Contact], mu: f64, com: Vec3, rho: f64, opts: &EpsilonOptions) -> f64 {
    if contacts.is_empty() || opts.pyramid_edges == 0 {
        return 0.0;
    }
    epsilon_of_wrenches(&pyramid_wrenches(contacts, mu, com, rho, opts.pyramid_edges), opts)
}

/// Inscribed-ball radius of the convex hull of `ws` about the origin.
pub fn epsilon_of_wrenches(ws: &[W6], opts: &EpsilonOptions) -> f64 {
    if rank(ws) < 6 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples: Vec<(f64, W6)> = Vec::with_capacity(opts.directions);
    for _ in 0..opts.directions.max(1) {
        let d = normalize6(std::array::from_fn(|_| StandardNormal.sample(&mut rng)));
        samples.push((support(ws, &d), d));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = samples[0].0;
    if best <= 0.0 {
        return 0.0;
    }
    let scale = ws.iter().map(|w| dot6(w, w).sqrt()).fold(0.0, f64::max);
    for &(_, d) in samples.iter().take(opts.refine_starts) {
        best = best.min(refine(ws, d, scale));
    }
    best.max(0.0)
}
