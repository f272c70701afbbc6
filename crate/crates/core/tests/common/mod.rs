//! Shared test helpers: random configurations and an independent
//! brute-force critical point finder.
#![allow(dead_code)]

use chargekit::ChargeConfiguration;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` charges uniform in the unit cube of R^d with the given charge sampler.
pub fn random_config<F>(rng: &mut ChaCha8Rng, d: usize, n: usize, mut charge: F) -> ChargeConfiguration
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    let entries = (0..n)
        .map(|_| {
            let p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (p, charge(rng))
        })
        .collect();
    ChargeConfiguration::new(d, entries).expect("random positions are distinct")
}

pub fn unit_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn mixed_charge(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(0.5..2.0);
    m * unit_sign(rng)
}

struct Pts {
    pos: Vec<[f64; 3]>,
    q: Vec<f64>,
}

impl Pts {
    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (p, q) in self.pos.iter().zip(&self.q) {
            let d = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let f = q / (r2 * r2.sqrt());
            for k in 0..3 {
                g[k] -= f * d[k];
            }
        }
        g
    }

    fn hess(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (p, q) in self.pos.iter().zip(&self.q) {
            let d = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r3 = r2 * r2.sqrt();
            for a in 0..3 {
                for b in 0..3 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    h[a][b] += q * (3.0 * d[a] * d[b] / (r3 * r2) - delta / r3);
                }
            }
        }
        h
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Solves `h x = b` by Cramer's rule; `None` when singular.
fn solve3(h: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(h);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = h;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Brute-force critical points: `|grad U|` on an `n^3` grid over the box,
/// strict local minima over the 26-neighbourhood, then plain Newton from
/// each minimum. Returns the distinct converged points.
pub fn grid_oracle(cfg: &ChargeConfiguration, lo: [f64; 3], hi: [f64; 3], n: usize) -> Vec<[f64; 3]> {
    let pts = Pts {
        pos: cfg
            .charges()
            .iter()
            .map(|c| {
                let p = c.position.coords();
                [p[0], p[1], p[2]]
            })
            .collect(),
        q: cfg.charge_values(),
    };
    let h = [0, 1, 2].map(|k| (hi[k] - lo[k]) / n as f64);
    let node = |i: usize, j: usize, k: usize| {
        [
            lo[0] + (i as f64 + 0.5) * h[0],
            lo[1] + (j as f64 + 0.5) * h[1],
            lo[2] + (k as f64 + 0.5) * h[2],
        ]
    };
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let vals: Vec<f64> = (0..n * n * n)
        .into_par_iter()
        .map(|m| {
            let (i, j, k) = (m / (n * n), (m / n) % n, m % n);
            norm3(pts.grad(node(i, j, k)))
        })
        .collect();

    let minima: Vec<[f64; 3]> = (1..n - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let vals = &vals;
            (1..n - 1).flat_map(move |j| {
                (1..n - 1).filter_map(move |k| {
                    let v = vals[idx(i, j, k)];
                    for a in [i - 1, i, i + 1] {
                        for b in [j - 1, j, j + 1] {
                            for c in [k - 1, k, k + 1] {
                                if (a, b, c) != (i, j, k) && vals[idx(a, b, c)] <= v {
                                    return None;
                                }
                            }
                        }
                    }
                    Some(node(i, j, k))
                })
            })
        })
        .collect();

    let scale = pts.q.iter().map(|q| q.abs()).sum::<f64>() / (cfg.length_scale() * cfg.length_scale());
    let hmax = h.iter().copied().fold(0.0, f64::max);
    let mut found: Vec<[f64; 3]> = Vec::new();
    for m in minima {
        let mut x = m;
        let mut ok = false;
        for _ in 0..50 {
            let g = pts.grad(x);
            if norm3(g) < 1e-11 * scale {
                ok = true;
                break;
            }
            let Some(dx) = solve3(pts.hess(x), [-g[0], -g[1], -g[2]]) else {
                break;
            };
            for k in 0..3 {
                x[k] += dx[k];
            }
        }
        let moved = norm3([x[0] - m[0], x[1] - m[1], x[2] - m[2]]);
        let inside = (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]);
        if ok && inside && moved < 4.0 * hmax {
            let dup = found
                .iter()
                .any(|y| norm3([x[0] - y[0], x[1] - y[1], x[2] - y[2]]) < 1e-6 * cfg.length_scale());
            if !dup {
                found.push(x);
            }
        }
    }
    found
}
