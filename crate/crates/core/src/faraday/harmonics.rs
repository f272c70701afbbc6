//! Real regular solid harmonics, Schmidt semi-normalized.
//!
//! For each degree `l` the values are ordered `R_l0, C_l1, S_l1, ..., C_ll,
//! S_ll`, giving `(L + 1)^2` entries up to degree `L`. With this
//! normalization the addition theorem reads
//! `sum_m R_lm(x) R_lm(y) = |x|^l |y|^l P_l(cos g)`, so that
//! `1/|x - y| = sum_lm R_lm(y) R_lm(x) / |x|^(2l+1)` for `|x| > |y|`.

/// Number of harmonics of degree at most `degree_max`.
pub fn harmonic_count(degree_max: usize) -> usize {
    (degree_max + 1) * (degree_max + 1)
}

/// Index of `(l, m, sine)` in the flattened ordering.
pub fn harmonic_index(l: usize, m: usize, sine: bool) -> usize {
    if m == 0 {
        l * l
    } else {
        l * l + 2 * m - 1 + usize::from(sine)
    }
}

/// All solid harmonics of degree at most `degree_max` at `x`.
pub fn solid_harmonics(x: &[f64; 3], degree_max: usize) -> Vec<f64> {
    let lmax = degree_max;
    let [px, py, pz] = *x;
    let r2 = px * px + py * py + pz * pz;
    // c[l][m], s[l][m] stored densely, m <= l.
    let mut c = vec![vec![0.0; lmax + 1]; lmax + 1];
    let mut s = vec![vec![0.0; lmax + 1]; lmax + 1];
    c[0][0] = 1.0;
    for m in 1..=lmax {
        let f = if m == 1 {
            1.0
        } else {
            ((2 * m - 1) as f64 / (2 * m) as f64).sqrt()
        };
        let (cp, sp) = (c[m - 1][m - 1], s[m - 1][m - 1]);
        // (C + iS)_mm = f (x + iy) (C + iS)_{m-1,m-1}
        c[m][m] = f * (px * cp - py * sp);
        s[m][m] = f * (px * sp + py * cp);
    }
    for m in 0..=lmax {
        for l in (m + 1)..=lmax {
            let a = (2 * l - 1) as f64;
            let b = (((l - 1) * (l - 1) - m * m) as f64).sqrt();
            let d = ((l * l - m * m) as f64).sqrt();
            let (c2, s2) = if l >= m + 2 {
                (c[l - 2][m], s[l - 2][m])
            } else {
                (0.0, 0.0)
            };
            c[l][m] = (a * pz * c[l - 1][m] - b * r2 * c2) / d;
            s[l][m] = (a * pz * s[l - 1][m] - b * r2 * s2) / d;
        }
    }
    let mut out = Vec::with_capacity(harmonic_count(lmax));
    for l in 0..=lmax {
        out.push(c[l][0]);
        for m in 1..=l {
            out.push(c[l][m]);
            out.push(s[l][m]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre(l: usize, t: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, t);
        if l == 0 {
            return 1.0;
        }
        for k in 2..=l {
            let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn low_degrees_match_closed_forms() {
        let x = [0.3, -0.7, 0.4];
        let [a, b, z] = x;
        let r2 = a * a + b * b + z * z;
        let h = solid_harmonics(&x, 2);
        let s3 = 3f64.sqrt();
        let expect = [
            1.0,
            z,
            a,
            b,
            (3.0 * z * z - r2) / 2.0,
            s3 * a * z,
            s3 * b * z,
            s3 / 2.0 * (a * a - b * b),
            s3 * a * b,
        ];
        for (got, want) in h.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert_eq!(harmonic_index(2, 2, true), 8);
        assert_eq!(harmonic_index(2, 0, false), 4);
    }

    #[test]
    fn addition_theorem() {
        let x = [0.2, 0.5, -0.3];
        let y = [-0.6, 0.1, 0.45];
        let lmax = 30;
        let hx = solid_harmonics(&x, lmax);
        let hy = solid_harmonics(&y, lmax);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cg = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny);
        for l in 0..=lmax {
            let range = l * l..(l + 1) * (l + 1);
            let sum: f64 = hx[range.clone()].iter().zip(&hy[range]).map(|(a, b)| a * b).sum();
            let want = (nx * ny).powi(l as i32) * legendre(l, cg);
            assert!((sum - want).abs() < 1e-13 * (nx * ny).powi(l as i32).max(1e-300), "l={l}");
        }
    }

    #[test]
    fn harmonic_by_finite_differences() {
        let x = [0.31, -0.22, 0.17];
        let h = 1e-3;
        let base = solid_harmonics(&x, 6);
        let mut lap = vec![0.0; base.len()];
        for k in 0..3 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let (hp, hm) = (solid_harmonics(&p, 6), solid_harmonics(&m, 6));
            for i in 0..base.len() {
                lap[i] += (hp[i] - 2.0 * base[i] + hm[i]) / (h * h);
            }
        }
        // O(h^2) truncation; a non-harmonic polynomial would give O(1).
        assert!(lap.iter().all(|v| v.abs() < 1e-4), "{lap:?}");
    }
}
