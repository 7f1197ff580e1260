//! Reference implementations written without the library's linear algebra.
//! Shared by the core integration tests and the acceptance suite.
#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

pub type Vec6 = [f64; 6];
pub type Mat6 = [[f64; 6]; 6];

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// One scalar linear(ized) observation: `h`, innovation `y`, variance `r`.
#[derive(Clone, Copy, Debug)]
pub struct Row {
    pub h: Vec6,
    pub y: f64,
    pub r: f64,
}

/// Textbook Kalman correction with an explicit gain `K = P Hᵀ (H P Hᵀ + R)⁻¹`
/// and the Joseph covariance form.
pub fn explicit_gain_update(mean: &Vec6, p: &Mat6, rows: &[Row]) -> (Vec6, Mat6) {
    let m = rows.len();
    // P Hᵀ: 6 × m
    let pht: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            (0..m)
                .map(|j| (0..6).map(|k| p[i][k] * rows[j].h[k]).sum())
                .collect()
        })
        .collect();
    let s: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let hph: f64 = (0..6).map(|k| rows[i].h[k] * pht[k][j]).sum();
                    hph + if i == j { rows[i].r } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let s_inv = gauss_jordan_inverse(&s).expect("innovation covariance invertible");
    let k: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).map(|l| pht[i][l] * s_inv[l][j]).sum())
                .collect()
        })
        .collect();
    let mut post_mean = *mean;
    for i in 0..6 {
        post_mean[i] += (0..m).map(|j| k[i][j] * rows[j].y).sum::<f64>();
    }
    let mut a = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let kh: f64 = (0..m).map(|l| k[i][l] * rows[l].h[j]).sum();
            a[i][j] = if i == j { 1.0 } else { 0.0 } - kh;
        }
    }
    let mut post = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let mut v = 0.0;
            for x in 0..6 {
                for y in 0..6 {
                    v += a[i][x] * p[x][y] * a[j][y];
                }
            }
            v += (0..m).map(|l| k[i][l] * rows[l].r * k[j][l]).sum::<f64>();
            post[i][j] = v;
        }
    }
    (post_mean, post)
}

pub fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Observation functions, state order `[x, y, vx, vy, ax, ay]`.
pub fn speed(s: &Vec6) -> f64 {
    (s[2] * s[2] + s[3] * s[3]).sqrt()
}

pub fn range(s: &Vec6, bs: (f64, f64)) -> f64 {
    ((s[0] - bs.0).powi(2) + (s[1] - bs.1).powi(2)).sqrt()
}

/// Direction from the base station to the vehicle.
pub fn azimuth(s: &Vec6, bs: (f64, f64)) -> f64 {
    (s[1] - bs.1).atan2(s[0] - bs.0)
}

/// Central difference of `f` with respect to every state.
pub fn finite_difference(f: impl Fn(&Vec6) -> f64, s: &Vec6, step: f64, angular: bool) -> Vec6 {
    let mut out = [0.0; 6];
    for i in 0..6 {
        let h = step * s[i].abs().max(1.0);
        let mut plus = *s;
        let mut minus = *s;
        plus[i] += h;
        minus[i] -= h;
        let d = f(&plus) - f(&minus);
        out[i] = if angular { wrap(d) } else { d } / (2.0 * h);
    }
    out
}

/// Percentile by the definition: sort, rank `(n-1)p/100`, interpolate.
pub fn brute_percentile(samples: &[f64], p: f64) -> f64 {
    let mut s = samples.to_vec();
    // insertion sort keeps this independent of the library's sort
    for i in 1..s.len() {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let p = p.clamp(0.0, 100.0);
    let h = (s.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Relative difference against a scale floored at 1.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
pub mod checks;
