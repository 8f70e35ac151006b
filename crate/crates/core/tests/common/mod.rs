//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Silverman's rule with type-7 quartiles and the n-1 standard deviation.
pub fn silverman(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
    };
    let iqr = q(0.75) - q(0.25);
    1.06 * sd.min(iqr / 1.349) * n.powf(-0.2)
}

fn monomials(d: usize, q: usize, z: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for total in 0..=q {
        if d == 1 {
            out.push(z[0].powi(total as i32));
        } else {
            for a in 0..=total {
                out.push(z[0].powi(a as i32) * z[1].powi((total - a) as i32));
            }
        }
    }
    out
}

/// Intercept of the weighted polynomial fit at `x_k` without observation `k`.
pub fn brute_force_loo(cols: &[&[f64]], y: &[f64], q: usize) -> Vec<f64> {
    let d = cols.len();
    let n = y.len();
    let h: Vec<f64> = cols.iter().map(|c| silverman(c)).collect();
    (0..n)
        .map(|k| {
            let rows: Vec<usize> = (0..n).filter(|&i| i != k).collect();
            let basis = monomials(d, q, &vec![0.0; d]).len();
            let mut xm = DMatrix::zeros(rows.len(), basis);
            let mut w = DVector::zeros(rows.len());
            let mut t = DVector::zeros(rows.len());
            for (r, &i) in rows.iter().enumerate() {
                let z: Vec<f64> = (0..d).map(|j| cols[j][i] - cols[j][k]).collect();
                for (c, v) in monomials(d, q, &z).into_iter().enumerate() {
                    xm[(r, c)] = v;
                }
                w[r] = (0..d).map(|j| (-0.5 * (z[j] / h[j]).powi(2)).exp()).product::<f64>();
                t[r] = y[i];
            }
            let xtw = xm.transpose() * DMatrix::from_diagonal(&w);
            let beta = (&xtw * &xm).lu().solve(&(&xtw * t)).expect("nonsingular");
            beta[0]
        })
        .collect()
}

pub fn max_relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn gauss_2d(x: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let q = (c[1][1] * x[0] * x[0] - 2.0 * c[0][1] * x[0] * x[1] + c[0][0] * x[1] * x[1]) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

pub fn gauss_1d(x: f64, v: f64) -> f64 {
    (-0.5 * x * x / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// `p(x) / (p1(x1) p2(x2))` for `alpha N(0, I) + (1 - alpha) N(0, omega)`.
pub fn density_ratio(alpha: f64, omega: [[f64; 2]; 2], x: [f64; 2]) -> f64 {
    let p = alpha * gauss_2d(x, [[1.0, 0.0], [0.0, 1.0]]) + (1.0 - alpha) * gauss_2d(x, omega);
    let p1 = alpha * gauss_1d(x[0], 1.0) + (1.0 - alpha) * gauss_1d(x[0], omega[0][0]);
    let p2 = alpha * gauss_1d(x[1], 1.0) + (1.0 - alpha) * gauss_1d(x[1], omega[1][1]);
    p / (p1 * p2)
}
