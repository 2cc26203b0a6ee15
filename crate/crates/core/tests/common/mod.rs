//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Central difference of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finite-difference gradient of `f` over every coordinate of `theta`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let h = 1e-6 * theta[i].abs().max(1.0);
            let mut p = theta.to_vec();
            let mut m = theta.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]` by Newton
/// iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `n`-point Gauss-Hermite nodes and weights for the weight `exp(-t^2)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2
                    - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub fn std_normal_pdf(e: f64) -> f64 {
    (-0.5 * e * e).exp() / (2.0 * PI).sqrt()
}

/// `E[clamp(x + s e, lo, hi)]` for `e ~ N(0, 1)`, by Gauss-Legendre on
/// `e in [-12, 12]` split at the two kinks so each piece is smooth.
pub fn censored_mean_quadrature(
    lo: f64,
    hi: f64,
    s: f64,
    x: f64,
    nodes: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let g = |e: f64| (x + s * e).clamp(lo, hi) * std_normal_pdf(e);
    let mut cuts = vec![-12.0, 12.0];
    for k in [(lo - x) / s, (hi - x) / s] {
        if k > -12.0 && k < 12.0 {
            cuts.push(k);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let (t, w) = nodes;
    cuts.windows(2)
        .map(|ab| {
            let (a, b) = (ab[0], ab[1]);
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            r * t
                .iter()
                .zip(w)
                .map(|(ti, wi)| wi * g(m + r * ti))
                .sum::<f64>()
        })
        .sum()
}

/// Plain Gauss-Hermite estimate of the same expectation, no splitting.
pub fn censored_mean_hermite(
    lo: f64,
    hi: f64,
    s: f64,
    x: f64,
    nodes: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let (t, w) = nodes;
    t.iter()
        .zip(w)
        .map(|(ti, wi)| wi * (x + s * std::f64::consts::SQRT_2 * ti).clamp(lo, hi))
        .sum::<f64>()
        / PI.sqrt()
}

#[test]
fn legendre_integrates_polynomials() {
    let nodes = gauss_legendre(64);
    let s: f64 = nodes
        .0
        .iter()
        .zip(&nodes.1)
        .map(|(x, w)| w * x.powi(10))
        .sum();
    assert!((s - 2.0 / 11.0).abs() < 1e-14);
    assert!((nodes.1.iter().sum::<f64>() - 2.0).abs() < 1e-13);
}

#[test]
fn hermite_moments() {
    let (t, w) = gauss_hermite(64);
    let m0: f64 = w.iter().sum();
    let m2: f64 = t.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    assert!((m0 - PI.sqrt()).abs() < 1e-12);
    assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
}
