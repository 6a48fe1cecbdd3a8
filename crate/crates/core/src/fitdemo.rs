//! Linear versus polynomial ridge fits on a noisy 1-D curve.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::powi_exact;
use crate::linalg::solve_in_place;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitDemoSpec {
    pub points: usize,
    pub degree: usize,
    pub seed: u64,
    /// Peak amplitude of the outlier noise.
    pub noise: f64,
    /// Every `noise_every`-th point is perturbed.
    pub noise_every: usize,
    pub lambda: f64,
}

impl Default for FitDemoSpec {
    fn default() -> Self {
        Self {
            points: 100,
            degree: 2,
            seed: 0,
            noise: 0.5,
            noise_every: 5,
            lambda: 1e-8,
        }
    }
}

/// Samples of a clean curve and its noisy copy on `x ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

/// A smooth lopsided hump with strong uniform noise on every
/// `noise_every`-th sample.
pub fn noisy_curve(spec: &FitDemoSpec) -> Result<Curve> {
    if spec.points < 2 || spec.noise_every == 0 {
        return Err(Error::InvalidParameter(format!("unusable fit demo settings {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x: Vec<f64> = (0..spec.points).map(|i| i as f64 / (spec.points - 1) as f64).collect();
    let clean: Vec<f64> = x.iter().map(|&t| 0.1 + 0.8 * (PI * t).sin() + 0.1 * t).collect();
    let noisy = clean
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i % spec.noise_every == 0 {
                c + rng.gen_range(-spec.noise..=spec.noise)
            } else {
                c
            }
        })
        .collect();
    Ok(Curve { x, clean, noisy })
}

/// Ridge fit of `y ≈ Σ_k c_k x^k` for `k = 0..=degree`; the penalty covers
/// every coefficient.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize, lambda: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidParameter("sample vectors must be non-empty and equal length".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge weight must be positive, got {lambda}")));
    }
    let side = degree + 1;
    let mut a = vec![0.0; side * side];
    let mut b = vec![0.0; side];
    for (&t, &v) in x.iter().zip(y) {
        let powers: Vec<f64> = (0..side).map(|k| powi_exact(t, k as u32)).collect();
        for i in 0..side {
            for j in 0..side {
                a[i * side + j] += powers[i] * powers[j];
            }
            b[i] += powers[i] * v;
        }
    }
    for i in 0..side {
        a[i * side + i] += lambda;
    }
    solve_in_place(&mut a, &mut b, side)?;
    Ok(b)
}

pub fn evaluate_polynomial(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

pub fn rms(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (sum / a.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub curve: Curve,
    pub linear: Vec<f64>,
    pub polynomial: Vec<f64>,
    /// Error of each fit against the clean curve.
    pub rms_linear: f64,
    pub rms_polynomial: f64,
}

pub fn run_fitdemo(spec: &FitDemoSpec) -> Result<FitReport> {
    if spec.degree == 0 {
        return Err(Error::InvalidParameter("polynomial degree must be at least 1".into()));
    }
    let curve = noisy_curve(spec)?;
    fit_curve(curve, spec.degree, spec.lambda)
}

pub fn fit_curve(curve: Curve, degree: usize, lambda: f64) -> Result<FitReport> {
    let eval = |coeffs: &[f64]| curve.x.iter().map(|&t| evaluate_polynomial(coeffs, t)).collect::<Vec<_>>();
    let linear = eval(&fit_polynomial(&curve.x, &curve.noisy, 1, lambda)?);
    let polynomial = eval(&fit_polynomial(&curve.x, &curve.noisy, degree, lambda)?);
    Ok(FitReport {
        rms_linear: rms(&linear, &curve.clean),
        rms_polynomial: rms(&polynomial, &curve.clean),
        curve,
        linear,
        polynomial,
    })
}

impl FitReport {
    /// Columns `x,clean,noisy,linear,polynomial`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(["x", "clean", "noisy", "linear", "polynomial"]).map_err(io)?;
        for i in 0..self.curve.x.len() {
            w.serialize((
                self.curve.x[i],
                self.curve.clean[i],
                self.curve.noisy[i],
                self.linear[i],
                self.polynomial[i],
            ))
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
