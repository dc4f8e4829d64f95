//! Synthetic series with analytically known statistics. These are the
//! oracles every estimator is checked against.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxation::{DecayCurve, DecayKind};
use crate::seeds::rng_from_seed;
use crate::timeseries::PriceSeries;
use crate::tsallis::{q_exponential, q_logarithm, Histogram, QExp};

/// Consecutive weekdays starting at `start` (or the next weekday after it).
pub fn weekday_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// First date of synthetic series.
pub fn synthetic_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// Draws from `p(x) ∝ [1 - (1-q) beta x^2]^{1/(1-q)}` using the generalized
/// Box-Muller construction. Restricted to `1 <= q < 5/3`.
pub fn sample_qgaussian(q: f64, beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(1.0..5.0 / 3.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q-Gaussian sampler needs 1 <= q < 5/3, got {q}")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    // Box-Muller with ln_{q'} yields a q-Gaussian of beta = 1/(3-q).
    let q_prime = (1.0 + q) / (3.0 - q);
    let scale = 1.0 / (beta * (3.0 - q)).sqrt();
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            let r = (-2.0 * q_logarithm(u1, q_prime).expect("u1 in (0, 1]")).sqrt();
            scale * r * (2.0 * PI * u2).cos()
        })
        .collect())
}

/// Unnormalized q-Gaussian density `e_q(-beta x^2)`.
pub fn qgaussian_shape(x: f64, q: f64, beta: f64) -> f64 {
    match q_exponential(-beta * x * x, q) {
        QExp::Value(v) => v,
        QExp::Overflow => f64::INFINITY,
    }
}

/// Variance of the q-Gaussian, finite for `q < 5/3`.
pub fn qgaussian_variance(q: f64, beta: f64) -> f64 {
    1.0 / (beta * (5.0 - 3.0 * q))
}

/// Histogram whose densities are the exact q-Gaussian evaluated at the bin
/// centers over `[-half_width, half_width]`; counts are the expected counts
/// for `total` samples.
pub fn qgaussian_histogram(q: f64, beta: f64, bins: usize, half_width: f64, total: f64) -> Result<Histogram> {
    if bins < 3 || !(half_width > 0.0) {
        return Err(Error::InvalidParameter("need >= 3 bins and a positive half width".into()));
    }
    let width = 2.0 * half_width / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|i| -half_width + (i as f64 + 0.5) * width).collect();
    let shape: Vec<f64> = centers.iter().map(|&x| qgaussian_shape(x, q, beta)).collect();
    let area: f64 = shape.iter().sum::<f64>() * width;
    let counts = shape.iter().map(|s| (s / area * width * total).round() as u64).collect();
    Histogram::from_densities(centers, shape, counts)
}

pub fn student_t(df: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let t = StudentT::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| t.sample(&mut rng)).collect())
}

pub fn standard_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// AR(1) process `x_t = phi x_{t-1} + e_t` started from its stationary law.
pub fn ar1(phi: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) needs |phi| < 1, got {phi}")));
    }
    let noise = standard_normal(n, seed);
    let mut out = Vec::with_capacity(n);
    let mut x = noise.first().copied().unwrap_or(0.0) / (1.0 - phi * phi).sqrt();
    for (i, e) in noise.into_iter().enumerate() {
        if i > 0 {
            x = phi * x + e;
        }
        out.push(x);
    }
    Ok(out)
}

fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Unit-variance fractional Gaussian noise by circulant embedding.
pub fn fgn(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidParameter(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("fGn needs n >= 2".into()));
    }
    let mut size = 2 * n.next_power_of_two();
    for _ in 0..3 {
        match circulant_sample(hurst, n, size, seed) {
            Ok(v) => return Ok(v),
            Err(Error::EmbeddingNotPositive { .. }) => size *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::EmbeddingNotPositive { size })
}

fn circulant_sample(hurst: f64, n: usize, size: usize, seed: u64) -> Result<Vec<f64>> {
    let half = size / 2;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let k = if j <= half { j } else { size - j };
            Complex::new(fgn_autocovariance(k, hurst), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let tol = 1e-10 * row[0].re.abs().max(1.0);
    if row.iter().any(|l| l.re < -tol) {
        return Err(Error::EmbeddingNotPositive { size });
    }
    let mut rng = rng_from_seed(seed);
    let mut w: Vec<Complex<f64>> = row
        .iter()
        .map(|l| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex::new(a, b) * (l.re.max(0.0) / size as f64).sqrt()
        })
        .collect();
    fft.process(&mut w);
    Ok(w[..n].iter().map(|c| c.re).collect())
}

/// Fractional Brownian motion path of `n` points with `X_0 = 0`; `n` must be
/// a power of two of at least 2^8.
pub fn fbm(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("fBm length must be a power of two >= 256, got {n}")));
    }
    let noise = fgn(hurst, n - 1, seed)?;
    let mut path = Vec::with_capacity(n);
    path.push(0.0);
    let mut x = 0.0;
    for e in noise {
        x += e;
        path.push(x);
    }
    Ok(path)
}

/// Multiplicative binomial cascade parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub p: f64,
    pub depth: u32,
}

impl CascadeSpec {
    pub fn new(p: f64, depth: u32) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("cascade weight must lie in (0, 1), got {p}")));
        }
        if !(1..=24).contains(&depth) {
            return Err(Error::InvalidParameter(format!("cascade depth must lie in 1..=24, got {depth}")));
        }
        Ok(Self { p, depth })
    }

    pub fn len(&self) -> usize {
        1usize << self.depth
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha_min(&self) -> f64 {
        -self.p.max(1.0 - self.p).log2()
    }

    pub fn alpha_max(&self) -> f64 {
        -self.p.min(1.0 - self.p).log2()
    }

    /// Hölder exponent selected by moment order `m`.
    pub fn alpha_at(&self, m: f64) -> f64 {
        let (a, b) = (self.p, 1.0 - self.p);
        let (wa, wb) = (a.powf(m), b.powf(m));
        -(wa * a.log2() + wb * b.log2()) / (wa + wb)
    }

    /// Spectrum value `f = m alpha - tau(m)` at moment order `m`, with mass
    /// exponent `tau(m) = -log2(p^m + (1-p)^m)`.
    pub fn f_at(&self, m: f64) -> f64 {
        let tau = -(self.p.powf(m) + (1.0 - self.p).powf(m)).log2();
        m * self.alpha_at(m) - tau
    }
}

/// Binomial measure of `2^depth` cells summing to 1. With a shuffle seed the
/// left/right weights are swapped at random per node; the value distribution
/// (and so the spectrum endpoints) is unchanged.
pub fn binomial_cascade(spec: CascadeSpec, shuffle_seed: Option<u64>) -> Vec<f64> {
    let mut rng = shuffle_seed.map(rng_from_seed);
    let mut mass = vec![1.0f64];
    for _ in 0..spec.depth {
        let mut next = Vec::with_capacity(mass.len() * 2);
        for &m in &mass {
            let swap = rng.as_mut().is_some_and(|r| r.random::<bool>());
            let (l, r) = if swap { (1.0 - spec.p, spec.p) } else { (spec.p, 1.0 - spec.p) };
            next.push(m * l);
            next.push(m * r);
        }
        mass = next;
    }
    mass
}

/// The exact relaxation curve `e_q(-tau / tau0)` at the given lags.
pub fn qexp_decay_curve(q: f64, tau0: f64, lags: &[u32]) -> Result<DecayCurve> {
    if !(q >= 1.0) || !(tau0 > 0.0) {
        return Err(Error::InvalidParameter(format!("need q >= 1 and tau0 > 0 (q = {q}, tau0 = {tau0})")));
    }
    if lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("lags must be strictly increasing".into()));
    }
    let values = lags
        .iter()
        .map(|&t| match q_exponential(-(t as f64) / tau0, q) {
            QExp::Value(v) => v,
            QExp::Overflow => f64::INFINITY,
        })
        .collect();
    Ok(DecayCurve {
        lags: lags.to_vec(),
        values,
        floor: vec![0.0; lags.len()],
        kind: DecayKind::Model,
        samples: None,
    })
}

/// Log-spaced unique integer lags covering `[lo, hi]`.
pub fn log_spaced_lags(lo: u32, hi: u32, points: usize) -> Vec<u32> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u32> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1).max(1) as f64).exp().round() as u32)
        .collect();
    out.dedup();
    out
}

/// Close prices `P_t = P_{t-1} (1 + r_t)` from `start` on weekday dates.
pub fn prices_from_returns(label: &str, returns: &[f64], start: f64) -> Result<PriceSeries> {
    if !(start > 0.0) {
        return Err(Error::InvalidParameter(format!("start price must be positive, got {start}")));
    }
    let mut closes = Vec::with_capacity(returns.len() + 1);
    let mut p = start;
    closes.push(p);
    for (index, &r) in returns.iter().enumerate() {
        if !(r > -1.0) {
            return Err(Error::InvalidReturn { index, value: r });
        }
        p *= 1.0 + r;
        closes.push(p);
    }
    PriceSeries::new(label, weekday_dates(synthetic_epoch(), closes.len()), closes)
}

/// Close prices `start * exp(scale * x_t)` of a path `x`.
pub fn prices_from_path(label: &str, x: &[f64], start: f64, scale: f64) -> Result<PriceSeries> {
    let closes: Vec<f64> = x.iter().map(|v| start * (scale * v).exp()).collect();
    PriceSeries::new(label, weekday_dates(synthetic_epoch(), closes.len()), closes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Exponentiated fBm path; `n` points.
    Fbm,
    /// Gaussian returns; `n` returns.
    Gaussian,
    /// q-Gaussian returns; `n` returns.
    QgaussianReturns,
    /// Returns whose magnitudes follow a binomial cascade; `2^depth` returns.
    Cascade,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbm" => Ok(SynthKind::Fbm),
            "gaussian" => Ok(SynthKind::Gaussian),
            "qgaussian" | "qgaussian-returns" => Ok(SynthKind::QgaussianReturns),
            "cascade" => Ok(SynthKind::Cascade),
            _ => Err(Error::InvalidParameter(format!(
                "unknown kind '{s}' (fbm, gaussian, qgaussian-returns, cascade)"
            ))),
        }
    }
}

/// Named numeric parameters with defaults.
pub struct SynthParams<'a>(pub &'a [(String, f64)]);

impl SynthParams<'_> {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.0.iter().rev().find(|(k, _)| k == key).map_or(default, |(_, v)| *v)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if !(v >= 0.0) || v.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!("{key} must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }
}

/// Generates a synthetic price series. Shared parameters: `seed` (0),
/// `start` price (100), `scale` of the returns or path (0.01).
pub fn synthesize(kind: SynthKind, params: &SynthParams) -> Result<PriceSeries> {
    let seed = params.count("seed", 0)? as u64;
    let start = params.get("start", 100.0);
    let scale = params.get("scale", 0.01);
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    match kind {
        SynthKind::Fbm => {
            let x = fbm(params.get("hurst", 0.5), params.count("n", 1 << 14)?, seed)?;
            prices_from_path("fbm", &x, start, scale)
        }
        SynthKind::Gaussian => {
            let mu = params.get("mu", 0.0);
            let r: Vec<f64> = standard_normal(params.count("n", 2000)?, seed).iter().map(|z| mu + scale * z).collect();
            prices_from_returns("gaussian", &r, start)
        }
        SynthKind::QgaussianReturns => {
            let x = sample_qgaussian(params.get("q", 1.5), params.get("beta", 1.0), params.count("n", 2000)?, seed)?;
            let r: Vec<f64> = x.iter().map(|z| scale * z).collect();
            prices_from_returns("qgaussian", &r, start)
        }
        SynthKind::Cascade => {
            let depth = params.count("depth", 12)?;
            let spec = CascadeSpec::new(params.get("p", 0.6), depth as u32)?;
            let mu = binomial_cascade(spec, Some(seed));
            let n = mu.len() as f64;
            let mut rng = rng_from_seed(seed ^ 0x5EED);
            let r: Vec<f64> = mu
                .iter()
                .map(|m| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * scale * m * n
                })
                .collect();
            prices_from_returns("cascade", &r, start)
        }
    }
}
