//! q-deformed exponential and logarithm, empirical densities and the
//! q-Gaussian shape fit that yields `q_stat`.
//!
//! The fit linearizes the q-Gaussian: for the right `q`,
//! `ln_q(p(x) / p(0)) = -beta x^2`, so scanning `q` and keeping the value with
//! the best straight-line fit of `ln_q(p_i / p_peak)` against `x_i^2`
//! recovers the shape index. The regression is weighted by bin counts so
//! that sparsely populated tail bins do not dominate it.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::stats;

const Q_UNITY_TOL: f64 = 1e-12;

/// Outcome of a q-exponential evaluation. Divergence is reported rather than
/// returned as a non-number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QExp {
    Value(f64),
    Overflow,
}

impl QExp {
    pub fn value(self) -> Option<f64> {
        match self {
            QExp::Value(v) => Some(v),
            QExp::Overflow => None,
        }
    }
}

/// `e_q(x) = [1 + (1-q) x]^{1/(1-q)}` with the Tsallis cutoff.
pub fn q_exponential(x: f64, q: f64) -> QExp {
    if (q - 1.0).abs() < Q_UNITY_TOL {
        let v = x.exp();
        return if v.is_finite() { QExp::Value(v) } else { QExp::Overflow };
    }
    let one_minus_q = 1.0 - q;
    let base = 1.0 + one_minus_q * x;
    if base <= 0.0 {
        return if q < 1.0 { QExp::Value(0.0) } else { QExp::Overflow };
    }
    let v = ((one_minus_q * x).ln_1p() / one_minus_q).exp();
    if v.is_finite() {
        QExp::Value(v)
    } else {
        QExp::Overflow
    }
}

/// `ln_q(x) = (x^{1-q} - 1) / (1 - q)`, the inverse of [`q_exponential`].
pub fn q_logarithm(x: f64, q: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("q-logarithm needs x > 0, got {x}")));
    }
    if (q - 1.0).abs() < Q_UNITY_TOL {
        return Ok(x.ln());
    }
    let one_minus_q = 1.0 - q;
    Ok((one_minus_q * x.ln()).exp_m1() / one_minus_q)
}

/// Density histogram of a standardized variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub width: f64,
}

impl Histogram {
    /// Builds a histogram from counts over uniform bins. Densities are
    /// normalized to unit area.
    pub fn from_counts(bin_centers: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_centers.len() != counts.len() || bin_centers.len() < 2 {
            return Err(Error::InvalidParameter("histogram needs at least two matching bins".into()));
        }
        let width = bin_centers[1] - bin_centers[0];
        if !(width > 0.0) {
            return Err(Error::InvalidParameter("bin centers must increase".into()));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("histogram is empty".into()));
        }
        let densities = counts.iter().map(|&c| c as f64 / (total as f64 * width)).collect();
        Ok(Self {
            bin_centers,
            densities,
            counts,
            width,
        })
    }

    /// Histogram with prescribed densities (rescaled to unit area) and
    /// counts; used for exact-model inputs.
    pub fn from_densities(bin_centers: Vec<f64>, densities: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if bin_centers.len() != densities.len() || densities.len() != counts.len() || bin_centers.len() < 2 {
            return Err(Error::InvalidParameter("histogram needs at least two matching bins".into()));
        }
        let width = bin_centers[1] - bin_centers[0];
        let area: f64 = densities.iter().sum::<f64>() * width;
        if !(width > 0.0) || !(area > 0.0) || densities.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidParameter("densities must be nonnegative with positive area".into()));
        }
        Ok(Self {
            densities: densities.iter().map(|d| d / area).collect(),
            bin_centers,
            counts,
            width,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.width
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("center\tdensity\tcount\n");
        for i in 0..self.bin_centers.len() {
            let _ = writeln!(out, "{}\t{}\t{}", self.bin_centers[i], self.densities[i], self.counts[i]);
        }
        out
    }
}

/// Standardizes `x` (zero mean, unit sample variance) and bins it over
/// `[-L, L]`, `L = max(10, max |x|)`. `bins` must be odd so that a center bin
/// straddles zero.
pub fn empirical_pdf(x: &[f64], bins: usize) -> Result<Histogram> {
    if x.len() < 100 {
        return Err(Error::TooShort { needed: 100, got: x.len() });
    }
    if bins < 3 || bins.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("bin count must be odd and >= 3, got {bins}")));
    }
    let mean = stats::mean(x);
    let sd = stats::sample_std(x);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::ZeroVariance("density estimate input"));
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let half = z.iter().fold(10.0f64, |m, v| m.max(v.abs()));
    let width = 2.0 * half / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in &z {
        let i = ((v + half) / width).floor() as isize;
        counts[i.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let centers = (0..bins).map(|i| -half + (i as f64 + 0.5) * width).collect();
    Histogram::from_counts(centers, counts)
}

/// Candidate `q` values scanned by the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct QGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for QGrid {
    fn default() -> Self {
        Self {
            lo: 1.0,
            hi: 3.0,
            step: 0.01,
        }
    }
}

impl QGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QGaussianFit {
    pub q_stat: f64,
    /// Inverse width in standardized units.
    pub beta: f64,
    /// Peak density.
    pub amplitude: f64,
    pub stderr_q: f64,
    pub r2: f64,
    /// Best R^2 below 0.9.
    pub low_quality: bool,
    /// Winning `q` sits on the scan boundary.
    pub boundary_hit: bool,
    pub bins_used: usize,
    /// `(q, R^2)` over the scan.
    #[serde(skip)]
    pub r2_curve: Vec<(f64, f64)>,
    pub bootstrap_replicates: usize,
}

pub const MIN_BIN_COUNT: u64 = 5;
pub const MIN_QUALIFYING_BINS: usize = 10;

pub fn fit_qgaussian(h: &Histogram, scan: &QGrid) -> Result<QGaussianFit> {
    let keep: Vec<usize> = (0..h.counts.len()).filter(|&i| h.counts[i] >= MIN_BIN_COUNT).collect();
    if keep.len() < MIN_QUALIFYING_BINS {
        return Err(Error::InsufficientPoints {
            needed: MIN_QUALIFYING_BINS,
            got: keep.len(),
        });
    }
    let peak = keep.iter().map(|&i| h.densities[i]).fold(0.0f64, f64::max);
    let x2: Vec<f64> = keep.iter().map(|&i| h.bin_centers[i].powi(2)).collect();
    let ratio: Vec<f64> = keep.iter().map(|&i| h.densities[i] / peak).collect();
    let weights: Vec<f64> = keep.iter().map(|&i| h.counts[i] as f64).collect();
    let grid = scan.values();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty q scan".into()));
    }
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, stats::LinearFit)> = None;
    for (gi, &q) in grid.iter().enumerate() {
        let y: Vec<f64> = ratio.iter().map(|&r| q_logarithm(r, q).expect("ratio is positive")).collect();
        let Some(fit) = stats::weighted_ols(&x2, &y, Some(&weights)) else {
            continue;
        };
        curve.push((q, fit.r2));
        if best.as_ref().is_none_or(|(_, b)| fit.r2 > b.r2) {
            best = Some((gi, fit));
        }
    }
    let (gi, fit) = best.ok_or(Error::InsufficientPoints { needed: 2, got: 0 })?;
    Ok(QGaussianFit {
        q_stat: grid[gi],
        beta: -fit.slope,
        amplitude: peak,
        stderr_q: 0.0,
        r2: fit.r2,
        low_quality: fit.r2 < 0.9,
        boundary_hit: gi == 0 || gi + 1 == grid.len(),
        bins_used: keep.len(),
        r2_curve: curve,
        bootstrap_replicates: 0,
    })
}

/// Fit on raw samples with a bootstrap standard error: the data are
/// resampled with replacement `resamples` times and `stderr_q` is the sample
/// standard deviation of the refitted `q`. Replicates use seeds derived from
/// `seed` and their index, so the result does not depend on scheduling.
pub fn fit_qgaussian_bootstrap(x: &[f64], bins: usize, scan: &QGrid, resamples: usize, seed: u64) -> Result<QGaussianFit> {
    let mut fit = fit_qgaussian(&empirical_pdf(x, bins)?, scan)?;
    if resamples < 2 {
        return Ok(fit);
    }
    let qs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, &[b as u64]));
            let sample: Vec<f64> = (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).collect();
            empirical_pdf(&sample, bins)
                .and_then(|h| fit_qgaussian(&h, scan))
                .ok()
                .map(|f| f.q_stat)
        })
        .collect();
    fit.bootstrap_replicates = qs.len();
    fit.stderr_q = if qs.len() >= 2 { stats::sample_std(&qs) } else { 0.0 };
    Ok(fit)
}
