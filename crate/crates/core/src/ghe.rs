//! Generalized Hurst exponents, the GHE width `W`, the B-proxy and their
//! surrogate-standardized forms `W'`, `B'`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::stats;
use crate::timeseries::{gaussian_surrogate, log_path_from_returns};

pub const MIN_ENSEMBLE: usize = 30;
const ORDER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GheConfig {
    pub q_grid: Vec<f64>,
    pub tau_max_set: Vec<usize>,
    /// Orders `[lo, hi]` used for the B-proxy regression.
    pub b_range: (f64, f64),
    /// Orders `(q, q')` of the width.
    pub w_pair: (f64, f64),
}

impl Default for GheConfig {
    fn default() -> Self {
        let mut q_grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        q_grid.extend([1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
        GheConfig {
            q_grid,
            tau_max_set: (5..=19).collect(),
            b_range: (0.1, 1.0),
            w_pair: (0.1, 4.0),
        }
    }
}

impl GheConfig {
    /// Only the orders that `W` and `B` need.
    pub fn minimal(&self) -> GheConfig {
        let mut q_grid: Vec<f64> = self
            .q_grid
            .iter()
            .copied()
            .filter(|&q| q >= self.b_range.0 - ORDER_EPS && q <= self.b_range.1 + ORDER_EPS)
            .collect();
        for q in [self.w_pair.0, self.w_pair.1] {
            if !q_grid.iter().any(|&g| (g - q).abs() < ORDER_EPS) {
                q_grid.push(q);
            }
        }
        q_grid.sort_by(f64::total_cmp);
        GheConfig {
            q_grid,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GheSpectrum {
    pub q_grid: Vec<f64>,
    pub h: Vec<f64>,
    pub h_err: Vec<f64>,
    /// Smallest log-log R^2 over the tau_max set, per order.
    pub r2: Vec<f64>,
    pub intercept_a: f64,
    pub b_proxy: f64,
    pub width: Option<f64>,
    /// Orders removed because `S` was zero or non-finite at some lag.
    pub dropped_orders: Vec<f64>,
    /// Hill estimate of the tail exponent of the increments.
    pub tail_index: f64,
    /// Retained orders at or above the tail exponent.
    pub heavy_tail_orders: Vec<f64>,
}

impl GheSpectrum {
    pub fn h_at(&self, order: f64) -> Result<f64> {
        self.index_of(order).map(|i| self.h[i])
    }

    pub fn h_err_at(&self, order: f64) -> Result<f64> {
        self.index_of(order).map(|i| self.h_err[i])
    }

    fn index_of(&self, order: f64) -> Result<usize> {
        self.q_grid
            .iter()
            .position(|&q| (q - order).abs() < ORDER_EPS)
            .ok_or(Error::MissingOrder(order))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("order\tH\terr\tr2\n");
        for i in 0..self.q_grid.len() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", self.q_grid[i], self.h[i], self.h_err[i], self.r2[i]);
        }
        out
    }
}

/// `S(tau) = mean_n |x_{n+tau} - x_n|^order`.
pub fn structure_function(x: &[f64], order: f64, lags: &[usize]) -> Result<Vec<f64>> {
    if !(order > 0.0) {
        return Err(Error::InvalidParameter(format!("order must be positive, got {order}")));
    }
    let max = lags.iter().copied().max().unwrap_or(0);
    if x.len() <= max + 1 {
        return Err(Error::TooShort { needed: max + 2, got: x.len() });
    }
    Ok(lags
        .iter()
        .map(|&tau| {
            let m = x.len() - tau;
            (0..m).map(|n| (x[n + tau] - x[n]).abs().powf(order)).sum::<f64>() / m as f64
        })
        .collect())
}

/// Hill tail exponent of `|x_{n+1} - x_n|` with `k = floor(sqrt(n))`.
pub fn hill_tail_index(x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|v| *v > 0.0).collect();
    let k = (a.len() as f64).sqrt().floor() as usize;
    if k < 2 || a.len() <= k {
        return f64::INFINITY;
    }
    a.sort_by(|p, q| q.total_cmp(p));
    let ref_ln = a[k].ln();
    let mean_excess = a[..k].iter().map(|v| v.ln() - ref_ln).sum::<f64>() / k as f64;
    if mean_excess > 0.0 {
        1.0 / mean_excess
    } else {
        f64::INFINITY
    }
}

/// Ordinary least squares `H_q = A + B q` over the orders in `range`.
pub fn linear_scaling(q_grid: &[f64], h: &[f64], range: (f64, f64)) -> Result<(f64, f64)> {
    let (qs, hs): (Vec<f64>, Vec<f64>) = q_grid
        .iter()
        .zip(h)
        .filter(|(&q, _)| q >= range.0 - ORDER_EPS && q <= range.1 + ORDER_EPS)
        .map(|(&q, &v)| (q, v))
        .unzip();
    if qs.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: qs.len() });
    }
    let fit = stats::ols(&qs, &hs).ok_or(Error::InsufficientPoints { needed: 2, got: qs.len() })?;
    Ok((fit.intercept, fit.slope))
}

/// `W_{q,q'} = H_q - H_{q'}`.
pub fn width(spec: &GheSpectrum, q: f64, q_prime: f64) -> Result<f64> {
    if !(q < q_prime) {
        return Err(Error::InvalidParameter(format!("width needs q < q' (got {q}, {q_prime})")));
    }
    Ok(spec.h_at(q)? - spec.h_at(q_prime)?)
}

/// GHE spectrum of a (log-price) series.
pub fn ghe_spectrum(x: &[f64], cfg: &GheConfig) -> Result<GheSpectrum> {
    let tmax = cfg.tau_max_set.iter().copied().max().unwrap_or(0);
    if tmax < 2 || cfg.tau_max_set.iter().any(|&t| t < 2) {
        return Err(Error::InvalidParameter("every tau_max must be >= 2".into()));
    }
    if x.len() < 10 * tmax {
        return Err(Error::TooShort { needed: 10 * tmax, got: x.len() });
    }
    if cfg.q_grid.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::InvalidParameter("GHE orders must be positive".into()));
    }
    // ln|increment| per lag, shared by every order.
    let log_inc: Vec<Vec<f64>> = (1..=tmax)
        .into_par_iter()
        .map(|tau| (0..x.len() - tau).map(|n| (x[n + tau] - x[n]).abs().ln()).collect())
        .collect();
    let log_tau: Vec<f64> = (1..=tmax).map(|t| (t as f64).ln()).collect();

    let per_order: Vec<Option<(f64, f64, f64)>> = cfg
        .q_grid
        .par_iter()
        .map(|&q| {
            let ln_s: Vec<f64> = log_inc
                .iter()
                .map(|li| (li.iter().map(|l| (q * l).exp()).sum::<f64>() / li.len() as f64).ln())
                .collect();
            if ln_s.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut hs = Vec::with_capacity(cfg.tau_max_set.len());
            let mut r2 = f64::INFINITY;
            for &tm in &cfg.tau_max_set {
                let fit = stats::ols(&log_tau[..tm], &ln_s[..tm])?;
                hs.push(fit.slope / q);
                r2 = r2.min(fit.r2);
            }
            let err = if hs.len() > 1 { stats::sample_std(&hs) } else { 0.0 };
            Some((stats::mean(&hs), err, r2))
        })
        .collect();

    let mut spec = GheSpectrum {
        q_grid: Vec::new(),
        h: Vec::new(),
        h_err: Vec::new(),
        r2: Vec::new(),
        intercept_a: f64::NAN,
        b_proxy: f64::NAN,
        width: None,
        dropped_orders: Vec::new(),
        tail_index: hill_tail_index(x),
        heavy_tail_orders: Vec::new(),
    };
    for (&q, r) in cfg.q_grid.iter().zip(per_order) {
        match r {
            Some((h, e, r2)) => {
                spec.q_grid.push(q);
                spec.h.push(h);
                spec.h_err.push(e);
                spec.r2.push(r2);
                if q >= spec.tail_index {
                    spec.heavy_tail_orders.push(q);
                }
            }
            None => spec.dropped_orders.push(q),
        }
    }
    let (a, b) = linear_scaling(&spec.q_grid, &spec.h, cfg.b_range)?;
    spec.intercept_a = a;
    spec.b_proxy = b;
    spec.width = width(&spec, cfg.w_pair.0, cfg.w_pair.1).ok();
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Mean and std over the period's own surrogate realizations.
    #[default]
    Ensemble,
    /// Per-period mean; std pooled across periods.
    PooledSigma,
}

/// `W` and `B` of each surrogate realization for one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateEnsemble {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub seed: u64,
}

/// Surrogate ensemble of `m` Gaussian-return series shaped on `returns`
/// (fractional changes); each is turned into a log-price path from
/// `start_log_price` and analysed like the period itself.
pub fn surrogate_ensemble(
    returns: &[f64],
    start_log_price: f64,
    cfg: &GheConfig,
    m: usize,
    seed: u64,
) -> Result<SurrogateEnsemble> {
    if m < MIN_ENSEMBLE {
        return Err(Error::InvalidParameter(format!("ensemble size must be >= {MIN_ENSEMBLE}, got {m}")));
    }
    let minimal = cfg.minimal();
    let pairs: Vec<(f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let sur = gaussian_surrogate(returns, derive_seed(seed, &[r]))?;
            let path = log_path_from_returns(&sur, start_log_price)?;
            let s = ghe_spectrum(&path, &minimal)?;
            let w = s.width.ok_or(Error::MissingOrder(cfg.w_pair.1))?;
            Ok((w, s.b_proxy))
        })
        .collect::<Result<_>>()?;
    let (w, b) = pairs.into_iter().unzip();
    Ok(SurrogateEnsemble { w, b, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Standardized {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub z: f64,
}

/// `(value - mean(ensemble)) / std`, with `std` from the ensemble itself or
/// an externally pooled value.
pub fn standardize(value: f64, ensemble: &[f64], pooled_std: Option<f64>) -> Result<Standardized> {
    if ensemble.len() < MIN_ENSEMBLE {
        return Err(Error::TooShort { needed: MIN_ENSEMBLE, got: ensemble.len() });
    }
    let mean = stats::mean(ensemble);
    let std = pooled_std.unwrap_or_else(|| stats::sample_std(ensemble));
    if !(std > 0.0) {
        return Err(Error::ZeroVariance("surrogate ensemble"));
    }
    Ok(Standardized { value, mean, std, z: (value - mean) / std })
}

/// Pooled std: for each realization index, the std of the surrogate values
/// across periods; combined as a root mean square over realizations.
pub fn pooled_sigma(per_period: &[&[f64]]) -> Result<f64> {
    if per_period.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: per_period.len() });
    }
    let m = per_period.iter().map(|e| e.len()).min().unwrap_or(0);
    if m == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let ms: f64 = (0..m)
        .map(|r| {
            let col: Vec<f64> = per_period.iter().map(|e| e[r]).collect();
            stats::sample_std(&col).powi(2)
        })
        .sum::<f64>()
        / m as f64;
    let s = ms.sqrt();
    if !(s > 0.0) {
        return Err(Error::ZeroVariance("pooled surrogate values"));
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedScaling {
    pub w_prime: f64,
    pub b_prime: f64,
    pub ensemble_mean_w: f64,
    pub ensemble_std_w: f64,
    pub ensemble_mean_b: f64,
    pub ensemble_std_b: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub mode: NormalizationMode,
    /// `sqrt(h_err(q)^2 + h_err(q')^2) / std_w`.
    pub w_prime_stderr: f64,
}

impl NormalizedScaling {
    pub fn to_tsv(&self) -> String {
        format!(
            "quantity\tprime\tmean\tstd\nW\t{}\t{}\t{}\nB\t{}\t{}\t{}\n",
            self.w_prime, self.ensemble_mean_w, self.ensemble_std_w, self.b_prime, self.ensemble_mean_b, self.ensemble_std_b
        )
    }
}

/// Standardize a period's `W` and `B` against its surrogate ensemble.
/// `pooled` carries `(sigma_w, sigma_b)` in pooled-sigma mode.
pub fn normalize_scaling(
    spec: &GheSpectrum,
    cfg: &GheConfig,
    ensemble: &SurrogateEnsemble,
    pooled: Option<(f64, f64)>,
) -> Result<NormalizedScaling> {
    let w = spec.width.ok_or(Error::MissingOrder(cfg.w_pair.1))?;
    let zw = standardize(w, &ensemble.w, pooled.map(|p| p.0))?;
    let zb = standardize(spec.b_proxy, &ensemble.b, pooled.map(|p| p.1))?;
    let ew = spec.h_err_at(cfg.w_pair.0)?.hypot(spec.h_err_at(cfg.w_pair.1)?);
    Ok(NormalizedScaling {
        w_prime: zw.z,
        b_prime: zb.z,
        ensemble_mean_w: zw.mean,
        ensemble_std_w: zw.std,
        ensemble_mean_b: zb.mean,
        ensemble_std_b: zb.std,
        ensemble_size: ensemble.w.len(),
        seed: ensemble.seed,
        mode: if pooled.is_some() { NormalizationMode::PooledSigma } else { NormalizationMode::Ensemble },
        w_prime_stderr: ew / zw.std,
    })
}
