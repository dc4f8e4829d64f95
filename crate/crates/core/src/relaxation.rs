//! Decay observables versus lag and the q-exponential relaxation fit.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::tsallis::{q_exponential, QExp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Autocorrelation,
    MutualInformation,
    /// Exact curve from a closed form; no noise floor.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub lags: Vec<u32>,
    pub values: Vec<f64>,
    /// Per-lag noise floor below which a lag does not qualify for fitting.
    pub floor: Vec<f64>,
    pub kind: DecayKind,
    /// Length of the series the curve was estimated from.
    pub samples: Option<usize>,
}

impl DecayCurve {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lag\tvalue\tfloor\n");
        for i in 0..self.lags.len() {
            let _ = writeln!(out, "{}\t{}\t{}", self.lags[i], self.values[i], self.floor[i]);
        }
        out
    }

    /// Lags whose value clears the gate, paired with their values.
    pub fn qualifying(&self) -> (Vec<u32>, Vec<f64>) {
        let gate = match self.kind {
            DecayKind::MutualInformation => 2.0,
            _ => 1.0,
        };
        self.lags
            .iter()
            .zip(&self.values)
            .zip(&self.floor)
            .filter(|((_, &v), &f)| v > gate * f && v > 0.0 && v.is_finite())
            .map(|((&l, &v), _)| (l, v))
            .unzip()
    }
}

/// `max_lag = min(100, floor(n/10))`.
pub fn default_max_lag(n: usize) -> usize {
    (n / 10).min(100)
}

/// `bins = clamp(floor(n^(1/3)), 8, 32)`.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).cbrt().floor() as usize).clamp(8, 32)
}

fn check_len(n: usize, max_lag: usize) -> Result<()> {
    if max_lag == 0 || n < 10 * max_lag {
        return Err(Error::TooShort {
            needed: 10 * max_lag.max(1),
            got: n,
        });
    }
    Ok(())
}

/// Sample autocorrelation `C(tau)` for `tau = 1..=max_lag`, normalized by the
/// lag-0 sum of squares. The floor is the white-noise band `3/sqrt(n)`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<DecayCurve> {
    check_len(x.len(), max_lag)?;
    let m = stats::mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance("autocorrelation input"));
    }
    let values = (1..=max_lag)
        .map(|tau| d.iter().zip(&d[tau..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect();
    let band = 3.0 / (x.len() as f64).sqrt();
    Ok(DecayCurve {
        lags: (1..=max_lag as u32).collect(),
        values,
        floor: vec![band; max_lag],
        kind: DecayKind::Autocorrelation,
        samples: Some(x.len()),
    })
}

/// Equiprobable bin labels by rank; ties are broken by position so every bin
/// holds `floor(n/bins)` or `ceil(n/bins)` values.
pub fn rank_bins(x: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins < 2 || x.len() < bins {
        return Err(Error::DegenerateBinning(format!("{} values cannot fill {bins} bins", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateBinning("non-finite value".into()));
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::DegenerateBinning("constant input".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let n = x.len();
    let mut label = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        label[i] = rank * bins / n;
    }
    Ok(label)
}

/// Plug-in mutual information in nats of two label sequences.
pub fn mutual_information_labels(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len();
    let mut joint = vec![0u32; bins * bins];
    let mut pa = vec![0u32; bins];
    let mut pb = vec![0u32; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (pa[i] as f64 * pb[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mutual information of a pair of equal-length sequences, each binned
/// equiprobably on its own ranks.
pub fn mutual_information_pair(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter("pair lengths differ".into()));
    }
    Ok(mutual_information_labels(&rank_bins(a, bins)?, &rank_bins(b, bins)?, bins))
}

/// Plug-in entropy in nats of the binned variable.
pub fn binned_entropy(x: &[f64], bins: usize) -> Result<f64> {
    let labels = rank_bins(x, bins)?;
    let mut counts = vec![0u32; bins];
    for l in labels {
        counts[l] += 1;
    }
    let n = x.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Lagged mutual information `I(tau)` for `tau = 1..=max_lag`. Marginal edges
/// are equiprobable over the whole series; the floor is the plug-in bias
/// `(bins-1)^2 / (2N)` with `N = n - tau` pairs.
pub fn mutual_information(x: &[f64], max_lag: usize, bins: usize) -> Result<DecayCurve> {
    check_len(x.len(), max_lag)?;
    if bins < 4 {
        return Err(Error::InvalidParameter(format!("bins must be >= 4, got {bins}")));
    }
    let labels = rank_bins(x, bins)?;
    let n = x.len();
    let values: Vec<f64> = (1..=max_lag)
        .into_par_iter()
        .map(|tau| mutual_information_labels(&labels[..n - tau], &labels[tau..], bins))
        .collect();
    let floor = (1..=max_lag)
        .map(|tau| ((bins - 1) * (bins - 1)) as f64 / (2.0 * (n - tau) as f64))
        .collect();
    Ok(DecayCurve {
        lags: (1..=max_lag as u32).collect(),
        values,
        floor,
        kind: DecayKind::MutualInformation,
        samples: Some(n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Asymptotic,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRelFit {
    pub q_rel: f64,
    pub tau_q: f64,
    /// Log-log slope for the asymptotic method; `1/(1-q)` for the direct one.
    pub slope: f64,
    pub stderr_qrel: f64,
    pub fit_range: (u32, u32),
    pub r2: f64,
    pub points: usize,
    pub method: FitMethod,
}

pub const MIN_FIT_POINTS: usize = 10;

/// `q_rel = 1 - 1/s`.
pub fn q_rel_from_slope(s: f64) -> Result<f64> {
    if !(s < 0.0) {
        return Err(Error::NoDecay(s));
    }
    Ok(1.0 - 1.0 / s)
}

/// Asymptotic fit: least squares of `ln Omega` on `ln tau` over lags above the
/// noise floor, `q_rel = 1 - 1/s`, `tau_q = (q-1) exp(-c/s)` from intercept `c`.
pub fn fit_qrel(curve: &DecayCurve) -> Result<QRelFit> {
    let (lags, values) = curve.qualifying();
    if lags.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientLags {
            needed: MIN_FIT_POINTS,
            got: lags.len(),
        });
    }
    let lx: Vec<f64> = lags.iter().map(|&l| (l as f64).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = stats::ols(&lx, &ly).ok_or(Error::InsufficientLags {
        needed: MIN_FIT_POINTS,
        got: lags.len(),
    })?;
    let s = fit.slope;
    let q_rel = q_rel_from_slope(s)?;
    Ok(QRelFit {
        q_rel,
        tau_q: (q_rel - 1.0) * (-fit.intercept / s).exp(),
        slope: s,
        stderr_qrel: (fit.slope_se / (s * s)).abs(),
        fit_range: (lags[0], *lags.last().unwrap()),
        r2: fit.r2,
        points: lags.len(),
        method: FitMethod::Asymptotic,
    })
}

const DIRECT_Q_MAX: f64 = 20.0;

/// Sum of squared residuals of `A e_q(-t/tau0)` with `A` at its least-squares
/// optimum.
fn direct_sse(t: &[f64], y: &[f64], q: f64, tau0: f64) -> (f64, f64) {
    let g: Vec<f64> = t
        .iter()
        .map(|&ti| match q_exponential(-ti / tau0, q) {
            QExp::Value(v) => v,
            QExp::Overflow => f64::INFINITY,
        })
        .collect();
    let gg: f64 = g.iter().map(|v| v * v).sum();
    if !(gg > 0.0) || !gg.is_finite() {
        return (f64::INFINITY, 0.0);
    }
    let a = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum::<f64>() / gg;
    let sse = g.iter().zip(y).map(|(gi, yi)| (yi - a * gi).powi(2)).sum();
    (sse, a)
}

fn golden_min(lo: f64, hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// The three-parameter direct fit needs fewer lags than the log-log slope.
pub const DIRECT_MIN_POINTS: usize = 5;

/// First unbroken run of qualifying lags; isolated noise excursions further
/// out are ignored.
fn leading_run(curve: &DecayCurve) -> (Vec<u32>, Vec<f64>) {
    let (all, _) = curve.qualifying();
    let Some(&first) = all.first() else {
        return (Vec::new(), Vec::new());
    };
    let start = curve.lags.iter().position(|&l| l == first).unwrap_or(0);
    let mut lags = Vec::new();
    let mut vals = Vec::new();
    for (i, &l) in curve.lags.iter().enumerate().skip(start) {
        if all.binary_search(&l).is_err() {
            break;
        }
        lags.push(l);
        vals.push(curve.values[i]);
    }
    (lags, vals)
}

/// Direct nonlinear least squares of `A e_q(-tau/tau0)` over the leading run
/// of qualifying lags. `q` is scanned on `[1, 20]` and refined; `tau0` is profiled by golden
/// section in log space. The error of `q` comes from the curvature of the
/// profile objective.
pub fn fit_qrel_direct(curve: &DecayCurve) -> Result<QRelFit> {
    let (lags, y) = leading_run(curve);
    if lags.len() < DIRECT_MIN_POINTS {
        return Err(Error::InsufficientLags {
            needed: DIRECT_MIN_POINTS,
            got: lags.len(),
        });
    }
    let t: Vec<f64> = lags.iter().map(|&l| l as f64).collect();
    let (lo, hi) = ((t[0] / 100.0).ln(), (t[t.len() - 1] * 100.0).ln());
    let profile = |q: f64| -> (f64, f64) {
        let (lt, sse) = golden_min(lo, hi, 80, |lt| direct_sse(&t, &y, q, lt.exp()).0);
        (sse, lt.exp())
    };
    let grid: Vec<f64> = (0..=((DIRECT_Q_MAX - 1.0) / 0.05).round() as usize)
        .map(|i| 1.0 + 0.05 * i as f64)
        .collect();
    let sses: Vec<f64> = grid.par_iter().map(|&q| profile(q).0).collect();
    let best = (0..grid.len()).min_by(|&a, &b| sses[a].total_cmp(&sses[b])).unwrap();
    let (qa, qb) = (
        (grid[best] - 0.05).max(1.0),
        (grid[best] + 0.05).min(DIRECT_Q_MAX),
    );
    let (mut q, mut sse) = golden_min(qa, qb, 60, |q| profile(q).0);
    if sses[best] < sse {
        q = grid[best];
        sse = sses[best];
    }
    let (_, tau0) = profile(q);
    let n = t.len() as f64;
    let sigma2 = sse / (n - 3.0);
    let h = 1e-3;
    let curv = if q - h >= 1.0 {
        (profile(q + h).0 - 2.0 * sse + profile(q - h).0) / (h * h)
    } else {
        (profile(q + 2.0 * h).0 - 2.0 * profile(q + h).0 + sse) / (h * h)
    };
    let stderr = if curv > 0.0 { (2.0 * sigma2 / curv).sqrt() } else { 0.0 };
    let ym = stats::mean(&y);
    let sst: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let slope = if q > 1.0 { 1.0 / (1.0 - q) } else { f64::NEG_INFINITY };
    Ok(QRelFit {
        q_rel: q,
        tau_q: tau0,
        slope,
        stderr_qrel: stderr,
        fit_range: (lags[0], *lags.last().unwrap()),
        r2,
        points: lags.len(),
        method: FitMethod::Direct,
    })
}
