//! Multifractal spectrum of a period's activity measure by direct
//! (Chhabra-Jensen) estimation, its zero-crossing endpoints, and `q_sen`.
//!
//! For each moment order `m` and dyadic box size `l` (normalized `eps = l/N`)
//! the box probabilities `P_i` define weights `nu_i = P_i^m / sum_j P_j^m`.
//! Then `alpha(m)` and `f(m)` are the slopes of `sum nu_i ln P_i` and
//! `sum nu_i ln nu_i` against `ln eps`. Empty boxes are skipped.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const MIN_MEASURE_LEN: usize = 256;
pub const MIN_SCALES: usize = 5;
const F_TOLERANCE: f64 = 0.05;

/// `|r_t| / sum |r_k|` over the leading `2^k` returns, `2^k <= len`. No
/// length floor; see [`activity_measure`].
pub fn normalized_magnitudes(returns: &[f64]) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let n = 1usize << (usize::BITS - 1 - returns.len().leading_zeros());
    let head = &returns[..n];
    let total: f64 = head.iter().map(|r| r.abs()).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMeasure);
    }
    Ok(head.iter().map(|r| r.abs() / total).collect())
}

/// Activity measure of a return segment of at least 256 values.
pub fn activity_measure(returns: &[f64]) -> Result<Vec<f64>> {
    if returns.len() < MIN_MEASURE_LEN {
        return Err(Error::TooShort {
            needed: MIN_MEASURE_LEN,
            got: returns.len(),
        });
    }
    normalized_magnitudes(returns)
}

/// Default moment grid `m = -10, -9.5, ..., 10`.
pub fn default_moment_grid() -> Vec<f64> {
    (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect()
}

/// Dyadic box sizes from 2 points up to `len / 8`.
pub fn default_scales(len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 2;
    while s <= len / 8 {
        out.push(s);
        s *= 2;
    }
    out
}

/// Central-spectrum reliability check: every order with `|m| <= max_order`
/// needs both regressions at `R^2 >= r2_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionGate {
    pub r2_min: f64,
    pub max_order: f64,
}

impl Default for RegressionGate {
    fn default() -> Self {
        RegressionGate { r2_min: 0.9, max_order: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Endpoints {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub delta_alpha: f64,
    /// The branch fell back to its extreme computed alpha.
    pub min_fallback: bool,
    pub max_fallback: bool,
    pub se_alpha_min: f64,
    pub se_alpha_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfSpectrum {
    pub moment_grid: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f_alpha: Vec<f64>,
    /// Regression R^2 of alpha and f per moment order.
    pub r2_alpha: Vec<f64>,
    pub r2_f: Vec<f64>,
    pub se_alpha: Vec<f64>,
    pub scales: Vec<usize>,
    pub endpoints: Option<Endpoints>,
    /// `None` when the spectrum is degenerate (`alpha_min == alpha_max`).
    pub q_sen: Option<f64>,
    pub stderr_qsen: f64,
    /// Any computed `f` exceeds 1 + 0.05.
    pub f_exceeds_unity: bool,
}

impl MfSpectrum {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("m\talpha\tf\tr2_alpha\tr2_f\n");
        for i in 0..self.moment_grid.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                self.moment_grid[i], self.alpha[i], self.f_alpha[i], self.r2_alpha[i], self.r2_f[i]
            );
        }
        out
    }
}

struct MomentFit {
    alpha: f64,
    f: f64,
    r2_alpha: f64,
    r2_f: f64,
    se_alpha: f64,
}

/// Direct spectrum estimate; endpoints and `q_sen` are left empty (see
/// [`spectrum_endpoints`] and [`analyze_measure`]).
pub fn chhabra_jensen_spectrum(mu: &[f64], moment_grid: &[f64], scales: &[usize]) -> Result<MfSpectrum> {
    chhabra_jensen_spectrum_gated(mu, moment_grid, scales, &RegressionGate::default())
}

pub fn chhabra_jensen_spectrum_gated(
    mu: &[f64],
    moment_grid: &[f64],
    scales: &[usize],
    gate: &RegressionGate,
) -> Result<MfSpectrum> {
    let n = mu.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("measure length must be a power of two, got {n}")));
    }
    let mut usable: Vec<usize> = scales
        .iter()
        .copied()
        .filter(|&s| s >= 1 && s.is_power_of_two() && n / s >= 2)
        .collect();
    usable.sort_unstable();
    usable.dedup();
    if usable.len() < MIN_SCALES {
        return Err(Error::TooFewScales {
            needed: MIN_SCALES,
            got: usable.len(),
        });
    }
    // Log box probabilities per scale, empty boxes dropped.
    let log_boxes: Vec<Vec<f64>> = usable
        .iter()
        .map(|&s| {
            mu.chunks(s)
                .map(|c| c.iter().sum::<f64>())
                .filter(|&p| p > 0.0)
                .map(f64::ln)
                .collect()
        })
        .collect();
    let log_eps: Vec<f64> = usable.iter().map(|&s| (s as f64 / n as f64).ln()).collect();

    let fits: Vec<MomentFit> = moment_grid
        .par_iter()
        .map(|&m| {
            let mut ya = Vec::with_capacity(usable.len());
            let mut yf = Vec::with_capacity(usable.len());
            for lp in &log_boxes {
                let top = lp.iter().map(|v| m * v).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = lp.iter().map(|v| (m * v - top).exp()).collect();
                let z: f64 = w.iter().sum();
                let ln_z = z.ln();
                let mut sa = 0.0;
                let mut sf = 0.0;
                for (wi, v) in w.iter().zip(lp) {
                    let nu = wi / z;
                    if nu > 0.0 {
                        sa += nu * v;
                        sf += nu * (m * v - top - ln_z);
                    }
                }
                ya.push(sa);
                yf.push(sf);
            }
            let fa = stats::ols(&log_eps, &ya).expect("distinct scales");
            let ff = stats::ols(&log_eps, &yf).expect("distinct scales");
            MomentFit {
                alpha: fa.slope,
                f: ff.slope,
                r2_alpha: fa.r2,
                r2_f: ff.r2,
                se_alpha: fa.slope_se,
            }
        })
        .collect();

    for (&m, fit) in moment_grid.iter().zip(&fits) {
        if m.abs() <= gate.max_order && (fit.r2_alpha < gate.r2_min || fit.r2_f < gate.r2_min) {
            return Err(Error::PoorSpectrumRegression {
                order: m,
                r2: fit.r2_alpha.min(fit.r2_f),
            });
        }
    }
    let f_alpha: Vec<f64> = fits.iter().map(|f| f.f).collect();
    Ok(MfSpectrum {
        moment_grid: moment_grid.to_vec(),
        alpha: fits.iter().map(|f| f.alpha).collect(),
        f_exceeds_unity: f_alpha.iter().any(|&f| f > 1.0 + F_TOLERANCE),
        f_alpha,
        r2_alpha: fits.iter().map(|f| f.r2_alpha).collect(),
        r2_f: fits.iter().map(|f| f.r2_f).collect(),
        se_alpha: fits.iter().map(|f| f.se_alpha).collect(),
        scales: usable,
        endpoints: None,
        q_sen: None,
        stderr_qsen: 0.0,
    })
}

/// Zero crossing of one branch. `idx` runs from the spectrum maximum outward.
fn branch_zero(alpha: &[f64], f: &[f64], idx: &[usize]) -> (f64, bool) {
    let outer = ((idx.len() as f64 * 0.3).ceil() as usize).clamp(3, idx.len());
    let tail = &idx[idx.len() - outer..];
    let a: Vec<f64> = tail.iter().map(|&i| alpha[i]).collect();
    let y: Vec<f64> = tail.iter().map(|&i| f[i]).collect();
    let a_end = *a.last().unwrap();
    let root = stats::quadratic_fit(&a, &y)
        .and_then(|c| stats::quadratic_roots(c[2], c[1], c[0]))
        .map(|(r1, r2)| if (r1 - a_end).abs() <= (r2 - a_end).abs() { r1 } else { r2 })
        .filter(|r| r.is_finite() && (r - a_end).abs() <= 0.5);
    match root {
        Some(r) => (r, false),
        None => (a_end, true),
    }
}

/// Endpoints `alpha_min`, `alpha_max` where `f` extrapolates to zero: a
/// quadratic is fitted to the outer 30% of each branch and its real root
/// nearest the data is taken, falling back to the extreme computed alpha.
pub fn spectrum_endpoints(s: &MfSpectrum) -> Result<Endpoints> {
    let n = s.alpha.len();
    if n < 3 {
        return Err(Error::SingleBranch);
    }
    let peak = (0..n)
        .max_by(|&a, &b| s.f_alpha[a].total_cmp(&s.f_alpha[b]))
        .expect("non-empty");
    // Order both branches from the peak outward in alpha.
    let mut lower: Vec<usize> = (0..n).filter(|&i| s.alpha[i] < s.alpha[peak]).collect();
    let mut upper: Vec<usize> = (0..n).filter(|&i| s.alpha[i] > s.alpha[peak]).collect();
    if lower.len() < 3 || upper.len() < 3 {
        return Err(Error::SingleBranch);
    }
    lower.sort_by(|&a, &b| s.alpha[b].total_cmp(&s.alpha[a]));
    upper.sort_by(|&a, &b| s.alpha[a].total_cmp(&s.alpha[b]));
    let (alpha_min, min_fallback) = branch_zero(&s.alpha, &s.f_alpha, &lower);
    let (alpha_max, max_fallback) = branch_zero(&s.alpha, &s.f_alpha, &upper);
    Ok(Endpoints {
        alpha_min,
        alpha_max,
        delta_alpha: alpha_max - alpha_min,
        min_fallback,
        max_fallback,
        se_alpha_min: s.se_alpha[*lower.last().unwrap()],
        se_alpha_max: s.se_alpha[*upper.last().unwrap()],
    })
}

/// `q_sen` from `1/(1 - q_sen) = 1/alpha_min - 1/alpha_max`. Equal endpoints
/// (a monofractal) give `Ok(None)`.
pub fn q_sen_from_endpoints(alpha_min: f64, alpha_max: f64) -> Result<Option<f64>> {
    if !(alpha_min > 0.0) || !(alpha_max > 0.0) || alpha_min > alpha_max {
        return Err(Error::NonPositiveEndpoints { alpha_min, alpha_max });
    }
    let g = 1.0 / alpha_min - 1.0 / alpha_max;
    if !(g.abs() > 1e-12) {
        return Ok(None);
    }
    Ok(Some(1.0 - 1.0 / g))
}

/// First-order error of `q_sen` from the endpoint errors.
pub fn q_sen_stderr(e: &Endpoints) -> f64 {
    let g = 1.0 / e.alpha_min - 1.0 / e.alpha_max;
    let da = e.se_alpha_min / e.alpha_min.powi(2);
    let db = e.se_alpha_max / e.alpha_max.powi(2);
    (da * da + db * db).sqrt() / (g * g)
}

/// Spectrum, endpoints and `q_sen` of a measure in one call.
pub fn analyze_measure(mu: &[f64], moment_grid: &[f64], scales: &[usize]) -> Result<MfSpectrum> {
    analyze_measure_gated(mu, moment_grid, scales, &RegressionGate::default())
}

pub fn analyze_measure_gated(mu: &[f64], moment_grid: &[f64], scales: &[usize], gate: &RegressionGate) -> Result<MfSpectrum> {
    let mut s = chhabra_jensen_spectrum_gated(mu, moment_grid, scales, gate)?;
    let e = spectrum_endpoints(&s)?;
    // A spectrum can extrapolate only on the positive alpha axis.
    let q = q_sen_from_endpoints(e.alpha_min, e.alpha_max)?;
    s.stderr_qsen = if q.is_some() { q_sen_stderr(&e) } else { 0.0 };
    s.q_sen = q;
    s.endpoints = Some(e);
    Ok(s)
}

/// Spectrum of a return segment with the default grid and scales.
pub fn analyze_returns(returns: &[f64]) -> Result<MfSpectrum> {
    let mu = activity_measure(returns)?;
    analyze_measure(&mu, &default_moment_grid(), &default_scales(mu.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{binomial_cascade, CascadeSpec};

    #[test]
    fn magnitudes_truncate_then_normalize() {
        let mu = normalized_magnitudes(&[0.1, -0.1, 0.2]).unwrap();
        assert_eq!(mu.len(), 2);
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
        assert!(matches!(normalized_magnitudes(&[0.0; 8]), Err(Error::ZeroMeasure)));
    }

    #[test]
    fn activity_measure_contract() {
        let r: Vec<f64> = (0..300).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mu = activity_measure(&r).unwrap();
        assert_eq!(mu.len(), 256);
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let flat = activity_measure(&[-0.01; 256]).unwrap();
        assert!(flat.iter().all(|&v| (v - 1.0 / 256.0).abs() < 1e-15));
        assert!(activity_measure(&r[..200]).is_err());
    }

    #[test]
    fn gate_is_configurable() {
        let mu = activity_measure(&crate::synthgen::standard_normal(2048, 5)).unwrap();
        let (grid, scales) = (default_moment_grid(), default_scales(mu.len()));
        assert!(matches!(
            chhabra_jensen_spectrum(&mu, &grid, &scales),
            Err(Error::PoorSpectrumRegression { .. })
        ));
        let loose = RegressionGate { r2_min: 0.0, max_order: 2.0 };
        let s = chhabra_jensen_spectrum_gated(&mu, &grid, &scales, &loose).unwrap();
        assert!(s.r2_f.iter().any(|&r| r < 0.9));
    }

    #[test]
    fn uniform_measure_is_monofractal() {
        let mu = vec![1.0 / 4096.0; 4096];
        let s = chhabra_jensen_spectrum(&mu, &default_moment_grid(), &default_scales(4096)).unwrap();
        for i in 0..s.alpha.len() {
            assert!((s.alpha[i] - 1.0).abs() <= 0.02 && (s.f_alpha[i] - 1.0).abs() <= 0.02);
        }
        // Degenerate spectrum: the extrema coincide, so no branches exist.
        assert!(matches!(spectrum_endpoints(&s), Err(Error::SingleBranch)));
    }

    #[test]
    fn cascade_alpha_matches_analytic() {
        let spec = CascadeSpec::new(0.6, 15).unwrap();
        let mu = binomial_cascade(spec, Some(1));
        let grid = default_moment_grid();
        let s = chhabra_jensen_spectrum(&mu, &grid, &default_scales(mu.len())).unwrap();
        for (i, &m) in grid.iter().enumerate() {
            assert!((s.alpha[i] - spec.alpha_at(m)).abs() < 1e-9, "m={m}: {} vs {}", s.alpha[i], spec.alpha_at(m));
            assert!((s.f_alpha[i] - spec.f_at(m)).abs() < 1e-9, "m={m}: {} vs {}", s.f_alpha[i], spec.f_at(m));
        }
        let at = |m: f64| s.alpha[grid.iter().position(|&g| g == m).unwrap()];
        assert!((at(1.0) - 0.9710).abs() <= 0.03);
        assert!((at(10.0) - 0.745).abs() <= 0.05);
        assert!((at(-10.0) - 1.310).abs() <= 0.05);
        assert!(s.alpha.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn parabola_endpoints() {
        let alpha: Vec<f64> = (0..=400).map(|i| 0.61 + 0.78 * i as f64 / 400.0).collect();
        let f: Vec<f64> = alpha.iter().map(|a| 1.0 - ((a - 1.0) / 0.4).powi(2)).collect();
        let n = alpha.len();
        let s = MfSpectrum {
            moment_grid: (0..n).map(|i| -(i as f64)).collect(),
            alpha,
            f_alpha: f,
            r2_alpha: vec![1.0; n],
            r2_f: vec![1.0; n],
            se_alpha: vec![0.0; n],
            scales: vec![],
            endpoints: None,
            q_sen: None,
            stderr_qsen: 0.0,
            f_exceeds_unity: false,
        };
        let e = spectrum_endpoints(&s).unwrap();
        assert!((e.alpha_min - 0.6).abs() < 1e-3 && (e.alpha_max - 1.4).abs() < 1e-3, "{e:?}");
        assert!(!e.min_fallback && !e.max_fallback);
    }

    #[test]
    fn q_sen_examples() {
        let q = q_sen_from_endpoints(0.737, 1.3219).unwrap().unwrap();
        assert!((1.0 / (1.0 - q) - 0.6005).abs() < 5e-4);
        assert!((q + 0.6653).abs() < 1e-3, "{q}");
        assert_eq!(q_sen_from_endpoints(0.9, 0.9).unwrap(), None);
        assert!(q_sen_from_endpoints(0.0, 1.0).is_err());
        assert!(q_sen_from_endpoints(-0.2, 1.0).is_err());
    }

    #[test]
    fn too_few_scales() {
        let mu = vec![1.0 / 64.0; 64];
        assert!(matches!(
            chhabra_jensen_spectrum(&mu, &default_moment_grid(), &default_scales(64)),
            Err(Error::TooFewScales { .. })
        ));
    }

    #[test]
    fn qsen_stderr_matches_finite_difference() {
        let e = Endpoints {
            alpha_min: 0.75,
            alpha_max: 1.3,
            delta_alpha: 0.55,
            min_fallback: false,
            max_fallback: false,
            se_alpha_min: 0.01,
            se_alpha_max: 0.02,
        };
        let h = 1e-6;
        let q = |a: f64, b: f64| q_sen_from_endpoints(a, b).unwrap().unwrap();
        let da = (q(0.75 + h, 1.3) - q(0.75 - h, 1.3)) / (2.0 * h);
        let db = (q(0.75, 1.3 + h) - q(0.75, 1.3 - h)) / (2.0 * h);
        let fd = ((da * 0.01).powi(2) + (db * 0.02).powi(2)).sqrt();
        assert!((q_sen_stderr(&e) / fd - 1.0).abs() < 1e-6);
    }
}
