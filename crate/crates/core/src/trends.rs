//! Range-normalized local and long-term trends around crises, and the
//! `(1 - q_sen)^{-1}` versus `W'` / `-B'` correlation scan.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendIndex {
    QStat,
    OneMinusQsen,
    QRel,
    QInv,
    WPrime,
    BPrime,
}

impl TrendIndex {
    pub const ALL: [TrendIndex; 6] = [
        TrendIndex::QStat,
        TrendIndex::OneMinusQsen,
        TrendIndex::QRel,
        TrendIndex::QInv,
        TrendIndex::WPrime,
        TrendIndex::BPrime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrendIndex::QStat => "q_stat",
            TrendIndex::OneMinusQsen => "one_minus_qsen",
            TrendIndex::QRel => "q_rel",
            TrendIndex::QInv => "Q_inv",
            TrendIndex::WPrime => "W_prime",
            TrendIndex::BPrime => "B_prime",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    #[default]
    PeriodIndex,
    CalendarYears,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub index_name: TrendIndex,
    pub local_slopes: Vec<f64>,
    pub longterm_slope: Option<f64>,
    /// Inclusive 0-based period range of the long-term fit.
    pub fit_window: Option<(usize, usize)>,
    pub range_used: f64,
    pub abscissa: Abscissa,
}

fn value_range(values: &[f64]) -> Result<f64> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("trend values must be finite".into()));
    }
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let r = hi - lo;
    if !(r > 0.0) {
        return Err(Error::ZeroRange);
    }
    Ok(r)
}

/// `(x_{i+1} - x_i) / (x_max - x_min)` for each adjacent pair.
pub fn local_trends(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: values.len() });
    }
    let r = value_range(values)?;
    Ok(values.windows(2).map(|w| (w[1] - w[0]) / r).collect())
}

/// Least-squares slope of `values[first..=last]` against the period index (or
/// the supplied abscissa), divided by the range over all periods.
pub fn longterm_trend(values: &[f64], window: (usize, usize), abscissa: Option<&[f64]>) -> Result<f64> {
    let (first, last) = window;
    if last < first || last >= values.len() {
        return Err(Error::InvalidParameter(format!("window {first}..={last} outside {} periods", values.len())));
    }
    let span = last - first + 1;
    if span < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: span });
    }
    let x: Vec<f64> = match abscissa {
        Some(a) if a.len() == values.len() => a[first..=last].to_vec(),
        Some(_) => return Err(Error::InvalidParameter("abscissa length differs from values".into())),
        None => (first..=last).map(|i| i as f64).collect(),
    };
    let r = value_range(values)?;
    let fit = stats::ols(&x, &values[first..=last]).ok_or(Error::ZeroVariance("trend abscissa"))?;
    Ok(fit.slope / r)
}

/// Local slopes plus the optional long-term slope of one index.
pub fn trend_report(
    index: TrendIndex,
    values: &[f64],
    window: Option<(usize, usize)>,
    abscissa: Option<&[f64]>,
) -> Result<TrendReport> {
    let local_slopes = local_trends(values)?;
    let longterm_slope = window.map(|w| longterm_trend(values, w, abscissa)).transpose()?;
    Ok(TrendReport {
        index_name: index,
        local_slopes,
        longterm_slope,
        fit_window: window,
        range_used: value_range(values)?,
        abscissa: if abscissa.is_some() { Abscissa::CalendarYears } else { Abscissa::PeriodIndex },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub market: String,
    pub period: String,
    pub inv_one_minus_qsen: f64,
    pub w_prime: f64,
    pub b_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationScan {
    pub points: Vec<ScanPoint>,
    pub included_mask: Vec<bool>,
    pub pearson_r_w: f64,
    /// Correlation with `-B'`.
    pub pearson_r_b: f64,
    /// Lines `W' = slope x + intercept` and `-B' = slope x + intercept` with
    /// `x = (1 - q_sen)^{-1}`.
    pub fit_slope_w: f64,
    pub fit_intercept_w: f64,
    pub fit_slope_b: f64,
    pub fit_intercept_b: f64,
}

impl CorrelationScan {
    /// Plot rows for `W'` (`negate_b = false`) or `-B'`.
    pub fn to_tsv(&self, negate_b: bool) -> String {
        let head = if negate_b { "minus_B_prime" } else { "W_prime" };
        let mut out = format!("market\tperiod\tinv_one_minus_qsen\t{head}\tincluded\n");
        for (p, inc) in self.points.iter().zip(&self.included_mask) {
            let y = if negate_b { -p.b_prime } else { p.w_prime };
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", p.market, p.period, p.inv_one_minus_qsen, y, inc);
        }
        out
    }
}

pub fn correlation_scan(points: Vec<ScanPoint>, included_mask: Option<Vec<bool>>) -> Result<CorrelationScan> {
    let mask = included_mask.unwrap_or_else(|| vec![true; points.len()]);
    if mask.len() != points.len() {
        return Err(Error::InvalidParameter("mask length differs from points".into()));
    }
    let chosen: Vec<&ScanPoint> = points.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| p).collect();
    if chosen.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: chosen.len() });
    }
    let x: Vec<f64> = chosen.iter().map(|p| p.inv_one_minus_qsen).collect();
    let w: Vec<f64> = chosen.iter().map(|p| p.w_prime).collect();
    let nb: Vec<f64> = chosen.iter().map(|p| -p.b_prime).collect();
    if x.iter().chain(&w).chain(&nb).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("scan values must be finite".into()));
    }
    let r_w = stats::pearson(&x, &w).ok_or(Error::ZeroVariance("correlation axis"))?;
    let r_b = stats::pearson(&x, &nb).ok_or(Error::ZeroVariance("correlation axis"))?;
    let fw = stats::ols(&x, &w).ok_or(Error::ZeroVariance("correlation axis"))?;
    let fb = stats::ols(&x, &nb).ok_or(Error::ZeroVariance("correlation axis"))?;
    Ok(CorrelationScan {
        points,
        included_mask: mask,
        pearson_r_w: r_w,
        pearson_r_b: r_b,
        fit_slope_w: fw.slope,
        fit_intercept_w: fw.intercept,
        fit_slope_b: fb.slope,
        fit_intercept_b: fb.intercept,
    })
}
