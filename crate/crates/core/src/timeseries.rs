//! Daily close-price series: CSV ingest, returns, log prices, period
//! segmentation and Gaussian surrogates.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::rng_from_seed;
use crate::stats;

/// Ordered trading-day closes of one market.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    market_label: String,
}

impl PriceSeries {
    /// Builds a series, sorting by date. Fails on duplicates, non-positive
    /// closes or fewer than two records.
    pub fn new(market_label: impl Into<String>, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::InvalidParameter("dates and closes differ in length".into()));
        }
        if dates.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (i, &c) in closes.iter().enumerate() {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::NonPositiveClose { line: i + 1, value: c });
            }
        }
        let mut pairs: Vec<(NaiveDate, f64)> = dates.into_iter().zip(closes).collect();
        if pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
            pairs.sort_by_key(|p| p.0);
        }
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate(w[0].0));
        }
        if pairs.len() < 2 {
            return Err(Error::TooShort { needed: 2, got: pairs.len() });
        }
        let (dates, closes) = pairs.into_iter().unzip();
        Ok(Self {
            dates,
            closes,
            market_label: market_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn market_label(&self) -> &str {
        &self.market_label
    }

    /// Sub-series over an inclusive index range.
    pub fn slice(&self, first: usize, last: usize) -> Result<PriceSeries> {
        if first > last || last >= self.len() {
            return Err(Error::InvalidParameter(format!("index range {first}..={last} out of bounds")));
        }
        PriceSeries::new(
            self.market_label.clone(),
            self.dates[first..=last].to_vec(),
            self.closes[first..=last].to_vec(),
        )
    }

    /// CSV text in the input schema (`date,close` header, ISO dates).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        out.push_str("date,close\n");
        for (d, c) in self.dates.iter().zip(&self.closes) {
            let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), c);
        }
        out
    }
}

/// Simple returns `r_t = (P_t - P_{t-1}) / P_{t-1}`, dated by the later price.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn parse_price_csv(text: &str, market_label: &str) -> Result<PriceSeries> {
    let mut dates = Vec::new();
    let mut closes = Vec::new();
    let mut seen_record = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(d), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "expected exactly two comma-separated fields".into(),
            });
        };
        if !seen_record && d.eq_ignore_ascii_case("date") {
            seen_record = true;
            continue;
        }
        seen_record = true;
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: format!("bad date '{d}': {e}"),
        })?;
        let close: f64 = c
            .replace('\u{2212}', "-")
            .parse()
            .map_err(|e| Error::MalformedRecord {
                line: line_no,
                reason: format!("bad close '{c}': {e}"),
            })?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(Error::NonPositiveClose { line: line_no, value: close });
        }
        dates.push(date);
        closes.push(close);
    }
    if dates.is_empty() {
        return Err(Error::EmptySeries);
    }
    PriceSeries::new(market_label, dates, closes)
}

pub fn load_price_csv(path: impl AsRef<Path>, market_label: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_price_csv(&text, market_label)
}

pub fn write_price_csv(series: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, series.to_csv_string()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn percent_returns(p: &PriceSeries) -> ReturnSeries {
    ReturnSeries {
        dates: p.dates[1..].to_vec(),
        values: p.closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect(),
    }
}

/// Log returns `ln(P_t / P_{t-1})`; available as an alternative input.
pub fn log_returns(p: &PriceSeries) -> ReturnSeries {
    ReturnSeries {
        dates: p.dates[1..].to_vec(),
        values: p.closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
    }
}

pub fn log_prices(p: &PriceSeries) -> Vec<f64> {
    p.closes.iter().map(|c| c.ln()).collect()
}

/// Log-price path generated by a return sequence from a starting log price:
/// `x_0 = start`, `x_t = x_{t-1} + ln(1 + r_t)`.
pub fn log_path_from_returns(returns: &[f64], start: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut x = start;
    out.push(x);
    for (index, &r) in returns.iter().enumerate() {
        if !(r > -1.0) {
            return Err(Error::InvalidReturn { index, value: r });
        }
        x += r.ln_1p();
        out.push(x);
    }
    Ok(out)
}

/// A named, date-bounded analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_note: Option<String>,
    /// Trading-day count published alongside the period, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_days: Option<usize>,
}

/// A period resolved to an inclusive index range of its parent series.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentView {
    pub period: PeriodSpec,
    pub first_index: usize,
    pub last_index: usize,
    pub n_days: usize,
}

impl SegmentView {
    pub fn prices(&self, series: &PriceSeries) -> PriceSeries {
        // Indices come from `segment`, so the slice is always valid.
        series
            .slice(self.first_index, self.last_index)
            .expect("segment indices lie within the parent series")
    }

    /// Returns inside the segment (`n_days - 1` values).
    pub fn returns(&self, series: &PriceSeries) -> ReturnSeries {
        let c = &series.closes[self.first_index..=self.last_index];
        ReturnSeries {
            dates: series.dates[self.first_index + 1..=self.last_index].to_vec(),
            values: c.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub views: Vec<SegmentView>,
    /// Clipping and index-gap notices.
    pub warnings: Vec<String>,
}

/// Resolves ordered, non-overlapping period specs to index ranges. A start
/// date that is not a trading day rounds forward, an end date rounds back.
pub fn segment(p: &PriceSeries, specs: &[PeriodSpec]) -> Result<Segmentation> {
    let mut warnings = Vec::new();
    for s in specs {
        if s.start > s.end {
            return Err(Error::InvalidParameter(format!("period '{}' ends before it starts", s.label)));
        }
    }
    for w in specs.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::OverlappingPeriods {
                first: w[0].label.clone(),
                second: w[1].label.clone(),
            });
        }
    }
    let first_date = p.dates[0];
    let last_date = *p.dates.last().unwrap();
    let mut views: Vec<SegmentView> = Vec::with_capacity(specs.len());
    for s in specs {
        if s.start < first_date {
            warnings.push(format!(
                "period '{}' starts {} before the data ({}); clipped",
                s.label, s.start, first_date
            ));
        }
        if s.end > last_date {
            warnings.push(format!(
                "period '{}' ends {} after the data ({}); clipped",
                s.label, s.end, last_date
            ));
        }
        let first = p.dates.partition_point(|d| *d < s.start);
        let after = p.dates.partition_point(|d| *d <= s.end);
        if after == 0 || first >= after {
            return Err(Error::EmptySegment(s.label.clone()));
        }
        let last = after - 1;
        if let Some(prev) = views.last() {
            if first != prev.last_index + 1 {
                warnings.push(format!(
                    "{} trading day(s) between '{}' and '{}' belong to no period",
                    first - prev.last_index - 1,
                    prev.period.label,
                    s.label
                ));
            }
        }
        let n_days = last - first + 1;
        if let Some(reported) = s.reported_days {
            if reported != n_days {
                warnings.push(format!(
                    "period '{}' resolves to {} trading days; {} published",
                    s.label, n_days, reported
                ));
            }
        }
        views.push(SegmentView {
            period: s.clone(),
            first_index: first,
            last_index: last,
            n_days,
        });
    }
    Ok(Segmentation { views, warnings })
}

/// Independent normal draws matching the template's sample mean and sample
/// standard deviation, of identical length.
pub fn gaussian_surrogate(template: &[f64], seed: u64) -> Result<Vec<f64>> {
    if template.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: template.len(),
        });
    }
    let mean = stats::mean(template);
    let sd = stats::sample_std(template);
    if !(sd > 1e-12 * mean.abs()) {
        return Err(Error::ZeroVariance("surrogate template"));
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..template.len()).map(|_| normal.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn weekdays(start: &str, n: usize) -> Vec<NaiveDate> {
        crate::synthgen::weekday_dates(d(start), n)
    }

    fn series(closes: &[f64]) -> PriceSeries {
        PriceSeries::new("T", weekdays("2020-01-01", closes.len()), closes.to_vec()).unwrap()
    }

    #[test]
    fn minimal_csv() {
        let p = parse_price_csv("2020-01-02,100.0\n2020-01-03,101.0\n", "X").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.closes(), &[100.0, 101.0]);
    }

    #[test]
    fn header_and_sorting() {
        let p = parse_price_csv("date,close\n2020-01-03,2\n2020-01-02,1\n", "X").unwrap();
        assert_eq!(p.dates()[0], d("2020-01-02"));
        assert_eq!(p.closes(), &[1.0, 2.0]);
    }

    #[test]
    fn negative_close_rejected() {
        let e = parse_price_csv("2020-01-02,1\n2020-01-03,\u{2212}5\n", "X").unwrap_err();
        assert!(matches!(e, Error::NonPositiveClose { line: 2, .. }), "{e}");
        let e = parse_price_csv("2020-01-02,1\n2020-01-03,-5\n", "X").unwrap_err();
        assert!(matches!(e, Error::NonPositiveClose { line: 2, .. }));
    }

    #[test]
    fn malformed_line_reported() {
        let e = parse_price_csv("2020-01-02,1\n2020-01-03;4\n", "X").unwrap_err();
        assert!(matches!(e, Error::MalformedRecord { line: 2, .. }));
        let e = parse_price_csv("2020-01-02,1\n2020-13-03,4\n", "X").unwrap_err();
        assert!(matches!(e, Error::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn duplicate_and_empty() {
        assert!(matches!(
            parse_price_csv("2020-01-02,1\n2020-01-02,2\n", "X"),
            Err(Error::DuplicateDate(_))
        ));
        assert!(matches!(parse_price_csv("", "X"), Err(Error::EmptySeries)));
        assert!(matches!(parse_price_csv("date,close\n", "X"), Err(Error::EmptySeries)));
    }

    #[test]
    fn returns_examples() {
        assert_eq!(percent_returns(&series(&[100.0, 110.0])).values.len(), 1);
        assert!((percent_returns(&series(&[100.0, 110.0])).values[0] - 0.10).abs() < 1e-15);
        assert_eq!(percent_returns(&series(&[50.0, 50.0, 50.0])).values, vec![0.0, 0.0]);
        let r = percent_returns(&series(&[100.0, 80.0, 100.0])).values;
        assert!((r[0] + 0.20).abs() < 1e-15 && (r[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn log_price_examples() {
        let e = std::f64::consts::E;
        let lp = log_prices(&series(&[1.0, e, e * e]));
        assert!(lp[0].abs() < 1e-15 && (lp[1] - 1.0).abs() < 1e-15 && (lp[2] - 2.0).abs() < 1e-15);
        let lp = log_prices(&series(&[2.0, 4.0]));
        let ln2 = std::f64::consts::LN_2;
        assert!((lp[0] - ln2).abs() < 1e-15 && (lp[1] - 2.0 * ln2).abs() < 1e-15);
    }

    fn spec(label: &str, s: &str, e: &str) -> PeriodSpec {
        PeriodSpec {
            label: label.into(),
            start: d(s),
            end: d(e),
            event_note: None,
            reported_days: None,
        }
    }

    #[test]
    fn whole_series_is_one_view() {
        let p = series(&[1.0; 30]);
        let seg = segment(&p, &[spec("all", "2019-01-01", "2021-01-01")]).unwrap();
        assert_eq!(seg.views.len(), 1);
        assert_eq!(seg.views[0].n_days, 30);
        assert_eq!(seg.warnings.len(), 2, "{:?}", seg.warnings);
    }

    #[test]
    fn weekend_boundaries_round_inward() {
        // 2020-01-01 is a Wednesday; weekdays only.
        let p = series(&[1.0; 20]);
        let seg = segment(
            &p,
            &[spec("a", "2020-01-01", "2020-01-05"), spec("b", "2020-01-06", "2020-01-28")],
        )
        .unwrap();
        let (a, b) = (&seg.views[0], &seg.views[1]);
        assert_eq!((a.first_index, a.last_index, a.n_days), (0, 2, 3));
        assert_eq!(b.first_index, a.last_index + 1);
        assert!(seg.warnings.is_empty());
    }

    #[test]
    fn overlap_and_empty_rejected() {
        let p = series(&[1.0; 20]);
        assert!(matches!(
            segment(&p, &[spec("a", "2020-01-01", "2020-01-10"), spec("b", "2020-01-10", "2020-01-20")]),
            Err(Error::OverlappingPeriods { .. })
        ));
        assert!(matches!(
            segment(&p, &[spec("sat", "2020-01-04", "2020-01-05")]),
            Err(Error::EmptySegment(_))
        ));
    }

    #[test]
    fn surrogate_basics() {
        let template: Vec<f64> = (0..1132).map(|i| ((i * 37) % 11) as f64 * 0.001 - 0.005).collect();
        let a = gaussian_surrogate(&template, 3).unwrap();
        let b = gaussian_surrogate(&template, 3).unwrap();
        assert_eq!(a.len(), 1132);
        assert_eq!(a, b);
        assert_ne!(a, gaussian_surrogate(&template, 4).unwrap());
        assert!(matches!(gaussian_surrogate(&[0.01; 10], 1), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn surrogate_moments_follow_sampling_theory() {
        // Template with mean exactly 0 and sample std exactly 0.01.
        let n = 100_000;
        let s = 0.01 * ((n - 1) as f64 / n as f64).sqrt();
        let template: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { s } else { -s }).collect();
        assert!((stats::sample_std(&template) - 0.01).abs() < 1e-12);
        let x = gaussian_surrogate(&template, 11).unwrap();
        let m = stats::mean(&x);
        assert!(m.abs() <= 3.0 * 0.01 / (n as f64).sqrt(), "mean {m}");
        assert!((stats::sample_std(&x) / 0.01 - 1.0).abs() <= 0.02);
    }

    #[test]
    fn log_path_rejects_total_loss() {
        assert!(log_path_from_returns(&[0.1, -1.0], 0.0).is_err());
        let path = log_path_from_returns(&[0.1], 2.0).unwrap();
        assert!((path[1] - 2.0 - 1.1f64.ln()).abs() < 1e-15);
    }
}
