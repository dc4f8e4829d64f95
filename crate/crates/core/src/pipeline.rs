//! Per-market analysis: segmentation, per-period estimators, metrics, trends
//! and the report bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ghe::{self, GheConfig, GheSpectrum, NormalizationMode, NormalizedScaling, SurrogateEnsemble};
use crate::metrics::{self, QTriplet, Which};
use crate::multifractal::{self, MfSpectrum, RegressionGate};
use crate::presets::{self, CrisisSpec};
use crate::relaxation::{self, DecayCurve, QRelFit};
use crate::seeds::{derive_seed, stream};
use crate::timeseries::{self, PeriodSpec, PriceSeries, SegmentView};
use crate::trends::{self, CorrelationScan, ScanPoint, TrendIndex, TrendReport};
use crate::tsallis::{self, Histogram, QGaussianFit, QGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_ALL_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    MutualInformation,
    Autocorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationConfig {
    pub observable: Observable,
    /// Defaults to `min(100, n/10)`.
    pub max_lag: Option<usize>,
    /// Defaults to `clamp(floor(n^(1/3)), 8, 32)`.
    pub bins: Option<usize>,
    /// Also report the direct nonlinear fit.
    pub direct_fit: bool,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            observable: Observable::MutualInformation,
            max_lag: None,
            bins: None,
            direct_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub qstat_bins: usize,
    pub qstat_bootstrap: usize,
    pub q_scan: QGrid,
    pub moment_grid: Vec<f64>,
    pub spectrum_gate: RegressionGate,
    pub relaxation: RelaxationConfig,
    pub ghe: GheConfig,
    pub surrogates: usize,
    pub normalization: NormalizationMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            qstat_bins: 101,
            qstat_bootstrap: 100,
            q_scan: QGrid::default(),
            moment_grid: multifractal::default_moment_grid(),
            spectrum_gate: RegressionGate::default(),
            relaxation: RelaxationConfig::default(),
            ghe: GheConfig::default(),
            surrogates: 100,
            normalization: NormalizationMode::Ensemble,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.qstat_bins < 3 || self.qstat_bins.is_multiple_of(2) {
            return bad(format!("qstat_bins must be odd and >= 3, got {}", self.qstat_bins));
        }
        if self.qstat_bootstrap == 1 {
            return bad("qstat_bootstrap must be 0 or >= 2".into());
        }
        let s = &self.q_scan;
        if !(s.step > 0.0) || !(s.lo < s.hi) || s.lo < 1.0 - 1e-12 || s.hi > 3.0 + 1e-12 {
            return bad("q_scan must satisfy 1 <= lo < hi <= 3 and step > 0".into());
        }
        if self.moment_grid.len() < 3 || self.moment_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("moment_grid must be strictly increasing with >= 3 orders".into());
        }
        let sg = &self.spectrum_gate;
        if !(0.0..=1.0).contains(&sg.r2_min) || !(sg.max_order >= 0.0) {
            return bad("spectrum_gate needs r2_min in [0, 1] and max_order >= 0".into());
        }
        if let Some(b) = self.relaxation.bins {
            if b < 4 {
                return bad("relaxation.bins must be >= 4".into());
            }
        }
        if self.relaxation.max_lag == Some(0) {
            return bad("relaxation.max_lag must be positive".into());
        }
        let g = &self.ghe;
        if g.q_grid.is_empty() || g.q_grid.iter().any(|&q| !(q > 0.0)) {
            return bad("ghe.q_grid must hold positive orders".into());
        }
        if g.tau_max_set.is_empty() || g.tau_max_set.iter().any(|&t| t < 2) {
            return bad("ghe.tau_max_set values must be >= 2".into());
        }
        if !(g.w_pair.0 < g.w_pair.1) || !(g.b_range.0 < g.b_range.1) {
            return bad("ghe.w_pair and ghe.b_range must be increasing".into());
        }
        if self.surrogates < ghe::MIN_ENSEMBLE {
            return bad(format!("surrogates must be >= {}", ghe::MIN_ENSEMBLE));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    #[default]
    All,
    /// Leave out each market's configured crisis-adjacent periods.
    Preset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    /// CSV of `date,close`; relative paths resolve against the config file.
    pub input: PathBuf,
    #[serde(default)]
    pub market_label: Option<String>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub periods: Option<Vec<PeriodSpec>>,
    #[serde(default)]
    pub crisis: Option<CrisisSpec>,
    #[serde(default)]
    pub figure6_excluded_periods: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub markets: Vec<MarketConfig>,
    #[serde(default)]
    pub estimators: EstimatorConfig,
    #[serde(default)]
    pub figure6_mask: MaskMode,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: AnalysisConfig = serde_json::from_str(text)?;
        c.estimators.validate()?;
        if c.markets.is_empty() {
            return Err(Error::Config("at least one market is required".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// A market with its periods resolved.
struct ResolvedMarket {
    id: String,
    label: String,
    prices: PriceSeries,
    views: Vec<SegmentView>,
    warnings: Vec<String>,
    crisis: Option<CrisisSpec>,
    excluded: Vec<usize>,
}

fn sanitize(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() {
        "market".into()
    } else {
        s
    }
}

fn resolve_market(m: &MarketConfig, base_dir: &Path) -> Result<ResolvedMarket> {
    let preset = m.preset.as_deref().map(presets::preset).transpose()?;
    let label = m
        .market_label
        .clone()
        .or_else(|| preset.as_ref().map(|p| p.market_label.clone()))
        .ok_or_else(|| Error::Config("market needs market_label or preset".into()))?;
    let periods = m
        .periods
        .clone()
        .or_else(|| preset.as_ref().map(|p| p.periods.clone()))
        .ok_or_else(|| Error::Config(format!("market '{label}' needs periods or a preset")))?;
    if periods.is_empty() {
        return Err(Error::Config(format!("market '{label}' has no periods")));
    }
    let crisis = m.crisis.clone().or_else(|| preset.as_ref().map(|p| p.crisis.clone()));
    if let Some(c) = &crisis {
        c.validate(periods.len())?;
    }
    let excluded = m
        .figure6_excluded_periods
        .clone()
        .or_else(|| preset.as_ref().map(|p| p.figure6_excluded_periods.clone()))
        .unwrap_or_default();
    let path = if m.input.is_absolute() { m.input.clone() } else { base_dir.join(&m.input) };
    let prices = timeseries::load_price_csv(&path, &label)?;
    let seg = timeseries::segment(&prices, &periods)?;
    Ok(ResolvedMarket {
        id: preset.map(|p| p.id).unwrap_or_else(|| sanitize(&label)),
        label,
        prices,
        views: seg.views,
        warnings: seg.warnings,
        crisis,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

/// Everything computed for one period before market-level assembly.
#[derive(Debug, Clone)]
pub struct PeriodAnalysis {
    pub pdf: Option<Histogram>,
    pub qstat: Option<QGaussianFit>,
    pub spectrum: Option<MfSpectrum>,
    pub decay: Option<DecayCurve>,
    pub qrel: Option<QRelFit>,
    pub qrel_direct: Option<QRelFit>,
    pub ghe: Option<GheSpectrum>,
    pub ensemble: Option<SurrogateEnsemble>,
    pub errors: Vec<StageError>,
}

impl PeriodAnalysis {
    fn note<T>(&mut self, stage: &'static str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(StageError { stage, message: e.to_string() });
                None
            }
        }
    }

    fn nothing_computed(&self) -> bool {
        self.qstat.is_none() && self.spectrum.is_none() && self.qrel.is_none() && self.ghe.is_none()
    }
}

/// Runs every estimator on one period. `seed` is the period's own seed; each
/// random stream derives from it.
pub fn analyze_period(prices: &PriceSeries, est: &EstimatorConfig, seed: u64) -> PeriodAnalysis {
    let returns = timeseries::percent_returns(prices).values;
    let log_p = timeseries::log_prices(prices);
    let mut a = PeriodAnalysis {
        pdf: None,
        qstat: None,
        spectrum: None,
        decay: None,
        qrel: None,
        qrel_direct: None,
        ghe: None,
        ensemble: None,
        errors: Vec::new(),
    };

    a.pdf = a.note("q_stat", tsallis::empirical_pdf(&returns, est.qstat_bins));
    if a.pdf.is_some() {
        let fit = tsallis::fit_qgaussian_bootstrap(
            &returns,
            est.qstat_bins,
            &est.q_scan,
            est.qstat_bootstrap,
            derive_seed(seed, &[stream::BOOTSTRAP]),
        );
        a.qstat = a.note("q_stat", fit);
    }

    let spectrum = multifractal::activity_measure(&returns).and_then(|mu| {
        multifractal::analyze_measure_gated(&mu, &est.moment_grid, &multifractal::default_scales(mu.len()), &est.spectrum_gate)
    });
    a.spectrum = a.note("q_sen", spectrum);

    let n = returns.len();
    let max_lag = est.relaxation.max_lag.unwrap_or_else(|| relaxation::default_max_lag(n));
    let curve = match est.relaxation.observable {
        Observable::MutualInformation => {
            relaxation::mutual_information(&returns, max_lag, est.relaxation.bins.unwrap_or_else(|| relaxation::default_bins(n)))
        }
        Observable::Autocorrelation => relaxation::autocorrelation(&returns, max_lag),
    };
    a.decay = a.note("q_rel", curve);
    if let Some(c) = a.decay.clone() {
        a.qrel = a.note("q_rel", relaxation::fit_qrel(&c));
        if est.relaxation.direct_fit {
            a.qrel_direct = a.note("q_rel_direct", relaxation::fit_qrel_direct(&c));
        }
    }

    a.ghe = a.note("ghe", ghe::ghe_spectrum(&log_p, &est.ghe));
    if a.ghe.is_some() {
        let ens = ghe::surrogate_ensemble(
            &returns,
            log_p[0],
            &est.ghe,
            est.surrogates,
            derive_seed(seed, &[stream::SURROGATE]),
        );
        a.ensemble = a.note("surrogates", ens);
    }
    a
}

/// Table-6 style row plus quality flags; column order is fixed by
/// [`PeriodResult::CSV_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodResult {
    pub market: String,
    pub period: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n_days: usize,
    pub q_stat: Option<f64>,
    pub q_stat_se: Option<f64>,
    pub one_minus_qsen: Option<f64>,
    pub one_minus_qsen_se: Option<f64>,
    pub q_rel: Option<f64>,
    pub q_rel_se: Option<f64>,
    pub w_prime: Option<f64>,
    pub w_prime_se: Option<f64>,
    pub b_prime: Option<f64>,
    pub q: Option<f64>,
    pub q_se: Option<f64>,
    pub q_inv: Option<f64>,
    pub q_inv_se: Option<f64>,
    pub flags: Vec<String>,
}

impl PeriodResult {
    pub const CSV_HEADER: &'static str = "market,period,start,end,n_days,q_stat,q_stat_se,one_minus_qsen,one_minus_qsen_se,q_rel,q_rel_se,w_prime,w_prime_se,b_prime,q,q_se,q_inv,q_inv_se,flags";

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let quote = |s: &str| {
            if s.contains([',', '"']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        [
            quote(&self.market),
            quote(&self.period),
            self.start.to_string(),
            self.end.to_string(),
            self.n_days.to_string(),
            f(self.q_stat),
            f(self.q_stat_se),
            f(self.one_minus_qsen),
            f(self.one_minus_qsen_se),
            f(self.q_rel),
            f(self.q_rel_se),
            f(self.w_prime),
            f(self.w_prime_se),
            f(self.b_prime),
            f(self.q),
            f(self.q_se),
            f(self.q_inv),
            f(self.q_inv_se),
            quote(&self.flags.join(";")),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub delta_alpha: Option<f64>,
    pub q_sen: Option<f64>,
    pub min_r2_central: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodDetail {
    pub result: PeriodResult,
    pub event_note: Option<String>,
    pub qstat_fit: Option<QGaussianFit>,
    pub spectrum: Option<SpectrumSummary>,
    pub qrel_fit: Option<QRelFit>,
    pub qrel_direct: Option<QRelFit>,
    pub ghe: Option<GheSpectrum>,
    pub scaling: Option<NormalizedScaling>,
    pub errors: Vec<StageError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrisisTrend {
    pub index_name: TrendIndex,
    /// `(x_before - x_{before-1}) / range`.
    pub before: f64,
    /// `(x_after - x_before) / range`.
    pub after: f64,
    pub longterm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketReport {
    pub id: String,
    pub market: String,
    pub periods: Vec<PeriodDetail>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub crisis: Option<CrisisSpec>,
    pub trends: Vec<TrendReport>,
    pub crisis_trends: Vec<CrisisTrend>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub normalization_mode: NormalizationMode,
    pub inputs: Vec<(String, String)>,
    pub estimators: EstimatorConfig,
    pub markets: Vec<MarketReport>,
    pub correlation_scan: Option<CorrelationScan>,
    pub notes: Vec<String>,
    pub exit_code: i32,
}

/// The report plus every bundle file as `(relative path, contents)`.
#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub report: Report,
    pub files: Vec<(PathBuf, String)>,
    pub exit_code: i32,
}

fn input_doc(est: &EstimatorConfig) -> Vec<(String, String)> {
    let obs = match est.relaxation.observable {
        Observable::MutualInformation => "lagged mutual information of percent returns",
        Observable::Autocorrelation => "autocorrelation of percent returns",
    };
    vec![
        ("q_stat".into(), "percent returns, standardized".into()),
        ("q_sen".into(), "activity measure |r_t| / sum |r|, leading 2^k returns".into()),
        ("q_rel".into(), obs.into()),
        ("ghe".into(), "natural log of close prices".into()),
        ("surrogates".into(), "Gaussian percent changes with the period's mean and std".into()),
    ]
}

fn flags_for(a: &PeriodAnalysis) -> Vec<String> {
    let mut f = Vec::new();
    if let Some(q) = &a.qstat {
        if q.low_quality {
            f.push("qstat_low_quality".into());
        }
        if q.boundary_hit {
            f.push("qstat_boundary_hit".into());
        }
    }
    if let Some(s) = &a.spectrum {
        if let Some(e) = &s.endpoints {
            if e.min_fallback {
                f.push("alpha_min_fallback".into());
            }
            if e.max_fallback {
                f.push("alpha_max_fallback".into());
            }
        }
        if s.f_exceeds_unity {
            f.push("f_exceeds_unity".into());
        }
        if s.q_sen.is_none() {
            f.push("qsen_degenerate".into());
        }
    }
    if let Some(g) = &a.ghe {
        if !g.dropped_orders.is_empty() {
            f.push("ghe_dropped_orders".into());
        }
        if !g.heavy_tail_orders.is_empty() {
            f.push("ghe_heavy_tail".into());
        }
    }
    for e in &a.errors {
        let tag = format!("error:{}", e.stage);
        if !f.contains(&tag) {
            f.push(tag);
        }
    }
    f
}

fn summarize_spectrum(s: &MfSpectrum) -> SpectrumSummary {
    let e = s.endpoints.as_ref();
    SpectrumSummary {
        alpha_min: e.map(|e| e.alpha_min),
        alpha_max: e.map(|e| e.alpha_max),
        delta_alpha: e.map(|e| e.delta_alpha),
        q_sen: s.q_sen,
        min_r2_central: s
            .moment_grid
            .iter()
            .zip(s.r2_alpha.iter().zip(&s.r2_f))
            .filter(|(m, _)| m.abs() <= 2.0)
            .map(|(_, (a, b))| a.min(*b))
            .fold(1.0, f64::min),
    }
}

fn scaling_for(
    analyses: &[PeriodAnalysis],
    est: &EstimatorConfig,
    notes: &mut Vec<String>,
) -> Vec<Option<NormalizedScaling>> {
    let pooled = match est.normalization {
        NormalizationMode::Ensemble => None,
        NormalizationMode::PooledSigma => {
            let ens: Vec<&SurrogateEnsemble> = analyses.iter().filter_map(|a| a.ensemble.as_ref()).collect();
            let w: Vec<&[f64]> = ens.iter().map(|e| e.w.as_slice()).collect();
            let b: Vec<&[f64]> = ens.iter().map(|e| e.b.as_slice()).collect();
            match (ghe::pooled_sigma(&w), ghe::pooled_sigma(&b)) {
                (Ok(sw), Ok(sb)) => Some((sw, sb)),
                (Err(e), _) | (_, Err(e)) => {
                    notes.push(format!("pooled sigma unavailable: {e}"));
                    return vec![None; analyses.len()];
                }
            }
        }
    };
    analyses
        .iter()
        .map(|a| match (&a.ghe, &a.ensemble) {
            (Some(g), Some(e)) => ghe::normalize_scaling(g, &est.ghe, e, pooled).ok(),
            _ => None,
        })
        .collect()
}

fn crisis_trend(index: TrendIndex, values: &[f64], c: &CrisisSpec) -> Result<CrisisTrend> {
    let local = trends::local_trends(values)?;
    let (b, a) = (c.before_period - 1, c.after_period - 1);
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
    let after = if a == b + 1 { local[b] } else { (values[a] - values[b]) / range };
    let longterm = c
        .longterm_periods
        .map(|(f, l)| trends::longterm_trend(values, (f - 1, l - 1), None))
        .transpose()?;
    Ok(CrisisTrend {
        index_name: index,
        before: local[b - 1],
        after,
        longterm,
    })
}

fn assemble_market(
    m: &ResolvedMarket,
    analyses: Vec<PeriodAnalysis>,
    est: &EstimatorConfig,
) -> (MarketReport, Vec<Option<QTriplet>>) {
    let mut notes = Vec::new();
    let scaling = scaling_for(&analyses, est, &mut notes);
    let triplets: Vec<Option<QTriplet>> = analyses
        .iter()
        .map(|a| {
            a.qstat.as_ref().map(|q| QTriplet {
                q_stat: q.q_stat,
                q_sen: a.spectrum.as_ref().and_then(|s| s.q_sen),
                q_rel: a.qrel.as_ref().map(|r| r.q_rel),
                se_stat: q.stderr_q,
                se_sen: a.spectrum.as_ref().map_or(0.0, |s| s.stderr_qsen),
                se_rel: a.qrel.as_ref().map_or(0.0, |r| r.stderr_qrel),
            })
        })
        .collect();

    let metric = |which: Which| -> Option<Vec<metrics::MetricResult>> {
        let all: Option<Vec<QTriplet>> = triplets.iter().copied().collect();
        all.ok_or(Error::UndefinedComponent("q_stat")).and_then(|s| metrics::metric_series(&s, which)).ok()
    };
    let q = metric(Which::Q);
    let q_inv = metric(Which::QInv);
    if q.is_none() || q_inv.is_none() {
        notes.push("Q / Q_inv undefined: a period lacks a defined, non-singular triplet".into());
    }

    let mut periods = Vec::with_capacity(analyses.len());
    for (i, (a, v)) in analyses.into_iter().zip(&m.views).enumerate() {
        let t = triplets[i];
        let sc = scaling[i].clone();
        let result = PeriodResult {
            market: m.label.clone(),
            period: v.period.label.clone(),
            start: m.prices.dates()[v.first_index],
            end: m.prices.dates()[v.last_index],
            n_days: v.n_days,
            q_stat: t.map(|t| t.q_stat),
            q_stat_se: t.map(|t| t.se_stat),
            one_minus_qsen: t.and_then(|t| t.q_sen).map(|s| 1.0 - s),
            one_minus_qsen_se: t.and_then(|t| t.q_sen.map(|_| t.se_sen)),
            q_rel: t.and_then(|t| t.q_rel),
            q_rel_se: t.and_then(|t| t.q_rel.map(|_| t.se_rel)),
            w_prime: sc.as_ref().map(|s| s.w_prime),
            w_prime_se: sc.as_ref().map(|s| s.w_prime_stderr),
            b_prime: sc.as_ref().map(|s| s.b_prime),
            q: q.as_ref().map(|v| v[i].value),
            q_se: q.as_ref().map(|v| v[i].stderr),
            q_inv: q_inv.as_ref().map(|v| v[i].value),
            q_inv_se: q_inv.as_ref().map(|v| v[i].stderr),
            flags: flags_for(&a),
        };
        periods.push(PeriodDetail {
            result,
            event_note: v.period.event_note.clone(),
            qstat_fit: a.qstat.clone(),
            spectrum: a.spectrum.as_ref().map(summarize_spectrum),
            qrel_fit: a.qrel.clone(),
            qrel_direct: a.qrel_direct.clone(),
            ghe: a.ghe.clone(),
            scaling: sc,
            errors: a.errors.clone(),
        });
    }

    let mut trend_reports = Vec::new();
    let mut crisis_trends = Vec::new();
    if periods.len() >= 2 {
        for idx in TrendIndex::ALL {
            let vals: Option<Vec<f64>> = periods
                .iter()
                .map(|p| {
                    let r = &p.result;
                    match idx {
                        TrendIndex::QStat => r.q_stat,
                        TrendIndex::OneMinusQsen => r.one_minus_qsen,
                        TrendIndex::QRel => r.q_rel,
                        TrendIndex::QInv => r.q_inv,
                        TrendIndex::WPrime => r.w_prime,
                        TrendIndex::BPrime => r.b_prime,
                    }
                })
                .collect();
            let Some(vals) = vals else {
                notes.push(format!("trends for {} skipped: undefined values", idx.name()));
                continue;
            };
            let window = m.crisis.as_ref().and_then(|c| c.longterm_periods).map(|(a, b)| (a - 1, b - 1));
            match trends::trend_report(idx, &vals, window, None) {
                Ok(r) => trend_reports.push(r),
                Err(e) => notes.push(format!("trends for {}: {e}", idx.name())),
            }
            if let Some(c) = &m.crisis {
                match crisis_trend(idx, &vals, c) {
                    Ok(t) => crisis_trends.push(t),
                    Err(e) => notes.push(format!("crisis trend for {}: {e}", idx.name())),
                }
            }
        }
    }

    (
        MarketReport {
            id: m.id.clone(),
            market: m.label.clone(),
            periods,
            warnings: m.warnings.clone(),
            notes,
            crisis: m.crisis.clone(),
            trends: trend_reports,
            crisis_trends,
        },
        triplets,
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bars_tsv(m: &MarketReport) -> String {
    let mut out = String::from("period\tq_stat\tq_stat_se\tq_sen\tq_sen_se\tq_rel\tq_rel_se\tQ\tQ_se\tQ_inv\tQ_inv_se\tW_prime\tB_prime\n");
    for p in &m.periods {
        let r = &p.result;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.period,
            fmt_opt(r.q_stat),
            fmt_opt(r.q_stat_se),
            fmt_opt(r.one_minus_qsen.map(|v| 1.0 - v)),
            fmt_opt(r.one_minus_qsen_se),
            fmt_opt(r.q_rel),
            fmt_opt(r.q_rel_se),
            fmt_opt(r.q),
            fmt_opt(r.q_se),
            fmt_opt(r.q_inv),
            fmt_opt(r.q_inv_se),
            fmt_opt(r.w_prime),
            fmt_opt(r.b_prime)
        );
    }
    out
}

/// Pure analysis; inputs resolve against `base_dir`. Configuration and input
/// errors are returned as `Err` (exit code 1).
pub fn analyze(config: &AnalysisConfig, base_dir: &Path) -> Result<AnalysisOutput> {
    config.estimators.validate()?;
    let est = &config.estimators;
    let markets: Vec<ResolvedMarket> = config
        .markets
        .iter()
        .map(|m| resolve_market(m, base_dir))
        .collect::<Result<_>>()?;
    let mut ids: Vec<&str> = markets.iter().map(|m| m.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("market ids must be unique".into()));
    }

    let units: Vec<(usize, usize)> = markets
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..m.views.len()).map(move |pi| (mi, pi)))
        .collect();
    let mut analyses: Vec<PeriodAnalysis> = units
        .par_iter()
        .map(|&(mi, pi)| {
            let m = &markets[mi];
            let prices = m.views[pi].prices(&m.prices);
            analyze_period(&prices, est, derive_seed(config.seed, &[mi as u64, pi as u64]))
        })
        .collect();

    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut market_reports = Vec::new();
    let mut scan_points = Vec::new();
    let mut mask = Vec::new();
    let mut any_failed = false;
    let mut all_failed = true;
    for m in markets.iter().rev() {
        let tail = analyses.split_off(analyses.len() - m.views.len());
        market_reports.push((m, tail));
    }
    market_reports.reverse();
    let mut reports = Vec::new();
    for (m, tail) in market_reports {
        for (pi, a) in tail.iter().enumerate() {
            any_failed |= !a.errors.is_empty();
            all_failed &= a.nothing_computed();
            let dir = PathBuf::from(&m.id).join(format!("period_{:02}", pi + 1));
            if let Some(h) = &a.pdf {
                files.push((dir.join("pdf.tsv"), h.to_tsv()));
            }
            if let Some(s) = &a.spectrum {
                files.push((dir.join("spectrum.tsv"), s.to_tsv()));
            }
            if let Some(c) = &a.decay {
                files.push((dir.join("decay.tsv"), c.to_tsv()));
            }
            if let Some(g) = &a.ghe {
                files.push((dir.join("ghe.tsv"), g.to_tsv()));
            }
        }
        let (report, _) = assemble_market(m, tail, est);
        for (pi, p) in report.periods.iter().enumerate() {
            if let Some(s) = &p.scaling {
                files.push((PathBuf::from(&m.id).join(format!("period_{:02}", pi + 1)).join("surrogates.tsv"), s.to_tsv()));
            }
            let r = &p.result;
            if let (Some(omq), Some(w), Some(b)) = (r.one_minus_qsen, r.w_prime, r.b_prime) {
                if omq != 0.0 {
                    scan_points.push(ScanPoint {
                        market: m.label.clone(),
                        period: r.period.clone(),
                        inv_one_minus_qsen: 1.0 / omq,
                        w_prime: w,
                        b_prime: b,
                    });
                    mask.push(config.figure6_mask == MaskMode::All || !m.excluded.contains(&(pi + 1)));
                }
            }
        }
        files.push((PathBuf::from(&m.id).join("bars.tsv"), bars_tsv(&report)));
        reports.push(report);
    }

    let mut notes = Vec::new();
    let scan = match trends::correlation_scan(scan_points, Some(mask)) {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("correlation scan skipped: {e}"));
            None
        }
    };

    let mut fig5a = String::from("market\tindex\tbefore\tafter\n");
    let mut fig5b = String::from("market\tindex\tlongterm_slope\twindow_first\twindow_last\tabscissa\n");
    for r in &reports {
        for t in &r.crisis_trends {
            let _ = writeln!(fig5a, "{}\t{}\t{}\t{}", r.market, t.index_name.name(), t.before, t.after);
        }
        for t in &r.trends {
            if let (Some(s), Some((a, b))) = (t.longterm_slope, t.fit_window) {
                let _ = writeln!(fig5b, "{}\t{}\t{}\t{}\t{}\tperiod_index", r.market, t.index_name.name(), s, a + 1, b + 1);
            }
        }
    }
    files.push(("fig5a.tsv".into(), fig5a));
    files.push(("fig5b.tsv".into(), fig5b));
    if let Some(s) = &scan {
        files.push(("fig6a.tsv".into(), s.to_tsv(false)));
        files.push(("fig6b.tsv".into(), s.to_tsv(true)));
    }

    let mut table = String::from(PeriodResult::CSV_HEADER);
    table.push('\n');
    for r in &reports {
        for p in &r.periods {
            table.push_str(&p.result.csv_row());
            table.push('\n');
        }
    }
    files.push(("table6.csv".into(), table));

    let exit_code = if all_failed {
        EXIT_ALL_FAILED
    } else if any_failed {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    };
    let report = Report {
        tool: "qtriplet",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        normalization_mode: est.normalization,
        inputs: input_doc(est),
        estimators: est.clone(),
        markets: reports,
        correlation_scan: scan,
        notes,
        exit_code,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    files.insert(0, ("report.json".into(), json));
    Ok(AnalysisOutput { report, files, exit_code })
}

/// Writes every bundle file under `out_dir`.
pub fn write_bundle(out: &AnalysisOutput, out_dir: &Path) -> Result<()> {
    for (rel, text) in &out.files {
        let path = out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, text).map_err(|source| Error::Io { path: path.clone(), source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_bounds() {
        let c = AnalysisConfig::from_json(r#"{"markets":[{"input":"x.csv","preset":"dax"}]}"#).unwrap();
        assert_eq!(c.estimators.ghe.tau_max_set.last(), Some(&19));
        assert_eq!(c.estimators.ghe.w_pair, (0.1, 4.0));
        assert_eq!(c.estimators.ghe.b_range, (0.1, 1.0));
        assert_eq!(c.estimators.surrogates, 100);
        assert!(AnalysisConfig::from_json(r#"{"markets":[]}"#).is_err());
        assert!(AnalysisConfig::from_json(r#"{"markets":[{"input":"x"}],"estimators":{"qstat_bins":100}}"#).is_err());
        assert!(AnalysisConfig::from_json(r#"{"markets":[{"input":"x"}],"bogus":1}"#).is_err());
    }

    #[test]
    fn csv_row_has_header_arity() {
        let r = PeriodResult {
            market: "A,B".into(),
            period: "p".into(),
            start: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
            end: NaiveDate::from_ymd_opt(2000, 2, 3).unwrap(),
            n_days: 10,
            q_stat: Some(1.5),
            q_stat_se: None,
            one_minus_qsen: None,
            one_minus_qsen_se: None,
            q_rel: None,
            q_rel_se: None,
            w_prime: None,
            w_prime_se: None,
            b_prime: None,
            q: None,
            q_se: None,
            q_inv: None,
            q_inv_se: None,
            flags: vec!["a".into(), "b".into()],
        };
        let row = r.csv_row();
        assert!(row.starts_with("\"A,B\",p,2000-01-03"));
        assert!(row.ends_with(",a;b"));
        assert_eq!(row.matches(',').count(), PeriodResult::CSV_HEADER.matches(',').count() + 1);
    }
}
