//! Norms, distances and the Q / Q^inv metrics of q-triplet series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A period's `(q_stat, q_sen, q_rel)` with standard errors. Undefined
/// components are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTriplet {
    pub q_stat: f64,
    pub q_sen: Option<f64>,
    pub q_rel: Option<f64>,
    pub se_stat: f64,
    pub se_sen: f64,
    pub se_rel: f64,
}

impl QTriplet {
    pub fn new(q_stat: f64, q_sen: f64, q_rel: f64) -> Self {
        QTriplet {
            q_stat,
            q_sen: Some(q_sen),
            q_rel: Some(q_rel),
            se_stat: 0.0,
            se_sen: 0.0,
            se_rel: 0.0,
        }
    }

    pub fn with_errors(mut self, se_stat: f64, se_sen: f64, se_rel: f64) -> Self {
        self.se_stat = se_stat;
        self.se_sen = se_sen;
        self.se_rel = se_rel;
        self
    }

    /// All three components, or the name of the first undefined one.
    pub fn components(&self) -> Result<[f64; 3]> {
        let sen = self.q_sen.ok_or(Error::UndefinedComponent("q_sen"))?;
        let rel = self.q_rel.ok_or(Error::UndefinedComponent("q_rel"))?;
        Ok([self.q_stat, sen, rel])
    }

    pub fn errors(&self) -> [f64; 3] {
        [self.se_stat, self.se_sen, self.se_rel]
    }

    /// `(1 - q_sen)^{-1}`.
    pub fn inverse_sen(&self) -> Result<f64> {
        let s = self.q_sen.ok_or(Error::UndefinedComponent("q_sen"))?;
        if s == 1.0 {
            return Err(Error::SingularQSen);
        }
        Ok(1.0 / (1.0 - s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Norm,
    Distance,
    DUnity,
    DInv,
    Q,
    QInv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricResult {
    pub value: f64,
    pub stderr: f64,
    pub kind: MetricKind,
}

fn result(value: f64, kind: MetricKind) -> MetricResult {
    MetricResult { value, stderr: 0.0, kind }
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn q_norm(t: &QTriplet) -> Result<MetricResult> {
    Ok(result(euclid(t.components()?, [0.0; 3]), MetricKind::Norm))
}

pub fn q_distance(t: &QTriplet, u: &QTriplet) -> Result<MetricResult> {
    Ok(result(euclid(t.components()?, u.components()?), MetricKind::Distance))
}

/// Distance from the Gaussian fixed point `(1, 1, 1)`.
pub fn d_unity(t: &QTriplet) -> Result<MetricResult> {
    Ok(result(euclid(t.components()?, [1.0; 3]), MetricKind::DUnity))
}

/// `sqrt((q_stat-1)^2 + (q_sen-1)^{-2} + (q_rel-1)^2)`.
pub fn d_inv(t: &QTriplet) -> Result<MetricResult> {
    let [a, s, c] = t.components()?;
    if s == 1.0 {
        return Err(Error::SingularQSen);
    }
    let v = ((a - 1.0).powi(2) + (s - 1.0).powi(-2) + (c - 1.0).powi(2)).sqrt();
    Ok(result(v, MetricKind::DInv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Q,
    QInv,
}

/// Per-market averages shared by every period's Q or Q^inv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QAverages {
    pub which: Which,
    /// Averages of the three members (q_sen or its inverse as the second).
    pub members: [f64; 3],
    /// Average of `D` (or `D^inv`).
    pub distance: f64,
}

fn members(t: &QTriplet, which: Which) -> Result<[f64; 3]> {
    let [a, s, c] = t.components()?;
    Ok(match which {
        Which::Q => [a, s, c],
        Which::QInv => [a, t.inverse_sen()?, c],
    })
}

impl QAverages {
    pub fn from_series(series: &[QTriplet], which: Which) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptySeries);
        }
        let n = series.len() as f64;
        let mut m = [0.0; 3];
        let mut d = 0.0;
        for t in series {
            let k = members(t, which)?;
            for j in 0..3 {
                m[j] += k[j] / n;
            }
            d += match which {
                Which::Q => d_unity(t)?.value,
                Which::QInv => d_inv(t)?.value,
            } / n;
        }
        for (j, name) in ["q_stat", "q_sen", "q_rel"].iter().enumerate() {
            if m[j] == 0.0 {
                return Err(Error::ZeroAverage(name));
            }
        }
        Ok(QAverages { which, members: m, distance: d })
    }

    /// `(1/sqrt 3) <D> sqrt(sum_k (k / <k>)^2)` at member values `k`.
    pub fn evaluate(&self, k: [f64; 3]) -> f64 {
        self.distance / 3f64.sqrt() * ratio_norm(k, self.members)
    }

    /// Partials of the metric with respect to `(q_stat, q_sen, q_rel)` at `t`,
    /// averages held fixed.
    pub fn partials(&self, t: &QTriplet) -> Result<[f64; 3]> {
        let k = members(t, self.which)?;
        let r = ratio_norm(k, self.members);
        let c = self.distance / 3f64.sqrt();
        let mut g = [0.0; 3];
        if r > 0.0 {
            for j in 0..3 {
                g[j] = c * k[j] / (self.members[j] * self.members[j]) / r;
            }
        }
        if self.which == Which::QInv {
            // d/dq_sen of (1 - q_sen)^{-1} is its square.
            g[1] *= k[1] * k[1];
        }
        Ok(g)
    }
}

fn ratio_norm(k: [f64; 3], m: [f64; 3]) -> f64 {
    (0..3).map(|j| (k[j] / m[j]).powi(2)).sum::<f64>().sqrt()
}

fn metric(series: &[QTriplet], i: usize, which: Which) -> Result<MetricResult> {
    let t = series.get(i).ok_or_else(|| Error::InvalidParameter(format!("period index {i} out of range")))?;
    let avg = QAverages::from_series(series, which)?;
    Ok(MetricResult {
        value: avg.evaluate(members(t, which)?),
        stderr: stderr_at(&avg, t)?,
        kind: match which {
            Which::Q => MetricKind::Q,
            Which::QInv => MetricKind::QInv,
        },
    })
}

fn stderr_at(avg: &QAverages, t: &QTriplet) -> Result<f64> {
    let g = avg.partials(t)?;
    let se = t.errors();
    Ok((0..3).map(|j| (g[j] * se[j]).powi(2)).sum::<f64>().sqrt())
}

/// Q of period `i` normalized by the series averages.
pub fn q_metric(series: &[QTriplet], i: usize) -> Result<MetricResult> {
    metric(series, i, Which::Q)
}

/// Q^inv of period `i`: `q_sen` replaced by `(1 - q_sen)^{-1}` and `<D^inv>`
/// in place of `<D>`.
pub fn q_inv_metric(series: &[QTriplet], i: usize) -> Result<MetricResult> {
    metric(series, i, Which::QInv)
}

/// First-order standard error of Q or Q^inv of period `i`.
pub fn propagate_q_errors(series: &[QTriplet], i: usize, which: Which) -> Result<f64> {
    Ok(metric(series, i, which)?.stderr)
}

/// Q or Q^inv of every period; the averages are computed once.
pub fn metric_series(series: &[QTriplet], which: Which) -> Result<Vec<MetricResult>> {
    let avg = QAverages::from_series(series, which)?;
    let kind = match which {
        Which::Q => MetricKind::Q,
        Which::QInv => MetricKind::QInv,
    };
    series
        .iter()
        .map(|t| {
            Ok(MetricResult {
                value: avg.evaluate(members(t, which)?),
                stderr: stderr_at(&avg, t)?,
                kind,
            })
        })
        .collect()
}
