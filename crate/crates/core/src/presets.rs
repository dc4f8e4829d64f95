//! Period break-downs of the four reference markets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::PeriodSpec;

/// 1-based period numbers around the crisis used for trend reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisSpec {
    pub before_period: usize,
    pub after_period: usize,
    /// Inclusive period range of the long-term fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longterm_periods: Option<(usize, usize)>,
    #[serde(default)]
    pub event: String,
}

impl CrisisSpec {
    pub fn validate(&self, periods: usize) -> Result<()> {
        let ok = |p: usize| p >= 1 && p <= periods;
        if !ok(self.before_period) || !ok(self.after_period) || self.before_period < 2 {
            return Err(Error::Config(format!(
                "crisis periods {}/{} invalid for {periods} periods",
                self.before_period, self.after_period
            )));
        }
        if let Some((a, b)) = self.longterm_periods {
            if !ok(a) || !ok(b) || b < a + 2 {
                return Err(Error::Config(format!("long-term window {a}..{b} invalid for {periods} periods")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPreset {
    pub id: String,
    pub market_label: String,
    pub periods: Vec<PeriodSpec>,
    pub crisis: CrisisSpec,
    /// 1-based periods left out of the correlation-scan fit.
    #[serde(default)]
    pub figure6_excluded_periods: Vec<usize>,
}

const SOURCES: [(&str, &str); 4] = [
    ("sp500", include_str!("../../../presets/sp500.json")),
    ("nikkei", include_str!("../../../presets/nikkei.json")),
    ("dax", include_str!("../../../presets/dax.json")),
    ("lse", include_str!("../../../presets/lse.json")),
];

pub fn preset_ids() -> Vec<&'static str> {
    SOURCES.iter().map(|(id, _)| *id).collect()
}

pub fn preset(id: &str) -> Result<MarketPreset> {
    let key = id.to_ascii_lowercase();
    let (_, text) = SOURCES
        .iter()
        .find(|(k, _)| *k == key)
        .ok_or_else(|| Error::Config(format!("unknown preset '{id}' (known: {})", preset_ids().join(", "))))?;
    let p: MarketPreset = serde_json::from_str(text)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{table6, Market};

    #[test]
    fn presets_load_and_match_table_rows() {
        for (id, m) in [("sp500", Market::Sp500), ("nikkei", Market::Nikkei), ("dax", Market::Dax), ("lse", Market::Lse)] {
            let p = preset(id).unwrap();
            assert_eq!(p.periods.len(), table6(m).len(), "{id}");
            p.crisis.validate(p.periods.len()).unwrap();
            for w in p.periods.windows(2) {
                assert!(w[0].end < w[1].start);
            }
        }
        let sp = preset("SP500").unwrap();
        assert_eq!(sp.periods[0].reported_days, Some(2062));
        assert_eq!(sp.periods[5].label, "15/12/94-10/6/99");
        assert!(preset("ftse").is_err());
    }
}
