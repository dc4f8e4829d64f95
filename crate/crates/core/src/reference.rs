//! Published per-period values for the four reference markets, used as
//! arithmetic oracles for the metric and trend stages.

use serde::{Deserialize, Serialize};

use crate::metrics::QTriplet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Sp500,
    Nikkei,
    Dax,
    Lse,
}

impl Market {
    pub const ALL: [Market; 4] = [Market::Sp500, Market::Nikkei, Market::Dax, Market::Lse];

    pub fn label(self) -> &'static str {
        match self {
            Market::Sp500 => "S&P500",
            Market::Nikkei => "NIKKEI",
            Market::Dax => "DAX",
            Market::Lse => "LSE",
        }
    }
}

/// A tabulated period row. Pairs are `(value, standard error)`; the second
/// member is tabulated as `1 - q_sen`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table6Row {
    pub period: &'static str,
    pub q_stat: (f64, f64),
    pub one_minus_qsen: (f64, f64),
    pub q_rel: (f64, f64),
    pub w_prime: (f64, f64),
    pub b_prime: f64,
    pub q: (f64, f64),
    pub q_inv: (f64, f64),
}

impl Table6Row {
    pub fn triplet(&self) -> QTriplet {
        QTriplet::new(self.q_stat.0, 1.0 - self.one_minus_qsen.0, self.q_rel.0).with_errors(
            self.q_stat.1,
            self.one_minus_qsen.1,
            self.q_rel.1,
        )
    }
}

#[allow(clippy::too_many_arguments)]
const fn row(
    period: &'static str,
    q_stat: (f64, f64),
    one_minus_qsen: (f64, f64),
    q_rel: (f64, f64),
    w_prime: (f64, f64),
    b_prime: f64,
    q: (f64, f64),
    q_inv: (f64, f64),
) -> Table6Row {
    Table6Row {
        period,
        q_stat,
        one_minus_qsen,
        q_rel,
        w_prime,
        b_prime,
        q,
        q_inv,
    }
}

pub fn table6(market: Market) -> &'static [Table6Row] {
    match market {
        Market::Sp500 => SP500,
        Market::Nikkei => NIKKEI,
        Market::Dax => DAX,
        Market::Lse => LSE,
    }
}

const SP500: &[Table6Row] = &[
    row("21/1/55-29/3/63", (1.4, 0.08), (1.72, 0.15), (5.67, 0.2), (4.29, 0.62), -2.73, (6.23, 0.77), (6.56, 0.59)),
    row("30/3/63-28/5/71", (1.42, 0.08), (1.77, 0.26), (4.3, 0.18), (2.22, 0.91), -1.69, (6.1, 1.44), (6.24, 0.9)),
    row("1/6/71-31/7/79", (1.13, 0.06), (2.55, 0.08), (4.36, 0.11), (1.19, 0.73), -1.07, (8.64, 1.54), (4.89, 0.21)),
    row("1/8/79-1/10/87", (1.63, 0.14), (1.97, 0.14), (8.58, 0.34), (1.69, 0.62), -1.32, (8.17, 1.08), (7.41, 0.65)),
    row("2/10/87-14/12/94", (1.33, 0.05), (2.1, 0.29), (11.99, 0.1), (2.61, 1.64), -1.38, (9.22, 2.16), (8.02, 0.43)),
    row("15/12/94-10/6/99", (1.84, 0.19), (1.31, 0.09), (11.2, 0.45), (2.35, 1.13), -1.58, (8.2, 1.07), (9.62, 1.07)),
    row("11/6/99-10/9/03", (1.26, 0.1), (2.59, 0.17), (6.92, 0.19), (1.58, 0.7), -1.1, (9.42, 2.73), (5.8, 0.35)),
    row("11/9/03-31/10/07", (1.25, 0.07), (1.9, 0.22), (7.25, 0.15), (2.21, 1.03), -1.91, (6.92, 1.47), (6.46, 0.57)),
    row("1/11/07-5/3/09", (1.52, 0.16), (1.38, 0.13), (8.81, 0.22), (0.73, 0.98), -0.5, (6.74, 0.69), (8.25, 0.99)),
    row("6/3/09-21/8/15", (1.47, 0.09), (1.72, 0.09), (11.31, 0.22), (1.6, 0.65), -2.51, (8.21, 0.51), (8.33, 0.43)),
    row("22/8/15-13/2/20", (1.76, 0.23), (1.63, 0.16), (9.2, 0.25), (0.28, 0.69), -1.46, (7.78, 1.23), (8.25, 1.14)),
];

const NIKKEI: &[Table6Row] = &[
    row("6/1/65-22/12/71", (1.3, 0.14), (2.25, 0.26), (7.06, 0.03), (2.21, 1.07), -1.95, (7.1, 2.38), (5.33, 0.4)),
    row("27/12/71-10/1/80", (1.41, 0.08), (1.44, 0.14), (5.44, 0.15), (4.63, 0.72), -3.96, (4.79, 0.37), (5.94, 0.76)),
    row("11/1/80-9/10/85", (1.56, 0.17), (2.03, 0.06), (9.93, 0.26), (1.81, 0.49), -1.87, (7.71, 0.66), (6.78, 0.54)),
    row("14/10/85-12/1/90", (1.78, 0.19), (1.17, 0.09), (8.69, 0.59), (5.69, 0.85), -2.0, (6.29, 0.94), (7.85, 1.05)),
    row("17/1/90-20/8/92", (1.43, 0.12), (1.72, 0.14), (5.55, 0.29), (4.38, 0.93), -4.04, (5.4, 0.67), (5.54, 0.51)),
    row("21/8/92-9/5/00", (1.41, 0.05), (2.29, 0.26), (3.62, 0.02), (3.35, 0.43), -2.22, (6.62, 2.67), (4.54, 0.31)),
    row("10/5/00-9/5/03", (1.35, 0.08), (2.29, 0.24), (7.17, 0.32), (-0.6, 0.92), 0.84, (7.3, 2.3), (5.4, 0.37)),
    row("10/5/03-31/10/07", (1.4, 0.18), (2.03, 0.14), (6.56, 0.18), (2.43, 0.97), -0.98, (6.43, 1.04), (5.45, 0.51)),
    row("1/11/07-20/5/10", (1.53, 0.16), (1.42, 0.05), (7.06, 0.28), (2.37, 1.18), -2.97, (5.49, 0.57), (6.53, 0.5)),
    row("21/5/10-20/8/15", (1.49, 0.05), (1.88, 0.22), (7.85, 0.23), (1.51, 0.73), -0.83, (6.57, 1.09), (6.09, 0.43)),
    row("21/8/15-13/2/20", (1.62, 0.05), (1.92, 0.27), (6.13, 0.37), (3.19, 0.5), -1.75, (6.34, 1.5), (5.74, 0.52)),
];

const DAX: &[Table6Row] = &[
    row("30/12/87-5/10/92", (1.38, 0.02), (1.94, 0.05), (5.67, 0.06), (4.64, 0.87), -0.48, (5.83, 0.25), (5.68, 0.16)),
    row("6/10/92-7/5/97", (1.46, 0.04), (2.52, 0.01), (7.71, 0.35), (4.98, 1.08), -0.64, (7.87, 0.39), (5.96, 0.3)),
    row("8/5/97-5/5/00", (1.42, 0.19), (1.88, 0.13), (4.62, 0.33), (2.71, 0.82), -2.07, (5.5, 0.86), (5.6, 0.72)),
    row("6/5/00-10/5/03", (1.1, 0.17), (2.25, 0.05), (9.47, 0.21), (-1.22, 0.48), 1.2, (7.35, 0.5), (6.26, 0.38)),
    row("12/5/03-31/10/07", (1.54, 0.05), (2.27, 0.29), (10.9, 0.3), (-0.34, 0.91), -0.64, (8.44, 1.5), (7.32, 0.49)),
    row("1/11/07-9/5/09", (1.62, 0.34), (1.27, 0.12), (7.33, 0.44), (4.01, 1.55), -2.3, (5.84, 1.55), (7.67, 1.52)),
    row("10/5/09-15/10/14", (1.45, 0.24), (2.02, 0.13), (6.95, 0.03), (-1.22, 1.45), -1.06, (6.46, 0.95), (6.06, 0.78)),
    row("16/10/14-13/2/20", (1.33, 0.06), (2.01, 0.26), (3.85, 0.06), (2.75, 0.75), -1.75, (5.49, 1.3), (5.14, 0.61)),
];

const LSE: &[Table6Row] = &[
    row("23/7/01-10/12/04", (1.74, 0.24), (1.6, 0.29), (4.85, 0.08), (10.56, 1.03), -9.16, (7.21, 3.03), (6.71, 1.34)),
    row("11/12/04-30/10/07", (1.93, 0.14), (0.98, 0.04), (7.25, 0.52), (8.53, 1.08), -4.19, (6.73, 0.92), (9.11, 0.81)),
    row("31/10/07-10/5/09", (1.22, 0.2), (2.08, 0.13), (9.26, 0.78), (3.0, 0.99), -0.8, (10.18, 3.17), (6.57, 0.86)),
    row("11/5/09-31/5/12", (1.39, 0.08), (2.14, 0.12), (4.12, 0.19), (1.78, 0.71), -0.62, (9.78, 3.18), (5.28, 0.34)),
    row("1/6/12-15/7/15", (1.34, 0.04), (1.81, 0.06), (9.7, 0.27), (3.25, 1.02), -2.04, (8.85, 1.04), (7.12, 0.43)),
    row("16/7/15-21/9/18", (1.39, 0.16), (1.45, 0.05), (9.26, 0.36), (2.25, 1.57), -2.14, (7.18, 0.7), (7.49, 0.6)),
    row("22/9/18-14/2/20", (1.74, 0.22), (1.0, 0.04), (14.16, 1.15), (3.35, 2.0), -1.27, (8.98, 2.07), (10.72, 1.71)),
];
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_counts() {
        let n: Vec<usize> = Market::ALL.iter().map(|&m| table6(m).len()).collect();
        assert_eq!(n, vec![11, 11, 8, 7]);
        assert_eq!(table6(Market::Sp500)[5].period, "15/12/94-10/6/99");
        let t = table6(Market::Sp500)[5].triplet();
        assert!((t.q_sen.unwrap() + 0.31).abs() < 1e-12);
    }
}
