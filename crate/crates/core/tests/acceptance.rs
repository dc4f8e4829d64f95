//! End-to-end acceptance run: one PASS/FAIL/SKIP line per criterion.
//!
//! Criterion 9 needs real S&P 500 closes: set `QTRIPLET_SP500_CSV` to a
//! `date,close` file covering 1955-2020.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qtriplet::ghe::{self, GheConfig};
use qtriplet::metrics::{self, QAverages, QTriplet, Which};
use qtriplet::multifractal;
use qtriplet::pipeline::{self, AnalysisConfig, MarketConfig};
use qtriplet::reference::{table6, Market};
use qtriplet::relaxation;
use qtriplet::stats;
use qtriplet::synthgen::{self, CascadeSpec};
use qtriplet::trends::{self, TrendIndex};
use qtriplet::tsallis::{self, QGrid};
use qtriplet::validate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Criterion = (&'static str, Duration, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn c1_table6_arithmetic() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    let mut within = 0;
    for m in Market::ALL {
        let t = table6(m);
        let series: Vec<QTriplet> = t.iter().map(|r| r.triplet()).collect();
        let q = metrics::metric_series(&series, Which::Q).expect("Q series");
        let qi = metrics::metric_series(&series, Which::QInv).expect("Q_inv series");
        for (i, r) in t.iter().enumerate() {
            let d = (q[i].value - r.q.0).abs().max((qi[i].value - r.q_inv.0).abs());
            worst = worst.max(d);
            rows += 1;
            within += usize::from(d <= 0.06);
        }
    }
    let sp = table6(Market::Sp500);
    let series: Vec<QTriplet> = sp.iter().map(|r| r.triplet()).collect();
    let (a, b) = (metrics::q_metric(&series, 5).unwrap().value, metrics::q_inv_metric(&series, 5).unwrap().value);
    let anchor = (a - 8.20).abs() <= 0.01 && (b - 9.62).abs() <= 0.01;
    judge(
        within == 37 && rows == 37 && anchor,
        format!("{within}/{rows} rows within 0.06 (max {worst:.4}); anchor Q {a:.3}, Q_inv {b:.3}"),
    )
}

fn c2_qstat_recovery() -> Outcome {
    let scan = QGrid::default();
    let mut got = Vec::new();
    for (seed, q) in [(101, 1.2), (102, 1.5)] {
        let x = synthgen::sample_qgaussian(q, 1.0, 100_000, seed).unwrap();
        let f = tsallis::fit_qgaussian(&tsallis::empirical_pdf(&x, 101).unwrap(), &scan).unwrap();
        got.push((q, f.q_stat));
    }
    let h = synthgen::qgaussian_histogram(1.8, 1.0, 101, 10.0, 100_000.0).unwrap();
    got.push((1.8, tsallis::fit_qgaussian(&h, &scan).unwrap().q_stat));
    let ok = got.iter().all(|(q, g)| (q - g).abs() <= 0.05 + 1e-9);
    judge(ok, got.iter().map(|(q, g)| format!("q={q} -> {g:.3}")).collect::<Vec<_>>().join(", "))
}

fn c3_cascade() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.6, 0.7] {
        let mu = synthgen::binomial_cascade(CascadeSpec::new(p, 15).unwrap(), Some(31));
        let s = match multifractal::analyze_measure(&mu, &multifractal::default_moment_grid(), &multifractal::default_scales(mu.len())) {
            Ok(s) => s,
            Err(e) => return Outcome::Fail(format!("p={p}: {e}")),
        };
        let e = s.endpoints.clone().unwrap();
        let (amin, amax) = (-(p.max(1.0 - p)).log2(), -(p.min(1.0 - p)).log2());
        let closed = multifractal::q_sen_from_endpoints(amin, amax).unwrap().unwrap();
        let got = s.q_sen.unwrap_or(f64::NAN);
        ok &= (e.alpha_min - amin).abs() <= 0.05 && (e.alpha_max - amax).abs() <= 0.06 && (got - closed).abs() <= 0.15;
        parts.push(format!("p={p}: alpha [{:.3}, {:.3}] vs [{amin:.3}, {amax:.3}], q_sen {got:.3} vs {closed:.3}", e.alpha_min, e.alpha_max));
    }
    judge(ok, parts.join("; "))
}

fn c4_fbm_ghe() -> Outcome {
    let cfg = GheConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [0.3, 0.5, 0.7] {
        let res: Vec<[f64; 3]> = (0..50u64)
            .into_par_iter()
            .map(|s| {
                let x = synthgen::fbm(h, 1 << 14, 1000 + s).unwrap();
                let g = ghe::ghe_spectrum(&x, &cfg).unwrap();
                [(g.h_at(1.0).unwrap() - h).abs(), g.b_proxy.abs(), g.width.unwrap().abs()]
            })
            .collect();
        let m = |k: usize| stats::mean(&res.iter().map(|r| r[k]).collect::<Vec<_>>());
        let (dh, b, w) = (m(0), m(1), m(2));
        ok &= dh <= 0.03 && b <= 0.02 && w <= 0.05;
        parts.push(format!("H={h}: |dH1| {dh:.4} |B| {b:.4} |W| {w:.4}"));
    }
    judge(ok, parts.join("; "))
}

fn c5_surrogates() -> Outcome {
    let (mw, sw, mb, sb) = validate::calibrate(200, 100, 1000, 5);
    let band = |m: f64, s: f64| (-0.5..=0.5).contains(&m) && (0.7..=1.4).contains(&s);
    judge(band(mw, sw) && band(mb, sb), format!("W' mean {mw:.3} sd {sw:.3}; B' mean {mb:.3} sd {sb:.3}"))
}

fn c6_qrel() -> Outcome {
    let lags = synthgen::log_spaced_lags(100, 10_000, 40);
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [2.0, 5.0, 11.0] {
        let c = synthgen::qexp_decay_curve(q, 10.0, &lags).unwrap();
        let got = relaxation::fit_qrel(&c).map(|f| f.q_rel).unwrap_or(f64::NAN);
        ok &= ((got - q) / q).abs() <= 0.02;
        parts.push(format!("q={q} -> {got:.4}"));
    }
    let x = synthgen::ar1(0.5, 100_000, 6).unwrap();
    let c = relaxation::autocorrelation(&x, 20).unwrap();
    let ar = relaxation::fit_qrel_direct(&c).map(|f| f.q_rel).unwrap_or(f64::NAN);
    ok &= (0.8..=1.3).contains(&ar);
    parts.push(format!("AR(1) 0.5 -> {ar:.4}"));
    judge(ok, parts.join(", "))
}

fn rounded(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            line.split(',')
                .map(|cell| match cell.parse::<f64>() {
                    Ok(v) if cell.contains('.') || cell.contains('e') => format!("{v:.5e}"),
                    _ => cell.to_string(),
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn c7_determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let cfg = AnalysisConfig::load(&dir.join("config.json")).unwrap();
    let a = pipeline::analyze(&cfg, &dir).unwrap();
    let b = pipeline::analyze(&cfg, &dir).unwrap();
    let identical = a.files == b.files;
    let table = a.files.iter().find(|(p, _)| p == Path::new("table6.csv")).map(|(_, t)| rounded(t));
    let golden = std::fs::read_to_string(dir.join("table6.csv")).ok();
    let matches = table.is_some() && table == golden;
    judge(
        identical && matches,
        format!("{} files byte-identical: {identical}; golden table matches: {matches}", a.files.len()),
    )
}

fn c8_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fails = Vec::new();

    let draw = |r: &mut ChaCha8Rng| QTriplet::new(r.random_range(0.5..3.0), r.random_range(-3.0..0.9), r.random_range(0.5..20.0));
    let mut axiom_bad = 0;
    for _ in 0..10_000 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let d = |x: &QTriplet, y: &QTriplet| metrics::q_distance(x, y).unwrap().value;
        let good = d(&a, &a) == 0.0 && d(&a, &b) >= 0.0 && d(&a, &b) == d(&b, &a) && d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12;
        axiom_bad += usize::from(!good);
    }
    if axiom_bad > 0 {
        fails.push(format!("metric axioms broken on {axiom_bad} triples"));
    }

    let mut spectra = 0;
    let mut worst_identity: f64 = 0.0;
    for (k, p) in [0.55, 0.6, 0.65, 0.7, 0.75].into_iter().enumerate() {
        let mu = synthgen::binomial_cascade(CascadeSpec::new(p, 13).unwrap(), Some(k as u64));
        let s = multifractal::analyze_measure(&mu, &multifractal::default_moment_grid(), &multifractal::default_scales(mu.len())).unwrap();
        if let (Some(e), Some(q)) = (s.endpoints, s.q_sen) {
            let lhs = 1.0 / (1.0 - q);
            let rhs = e.delta_alpha / (e.alpha_max * e.alpha_min);
            worst_identity = worst_identity.max(((lhs - rhs) / rhs).abs());
            spectra += 1;
        }
    }
    if spectra < 5 || worst_identity > 1e-10 {
        fails.push(format!("spectrum identity: {spectra} spectra, worst rel {worst_identity:e}"));
    }

    let cfg = GheConfig::default();
    let mut worst_h: f64 = 0.0;
    for s in 0..5 {
        let x = synthgen::fbm(0.45, 2048, 80 + s).unwrap();
        let (a, b) = (rng.random_range(-20.0..20.0), rng.random_range(0.05..50.0));
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let (gx, gy) = (ghe::ghe_spectrum(&x, &cfg).unwrap(), ghe::ghe_spectrum(&y, &cfg).unwrap());
        for (u, v) in gx.h.iter().zip(&gy.h) {
            worst_h = worst_h.max((u - v).abs());
        }
    }
    if worst_h > 1e-12 {
        fails.push(format!("H affine invariance off by {worst_h:e}"));
    }

    let mut worst_tel: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..25);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let range = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
        if range < 1e-9 {
            continue;
        }
        let s: f64 = trends::local_trends(&v).unwrap().iter().sum();
        worst_tel = worst_tel.max((s - (v[n - 1] - v[0]) / range).abs());
    }
    if worst_tel > 1e-9 {
        fails.push(format!("telescoping off by {worst_tel:e}"));
    }

    let mut worst_fd: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..12);
        let series: Vec<QTriplet> = (0..n)
            .map(|_| QTriplet::new(rng.random_range(1.0..2.5), rng.random_range(-1.5..-0.1), rng.random_range(1.0..12.0)))
            .collect();
        let which = if rng.random_bool(0.5) { Which::Q } else { Which::QInv };
        let avg = QAverages::from_series(&series, which).unwrap();
        let t = &series[rng.random_range(0..n)];
        let g = avg.partials(t).unwrap();
        let base = [t.q_stat, t.q_sen.unwrap(), t.q_rel.unwrap()];
        for j in 0..3 {
            let h = 1e-5 * base[j].abs().max(1.0);
            let eval = |d: f64| {
                let mut k = base;
                k[j] += d;
                if which == Which::QInv {
                    k[1] = 1.0 / (1.0 - k[1]);
                }
                avg.evaluate(k)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - g[j]).abs() / g[j].abs().max(1e-3));
        }
    }
    if worst_fd > 1e-6 {
        fails.push(format!("partials vs finite differences off by {worst_fd:e} relative"));
    }

    let detail = format!(
        "10^4 metric triples, {spectra} spectra (identity {worst_identity:.1e}), H invariance {worst_h:.1e}, telescoping {worst_tel:.1e}, partials {worst_fd:.1e}"
    );
    if fails.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(fails.join("; "))
    }
}

/// Local-trend signs around the 2000 bubble: q_stat up then down, 1 - q_sen
/// down then up.
fn sign_pattern(q_stat: (f64, f64), one_minus_qsen: (f64, f64)) -> bool {
    q_stat.0 > 0.0 && q_stat.1 < 0.0 && one_minus_qsen.0 < 0.0 && one_minus_qsen.1 > 0.0
}

fn c9_sp500() -> Outcome {
    let rows = table6(Market::Sp500);
    let col = |f: fn(&qtriplet::reference::Table6Row) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let (qs, om) = (col(|r| r.q_stat.0), col(|r| r.one_minus_qsen.0));
    let (lq, lo) = (trends::local_trends(&qs).unwrap(), trends::local_trends(&om).unwrap());
    let tabulated = sign_pattern((lq[4], lq[5]), (lo[4], lo[5]));

    let Some(csv) = std::env::var_os("QTRIPLET_SP500_CSV") else {
        return Outcome::Skip(format!("QTRIPLET_SP500_CSV not set; tabulated values show the pattern: {tabulated}"));
    };
    let cfg = AnalysisConfig {
        seed: 9,
        output_dir: None,
        markets: vec![MarketConfig {
            input: csv.into(),
            market_label: None,
            preset: Some("sp500".into()),
            periods: None,
            crisis: None,
            figure6_excluded_periods: None,
        }],
        estimators: Default::default(),
        figure6_mask: Default::default(),
    };
    let out = match pipeline::analyze(&cfg, Path::new(".")) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("analysis failed: {e}")),
    };
    let m = &out.report.markets[0];
    let find = |idx: TrendIndex| m.crisis_trends.iter().find(|t| t.index_name == idx).map(|t| (t.before, t.after));
    match (find(TrendIndex::QStat), find(TrendIndex::OneMinusQsen)) {
        (Some(q), Some(o)) => judge(
            m.periods.len() == 11 && sign_pattern(q, o),
            format!(
                "{} periods; q_stat {:+.3}/{:+.3}, 1-q_sen {:+.3}/{:+.3}",
                m.periods.len(),
                q.0,
                q.1,
                o.0,
                o.1
            ),
        ),
        _ => Outcome::Fail(format!("crisis trends unavailable: {}", m.notes.join("; "))),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("table6_q_arithmetic", Duration::from_secs(1), c1_table6_arithmetic),
        ("qstat_recovery", Duration::from_secs(30), c2_qstat_recovery),
        ("qsen_cascade", Duration::from_secs(30), c3_cascade),
        ("ghe_fbm", Duration::from_secs(120), c4_fbm_ghe),
        ("surrogate_calibration", Duration::from_secs(300), c5_surrogates),
        ("qrel_fitting", Duration::from_secs(10), c6_qrel),
        ("determinism_golden", Duration::from_secs(300), c7_determinism),
        ("property_suites", Duration::from_secs(300), c8_properties),
        ("sp500_sign_pattern", Duration::from_secs(600), c9_sp500),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = f();
        let dt = t0.elapsed();
        let slow = dt > *budget;
        let (tag, detail) = match outcome {
            Outcome::Pass(d) if slow => ("FAIL", format!("{d}; over budget {budget:?}")),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        failed += usize::from(tag == "FAIL");
        println!("{tag} {} {name}: {detail} [{:.2}s]", i + 1, dt.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
