use proptest::prelude::*;
use qtriplet::ghe::{self, GheConfig};
use qtriplet::metrics::{self, QAverages, QTriplet, Which};
use qtriplet::multifractal;
use qtriplet::relaxation;
use qtriplet::synthgen::{self, CascadeSpec};
use qtriplet::timeseries::{self, PeriodSpec};
use qtriplet::trends;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(closes in prop::collection::vec(1e-3f64..1e6, 2..200)) {
        let dates = synthgen::weekday_dates(synthgen::synthetic_epoch(), closes.len());
        let p = timeseries::PriceSeries::new("m", dates, closes).unwrap();
        let back = timeseries::parse_price_csv(&p.to_csv_string(), "m").unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn returns_rebuild_prices(r in prop::collection::vec(-0.2f64..0.2, 1..300), start in 1.0f64..1e4) {
        let p = synthgen::prices_from_returns("m", &r, start).unwrap();
        let got = timeseries::percent_returns(&p).values;
        prop_assert_eq!(got.len(), r.len());
        for (a, b) in got.iter().zip(&r) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn contiguous_periods_cover_every_day(mut cuts in prop::collection::btree_set(1usize..499, 1..8)) {
        let n = 500;
        let dates = synthgen::weekday_dates(synthgen::synthetic_epoch(), n);
        let p = timeseries::PriceSeries::new("m", dates.clone(), vec![1.0; n]).unwrap();
        cuts.insert(n);
        let mut specs = Vec::new();
        let mut first = 0;
        for (i, &c) in cuts.iter().enumerate() {
            specs.push(PeriodSpec { label: format!("p{i}"), start: dates[first], end: dates[c - 1], event_note: None, reported_days: None });
            first = c;
        }
        let seg = timeseries::segment(&p, &specs).unwrap();
        prop_assert!(seg.warnings.is_empty());
        prop_assert_eq!(seg.views.iter().map(|v| v.n_days).sum::<usize>(), n);
        for w in seg.views.windows(2) {
            prop_assert_eq!(w[0].last_index + 1, w[1].first_index);
        }
    }

    #[test]
    fn spectrum_identity_on_cascades(p in 0.55f64..0.8, depth in 11u32..14, seed in any::<u64>()) {
        let mu = synthgen::binomial_cascade(CascadeSpec::new(p, depth).unwrap(), Some(seed));
        let s = multifractal::analyze_measure(&mu, &multifractal::default_moment_grid(), &multifractal::default_scales(mu.len())).unwrap();
        let e = s.endpoints.unwrap();
        let q = s.q_sen.unwrap();
        prop_assert!(rel_close(1.0 / (1.0 - q), e.delta_alpha / (e.alpha_max * e.alpha_min), 1e-10));
    }

    #[test]
    fn spectrum_identity_on_returns(seed in any::<u64>(), df in 3.0f64..20.0) {
        let r = synthgen::student_t(df, 4096, seed).unwrap();
        if let Ok(s) = multifractal::analyze_returns(&r) {
            if let (Some(e), Some(q)) = (s.endpoints, s.q_sen) {
                prop_assert!(rel_close(1.0 / (1.0 - q), e.delta_alpha / (e.alpha_max * e.alpha_min), 1e-10));
            }
        }
    }

    #[test]
    fn hurst_affine_invariance(seed in any::<u64>(), a in -50.0f64..50.0, b in 0.01f64..100.0) {
        let x = synthgen::fbm(0.6, 1024, seed).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let cfg = GheConfig::default();
        let gx = ghe::ghe_spectrum(&x, &cfg).unwrap();
        let gy = ghe::ghe_spectrum(&y, &cfg).unwrap();
        for (hx, hy) in gx.h.iter().zip(&gy.h) {
            prop_assert!((hx - hy).abs() <= 1e-12, "{} vs {}", hx, hy);
        }
    }

    #[test]
    fn local_trends_telescope(v in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-6);
        let s = trends::local_trends(&v).unwrap();
        let total: f64 = s.iter().sum();
        prop_assert!((total - (v[v.len() - 1] - v[0]) / (hi - lo)).abs() <= 1e-9);
    }

    #[test]
    fn trends_are_affine_invariant(v in prop::collection::vec(-10.0f64..10.0, 3..30), a in -5.0f64..5.0, b in 0.1f64..10.0) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-3);
        let w: Vec<f64> = v.iter().map(|x| a + b * x).collect();
        for (x, y) in trends::local_trends(&v).unwrap().iter().zip(trends::local_trends(&w).unwrap()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let l = v.len() - 1;
        let (tv, tw) = (trends::longterm_trend(&v, (0, l), None).unwrap(), trends::longterm_trend(&w, (0, l), None).unwrap());
        prop_assert!((tv - tw).abs() <= 1e-9);
    }

    #[test]
    fn partials_match_finite_differences(
        raw in prop::collection::vec((1.0f64..2.5, -1.5f64..-0.1, 1.0f64..12.0), 2..10),
        pick in any::<prop::sample::Index>(),
        inv in any::<bool>(),
    ) {
        let series: Vec<QTriplet> = raw.iter().map(|&(a, s, c)| QTriplet::new(a, s, c)).collect();
        let which = if inv { Which::QInv } else { Which::Q };
        let avg = QAverages::from_series(&series, which).unwrap();
        let t = &series[pick.index(series.len())];
        let g = avg.partials(t).unwrap();
        let base = [t.q_stat, t.q_sen.unwrap(), t.q_rel.unwrap()];
        for j in 0..3 {
            let h = 1e-5 * base[j].abs().max(1.0);
            let eval = |d: f64| {
                let mut k = base;
                k[j] += d;
                if inv {
                    k[1] = 1.0 / (1.0 - k[1]);
                }
                avg.evaluate(k)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3), "j={} fd={} analytic={}", j, fd, g[j]);
        }
    }

    #[test]
    fn mutual_information_symmetric_nonnegative(seed in any::<u64>(), bins in 2usize..12, phi in -0.9f64..0.9) {
        let x = synthgen::ar1(phi, 600, seed).unwrap();
        let y: Vec<f64> = x[1..].iter().zip(&x[..599]).map(|(a, b)| a * a - b).collect();
        let a = &x[..599];
        let i_ab = relaxation::mutual_information_pair(a, &y, bins).unwrap();
        let i_ba = relaxation::mutual_information_pair(&y, a, bins).unwrap();
        prop_assert!(i_ab >= 0.0);
        prop_assert!((i_ab - i_ba).abs() <= 1e-12);
    }

    #[test]
    fn autocorrelation_bounded(seed in any::<u64>(), phi in -0.95f64..0.95) {
        let x = synthgen::ar1(phi, 500, seed).unwrap();
        let c = relaxation::autocorrelation(&x, 50).unwrap();
        prop_assert!(c.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}

/// Identity, symmetry, non-negativity and the triangle inequality over 10^4
/// random triples.
#[test]
fn distance_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draw = |rng: &mut ChaCha8Rng| QTriplet::new(rng.random_range(0.5..3.0), rng.random_range(-3.0..0.9), rng.random_range(0.5..20.0));
    for _ in 0..10_000 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let d = |x: &QTriplet, y: &QTriplet| metrics::q_distance(x, y).unwrap().value;
        assert_eq!(d(&a, &a), 0.0);
        assert!(d(&a, &b) >= 0.0);
        assert_eq!(d(&a, &b), d(&b, &a));
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }
}
