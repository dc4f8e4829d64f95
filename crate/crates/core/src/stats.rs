//! Small numeric helpers shared by the estimators: moments, least squares and
//! correlation.

/// Result of a straight-line least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. 1.0 for an exact line, including a
    /// perfectly flat one.
    pub r2: f64,
    /// Standard error of the slope (0 when fewer than three points).
    pub slope_se: f64,
    pub intercept_se: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Population standard deviation (`n` denominator).
pub fn population_std(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / x.len() as f64).sqrt()
}

/// Ordinary least squares. Returns `None` for fewer than two points or when
/// every abscissa is identical.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    weighted_ols(x, y, None)
}

/// Weighted least squares; `weights = None` is plain OLS.
pub fn weighted_ols(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    if sw <= 0.0 {
        return None;
    }
    let mx = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * dy;
        syy += w(i) * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let (slope_se, intercept_se) = if n > 2 {
        // Weights are treated as relative (frequency-like) weights.
        let sigma2 = sse / sw * n as f64 / (n - 2) as f64;
        let se_b = (sigma2 / sxx).sqrt();
        let se_a = (sigma2 * (1.0 / sw + mx * mx / sxx)).sqrt();
        (se_b, se_a)
    } else {
        (0.0, 0.0)
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
        intercept_se,
    })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len();
    if n < 2 || v.len() != n {
        return None;
    }
    let mu = mean(u);
    let mv = mean(v);
    let mut suu = 0.0;
    let mut svv = 0.0;
    let mut suv = 0.0;
    for i in 0..n {
        let a = u[i] - mu;
        let b = v[i] - mv;
        suu += a * a;
        svv += b * b;
        suv += a * b;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return None;
    }
    Some((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

/// Real roots of `a x^2 + b x + c`, or `None` when they are complex or the
/// polynomial is degenerate.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a == 0.0 {
        if b == 0.0 {
            return None;
        }
        let r = -c / b;
        return Some((r, r));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable form.
    let sq = disc.sqrt();
    let t = -0.5 * (b + b.signum() * sq);
    if t == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((t / a, c / t))
}

/// Least-squares quadratic `y = c0 + c1 x + c2 x^2`; returns `[c0, c1, c2]`.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    // Center for conditioning, then expand back.
    let xm = mean(x);
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for i in 0..n {
        let d = x[i] - xm;
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                t[k] += p * y[i];
            }
            p *= d;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let c = solve3(m, t)?;
    // c are coefficients in d = x - xm.
    let c0 = c[0] - c[1] * xm + c[2] * xm * xm;
    let c1 = c[1] - 2.0 * c[2] * xm;
    let c2 = c[2];
    Some([c0, c1, c2])
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}
