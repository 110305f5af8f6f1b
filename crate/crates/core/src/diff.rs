//! Central differences with one Richardson step, and log-log order fits.

use num_complex::Complex64;

/// `(f(x+h) - f(x-h)) / 2h`.
pub fn central<F: Fn(f64) -> Complex64>(f: &F, x: f64, h: f64) -> Complex64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Richardson-extrapolated central difference, `O(h⁴)`.
pub fn richardson<F: Fn(f64) -> Complex64>(f: &F, x: f64, h: f64) -> Complex64 {
    (4.0 * central(f, x, h / 2.0) - central(f, x, h)) / 3.0
}

/// Least-squares slope of `ln err` against `ln h`.
pub fn fit_order(hs: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
