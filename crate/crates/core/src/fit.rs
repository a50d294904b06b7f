//! Least-squares helpers.

use crate::error::{Error, Result};
use crate::C;

/// Coefficients `c_0..c_deg` of the least-squares polynomial through `(x, y)`.
pub fn polyfit_complex(x: &[f64], y: &[C], deg: usize) -> Vec<C> {
    let m = deg + 1;
    // Normal equations on a centred, scaled abscissa would be better conditioned;
    // the fits here are tiny (8 points, degree ≤ 3), so plain QR via Householder is enough.
    let n = x.len();
    let mut a: Vec<Vec<C>> = (0..n)
        .map(|i| (0..m).map(|p| C::new(x[i].powi(p as i32), 0.0)).collect())
        .collect();
    let mut b: Vec<C> = y.to_vec();
    for col in 0..m {
        let norm = (col..n).map(|i| a[i][col].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[col][col].norm() == 0.0 {
            C::new(-norm, 0.0)
        } else {
            -a[col][col] / a[col][col].norm() * norm
        };
        let mut v: Vec<C> = (col..n).map(|i| a[i][col]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vn == 0.0 {
            continue;
        }
        for c in col..m {
            let dot: C = (col..n).map(|i| v[i - col].conj() * a[i][c]).sum();
            let f = 2.0 * dot / vn;
            for i in col..n {
                a[i][c] -= f * v[i - col];
            }
        }
        let dot: C = (col..n).map(|i| v[i - col].conj() * b[i]).sum();
        let f = 2.0 * dot / vn;
        for i in col..n {
            b[i] -= f * v[i - col];
        }
    }
    let mut coef = vec![C::default(); m];
    for r in (0..m).rev() {
        let s: C = (r + 1..m).map(|c| a[r][c] * coef[c]).sum();
        coef[r] = (b[r] - s) / a[r][r];
    }
    coef
}

/// Ordinary least squares line `y = a + b x`; returns `(b, standard error of b, a)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::contract("linear fit needs at least two paired points"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::contract("degenerate abscissa in linear fit"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, se, intercept))
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if let Some(bad) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::contract(format!("non-positive value {} in log-log fit", y[bad])));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::contract("non-positive abscissa in log-log fit"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (s, se, _) = linear_fit(&lx, &ly)?;
    Ok((s, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyfit_recovers_cubic() {
        let x: Vec<f64> = (0..8).map(|i| 0.1 * (i as f64 + 0.5)).collect();
        let y: Vec<C> = x
            .iter()
            .map(|&t| C::new(1.0 - 2.0 * t + t * t * t, 0.5 * t))
            .collect();
        let c = polyfit_complex(&x, &y, 3);
        assert!((c[0] - C::new(1.0, 0.0)).norm() < 1e-12);
        assert!((c[1] - C::new(-2.0, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn loglog_exact_power() {
        let x: Vec<f64> = (1..10).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|t| t.powf(-0.5)).collect();
        let (s, se) = loglog_slope(&x, &y).unwrap();
        assert!((s + 0.5).abs() < 1e-12 && se < 1e-12);
        assert!(loglog_slope(&x, &[0.0; 9]).is_err());
    }
}
