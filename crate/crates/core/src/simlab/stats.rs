//! Small descriptive statistics used by the experiment reports.

/// Linear-interpolation quantile (Hyndman–Fan type 7) of unsorted data.
pub(crate) fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = p.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

/// Ordinary least squares `y ≈ a + b x`, returning `(b, se(b))`.
/// Needs at least three points with distinct `x` for the standard error.
pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let m = x.len();
    if m < 3 || y.len() != m {
        return None;
    }
    let mf = m as f64;
    let mx = x.iter().sum::<f64>() / mf;
    let my = y.iter().sum::<f64>() / mf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = (ssr / (mf - 2.0) / sxx).sqrt();
    Some((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 4.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn exact_line_has_zero_slope_error() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (b, se) = ols_slope(&x, &y).unwrap();
        assert!((b + 0.5).abs() < 1e-15);
        assert!(se < 1e-15);
    }

    #[test]
    fn slope_standard_error_by_hand() {
        // Residuals of the fit to (0,0),(1,1),(2,0) are (-1/3, 2/3, -1/3):
        // slope 0, SSR 2/3, Sxx 2, se = sqrt((2/3)/1/2) = 1/sqrt(3).
        let (b, se) = ols_slope(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!(b.abs() < 1e-15);
        assert!((se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(ols_slope(&[0.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
