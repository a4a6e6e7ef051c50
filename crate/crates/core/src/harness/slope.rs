use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least squares of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Parameter("slope fit needs paired samples".into()));
    }
    if xs.len() < 4 {
        return Err(Error::Parameter(format!("slope fit needs >= 4 points, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("log-log fit of nonpositive value {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr: (sse / (n - 2.0) / sxx).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (5..=12).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.4)).collect();
        let f = fit_slope(&xs, &ys).unwrap();
        assert!((f.slope + 0.4).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn rejects_short_and_nonpositive() {
        assert!(matches!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), Err(Error::Parameter(_))));
        assert!(matches!(
            fit_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_errors_have_zero_slope() {
        let xs = [32.0, 64.0, 128.0, 256.0, 512.0];
        assert!(fit_slope(&xs, &[0.3; 5]).unwrap().slope.abs() < 1e-14);
    }

    #[test]
    fn noisy_power_law_within_tolerance() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(17);
        let xs: Vec<f64> = (5..=12).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x.powf(-0.4) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            .collect();
        assert!((fit_slope(&xs, &ys).unwrap().slope + 0.4).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn recovers_slope_under_scaling(e in -2.0f64..2.0, c in 0.01f64..100.0) {
            let xs: Vec<f64> = (1..=6).map(|k| 3f64.powi(k)).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(e)).collect();
            prop_assert!((fit_slope(&xs, &ys).unwrap().slope - e).abs() < 1e-9);
        }
    }
}
