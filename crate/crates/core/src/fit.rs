//! Power-law fit of twisted-integral growth and the local spectral-mass
//! bound it implies.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares fit of `log |S_R| = α log R + c` over the upper half of
/// the `R` range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderFit {
    pub alpha: f64,
    /// `2(1 − α)`.
    pub gamma: f64,
    pub intercept: f64,
    /// Smallest `R` used in the fit.
    pub r0: f64,
    /// `max_{R >= R0} |S_R| / R^α` over the sampled values.
    pub c1: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual_rms: f64,
    /// Number of points used.
    pub points: usize,
}

impl HolderFit {
    /// `π² 2^{−2α} C₁² r^{2(1−α)}`, defined for `0 < r <= 1/(2R₀)`.
    pub fn mass_bound(&self, r: f64) -> Option<f64> {
        if !(r > 0.0) || r > 1.0 / (2.0 * self.r0) {
            return None;
        }
        Some(PI * PI * 2f64.powf(-2.0 * self.alpha) * self.c1 * self.c1 * r.powf(2.0 * (1.0 - self.alpha)))
    }
}

/// Fits `α` from samples `(R, |S_R|)`. Needs at least three distinct `R`
/// with positive values; the fit uses the largest `max(3, ⌈n/2⌉)` of them.
pub fn fit_holder(rs: &[f64], values: &[f64]) -> Result<HolderFit> {
    if rs.len() != values.len() {
        return Err(Error::Dimension(format!("{} radii for {} values", rs.len(), values.len())));
    }
    let mut pts: Vec<(f64, f64)> =
        rs.iter().zip(values).filter(|(r, v)| **r > 0.0 && **v > 0.0).map(|(&r, &v)| (r, v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let n = pts.len();
    if n < 3 {
        return Err(Error::DegenerateFit(format!("{n} distinct positive samples, need 3")));
    }
    let k = 3.max(n.div_ceil(2));
    let used = &pts[n - k..];
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let residual_rms =
        (xs.iter().zip(&ys).map(|(x, y)| (y - alpha * x - intercept).powi(2)).sum::<f64>() / k as f64).sqrt();
    let c1 = used.iter().map(|(r, v)| v / r.powf(alpha)).fold(0.0, f64::max);
    Ok(HolderFit { alpha, gamma: 2.0 * (1.0 - alpha), intercept, r0: used[0].0, c1, residual_rms, points: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    #[test]
    fn linear_growth() {
        let rs = log_grid(1e2, 1e6, 12);
        let fit = fit_holder(&rs, &rs).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-12);
        assert!(fit.gamma.abs() < 1e-12);
        assert!((fit.c1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_power_law() {
        let rs = log_grid(1e2, 1e6, 12);
        let vs: Vec<f64> = rs.iter().map(|r| 3.0 * r.powf(0.8)).collect();
        let fit = fit_holder(&rs, &vs).unwrap();
        assert!((fit.alpha - 0.8).abs() < 1e-12);
        assert!((fit.gamma - 0.4).abs() < 1e-12);
        assert_eq!(fit.points, 6);
        assert!((fit.r0 - rs[6]).abs() < 1e-9);
    }

    #[test]
    fn noisy_power_law() {
        // 20 dB SNR: multiplicative noise with standard deviation 0.1.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let rs = log_grid(1e2, 1e6, 24);
        let vs: Vec<f64> = rs.iter().map(|r| r.powf(0.7) * (1.0 + noise.sample(&mut rng))).collect();
        let fit = fit_holder(&rs, &vs).unwrap();
        assert!((fit.alpha - 0.7).abs() < 0.03, "alpha = {}", fit.alpha);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(fit_holder(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_holder(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn bound_range() {
        let rs = log_grid(10.0, 1e4, 8);
        let fit = fit_holder(&rs, &rs).unwrap();
        assert!(fit.mass_bound(1.0 / (2.0 * fit.r0)).is_some());
        assert!(fit.mass_bound(1.0 / fit.r0).is_none());
        let b = fit.mass_bound(1e-5).unwrap();
        assert!((b - PI * PI / 4.0).abs() < 1e-9);
    }
}
