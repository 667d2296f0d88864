//! Spectral-measure estimates for a cylindrical function: the `L²` growth
//! of twisted integrals over stratified start points, and an independent
//! estimate from sampled correlations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_holder, HolderFit};
use crate::flow::birkhoff::{twisted_birkhoff_grid, CylFunction};
use crate::flow::orbit::{stratified_starts, FlowCursor};
use crate::flow::{InvariantMeasure, SAdicSystem};

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    pub starts: usize,
    /// Level at which the start points are stratified.
    pub level: usize,
    pub budget: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { starts: 64, level: 8, budget: 1e8 }
    }
}

/// Growth data at one frequency.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralEstimate {
    pub omega: f64,
    pub rs: Vec<f64>,
    /// `‖S_R(f, ω)‖_{L²}`, estimated as the root mean square over the starts.
    pub l2: Vec<f64>,
    /// Mean of `S_R^{(y)}` over the starts.
    pub mean: Vec<(f64, f64)>,
    pub fit: Option<HolderFit>,
}

/// One CSV row: `omega,R,re,im,abs,alpha_fit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralRow {
    pub omega: f64,
    pub r: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub alpha_fit: f64,
}

impl SpectralEstimate {
    /// `|S_R|² / R` for each `R`.
    pub fn energy_density(&self) -> Vec<f64> {
        self.rs.iter().zip(&self.l2).map(|(r, v)| v * v / r).collect()
    }

    pub fn rows(&self) -> Vec<SpectralRow> {
        let alpha = self.fit.as_ref().map_or(f64::NAN, |f| f.alpha);
        self.rs
            .iter()
            .zip(&self.l2)
            .zip(&self.mean)
            .map(|((&r, &abs), &(re, im))| SpectralRow { omega: self.omega, r, re, im, abs, alpha_fit: alpha })
            .collect()
    }
}

/// Estimates `‖S_R(f, ω)‖_{L²}` for every `ω` and `R` and fits the growth
/// exponent per frequency. `roofs` must reach `max(f.level, opts.level)` and
/// `mu` must reach `opts.level`.
pub fn spectral_estimate(
    sys: &SAdicSystem,
    roofs: &[Vec<f64>],
    mu: &InvariantMeasure,
    f: &CylFunction,
    omegas: &[f64],
    rs: &[f64],
    opts: &SpectralOptions,
) -> Result<Vec<SpectralEstimate>> {
    if opts.starts == 0 {
        return Err(Error::Parameter("need at least one start point".into()));
    }
    let starts = stratified_starts(sys, mu, roofs, opts.level, opts.starts)?;
    let per_start: Vec<Vec<Vec<Complex64>>> = starts
        .par_iter()
        .map(|y| twisted_birkhoff_grid(sys, roofs, y, f, omegas, rs, opts.budget))
        .collect::<Result<_>>()?;
    let count = per_start.len() as f64;
    let mut out = Vec::with_capacity(omegas.len());
    for (i, &omega) in omegas.iter().enumerate() {
        let mut l2 = vec![0.0; rs.len()];
        let mut mean = vec![Complex64::new(0.0, 0.0); rs.len()];
        for grid in &per_start {
            for (j, v) in grid[i].iter().enumerate() {
                l2[j] += v.norm_sqr();
                mean[j] += v;
            }
        }
        let l2: Vec<f64> = l2.into_iter().map(|x| (x / count).sqrt()).collect();
        let mean = mean.into_iter().map(|z| (z.re / count, z.im / count)).collect();
        let fit = fit_holder(rs, &l2).ok();
        out.push(SpectralEstimate { omega, rs: rs.to_vec(), l2, mean, fit });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CorrelationOptions {
    /// Sampling step along the orbit.
    pub dt: f64,
    /// Largest lag `T`; correlations are returned for lags `k dt < T`.
    pub horizon: f64,
    /// Length of each sampled orbit segment, in multiples of the horizon.
    pub segment_factor: usize,
    pub starts: usize,
    /// Level at which the start points are stratified.
    pub level: usize,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions { dt: 0.05, horizon: 1000.0, segment_factor: 4, starts: 8, level: 8 }
    }
}

/// Samples of `⟨f∘h_τ, f⟩` at `τ = k dt` for `k dt < T`, each averaged over
/// the orbit segments of the stratified starts.
pub fn correlation_samples(
    sys: &SAdicSystem,
    roofs: &[Vec<f64>],
    mu: &InvariantMeasure,
    f: &CylFunction,
    opts: &CorrelationOptions,
) -> Result<Vec<f64>> {
    if !(opts.dt > 0.0) || !(opts.horizon > opts.dt) || opts.starts == 0 || opts.segment_factor == 0 {
        return Err(Error::Parameter("correlation sampling needs dt > 0, T > dt, starts >= 1".into()));
    }
    if f.profiles.iter().any(|p| p.value(0.0, 1.0).is_none()) {
        return Err(Error::Parameter("correlations need piecewise-constant profiles".into()));
    }
    let lags = (opts.horizon / opts.dt).ceil() as usize;
    let n = lags * (opts.segment_factor + 1);
    let starts = stratified_starts(sys, mu, roofs, opts.level, opts.starts)?;
    let per_start: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|y| {
            let mut cur = FlowCursor::new(sys, y, roofs, f.level)?;
            let mut g = Vec::with_capacity(n);
            for _ in 0..n {
                let a = cur.letter() as usize;
                g.push(f.profiles[a].value(cur.t, cur.roof[a]).expect("piecewise"));
                cur.advance_time(opts.dt)?;
            }
            Ok(autocorrelation(&g, lags))
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; lags];
    for c in &per_start {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|v| v / per_start.len() as f64).collect())
}

/// `C_k = (N − k)^{-1} Σ_j g_{j+k} g_j` for `k < lags`, via zero-padded FFT.
fn autocorrelation(g: &[f64], lags: usize) -> Vec<f64> {
    let n = g.len();
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = g.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    (0..lags.min(n)).map(|k| buf[k].re / size as f64 / (n - k) as f64).collect()
}

/// Fejér-weighted transform `Φ_T(ω) = ∫_{−T}^{T} (1 − |τ|/T) C(τ) e^{−2πiωτ} dτ`
/// of real correlation samples; `E|S_T(f, ω)|² = T Φ_T(ω)`.
pub fn fejer_energy(corr: &[f64], dt: f64, omega: f64) -> f64 {
    let k_max = corr.len() as f64;
    let mut acc = corr[0];
    for (k, c) in corr.iter().enumerate().skip(1) {
        let w = 1.0 - k as f64 / k_max;
        acc += 2.0 * w * c * (2.0 * PI * omega * k as f64 * dt).cos();
    }
    acc * dt
}

/// `σ_f([ω − r, ω + r])` from correlation samples: the interval indicator's
/// Fourier transform paired with the Fejér-tapered correlations.
pub fn correlation_mass(corr: &[f64], dt: f64, omega: f64, r: f64) -> f64 {
    let k_max = corr.len() as f64;
    let mut acc = 2.0 * r * corr[0];
    for (k, c) in corr.iter().enumerate().skip(1) {
        let tau = k as f64 * dt;
        let w = 1.0 - k as f64 / k_max;
        acc += 2.0 * w * c * (2.0 * PI * omega * tau).cos() * (2.0 * PI * r * tau).sin() / (PI * tau);
    }
    acc * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::birkhoff::Profile;

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let g: Vec<f64> = (0..200).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let c = autocorrelation(&g, 30);
        for k in [0, 1, 7, 29] {
            let direct: f64 = (0..200 - k).map(|j| g[j + k] * g[j]).sum::<f64>() / (200 - k) as f64;
            assert!((c[k] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_function_is_point_mass() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(4, 60).unwrap();
        let roofs = sys.roof_levels(&[1.0, 1.0], 4).unwrap();
        let f = CylFunction::constant(2, 1.0);
        let opts = CorrelationOptions { dt: 0.1, horizon: 400.0, segment_factor: 1, starts: 2, level: 4 };
        let corr = correlation_samples(&sys, &roofs, &mu, &f, &opts).unwrap();
        assert!(corr.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let mass = correlation_mass(&corr, opts.dt, 0.0, 0.25);
        assert!((mass - 1.0).abs() < 0.02, "{mass}");
        assert!(correlation_mass(&corr, opts.dt, 2.0, 0.25).abs() < 0.02);
    }

    #[test]
    fn energy_identity_cross_check() {
        let sys = SAdicSystem::fibonacci();
        let s = [1.3, 0.7];
        let mu = sys.invariant_measure(8, 60).unwrap();
        let roofs = sys.roof_levels(&s, 8).unwrap();
        let f = CylFunction::new(0, vec![Profile::constant(1.0), Profile::constant(-1.0)])
            .centered(mu.base(), &roofs[0])
            .unwrap();
        let horizon = 50.0;
        let dt = 0.01;
        let copts = CorrelationOptions { dt, horizon, segment_factor: 20, starts: 16, level: 8 };
        let corr = correlation_samples(&sys, &roofs, &mu, &f, &copts).unwrap();
        let sopts = SpectralOptions { starts: 512, level: 8, budget: 1e6 };
        for omega in [0.3, 0.9] {
            let est = spectral_estimate(&sys, &roofs, &mu, &f, &[omega], &[horizon], &sopts).unwrap();
            let direct = est[0].l2[0].powi(2) / horizon;
            let via_corr = fejer_energy(&corr, dt, omega);
            assert!((direct - via_corr).abs() < 0.15 * direct.max(via_corr) + 0.02, "{direct} vs {via_corr}");
        }
    }

    #[test]
    fn constant_growth_fits_alpha_one() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(6, 60).unwrap();
        let roofs = sys.roof_levels(&[1.0, 1.0], 6).unwrap();
        let f = CylFunction::constant(2, 1.0);
        let rs = [10.0, 100.0, 1000.0, 10000.0];
        let opts = SpectralOptions { starts: 8, level: 6, budget: 1e6 };
        let est = spectral_estimate(&sys, &roofs, &mu, &f, &[0.0], &rs, &opts).unwrap();
        let fit = est[0].fit.as_ref().unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-9);
        let rows = est[0].rows();
        assert_eq!(rows.len(), 4);
        assert!((rows[3].abs - 1e4).abs() < 1e-6);
    }
}
