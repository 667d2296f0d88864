//! Cylindrical test functions, twisted Birkhoff integrals along special-flow
//! orbits, and the Riesz-product upper bound.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::orbit::{FlowCursor, OrbitPoint};
use crate::flow::SAdicSystem;
use crate::symbolic::{population_vector, Word};

/// `∫_{u0}^{u1} e^{−2πiωu} ψ(u) du` for a user-supplied profile `ψ`.
pub type SegmentIntegral = Arc<dyn Fn(f64, f64, f64) -> Complex64 + Send + Sync>;

/// Profile `ψ_a` on `[0, s_a]`.
#[derive(Clone)]
pub enum Profile {
    /// Piecewise constant: `breaks` are increasing fractions of the interval
    /// in `(0, 1)` and `values` has one more entry than `breaks`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// Arbitrary bounded profile given by its twisted integral in absolute
    /// coordinates.
    Custom { sup: f64, mean: f64, integral: SegmentIntegral },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Piecewise { breaks, values } => {
                f.debug_struct("Piecewise").field("breaks", breaks).field("values", values).finish()
            }
            Profile::Custom { sup, .. } => f.debug_struct("Custom").field("sup", sup).finish(),
        }
    }
}

/// `∫_x^y e^{−2πiωu} du`, written to stay accurate as `ω(y − x) → 0`.
fn exp_integral(omega: f64, x: f64, y: f64) -> Complex64 {
    let d = y - x;
    if omega == 0.0 {
        return Complex64::new(d, 0.0);
    }
    let mid = x + d / 2.0;
    let amp = (PI * omega * d).sin() / (PI * omega);
    Complex64::from_polar(amp, -2.0 * PI * omega * mid)
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Piecewise { breaks: Vec::new(), values: vec![c] }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Parameter("piecewise profile needs one more value than breaks".into()));
        }
        let mut prev = 0.0;
        for &b in &breaks {
            if !(b > prev && b < 1.0) {
                return Err(Error::Parameter(format!("break {b} not increasing in (0, 1)")));
            }
            prev = b;
        }
        Ok(Profile::Piecewise { breaks, values })
    }

    pub fn sup(&self) -> f64 {
        match self {
            Profile::Piecewise { values, .. } => values.iter().fold(0.0, |a, v| a.max(v.abs())),
            Profile::Custom { sup, .. } => *sup,
        }
    }

    /// Mean value over the interval.
    pub fn mean(&self) -> f64 {
        match self {
            Profile::Piecewise { breaks, values } => {
                let mut prev = 0.0;
                let mut acc = 0.0;
                for (k, v) in values.iter().enumerate() {
                    let next = breaks.get(k).copied().unwrap_or(1.0);
                    acc += v * (next - prev);
                    prev = next;
                }
                acc
            }
            Profile::Custom { mean, .. } => *mean,
        }
    }

    /// Value at `u ∈ [0, len)`.
    pub fn value(&self, u: f64, len: f64) -> Option<f64> {
        match self {
            Profile::Piecewise { breaks, values } => {
                let frac = u / len;
                let k = breaks.iter().take_while(|&&b| frac >= b).count();
                Some(values[k])
            }
            Profile::Custom { .. } => None,
        }
    }

    /// `∫_{u0}^{u1} e^{−2πiωu} ψ(u) du` on an interval of length `len`.
    pub fn twisted_integral(&self, omega: f64, u0: f64, u1: f64, len: f64) -> Complex64 {
        match self {
            Profile::Piecewise { breaks, values } => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut lo: f64 = 0.0;
                for (k, &v) in values.iter().enumerate() {
                    let hi = breaks.get(k).map_or(len, |b| b * len);
                    let a = lo.max(u0);
                    let b = hi.min(u1);
                    if b > a && v != 0.0 {
                        acc += exp_integral(omega, a, b) * v;
                    }
                    lo = hi;
                }
                acc
            }
            Profile::Custom { integral, .. } => integral(omega, u0, u1),
        }
    }

    fn shifted(&self, c: f64) -> Result<Profile> {
        match self {
            Profile::Piecewise { breaks, values } => {
                Ok(Profile::Piecewise { breaks: breaks.clone(), values: values.iter().map(|v| v - c).collect() })
            }
            Profile::Custom { .. } => Err(Error::Parameter("cannot recentre a custom profile".into())),
        }
    }
}

/// Bounded cylindrical function of level `ℓ`:
/// `f(x, t) = Σ_a 1_{ζ^[ℓ][a]}(x) ψ_a(t)` with `t ∈ [0, s^(ℓ)_a]`.
#[derive(Clone, Debug)]
pub struct CylFunction {
    pub level: usize,
    pub profiles: Vec<Profile>,
}

impl CylFunction {
    pub fn new(level: usize, profiles: Vec<Profile>) -> Self {
        CylFunction { level, profiles }
    }

    pub fn constant(m: usize, c: f64) -> Self {
        CylFunction { level: 0, profiles: vec![Profile::constant(c); m] }
    }

    /// Indicator of the level-`ℓ` tower over `letter`.
    pub fn indicator(m: usize, level: usize, letter: usize) -> Self {
        let profiles = (0..m).map(|a| Profile::constant(if a == letter { 1.0 } else { 0.0 })).collect();
        CylFunction { level, profiles }
    }

    pub fn sup_norm(&self) -> f64 {
        self.profiles.iter().fold(0.0, |a, p| a.max(p.sup()))
    }

    /// Mean against the normalized flow measure, given `μ⃗_ℓ` and `s^(ℓ)`.
    pub fn mean(&self, mu_level: &[f64], roof_level: &[f64]) -> f64 {
        let mass: f64 = mu_level.iter().zip(roof_level).map(|(m, s)| m * s).sum();
        let integral: f64 =
            self.profiles.iter().zip(mu_level.iter().zip(roof_level)).map(|(p, (m, s))| m * s * p.mean()).sum();
        integral / mass
    }

    /// `f − mean(f)`.
    pub fn centered(&self, mu_level: &[f64], roof_level: &[f64]) -> Result<Self> {
        let c = self.mean(mu_level, roof_level);
        let profiles = self.profiles.iter().map(|p| p.shifted(c)).collect::<Result<Vec<_>>>()?;
        Ok(CylFunction { level: self.level, profiles })
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `S_R(f, ω)` for every `ω` in `omegas` and every `R` in the ascending list
/// `rs`, from a single pass along the orbit of `start`. `roofs[k]` holds
/// `s^(k)` for `k <= f.level`. Returns `out[ω][R]`.
pub fn twisted_birkhoff_grid(
    sys: &SAdicSystem,
    roofs: &[Vec<f64>],
    start: &OrbitPoint,
    f: &CylFunction,
    omegas: &[f64],
    rs: &[f64],
    budget: f64,
) -> Result<Vec<Vec<Complex64>>> {
    if rs.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Parameter("R must be positive".into()));
    }
    if rs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("R grid must be ascending".into()));
    }
    let r_max = rs.last().copied().unwrap_or(0.0);
    if r_max > budget {
        return Err(Error::OrbitBudget { requested: r_max, budget });
    }
    if roofs.len() <= f.level {
        return Err(Error::Parameter(format!("roof vectors missing up to level {}", f.level)));
    }
    let mut cursor = FlowCursor::new(sys, start, roofs, f.level)?;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); rs.len()]; omegas.len()];
    let mut acc = vec![Complex64::new(0.0, 0.0); omegas.len()];
    let mut tau = Kahan::default();
    let mut next_r = 0;
    while next_r < rs.len() {
        let a = cursor.letter() as usize;
        let len = cursor.roof[a];
        let u0 = cursor.t;
        let seg = len - u0;
        let profile = &f.profiles[a];
        while next_r < rs.len() && rs[next_r] <= tau.sum + seg {
            let u1 = u0 + (rs[next_r] - tau.sum);
            for (k, &w) in omegas.iter().enumerate() {
                let phase = Complex64::from_polar(1.0, -2.0 * PI * w * (tau.sum - u0));
                out[k][next_r] = acc[k] + phase * profile.twisted_integral(w, u0, u1, len);
            }
            next_r += 1;
        }
        if next_r == rs.len() {
            break;
        }
        for (k, &w) in omegas.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * w * (tau.sum - u0));
            acc[k] += phase * profile.twisted_integral(w, u0, len, len);
        }
        tau.add(seg);
        cursor.next_segment()?;
    }
    Ok(out)
}

/// `S_R^{(y)}(f, ω) = ∫_0^R e^{−2πiωτ} f(h_τ y) dτ`, integrated exactly
/// segment by segment.
pub fn twisted_birkhoff(
    sys: &SAdicSystem,
    roofs: &[Vec<f64>],
    start: &OrbitPoint,
    f: &CylFunction,
    omega: f64,
    r: f64,
    budget: f64,
) -> Result<Complex64> {
    Ok(twisted_birkhoff_grid(sys, roofs, start, f, &[omega], &[r], budget)?[0][0])
}

/// Distance to the nearest lattice point in the sup norm.
pub fn torus_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - v.round()).abs()).fold(0.0, f64::max)
}

/// Both forms of the Riesz-product factor over `ℓ + 1 <= n < log R / (4θ₁)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RieszBound {
    pub n_lo: usize,
    /// Exclusive upper end of the range.
    pub n_hi: usize,
    /// `1 − c₁ max_v ‖ω |ζ^[n](v)|_s‖²` per `n`.
    pub gr_factors: Vec<f64>,
    /// `1 − c₁ ‖A(n)(ωs)‖²` per `n`.
    pub torus_factors: Vec<f64>,
    pub gr_product: f64,
    pub torus_product: f64,
    /// `‖f‖∞ (R^{1/2} + R^{1+η} Π)` up to the unspecified multiplicative constant.
    pub gr_bound: f64,
    pub torus_bound: f64,
}

/// Evaluates the Riesz-product bound for the twisted integral. `gr` lists
/// good return words of the block substitution; `theta1` is the top
/// Lyapunov exponent of the sequence.
#[allow(clippy::too_many_arguments)]
pub fn riesz_bound(
    sys: &SAdicSystem,
    s: &[f64],
    omega: f64,
    ell: usize,
    r: f64,
    c1: f64,
    theta1: f64,
    eta: f64,
    gr: &[Word],
    f_sup: f64,
) -> Result<RieszBound> {
    if gr.is_empty() {
        return Err(Error::MissingReturnWords);
    }
    if !(theta1 > 0.0) || !(r > 1.0) {
        return Err(Error::Parameter("need θ₁ > 0 and R > 1".into()));
    }
    if !(0.0..=1.0).contains(&c1) {
        return Err(Error::Parameter(format!("c1 = {c1} outside [0, 1]")));
    }
    let m = sys.m();
    let pops: Vec<Vec<f64>> =
        gr.iter().map(|v| population_vector(v, m).0.iter().map(|&c| c as f64).collect()).collect();
    let upper = r.ln() / (4.0 * theta1);
    let n_lo = ell + 1;
    let n_hi = if upper <= n_lo as f64 { n_lo } else { upper.ceil() as usize };
    let levels = sys.roof_levels(s, n_hi)?;
    let mut gr_factors = Vec::new();
    let mut torus_factors = Vec::new();
    for lvl in levels.iter().take(n_hi).skip(n_lo) {
        let x: Vec<f64> = lvl.iter().map(|v| omega * v).collect();
        let gr_max = pops
            .iter()
            .map(|p| {
                let y: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                (y - y.round()).abs()
            })
            .fold(0.0, f64::max);
        gr_factors.push(1.0 - c1 * gr_max * gr_max);
        let t = torus_norm(&x);
        torus_factors.push(1.0 - c1 * t * t);
    }
    let gr_product: f64 = gr_factors.iter().product();
    let torus_product: f64 = torus_factors.iter().product();
    let head = r.sqrt();
    let tail = r.powf(1.0 + eta);
    Ok(RieszBound {
        n_lo,
        n_hi,
        gr_bound: f_sup * (head + tail * gr_product),
        torus_bound: f_sup * (head + tail * torus_product),
        gr_factors,
        torus_factors,
        gr_product,
        torus_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib_setup(s: &[f64]) -> (SAdicSystem, Vec<Vec<f64>>, OrbitPoint) {
        let sys = SAdicSystem::fibonacci();
        let roofs = sys.roof_levels(s, 4).unwrap();
        let mut p = OrbitPoint::at_letter(0);
        p.extend_to(&sys, 3).unwrap();
        p.t = 0.1;
        (sys, roofs, p)
    }

    #[test]
    fn constant_function_zero_frequency() {
        let (sys, roofs, p) = fib_setup(&[1.618, 1.0]);
        let f = CylFunction::constant(2, 1.0);
        for r in [0.05, 3.7, 1234.5] {
            let s = twisted_birkhoff(&sys, &roofs, &p, &f, 0.0, r, 1e9).unwrap();
            assert!((s.re - r).abs() < 1e-9 * r.max(1.0) && s.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_closed_form() {
        let (sys, roofs, p) = fib_setup(&[1.618, 1.0]);
        let f = CylFunction::constant(2, 1.0);
        let omega = 0.37;
        let r = 500.25;
        let s = twisted_birkhoff(&sys, &roofs, &p, &f, omega, r, 1e9).unwrap();
        let i2pw = Complex64::new(0.0, 2.0 * PI * omega);
        let want = (Complex64::new(1.0, 0.0) - (-i2pw * r).exp()) / i2pw;
        assert!((s - want).norm() < 1e-9);
        assert!(s.norm() <= 1.0 / (PI * omega) + 1e-12);
    }

    #[test]
    fn additivity_with_phase() {
        let (sys, roofs, p) = fib_setup(&[1.3, 0.8]);
        let f = CylFunction::new(
            1,
            vec![Profile::piecewise(vec![0.3, 0.7], vec![1.0, -0.5, 2.0]).unwrap(), Profile::constant(-1.0)],
        );
        let omega = 0.91;
        let (r1, r2) = (37.3, 58.9);
        let whole = twisted_birkhoff(&sys, &roofs, &p, &f, omega, r1 + r2, 1e9).unwrap();
        let first = twisted_birkhoff(&sys, &roofs, &p, &f, omega, r1, 1e9).unwrap();
        let mut cur = FlowCursor::new(&sys, &p, &roofs, 0).unwrap();
        cur.advance_time(r1).unwrap();
        let moved = cur.point();
        let second = twisted_birkhoff(&sys, &roofs, &moved, &f, omega, r2, 1e9).unwrap();
        let phase = Complex64::from_polar(1.0, -2.0 * PI * omega * r1);
        assert!((whole - first - phase * second).norm() < 1e-10);
    }

    #[test]
    fn grid_matches_single_calls() {
        let (sys, roofs, p) = fib_setup(&[1.1, 0.9]);
        let f = CylFunction::indicator(2, 2, 0);
        let omegas = [0.4, 1.7];
        let rs = [10.0, 100.0, 1000.0];
        let grid = twisted_birkhoff_grid(&sys, &roofs, &p, &f, &omegas, &rs, 1e9).unwrap();
        for (i, &w) in omegas.iter().enumerate() {
            for (j, &r) in rs.iter().enumerate() {
                let single = twisted_birkhoff(&sys, &roofs, &p, &f, w, r, 1e9).unwrap();
                assert!((grid[i][j] - single).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn budget_enforced() {
        let (sys, roofs, p) = fib_setup(&[1.0, 1.0]);
        let f = CylFunction::constant(2, 1.0);
        assert!(matches!(
            twisted_birkhoff(&sys, &roofs, &p, &f, 1.0, 1e6, 1e3),
            Err(Error::OrbitBudget { .. })
        ));
    }

    #[test]
    fn level_function_equals_expanded_level_zero_function() {
        // A level-1 indicator of the tower over letter 1 on Fibonacci equals
        // the level-0 function that is 1 on both floors of that tower.
        let sys = SAdicSystem::fibonacci();
        let s = [1.25, 0.75];
        let roofs = sys.roof_levels(&s, 2).unwrap();
        let mut p = OrbitPoint::at_letter(1);
        p.extend_to(&sys, 5).unwrap();
        p.t = 0.3;
        let lvl1 = CylFunction::indicator(2, 1, 0);
        let r = 321.0;
        let a = twisted_birkhoff(&sys, &roofs, &p, &lvl1, 0.77, r, 1e9).unwrap();
        // Reference: integrate the level-0 orbit directly with the floor label.
        let mut cur = FlowCursor::new(&sys, &p, &roofs, 0).unwrap();
        let mut tau = 0.0;
        let mut total = Complex64::new(0.0, 0.0);
        while tau < r {
            let pt = cur.point();
            let in_tower_one = pt.letters[1] == 0;
            let len = roofs[0][pt.letters[0] as usize];
            let u0 = cur.t;
            let u1 = (len).min(u0 + (r - tau));
            if in_tower_one {
                let phase = Complex64::from_polar(1.0, -2.0 * PI * 0.77 * (tau - u0));
                total += phase * exp_integral(0.77, u0, u1);
            }
            tau += u1 - u0;
            if tau < r {
                cur.next_segment().unwrap();
            }
        }
        assert!((a - total).norm() < 1e-8, "{a} vs {total}");
    }

    #[test]
    fn riesz_half_lattice_factor() {
        let sys = SAdicSystem::fibonacci();
        let gr = vec![Word(vec![0, 1]), Word(vec![0])];
        let b = riesz_bound(&sys, &[0.5, 0.5], 1.0, 0, 1e8, 1.0, 0.481212, 0.0, &gr, 1.0).unwrap();
        let count = b.n_hi - b.n_lo;
        assert!(count > 3);
        assert!(b.torus_factors.iter().all(|&f| (f - 0.75).abs() < 1e-12));
        assert!((b.torus_product - 0.75f64.powi(count as i32)).abs() < 1e-12);
    }

    #[test]
    fn riesz_eigenvalue_no_decay() {
        let sys = SAdicSystem::fibonacci();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let gr = vec![Word(vec![0, 1])];
        let b = riesz_bound(&sys, &[phi, 1.0], 1.0, 10, 1e40, 0.5, phi.ln(), 0.0, &gr, 1.0).unwrap();
        assert!(b.torus_product > 0.999);
        assert!(b.gr_product > 0.999);
        assert!(b.torus_factors.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn riesz_factors_in_range_and_missing_words() {
        let sys = SAdicSystem::fibonacci();
        let b = riesz_bound(&sys, &[0.9, 1.3], 0.77, 0, 1e12, 0.5, 0.4812, 0.1, &[Word(vec![0])], 2.0).unwrap();
        assert!(b.gr_factors.iter().chain(&b.torus_factors).all(|&f| (0.5..=1.0).contains(&f)));
        assert!(b.gr_bound >= 2.0 * 1e6);
        assert_eq!(
            riesz_bound(&sys, &[1.0, 1.0], 1.0, 0, 1e6, 0.5, 0.48, 0.0, &[], 1.0),
            Err(Error::MissingReturnWords)
        );
    }

    #[test]
    fn centering_removes_mean() {
        let f = CylFunction::indicator(2, 0, 0);
        let mu = [0.618, 0.382];
        let s = [1.0, 1.0];
        let g = f.centered(&mu, &s).unwrap();
        assert!(g.mean(&mu, &s).abs() < 1e-15);
    }
}
