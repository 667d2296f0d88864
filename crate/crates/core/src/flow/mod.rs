//! S-adic shifts and their special flows under a piecewise-constant roof.

mod birkhoff;
mod lipschitz;
mod orbit;
mod spectral;

pub use birkhoff::{
    riesz_bound, torus_norm, twisted_birkhoff, twisted_birkhoff_grid, CylFunction, Profile, RieszBound,
    SegmentIntegral,
};
pub use lipschitz::{weakly_lipschitz_norm, WeakLipschitz};
pub use orbit::{stratified_starts, FlowCursor, OrbitCursor, OrbitPoint};
pub use spectral::{
    correlation_mass, correlation_samples, fejer_energy, spectral_estimate, CorrelationOptions, SpectralEstimate,
    SpectralOptions, SpectralRow,
};

use num_bigint::BigInt;
use serde::Serialize;

use crate::cocycle::SubstitutionSequence;
use crate::error::{Error, Result};
use crate::intmat::IntMatrix;
use crate::symbolic::Substitution;

/// One-sided S-adic system `a⁺ = (ζ_n)_{n >= 1}`.
#[derive(Clone, Debug)]
pub struct SAdicSystem {
    seq: SubstitutionSequence,
}

/// Invariant-measure vectors `μ⃗_0, …, μ⃗_n` with `μ⃗_k = S_{k+1} μ⃗_{k+1}`
/// and `Σ μ⃗_0 = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantMeasure {
    pub levels: Vec<Vec<f64>>,
    /// Length of the positive window found after level `n`.
    pub window: usize,
    /// `‖μ̂_n − S_{n+1} μ̂_{n+1}‖∞` between directions computed independently
    /// at levels `n` and `n + 1` (both normalized to unit ℓ¹ norm).
    pub residual: f64,
}

impl InvariantMeasure {
    /// Letter frequencies `μ([a])`.
    pub fn base(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.levels[l]
    }
}

/// Kakutani–Rokhlin tower data at level `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KrTower {
    pub level: usize,
    /// `|ζ^[n](a)|`, the column sums of `S^[n]`.
    pub heights: Vec<BigInt>,
    pub matrix: IntMatrix,
}

/// Roof vector `s ∈ R^m_+`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoofVector {
    pub s: Vec<f64>,
    pub normalized: bool,
}

impl RoofVector {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(i) = s.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::NonPositiveRoof(i));
        }
        Ok(RoofVector { s, normalized: false })
    }

    pub fn golden() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        RoofVector { s: vec![phi, 1.0], normalized: false }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// `Σ_a μ([a]) s_a`.
    pub fn mass(&self, mu: &[f64]) -> f64 {
        self.s.iter().zip(mu).map(|(s, m)| s * m).sum()
    }
}

/// Scales `s` onto `{Σ_a μ([a]) s_a = 1}`.
pub fn normalize_roof(s: &RoofVector, mu: &[f64]) -> Result<RoofVector> {
    let s = RoofVector::new(s.s.clone())?;
    if mu.len() != s.len() {
        return Err(Error::Dimension(format!("measure of length {} for roof of length {}", mu.len(), s.len())));
    }
    let mass = s.mass(mu);
    Ok(RoofVector { s: s.s.iter().map(|x| x / mass).collect(), normalized: true })
}

fn positive_pattern(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let m = a.len();
    (0..m).map(|i| (0..m).map(|j| (0..m).any(|k| a[i][k] && b[k][j])).collect()).collect()
}

fn normalize_l1(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}

impl SAdicSystem {
    pub fn new(seq: SubstitutionSequence) -> Self {
        SAdicSystem { seq }
    }

    pub fn fibonacci() -> Self {
        SAdicSystem::new(SubstitutionSequence::fibonacci())
    }

    pub fn seq(&self) -> &SubstitutionSequence {
        &self.seq
    }

    pub fn m(&self) -> usize {
        self.seq.alphabet_size()
    }

    /// `ζ_n` for `n >= 1`.
    pub fn sub(&self, n: usize) -> Result<&Substitution> {
        self.seq.get(n as i64)
    }

    /// The system `σ^l a⁺`.
    pub fn shifted(&self, l: usize) -> SAdicSystem {
        SAdicSystem { seq: self.seq.shifted(l as i64) }
    }

    /// `S^[n] = S_1 ⋯ S_n`.
    pub fn composed_matrix(&self, n: usize) -> Result<IntMatrix> {
        let mut acc = IntMatrix::identity(self.m());
        for k in 1..=n {
            acc = &acc * self.sub(k)?.matrix();
        }
        Ok(acc)
    }

    /// `ζ^[n] = ζ_1 ∘ ⋯ ∘ ζ_n`; image lengths grow exponentially in `n`.
    pub fn composed_substitution(&self, n: usize) -> Result<Substitution> {
        if n == 0 {
            return Substitution::identity(self.m());
        }
        let mut acc = self.sub(1)?.clone();
        for k in 2..=n {
            acc = acc.compose(self.sub(k)?)?;
        }
        Ok(acc)
    }

    /// Smallest `k <= depth` with `S_{n+1} ⋯ S_{n+k}` strictly positive.
    pub fn positive_window(&self, n: usize, depth: usize) -> Result<Option<usize>> {
        let m = self.m();
        let mut pattern: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| i == j).collect()).collect();
        for k in 1..=depth {
            let s = self.sub(n + k)?.matrix();
            let step: Vec<Vec<bool>> =
                (0..m).map(|i| (0..m).map(|j| s.get(i, j) > &BigInt::from(0)).collect()).collect();
            pattern = positive_pattern(&pattern, &step);
            if pattern.iter().all(|r| r.iter().all(|&x| x)) {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// Direction of `S_{n+1} ⋯ S_{n+depth} 1`, normalized to unit ℓ¹ norm.
    fn limit_direction(&self, n: usize, depth: usize) -> Result<Vec<f64>> {
        let m = self.m();
        let mut v = vec![1.0 / m as f64; m];
        for k in (n + 1..=n + depth).rev() {
            let s = self.sub(k)?.matrix().to_nalgebra();
            let mut w: Vec<f64> = (0..m).map(|i| (0..m).map(|j| s[(i, j)] * v[j]).sum()).collect();
            normalize_l1(&mut w);
            v = w;
        }
        Ok(v)
    }

    /// `μ⃗_0, …, μ⃗_n`, with `μ⃗_n` taken as the limit direction of the next
    /// `depth` matrices applied to the uniform vector.
    pub fn invariant_measure(&self, n: usize, depth: usize) -> Result<InvariantMeasure> {
        let window = self.positive_window(n, depth)?.ok_or(Error::NoPositiveWindow(depth))?;
        let m = self.m();
        let top = self.limit_direction(n, depth)?;
        let mut levels = vec![top.clone()];
        for k in (1..=n).rev() {
            let s = self.sub(k)?.matrix().to_nalgebra();
            let prev = levels.last().expect("nonempty");
            let v: Vec<f64> = (0..m).map(|i| (0..m).map(|j| s[(i, j)] * prev[j]).sum()).collect();
            levels.push(v);
        }
        levels.reverse();
        let total: f64 = levels[0].iter().sum();
        for lvl in levels.iter_mut() {
            for x in lvl.iter_mut() {
                *x /= total;
            }
        }
        let next = self.limit_direction(n + 1, depth)?;
        let s = self.sub(n + 1)?.matrix().to_nalgebra();
        let mut pushed: Vec<f64> = (0..m).map(|i| (0..m).map(|j| s[(i, j)] * next[j]).sum()).collect();
        normalize_l1(&mut pushed);
        let residual = top.iter().zip(&pushed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(InvariantMeasure { levels, window, residual })
    }

    pub fn kr_tower(&self, n: usize) -> Result<KrTower> {
        let matrix = self.composed_matrix(n)?;
        let heights = (0..self.m()).map(|j| matrix.column(j).into_iter().sum()).collect();
        Ok(KrTower { level: n, heights, matrix })
    }

    /// `s^(l) = (S^[l])ᵗ s`, computed one factor at a time.
    pub fn roof_at_level(&self, s: &[f64], l: usize) -> Result<Vec<f64>> {
        let m = self.m();
        let mut v = s.to_vec();
        for k in 1..=l {
            let st = self.sub(k)?.matrix().to_nalgebra();
            v = (0..m).map(|j| (0..m).map(|i| st[(i, j)] * v[i]).sum()).collect();
        }
        Ok(v)
    }

    /// `s^(0), …, s^(l)`.
    pub fn roof_levels(&self, s: &[f64], l: usize) -> Result<Vec<Vec<f64>>> {
        let m = self.m();
        let mut out = vec![s.to_vec()];
        for k in 1..=l {
            let st = self.sub(k)?.matrix().to_nalgebra();
            let prev = out.last().expect("nonempty");
            out.push((0..m).map(|j| (0..m).map(|i| st[(i, j)] * prev[i]).sum()).collect());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn fibonacci_measure() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(3, 60).unwrap();
        assert!((mu.base()[0] - 1.0 / PHI).abs() < 1e-12);
        assert!((mu.base()[1] - 1.0 / (PHI * PHI)).abs() < 1e-12);
        assert!(mu.residual < 1e-9);
        for k in 0..3 {
            let s = sys.sub(k + 1).unwrap().matrix().to_nalgebra();
            let next = &mu.levels[k + 1];
            for i in 0..2 {
                let v: f64 = (0..2).map(|j| s[(i, j)] * next[j]).sum();
                assert!((v - mu.levels[k][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measure_stable_in_depth() {
        let seq = SubstitutionSequence::periodic(vec![
            Substitution::parse(&["12", "1"]).unwrap(),
            Substitution::parse(&["1", "211"]).unwrap(),
        ])
        .unwrap();
        let sys = SAdicSystem::new(seq);
        let a = sys.invariant_measure(2, 40).unwrap();
        let b = sys.invariant_measure(2, 80).unwrap();
        for (x, y) in a.base().iter().zip(b.base()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_window() {
        let seq = SubstitutionSequence::periodic(vec![Substitution::parse(&["12", "2"]).unwrap()]).unwrap();
        let sys = SAdicSystem::new(seq);
        assert_eq!(sys.invariant_measure(0, 30).map(|_| ()), Err(Error::NoPositiveWindow(30)));
    }

    #[test]
    fn tower_heights() {
        let sys = SAdicSystem::fibonacci();
        let t1 = sys.kr_tower(1).unwrap();
        assert_eq!(t1.heights, vec![BigInt::from(2), BigInt::from(1)]);
        let t8 = sys.kr_tower(8).unwrap();
        let z8 = sys.composed_substitution(8).unwrap();
        let lens: Vec<BigInt> = z8.image_lengths().into_iter().map(BigInt::from).collect();
        assert_eq!(t8.heights, lens);
    }

    #[test]
    fn roof_normalization() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(0, 60).unwrap();
        let one = normalize_roof(&RoofVector::new(vec![1.0, 1.0]).unwrap(), mu.base()).unwrap();
        assert!((one.s[0] - 1.0).abs() < 1e-12 && (one.s[1] - 1.0).abs() < 1e-12);
        let two = normalize_roof(&RoofVector::new(vec![2.0, 2.0]).unwrap(), mu.base()).unwrap();
        assert!((two.s[0] - 1.0).abs() < 1e-12);
        let g = normalize_roof(&RoofVector::golden(), mu.base()).unwrap();
        let scale = 1.0 + 1.0 / (PHI * PHI);
        assert!((g.s[0] - PHI / scale).abs() < 1e-12 && (g.s[1] - 1.0 / scale).abs() < 1e-12);
        assert!((g.mass(mu.base()) - 1.0).abs() < 1e-12);
        assert_eq!(RoofVector::new(vec![1.0, 0.0]), Err(Error::NonPositiveRoof(1)));
    }

    #[test]
    fn golden_roof_is_eigen_direction() {
        let sys = SAdicSystem::fibonacci();
        let s5 = sys.roof_at_level(&RoofVector::golden().s, 5).unwrap();
        assert!((s5[0] - PHI.powi(6)).abs() < 1e-9);
        assert!((s5[1] - PHI.powi(5)).abs() < 1e-9);
    }
}
