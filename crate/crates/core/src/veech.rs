//! Torus distances of renormalized frequency vectors: nearest-lattice
//! tracking of `A(n)(ωs)`, the quantitative Veech criterion, good-time
//! densities, Erdős–Kahane covering counts and the lattice constant of a
//! set of good return words.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{unstable_projection, SubstitutionSequence};
use crate::error::{Error, Result};
use crate::intmat::IntMatrix;
use crate::symbolic::{PopulationVector, Substitution, Word};

/// Nearest lattice point and remainder of a real vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusDistance {
    pub k: Vec<i64>,
    pub eps: Vec<f64>,
    /// `‖ε‖∞`, the distance to `Zᵐ` in the sup norm.
    pub dist: f64,
}

/// Componentwise rounding, ties to even.
pub fn torus_distance(v: &[f64]) -> TorusDistance {
    let k: Vec<f64> = v.iter().map(|x| x.round_ties_even()).collect();
    let eps: Vec<f64> = v.iter().zip(&k).map(|(x, r)| x - r).collect();
    let dist = eps.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    TorusDistance { k: k.iter().map(|&r| r as i64).collect(), eps, dist }
}

/// Roof vector given exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactRoof {
    /// Entries read as the dyadic rationals they encode.
    Dyadic(Vec<f64>),
    /// `s = (φ, 1)`.
    Golden,
}

impl ExactRoof {
    pub fn m(&self) -> usize {
        match self {
            ExactRoof::Dyadic(s) => s.len(),
            ExactRoof::Golden => 2,
        }
    }

    pub fn approx(&self) -> Vec<f64> {
        match self {
            ExactRoof::Dyadic(s) => s.clone(),
            ExactRoof::Golden => vec![(1.0 + 5f64.sqrt()) / 2.0, 1.0],
        }
    }
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Parameter(format!("non-finite value {x}")))
}

fn round_rational(x: &BigRational) -> BigInt {
    let two = BigInt::from(2);
    let num = x.numer() * &two + x.denom();
    num.div_floor(&(x.denom() * two))
}

/// `ωs · 2^bits`, rounded, and whether the rounding was exact.
fn fixed_point(omega: f64, roof: &ExactRoof, bits: u32) -> Result<(Vec<BigInt>, bool)> {
    let w = rational(omega)?;
    let scale = BigRational::from_integer(BigInt::one() << bits);
    match roof {
        ExactRoof::Dyadic(s) => {
            let mut exact = true;
            let mut out = Vec::with_capacity(s.len());
            for &x in s {
                let v = &w * rational(x)? * &scale;
                exact &= v.is_integer();
                out.push(round_rational(&v));
            }
            Ok((out, exact))
        }
        ExactRoof::Golden => {
            let guard = 64;
            let p = bits + guard;
            let root5 = (BigInt::from(5) << (2 * p)).sqrt();
            let phi = BigRational::new((BigInt::one() << p) + root5, BigInt::one() << (p + 1));
            let first = round_rational(&(&w * phi * &scale));
            let second = &w * &scale;
            let exact_second = second.is_integer();
            Ok((vec![first, round_rational(&second)], exact_second && omega == 0.0))
        }
    }
}

/// Bits after the binary point needed to hold `ωs` exactly (0 when no
/// finite number suffices).
fn exact_bits(omega: f64, roof: &ExactRoof) -> Result<u32> {
    let ExactRoof::Dyadic(s) = roof else { return Ok(0) };
    let w = rational(omega)?;
    let mut bits = 0;
    for &x in s {
        let d = (&w * rational(x)?).denom().bits();
        bits = bits.max(d.saturating_sub(1) as u32);
    }
    Ok(bits)
}

/// `y / 2^bits` split into nearest integer (ties to even) and remainder.
fn split_fixed(y: &BigInt, bits: u32) -> (BigInt, f64) {
    let unit = BigInt::one() << bits;
    let (mut q, mut r) = y.div_mod_floor(&unit);
    let twice = &r * 2;
    if twice > unit || (twice == unit && q.is_odd()) {
        q += 1;
        r -= &unit;
    }
    let sh = bits.saturating_sub(60);
    let eps = (r >> sh).to_f64().unwrap_or(f64::NAN) * 2f64.powi(-((bits - sh) as i32));
    (q, eps)
}

#[derive(Clone, Debug, Default)]
pub struct EkOptions {
    /// Fixed-point precision; chosen adaptively when `None`.
    pub precision_bits: Option<u32>,
    /// Threshold `ϱ` for the flag column.
    pub rho: f64,
}

/// One step of the nearest-lattice decomposition `A(n)(ωs) = K_n + ε_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EkRow {
    pub n: usize,
    pub k: Vec<BigInt>,
    pub eps: Vec<f64>,
    pub eps_inf: f64,
    /// `W_{n+1}`.
    pub w: f64,
    /// `(1/2) / (1 + e^{W_{n+1}})`.
    pub rho_n: f64,
    /// `(2 + e^{W_{n+1}})^m`.
    pub m_n: BigInt,
    /// `‖ε_n‖∞ >= ϱ`.
    pub flag: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EkTrace {
    pub rows: Vec<EkRow>,
    pub precision_bits: u32,
    /// True when `ωs` was represented without rounding.
    pub exact: bool,
    /// Upper bound on the error of any `ε_n` coordinate.
    pub error_bound: f64,
    pub rho: f64,
    /// Steps where `‖K_{n+1} − A K_n‖∞` exceeded `(1 + ‖A‖)/2`.
    pub branching_violations: Vec<usize>,
    /// Steps where both remainders were below `ρ_n` yet `K_{n+1} ≠ A K_n`.
    pub uniqueness_violations: Vec<usize>,
}

impl EkTrace {
    /// `card{1 <= n <= N : ‖ε_n‖∞ >= ϱ}`.
    pub fn good_times(&self) -> usize {
        self.rows.iter().skip(1).filter(|r| r.flag).count()
    }
}

/// Tracks `K_n, ε_n` for `0 <= n <= N` with exact integer matrices and
/// `ωs` in fixed point. With adaptive precision the rounding error of every
/// `ε_n` stays below `10⁻³ min_n ρ_n`; with a fixed precision that cannot
/// guarantee this, the first offending `n` is reported.
pub fn ek_track(
    seq: &SubstitutionSequence,
    omega: f64,
    roof: &ExactRoof,
    n: usize,
    opts: &EkOptions,
) -> Result<EkTrace> {
    let m = seq.alphabet_size();
    if roof.m() != m {
        return Err(Error::Dimension(format!("roof of length {} for alphabet of size {m}", roof.m())));
    }
    let blocks: Vec<_> = (1..=n as i64 + 1).map(|i| seq.block(i)).collect::<Result<_>>()?;
    let ws: Vec<f64> = blocks.iter().map(|b| b.log_norm).collect();
    let min_rho = ws.iter().map(|w| 0.5 / (1.0 + w.exp())).fold(0.5, f64::min);
    let tol = 1e-3 * min_rho;
    // log2 of Π ‖A_k‖ bounds log2 ‖A(n)‖.
    let mut growth = vec![0.0];
    for w in &ws {
        growth.push(growth.last().expect("nonempty") + w / std::f64::consts::LN_2);
    }
    let needed = (growth[n] + (1.0 / tol).log2()).ceil().max(0.0) as u32 + 16;
    let bits = opts.precision_bits.unwrap_or(needed.max(64).max(exact_bits(omega, roof)?));
    let (mut y, exact) = fixed_point(omega, roof, bits)?;
    let unit_err = if exact { 0.0 } else { 2f64.powi(-(bits as i32)) };
    if !exact {
        if let Some(bad) = (0..=n).find(|&k| 2f64.powf(growth[k]) * unit_err > tol) {
            return Err(Error::PrecisionExhausted(bad));
        }
    }
    let error_bound = 2f64.powf(growth[n]) * unit_err;
    let mut rows = Vec::with_capacity(n + 1);
    let mut branching_violations = Vec::new();
    let mut uniqueness_violations = Vec::new();
    for step in 0..=n {
        let parts: Vec<(BigInt, f64)> = y.iter().map(|v| split_fixed(v, bits)).collect();
        let k: Vec<BigInt> = parts.iter().map(|p| p.0.clone()).collect();
        let eps: Vec<f64> = parts.iter().map(|p| p.1).collect();
        let eps_inf = eps.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let block = blocks[step];
        let norm = block.cocycle.norm_inf();
        let m_n = (BigInt::from(2) + &norm).pow(m as u32);
        let w = block.log_norm;
        let rho_n = 0.5 / (1.0 + w.exp());
        rows.push(EkRow { n: step, k, eps, eps_inf, w, rho_n, m_n, flag: eps_inf >= opts.rho });
        if step < n {
            y = block.cocycle.mul_vec(&y);
        }
    }
    for step in 0..n {
        let a = &blocks[step].cocycle;
        let pushed = a.mul_vec(&rows[step].k);
        let jump = rows[step + 1].k.iter().zip(&pushed).map(|(x, y)| (x - y).abs()).max().unwrap_or_default();
        // ‖d‖∞ <= (1 + ‖A‖)/2  ⇔  2‖d‖∞ <= 1 + ‖A‖.
        if &jump * 2 > BigInt::one() + a.norm_inf() {
            branching_violations.push(step);
        }
        let small = rows[step].eps_inf.max(rows[step + 1].eps_inf) < rows[step].rho_n;
        if small && !jump.is_zero() {
            uniqueness_violations.push(step);
        }
    }
    Ok(EkTrace {
        rows,
        precision_bits: bits,
        exact,
        error_bound,
        rho: opts.rho,
        branching_violations,
        uniqueness_violations,
    })
}

/// Constants of the quantitative Veech criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionParams {
    pub delta: f64,
    pub l1: f64,
    pub c1_tilde: f64,
    pub theta1: f64,
    /// `2 L₁ log(1/δ)`.
    pub k: f64,
    /// `(1/2)/(1 + e^K)`.
    pub rho: f64,
    pub gamma: f64,
}

/// `γ = min{δ/16, −δ log(1 − c̃₁ϱ²)/(8θ₁)}`.
pub fn gamma_for(delta: f64, c1_tilde: f64, rho: f64, theta1: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("δ = {delta} outside (0, 1)")));
    }
    if !(c1_tilde > 0.0 && c1_tilde < 1.0) {
        return Err(Error::Parameter(format!("c̃1 = {c1_tilde} outside (0, 1)")));
    }
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::Parameter(format!("ϱ = {rho} outside (0, 1/2)")));
    }
    if !(theta1 > 0.0) {
        return Err(Error::Parameter(format!("θ1 = {theta1} must be positive")));
    }
    let second = -delta * (-c1_tilde * rho * rho).ln_1p() / (8.0 * theta1);
    Ok((delta / 16.0).min(second))
}

pub fn criterion_constants(delta: f64, l1: f64, c1_tilde: f64, theta1: f64) -> Result<CriterionParams> {
    if !(l1 > 0.0) {
        return Err(Error::Parameter(format!("L1 = {l1} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("δ = {delta} outside (0, 1)")));
    }
    let k = 2.0 * l1 * (1.0 / delta).ln();
    let rho = 0.5 / (1.0 + k.exp());
    let gamma = gamma_for(delta, c1_tilde, rho, theta1)?;
    Ok(CriterionParams { delta, l1, c1_tilde, theta1, k, rho, gamma })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub omega: f64,
    /// `card{1 <= n <= N : ‖A(n)(ωs)‖ >= ϱ}`.
    pub count: usize,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub rho: f64,
    pub n: usize,
    pub rows: Vec<DensityRow>,
    pub min_density: f64,
}

impl DensityReport {
    /// Whether every frequency has at least `δN` good times.
    pub fn satisfies(&self, delta: f64) -> bool {
        self.rows.iter().all(|r| r.count as f64 >= delta * self.n as f64)
    }
}

pub fn good_time_density(
    seq: &SubstitutionSequence,
    roof: &ExactRoof,
    omegas: &[f64],
    rho: f64,
    n: usize,
    precision_bits: Option<u32>,
) -> Result<DensityReport> {
    if n == 0 {
        return Err(Error::Parameter("N must be at least 1".into()));
    }
    let opts = EkOptions { precision_bits, rho };
    let rows: Vec<DensityRow> = omegas
        .par_iter()
        .map(|&omega| {
            let trace = ek_track(seq, omega, roof, n, &opts)?;
            let count = trace.good_times();
            Ok(DensityRow { omega, count, density: count as f64 / n as f64 })
        })
        .collect::<Result<_>>()?;
    let min_density = rows.iter().map(|r| r.density).fold(f64::INFINITY, f64::min);
    Ok(DensityReport { rho, n, rows, min_density })
}

#[derive(Clone, Debug)]
pub struct EkCountOptions {
    /// Frequencies range over `[1/B, B]`.
    pub b: f64,
    /// Letter frequencies `μ([a])`; the roof simplex is `Σ μ_a s_a = 1`.
    pub mu: Vec<f64>,
    /// Maximum number of enumerated sequences.
    pub budget: usize,
}

/// Counts for one exceptional index set `Ψ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyCount {
    pub psi: Vec<usize>,
    pub enumerated: u64,
    /// `#K₀ · Π_{n∈Ψ} (2⌊Υ_n⌋ + 1)^m`.
    pub lattice_points: BigUint,
    /// `#K₀ · Π_{n∈Ψ} M_n`.
    pub bound: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EkCount {
    pub n: usize,
    pub delta: f64,
    pub k0_count: usize,
    pub families: Vec<FamilyCount>,
    /// Number of distinct sequences `K_0, …, K_N` over all families.
    pub distinct: u64,
    /// `log(distinct / #K₀) / N`.
    pub log_rate: f64,
}

impl EkCount {
    pub fn total_bound(&self) -> BigUint {
        self.families.iter().map(|f| f.bound.clone()).sum()
    }
}

/// `L₂` in `Σ_{i<δN} C(N,i) 3^{mδN} e^{m L₁ log(1/δ) δN} <= e^{L₂ log(1/δ) δN}`,
/// using `Σ_{i<=δN} C(N,i) <= e^{N H(δ)}` for `δ <= 1/2`.
pub fn theoretical_l2(delta: f64, m: usize, l1: f64) -> f64 {
    let h = -delta * delta.ln() - (1.0 - delta) * (1.0 - delta).ln();
    let denom = delta * (1.0 / delta).ln();
    (h + m as f64 * delta * 3f64.ln()) / denom + m as f64 * l1
}

/// Integer points whose unit cube meets `{x >= 0, 1/B <= Σ μ_a x_a <= B}`:
/// the possible `K₀` for `ω ∈ [1/B, B]` and `s` on the normalized simplex.
pub fn admissible_k0(mu: &[f64], b: f64) -> Result<Vec<Vec<i64>>> {
    if !(b > 1.0) || mu.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Parameter("need B > 1 and positive frequencies".into()));
    }
    let m = mu.len();
    let caps: Vec<i64> = mu.iter().map(|&x| (b / x + 0.5).floor() as i64).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; m];
    loop {
        let lo: f64 = cur.iter().zip(mu).map(|(&k, &x)| x * (k as f64 - 0.5).max(0.0)).sum();
        let hi: f64 = cur.iter().zip(mu).map(|(&k, &x)| x * (k as f64 + 0.5)).sum();
        if lo <= b && hi >= 1.0 / b {
            out.push(cur.clone());
        }
        let mut i = 0;
        while i < m {
            cur[i] += 1;
            if cur[i] <= caps[i] {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
    }
    Ok(out)
}

fn subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut Vec::new(), &mut out);
    out
}

/// Enumerates the sequences `K_0, …, K_N` allowed by the branching lemma:
/// for each `Ψ ⊂ {0, …, N−1}` with `|Ψ| < δN`, `K_{n+1}` ranges over the
/// lattice points within `(1 + ‖A_{n+1}‖)/2` of `A_{n+1} K_n` when `n ∈ Ψ`
/// and equals `A_{n+1} K_n` otherwise.
pub fn ek_covering_count(seq: &SubstitutionSequence, n: usize, delta: f64, opts: &EkCountOptions) -> Result<EkCount> {
    let m = seq.alphabet_size();
    if opts.mu.len() != m {
        return Err(Error::Dimension("frequency vector length".into()));
    }
    if !(0.0..1.0).contains(&delta) || n == 0 {
        return Err(Error::Parameter("need 0 <= δ < 1 and N >= 1".into()));
    }
    let k0 = admissible_k0(&opts.mu, opts.b)?;
    let mats: Vec<IntMatrix> = (1..=n as i64).map(|i| Ok(seq.block(i)?.cocycle.clone())).collect::<Result<_>>()?;
    let radius: Vec<i64> = mats
        .iter()
        .map(|a| {
            // ⌊(1 + ‖A‖)/2⌋
            ((BigInt::one() + a.norm_inf()) / BigInt::from(2)).to_i64().unwrap_or(i64::MAX)
        })
        .collect();
    let max_size = if delta == 0.0 { 0 } else { ((delta * n as f64) - 1e-12).ceil() as usize - 1 };
    let families_idx = subsets(n, max_size);
    let mut seen: HashSet<Vec<BigInt>> = HashSet::new();
    let mut visited = 0usize;
    let mut families = Vec::with_capacity(families_idx.len());
    for psi in families_idx {
        let mut count = 0u64;
        let mut branch_pts = BigUint::from(k0.len());
        let mut bound = BigUint::from(k0.len());
        for &i in &psi {
            branch_pts *= BigUint::from((2 * radius[i] + 1) as u64).pow(m as u32);
            let norm = mats[i].norm_inf().to_biguint().expect("nonnegative");
            bound *= (BigUint::from(2u8) + norm).pow(m as u32);
        }
        let in_psi: Vec<bool> = (0..n).map(|i| psi.contains(&i)).collect();
        for start in &k0 {
            let first: Vec<BigInt> = start.iter().map(|&x| BigInt::from(x)).collect();
            let mut stack: Vec<Vec<Vec<BigInt>>> = vec![vec![first]];
            while let Some(path) = stack.pop() {
                let step = path.len() - 1;
                if step == n {
                    count += 1;
                    visited += 1;
                    if visited > opts.budget {
                        return Err(Error::BudgetExceeded(format!("more than {} sequences", opts.budget)));
                    }
                    seen.insert(path.concat());
                    continue;
                }
                let centre = mats[step].mul_vec(&path[step]);
                if !in_psi[step] {
                    let mut next = path;
                    next.push(centre);
                    stack.push(next);
                    continue;
                }
                let r = radius[step];
                let width = (2 * r + 1) as usize;
                for code in 0..width.pow(m as u32) {
                    let mut c = code;
                    let mut k = centre.clone();
                    for x in k.iter_mut() {
                        *x += (c % width) as i64 - r;
                        c /= width;
                    }
                    let mut next = path.clone();
                    next.push(k);
                    stack.push(next);
                }
            }
        }
        families.push(FamilyCount { psi, enumerated: count, lattice_points: branch_pts, bound });
    }
    let distinct = seen.len() as u64;
    let log_rate = ((distinct as f64) / k0.len() as f64).ln() / n as f64;
    Ok(EkCount { n, delta, k0_count: k0.len(), families, distinct, log_rate })
}

/// Constant `C_ζ` with
/// `C_ζ⁻¹ ‖x‖ <= max_j ‖⟨ℓ(v_j), x⟩‖_{R/Z} <= C_ζ ‖x‖` on the torus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeConstant {
    /// `max_j ‖ℓ(v_j)‖₁`.
    pub right: u64,
    /// `max_i Σ_j |a_ij|` for integers with `Σ_j a_ij ℓ(v_j) = e_i`.
    pub left: BigInt,
    pub c: f64,
    /// `coefficients[i][j] = a_ij`.
    pub coefficients: Vec<Vec<BigInt>>,
    pub populations: Vec<PopulationVector>,
}

pub fn lattice_constant_from_populations(pops: &[PopulationVector], m: usize) -> Result<LatticeConstant> {
    if pops.is_empty() {
        return Err(Error::MissingReturnWords);
    }
    let cols: Vec<Vec<BigInt>> = pops.iter().map(PopulationVector::to_bigint).collect();
    let l = IntMatrix::from_columns(&cols)?;
    if l.rows() != m {
        return Err(Error::Dimension(format!("population vectors of length {} for m = {m}", l.rows())));
    }
    let x = crate::intmat::HermiteForm::compute(&l)
        .right_inverse()
        .ok_or_else(|| Error::LatticeNotFull(format!("{} population vectors", pops.len())))?;
    let k = pops.len();
    let coefficients: Vec<Vec<BigInt>> = (0..m).map(|i| (0..k).map(|j| x.get(j, i).clone()).collect()).collect();
    let left = coefficients.iter().map(|row| row.iter().map(|a| a.abs()).sum::<BigInt>()).max().unwrap_or_default();
    let right = pops.iter().map(|p| p.total()).max().unwrap_or(0);
    let c = (right as f64).max(left.to_f64().unwrap_or(f64::INFINITY));
    Ok(LatticeConstant { right, left, c, coefficients, populations: pops.to_vec() })
}

/// `C_ζ` for the population vectors of the given good return words.
pub fn lattice_constant(zeta: &Substitution, grws: &[Word]) -> Result<LatticeConstant> {
    let m = zeta.alphabet_size();
    let pops: Vec<PopulationVector> = grws.iter().map(|w| crate::symbolic::population_vector(w, m)).collect();
    lattice_constant_from_populations(&pops, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeCheck {
    pub samples: usize,
    pub left_violations: usize,
    pub right_violations: usize,
    /// Smallest observed `max_j ‖⟨ℓ_j, x⟩‖ / ‖x‖`.
    pub min_ratio: f64,
    pub max_ratio: f64,
}

fn circle_dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Samples `x` uniformly in `[−1/2, 1/2]^m` (half of them scaled towards
/// the origin) and tests both inequalities.
pub fn verify_lattice_constant(lc: &LatticeConstant, samples: usize, seed: u64) -> LatticeCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = lc.coefficients.len();
    let pops: Vec<Vec<f64>> = lc.populations.iter().map(|p| p.0.iter().map(|&c| c as f64).collect()).collect();
    let mut check =
        LatticeCheck { samples, left_violations: 0, right_violations: 0, min_ratio: f64::INFINITY, max_ratio: 0.0 };
    for i in 0..samples {
        let scale = if i % 2 == 0 { 1.0 } else { 10f64.powf(-rng.gen_range(0.0..6.0)) };
        let x: Vec<f64> = (0..m).map(|_| scale * rng.gen_range(-0.5..0.5)).collect();
        let norm = x.iter().map(|&v| circle_dist(v)).fold(0.0, f64::max);
        if norm == 0.0 {
            continue;
        }
        let inner = pops
            .iter()
            .map(|p| circle_dist(p.iter().zip(&x).map(|(a, b)| a * b).sum()))
            .fold(0.0, f64::max);
        let slack = 1e-12;
        if inner > lc.c * norm * (1.0 + slack) {
            check.right_violations += 1;
        }
        if norm > lc.c * inner * (1.0 + slack) + slack {
            check.left_violations += 1;
        }
        let ratio = inner / norm;
        check.min_ratio = check.min_ratio.min(ratio);
        check.max_ratio = check.max_ratio.max(ratio);
    }
    check
}

/// Distance between the unstable projection of `ωs` and its estimate from
/// `K_n`, at one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnstableErrorRow {
    pub n: usize,
    /// `‖P^u_a(ωs) − A(n)⁻¹ P^u_{σⁿa} K_n‖∞` computed directly; `NaN` once
    /// `A(n)` is too large for double precision.
    pub direct: f64,
    /// The same quantity as `‖A(n)⁻¹ P^u_{σⁿa} ε_n‖∞`, pulled back one
    /// factor at a time.
    pub via_remainder: f64,
}

/// Error series for the unstable-projection estimate along an `ek_track`.
/// `n_back` controls how far the projections are computed into the past
/// and future.
pub fn unstable_error_series(
    seq: &SubstitutionSequence,
    trace: &EkTrace,
    omega: f64,
    roof: &ExactRoof,
    kappa: usize,
    n_back: usize,
) -> Result<Vec<UnstableErrorRow>> {
    let m = seq.alphabet_size();
    let x = DVector::from_iterator(m, roof.approx().into_iter().map(|v| omega * v));
    let p0 = unstable_projection(seq, n_back, kappa)?;
    let target = p0.apply(&x);
    let mut out = Vec::with_capacity(trace.rows.len());
    let mut product = DMatrix::<f64>::identity(m, m);
    let mut exact_product = IntMatrix::identity(m);
    for row in &trace.rows {
        let n = row.n;
        if n > 0 {
            let a = &seq.block(n as i64)?.cocycle;
            exact_product = a * &exact_product;
            product = a.to_nalgebra() * product;
        }
        let pn = unstable_projection(&seq.shifted(n as i64), n_back, kappa)?;
        let eps = DVector::from_vec(row.eps.clone());
        let mut v = pn.apply(&eps);
        for k in (1..=n).rev() {
            let a = seq.block(k as i64)?.cocycle.to_nalgebra();
            v = a.lu().solve(&v).ok_or(Error::NotInvertible)?;
        }
        let via_remainder = v.amax();
        let direct = if exact_product.log_norm_inf() < 40.0 * std::f64::consts::LN_2 {
            let kf = DVector::from_iterator(m, row.k.iter().map(|k| k.to_f64().unwrap_or(f64::NAN)));
            match product.clone().lu().solve(&pn.apply(&kf)) {
                Some(est) => (&target - est).amax(),
                None => f64::NAN,
            }
        } else {
            f64::NAN
        };
        out.push(UnstableErrorRow { n, direct, via_remainder });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn torus_examples() {
        let t = torus_distance(&[2.3, 0.4]);
        assert_eq!(t.k, vec![2, 0]);
        assert!((t.eps[0] - 0.3).abs() < 1e-12 && (t.eps[1] - 0.4).abs() < 1e-15);
        assert!((t.dist - 0.4).abs() < 1e-15);
        assert_eq!(torus_distance(&[3.0, -7.0]).dist, 0.0);
        assert_eq!(torus_distance(&[2.5, 3.5]).k, vec![2, 4]);
    }

    #[test]
    fn fixed_split_rounds_to_even() {
        let bits = 4;
        let (q, e) = split_fixed(&BigInt::from(40), bits); // 2.5
        assert_eq!(q, BigInt::from(2));
        assert_eq!(e, 0.5);
        let (q, e) = split_fixed(&BigInt::from(-24), bits); // -1.5
        assert_eq!(q, BigInt::from(-2));
        assert_eq!(e, 0.5);
        let (q, e) = split_fixed(&BigInt::from(-21), bits); // -1.3125
        assert_eq!(q, BigInt::from(-1));
        assert_eq!(e, -0.3125);
    }

    #[test]
    fn golden_trace_decays() {
        let seq = SubstitutionSequence::fibonacci();
        let t = ek_track(&seq, 1.0, &ExactRoof::Golden, 60, &EkOptions { precision_bits: None, rho: 0.05 }).unwrap();
        assert!(!t.exact);
        for n in 5..40 {
            let ratio = t.rows[n + 1].eps[1] / t.rows[n].eps[1];
            assert!((ratio + 1.0 / PHI).abs() < 1e-5, "n = {n}: {ratio}");
        }
        assert!(t.rows[40].eps_inf < 1e-8);
        assert!(t.branching_violations.is_empty() && t.uniqueness_violations.is_empty());
    }

    #[test]
    fn fixed_precision_can_run_out() {
        let seq = SubstitutionSequence::fibonacci();
        let r = ek_track(&seq, 1.0, &ExactRoof::Golden, 200, &EkOptions { precision_bits: Some(64), rho: 0.05 });
        assert!(matches!(r, Err(Error::PrecisionExhausted(n)) if n > 10 && n < 200));
    }

    #[test]
    fn dyadic_input_is_exact_and_reconstructs() {
        let seq = SubstitutionSequence::periodic(vec![
            Substitution::parse(&["12", "1"]).unwrap(),
            Substitution::parse(&["1", "21"]).unwrap(),
        ])
        .unwrap();
        let s = vec![0.7312, 1.1957];
        let omega = 0.83;
        let t = ek_track(&seq, omega, &ExactRoof::Dyadic(s.clone()), 30, &EkOptions { precision_bits: None, rho: 0.1 })
            .unwrap();
        assert!(t.exact);
        assert_eq!(t.error_bound, 0.0);
        // Independent recomputation with exact rationals.
        let mut x: Vec<BigRational> = s.iter().map(|&v| rational(omega).unwrap() * rational(v).unwrap()).collect();
        for row in &t.rows {
            for (i, xi) in x.iter().enumerate() {
                let recon = BigRational::from_integer(row.k[i].clone()) + rational(row.eps[i]).unwrap();
                let diff = (xi - recon).abs().to_f64().unwrap();
                assert!(diff < 1e-15, "n = {}: {diff}", row.n);
            }
            let a = &seq.block(row.n as i64 + 1).unwrap().cocycle;
            x = (0..2)
                .map(|i| (0..2).map(|j| BigRational::from_integer(a.get(i, j).clone()) * &x[j]).sum())
                .collect();
        }
    }

    #[test]
    fn criterion_examples() {
        let p = criterion_constants(0.1, 1.0, 0.5, 1.0).unwrap();
        assert!((p.k - 2.0 * 10f64.ln()).abs() < 1e-12);
        assert!((p.rho - 0.5 / 101.0).abs() < 1e-12);
        assert!((p.rho - 0.004_950_495).abs() < 1e-9);
        let g = gamma_for(0.1, 0.5, 0.25, 1.0).unwrap();
        assert!((g - 0.1 * -(1.0f64 - 0.5 * 0.0625).ln() / 8.0).abs() < 1e-15);
        assert!((g - 3.9686e-4).abs() < 1e-7);
        assert!(p.gamma <= p.delta / 16.0);
        assert!(criterion_constants(1.5, 1.0, 0.5, 1.0).is_err());
        assert!(gamma_for(0.1, 1.0, 0.25, 1.0).is_err());
    }

    #[test]
    fn golden_density_vanishes() {
        let seq = SubstitutionSequence::fibonacci();
        let r = good_time_density(&seq, &ExactRoof::Golden, &[1.0], 0.05, 300, None).unwrap();
        assert!(r.rows[0].count <= 8);
        assert!(r.min_density < 0.03);
    }

    #[test]
    fn density_monotone_in_threshold() {
        let seq = SubstitutionSequence::fibonacci();
        let roof = ExactRoof::Dyadic(vec![0.8123, 1.3311]);
        let omegas = [0.6, 1.1, 1.7];
        let mut prev = f64::INFINITY;
        for rho in [0.01, 0.05, 0.1, 0.2, 0.4] {
            let r = good_time_density(&seq, &roof, &omegas, rho, 200, None).unwrap();
            assert!(r.min_density <= prev);
            prev = r.min_density;
        }
    }

    #[test]
    fn covering_count_without_branching() {
        let seq = SubstitutionSequence::fibonacci();
        let opts = EkCountOptions { b: 2.0, mu: vec![1.0 / PHI, 1.0 / (PHI * PHI)], budget: 100_000 };
        let c = ek_covering_count(&seq, 12, 0.0, &opts).unwrap();
        assert_eq!(c.families.len(), 1);
        assert_eq!(c.distinct, c.k0_count as u64);
        assert_eq!(c.log_rate, 0.0);
    }

    #[test]
    fn covering_count_small() {
        let seq = SubstitutionSequence::fibonacci();
        let opts = EkCountOptions { b: 2.0, mu: vec![1.0 / PHI, 1.0 / (PHI * PHI)], budget: 1_000_000 };
        let c = ek_covering_count(&seq, 10, 0.2, &opts).unwrap();
        assert_eq!(c.families.len(), 11);
        for f in &c.families {
            assert_eq!(BigUint::from(f.enumerated), f.lattice_points);
            assert!(f.lattice_points <= f.bound);
        }
        assert!(BigUint::from(c.distinct) <= c.total_bound());
        assert!(matches!(
            ek_covering_count(&seq, 10, 0.2, &EkCountOptions { budget: 10, ..opts }),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn k0_cubes_meet_the_slab() {
        let mu = [0.6, 0.4];
        let pts = admissible_k0(&mu, 2.0).unwrap();
        assert!(pts.contains(&vec![0, 0]));
        assert!(pts.contains(&vec![1, 1]));
        assert!(!pts.contains(&vec![5, 0]));
        assert!(pts.contains(&vec![3, 0]));
    }

    #[test]
    fn lattice_constant_examples() {
        let id = lattice_constant_from_populations(&[PopulationVector(vec![1, 0]), PopulationVector(vec![0, 1])], 2)
            .unwrap();
        assert_eq!(id.c, 1.0);
        let lc = lattice_constant_from_populations(&[PopulationVector(vec![2, 1]), PopulationVector(vec![1, 1])], 2)
            .unwrap();
        assert_eq!(lc.right, 3);
        assert_eq!(lc.left, BigInt::from(3));
        assert_eq!(lc.c, 3.0);
        let check = verify_lattice_constant(&lc, 2000, 1);
        assert_eq!(check.left_violations + check.right_violations, 0);
        assert!(matches!(
            lattice_constant_from_populations(&[PopulationVector(vec![2, 0]), PopulationVector(vec![0, 1])], 2),
            Err(Error::LatticeNotFull(_))
        ));
    }

    #[test]
    fn unstable_error_decays_for_generic_point() {
        let seq = SubstitutionSequence::fibonacci();
        let roof = ExactRoof::Dyadic(vec![0.8123, 1.3311]);
        let t = ek_track(&seq, 0.9, &roof, 40, &EkOptions { precision_bits: None, rho: 0.05 }).unwrap();
        let rows = unstable_error_series(&seq, &t, 0.9, &roof, 1, 60).unwrap();
        for r in rows.iter().filter(|r| r.n >= 2 && r.n <= 25) {
            // The direct route loses about cond(A(n)) ≈ φ^{2n} relative digits.
            assert!((r.direct - r.via_remainder).abs() < 1e-14 * PHI.powi(3 * r.n as i32), "{r:?}");
            assert!(r.via_remainder <= PHI.powi(-(r.n as i32)) + 1e-12);
        }
    }
}
