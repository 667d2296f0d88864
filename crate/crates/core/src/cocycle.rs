//! Substitution sequences and the renormalization cocycle
//! `A(n, a) = A(σ^{n−1} a) ⋯ A(a)` with `A(a) = S_{ζ_1}ᵗ`.
//!
//! Norms are ℓ∞ operator norms (maximum absolute row sum) throughout, so
//! `W_n = log ‖A(a_n)‖` is the log of the longest image length in block `n`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intmat::IntMatrix;
use crate::symbolic::Substitution;

/// One symbol of a sequence: a substitution with cached cocycle data.
#[derive(Clone, Debug)]
pub struct Block {
    pub substitution: Substitution,
    /// `A = Sᵗ`.
    pub cocycle: IntMatrix,
    pub log_norm: f64,
    /// Number of underlying steps the block stands for (1 unless induced or
    /// built from a multi-edge path).
    pub steps: usize,
    pub name: String,
}

impl Block {
    pub fn new(substitution: Substitution, steps: usize, name: impl Into<String>) -> Self {
        let cocycle = substitution.cocycle_matrix();
        let log_norm = cocycle.log_norm_inf();
        Block { substitution, cocycle, log_norm, steps, name: name.into() }
    }

    pub fn single(substitution: Substitution) -> Self {
        let name = format!("{substitution:?}");
        Block::new(substitution, 1, name)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Indexing {
    Periodic,
    Iid { seed: u64 },
    Explicit { forward: Vec<usize>, backward: Vec<usize> },
}

/// Two-sided sequence `… ζ_{−1} ζ_0 . ζ_1 ζ_2 …` drawn from a finite list of
/// blocks.
///
/// * periodic: `ζ_n = blocks[(n − 1) mod p]` for all `n ∈ Z`;
/// * i.i.d.: uniform over the blocks, with index `n` read from a ChaCha8
///   stream at a fixed position (stream 0 for `n >= 1`, stream 1 for
///   `n <= 0`), so any index is reproducible without generating the prefix;
/// * explicit: `forward[n − 1]` for `n >= 1` and `backward[−n]` for `n <= 0`.
#[derive(Clone, Debug)]
pub struct SubstitutionSequence {
    m: usize,
    blocks: Vec<Block>,
    indexing: Indexing,
    offset: i64,
    induced_by: Option<Substitution>,
}

impl SubstitutionSequence {
    fn from_blocks(blocks: Vec<Block>, indexing: Indexing) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::Degenerate("empty block list".into()))?;
        let m = first.substitution.alphabet_size();
        if let Some(b) = blocks.iter().find(|b| b.substitution.alphabet_size() != m) {
            return Err(Error::AlphabetMismatch(m, b.substitution.alphabet_size()));
        }
        Ok(SubstitutionSequence { m, blocks, indexing, offset: 0, induced_by: None })
    }

    pub fn periodic(subs: Vec<Substitution>) -> Result<Self> {
        Self::from_blocks(subs.into_iter().map(Block::single).collect(), Indexing::Periodic)
    }

    pub fn periodic_blocks(blocks: Vec<Block>) -> Result<Self> {
        Self::from_blocks(blocks, Indexing::Periodic)
    }

    pub fn iid(subs: Vec<Substitution>, seed: u64) -> Result<Self> {
        Self::from_blocks(subs.into_iter().map(Block::single).collect(), Indexing::Iid { seed })
    }

    pub fn iid_blocks(blocks: Vec<Block>, seed: u64) -> Result<Self> {
        Self::from_blocks(blocks, Indexing::Iid { seed })
    }

    /// `forward = [ζ_1, ζ_2, …]`, `backward = [ζ_0, ζ_{−1}, …]`.
    pub fn explicit(forward: Vec<Substitution>, backward: Vec<Substitution>) -> Result<Self> {
        let nf = forward.len();
        let blocks: Vec<Block> = forward.into_iter().chain(backward).map(Block::single).collect();
        let nb = blocks.len() - nf;
        Self::from_blocks(
            blocks,
            Indexing::Explicit { forward: (0..nf).collect(), backward: (nf..nf + nb).collect() },
        )
    }

    pub fn fibonacci() -> Self {
        Self::periodic(vec![Substitution::fibonacci()]).expect("fibonacci sequence")
    }

    /// Replaces every block `p` by `q ∘ p ∘ q`, the form of the sequence
    /// induced on the two-sided cylinder of a simple word `q`.
    pub fn induced(&self, q: &Block) -> Result<Self> {
        if q.substitution.alphabet_size() != self.m {
            return Err(Error::AlphabetMismatch(self.m, q.substitution.alphabet_size()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let z = q.substitution.compose(&b.substitution)?.compose(&q.substitution)?;
                Ok(Block::new(z, 2 * q.steps + b.steps, format!("q.{}.q", b.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SubstitutionSequence {
            m: self.m,
            blocks,
            indexing: self.indexing.clone(),
            offset: self.offset,
            induced_by: Some(q.substitution.clone()),
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn is_induced(&self) -> bool {
        self.induced_by.is_some()
    }

    pub fn inducing_word(&self) -> Option<&Substitution> {
        self.induced_by.as_ref()
    }

    pub fn is_periodic(&self) -> bool {
        self.indexing == Indexing::Periodic
    }

    pub fn period(&self) -> Option<usize> {
        self.is_periodic().then_some(self.blocks.len())
    }

    /// The shifted sequence `σⁿ a`.
    pub fn shifted(&self, n: i64) -> Self {
        let mut s = self.clone();
        s.offset += n;
        s
    }

    fn draw(rng: &mut ChaCha8Rng, k: usize) -> usize {
        ((rng.next_u64() as u128 * k as u128) >> 64) as usize
    }

    fn iid_rng(seed: u64, i: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if i >= 1 {
            rng.set_stream(0);
            rng.set_word_pos(2 * (i as u128 - 1));
        } else {
            rng.set_stream(1);
            rng.set_word_pos(2 * ((-i) as u128));
        }
        rng
    }

    /// Block index of `ζ_i`.
    pub fn symbol(&self, i: i64) -> Result<usize> {
        let i = i + self.offset;
        match &self.indexing {
            Indexing::Periodic => Ok((i - 1).rem_euclid(self.blocks.len() as i64) as usize),
            Indexing::Iid { seed } => Ok(Self::draw(&mut Self::iid_rng(*seed, i), self.blocks.len())),
            Indexing::Explicit { forward, backward } => {
                let idx = if i >= 1 { forward.get((i - 1) as usize) } else { backward.get((-i) as usize) };
                idx.copied().ok_or(Error::SequenceIndex(i))
            }
        }
    }

    /// Block indices of `ζ_from, ζ_{from+1}, …` (`count` of them).
    pub fn symbols(&self, from: i64, count: usize) -> Result<Vec<usize>> {
        let start = from + self.offset;
        if let Indexing::Iid { seed } = self.indexing {
            if start >= 1 {
                let mut rng = Self::iid_rng(seed, start);
                return Ok((0..count).map(|_| Self::draw(&mut rng, self.blocks.len())).collect());
            }
        }
        (0..count as i64).map(|k| self.symbol(from + k)).collect()
    }

    pub fn block(&self, i: i64) -> Result<&Block> {
        Ok(&self.blocks[self.symbol(i)?])
    }

    pub fn get(&self, i: i64) -> Result<&Substitution> {
        Ok(&self.block(i)?.substitution)
    }

    /// `W_i = log ‖A(ζ_i)‖`.
    pub fn w(&self, i: i64) -> Result<f64> {
        Ok(self.block(i)?.log_norm)
    }

    /// Mean number of underlying steps per block over `1..=n`; divide an
    /// exponent per block by this to express it per underlying step.
    pub fn mean_steps(&self, n: usize) -> Result<f64> {
        let syms = self.symbols(1, n.max(1))?;
        Ok(syms.iter().map(|&s| self.blocks[s].steps as f64).sum::<f64>() / syms.len() as f64)
    }
}

/// `A(n, a)` with its log-norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CocycleProduct {
    pub n: i64,
    pub matrix: IntMatrix,
    pub log_norm: f64,
}

/// Exact cocycle product. For `n < 0`,
/// `A(n, a) = A(−n, σⁿ a)⁻¹ = (S_{ζ_{n+1}} ⋯ S_{ζ_0})^{−ᵗ}`, available only
/// when every factor is unimodular.
pub fn cocycle_product(seq: &SubstitutionSequence, n: i64) -> Result<CocycleProduct> {
    let m = seq.alphabet_size();
    let matrix = if n >= 0 {
        let mut acc = CocycleAccumulator::new(seq);
        for _ in 0..n {
            acc.push()?;
        }
        acc.matrix
    } else {
        let mut acc = IntMatrix::identity(m);
        for i in (n + 1)..=0 {
            acc = &seq.block(i)?.cocycle * &acc;
        }
        acc.inverse_unimodular()?
    };
    let log_norm = matrix.log_norm_inf();
    Ok(CocycleProduct { n, matrix, log_norm })
}

/// Incremental `A(n, a)`: each [`push`](Self::push) multiplies on the left
/// by the next factor.
#[derive(Clone, Debug)]
pub struct CocycleAccumulator<'a> {
    seq: &'a SubstitutionSequence,
    pub n: i64,
    pub matrix: IntMatrix,
}

impl<'a> CocycleAccumulator<'a> {
    pub fn new(seq: &'a SubstitutionSequence) -> Self {
        CocycleAccumulator { seq, n: 0, matrix: IntMatrix::identity(seq.alphabet_size()) }
    }

    pub fn push(&mut self) -> Result<&IntMatrix> {
        let block = self.seq.block(self.n + 1)?;
        self.matrix = &block.cocycle * &self.matrix;
        self.n += 1;
        Ok(&self.matrix)
    }

    pub fn product(&self) -> CocycleProduct {
        CocycleProduct { n: self.n, matrix: self.matrix.clone(), log_norm: self.matrix.log_norm_inf() }
    }
}

/// Log-norm series `W_1, …, W_{N+1}` and the statistics built on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WStat {
    /// `w[k] = W_{k+1}`.
    pub w: Vec<f64>,
    pub n: usize,
}

/// Empirical tail statistics for one value of `δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub delta: f64,
    /// `max Σ_{n∈Ψ} W_{n+1}` over `Ψ ⊂ {1..N}`, `|Ψ| <= δN`.
    pub max_sum: f64,
    /// `max_sum / (log(1/δ) δ N)`.
    pub ratio: f64,
}

pub fn w_series(seq: &SubstitutionSequence, n: usize) -> Result<WStat> {
    if n == 0 {
        return Err(Error::Parameter("N must be at least 1".into()));
    }
    let syms = seq.symbols(1, n + 1)?;
    let w = syms.iter().map(|&s| seq.blocks[s].log_norm).collect();
    Ok(WStat { w, n })
}

impl WStat {
    /// `W_k` for `1 <= k <= N + 1`.
    pub fn get(&self, k: usize) -> f64 {
        self.w[k - 1]
    }

    /// Sum of the `⌊δN⌋` largest of `W_2, …, W_{N+1}`; by rearrangement this
    /// is the maximum over all index sets of size at most `δN`.
    pub fn max_sum(&self, delta: f64) -> f64 {
        let k = ((delta * self.n as f64) + 1e-9).floor() as usize;
        let mut tail: Vec<f64> = self.w[1..].to_vec();
        tail.sort_by(|a, b| b.total_cmp(a));
        tail.iter().take(k).sum()
    }

    pub fn tail_row(&self, delta: f64) -> TailRow {
        let max_sum = self.max_sum(delta);
        let denom = (1.0 / delta).ln() * delta * self.n as f64;
        TailRow { delta, max_sum, ratio: max_sum / denom }
    }

    /// `L_1` fitted as the largest ratio over the `δ` grid.
    pub fn fit_l1(&self, deltas: &[f64]) -> Result<f64> {
        let valid: Vec<f64> = deltas.iter().copied().filter(|&d| d > 0.0 && d < 1.0).collect();
        if valid.is_empty() {
            return Err(Error::Parameter("delta grid must contain values in (0, 1)".into()));
        }
        Ok(valid.iter().map(|&d| self.tail_row(d).ratio).fold(0.0, f64::max))
    }

    /// `card{n <= N : W_{n+1} > C L_1 log(1/δ)}`.
    pub fn exceedance_count(&self, c: f64, l1: f64, delta: f64) -> usize {
        let thr = c * l1 * (1.0 / delta).ln();
        self.w[1..].iter().filter(|&&x| x > thr).count()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let mut v = self.w.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        let idx = ((q.clamp(0.0, 1.0)) * (v.len() - 1) as f64).round() as usize;
        v[idx]
    }

    pub fn mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }

    /// Empirical `ε`-moment `mean ‖A(a_n)‖^ε = mean e^{ε W_n}`.
    pub fn moment(&self, eps: f64) -> f64 {
        self.w.iter().map(|&x| (eps * x).exp()).sum::<f64>() / self.w.len() as f64
    }
}

/// Lyapunov exponents of the cocycle, per block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Mean over trials, decreasing.
    pub exponents: Vec<f64>,
    /// Per-exponent standard deviation across trials.
    pub errors: Vec<f64>,
    pub per_trial: Vec<Vec<f64>>,
    /// Largest per-exponent spread.
    pub spread: f64,
    /// Number of exponents exceeding three times the spread.
    pub kappa: usize,
    pub top_simple: bool,
    /// Mean underlying steps per block (1 for non-induced sequences).
    pub steps_per_block: f64,
    pub n: usize,
    pub induced: bool,
}

impl LyapunovEstimate {
    /// Exponents per underlying step rather than per block.
    pub fn per_step(&self) -> Vec<f64> {
        self.exponents.iter().map(|t| t / self.steps_per_block).collect()
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovOptions {
    pub n: usize,
    pub trials: usize,
    /// Re-orthonormalize every `cadence` steps.
    pub cadence: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { n: 10_000, trials: 4, cadence: 5 }
    }
}

/// Exponents from the product over `ζ_{from}, …, ζ_{from+n−1}` with QR
/// renormalization.
pub fn lyapunov_run(seq: &SubstitutionSequence, from: i64, n: usize, cadence: usize) -> Result<Vec<f64>> {
    let m = seq.alphabet_size();
    let mats: Vec<DMatrix<f64>> = seq.blocks.iter().map(|b| b.cocycle.to_nalgebra()).collect();
    let syms = seq.symbols(from, n)?;
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut logs = vec![0.0; m];
    let cadence = cadence.max(1);
    let renormalize = |q: &mut DMatrix<f64>, logs: &mut [f64]| -> Result<()> {
        let qr = q.clone().qr();
        let r = qr.r();
        let mut qq = qr.q();
        for i in 0..m {
            let d = r[(i, i)];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Degenerate("zero column in cocycle product".into()));
            }
            logs[i] += d.abs().ln();
            if d < 0.0 {
                let mut col = qq.column_mut(i);
                col.neg_mut();
            }
        }
        *q = qq;
        Ok(())
    };
    for (k, &s) in syms.iter().enumerate() {
        q = &mats[s] * &q;
        if (k + 1) % cadence == 0 || q.amax() > 1e100 {
            renormalize(&mut q, &mut logs)?;
        }
    }
    renormalize(&mut q, &mut logs)?;
    let mut out: Vec<f64> = logs.into_iter().map(|l| l / n as f64).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Running estimates `θ̂_i(n)` for `n = 1..=N`, from the diagonal of a QR
/// factorization refreshed at every step. Unsorted: row `n` lists the
/// diagonal growth rates in the order of the initial frame.
pub fn lyapunov_trajectory(seq: &SubstitutionSequence, n: usize) -> Result<Vec<Vec<f64>>> {
    let m = seq.alphabet_size();
    let mats: Vec<DMatrix<f64>> = seq.blocks.iter().map(|b| b.cocycle.to_nalgebra()).collect();
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut logs = vec![0.0; m];
    let mut out = Vec::with_capacity(n);
    for (k, s) in seq.symbols(1, n)?.into_iter().enumerate() {
        let qr = (&mats[s] * &q).qr();
        let r = qr.r();
        for (i, l) in logs.iter_mut().enumerate() {
            let d = r[(i, i)].abs();
            if d == 0.0 {
                return Err(Error::Degenerate("zero column in cocycle product".into()));
            }
            *l += d.ln();
        }
        q = qr.q();
        out.push(logs.iter().map(|l| l / (k + 1) as f64).collect());
    }
    Ok(out)
}

/// Lyapunov spectrum over `trials` consecutive windows of length `N`.
pub fn lyapunov_spectrum(seq: &SubstitutionSequence, opts: LyapunovOptions) -> Result<LyapunovEstimate> {
    if opts.n == 0 || opts.trials == 0 {
        return Err(Error::Parameter("N and trials must be positive".into()));
    }
    let per_trial: Vec<Vec<f64>> = (0..opts.trials)
        .into_par_iter()
        .map(|t| lyapunov_run(seq, 1 + (t * opts.n) as i64, opts.n, opts.cadence))
        .collect::<Result<_>>()?;
    let m = seq.alphabet_size();
    let k = per_trial.len() as f64;
    let exponents: Vec<f64> = (0..m).map(|i| per_trial.iter().map(|t| t[i]).sum::<f64>() / k).collect();
    let errors: Vec<f64> = (0..m)
        .map(|i| {
            if per_trial.len() < 2 {
                return 0.0;
            }
            let var = per_trial.iter().map(|t| (t[i] - exponents[i]).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt()
        })
        .collect();
    let spread = errors.iter().copied().fold(0.0, f64::max);
    let kappa = exponents.iter().filter(|&&t| t > 3.0 * spread).count();
    let top_simple = m < 2 || exponents[0] - exponents[1] > 3.0 * spread.max(f64::EPSILON);
    Ok(LyapunovEstimate {
        exponents,
        errors,
        per_trial,
        spread,
        kappa,
        top_simple,
        steps_per_block: seq.mean_steps(opts.n * opts.trials)?,
        n: opts.n,
        induced: seq.is_induced(),
    })
}

/// Approximate projection onto the unstable Oseledets subspace at `a`.
#[derive(Clone, Debug)]
pub struct UnstableProjection {
    pub matrix: DMatrix<f64>,
    /// Orthonormal basis of the approximate unstable subspace.
    pub unstable: DMatrix<f64>,
    /// Orthonormal basis of the annihilator of the complementary subspace.
    pub dual: DMatrix<f64>,
    pub kappa: usize,
    /// `‖P² − P‖∞`.
    pub idempotence_residual: f64,
    /// Smallest singular value of `Yᵗ U` (cosine of the largest angle).
    pub conditioning: f64,
}

impl UnstableProjection {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let q = x.qr().q();
    q.columns(0, k).into_owned()
}

fn generic_frame(m: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, k, |_, _| rng.gen_range(-1.0..1.0))
}

/// `P = U (Yᵗ U)⁻¹ Yᵗ` where `U` spans the image of a generic `κ`-frame under
/// `A(n_back, σ^{−n_back} a)` and `Y` spans the image of a generic frame
/// under `A(n_back, a)ᵗ`; `Y` approximates the orthogonal complement of the
/// slow directions at `a`. Both frames are re-orthonormalized every step.
pub fn unstable_projection(seq: &SubstitutionSequence, n_back: usize, kappa: usize) -> Result<UnstableProjection> {
    let m = seq.alphabet_size();
    if kappa == 0 || kappa > m {
        return Err(Error::Parameter(format!("kappa = {kappa} must lie in 1..={m}")));
    }
    let mut u = orthonormalize(generic_frame(m, kappa, 0x5eed_0001));
    for i in (1 - n_back as i64)..=0 {
        u = orthonormalize(seq.block(i)?.cocycle.to_nalgebra() * u);
    }
    let mut y = orthonormalize(generic_frame(m, kappa, 0x5eed_0002));
    for i in (1..=n_back as i64).rev() {
        y = orthonormalize(seq.block(i)?.cocycle.to_nalgebra().transpose() * y);
    }
    let ytu = y.transpose() * &u;
    let sv = ytu.clone().svd(false, false).singular_values;
    let conditioning = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(conditioning > 1e-10) {
        return Err(Error::IllConditioned(conditioning));
    }
    let inv = ytu.try_inverse().ok_or(Error::IllConditioned(conditioning))?;
    let p = &u * inv * y.transpose();
    let resid = (&p * &p - &p).abs().row_sum().amax();
    Ok(UnstableProjection { matrix: p, unstable: u, dual: y, kappa, idempotence_residual: resid, conditioning })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_converges_for_fibonacci() {
        let traj = lyapunov_trajectory(&SubstitutionSequence::fibonacci(), 2000).unwrap();
        let last = traj.last().unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((last[0] - phi.ln()).abs() < 1e-3);
        assert!((last[0] + last[1]).abs() < 1e-9);
    }

    fn fib_numbers(n: usize) -> Vec<i64> {
        let mut f = vec![0i64, 1];
        while f.len() <= n {
            let k = f.len();
            f.push(f[k - 1] + f[k - 2]);
        }
        f
    }

    #[test]
    fn product_zero_is_identity() {
        let p = cocycle_product(&SubstitutionSequence::fibonacci(), 0).unwrap();
        assert_eq!(p.matrix, IntMatrix::identity(2));
        assert_eq!(p.log_norm, 0.0);
    }

    #[test]
    fn fibonacci_tenth_power() {
        let f = fib_numbers(12);
        let p = cocycle_product(&SubstitutionSequence::fibonacci(), 10).unwrap();
        let want = IntMatrix::from_rows(&[vec![f[11], f[10]], vec![f[10], f[9]]]).unwrap();
        assert_eq!(p.matrix, want);
    }

    #[test]
    fn cocycle_identity_on_random_sequence() {
        let subs = vec![
            Substitution::parse(&["12", "1"]).unwrap(),
            Substitution::parse(&["21", "122"]).unwrap(),
            Substitution::parse(&["1", "211"]).unwrap(),
        ];
        let seq = SubstitutionSequence::iid(subs, 11).unwrap();
        for (n, k) in [(3i64, 4i64), (0, 5), (7, 1), (10, 10)] {
            let whole = cocycle_product(&seq, n + k).unwrap().matrix;
            let head = cocycle_product(&seq, n).unwrap().matrix;
            let tail = cocycle_product(&seq.shifted(n), k).unwrap().matrix;
            assert_eq!(whole, &tail * &head);
        }
    }

    #[test]
    fn negative_products_invert() {
        let subs = vec![Substitution::parse(&["12", "1"]).unwrap(), Substitution::parse(&["1", "21"]).unwrap()];
        let seq = SubstitutionSequence::iid(subs, 5).unwrap();
        let back = cocycle_product(&seq, -6).unwrap().matrix;
        let fwd = cocycle_product(&seq.shifted(-6), 6).unwrap().matrix;
        assert_eq!(&back * &fwd, IntMatrix::identity(2));
    }

    #[test]
    fn negative_products_need_unimodular_factors() {
        let seq = SubstitutionSequence::periodic(vec![Substitution::parse(&["112", "2"]).unwrap()]).unwrap();
        assert_eq!(cocycle_product(&seq, -2).map(|_| ()), Err(Error::NotInvertible));
    }

    #[test]
    fn iid_random_access_is_consistent() {
        let subs = vec![Substitution::fibonacci(), Substitution::parse(&["1", "21"]).unwrap()];
        let seq = SubstitutionSequence::iid(subs, 99).unwrap();
        let bulk = seq.symbols(1, 50).unwrap();
        let single: Vec<usize> = (1..=50).map(|i| seq.symbol(i).unwrap()).collect();
        assert_eq!(bulk, single);
        assert_eq!(seq.shifted(10).symbol(5).unwrap(), seq.symbol(15).unwrap());
        let back = seq.symbols(-20, 30).unwrap();
        assert_eq!(back[21..], bulk[..9]);
        assert!(bulk.iter().any(|&s| s == 0) && bulk.iter().any(|&s| s == 1));
    }

    #[test]
    fn explicit_out_of_range() {
        let seq = SubstitutionSequence::explicit(vec![Substitution::fibonacci()], vec![]).unwrap();
        assert!(seq.get(1).is_ok());
        assert_eq!(seq.get(2).map(|_| ()), Err(Error::SequenceIndex(2)));
        assert_eq!(seq.get(0).map(|_| ()), Err(Error::SequenceIndex(0)));
    }

    #[test]
    fn periodic_w_constant() {
        let seq = SubstitutionSequence::periodic(vec![Substitution::parse(&["121", "12"]).unwrap()]).unwrap();
        let ws = w_series(&seq, 20).unwrap();
        assert!(ws.w.iter().all(|&w| w == 3f64.ln()));
    }

    #[test]
    fn max_sum_takes_largest() {
        let ws = WStat { w: vec![9.0, 1.0, 5.0, 2.0, 4.0, 3.0, 0.5, 0.0, 7.0, 6.0, 8.0], n: 10 };
        assert_eq!(ws.max_sum(0.3), 8.0 + 7.0 + 6.0);
        assert_eq!(ws.max_sum(0.25), 8.0 + 7.0);
        assert_eq!(ws.max_sum(0.05), 0.0);
        assert_eq!(ws.exceedance_count(1.0, 1.0 / (10f64).ln(), 0.1), 8);
    }

    #[test]
    fn fibonacci_exponents() {
        let est = lyapunov_spectrum(
            &SubstitutionSequence::fibonacci(),
            LyapunovOptions { n: 2000, trials: 2, cadence: 5 },
        )
        .unwrap();
        let lphi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((est.exponents[0] - lphi).abs() < 1e-3);
        assert!((est.exponents[1] + lphi).abs() < 1e-3);
        assert!(est.sum().abs() < 1e-9);
        assert_eq!(est.kappa, 1);
        assert!(est.top_simple);
    }

    #[test]
    fn periodic_block_exponents_match_eigenvalues() {
        let a = Substitution::parse(&["12", "1"]).unwrap();
        let b = Substitution::parse(&["1", "211"]).unwrap();
        let seq = SubstitutionSequence::periodic(vec![a.clone(), b.clone()]).unwrap();
        let est = lyapunov_spectrum(&seq, LyapunovOptions { n: 4000, trials: 1, cadence: 5 }).unwrap();
        let block = (&b.cocycle_matrix() * &a.cocycle_matrix()).to_nalgebra();
        let mut eig: Vec<f64> =
            block.complex_eigenvalues().iter().map(|z| z.norm().ln() / 2.0).collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        for (e, t) in eig.iter().zip(&est.exponents) {
            assert!((e - t).abs() < 2e-3, "{eig:?} vs {:?}", est.exponents);
        }
    }

    #[test]
    fn exact_and_float_log_norms_agree() {
        let subs = vec![
            Substitution::parse(&["12", "1"]).unwrap(),
            Substitution::parse(&["211", "12"]).unwrap(),
        ];
        let seq = SubstitutionSequence::iid(subs, 3).unwrap();
        let mut acc = CocycleAccumulator::new(&seq);
        let mut fl = DMatrix::<f64>::identity(2, 2);
        for n in 1..=60 {
            acc.push().unwrap();
            fl = seq.block(n).unwrap().cocycle.to_nalgebra() * fl;
            let exact = acc.matrix.log_norm_inf();
            let row_float = fl.abs().row_sum().amax().ln();
            assert!((exact - row_float).abs() <= 1e-9 * exact.abs().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn fibonacci_projection() {
        let p = unstable_projection(&SubstitutionSequence::fibonacci(), 40, 1).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let up = p.apply(&DVector::from_vec(vec![phi, 1.0]));
        assert!((up[0] - phi).abs() < 1e-10 && (up[1] - 1.0).abs() < 1e-10);
        let down = p.apply(&DVector::from_vec(vec![-1.0 / phi, 1.0]));
        assert!(down.amax() < 1e-10);
        assert!(p.idempotence_residual < 1e-8);
    }

    #[test]
    fn projection_is_equivariant() {
        let subs = vec![
            Substitution::parse(&["12", "1"]).unwrap(),
            Substitution::parse(&["1", "21"]).unwrap(),
            Substitution::parse(&["122", "1"]).unwrap(),
        ];
        let seq = SubstitutionSequence::iid(subs, 17).unwrap();
        let n = 6;
        let p0 = unstable_projection(&seq, 60, 1).unwrap();
        let pn = unstable_projection(&seq.shifted(n), 60, 1).unwrap();
        let a = cocycle_product(&seq, n).unwrap().matrix.to_nalgebra();
        let lhs = &a * &p0.matrix;
        let rhs = &pn.matrix * &a;
        let scale = a.abs().row_sum().amax();
        assert!((lhs - rhs).abs().amax() / scale < 1e-8);
    }

    #[test]
    fn induced_blocks_wrap_q() {
        let q = Block::new(Substitution::parse(&["12", "1"]).unwrap(), 3, "q");
        let base = SubstitutionSequence::periodic(vec![Substitution::parse(&["1", "21"]).unwrap()]).unwrap();
        let ind = base.induced(&q).unwrap();
        let want = q
            .substitution
            .compose(base.get(1).unwrap())
            .unwrap()
            .compose(&q.substitution)
            .unwrap();
        assert_eq!(ind.get(1).unwrap(), &want);
        assert_eq!(ind.block(1).unwrap().steps, 7);
        assert!(ind.is_induced());
        assert_eq!(ind.mean_steps(10).unwrap(), 7.0);
    }
}
