//! Interval exchanges, Rauzy induction and the Rauzy graph.
//!
//! Permutations use the one-row convention: `π(i)` is the position, in the
//! image, of the `i`-th interval of the domain. Intervals are labeled by
//! their order in the domain, so labels are renumbered after every move.
//!
//! With `j = π⁻¹(m)` (the interval that lands last):
//!
//! * type `a` (`λ_m > λ_j`): the last piece of the domain is cut by `λ_j`.
//!   `λ'_m = λ_m − λ_j`, the elementary substitution is `j → j m`,
//!   every other letter fixed, and the incidence matrix is `I + E_{m,j}`.
//!   `π'(j) = π(m) + 1`, `π'(i) = π(i) + 1` when `π(m) < π(i) < m`, other
//!   positions unchanged.
//! * type `b` (`λ_j > λ_m`): interval `j` splits into a left piece of length
//!   `λ_j − λ_m` (new label `j`, word `j`) and a right piece of length `λ_m`
//!   (new label `j+1`, word `j m`); old labels `j+1, …, m−1` shift up by one.
//!   `π'(j) = m`, `π'(j+1) = π(m)`, `π'(k) = π(k)` for `k < j`,
//!   `π'(k) = π(k−1)` for `k > j+1`.
//!
//! For `m = 2`, `π = (2,1)`: `ζ_a = (1 → 12, 2 → 2)` with matrix
//! `[[1,0],[1,1]]`, and `ζ_b = (1 → 1, 2 → 12)` with matrix `[[1,1],[0,1]]`.
//!
//! A path `e_1 e_2 … e_k` has substitution `ζ_{e_1} ∘ ζ_{e_2} ∘ … ∘ ζ_{e_k}`:
//! the word of a level-`k` interval is read in level-`(k−1)` letters first
//! and then expanded downwards. Its matrix is `S_{e_1} S_{e_2} ⋯ S_{e_k}`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::Sub;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intmat::IntMatrix;
use crate::symbolic::{
    generates_lattice, is_good_return_word, is_simple_word, population_vector, Letter, Substitution, Word,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RauzyType {
    A,
    B,
}

impl RauzyType {
    pub fn other(self) -> Self {
        match self {
            RauzyType::A => RauzyType::B,
            RauzyType::B => RauzyType::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            RauzyType::A => 'a',
            RauzyType::B => 'b',
        }
    }

    pub fn parse_labels(text: &str) -> Result<Vec<RauzyType>> {
        text.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                'a' | 'A' => Ok(RauzyType::A),
                'b' | 'B' => Ok(RauzyType::B),
                other => Err(Error::InvalidPath(format!("unknown label {other:?}"))),
            })
            .collect()
    }
}

pub fn labels_to_string(labels: &[RauzyType]) -> String {
    labels.iter().map(|l| l.as_char()).collect()
}

/// Irreducible permutation in the one-row convention, stored 0-based.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IetPermutation {
    pi: Vec<usize>,
}

impl IetPermutation {
    /// From the 1-based one-row notation, e.g. `[3, 2, 1]`.
    pub fn new(one_based: &[usize]) -> Result<Self> {
        let m = one_based.len();
        if m < 2 {
            return Err(Error::AlphabetTooSmall(m));
        }
        let mut seen = vec![false; m];
        for &p in one_based {
            if p == 0 || p > m || seen[p - 1] {
                return Err(Error::InvalidPermutation(format!("{one_based:?} is not a permutation of 1..{m}")));
            }
            seen[p - 1] = true;
        }
        let perm = IetPermutation { pi: one_based.iter().map(|&p| p - 1).collect() };
        if !perm.is_irreducible() {
            return Err(Error::Reducible(one_based.to_vec()));
        }
        Ok(perm)
    }

    /// Parses `"3,2,1"` or `"(3,2,1)"`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let values = inner
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidPermutation(format!("bad entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&values)
    }

    /// The rotation-type permutation `(m, m−1, …, 1)`.
    pub fn reversal(m: usize) -> Result<Self> {
        Self::new(&(1..=m).rev().collect::<Vec<_>>())
    }

    pub fn m(&self) -> usize {
        self.pi.len()
    }

    /// `π(i)`, 0-based.
    pub fn position(&self, i: usize) -> usize {
        self.pi[i]
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.pi.iter().map(|&p| p + 1).collect()
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.m()];
        for (i, &p) in self.pi.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    pub fn is_irreducible(&self) -> bool {
        let m = self.m();
        let mut max_pos = 0;
        for k in 0..m - 1 {
            max_pos = max_pos.max(self.pi[k]);
            if max_pos == k {
                return false;
            }
        }
        true
    }

    /// Interval that lands last, `π⁻¹(m)`, 0-based.
    pub fn last_in_range(&self) -> usize {
        self.inverse()[self.m() - 1]
    }

    /// Combinatorial Rauzy move: the new permutation and the elementary
    /// substitution expressing new intervals in old letters.
    pub fn rauzy_move(&self, ty: RauzyType) -> (IetPermutation, Substitution) {
        let m = self.m();
        let last = m - 1;
        let j = self.last_in_range();
        let pm = self.pi[last];
        match ty {
            RauzyType::A => {
                let mut pi = self.pi.clone();
                for (i, p) in pi.iter_mut().enumerate() {
                    if i == j {
                        *p = pm + 1;
                    } else if self.pi[i] > pm && self.pi[i] < last {
                        *p = self.pi[i] + 1;
                    }
                }
                let images = (0..m)
                    .map(|i| {
                        if i == j {
                            Word(vec![j as Letter, last as Letter])
                        } else {
                            Word(vec![i as Letter])
                        }
                    })
                    .collect();
                (IetPermutation { pi }, Substitution::new(images).expect("elementary substitution"))
            }
            RauzyType::B => {
                let mut pi = vec![0; m];
                let mut images = Vec::with_capacity(m);
                for k in 0..m {
                    if k < j {
                        pi[k] = self.pi[k];
                        images.push(Word(vec![k as Letter]));
                    } else if k == j {
                        pi[k] = last;
                        images.push(Word(vec![j as Letter]));
                    } else if k == j + 1 {
                        pi[k] = pm;
                        images.push(Word(vec![j as Letter, last as Letter]));
                    } else {
                        pi[k] = self.pi[k - 1];
                        images.push(Word(vec![(k - 1) as Letter]));
                    }
                }
                (IetPermutation { pi }, Substitution::new(images).expect("elementary substitution"))
            }
        }
    }
}

impl fmt::Display for IetPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl fmt::Debug for IetPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IetPermutation{self}")
    }
}

impl Serialize for IetPermutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IetPermutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        IetPermutation::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Interval exchange `(λ, π)`, generic over the length type so that exact
/// rationals can be used alongside floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Iet<T> {
    pub pi: IetPermutation,
    pub lambda: Vec<T>,
}

impl<T> Iet<T>
where
    T: Clone + PartialOrd + Zero + Sub<Output = T>,
{
    pub fn new(pi: IetPermutation, lambda: Vec<T>) -> Result<Self> {
        if lambda.len() != pi.m() {
            return Err(Error::Dimension(format!("{} lengths for {} intervals", lambda.len(), pi.m())));
        }
        if let Some(i) = lambda.iter().position(|l| !(*l > T::zero())) {
            return Err(Error::NonPositiveRoof(i));
        }
        Ok(Iet { pi, lambda })
    }

    pub fn total_length(&self) -> T {
        self.lambda.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    /// Image of `x` and the label of the interval containing it.
    pub fn apply(&self, x: &T) -> Option<(usize, T)> {
        let m = self.pi.m();
        let mut start = T::zero();
        for i in 0..m {
            let end = start.clone() + self.lambda[i].clone();
            if *x >= start && *x < end {
                let target = self.pi.position(i);
                let offset = (0..m)
                    .filter(|&k| self.pi.position(k) < target)
                    .fold(T::zero(), |acc, k| acc + self.lambda[k].clone());
                return Some((i, x.clone() - start + offset));
            }
            start = end;
        }
        None
    }

    /// One step of Rauzy induction.
    pub fn rauzy_step(&self) -> Result<(RauzyType, Iet<T>)> {
        let (ty, next, _) = self.rauzy_step_with_substitution()?;
        Ok((ty, next))
    }

    pub fn rauzy_step_with_substitution(&self) -> Result<(RauzyType, Iet<T>, Substitution)> {
        let m = self.pi.m();
        let last = m - 1;
        let j = self.pi.last_in_range();
        let (lm, lj) = (&self.lambda[last], &self.lambda[j]);
        let ty = if lm > lj {
            RauzyType::A
        } else if lj > lm {
            RauzyType::B
        } else {
            return Err(Error::RauzyTie);
        };
        let (pi, zeta) = self.pi.rauzy_move(ty);
        let lambda = match ty {
            RauzyType::A => {
                let mut l = self.lambda.clone();
                l[last] = lm.clone() - lj.clone();
                l
            }
            RauzyType::B => (0..m)
                .map(|k| {
                    if k < j {
                        self.lambda[k].clone()
                    } else if k == j {
                        lj.clone() - lm.clone()
                    } else if k == j + 1 {
                        lm.clone()
                    } else {
                        self.lambda[k - 1].clone()
                    }
                })
                .collect(),
        };
        Ok((ty, Iet { pi, lambda }, zeta))
    }
}

/// Edge of the Rauzy graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RauzyEdge {
    pub source: usize,
    pub target: usize,
    pub label: RauzyType,
    pub matrix: IntMatrix,
    pub substitution: Substitution,
}

/// Rauzy class of a permutation: vertices in BFS order from the seed and,
/// for vertex `v`, its `a`-edge at index `2v` and `b`-edge at `2v + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct RauzyGraph {
    pub vertices: Vec<IetPermutation>,
    pub edges: Vec<RauzyEdge>,
    #[serde(skip)]
    index: HashMap<IetPermutation, usize>,
}

/// BFS closure of `π0` under both Rauzy moves.
pub fn rauzy_class(pi0: &IetPermutation) -> Result<RauzyGraph> {
    if !pi0.is_irreducible() {
        return Err(Error::Reducible(pi0.one_based()));
    }
    let mut vertices = vec![pi0.clone()];
    let mut index = HashMap::from([(pi0.clone(), 0usize)]);
    let mut pending: Vec<(usize, RauzyType, IetPermutation, Substitution)> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for ty in [RauzyType::A, RauzyType::B] {
            let (next, zeta) = vertices[v].rauzy_move(ty);
            if !index.contains_key(&next) {
                index.insert(next.clone(), vertices.len());
                queue.push_back(vertices.len());
                vertices.push(next.clone());
            }
            pending.push((v, ty, next, zeta));
        }
    }
    pending.sort_by_key(|(v, ty, _, _)| (*v, *ty));
    let edges = pending
        .into_iter()
        .map(|(source, label, next, zeta)| RauzyEdge {
            source,
            target: index[&next],
            label,
            matrix: zeta.matrix().clone(),
            substitution: zeta,
        })
        .collect();
    Ok(RauzyGraph { vertices, edges, index })
}

impl RauzyGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn m(&self) -> usize {
        self.vertices[0].m()
    }

    pub fn vertex_index(&self, pi: &IetPermutation) -> Option<usize> {
        self.index.get(pi).copied()
    }

    pub fn edge(&self, v: usize, label: RauzyType) -> &RauzyEdge {
        &self.edges[2 * v + label as usize]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.source == v).count()
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(v) = stack.pop() {
                for e in &self.edges {
                    let (from, to) = if forward { (e.source, e.target) } else { (e.target, e.source) };
                    if from == v && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Vertex reached by following `labels` from `start`.
    pub fn follow(&self, start: usize, labels: &[RauzyType]) -> usize {
        labels.iter().fold(start, |v, &l| self.edge(v, l).target)
    }

    /// Smallest `r >= 1` with `label^r` a loop at `v`.
    pub fn pure_cycle_length(&self, v: usize, label: RauzyType) -> usize {
        let mut cur = self.edge(v, label).target;
        let mut r = 1;
        while cur != v {
            cur = self.edge(cur, label).target;
            r += 1;
        }
        r
    }

    /// All label words of length at most `max_len` leaving `v` and returning
    /// to it for the first time at their last step.
    pub fn first_return_loops(&self, v: usize, max_len: usize) -> Vec<Vec<RauzyType>> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Vec<RauzyType>)> = vec![(v, Vec::new())];
        while let Some((cur, labels)) = stack.pop() {
            if labels.len() == max_len {
                continue;
            }
            for ty in [RauzyType::B, RauzyType::A] {
                let next = self.edge(cur, ty).target;
                let mut l = labels.clone();
                l.push(ty);
                if next == v {
                    out.push(l);
                } else {
                    stack.push((next, l));
                }
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "m": self.m(),
            "vertices": self.vertices,
            "edges": self.edges,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph rauzy {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            s.push_str(&format!("  v{i} [label=\"{v}\"];\n"));
        }
        for e in &self.edges {
            s.push_str(&format!("  v{} -> v{} [label=\"{}\"];\n", e.source, e.target, e.label.as_char()));
        }
        s.push_str("}\n");
        s
    }
}

/// Path in the Rauzy graph with its accumulated substitution and matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RauzyPath {
    pub start: IetPermutation,
    pub end: IetPermutation,
    pub labels: Vec<RauzyType>,
    pub substitution: Substitution,
    pub matrix: IntMatrix,
}

impl RauzyPath {
    pub fn new(start: &IetPermutation, labels: &[RauzyType]) -> Result<Self> {
        let (end, substitution) = walk(start, labels)?;
        let matrix = substitution.matrix().clone();
        Ok(RauzyPath { start: start.clone(), end, labels: labels.to_vec(), substitution, matrix })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_loop(&self) -> bool {
        self.start == self.end
    }

    pub fn label_string(&self) -> String {
        labels_to_string(&self.labels)
    }
}

fn walk(start: &IetPermutation, labels: &[RauzyType]) -> Result<(IetPermutation, Substitution)> {
    if labels.is_empty() {
        return Err(Error::InvalidPath("paths must contain at least one edge".into()));
    }
    let (mut cur, mut zeta) = start.rauzy_move(labels[0]);
    for &ty in &labels[1..] {
        let (next, step) = cur.rauzy_move(ty);
        zeta = zeta.compose(&step)?;
        cur = next;
    }
    Ok((cur, zeta))
}

/// Substitution of the induction block along `labels` from `start`.
pub fn path_substitution(start: &IetPermutation, labels: &[RauzyType]) -> Result<Substitution> {
    walk(start, labels).map(|(_, z)| z)
}

/// Product of the edge matrices along a path in the graph, in path order.
pub fn path_matrix(graph: &RauzyGraph, start: usize, labels: &[RauzyType]) -> Result<IntMatrix> {
    if labels.is_empty() {
        return Err(Error::InvalidPath("paths must contain at least one edge".into()));
    }
    let mut v = start;
    let mut acc = IntMatrix::identity(graph.m());
    for &l in labels {
        let e = graph.edge(v, l);
        acc = &acc * &e.matrix;
        v = e.target;
    }
    Ok(acc)
}

/// Search limits for [`construct_good_word`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodWordCaps {
    pub max_loop_len: usize,
    pub max_power: usize,
}

impl Default for GoodWordCaps {
    fn default() -> Self {
        GoodWordCaps { max_loop_len: 16, max_power: 64 }
    }
}

/// Outcome of the three checks on a constructed path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GoodWordChecks {
    pub simple: bool,
    pub positive: bool,
    pub lattice: bool,
}

impl GoodWordChecks {
    pub fn all(&self) -> bool {
        self.simple && self.positive && self.lattice
    }
}

/// Simple loop `q` with a strictly positive matrix, together with the
/// ingredients used to build it.
#[derive(Clone, Debug, Serialize)]
pub struct GoodWord {
    pub path: RauzyPath,
    /// Positive loop `V`.
    pub positive_loop: Vec<RauzyType>,
    /// Power `n` at which all images of `ζ_{V^n}` share their first letter.
    pub power: usize,
    /// Common first letter (0-based).
    pub first_letter: Letter,
    /// Images `ζ_{V^n}(j)`, good return words of `ζ_q`.
    pub return_words: Vec<Word>,
    pub checks: GoodWordChecks,
}

/// Builds a simple loop `q` at `start` whose matrix is strictly positive and
/// whose substitution has good return words generating `Zᵐ`.
///
/// `q = V^{2n} W₂ W₁` where `V` is the shortest positive loop, `n` is the
/// first power at which all images of `ζ_{V^n}` start with one letter, `W₂`
/// is the pure cycle of `V`'s first label and `W₁` repeats the pure cycle of
/// the other label until it is longer than `V^{2n} W₂`. The label word has
/// the form `u x^k` with `|u| < k` and `u` starting and ending off `x`, so it
/// is simple. The images `ζ_{V^n}(j)` are good return words of `ζ_q`; their
/// population vectors are the columns of a unimodular matrix.
pub fn construct_good_word(graph: &RauzyGraph, start: usize, caps: GoodWordCaps) -> Result<GoodWord> {
    if start >= graph.len() {
        return Err(Error::InvalidPath(format!("start vertex {start} not in graph")));
    }
    if !graph.is_strongly_connected() {
        return Err(Error::Degenerate("Rauzy graph is not strongly connected".into()));
    }
    let m = graph.m();
    let base = &graph.vertices[start];
    let v_loop = find_positive_loop(graph, start, caps.max_loop_len)?;
    let zeta_v = path_substitution(base, &v_loop)?;

    let f: Vec<Letter> = zeta_v.first_letters();
    let mut current: Vec<Letter> = (0..m as Letter).collect();
    let mut power = None;
    for n in 1..=caps.max_power {
        current = current.iter().map(|&c| f[c as usize]).collect();
        if current.iter().all(|&c| c == current[0]) {
            power = Some(n);
            break;
        }
    }
    let n = power.ok_or_else(|| Error::BudgetExceeded(format!("no common first letter up to power {}", caps.max_power)))?;
    let first_letter = current[0];

    let y = v_loop[0];
    let x = y.other();
    let w2 = vec![y; graph.pure_cycle_length(start, y)];
    let mut head: Vec<RauzyType> = Vec::new();
    for _ in 0..2 * n {
        head.extend_from_slice(&v_loop);
    }
    head.extend_from_slice(&w2);
    let x_cycle = graph.pure_cycle_length(start, x);
    let reps = head.len() / x_cycle + 1;
    let mut labels = head;
    labels.extend(std::iter::repeat_n(x, reps * x_cycle));

    let path = RauzyPath::new(base, &labels)?;
    let zeta_vn = zeta_v.power(n)?;
    let return_words: Vec<Word> = zeta_vn.images().to_vec();

    let simple = is_simple_word(&labels);
    let positive = path.matrix.is_strictly_positive();
    let grw = return_words.iter().all(|w| is_good_return_word(&path.substitution, w));
    let pops: Vec<_> = return_words.iter().map(|w| population_vector(w, m)).collect();
    let lattice = grw && generates_lattice(&pops, m);
    Ok(GoodWord {
        path,
        positive_loop: v_loop,
        power: n,
        first_letter,
        return_words,
        checks: GoodWordChecks { simple, positive, lattice },
    })
}

/// Shortest loop at `start` (lexicographically first among equals, with
/// `a < b`) whose matrix is strictly positive.
pub fn find_positive_loop(graph: &RauzyGraph, start: usize, max_len: usize) -> Result<Vec<RauzyType>> {
    let m = graph.m();
    for len in 1..=max_len {
        let mut stack: Vec<(usize, Vec<RauzyType>, IntMatrix)> = vec![(start, Vec::new(), IntMatrix::identity(m))];
        let mut found: Option<Vec<RauzyType>> = None;
        while let Some((v, labels, mat)) = stack.pop() {
            if labels.len() == len {
                if v == start && mat.is_strictly_positive() && found.as_ref().is_none_or(|f| labels < *f) {
                    found = Some(labels);
                }
                continue;
            }
            for ty in [RauzyType::A, RauzyType::B] {
                let e = graph.edge(v, ty);
                let mut l = labels.clone();
                l.push(ty);
                stack.push((e.target, l, &mat * &e.matrix));
            }
        }
        if let Some(f) = found {
            return Ok(f);
        }
    }
    Err(Error::BudgetExceeded(format!("no positive loop of length <= {max_len}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn perm(p: &[usize]) -> IetPermutation {
        IetPermutation::new(p).unwrap()
    }

    fn mat(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_interval_moves() {
        let p = perm(&[2, 1]);
        let (pa, za) = p.rauzy_move(RauzyType::A);
        let (pb, zb) = p.rauzy_move(RauzyType::B);
        assert_eq!(pa, p);
        assert_eq!(pb, p);
        assert_eq!(za.matrix(), &mat(&[&[1, 0], &[1, 1]]));
        assert_eq!(zb.matrix(), &mat(&[&[1, 1], &[0, 1]]));
    }

    #[test]
    fn golden_first_step_shrinks_first_length() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let iet = Iet::new(perm(&[2, 1]), vec![phi, 1.0]).unwrap();
        let (ty, next) = iet.rauzy_step().unwrap();
        assert_eq!(ty, RauzyType::B);
        assert!((next.lambda[0] - (phi - 1.0)).abs() < 1e-15);
        assert_eq!(next.lambda[1], 1.0);
        let (ty2, _) = next.rauzy_step().unwrap();
        assert_eq!(ty2, RauzyType::A);
    }

    #[test]
    fn tie_is_an_error() {
        let iet = Iet::new(perm(&[2, 1]), vec![1.0, 1.0]).unwrap();
        assert_eq!(iet.rauzy_step(), Err(Error::RauzyTie));
    }

    #[test]
    fn reducible_rejected() {
        assert!(matches!(IetPermutation::new(&[1, 2]), Err(Error::Reducible(_))));
        assert!(matches!(IetPermutation::new(&[2, 1, 3]), Err(Error::Reducible(_))));
        assert!(IetPermutation::new(&[2, 3, 1]).is_ok());
    }

    #[test]
    fn class_sizes() {
        let g2 = rauzy_class(&perm(&[2, 1])).unwrap();
        assert_eq!(g2.len(), 1);
        assert_eq!(g2.edges.len(), 2);
        assert!(g2.edges.iter().all(|e| e.source == 0 && e.target == 0));
        let g3 = rauzy_class(&perm(&[3, 2, 1])).unwrap();
        assert_eq!(g3.len(), 3);
        assert!(g3.is_strongly_connected());
        let g4 = rauzy_class(&perm(&[4, 3, 2, 1])).unwrap();
        assert_eq!(g4.len(), 7);
        for g in [&g2, &g3, &g4] {
            for v in 0..g.len() {
                assert_eq!(g.out_degree(v), 2);
            }
            assert!(g.edges.iter().all(|e| e.matrix.is_unimodular()));
        }
    }

    #[test]
    fn empty_path_rejected() {
        assert!(matches!(path_substitution(&perm(&[2, 1]), &[]), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn path_matrix_matches_edge_product() {
        let g = rauzy_class(&perm(&[4, 3, 2, 1])).unwrap();
        let labels = RauzyType::parse_labels("abbabaab").unwrap();
        let p = RauzyPath::new(&g.vertices[0], &labels).unwrap();
        assert_eq!(p.matrix, path_matrix(&g, 0, &labels).unwrap());
        assert_eq!(p.end, g.vertices[g.follow(0, &labels)]);
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Itineraries of the induced intervals under the original map, read
    /// off at the left endpoint plus a small offset of each new interval.
    fn simulated_words(orig: &Iet<BigRational>, induced: &Iet<BigRational>) -> Vec<Word> {
        let bound = induced.total_length();
        let mut out = Vec::new();
        let mut left = BigRational::zero();
        for len in &induced.lambda {
            let x0 = left.clone() + len.clone() / BigRational::from_integer(BigInt::from(2));
            let mut x = x0;
            let mut word = Vec::new();
            loop {
                let (label, y) = orig.apply(&x).unwrap();
                word.push(label as Letter);
                x = y;
                if x < bound {
                    break;
                }
            }
            out.push(Word(word));
            left = left + len.clone();
        }
        out
    }

    #[test]
    fn tower_simulation_matches_path_substitution() {
        let cases: Vec<(Vec<usize>, Vec<BigRational>)> = vec![
            (vec![2, 1], vec![rational(13, 8), rational(1, 1)]),
            (vec![3, 2, 1], vec![rational(7, 5), rational(3, 11), rational(9, 13)]),
            (vec![4, 3, 2, 1], vec![rational(5, 7), rational(2, 3), rational(11, 17), rational(3, 19)]),
            (vec![4, 2, 3, 1], vec![rational(1, 2), rational(4, 9), rational(8, 23), rational(6, 7)]),
        ];
        for (p, lambda) in cases {
            let start = Iet::new(perm(&p), lambda).unwrap();
            let mut cur = start.clone();
            let mut labels = Vec::new();
            for _ in 0..12 {
                let Ok((ty, next, zeta)) = cur.rauzy_step_with_substitution() else { break };
                assert_eq!(simulated_words(&cur, &next), zeta.images().to_vec());
                labels.push(ty);
                cur = next;
                let composite = path_substitution(&start.pi, &labels).unwrap();
                assert_eq!(simulated_words(&start, &cur), composite.images().to_vec(), "path {labels:?}");
                assert_eq!(cur.pi, RauzyPath::new(&start.pi, &labels).unwrap().end);
            }
        }
    }

    #[test]
    fn good_word_two_letters() {
        let g = rauzy_class(&perm(&[2, 1])).unwrap();
        let gw = construct_good_word(&g, 0, GoodWordCaps::default()).unwrap();
        assert_eq!(labels_to_string(&gw.positive_loop), "ab");
        assert_eq!(gw.power, 1);
        assert_eq!(gw.path.label_string(), "ababa".to_string() + &"b".repeat(6));
        assert!(gw.checks.all());
    }

    #[test]
    fn good_word_three_letters() {
        let g = rauzy_class(&perm(&[3, 2, 1])).unwrap();
        let gw = construct_good_word(&g, 0, GoodWordCaps::default()).unwrap();
        assert!(gw.checks.all(), "{:?}", gw.checks);
        assert!(gw.path.is_loop());
        let vn = path_substitution(&g.vertices[0], &gw.positive_loop).unwrap().power(gw.power).unwrap();
        assert!(vn.matrix().is_unimodular());
    }

    #[test]
    fn caps_are_enforced() {
        let g = rauzy_class(&perm(&[3, 2, 1])).unwrap();
        let caps = GoodWordCaps { max_loop_len: 1, max_power: 1 };
        assert!(matches!(construct_good_word(&g, 0, caps), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn first_return_loops_return_once() {
        let g = rauzy_class(&perm(&[3, 2, 1])).unwrap();
        let loops = g.first_return_loops(0, 6);
        assert!(!loops.is_empty());
        for l in &loops {
            let mut v = 0;
            for (i, &t) in l.iter().enumerate() {
                v = g.edge(v, t).target;
                assert_eq!(v == 0, i + 1 == l.len());
            }
        }
    }

    #[test]
    fn dot_and_json_export() {
        let g = rauzy_class(&perm(&[3, 2, 1])).unwrap();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph rauzy"));
        assert_eq!(dot.matches("->").count(), 6);
        let js = g.to_json();
        assert_eq!(js["vertices"][0], serde_json::json!([3, 2, 1]));
        assert_eq!(js["edges"].as_array().unwrap().len(), 6);
    }
}
