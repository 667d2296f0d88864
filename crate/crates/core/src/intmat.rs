//! Exact integer matrices over arbitrary-precision integers.
//!
//! Everything the renormalization machinery multiplies lives here: products
//! of incidence matrices overflow 64 bits after a few dozen steps, so no
//! fixed-width fast path is offered.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(m: usize) -> Self {
        let mut out = Self::zeros(m, m);
        for i in 0..m {
            out.data[i * m + i] = BigInt::one();
        }
        out
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|row| row.iter().cloned().map(Into::into)).collect();
        Ok(IntMatrix { rows: r, cols: c, data })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns<T: Into<BigInt> + Clone>(cols: &[Vec<T>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, |col| col.len());
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("ragged columns".into()));
        }
        let mut out = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out.data[i * c + j] = v.clone().into();
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        out
    }

    pub fn checked_mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// ℓ∞ operator norm: the maximal absolute row sum.
    pub fn norm_inf(&self) -> BigInt {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    /// Natural log of the ℓ∞ operator norm, accurate even when the norm
    /// exceeds the f64 range.
    pub fn log_norm_inf(&self) -> f64 {
        big_ln(&self.norm_inf())
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative())
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j).to_f64().unwrap_or(f64::NAN)
        })
    }

    /// Nested row vectors, the serialized layout.
    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a: Vec<Vec<BigInt>> = self.to_rows();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    pub fn is_unimodular(&self) -> bool {
        self.is_square() && self.det().abs().is_one()
    }

    /// Exact inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Result<IntMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let hf = HermiteForm::compute(self);
        hf.right_inverse().ok_or(Error::NotInvertible)
    }

    /// Diagonal of the Smith normal form (nonzero elementary divisors,
    /// normalized positive, each dividing the next).
    pub fn elementary_divisors(&self) -> Vec<BigInt> {
        smith_diagonal(self.to_rows())
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;

    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        self.checked_mul(rhs).expect("matrix dimensions")
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// Serialized as a row-major array of integer arrays. Entries that fit in i64
// are plain JSON numbers; larger ones are decimal strings.
impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<serde_json::Value>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(bigint_to_json).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<serde_json::Value>> = Vec::deserialize(d)?;
        let parsed: std::result::Result<Vec<Vec<BigInt>>, String> = rows
            .iter()
            .map(|row| row.iter().map(json_to_bigint).collect())
            .collect();
        let parsed = parsed.map_err(serde::de::Error::custom)?;
        IntMatrix::from_rows(&parsed).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn bigint_to_json(x: &BigInt) -> serde_json::Value {
    match x.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(x.to_string()),
    }
}

fn json_to_bigint(v: &serde_json::Value) -> std::result::Result<BigInt, String> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| format!("non-integer entry {n}")),
        serde_json::Value::String(s) => s.parse().map_err(|_| format!("bad integer {s:?}")),
        other => Err(format!("bad matrix entry {other}")),
    }
}

/// ln|x| for arbitrarily large integers; -inf for zero.
pub fn big_ln(x: &BigInt) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        return x.abs().to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x.abs() >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Column-style Hermite reduction `L · U = [H | 0]` with `U` unimodular and
/// `H` lower triangular.
#[derive(Clone, Debug)]
pub struct HermiteForm {
    /// The reduced matrix `L · U`.
    pub reduced: IntMatrix,
    /// The unimodular column transform.
    pub transform: IntMatrix,
    /// Number of pivot columns found.
    pub rank: usize,
}

impl HermiteForm {
    pub fn compute(l: &IntMatrix) -> HermiteForm {
        let (m, k) = (l.rows, l.cols);
        let mut a: Vec<Vec<BigInt>> = l.to_rows();
        let mut u: Vec<Vec<BigInt>> = IntMatrix::identity(k).to_rows();
        let mut pivot_col = 0;
        for i in 0..m {
            if pivot_col >= k {
                break;
            }
            for j in pivot_col + 1..k {
                if a[i][j].is_zero() {
                    continue;
                }
                let x = a[i][pivot_col].clone();
                let y = a[i][j].clone();
                let eg = x.extended_gcd(&y);
                let (g, p, q) = (eg.gcd, eg.x, eg.y);
                let (xs, ys) = (&x / &g, &y / &g);
                // [c_pivot, c_j] <- [p c_pivot + q c_j, -ys c_pivot + xs c_j]
                combine_columns(&mut a, pivot_col, j, &p, &q, &ys, &xs);
                combine_columns(&mut u, pivot_col, j, &p, &q, &ys, &xs);
            }
            if a[i][pivot_col].is_zero() {
                continue;
            }
            if a[i][pivot_col].is_negative() {
                negate_column(&mut a, pivot_col);
                negate_column(&mut u, pivot_col);
            }
            pivot_col += 1;
        }
        HermiteForm {
            reduced: IntMatrix::from_rows(&a).unwrap_or_else(|_| IntMatrix::zeros(m, k)),
            transform: IntMatrix::from_rows(&u).unwrap_or_else(|_| IntMatrix::zeros(k, k)),
            rank: pivot_col,
        }
    }

    /// Integer `X` with `L · X = I` when the columns of `L` generate the
    /// full lattice, `None` otherwise.
    pub fn right_inverse(&self) -> Option<IntMatrix> {
        let m = self.reduced.rows;
        if self.rank < m {
            return None;
        }
        // Lower-triangular block with unit diagonal iff full lattice.
        for i in 0..m {
            if !self.reduced.get(i, i).is_one() {
                return None;
            }
        }
        // Solve H · Y = I by forward substitution.
        let mut y = IntMatrix::zeros(m, m);
        for col in 0..m {
            for i in 0..m {
                let mut acc = if i == col { BigInt::one() } else { BigInt::zero() };
                for j in 0..i {
                    acc -= self.reduced.get(i, j) * y.get(j, col);
                }
                y.set(i, col, acc);
            }
        }
        let k = self.transform.rows;
        let mut x = IntMatrix::zeros(k, m);
        for r in 0..k {
            for c in 0..m {
                let mut acc = BigInt::zero();
                for j in 0..m {
                    acc += self.transform.get(r, j) * y.get(j, c);
                }
                x.set(r, c, acc);
            }
        }
        Some(x)
    }
}

fn combine_columns(
    a: &mut [Vec<BigInt>],
    c1: usize,
    c2: usize,
    p: &BigInt,
    q: &BigInt,
    r: &BigInt,
    s: &BigInt,
) {
    for row in a.iter_mut() {
        let v1 = row[c1].clone();
        let v2 = row[c2].clone();
        row[c1] = p * &v1 + q * &v2;
        row[c2] = s * &v2 - r * &v1;
    }
}

fn negate_column(a: &mut [Vec<BigInt>], c: usize) {
    for row in a.iter_mut() {
        row[c] = -row[c].clone();
    }
}

fn smith_diagonal(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // Smallest nonzero entry in the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !a[i][j].is_zero()
                    && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let qt = a[i][t].div_floor(&a[t][t]);
                for j in t..cols {
                    let v = &qt * &a[t][j];
                    a[i][j] -= v;
                }
                if !a[i][t].is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let qt = a[t][j].div_floor(&a[t][t]);
                for row in a.iter_mut().skip(t) {
                    let v = &qt * &row[t];
                    row[j] -= v;
                }
                if !a[t][j].is_zero() {
                    dirty = true;
                }
            }
            if !dirty {
                // Divisibility condition: the pivot must divide the rest.
                let bad = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| !a[i][j].is_multiple_of(&a[t][t]));
                match bad {
                    Some((i, _)) => {
                        let (head, tail) = a.split_at_mut(i);
                        for (x, y) in head[t].iter_mut().zip(tail[0].iter()) {
                            *x += y;
                        }
                        dirty = true;
                    }
                    None => break,
                }
            }
            if dirty {
                // Re-pivot on the smallest entry of row/column t.
                let mut best = (t, t);
                for i in t..rows {
                    if !a[i][t].is_zero() && a[i][t].abs() < a[best.0][best.1].abs() {
                        best = (i, t);
                    }
                }
                for j in t..cols {
                    if !a[t][j].is_zero() && a[t][j].abs() < a[best.0][best.1].abs() {
                        best = (t, j);
                    }
                }
                if best.0 != t {
                    a.swap(t, best.0);
                }
                if best.1 != t {
                    for row in a.iter_mut() {
                        row.swap(t, best.1);
                    }
                }
            }
        }
        diag.push(a[t][t].abs());
        t += 1;
    }
    diag
}
