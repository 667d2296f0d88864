//! Words, substitutions and their incidence matrices.
//!
//! Letters are stored 0-based internally and printed 1-based, so the word
//! `"121"` over a two-letter alphabet is stored as `[0, 1, 0]`.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intmat::IntMatrix;

pub type Letter = u8;

/// Alphabet `{1, …, m}` with `m >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::AlphabetTooSmall(m));
        }
        if m > Letter::MAX as usize {
            return Err(Error::Parse(format!("alphabet of size {m} too large")));
        }
        Ok(Alphabet(m))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

/// Finite word over a 0-based alphabet.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    /// Parses a 1-based word: digit strings like `"121"` for `m <= 9`,
    /// comma separated numbers like `"1,12,3"` otherwise.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let text = text.trim();
        let letters: Vec<usize> = if text.contains(',') || m > 9 {
            text.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad letter {t:?}"))))
                .collect::<Result<_>>()?
        } else {
            text.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| Error::Parse(format!("bad letter {c:?}"))))
                .collect::<Result<_>>()?
        };
        let mut out = Vec::with_capacity(letters.len());
        for l in letters {
            if l == 0 || l > m {
                return Err(Error::LetterOutOfRange { letter: l, m });
            }
            out.push((l - 1) as Letter);
        }
        Ok(Word(out))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn first(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    /// True if `needle` occurs as a factor (contiguous subword).
    pub fn contains_factor(&self, needle: &[Letter]) -> bool {
        needle.is_empty() || self.0.windows(needle.len()).any(|w| w == needle)
    }

    /// Renders 1-based; digits are concatenated when every letter is below 10.
    pub fn render(&self) -> String {
        if self.0.iter().all(|&l| l < 9) {
            self.0.iter().map(|&l| char::from(b'1' + l)).collect()
        } else {
            self.0.iter().map(|&l| (l as usize + 1).to_string()).collect::<Vec<_>>().join(",")
        }
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Letter counts `ℓ(v)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PopulationVector(pub Vec<u64>);

impl PopulationVector {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn to_bigint(&self) -> Vec<BigInt> {
        self.0.iter().map(|&c| BigInt::from(c)).collect()
    }

    pub fn l1(&self) -> u64 {
        self.total()
    }
}

pub fn population_vector(v: &Word, m: usize) -> PopulationVector {
    let mut counts = vec![0u64; m];
    for &l in v.letters() {
        counts[l as usize] += 1;
    }
    PopulationVector(counts)
}

/// `⟨ℓ(v), s⟩`, the length of `v` tiled by intervals of lengths `s`.
pub fn tiling_length(v: &Word, s: &[f64]) -> Result<f64> {
    if let Some(i) = s.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveRoof(i));
    }
    let mut total = 0.0;
    for &l in v.letters() {
        let idx = l as usize;
        if idx >= s.len() {
            return Err(Error::LetterOutOfRange { letter: idx + 1, m: s.len() });
        }
        total += s[idx];
    }
    Ok(total)
}

/// A map from letters to nonempty words, together with its incidence
/// matrix `S(i, j) = #{i in image(j)}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Substitution {
    m: usize,
    images: Vec<Word>,
    matrix: IntMatrix,
}

impl Substitution {
    /// Builds a substitution in the admissible class: every letter appears
    /// among the images and at least one image is longer than one letter.
    pub fn new(images: Vec<Word>) -> Result<Self> {
        let s = Self::morphism(images)?;
        s.check_class()?;
        Ok(s)
    }

    /// Builds a letter-to-word morphism without the class check (used for
    /// permutations and other bookkeeping maps).
    pub fn morphism(images: Vec<Word>) -> Result<Self> {
        let m = images.len();
        Alphabet::new(m)?;
        for (j, img) in images.iter().enumerate() {
            if img.is_empty() {
                return Err(Error::NotInClass(format!("image of letter {} is empty", j + 1)));
            }
            if let Some(&l) = img.letters().iter().find(|&&l| l as usize >= m) {
                return Err(Error::LetterOutOfRange { letter: l as usize + 1, m });
            }
        }
        let mut matrix = IntMatrix::zeros(m, m);
        for (j, img) in images.iter().enumerate() {
            let pv = population_vector(img, m);
            for (i, &c) in pv.0.iter().enumerate() {
                matrix.set(i, j, BigInt::from(c));
            }
        }
        Ok(Substitution { m, images, matrix })
    }

    /// Parses 1-based image strings, e.g. `["12", "1"]` for Fibonacci.
    pub fn parse(images: &[&str]) -> Result<Self> {
        let m = images.len();
        let words = images.iter().map(|t| Word::parse(t, m)).collect::<Result<Vec<_>>>()?;
        Self::new(words)
    }

    /// Letter permutation `j -> perm[j]` (0-based), outside the class.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let images = perm.iter().map(|&p| Word(vec![p as Letter])).collect();
        Self::morphism(images)
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::permutation(&(0..m).collect::<Vec<_>>())
    }

    pub fn fibonacci() -> Self {
        Self::parse(&["12", "1"]).expect("fibonacci substitution")
    }

    fn check_class(&self) -> Result<()> {
        let mut seen = vec![false; self.m];
        for img in &self.images {
            for &l in img.letters() {
                seen[l as usize] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::NotInClass(format!("letter {} never appears", missing + 1)));
        }
        if self.images.iter().all(|w| w.len() <= 1) {
            return Err(Error::NotInClass("no image longer than one letter".into()));
        }
        Ok(())
    }

    pub fn is_in_class(&self) -> bool {
        self.check_class().is_ok()
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image(&self, letter: Letter) -> &Word {
        &self.images[letter as usize]
    }

    /// Incidence matrix `S_ζ`.
    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    /// Renormalization matrix `A = S_ζᵗ`.
    pub fn cocycle_matrix(&self) -> IntMatrix {
        self.matrix.transpose()
    }

    pub fn image_lengths(&self) -> Vec<usize> {
        self.images.iter().map(Word::len).collect()
    }

    pub fn apply(&self, w: &Word) -> Word {
        let mut out = Vec::new();
        for &l in w.letters() {
            out.extend_from_slice(self.images[l as usize].letters());
        }
        Word(out)
    }

    /// `self ∘ other`: letter `a` maps to `self(other(a))`.
    pub fn compose(&self, other: &Substitution) -> Result<Substitution> {
        if self.m != other.m {
            return Err(Error::AlphabetMismatch(self.m, other.m));
        }
        let images = other.images.iter().map(|w| self.apply(w)).collect();
        Substitution::morphism(images)
    }

    /// `self ∘ self ∘ … ∘ self` (`n >= 1` factors).
    pub fn power(&self, n: usize) -> Result<Substitution> {
        if n == 0 {
            return Substitution::identity(self.m);
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.compose(self)?;
        }
        Ok(acc)
    }

    /// Letter each image starts with.
    pub fn first_letters(&self) -> Vec<Letter> {
        self.images.iter().map(|w| w.letters()[0]).collect()
    }

    pub fn to_json(&self) -> SubstitutionJson {
        SubstitutionJson { m: self.m, images: self.images.iter().map(Word::render).collect() }
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.images.iter().enumerate().map(|(j, w)| format!("{}->{}", j + 1, w)).collect();
        write!(f, "Substitution({})", parts.join(", "))
    }
}

/// Serialized form `{"m": 2, "images": ["12", "1"]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionJson {
    pub m: usize,
    pub images: Vec<String>,
}

impl TryFrom<SubstitutionJson> for Substitution {
    type Error = Error;

    fn try_from(j: SubstitutionJson) -> Result<Self> {
        if j.images.len() != j.m {
            return Err(Error::Parse(format!("expected {} images, got {}", j.m, j.images.len())));
        }
        let words = j.images.iter().map(|t| Word::parse(t, j.m)).collect::<Result<Vec<_>>>()?;
        Substitution::morphism(words)
    }
}

impl Serialize for Substitution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Substitution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SubstitutionJson::deserialize(d)?;
        Substitution::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// True if `v` is a good return word for `ζ`: `v` is nonempty and
/// `v·c` (with `c` the first letter of `v`) occurs in every image.
pub fn is_good_return_word(zeta: &Substitution, v: &Word) -> bool {
    let Some(c) = v.first() else { return false };
    let mut vc = v.0.clone();
    vc.push(c);
    zeta.images().iter().all(|img| img.contains_factor(&vc))
}

/// All good return words of length at most `max_len`.
///
/// Candidates are the factors of the shortest image that end with their own
/// first letter; each is then checked against every other image.
pub fn good_return_words(zeta: &Substitution, max_len: usize) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    let Some(shortest) = zeta.images().iter().min_by_key(|w| w.len()) else { return out };
    let s = shortest.letters();
    for len in 1..=max_len {
        if len + 1 > s.len() {
            break;
        }
        for window in s.windows(len + 1) {
            if window[0] != window[len] {
                continue;
            }
            let v = Word(window[..len].to_vec());
            if !out.contains(&v) && is_good_return_word(zeta, &v) {
                out.insert(v);
            }
        }
    }
    out
}

/// True iff the integer span of `vecs` is all of `Zᵐ`, decided by the
/// elementary divisors of the matrix of column vectors.
pub fn generates_lattice(vecs: &[PopulationVector], m: usize) -> bool {
    if vecs.is_empty() || vecs.iter().any(|v| v.0.len() != m) {
        return false;
    }
    let cols: Vec<Vec<BigInt>> = vecs.iter().map(PopulationVector::to_bigint).collect();
    let Ok(mat) = IntMatrix::from_columns(&cols) else { return false };
    let divisors = mat.elementary_divisors();
    divisors.len() == m && divisors.iter().all(|d| *d == BigInt::from(1))
}

/// Integer-vector variant of [`generates_lattice`].
pub fn generates_lattice_int(vecs: &[Vec<BigInt>], m: usize) -> bool {
    if vecs.is_empty() || vecs.iter().any(|v| v.len() != m) {
        return false;
    }
    let Ok(mat) = IntMatrix::from_columns(vecs) else { return false };
    let divisors = mat.elementary_divisors();
    divisors.len() == m && divisors.iter().all(|d| *d == BigInt::from(1))
}

/// A word is simple when no proper suffix equals a prefix of the same
/// length, so two occurrences can never overlap.
pub fn is_simple_word<T: PartialEq>(q: &[T]) -> bool {
    let k = q.len();
    if k == 0 {
        return false;
    }
    (1..k).all(|i| q[i..] != q[..k - i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str, m: usize) -> Word {
        Word::parse(s, m).unwrap()
    }

    fn mat(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn fibonacci_matrix() {
        assert_eq!(Substitution::fibonacci().matrix(), &mat(&[&[1, 1], &[1, 0]]));
        let z = Substitution::parse(&["121", "12"]).unwrap();
        assert_eq!(z.matrix(), &mat(&[&[2, 1], &[1, 1]]));
    }

    #[test]
    fn identity_like_rejected() {
        assert!(matches!(Substitution::parse(&["1", "2"]), Err(Error::NotInClass(_))));
        assert!(matches!(Substitution::parse(&["11", "1"]), Err(Error::NotInClass(_))));
    }

    #[test]
    fn compose_fibonacci_twice() {
        let f = Substitution::fibonacci();
        let ff = f.compose(&f).unwrap();
        assert_eq!(ff.images(), &[w("121", 2), w("12", 2)]);
        assert_eq!(ff.matrix(), &mat(&[&[2, 1], &[1, 1]]));
        let f3 = f.power(3).unwrap();
        assert_eq!(f3.images(), &[w("12112", 2), w("121", 2)]);
    }

    #[test]
    fn compose_with_permutation_permutes_images() {
        let z = Substitution::parse(&["12", "1"]).unwrap();
        let swap = Substitution::permutation(&[1, 0]).unwrap();
        let zs = z.compose(&swap).unwrap();
        assert_eq!(zs.images(), &[w("1", 2), w("12", 2)]);
        let sz = swap.compose(&z).unwrap();
        assert_eq!(sz.images(), &[w("21", 2), w("2", 2)]);
    }

    #[test]
    fn compose_alphabet_mismatch() {
        let z2 = Substitution::fibonacci();
        let z3 = Substitution::parse(&["12", "13", "1"]).unwrap();
        assert_eq!(z2.compose(&z3), Err(Error::AlphabetMismatch(2, 3)));
    }

    #[test]
    fn population_and_tiling() {
        assert_eq!(population_vector(&w("121", 2), 2).0, vec![2, 1]);
        assert_eq!(population_vector(&Word::default(), 3).0, vec![0, 0, 0]);
        assert_eq!(tiling_length(&w("12", 2), &[1.0, 1.0]).unwrap(), 2.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let len = tiling_length(&w("121", 2), &[phi, 1.0]).unwrap();
        assert!((len - phi.powi(3)).abs() < 1e-14);
        assert_eq!(tiling_length(&w("1", 2), &[0.0, 1.0]), Err(Error::NonPositiveRoof(0)));
    }

    #[test]
    fn return_words_fibonacci_cube() {
        let f3 = Substitution::fibonacci().power(3).unwrap();
        let grw = good_return_words(&f3, 3);
        assert!(grw.contains(&w("12", 2)));
        for v in &grw {
            assert!(is_good_return_word(&f3, v));
        }
        // Fibonacci itself has the image "1", too short for any v·c.
        assert!(good_return_words(&Substitution::fibonacci(), 5).is_empty());
    }

    #[test]
    fn lattice_generation() {
        let pv = |v: &[u64]| PopulationVector(v.to_vec());
        assert!(generates_lattice(&[pv(&[1, 0]), pv(&[0, 1])], 2));
        assert!(!generates_lattice(&[pv(&[2, 0]), pv(&[0, 2])], 2));
        assert!(generates_lattice(&[pv(&[2, 1]), pv(&[1, 1])], 2));
        assert!(generates_lattice(&[pv(&[2, 0]), pv(&[3, 0]), pv(&[0, 1])], 2));
        assert!(!generates_lattice(&[pv(&[1, 1])], 2));
    }

    #[test]
    fn simple_words() {
        assert!(is_simple_word(b"ba"));
        assert!(!is_simple_word(b"aba"));
        assert!(is_simple_word(b"bbaa"));
        assert!(is_simple_word(b"a"));
        assert!(!is_simple_word(b"aa"));
    }

    #[test]
    fn json_layout() {
        let f = Substitution::fibonacci();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"m":2,"images":["12","1"]}"#);
        let back: Substitution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}
