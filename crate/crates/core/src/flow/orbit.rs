//! Points of the S-adic shift coded by their tower addresses, and the
//! forward orbit read off as an odometer.
//!
//! A point at base level `b` is the list of letters `c_b, c_{b+1}, …, c_L`
//! with digits `p_{b+1}, …, p_L`, where `c_{k−1}` is letter `p_k` of
//! `ζ_k(c_k)`. The shift increments the lowest digit that has room and
//! resets the digits below it. When every digit is saturated the address is
//! extended upwards by choosing, for the current top letter `c`, the first
//! pair `(d, p)` with `ζ_{L+1}(d)[p] = c` and `p` not the last position.

use crate::error::{Error, Result};
use crate::flow::{InvariantMeasure, SAdicSystem};
use crate::symbolic::{Letter, Substitution};

/// Point of the special flow: a tower address at level 0 plus the height
/// `t ∈ [0, s_{c_0})` above the base.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoint {
    pub letters: Vec<Letter>,
    pub digits: Vec<usize>,
    pub t: f64,
}

fn choose_parent(zeta: &Substitution, child: Letter) -> Result<(Letter, usize)> {
    let mut fallback = None;
    for (d, img) in zeta.images().iter().enumerate() {
        for (p, &l) in img.letters().iter().enumerate() {
            if l == child {
                if p + 1 < img.len() {
                    return Ok((d as Letter, p));
                }
                fallback.get_or_insert((d as Letter, p));
            }
        }
    }
    fallback.ok_or_else(|| Error::NotInClass(format!("letter {} has no preimage", child + 1)))
}

impl OrbitPoint {
    /// Point at the bottom of the tower over `letter`, with no address above
    /// level 0 yet.
    pub fn at_letter(letter: Letter) -> Self {
        OrbitPoint { letters: vec![letter], digits: Vec::new(), t: 0.0 }
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// Checks that every digit points at the letter below it.
    pub fn validate(&self, sys: &SAdicSystem) -> Result<()> {
        if self.letters.len() != self.digits.len() + 1 {
            return Err(Error::Dimension("address needs one more letter than digits".into()));
        }
        for (k, &p) in self.digits.iter().enumerate() {
            let img = sys.sub(k + 1)?.image(self.letters[k + 1]);
            if img.letters().get(p) != Some(&self.letters[k]) {
                return Err(Error::Parameter(format!("digit {p} at level {} does not match", k + 1)));
            }
        }
        Ok(())
    }

    /// Extends the address upwards until it reaches level `level`.
    pub fn extend_to(&mut self, sys: &SAdicSystem, level: usize) -> Result<()> {
        while self.depth() < level {
            let zeta = sys.sub(self.depth() + 1)?;
            let (d, p) = choose_parent(zeta, *self.letters.last().expect("nonempty"))?;
            self.digits.push(p);
            self.letters.push(d);
        }
        Ok(())
    }

    /// Height above the base of the level-`l` tower: `t` plus the tiling
    /// lengths of the prefixes selected by `p_1, …, p_l`. `roofs[k]` must
    /// hold `s^(k)`.
    pub fn height_at_level(&self, sys: &SAdicSystem, roofs: &[Vec<f64>], l: usize) -> Result<f64> {
        let mut h = self.t;
        for k in 1..=l {
            let img = sys.sub(k)?.image(self.letters[k]);
            h += img.letters()[..self.digits[k - 1]].iter().map(|&b| roofs[k - 1][b as usize]).sum::<f64>();
        }
        Ok(h)
    }
}

/// Forward orbit of the shift at a fixed base level.
#[derive(Clone, Debug)]
pub struct OrbitCursor<'a> {
    sys: &'a SAdicSystem,
    base: usize,
    subs: Vec<&'a Substitution>,
    letters: Vec<Letter>,
    digits: Vec<usize>,
}

impl<'a> OrbitCursor<'a> {
    /// Cursor over letters of level `base`, positioned at `point`.
    pub fn new(sys: &'a SAdicSystem, point: &OrbitPoint, base: usize) -> Result<Self> {
        let mut p = point.clone();
        p.extend_to(sys, base)?;
        let letters = p.letters[base..].to_vec();
        let digits = p.digits[base..].to_vec();
        let subs = (0..digits.len()).map(|k| sys.sub(base + k + 1)).collect::<Result<Vec<_>>>()?;
        Ok(OrbitCursor { sys, base, subs, letters, digits })
    }

    pub fn letter(&self) -> Letter {
        self.letters[0]
    }

    pub fn base(&self) -> usize {
        self.base
    }

    fn extend_up(&mut self) -> Result<()> {
        let zeta = self.sys.sub(self.base + self.digits.len() + 1)?;
        let (d, p) = choose_parent(zeta, *self.letters.last().expect("nonempty"))?;
        self.subs.push(zeta);
        self.digits.push(p);
        self.letters.push(d);
        Ok(())
    }

    /// Moves to the next letter of the orbit.
    pub fn advance(&mut self) -> Result<Letter> {
        let mut k = 0;
        loop {
            if k == self.digits.len() {
                self.extend_up()?;
            }
            let img = self.subs[k].image(self.letters[k + 1]).letters();
            if self.digits[k] + 1 < img.len() {
                self.digits[k] += 1;
                self.letters[k] = img[self.digits[k]];
                break;
            }
            k += 1;
        }
        for j in (0..k).rev() {
            self.digits[j] = 0;
            self.letters[j] = self.subs[j].image(self.letters[j + 1]).letters()[0];
        }
        Ok(self.letters[0])
    }

    /// Current position as a point with zero height, expressed at level `base`.
    pub fn address(&self) -> (Vec<Letter>, Vec<usize>) {
        (self.letters.clone(), self.digits.clone())
    }
}

/// Special-flow orbit at a base level: the current letter and the height
/// within its interval `[0, s_letter)`.
#[derive(Clone, Debug)]
pub struct FlowCursor<'a> {
    pub orbit: OrbitCursor<'a>,
    pub roof: Vec<f64>,
    pub t: f64,
}

impl<'a> FlowCursor<'a> {
    /// Cursor on the level-`level` view of `point`; `roofs[k]` holds `s^(k)`
    /// for `k <= level`.
    pub fn new(sys: &'a SAdicSystem, point: &OrbitPoint, roofs: &[Vec<f64>], level: usize) -> Result<Self> {
        let mut p = point.clone();
        p.extend_to(sys, level)?;
        let t = p.height_at_level(sys, roofs, level)?;
        let orbit = OrbitCursor::new(sys, &p, level)?;
        Ok(FlowCursor { orbit, roof: roofs[level].clone(), t })
    }

    pub fn letter(&self) -> Letter {
        self.orbit.letter()
    }

    /// Time left in the current interval.
    pub fn remaining(&self) -> f64 {
        self.roof[self.letter() as usize] - self.t
    }

    /// Jumps to the start of the next interval.
    pub fn next_segment(&mut self) -> Result<()> {
        self.orbit.advance()?;
        self.t = 0.0;
        Ok(())
    }

    /// Applies the flow for time `dt >= 0`.
    pub fn advance_time(&mut self, mut dt: f64) -> Result<()> {
        while dt >= self.remaining() {
            dt -= self.remaining();
            self.next_segment()?;
        }
        self.t += dt;
        Ok(())
    }

    /// Current point at level 0 of the cursor's base (only meaningful when the
    /// cursor was built at level 0).
    pub fn point(&self) -> OrbitPoint {
        let (letters, digits) = self.orbit.address();
        OrbitPoint { letters, digits, t: self.t }
    }
}

/// `count` start points stratified with respect to the flow-invariant
/// probability: tower `a` at level `level` carries mass `μ⃗_level(a) s^(level)_a`,
/// and the `i`-th point sits at the `(i + ½)/count` quantile of the mass.
pub fn stratified_starts(
    sys: &SAdicSystem,
    mu: &InvariantMeasure,
    roofs: &[Vec<f64>],
    level: usize,
    count: usize,
) -> Result<Vec<OrbitPoint>> {
    if level >= mu.levels.len() || level >= roofs.len() {
        return Err(Error::Parameter(format!("measure or roof missing at level {level}")));
    }
    let m = sys.m();
    let weights: Vec<f64> = (0..m).map(|a| mu.levels[level][a] * roofs[level][a]).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut u = (i as f64 + 0.5) / count as f64 * total;
        let mut a = 0;
        while a + 1 < m && u >= weights[a] {
            u -= weights[a];
            a += 1;
        }
        let mut tau = (u / weights[a]).min(1.0 - 1e-15) * roofs[level][a];
        let mut letters = vec![a as Letter];
        let mut digits = Vec::new();
        for k in (1..=level).rev() {
            let img = sys.sub(k)?.image(*letters.last().expect("nonempty")).letters();
            let mut p = 0;
            while p + 1 < img.len() && tau >= roofs[k - 1][img[p] as usize] {
                tau -= roofs[k - 1][img[p] as usize];
                p += 1;
            }
            digits.push(p);
            letters.push(img[p]);
        }
        letters.reverse();
        digits.reverse();
        let t = tau.min(roofs[0][letters[0] as usize] * (1.0 - 1e-15));
        out.push(OrbitPoint { letters, digits, t });
    }
    Ok(out)
}
