//! Weakly Lipschitz norm of a cylindrical function, measured against the
//! cylinders of every coarser level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::birkhoff::{CylFunction, Profile};
use crate::flow::{InvariantMeasure, SAdicSystem};
use crate::symbolic::Substitution;

/// Oscillation data at one level `ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelOscillation {
    pub level: usize,
    /// `sup_t max |f(x, t) − f(x', t)|` over `x, x' ∈ ζ^[ℓ][a]`, per letter.
    pub oscillation: Vec<f64>,
    /// `‖f − f^(ℓ)‖∞` for the approximation that copies the first
    /// occurrence of each level-`ℓ` tower.
    pub approx_error: f64,
    /// `‖f‖_L · max_a μ(ζ^[ℓ][a])`.
    pub approx_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakLipschitz {
    pub sup: f64,
    /// Best constant `C̃` with oscillation `<= C̃ μ(ζ^[ℓ][a])` at every level.
    pub c_tilde: f64,
    /// `‖f‖∞ + C̃`.
    pub norm: f64,
    pub levels: Vec<LevelOscillation>,
}

/// Restriction of `ψ_b` to `[offset, offset + len]`, shifted to start at 0,
/// as breakpoints (absolute, inside `(0, len)`) and values.
fn restrict(profile: &Profile, total: f64, offset: f64, len: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (breaks, values) = match profile {
        Profile::Piecewise { breaks, values } => (breaks, values),
        Profile::Custom { .. } => {
            return Err(Error::Parameter("weak Lipschitz norm needs piecewise-constant profiles".into()))
        }
    };
    let mut cuts = Vec::new();
    let mut vals = Vec::new();
    let mut lo: f64 = 0.0;
    for (k, &v) in values.iter().enumerate() {
        let hi = breaks.get(k).map_or(total, |b| b * total);
        let a = lo.max(offset);
        let b = hi.min(offset + len);
        if b > a {
            if !vals.is_empty() {
                cuts.push(a - offset);
            }
            vals.push(v);
        }
        lo = hi;
    }
    Ok((cuts, vals))
}

fn value_at(cuts: &[f64], vals: &[f64], t: f64) -> f64 {
    vals[cuts.iter().take_while(|&&c| t >= c).count()]
}

/// `C̃` and the approximation errors for a level-`L` cylindrical function
/// with piecewise-constant profiles. `roofs[k]` holds `s^(k)` for `k <= L`
/// and `mu` must reach level `L`.
pub fn weakly_lipschitz_norm(
    sys: &SAdicSystem,
    f: &CylFunction,
    roofs: &[Vec<f64>],
    mu: &InvariantMeasure,
) -> Result<WeakLipschitz> {
    let top = f.level;
    if roofs.len() <= top || mu.levels.len() <= top {
        return Err(Error::Parameter(format!("roof or measure missing at level {top}")));
    }
    let m = sys.m();
    let sup = f.sup_norm();
    let mut raw = Vec::new();
    let mut block = Substitution::identity(m)?;
    for ell in (0..=top).rev() {
        if ell < top {
            block = sys.sub(ell + 1)?.compose(&block)?;
        }
        let lens = &roofs[ell];
        let mut occurrences: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); m];
        for b in 0..m {
            let mut offset = 0.0;
            for &a in block.image(b as u8).letters() {
                let a = a as usize;
                occurrences[a].push(restrict(&f.profiles[b], roofs[top][b], offset, lens[a])?);
                offset += lens[a];
            }
        }
        let mut osc = vec![0.0; m];
        let mut approx: f64 = 0.0;
        for a in 0..m {
            let occ = &occurrences[a];
            if occ.len() < 2 {
                continue;
            }
            let mut cuts: Vec<f64> = occ.iter().flat_map(|(c, _)| c.iter().copied()).collect();
            cuts.push(0.0);
            cuts.push(lens[a]);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let vs: Vec<f64> = occ.iter().map(|(c, v)| value_at(c, v, t)).collect();
                let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
                osc[a] = f64::max(osc[a], hi - lo);
                approx = vs.iter().fold(approx, |e, v| e.max((v - vs[0]).abs()));
            }
        }
        raw.push((ell, osc, approx));
    }
    raw.reverse();
    let c_tilde = raw
        .iter()
        .flat_map(|(ell, osc, _)| osc.iter().enumerate().map(move |(a, o)| (ell, a, o)))
        .map(|(&ell, a, o)| if *o == 0.0 { 0.0 } else { o / mu.levels[ell][a] })
        .fold(0.0, f64::max);
    let norm = sup + c_tilde;
    let levels = raw
        .into_iter()
        .map(|(level, oscillation, approx_error)| {
            let max_mu = mu.levels[level].iter().copied().fold(0.0, f64::max);
            LevelOscillation { level, oscillation, approx_error, approx_bound: norm * max_mu }
        })
        .collect();
    Ok(WeakLipschitz { sup, c_tilde, norm, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::SubstitutionSequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_towers_have_zero_constant() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(0, 60).unwrap();
        let roofs = sys.roof_levels(&[1.0, 1.0], 0).unwrap();
        let f = CylFunction::new(0, vec![Profile::constant(2.0), Profile::constant(-3.0)]);
        let w = weakly_lipschitz_norm(&sys, &f, &roofs, &mu).unwrap();
        assert_eq!(w.c_tilde, 0.0);
        assert_eq!(w.norm, 3.0);
    }

    #[test]
    fn saturating_function_has_unit_constant() {
        let sys = SAdicSystem::fibonacci();
        let mu = sys.invariant_measure(1, 60).unwrap();
        let s = [1.0, 1.0];
        let roofs = sys.roof_levels(&s, 1).unwrap();
        // Tower over letter 1 at level 1 reads "12"; the copy of letter 1
        // inside it carries μ(ζ[1]) while the copy inside the tower over 2 carries 0.
        let frac = s[0] / (s[0] + s[1]);
        let f = CylFunction::new(
            1,
            vec![Profile::piecewise(vec![frac], vec![mu.levels[0][0], 0.0]).unwrap(), Profile::constant(0.0)],
        );
        let w = weakly_lipschitz_norm(&sys, &f, &roofs, &mu).unwrap();
        assert!((w.c_tilde - 1.0).abs() < 1e-12);
        assert_eq!(w.levels[1].oscillation, vec![0.0, 0.0]);
    }

    #[test]
    fn approximation_bound_holds_on_random_functions() {
        let seq = SubstitutionSequence::periodic(vec![
            crate::symbolic::Substitution::parse(&["12", "31", "3"]).unwrap(),
            crate::symbolic::Substitution::parse(&["1", "23", "21"]).unwrap(),
        ])
        .unwrap();
        let sys = SAdicSystem::new(seq);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let level = rng.gen_range(1..5);
            let mu = sys.invariant_measure(level, 80).unwrap();
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..2.0)).collect();
            let roofs = sys.roof_levels(&s, level).unwrap();
            let profiles = (0..3)
                .map(|_| {
                    let k = rng.gen_range(0..4);
                    let mut breaks: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..0.99)).collect();
                    breaks.sort_by(f64::total_cmp);
                    breaks.dedup();
                    let values = (0..=breaks.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    Profile::piecewise(breaks, values).unwrap()
                })
                .collect();
            let f = CylFunction::new(level, profiles);
            let w = weakly_lipschitz_norm(&sys, &f, &roofs, &mu).unwrap();
            for l in &w.levels {
                assert!(l.approx_error <= l.approx_bound + 1e-12);
                assert!(l.approx_error <= 2.0 * w.sup + 1e-12);
            }
            assert!(w.levels[level].approx_error == 0.0);
        }
    }
}
