//! Experiment configuration: a TOML file overlaid with command-line flags.
//! Flags win. Every key is optional; each command fills its own defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use holderflow::cocycle::{Block, SubstitutionSequence};
use holderflow::flow::{normalize_roof, CylFunction, RoofVector};
use holderflow::rauzy::{rauzy_class, IetPermutation, RauzyPath, RauzyType};
use holderflow::symbolic::Substitution;
use holderflow::veech::ExactRoof;

use crate::error::{CliError, Result};
use crate::grid::parse_grid;

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Substitution sequence: fib | periodic:12,1;1,2 | iid:12,1;21,2 |
    /// explicit:12,1;1,2 | rauzy:3,2,1:ab | rauzy-iid:3,2,1:4
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<String>,

    /// Roof vector: golden | random | comma list such as 1,0.5
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roof: Option<String>,

    /// Observable: one | indicator:K (mean-zero) | raw-indicator:K
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,

    /// Permutation in one-row notation, e.g. 3,2,1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<String>,

    /// Basepoint of the good word; defaults to --pi
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,

    /// Frequency grid: a:b:step | log:lo:hi:count | list
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_grid: Option<String>,

    /// Integration time
    #[arg(long = "R", visible_alias = "r")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,

    /// Time grid: a:b:step | log:lo:hi:count | list
    #[arg(long = "R-grid", visible_alias = "r-grid")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<String>,

    /// Number of renormalization steps
    #[arg(long = "N", visible_alias = "n")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,

    /// Frequency range [1/B, B] for the covering count
    #[arg(long = "B", visible_alias = "b")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,

    /// QR re-orthonormalization period
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,

    /// Orbit start points for L² estimates
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,

    /// Renormalization level used to stratify start points
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,

    /// Orbit time budget, or enumeration budget for ek-count
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_loop_len: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_power: Option<usize>,

    /// Random samples for the lattice-constant check
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    /// Spectral CSV to fit
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    /// Also write SVG line charts
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` overlaid with every key set in `flags`.
    pub fn overlay(&self, flags: &ExperimentConfig) -> ExperimentConfig {
        let mut base = serde_json::to_value(self).expect("config serializes");
        let top = serde_json::to_value(flags).expect("config serializes");
        if let (Some(b), Some(t)) = (base.as_object_mut(), top.as_object()) {
            for (k, v) in t {
                b.insert(k.clone(), v.clone());
            }
        }
        serde_json::from_value(base).expect("overlay keeps the schema")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed_required(&self, what: &str) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::config("seed", format!("{what} is stochastic and needs --seed")))
    }

    pub fn omegas(&self, default: &str) -> Result<Vec<f64>> {
        match (&self.omega_grid, self.omega) {
            (Some(g), _) => parse_grid("omega_grid", g),
            (None, Some(w)) => Ok(vec![w]),
            (None, None) => parse_grid("omega_grid", default),
        }
    }

    /// Ascending time grid; without `r_grid`, `count` log-spaced points up to `R`.
    pub fn rs(&self, default_r: f64, count: usize) -> Result<Vec<f64>> {
        let mut rs = match &self.r_grid {
            Some(g) => parse_grid("r_grid", g)?,
            None => {
                let r = self.r.unwrap_or(default_r);
                if !(r > 1.0) {
                    return Err(CliError::config("r", "must exceed 1"));
                }
                parse_grid("r_grid", &format!("log:1:{r}:{count}"))?
            }
        };
        if rs.iter().any(|&r| !(r > 0.0)) {
            return Err(CliError::config("r_grid", "times must be positive"));
        }
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        Ok(rs)
    }

    pub fn sequence(&self) -> Result<SubstitutionSequence> {
        parse_sequence(self.seq.as_deref().unwrap_or("fib"), self.seed)
    }

    pub fn permutation(&self) -> Result<IetPermutation> {
        let text = self.pi.as_deref().ok_or_else(|| CliError::config("pi", "missing (e.g. --pi 3,2,1)"))?;
        IetPermutation::parse(text).map_err(|e| CliError::config("pi", e))
    }

    pub fn basepoint(&self) -> Result<IetPermutation> {
        match &self.start {
            Some(t) => IetPermutation::parse(t).map_err(|e| CliError::config("start", e)),
            None => self.permutation(),
        }
    }

    /// Roof vector for flows. `random` draws entries in `[1/2, 3/2)` and
    /// normalizes against `mu`.
    pub fn roof(&self, m: usize, mu: &[f64]) -> Result<Vec<f64>> {
        let text = self.roof.as_deref().unwrap_or("golden");
        let s = match text {
            "golden" => {
                if m != 2 {
                    return Err(CliError::config("roof", format!("golden roof needs m = 2, sequence has m = {m}")));
                }
                RoofVector::golden().s
            }
            "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed_required("roof = random")?);
                let raw = RoofVector::new((0..m).map(|_| rng.gen_range(0.5..1.5)).collect())
                    .map_err(|e| CliError::config("roof", e))?;
                normalize_roof(&raw, mu).map_err(|e| CliError::config("roof", e))?.s
            }
            list => parse_list("roof", list)?,
        };
        if s.len() != m {
            return Err(CliError::config("roof", format!("{} entries for alphabet of size {m}", s.len())));
        }
        RoofVector::new(s.clone()).map_err(|e| CliError::config("roof", e))?;
        Ok(s)
    }

    pub fn exact_roof(&self, m: usize) -> Result<ExactRoof> {
        let roof = match self.roof.as_deref().unwrap_or("golden") {
            "golden" => ExactRoof::Golden,
            "random" => return Err(CliError::config("roof", "veech needs an explicit roof (golden or a list)")),
            list => ExactRoof::Dyadic(parse_list("roof", list)?),
        };
        if roof.m() != m {
            return Err(CliError::config("roof", format!("{} entries for alphabet of size {m}", roof.m())));
        }
        Ok(roof)
    }

    /// Level-0 observable; mean-zero variants are centered against `mu`
    /// and `s`.
    pub fn observable(&self, mu: &[f64], s: &[f64]) -> Result<CylFunction> {
        let m = s.len();
        let text = self.function.as_deref().unwrap_or("indicator:1");
        let letter = |t: &str| -> Result<usize> {
            let k: usize = t.parse().map_err(|_| CliError::config("function", format!("bad letter {t:?}")))?;
            if k == 0 || k > m {
                return Err(CliError::config("function", format!("letter {k} outside 1..={m}")));
            }
            Ok(k - 1)
        };
        if text == "one" {
            return Ok(CylFunction::constant(m, 1.0));
        }
        if let Some(k) = text.strip_prefix("raw-indicator:") {
            return Ok(CylFunction::indicator(m, 0, letter(k)?));
        }
        if let Some(k) = text.strip_prefix("indicator:") {
            return CylFunction::indicator(m, 0, letter(k)?).centered(mu, s).map_err(|e| CliError::config("function", e));
        }
        Err(CliError::config("function", format!("unknown observable {text:?}")))
    }

    pub fn svg(&self) -> bool {
        self.svg.unwrap_or(false)
    }
}

fn parse_list(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::config(field, format!("not a number: {t:?}"))))
        .collect()
}

fn parse_substitutions(text: &str) -> Result<Vec<Substitution>> {
    text.split(';')
        .map(|sub| {
            let images: Vec<&str> = sub.split(',').map(str::trim).collect();
            Substitution::parse(&images).map_err(|e| CliError::config("seq", format!("{sub:?}: {e}")))
        })
        .collect()
}

pub fn parse_sequence(text: &str, seed: Option<u64>) -> Result<SubstitutionSequence> {
    let need_seed = || seed.ok_or_else(|| CliError::config("seed", format!("sequence {text:?} is stochastic and needs --seed")));
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let seq = match kind {
        "fib" | "fibonacci" => Ok(SubstitutionSequence::fibonacci()),
        "periodic" => SubstitutionSequence::periodic(parse_substitutions(rest)?),
        "iid" => SubstitutionSequence::iid(parse_substitutions(rest)?, need_seed()?),
        "explicit" => SubstitutionSequence::explicit(parse_substitutions(rest)?, Vec::new()),
        "rauzy" => {
            let (pi, labels) =
                rest.split_once(':').ok_or_else(|| CliError::config("seq", "expected rauzy:PI:LABELS"))?;
            let pi = IetPermutation::parse(pi).map_err(|e| CliError::config("seq", e))?;
            let labels = RauzyType::parse_labels(labels).map_err(|e| CliError::config("seq", e))?;
            let path = RauzyPath::new(&pi, &labels).map_err(|e| CliError::config("seq", e))?;
            if !path.is_loop() {
                return Err(CliError::config("seq", format!("path {} does not return to {pi}", path.label_string())));
            }
            SubstitutionSequence::periodic_blocks(vec![Block::new(path.substitution.clone(), labels.len(), path.label_string())])
        }
        "rauzy-iid" => {
            let (pi, len) =
                rest.split_once(':').ok_or_else(|| CliError::config("seq", "expected rauzy-iid:PI:MAXLEN"))?;
            let pi = IetPermutation::parse(pi).map_err(|e| CliError::config("seq", e))?;
            let max_len: usize = len.parse().map_err(|_| CliError::config("seq", format!("bad loop length {len:?}")))?;
            let graph = rauzy_class(&pi).map_err(|e| CliError::config("seq", e))?;
            let v = graph.vertex_index(&pi).expect("class contains its seed");
            let blocks = graph
                .first_return_loops(v, max_len)
                .into_iter()
                .map(|l| {
                    let p = RauzyPath::new(&pi, &l)?;
                    Ok(Block::new(p.substitution.clone(), l.len(), p.label_string()))
                })
                .collect::<holderflow::Result<Vec<_>>>()?;
            if blocks.is_empty() {
                return Err(CliError::config("seq", format!("no first-return loops of length <= {max_len}")));
            }
            SubstitutionSequence::iid_blocks(blocks, need_seed()?)
        }
        other => return Err(CliError::config("seq", format!("unknown sequence kind {other:?}"))),
    };
    seq.map_err(|e| CliError::config("seq", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig::from_toml("seq = \"fib\"\nomega = 0.5\nn = 10\n").unwrap();
        let flags = ExperimentConfig { omega: Some(2.0), ..Default::default() };
        let cfg = file.overlay(&flags);
        assert_eq!(cfg.omega, Some(2.0));
        assert_eq!(cfg.n, Some(10));
        assert_eq!(cfg.seq.as_deref(), Some("fib"));
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let e = ExperimentConfig::from_toml("omgea = 1.0").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("omgea"), "{e}");
    }

    #[test]
    fn sequences() {
        assert_eq!(parse_sequence("fib", None).unwrap().alphabet_size(), 2);
        assert_eq!(parse_sequence("periodic:12,1;1,21", None).unwrap().period(), Some(2));
        assert!(matches!(parse_sequence("iid:12,1;1,21", None), Err(CliError::Config(m)) if m.starts_with("seed")));
        assert_eq!(parse_sequence("rauzy:2,1:ab", None).unwrap().alphabet_size(), 2);
        assert_eq!(parse_sequence("rauzy-iid:3,2,1:4", Some(1)).unwrap().alphabet_size(), 3);
        assert!(parse_sequence("periodic:12,3", None).is_err());
    }

    #[test]
    fn random_roof_is_seeded_and_normalized() {
        let cfg = ExperimentConfig { roof: Some("random".into()), seed: Some(3), ..Default::default() };
        let mu = [0.6, 0.4];
        let a = cfg.roof(2, &mu).unwrap();
        assert_eq!(a, cfg.roof(2, &mu).unwrap());
        assert!((a[0] * mu[0] + a[1] * mu[1] - 1.0).abs() < 1e-12);
        let unseeded = ExperimentConfig { roof: Some("random".into()), ..Default::default() };
        assert!(unseeded.roof(2, &mu).is_err());
    }
}
