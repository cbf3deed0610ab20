//! Parsers for command-line values.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use delaycert::search::linspace;
use delaycert::sim::HistoryFunction;
use delaycert::EpsilonProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A grid given as `lo:hi:count` or as a comma-separated list.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Grid(Vec::new()));
        }
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [lo, hi, count] = parts[..] else {
                bail!("range grid must look like lo:hi:count, got {s:?}");
            };
            let lo: f64 = lo.trim().parse().with_context(|| format!("bad grid start {lo:?}"))?;
            let hi: f64 = hi.trim().parse().with_context(|| format!("bad grid end {hi:?}"))?;
            let count: usize = count
                .trim()
                .parse()
                .with_context(|| format!("bad grid count {count:?}"))?;
            linspace(lo, hi, count)
        } else {
            parse_list(s)?
        };
        if values.iter().any(|v| !v.is_finite()) {
            bail!("grid values must be finite");
        }
        Ok(Grid(values))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
        .collect()
}

/// Structured-slack multipliers: `ones`, `skip-delayed`, or `e1,e2,e3,e4`.
pub fn parse_profile(s: &str) -> Result<EpsilonProfile> {
    let profile = match s.trim() {
        "ones" => EpsilonProfile::ONES,
        "skip-delayed" => EpsilonProfile::SKIP_DELAYED,
        other => {
            let v = parse_list(other)?;
            let [e1, e2, e3, e4] = v[..] else {
                bail!("a profile is `ones`, `skip-delayed` or four numbers e1,e2,e3,e4");
            };
            EpsilonProfile { e1, e2, e3, e4 }
        }
    };
    profile.validate()?;
    Ok(profile)
}

/// Where the initial function comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum HistorySource {
    /// `constant:v1,v2,...`
    Constant(Vec<f64>),
    /// `poly:c0;c1;...` with each `ck` a comma-separated vector.
    Polynomial(Vec<Vec<f64>>),
    /// `random:seed[:degree]`: coefficients uniform in `[−1, 1]`, degree 3 by default.
    Random { seed: u64, degree: usize },
    /// `file:path` holding a JSON history function.
    File(PathBuf),
}

impl FromStr for HistorySource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| anyhow!("history must be constant:…, poly:…, random:… or file:…, got {s:?}"))?;
        Ok(match kind {
            "constant" => HistorySource::Constant(parse_list(rest)?),
            "poly" => HistorySource::Polynomial(rest.split(';').map(parse_list).collect::<Result<_>>()?),
            "random" => {
                let (seed, degree) = match rest.split_once(':') {
                    Some((seed, degree)) => (seed, degree.parse().with_context(|| format!("bad degree {degree:?}"))?),
                    None => (rest, 3),
                };
                HistorySource::Random {
                    seed: seed.parse().with_context(|| format!("bad seed {seed:?}"))?,
                    degree,
                }
            }
            "file" => HistorySource::File(PathBuf::from(rest)),
            other => bail!("unknown history kind {other:?}"),
        })
    }
}

impl HistorySource {
    /// Builds the history for an `n`-dimensional state.
    pub fn resolve(&self, n: usize) -> Result<HistoryFunction> {
        let f = match self {
            HistorySource::Constant(v) => HistoryFunction::constant(v),
            HistorySource::Polynomial(c) => HistoryFunction::polynomial(c.clone())?,
            HistorySource::Random { seed, degree } => random_polynomial(n, *degree, *seed)?,
            HistorySource::File(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing history file {}", path.display()))?
            }
        };
        if f.dim() != n {
            bail!("history has dimension {}, the system has {n} states", f.dim());
        }
        Ok(f)
    }
}

/// Polynomial history with coefficients drawn uniformly from `[−1, 1]`.
pub fn random_polynomial(n: usize, degree: usize, seed: u64) -> Result<HistoryFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..=degree)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    Ok(HistoryFunction::polynomial(coeffs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!("0:1:3".parse::<Grid>().unwrap().0, vec![0.0, 0.5, 1.0]);
        assert_eq!("0.1, 0.2".parse::<Grid>().unwrap().0, vec![0.1, 0.2]);
        assert!("".parse::<Grid>().unwrap().0.is_empty());
        assert!("0:1:0".parse::<Grid>().unwrap().0.is_empty());
        assert!("0:1".parse::<Grid>().is_err());
        assert!("a,b".parse::<Grid>().is_err());
    }

    #[test]
    fn histories() {
        let c: HistorySource = "constant:1,1".parse().unwrap();
        assert_eq!(c, HistorySource::Constant(vec![1.0, 1.0]));
        assert_eq!(c.resolve(2).unwrap().eval(-0.3), vec![1.0, 1.0]);
        assert!(c.resolve(3).is_err());
        let p: HistorySource = "poly:1,0;0,2".parse().unwrap();
        assert_eq!(p.resolve(2).unwrap().eval(-0.5), vec![1.0, -1.0]);
        let r: HistorySource = "random:7".parse().unwrap();
        assert_eq!(r, HistorySource::Random { seed: 7, degree: 3 });
        assert_eq!(r.resolve(2).unwrap(), r.resolve(2).unwrap());
        assert!("spline:1".parse::<HistorySource>().is_err());
    }

    #[test]
    fn profiles() {
        assert_eq!(parse_profile("ones").unwrap(), EpsilonProfile::ONES);
        assert_eq!(parse_profile("1,0,1,1").unwrap(), EpsilonProfile::SKIP_DELAYED);
        assert!(parse_profile("1,1,0,1").is_err());
        assert!(parse_profile("1,1").is_err());
    }
}
