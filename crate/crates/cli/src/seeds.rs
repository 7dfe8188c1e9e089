//! Seed selection for phase portraits.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umbrella_core::chaos::grid_point;
use umbrella_core::{billiard_map, BilliardTable, PhasePoint};

use crate::config::{bad, parse_list};

/// Redraws allowed per requested random seed before giving up.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum SeedSpec {
    /// Cell-centred `k × k` grid in normalized coordinates.
    Grid(usize),
    /// `count` uniform normalized points from a ChaCha8 stream.
    Random { count: usize, seed: u64 },
    /// Explicit normalized `(s, θ)` pairs.
    List(Vec<(f64, f64)>),
}

impl std::str::FromStr for SeedSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |p: &str| p.trim().parse::<u64>().map_err(|_| bad(format!("bad seed spec `{s}`")));
        match parts[..] {
            ["grid", k] => {
                let k = int(k)? as usize;
                if k == 0 {
                    return Err(bad("grid seeds need k >= 1"));
                }
                Ok(SeedSpec::Grid(k))
            }
            ["random", count, seed] => {
                let count = int(count)? as usize;
                if count == 0 {
                    return Err(bad("random seeds need count >= 1"));
                }
                Ok(SeedSpec::Random { count, seed: int(seed)? })
            }
            [list] => {
                let mut pairs = Vec::new();
                for pair in list.split(';').filter(|p| !p.trim().is_empty()) {
                    match parse_list(pair)?[..] {
                        [sn, tn] if (0.0..1.0).contains(&sn) && tn > 0.0 && tn < 1.0 => pairs.push((sn, tn)),
                        _ => {
                            return Err(bad(format!(
                                "seed `{pair}` must be s,theta with s in [0,1) and theta in (0,1)"
                            )))
                        }
                    }
                }
                if pairs.is_empty() {
                    return Err(bad("empty seed list"));
                }
                Ok(SeedSpec::List(pairs))
            }
            _ => Err(bad(format!("bad seed spec `{s}`"))),
        }
    }
}

impl SeedSpec {
    pub fn points(&self, table: &BilliardTable) -> Result<Vec<PhasePoint>> {
        Ok(match self {
            SeedSpec::Grid(k) => (0..k * k).map(|idx| grid_point(table, *k, idx / k, idx % k)).collect(),
            SeedSpec::List(pairs) => pairs
                .iter()
                .map(|&(sn, tn)| PhasePoint::from_normalized(table, sn, tn))
                .collect(),
            SeedSpec::Random { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*count);
                let mut draws = 0;
                while out.len() < *count {
                    draws += 1;
                    if draws > count * MAX_REDRAWS {
                        return Err(bad("could not draw nonsingular seeds"));
                    }
                    let x = PhasePoint::from_normalized(table, rng.gen::<f64>(), rng.gen::<f64>());
                    if x.theta > 0.0 && x.theta < std::f64::consts::PI && billiard_map(table, x).is_ok() {
                        out.push(x);
                    }
                }
                out
            }
        })
    }
}
