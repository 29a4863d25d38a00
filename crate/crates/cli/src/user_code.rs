use std::fmt;
use std::str::FromStr;

use ftb_core::hit_order::HitDesc;
use ftb_core::kernels::{Flow, UserCode};
use ftb_core::pipeline::HitContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserCodeSpec {
    /// Stop after `n` hits.
    MaxDepth(u32),
    /// After each hit, stop with probability `1/n`.
    ProbDepth(u32, u64),
    CountAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad user code {0:?} (expected maxdepth:N, probdepth:N:SEED or countall, with N >= 1)")]
pub struct BadUserCode(pub String);

impl FromStr for UserCodeSpec {
    type Err = BadUserCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadUserCode(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let depth = |p: &str| p.parse::<u32>().ok().filter(|&n| n >= 1).ok_or_else(bad);
        match parts.as_slice() {
            ["countall"] => Ok(UserCodeSpec::CountAll),
            ["maxdepth", n] => Ok(UserCodeSpec::MaxDepth(depth(n)?)),
            ["probdepth", n, seed] => Ok(UserCodeSpec::ProbDepth(
                depth(n)?,
                seed.parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for UserCodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserCodeSpec::MaxDepth(n) => write!(f, "maxdepth:{n}"),
            UserCodeSpec::ProbDepth(n, seed) => write!(f, "probdepth:{n}:{seed}"),
            UserCodeSpec::CountAll => f.write_str("countall"),
        }
    }
}

/// Per-pixel user code: counts its calls and remembers the last hit.
pub struct PixelUserCode {
    spec: UserCodeSpec,
    rng: Option<ChaCha8Rng>,
    pub count: u32,
    pub last: Option<HitDesc>,
}

impl PixelUserCode {
    /// Probabilistic depth draws from a ChaCha stream selected by the
    /// pixel coordinates, so results do not depend on render order.
    pub fn new(spec: UserCodeSpec, x: u32, y: u32) -> Self {
        let rng = match spec {
            UserCodeSpec::ProbDepth(_, seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((y as u64) << 32) | x as u64);
                Some(rng)
            }
            _ => None,
        };
        PixelUserCode {
            spec,
            rng,
            count: 0,
            last: None,
        }
    }
}

impl UserCode for PixelUserCode {
    fn on_hit(&mut self, hit: &HitDesc, _ctx: Option<&HitContext>) -> Flow {
        self.count += 1;
        self.last = Some(*hit);
        let stop = match self.spec {
            UserCodeSpec::CountAll => false,
            UserCodeSpec::MaxDepth(n) => self.count >= n,
            UserCodeSpec::ProbDepth(n, _) => {
                self.rng.as_mut().is_some_and(|rng| rng.gen_ratio(1, n))
            }
        };
        if stop {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(t: f32) -> HitDesc {
        HitDesc::new(t, 0, 0, 0).unwrap()
    }

    #[test]
    fn specs_parse_and_print() {
        for s in ["countall", "maxdepth:3", "probdepth:4:99"] {
            assert_eq!(s.parse::<UserCodeSpec>().unwrap().to_string(), s);
        }
        for s in [
            "maxdepth:0",
            "maxdepth",
            "probdepth:4",
            "probdepth:0:1",
            "all",
            "maxdepth:x",
        ] {
            assert!(s.parse::<UserCodeSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn max_depth_stops_at_n() {
        let mut u = PixelUserCode::new(UserCodeSpec::MaxDepth(2), 0, 0);
        assert_eq!(u.on_hit(&hit(1.0), None), Flow::Continue);
        assert_eq!(u.on_hit(&hit(2.0), None), Flow::Stop);
        assert_eq!((u.count, u.last), (2, Some(hit(2.0))));
    }

    #[test]
    fn prob_depth_is_reproducible_per_pixel() {
        let run = |x, y| {
            let mut u = PixelUserCode::new(UserCodeSpec::ProbDepth(4, 7), x, y);
            (0..64)
                .map(|i| u.on_hit(&hit(i as f32), None))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3, 5), run(3, 5));
        assert_ne!(run(3, 5), run(5, 3));
    }

    /// Against a depth-H oracle the expected number of calls before
    /// stopping is the truncated geometric mean (1 - (1-p)^H) / p.
    #[test]
    fn prob_depth_matches_truncated_geometric_mean() {
        for (n, depth) in [(4u32, 8u32), (2, 3), (10, 50)] {
            let p = 1.0 / n as f64;
            let expected = (1.0 - (1.0 - p).powi(depth as i32)) / p;
            let samples = 100_000u32;
            let mut total = 0u64;
            for i in 0..samples {
                let mut u = PixelUserCode::new(UserCodeSpec::ProbDepth(n, 42), i % 317, i / 317);
                for k in 0..depth {
                    if u.on_hit(&hit(k as f32), None) == Flow::Stop {
                        break;
                    }
                }
                total += u.count as u64;
            }
            let mean = total as f64 / samples as f64;
            assert!(
                (mean - expected).abs() <= 0.1 * expected,
                "n={n} depth={depth}: {mean} vs {expected}"
            );
        }
    }
}
