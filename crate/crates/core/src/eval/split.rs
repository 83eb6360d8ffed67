use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::RatingEvent;

#[derive(Clone, Debug, PartialEq)]
pub enum SplitStrategy {
    /// A seeded uniform sample of `fraction` of the events goes to test.
    Random { fraction: f64, seed: u64 },
    /// The latest `fraction` of the events (by timestamp) goes to test.
    Chronological { fraction: f64 },
    /// Events at or before `timestamp` train, later ones test.
    Checkpoint { timestamp: i64 },
}

impl SplitStrategy {
    /// Same strategy with the seed shifted by `offset` (random splits only).
    pub fn reseeded(&self, offset: u64) -> Self {
        match *self {
            SplitStrategy::Random { fraction, seed } => SplitStrategy::Random {
                fraction,
                seed: seed.wrapping_add(offset),
            },
            ref other => other.clone(),
        }
    }
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitStrategy::Random { fraction, seed } => write!(f, "random:{fraction}:{seed}"),
            SplitStrategy::Chronological { fraction } => write!(f, "chrono:{fraction}"),
            SplitStrategy::Checkpoint { timestamp } => write!(f, "until:{timestamp}"),
        }
    }
}

impl FromStr for SplitStrategy {
    type Err = Error;

    /// `random:<fraction>[:<seed>]`, `chrono:<fraction>` or `until:<timestamp>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParam {
            name: "split",
            reason,
        };
        let parts: Vec<&str> = s.split(':').collect();
        let fraction = |p: &str| -> Result<f64> {
            let f: f64 = p.parse().map_err(|_| bad(format!("bad fraction `{p}`")))?;
            if f > 0.0 && f < 1.0 {
                Ok(f)
            } else {
                Err(bad(format!("fraction must be in (0, 1), got {f}")))
            }
        };
        match parts.as_slice() {
            ["random", f] => Ok(SplitStrategy::Random {
                fraction: fraction(f)?,
                seed: 1,
            }),
            ["random", f, seed] => Ok(SplitStrategy::Random {
                fraction: fraction(f)?,
                seed: seed.parse().map_err(|_| bad(format!("bad seed `{seed}`")))?,
            }),
            ["chrono", f] => Ok(SplitStrategy::Chronological {
                fraction: fraction(f)?,
            }),
            ["until", t] => Ok(SplitStrategy::Checkpoint {
                timestamp: t.parse().map_err(|_| bad(format!("bad timestamp `{t}`")))?,
            }),
            _ => Err(bad(format!("unrecognised split `{s}`"))),
        }
    }
}

/// A partition of an event list into train and test, both in input order.
#[derive(Clone, Debug)]
pub struct HoldoutSplit {
    pub train: Vec<RatingEvent>,
    pub test: Vec<RatingEvent>,
    pub strategy: SplitStrategy,
}

/// Splits `events` (assumed timestamp-sorted for the chronological strategy).
pub fn split(events: &[RatingEvent], strategy: &SplitStrategy) -> Result<HoldoutSplit> {
    let n = events.len();
    let mut in_test = vec![false; n];
    match *strategy {
        SplitStrategy::Random { fraction, seed } => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let count = (fraction * n as f64).round() as usize;
            idx[..count].iter().for_each(|&i| in_test[i] = true);
        }
        SplitStrategy::Chronological { fraction } => {
            let count = (fraction * n as f64).round() as usize;
            in_test[n - count..].iter_mut().for_each(|t| *t = true);
        }
        SplitStrategy::Checkpoint { timestamp } => {
            for (flag, e) in in_test.iter_mut().zip(events) {
                *flag = e.timestamp > timestamp;
            }
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (e, &t) in events.iter().zip(&in_test) {
        if t {
            test.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok(HoldoutSplit {
        train,
        test,
        strategy: strategy.clone(),
    })
}
