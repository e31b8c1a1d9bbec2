//! Offline Boolean and quantitative semantics over sampled signals.
//!
//! Temporal windows `[t + a, t + b]` are closed and include every sample
//! lying within half a sampling step of either endpoint.

use thiserror::Error;

use super::predicate::{eval_predicate, ObstacleLookup, PredicateError};
use super::Formula;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("signal must contain at least one sample")]
    Empty,
    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotonic { index: usize },
    #[error("sample {index} has {found} components, expected {expected}")]
    Ragged {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("signal ends at {available} s but the formula needs samples up to {needed} s")]
    TooShort { needed: f64, available: f64 },
    #[error("no sample at time {0}")]
    NotSampled(f64),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

/// Time-stamped state samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    half_step: f64,
}

impl Signal {
    pub fn new(samples: Vec<(f64, Vec<f64>)>) -> Result<Self, MonitorError> {
        if samples.is_empty() {
            return Err(MonitorError::Empty);
        }
        let dim = samples[0].1.len();
        let mut min_gap = f64::INFINITY;
        for (i, w) in samples.windows(2).enumerate() {
            let gap = w[1].0 - w[0].0;
            if gap.is_nan() || gap <= 0.0 {
                return Err(MonitorError::NonMonotonic { index: i + 1 });
            }
            min_gap = min_gap.min(gap);
        }
        for (index, (_, s)) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(MonitorError::Ragged {
                    index,
                    found: s.len(),
                    expected: dim,
                });
            }
        }
        let half_step = if min_gap.is_finite() {
            0.5 * min_gap
        } else {
            0.0
        };
        let (times, states) = samples.into_iter().unzip();
        Ok(Signal {
            times,
            states,
            half_step,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn slack(&self) -> f64 {
        self.half_step * (1.0 + 1e-9) + 1e-12
    }

    fn index_at(&self, t: f64) -> Result<usize, MonitorError> {
        let (lo, hi) = self.window(t, t);
        if lo < hi {
            // closest of the candidates
            let best = (lo..hi)
                .min_by(|&i, &j| {
                    (self.times[i] - t)
                        .abs()
                        .total_cmp(&(self.times[j] - t).abs())
                })
                .unwrap_or(lo);
            Ok(best)
        } else {
            Err(MonitorError::NotSampled(t))
        }
    }

    /// Half-open index range of samples inside `[from, to]` widened by the
    /// half-step slack.
    fn window(&self, from: f64, to: f64) -> (usize, usize) {
        let s = self.slack();
        let lo = self.times.partition_point(|&x| x < from - s);
        let hi = self.times.partition_point(|&x| x <= to + s);
        (lo, hi.max(lo))
    }

    fn check_coverage(&self, f: &Formula, t: f64) -> Result<usize, MonitorError> {
        let needed = t + f.horizon();
        if self.end() + self.slack() < needed {
            return Err(MonitorError::TooShort {
                needed,
                available: self.end(),
            });
        }
        self.index_at(t)
    }
}

struct Eval<'a> {
    s: &'a Signal,
    world: &'a dyn ObstacleLookup,
}

impl Eval<'_> {
    fn h(&self, p: &super::Predicate, i: usize) -> Result<f64, MonitorError> {
        Ok(eval_predicate(
            p,
            self.s.state(i),
            self.s.times[i],
            self.world,
        )?)
    }

    fn window(&self, i: usize, a: f64, b: f64) -> (usize, usize) {
        let t = self.s.times[i];
        self.s.window(t + a, t + b)
    }

    fn boolean(&self, f: &Formula, i: usize) -> Result<bool, MonitorError> {
        Ok(match f {
            Formula::True => true,
            Formula::Pred(p) => self.h(p, i)? >= 0.0,
            Formula::Not(p) => self.h(p, i)? < 0.0,
            Formula::And(l, r) => self.boolean(l, i)? && self.boolean(r, i)?,
            Formula::Eventually(iv, inner) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                for j in lo..hi {
                    if self.boolean(inner, j)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Always(iv, inner) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                for j in lo..hi {
                    if !self.boolean(inner, j)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Until(iv, l, r) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                // left must hold on every sample from i up to the witness
                let mut left_ok_upto = i;
                for j in lo..hi {
                    while left_ok_upto < j {
                        if !self.boolean(l, left_ok_upto)? {
                            return Ok(false);
                        }
                        left_ok_upto += 1;
                    }
                    if self.boolean(r, j)? && self.boolean(l, j)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    fn robustness(&self, f: &Formula, i: usize) -> Result<f64, MonitorError> {
        Ok(match f {
            Formula::True => f64::INFINITY,
            Formula::Pred(p) => self.h(p, i)?,
            Formula::Not(p) => -self.h(p, i)?,
            Formula::And(l, r) => self.robustness(l, i)?.min(self.robustness(r, i)?),
            Formula::Eventually(iv, inner) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                let mut best = f64::NEG_INFINITY;
                for j in lo..hi {
                    best = best.max(self.robustness(inner, j)?);
                }
                best
            }
            Formula::Always(iv, inner) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                let mut worst = f64::INFINITY;
                for j in lo..hi {
                    worst = worst.min(self.robustness(inner, j)?);
                }
                worst
            }
            Formula::Until(iv, l, r) => {
                let (lo, hi) = self.window(i, iv.a(), iv.b());
                let mut best = f64::NEG_INFINITY;
                let mut left_min = f64::INFINITY;
                let mut k = i;
                for j in lo..hi {
                    while k <= j {
                        left_min = left_min.min(self.robustness(l, k)?);
                        k += 1;
                    }
                    best = best.max(self.robustness(r, j)?.min(left_min));
                }
                best
            }
        })
    }
}

/// Boolean satisfaction of `f` by `s` at time `t`.
pub fn eval_boolean(
    f: &Formula,
    s: &Signal,
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<bool, MonitorError> {
    let i = s.check_coverage(f, t)?;
    Eval { s, world }.boolean(f, i)
}

/// Robustness degree of `f` on `s` at time `t`.
pub fn eval_robustness(
    f: &Formula,
    s: &Signal,
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<f64, MonitorError> {
    let i = s.check_coverage(f, t)?;
    Eval { s, world }.robustness(f, i)
}
