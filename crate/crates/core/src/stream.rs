//! Monotone bound streams.
//!
//! Lower streams are nondecreasing and upper streams nonincreasing; the
//! direction invariant is enforced at emission time so a violated push is a
//! bug in the producer, never silently recorded.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("{direction:?} stream violated monotonicity: stage {stage} value {value} after {previous}")]
    Monotonicity { direction: Direction, stage: u32, value: f64, previous: f64 },
    #[error("bound value must be finite, got {0}")]
    NotFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Emission<C> {
    pub stage: u32,
    pub value: f64,
    pub certificate: C,
}

impl<C> Emission<C> {
    /// Every f64 is an exact rational; this is the emission's bound as one.
    pub fn value_as_rational(&self) -> BigRational {
        BigRational::from_float(self.value).expect("finite by construction")
    }
}

/// A certified bound sequence with enforced direction monotonicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundStream<C> {
    direction: Direction,
    emissions: Vec<Emission<C>>,
}

impl<C> BoundStream<C> {
    pub fn new(direction: Direction) -> Self {
        BoundStream { direction, emissions: Vec::new() }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn push(&mut self, stage: u32, value: f64, certificate: C) -> Result<(), StreamError> {
        if !value.is_finite() {
            return Err(StreamError::NotFinite(value));
        }
        if let Some(last) = self.emissions.last() {
            let bad = match self.direction {
                Direction::Lower => value < last.value,
                Direction::Upper => value > last.value,
            };
            if bad {
                return Err(StreamError::Monotonicity {
                    direction: self.direction,
                    stage,
                    value,
                    previous: last.value,
                });
            }
        }
        self.emissions.push(Emission { stage, value, certificate });
        Ok(())
    }

    /// Pushes the running max (lower) / min (upper) of the previous value and
    /// `value`, so any certified bound can be folded in without violating the
    /// direction invariant. Returns true when `value` itself was recorded.
    pub fn push_clamped(&mut self, stage: u32, value: f64, certificate: C) -> Result<bool, StreamError> {
        if !value.is_finite() {
            return Err(StreamError::NotFinite(value));
        }
        let improved = match (self.emissions.last(), self.direction) {
            (None, _) => true,
            (Some(last), Direction::Lower) => value >= last.value,
            (Some(last), Direction::Upper) => value <= last.value,
        };
        if improved {
            self.emissions.push(Emission { stage, value, certificate });
        }
        Ok(improved)
    }

    pub fn emissions(&self) -> &[Emission<C>] {
        &self.emissions
    }

    pub fn latest(&self) -> Option<&Emission<C>> {
        self.emissions.last()
    }

    pub fn latest_value(&self) -> Option<f64> {
        self.emissions.last().map(|e| e.value)
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }
}
