//! Two-threshold relay (non-ideal switch), the elementary hysteron.
//!
//! Inputs are sampled, so a threshold counts as crossed as soon as a sample
//! reaches it: `v <= a1` forces the down state, `v >= a2` the up state, and
//! anything strictly between holds the previous output. A sample that jumps
//! over the whole band lands in the state implied by that sample alone.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relay output, always `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelayState {
    Down,
    Up,
}

impl RelayState {
    pub fn from_sign(sign: i8) -> Result<Self> {
        match sign {
            -1 => Ok(RelayState::Down),
            1 => Ok(RelayState::Up),
            other => Err(Error::Invalid(format!("relay output must be -1 or +1, got {other}"))),
        }
    }

    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            RelayState::Down => -1,
            RelayState::Up => 1,
        }
    }

    #[inline]
    pub fn value<T: Real>(self) -> T {
        match self {
            RelayState::Down => -T::one(),
            RelayState::Up => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayConfig<T> {
    a1: T,
    a2: T,
    initial: RelayState,
}

impl<T: Real> RelayConfig<T> {
    /// Lower threshold `a1`, upper threshold `a2` (strictly greater), initial output.
    pub fn new(a1: T, a2: T, initial: RelayState) -> Result<Self> {
        if !a1.is_finite() || !a2.is_finite() {
            return Err(Error::Invalid("relay thresholds must be finite".into()));
        }
        if a1 >= a2 {
            return Err(Error::Invalid(format!(
                "relay thresholds need a1 < a2, got a1 = {a1}, a2 = {a2}"
            )));
        }
        Ok(RelayConfig { a1, a2, initial })
    }

    pub fn a1(&self) -> T {
        self.a1
    }

    pub fn a2(&self) -> T {
        self.a2
    }

    pub fn initial(&self) -> RelayState {
        self.initial
    }

    /// Advances the relay by one input sample.
    pub fn step(&self, state: RelayState, v: T) -> Result<RelayState> {
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite relay input {v}")));
        }
        Ok(self.step_unchecked(state, v))
    }

    #[inline]
    pub(crate) fn step_unchecked(&self, state: RelayState, v: T) -> RelayState {
        if v <= self.a1 {
            RelayState::Down
        } else if v >= self.a2 {
            RelayState::Up
        } else {
            state
        }
    }

    /// Output sequence for `inputs`, starting from the configured initial state.
    pub fn trajectory(&self, inputs: &[T]) -> Result<Vec<RelayState>> {
        if inputs.is_empty() {
            return Err(Error::Invalid("relay trajectory needs at least one input".into()));
        }
        let mut state = self.initial;
        inputs
            .iter()
            .map(|&v| {
                state = self.step(state, v)?;
                Ok(state)
            })
            .collect()
    }
}

/// Indices `i` where `outputs[i] != outputs[i - 1]`.
pub fn switch_indices(outputs: &[RelayState]) -> Vec<usize> {
    outputs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i + 1)
        .collect()
}
