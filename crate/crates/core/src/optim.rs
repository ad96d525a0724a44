//! RMSprop without momentum or centering:
//!
//! ```text
//! r ← ρ·r + (1 − ρ)·g²
//! θ ← θ − η·g / (√r + ε)
//! ```

use crate::cells::ParamSet;
use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsConfig {
    /// Learning rate η.
    pub eta: f64,
    pub rho: f64,
    pub eps: f64,
}

impl RmsConfig {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// One squared-gradient accumulator per trainable array, all starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsState {
    pub config: RmsConfig,
    pub accum: ParamSet,
}

impl RmsState {
    pub fn new(config: RmsConfig, params: &ParamSet) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            accum: params.zeros_like(),
        })
    }

    /// Updates `params` in place.
    pub fn apply(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_same_shape(grads, "rmsprop")?;
        params.check_same_shape(&self.accum, "rmsprop")?;
        let RmsConfig { eta, rho, eps } = self.config;
        let grad_arrays = grads.arrays();
        for ((theta, r), (_, g)) in params
            .arrays_mut()
            .into_iter()
            .zip(self.accum.arrays_mut())
            .zip(grad_arrays)
        {
            for ((t, r), &g) in theta.iter_mut().zip(r.iter_mut()).zip(g) {
                *r = rho * *r + (1.0 - rho) * g * g;
                *t -= eta * g / (r.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Pure form of [`RmsState::apply`]: returns the updated parameters and state.
pub fn rmsprop_step(
    state: &RmsState,
    params: &ParamSet,
    grads: &ParamSet,
) -> Result<(ParamSet, RmsState)> {
    let mut new_state = state.clone();
    let mut new_params = params.clone();
    new_state.apply(&mut new_params, grads)?;
    Ok((new_params, new_state))
}
