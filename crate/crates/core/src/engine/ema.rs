use crate::{Error, Result};

pub const DEFAULT_TARGET_TAU: f64 = 0.005;

/// Online parameters and their exponentially averaged target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub current: Vec<f64>,
    pub target: Vec<f64>,
    pub tau: f64,
}

impl EmaState {
    pub fn new(current: Vec<f64>, target: Vec<f64>, tau: f64) -> Result<Self> {
        if current.len() != target.len() {
            return Err(Error::ShapeMismatch {
                left: current.len(),
                right: target.len(),
            });
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("EMA rate {tau} must lie in [0, 1]")));
        }
        Ok(Self { current, target, tau })
    }

    /// Target initialised to a copy of the current parameters.
    pub fn tracking(current: Vec<f64>, tau: f64) -> Result<Self> {
        let target = current.clone();
        Self::new(current, target, tau)
    }

    /// `θ̄ ← τθ + (1 − τ)θ̄`.
    pub fn update(&mut self) -> Result<()> {
        ema_blend(&mut self.target, &self.current, self.tau)
    }
}

pub fn ema_update(mut state: EmaState) -> Result<EmaState> {
    state.update()?;
    Ok(state)
}

pub fn ema_blend(target: &mut [f64], current: &[f64], tau: f64) -> Result<()> {
    if target.len() != current.len() {
        return Err(Error::ShapeMismatch {
            left: current.len(),
            right: target.len(),
        });
    }
    for (t, c) in target.iter_mut().zip(current) {
        *t = tau * c + (1.0 - tau) * *t;
    }
    Ok(())
}
