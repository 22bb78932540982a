use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{smooth_heaviside, ModelParams, StateVec, SystemReal};

use super::smoothed::{integrate, RkOptions};
use super::Trajectory;

/// Parameter that drifts linearly in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampedParam {
    /// Frequency of the forcing term with the given index.
    Omega(usize),
    /// Offset of the switching function.
    D,
}

/// How a drifting frequency enters the forcing argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhaseConvention {
    /// `θ(t) = φ + ∫ ω(s) ds`, accumulated from the ramp start.
    #[default]
    Integrated,
    /// `θ(t) = φ + ω(t)·t`.
    Instantaneous,
}

/// `value(t) = start + slope·(t − t_start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRamp {
    pub param: RampedParam,
    pub start: f64,
    pub slope: f64,
    pub t_start: f64,
    #[serde(default)]
    pub convention: PhaseConvention,
}

impl ParamRamp {
    /// Ramp from `from` at `t0` to `to` at `t1`.
    pub fn linear(param: RampedParam, t0: f64, from: f64, t1: f64, to: f64) -> Self {
        ParamRamp {
            param,
            start: from,
            slope: (to - from) / (t1 - t0),
            t_start: t0,
            convention: PhaseConvention::Integrated,
        }
    }

    pub fn with_convention(mut self, convention: PhaseConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        self.start + self.slope * (t - self.t_start)
    }

    /// Forcing phase (without the term's own φ) for an ω-ramp.
    pub fn phase(&self, t: f64) -> f64 {
        match self.convention {
            PhaseConvention::Integrated => {
                let s = t - self.t_start;
                self.start * s + 0.5 * self.slope * s * s
            }
            PhaseConvention::Instantaneous => self.value(t) * t,
        }
    }

    /// Instantaneous angular velocity of the forcing argument.
    pub fn phase_rate(&self, t: f64) -> f64 {
        match self.convention {
            PhaseConvention::Integrated => self.value(t),
            PhaseConvention::Instantaneous => self.value(t) + self.slope * t,
        }
    }
}

/// Integrate the smoothed system while one parameter drifts linearly.
///
/// `sys` supplies the fixed operators; the ramped quantity overrides the
/// corresponding entry of `sys.forcing` or `sys.d`.
pub fn propagate_ramped(
    sys: &SystemReal,
    params: &ModelParams,
    ramp: &ParamRamp,
    t0: f64,
    x0: StateVec,
    t_end: f64,
    opts: &RkOptions,
) -> Result<Trajectory> {
    let eta = params.eta;
    let terms = sys.forcing.terms.clone();
    if let RampedParam::Omega(k) = ramp.param {
        if k >= terms.len() {
            return Err(Error::InvalidInput(format!("ramp targets forcing term {k}, only {} present", terms.len())));
        }
    }
    let forcing = |t: f64| -> f64 {
        terms
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let theta = match ramp.param {
                    RampedParam::Omega(j) if j == k => ramp.phase(t),
                    _ => f.omega * t,
                };
                f.mu * (theta + f.phase).sin()
            })
            .sum()
    };
    let d_of = |t: f64| match ramp.param {
        RampedParam::D => ramp.value(t),
        RampedParam::Omega(_) => sys.d,
    };
    let d_rate = match ramp.param {
        RampedParam::D => ramp.slope,
        RampedParam::Omega(_) => 0.0,
    };
    let jump = sys.b_plus - sys.b_minus;
    integrate(
        |t, x| {
            let h = smooth_heaviside(eta, sys.c.dot(x) + d_of(t));
            sys.l * *x + sys.b_minus + jump.scale(h) + sys.e.scale(forcing(t))
        },
        |t, x| sys.c.dot(x) + d_of(t),
        |_, _, xdot| sys.c.dot(xdot) + d_rate,
        t0,
        x0,
        t_end,
        opts,
    )
}
