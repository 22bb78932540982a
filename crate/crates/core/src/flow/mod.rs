//! Trajectory propagation.
//!
//! [`propagate_exact`] follows the piecewise-linear Filippov flow in closed
//! form between switching events; [`propagate_smoothed`] and
//! [`propagate_ramped`] integrate the tanh-smoothed system with an adaptive
//! Dormand–Prince pair and are used for cross-checks, η-unfolding and slowly
//! varying parameters.

mod exact;
mod ramp;
mod smoothed;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use exact::{propagate_exact, propagate_exact_backward, Segment};
pub use ramp::{propagate_ramped, ParamRamp, PhaseConvention, RampedParam};
pub use smoothed::{propagate_smoothed, RkOptions};

use crate::io::fmt_f64;
use crate::model::{RegionLabel, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    CrossPlusToMinus,
    CrossMinusToPlus,
    Graze,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::CrossPlusToMinus => "CrossPlusToMinus",
            EventKind::CrossMinusToPlus => "CrossMinusToPlus",
            EventKind::Graze => "Graze",
        }
    }

    pub fn is_cross(self) -> bool {
        !matches!(self, EventKind::Graze)
    }
}

/// A crossing or tangency of the switching surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub state: StateVec,
    pub kind: EventKind,
    /// `Ḟ` at the event (continuous across Σ).
    pub f_dot: f64,
    /// `F̈` evaluated with the drive of the region the trajectory came from.
    pub f_ddot_incoming: f64,
    /// `F̈⁺ − F̈⁻` from the two one-sided closed forms.
    pub f_ddot_jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Min,
    Max,
}

/// A local extremum of `F` within one closed-form segment.
///
/// `virtual_` marks the minimum (maximum) of the segment's own closed form
/// that lies just past a crossing: the trajectory has already switched
/// region, but the value still measures how deep the dip through Σ was.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub f: f64,
    pub kind: ExtremumKind,
    pub region: RegionLabel,
    pub virtual_: bool,
}

impl Extremum {
    /// Signed distance to Σ measured toward it: positive when the extremum
    /// stays inside its own region.
    pub fn margin(&self) -> f64 {
        self.region.sign() * self.f
    }

    /// Extremum that points toward Σ (minimum in S⁺, maximum in S⁻).
    pub fn faces_switch(&self) -> bool {
        matches!(
            (self.region, self.kind),
            (RegionLabel::Plus, ExtremumKind::Min) | (RegionLabel::Minus, ExtremumKind::Max)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: StateVec,
    pub f: f64,
    pub region: RegionLabel,
}

/// What to do when a tangency is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GrazePolicy {
    /// Record the graze and stay in the current region.
    #[default]
    Stay,
    /// Record the graze and switch region at the tangency (the limit from
    /// the impacting side).
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Maximum number of events before giving up.
    pub max_events: usize,
    /// Dense output spacing; `None` records no samples.
    pub output_step: Option<f64>,
    /// Override of the sign-change scan step.
    pub scan_step: Option<f64>,
    /// Root tolerance in time.
    pub eps_t: f64,
    /// Required `|F|` at a refined crossing.
    pub eps_f: f64,
    /// `|F|` below which a tangential minimum counts as a graze.
    pub eps_graze: f64,
    /// Minimum of `|F|` below which a tangency candidate is examined.
    pub eps_scan: f64,
    /// `|Ḟ|` below which a crossing is degenerate.
    pub eps_fdot: f64,
    pub record_extrema: bool,
    pub graze_policy: GrazePolicy,
    /// Sup-norm bound signalling a runaway trajectory.
    pub divergence_bound: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_events: 100_000,
            output_step: Some(0.5),
            scan_step: None,
            eps_t: 1e-12,
            eps_f: 1e-10,
            eps_graze: 1e-8,
            eps_scan: 1e-3,
            eps_fdot: 1e-6,
            record_extrema: true,
            graze_policy: GrazePolicy::Stay,
            divergence_bound: 1e3,
        }
    }
}

impl FlowOptions {
    /// No dense output and no extrema: the cheapest configuration for maps.
    pub fn lean() -> Self {
        FlowOptions { output_step: None, record_extrema: false, ..FlowOptions::default() }
    }

    pub fn with_output(mut self, step: Option<f64>) -> Self {
        self.output_step = step;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub x0: StateVec,
    pub region0: RegionLabel,
    pub events: Vec<Event>,
    pub extrema: Vec<Extremum>,
    pub samples: Vec<Sample>,
    pub t_end: f64,
    pub x_end: StateVec,
    pub region_end: RegionLabel,
}

impl Trajectory {
    pub fn crossings(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind.is_cross())
    }

    pub fn grazes(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Graze)
    }

    /// Number of `S⁻ → S⁺` crossings (glacial inceptions) in `[t_lo, t_hi)`.
    pub fn inceptions_between(&self, t_lo: f64, t_hi: f64) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::CrossMinusToPlus && e.t >= t_lo && e.t < t_hi).count()
    }

    /// Write `t,V,A,C,F,region`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,V,A,C,F,region")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(s.t),
                fmt_f64(s.state[0]),
                fmt_f64(s.state[1]),
                fmt_f64(s.state[2]),
                fmt_f64(s.f),
                s.region.as_str()
            )?;
        }
        Ok(())
    }

    /// Write `t,kind,V,A,C,fdot`.
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,kind,V,A,C,fdot")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(e.t),
                e.kind.as_str(),
                fmt_f64(e.state[0]),
                fmt_f64(e.state[1]),
                fmt_f64(e.state[2]),
                fmt_f64(e.f_dot)
            )?;
        }
        Ok(())
    }
}
