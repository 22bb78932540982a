use crate::error::{Error, Result};
use crate::linalg3::Vec3;
use crate::model::{RegionLabel, StateVec, SystemReal};
use crate::roots::brent;

use super::{Event, EventKind, Extremum, ExtremumKind, FlowOptions, GrazePolicy, Sample, Trajectory};

const MAX_ROOT_ITER: usize = 200;

/// One closed-form arc `X(t) = e^{L(t−t₀)}(X₀ − f(t₀)) + f(t)` inside a
/// single region, stored in modal coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    sys: &'a SystemReal,
    pub t0: f64,
    pub region: RegionLabel,
    modal: Vec3,
    weights: [f64; 3],
    f_rest: f64,
}

impl<'a> Segment<'a> {
    pub fn new(sys: &'a SystemReal, region: RegionLabel, t0: f64, x0: StateVec) -> Self {
        let modal = sys.eigen.u_inv * (x0 - sys.offset(region, t0));
        let weights = [0, 1, 2].map(|i| sys.c_modes[i] * modal[i]);
        let f_rest = sys.c.dot(&sys.rest_offset(region)) + sys.d;
        Segment { sys, t0, region, modal, weights, f_rest }
    }

    fn decay(&self, t: f64) -> [f64; 3] {
        let s = t - self.t0;
        self.sys.eigen.lambda.map(|l| (-l * s).exp())
    }

    pub fn state(&self, t: f64) -> StateVec {
        let e = self.decay(t);
        let y = Vec3([self.modal[0] * e[0], self.modal[1] * e[1], self.modal[2] * e[2]]);
        self.sys.eigen.u * y + self.sys.offset(self.region, t)
    }

    /// `F(t)` along the arc.
    pub fn f(&self, t: f64) -> f64 {
        let e = self.decay(t);
        let mut v = self.f_rest;
        for i in 0..3 {
            v += self.weights[i] * e[i];
        }
        for h in &self.sys.harmonics {
            let (s, c) = (h.omega * t + h.phase).sin_cos();
            v += h.cp * c + h.cq * s;
        }
        v
    }

    pub fn f_dot(&self, t: f64) -> f64 {
        let e = self.decay(t);
        let lam = self.sys.eigen.lambda;
        let mut v = 0.0;
        for i in 0..3 {
            v -= lam[i] * self.weights[i] * e[i];
        }
        for h in &self.sys.harmonics {
            let (s, c) = (h.omega * t + h.phase).sin_cos();
            v += h.omega * (h.cq * c - h.cp * s);
        }
        v
    }

    pub fn f_ddot(&self, t: f64) -> f64 {
        let e = self.decay(t);
        let lam = self.sys.eigen.lambda;
        let mut v = 0.0;
        for i in 0..3 {
            v += lam[i] * lam[i] * self.weights[i] * e[i];
        }
        for h in &self.sys.harmonics {
            let (s, c) = (h.omega * t + h.phase).sin_cos();
            v -= h.omega * h.omega * (h.cp * c + h.cq * s);
        }
        v
    }
}

enum SegmentEnd {
    Horizon,
    Switch { t: f64, state: StateVec },
}

struct Scanner<'a> {
    sys: &'a SystemReal,
    opts: FlowOptions,
    /// +1 forward, −1 backward in time.
    dir: f64,
    step: f64,
    virtual_window: f64,
    events: Vec<Event>,
    extrema: Vec<Extremum>,
    samples: Vec<Sample>,
    t0: f64,
    next_sample: u64,
}

/// Default scan step `min(π/(4ω_max), 1/(4λ₃))`.
pub(crate) fn default_scan_step(sys: &SystemReal) -> f64 {
    let by_decay = 1.0 / (4.0 * sys.eigen.lambda[2]);
    match sys.forcing.max_omega() {
        Some(w) => by_decay.min(std::f64::consts::PI / (4.0 * w)),
        None => by_decay,
    }
}

impl<'a> Scanner<'a> {
    fn new(sys: &'a SystemReal, opts: FlowOptions, dir: f64, t0: f64) -> Self {
        let step = opts.scan_step.unwrap_or_else(|| default_scan_step(sys));
        let period = sys.forcing.period().unwrap_or(50.0);
        Scanner {
            sys,
            opts,
            dir,
            step,
            virtual_window: (0.25 * period).min(20.0).max(4.0 * step),
            events: Vec::new(),
            extrema: Vec::new(),
            samples: Vec::new(),
            t0,
            next_sample: 0,
        }
    }

    fn ahead(&self, a: f64, b: f64) -> bool {
        (b - a) * self.dir > 0.0
    }

    fn push_event(&mut self, seg: &Segment, t: f64, kind: EventKind) -> Result<StateVec> {
        let state = seg.state(t);
        let jump = self.sys.f_ddot_jump();
        self.events.push(Event {
            t,
            state,
            kind,
            f_dot: seg.f_dot(t),
            f_ddot_incoming: seg.f_ddot(t),
            f_ddot_jump: jump,
        });
        if self.events.len() > self.opts.max_events {
            return Err(Error::EventStorm { t, max: self.opts.max_events });
        }
        Ok(state)
    }

    fn push_extremum(&mut self, seg: &Segment, t: f64, g_curvature_positive: bool, virtual_: bool) {
        if !self.opts.record_extrema {
            return;
        }
        let f = seg.f(t);
        // g = s·F; along the direction of travel a minimum of g is a
        // minimum of F in S⁺ and a maximum of F in S⁻.
        let f_is_min = g_curvature_positive == (seg.region == RegionLabel::Plus);
        self.extrema.push(Extremum {
            t,
            f,
            kind: if f_is_min { ExtremumKind::Min } else { ExtremumKind::Max },
            region: seg.region,
            virtual_,
        });
    }

    fn emit_samples(&mut self, seg: &Segment, until: f64, inclusive: bool) {
        let Some(dt) = self.opts.output_step else { return };
        loop {
            let t = self.t0 + self.dir * dt * self.next_sample as f64;
            let before = if inclusive { (until - t) * self.dir >= -1e-9 * dt } else { self.ahead(t, until) };
            if !before {
                break;
            }
            let state = seg.state(t);
            self.samples.push(Sample { t, state, f: self.sys.switching_value(&state), region: seg.region });
            self.next_sample += 1;
        }
    }

    /// Locate the minimum of the segment's closed form just past a crossing.
    fn record_virtual_dip(&mut self, seg: &Segment, t_cross: f64, gp: &dyn Fn(f64) -> f64) {
        if !self.opts.record_extrema {
            return;
        }
        let mut ta = t_cross;
        let mut gpa = gp(ta);
        let limit = t_cross + self.dir * self.virtual_window;
        let h = self.step.min(self.virtual_window);
        while self.ahead(ta, limit) {
            let mut tb = ta + self.dir * h;
            if !self.ahead(tb, limit) {
                tb = limit;
            }
            let gpb = gp(tb);
            if gpa < 0.0 && gpb >= 0.0 {
                if let Some(tm) = brent(gp, ta, tb, self.opts.eps_t, MAX_ROOT_ITER) {
                    self.push_extremum(seg, tm, true, true);
                }
                return;
            }
            ta = tb;
            gpa = gpb;
        }
    }

    fn scan(&mut self, seg: &Segment, at_switch: bool, t_end: f64) -> Result<SegmentEnd> {
        let s = seg.region.sign();
        let dir = self.dir;
        let g = |t: f64| s * seg.f(t);
        let gp = |t: f64| dir * s * seg.f_dot(t);
        let backward = dir < 0.0;

        let mut ta = seg.t0;
        let mut ga = if at_switch { 0.0 } else { g(ta) };
        let mut gpa = gp(ta);
        loop {
            let mut tb = ta + dir * self.step;
            let last = !self.ahead(tb, t_end);
            if last {
                tb = t_end;
            }
            let gb = g(tb);
            let gpb = gp(tb);

            if gb < 0.0 {
                // Left the region somewhere in (ta, tb].
                let lo = if ga > 0.0 {
                    ta
                } else {
                    // Segment starts on Σ and returns within one step: bracket
                    // from the interior maximum.
                    let tmax = if gpa > 0.0 && gpb < 0.0 {
                        brent(gp, ta, tb, self.opts.eps_t, MAX_ROOT_ITER).ok_or(Error::NonConvergedRoot { t: ta })?
                    } else {
                        ta
                    };
                    if g(tmax) <= 0.0 {
                        return Err(Error::EventStorm { t: ta, max: self.opts.max_events });
                    }
                    tmax
                };
                let t_star =
                    brent(g, lo, tb, self.opts.eps_t, MAX_ROOT_ITER).ok_or(Error::NonConvergedRoot { t: lo })?;
                if backward && seg.f_dot(t_star).abs() < self.opts.eps_fdot {
                    return Err(Error::BackwardEventAmbiguity { t: t_star });
                }
                self.record_virtual_dip(seg, t_star, &gp);
                let kind = crossing_kind(seg.region, backward);
                let state = self.push_event(seg, t_star, kind)?;
                return Ok(SegmentEnd::Switch { t: t_star, state });
            }

            if gpa < 0.0 && gpb > 0.0 {
                // Tangency candidate: minimum of g.
                let tm = brent(gp, ta, tb, self.opts.eps_t, MAX_ROOT_ITER).ok_or(Error::NonConvergedRoot { t: ta })?;
                let gm = g(tm);
                if at_switch && (tm - seg.t0).abs() <= 1e3 * self.opts.eps_t {
                    // The tangency this segment was started from.
                } else if gm > self.opts.eps_graze {
                    self.push_extremum(seg, tm, true, false);
                } else if gm >= -self.opts.eps_graze {
                    if backward {
                        return Err(Error::BackwardEventAmbiguity { t: tm });
                    }
                    self.push_extremum(seg, tm, true, false);
                    if self.opts.graze_policy == GrazePolicy::Cross && self.enters_other_region(seg, tm) {
                        let kind = crossing_kind(seg.region, backward);
                        let state = self.push_event(seg, tm, kind)?;
                        return Ok(SegmentEnd::Switch { t: tm, state });
                    }
                    self.push_event(seg, tm, EventKind::Graze)?;
                } else {
                    // Dips through Σ and back within the step: leave at the first root.
                    let lo = if ga > 0.0 { ta } else { ta + 0.5 * (tm - ta) };
                    let t_star =
                        brent(g, lo, tm, self.opts.eps_t, MAX_ROOT_ITER).ok_or(Error::NonConvergedRoot { t: ta })?;
                    if backward && seg.f_dot(t_star).abs() < self.opts.eps_fdot {
                        return Err(Error::BackwardEventAmbiguity { t: t_star });
                    }
                    self.push_extremum(seg, tm, true, true);
                    let kind = crossing_kind(seg.region, backward);
                    let state = self.push_event(seg, t_star, kind)?;
                    return Ok(SegmentEnd::Switch { t: t_star, state });
                }
            } else if gpa > 0.0 && gpb < 0.0 && self.opts.record_extrema {
                if let Some(tm) = brent(gp, ta, tb, self.opts.eps_t, MAX_ROOT_ITER) {
                    self.push_extremum(seg, tm, false, false);
                }
            }

            if last {
                return Ok(SegmentEnd::Horizon);
            }
            ta = tb;
            ga = gb;
            gpa = gpb;
        }
    }

    /// Whether switching at a tangency actually carries the state into the
    /// other region (its curvature there points away from Σ).
    fn enters_other_region(&self, seg: &Segment, t: f64) -> bool {
        let x = seg.state(t);
        let other = seg.region.other();
        other.sign() * self.sys.f_ddot(other, t, &x) > 0.0
    }
}

fn crossing_kind(leaving: RegionLabel, backward: bool) -> EventKind {
    // Events are labelled in forward time.
    let from_plus = (leaving == RegionLabel::Plus) != backward;
    if from_plus {
        EventKind::CrossPlusToMinus
    } else {
        EventKind::CrossMinusToPlus
    }
}

fn run(sys: &SystemReal, t0: f64, x0: StateVec, t_end: f64, opts: &FlowOptions, dir: f64) -> Result<Trajectory> {
    if !x0.is_finite() || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput("non-finite initial data".into()));
    }
    if (t_end - t0) * dir <= 0.0 {
        return Err(Error::InvalidInput(format!("empty time interval [{t0}, {t_end}]")));
    }
    let f0 = sys.switching_value(&x0);
    let mut at_switch = false;
    let region0 = if f0.abs() < opts.eps_f {
        // On Σ: Ḟ is the same on both sides; pick the side we move into.
        let fd = sys.f_dot(RegionLabel::Plus, t0, &x0);
        if fd.abs() < opts.eps_fdot {
            return Err(Error::DegenerateStart);
        }
        at_switch = true;
        if fd * dir > 0.0 {
            RegionLabel::Plus
        } else {
            RegionLabel::Minus
        }
    } else {
        RegionLabel::of_value(f0)
    };

    let mut scanner = Scanner::new(sys, *opts, dir, t0);
    let mut seg = Segment::new(sys, region0, t0, x0);
    loop {
        match scanner.scan(&seg, at_switch, t_end)? {
            SegmentEnd::Horizon => {
                scanner.emit_samples(&seg, t_end, true);
                let x_end = seg.state(t_end);
                if !(x_end.norm_inf() <= opts.divergence_bound) {
                    return Err(Error::DivergedTrajectory { t: t_end });
                }
                return Ok(Trajectory {
                    t0,
                    x0,
                    region0,
                    events: scanner.events,
                    extrema: scanner.extrema,
                    samples: scanner.samples,
                    t_end,
                    x_end,
                    region_end: seg.region,
                });
            }
            SegmentEnd::Switch { t, state } => {
                scanner.emit_samples(&seg, t, false);
                if !(state.norm_inf() <= opts.divergence_bound) {
                    return Err(Error::DivergedTrajectory { t });
                }
                seg = Segment::new(sys, seg.region.other(), t, state);
                at_switch = true;
            }
        }
    }
}

/// Follow the discontinuous flow exactly from `(t0, x0)` to `t_end`.
///
/// Between switching events the state is the closed-form arc of the current
/// region. Sign changes of `F` are located by scanning at a fixed step and
/// refining with Brent's method; minima of `|F|` are refined on `Ḟ = 0` and
/// classified as grazes (`|F| ≤ eps_graze`) or double crossings.
pub fn propagate_exact(sys: &SystemReal, t0: f64, x0: StateVec, t_end: f64, opts: &FlowOptions) -> Result<Trajectory> {
    run(sys, t0, x0, t_end, opts, 1.0)
}

/// Time-reversed closed-form flow from `t0` back to `t_end < t0`.
///
/// Tangencies met on the way are reported as
/// [`Error::BackwardEventAmbiguity`] rather than resolved.
pub fn propagate_exact_backward(
    sys: &SystemReal,
    t0: f64,
    x0: StateVec,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    run(sys, t0, x0, t_end, opts, -1.0)
}
