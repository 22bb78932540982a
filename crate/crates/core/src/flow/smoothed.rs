use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg3::Vec3;
use crate::model::{ModelParams, RegionLabel, StateVec, SystemReal};
use crate::roots::brent;

use super::{Event, EventKind, Extremum, ExtremumKind, Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on accepted steps, so sign changes of F cannot hide
    /// inside a single step.
    pub h_max: f64,
    pub h_min: f64,
    pub output_step: Option<f64>,
    pub max_steps: usize,
    pub record_extrema: bool,
    pub divergence_bound: f64,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: 1.0,
            h_min: 1e-12,
            output_step: Some(0.5),
            max_steps: 50_000_000,
            record_extrema: true,
            divergence_bound: 1e3,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(acc: Vec3, terms: &[(f64, &Vec3)], h: f64) -> Vec3 {
    let mut out = acc;
    for (w, k) in terms {
        out += k.scale(w * h);
    }
    out
}

/// Continuous extension of one accepted step.
struct Dense {
    t_old: f64,
    h: f64,
    r: [Vec3; 5],
}

impl Dense {
    fn eval(&self, t: f64) -> Vec3 {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = self.r;
        r1 + (r2 + (r3 + (r4 + r5.scale(th1)).scale(th)).scale(th1)).scale(th)
    }
}

/// Adaptive Dormand–Prince integration of `ẋ = rhs(t, x)` with switching
/// function `switch(t, x)` (events and extrema reconstructed from the dense
/// output). `switch_rate(t, x, ẋ)` must return `dF/dt`.
pub(crate) fn integrate<R, S, D>(
    rhs: R,
    switch: S,
    switch_rate: D,
    t0: f64,
    x0: StateVec,
    t_end: f64,
    opts: &RkOptions,
) -> Result<Trajectory>
where
    R: Fn(f64, &Vec3) -> Vec3,
    S: Fn(f64, &Vec3) -> f64,
    D: Fn(f64, &Vec3, &Vec3) -> f64,
{
    if !(t_end > t0) || !x0.is_finite() {
        return Err(Error::InvalidInput(format!("bad integration interval [{t0}, {t_end}]")));
    }
    let region0 = RegionLabel::of_value(switch(t0, &x0));
    let mut events = Vec::new();
    let mut extrema = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = 0u64;

    let mut t = t0;
    let mut x = x0;
    let mut k1 = rhs(t, &x);
    let mut f_prev = switch(t, &x);
    let mut fd_prev = switch_rate(t, &x, &k1);
    let mut region = region0;

    // Initial step from the usual scale heuristic.
    let sc0 = x.0.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect::<Vec<_>>();
    let d0 = (x.0.iter().zip(&sc0).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / 3.0).sqrt();
    let d1 = (k1.0.iter().zip(&sc0).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / 3.0).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.clamp(opts.h_min, opts.h_max).min(t_end - t0);

    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = rhs(t + C2 * h, &axpy(x, &[(A21, &k1)], h));
        let k3 = rhs(t + C3 * h, &axpy(x, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(t + C4 * h, &axpy(x, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(t + C5 * h, &axpy(x, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = rhs(t + h, &axpy(x, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let x_new = axpy(x, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = rhs(t + h, &x_new);
        let err_vec = axpy(Vec3::ZERO, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)], h);
        let err = ((0..3)
            .map(|i| {
                let sc = opts.atol + opts.rtol * x[i].abs().max(x_new[i].abs());
                (err_vec[i] / sc).powi(2)
            })
            .sum::<f64>()
            / 3.0)
            .sqrt();

        if !err.is_finite() {
            h *= 0.1;
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            continue;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            continue;
        }

        // Accepted.
        let r2 = x_new - x;
        let r3 = k1.scale(h) - r2;
        let r4 = r2 - k7.scale(h) - r3;
        let r5 = axpy(Vec3::ZERO, &[(D1, &k1), (D3, &k3), (D4, &k4), (D5, &k5), (D6, &k6), (D7, &k7)], h);
        let dense = Dense { t_old: t, h, r: [x, r2, r3, r4, r5] };
        let t_new = t + h;

        if let Some(dt) = opts.output_step {
            loop {
                let ts = t0 + dt * next_sample as f64;
                if ts > t_new + 1e-9 * dt || (ts > t_new && !last) {
                    break;
                }
                let xs = if ts >= t_new { x_new } else { dense.eval(ts) };
                let fs = switch(ts, &xs);
                samples.push(Sample { t: ts, state: xs, f: fs, region: RegionLabel::of_value(fs) });
                next_sample += 1;
            }
        }

        let f_new = switch(t_new, &x_new);
        let fd_new = switch_rate(t_new, &x_new, &k7);
        let f_at = |s: f64| {
            let xs = dense.eval(s);
            switch(s, &xs)
        };
        if f_prev != 0.0 && f_new != 0.0 && f_prev.signum() != f_new.signum() {
            let tc = brent(f_at, t, t_new, 1e-12, 200).ok_or(Error::NonConvergedRoot { t })?;
            let xc = dense.eval(tc);
            let xdot = rhs(tc, &xc);
            let kind = if f_prev > 0.0 { EventKind::CrossPlusToMinus } else { EventKind::CrossMinusToPlus };
            events.push(Event {
                t: tc,
                state: xc,
                kind,
                f_dot: switch_rate(tc, &xc, &xdot),
                f_ddot_incoming: f64::NAN,
                f_ddot_jump: f64::NAN,
            });
            region = region.other();
        }
        if opts.record_extrema && fd_prev.signum() != fd_new.signum() && fd_prev != 0.0 {
            let rate_at = |s: f64| {
                let xs = dense.eval(s);
                switch_rate(s, &xs, &rhs(s, &xs))
            };
            if let Some(tm) = brent(rate_at, t, t_new, 1e-10, 200) {
                let fm = f_at(tm);
                let reg = RegionLabel::of_value(fm);
                extrema.push(Extremum {
                    t: tm,
                    f: fm,
                    kind: if fd_prev < 0.0 { ExtremumKind::Min } else { ExtremumKind::Max },
                    region: reg,
                    virtual_: false,
                });
            }
        }

        t = t_new;
        x = x_new;
        k1 = k7;
        f_prev = f_new;
        fd_prev = fd_new;
        if !(x.norm_inf() <= opts.divergence_bound) {
            return Err(Error::DivergedTrajectory { t });
        }

        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        h = (h * fac).min(opts.h_max);
        if h < opts.h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }

    Ok(Trajectory { t0, x0, region0, events, extrema, samples, t_end, x_end: x, region_end: region })
}

/// Integrate the tanh-smoothed system with steepness `params.eta`.
pub fn propagate_smoothed(
    sys: &SystemReal,
    params: &ModelParams,
    t0: f64,
    x0: StateVec,
    t_end: f64,
    opts: &RkOptions,
) -> Result<Trajectory> {
    let eta = params.eta;
    integrate(
        |t, x| sys.rhs_smoothed(t, x, eta),
        |_, x| sys.switching_value(x),
        |_, _, xdot| sys.c.dot(xdot),
        t0,
        x0,
        t_end,
        opts,
    )
}
