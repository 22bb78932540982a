//! Stroboscopic Poincaré map, attractor classification, periodic-orbit
//! polishing and the local map structure near a grazing point.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    propagate_exact, propagate_smoothed, EventKind, Extremum, FlowOptions, GrazePolicy, RkOptions, Trajectory,
};
use crate::linalg3::{Mat3, Vec3};
use crate::model::{StateVec, SystemReal};

/// Which dynamics the orbit tools follow.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Backend {
    /// Closed-form Filippov flow.
    #[default]
    Exact,
    /// tanh-smoothed system integrated with Dormand–Prince.
    Smoothed { eta: f64 },
}

impl Backend {
    /// Advance from `t0` to `t1` without dense output.
    pub fn advance(&self, sys: &SystemReal, t0: f64, x0: StateVec, t1: f64, extrema: bool) -> Result<Trajectory> {
        match *self {
            Backend::Exact => {
                let opts = FlowOptions { record_extrema: extrema, ..FlowOptions::lean() };
                propagate_exact(sys, t0, x0, t1, &opts)
            }
            Backend::Smoothed { eta } => {
                let mut params = sys.params;
                params.eta = eta;
                let opts = RkOptions { output_step: None, record_extrema: extrema, ..RkOptions::default() };
                propagate_smoothed(sys, &params, t0, x0, t1, &opts)
            }
        }
    }
}

/// Classification of an ω-limit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OrbitClass {
    /// `m` glacial cycles in `n` forcing periods.
    MN {
        m: u32,
        n: u32,
    },
    QuasiPeriodic,
    Unclassified,
}

impl OrbitClass {
    /// `(m, n)` with the CSV conventions `QP → (0,0)`, `Unclassified → (0,−1)`.
    pub fn code(&self) -> (i64, i64) {
        match *self {
            OrbitClass::MN { m, n } => (m as i64, n as i64),
            OrbitClass::QuasiPeriodic => (0, 0),
            OrbitClass::Unclassified => (0, -1),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, OrbitClass::MN { .. })
    }
}

impl fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitClass::MN { m, n } => write!(f, "({m},{n})"),
            OrbitClass::QuasiPeriodic => write!(f, "QP"),
            OrbitClass::Unclassified => write!(f, "unclassified"),
        }
    }
}

/// Forcing period of the first term; the section spacing of `P_S`.
pub fn forcing_period(sys: &SystemReal) -> Result<f64> {
    sys.forcing_period().ok_or_else(|| Error::InvalidInput("stroboscopic map needs a forcing term".into()))
}

/// `P_S`: advance `x` from `t_alpha` over one forcing period.
pub fn poincare_map(sys: &SystemReal, x: StateVec, t_alpha: f64) -> Result<StateVec> {
    poincare_map_with(sys, x, t_alpha, &FlowOptions::lean())
}

pub fn poincare_map_with(sys: &SystemReal, x: StateVec, t_alpha: f64, opts: &FlowOptions) -> Result<StateVec> {
    let period = forcing_period(sys)?;
    Ok(propagate_exact(sys, t_alpha, x, t_alpha + period, opts)?.x_end)
}

/// `P_S^k` starting from section time `t_alpha`.
pub fn poincare_iterate(sys: &SystemReal, x: StateVec, t_alpha: f64, k: u32) -> Result<StateVec> {
    if k == 0 {
        return Ok(x);
    }
    let period = forcing_period(sys)?;
    Ok(propagate_exact(sys, t_alpha, x, t_alpha + k as f64 * period, &FlowOptions::lean())?.x_end)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Transient discarded before testing recurrence (kyr, rounded up to
    /// whole forcing periods).
    pub t_settle: f64,
    /// Largest period multiple tested.
    pub n_max: u32,
    /// Sup-norm recurrence tolerance.
    pub eps_per: f64,
    /// Additional settle rounds tried when no recurrence is found.
    pub extra_settle_rounds: u32,
    /// Forcing periods used for the rotation-number estimate.
    pub rotation_periods: u32,
    pub backend: Backend,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            t_settle: 3000.0,
            n_max: 8,
            eps_per: 1e-5,
            extra_settle_rounds: 1,
            rotation_periods: 300,
            backend: Backend::Exact,
        }
    }
}

/// Outcome of [`classify_attractor`] with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub class: OrbitClass,
    /// `‖P_Sⁿ x − x‖∞` for the detected `n` (or the smallest over `1..=n_max`).
    pub residual: f64,
    /// Minus→Plus crossings over the tested window.
    pub crossings: usize,
    /// Tangencies observed over the tested window.
    pub grazes: usize,
    /// Settled state at section time `t_anchor`.
    pub anchor: StateVec,
    pub t_anchor: f64,
    /// Values of F at the local extrema over the tested window.
    pub f_extrema: Vec<f64>,
    /// Closest approach to Σ from inside a region over the tested window.
    pub grazing_margin: f64,
    /// Inceptions per forcing period, when estimated.
    pub rotation: Option<f64>,
}

/// Smallest distance to Σ over the non-virtual extrema facing the switch.
pub fn grazing_margin(extrema: &[Extremum]) -> f64 {
    extrema.iter().filter(|e| !e.virtual_ && e.faces_switch()).map(Extremum::margin).fold(f64::INFINITY, f64::min)
}

/// Best rational approximation with denominator ≤ `q_max` (continued fractions).
fn rational_within(x: f64, tol: f64, q_max: u32) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..32 {
        let a = r.floor();
        let ai = a as u64;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > q_max as u64 {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac < 1e-12 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Classify the ω-limit set reached from `x0` at `t = 0`.
pub fn classify_attractor(sys: &SystemReal, x0: StateVec, opts: &ClassifyOptions) -> Result<AttractorReport> {
    let period = forcing_period(sys)?;
    let settle_periods = (opts.t_settle / period).ceil().max(1.0);
    let backend = opts.backend;

    let mut t = settle_periods * period;
    let mut x = backend.advance(sys, 0.0, x0, t, false)?.x_end;
    let mut best_residual = f64::INFINITY;

    for round in 0..=opts.extra_settle_rounds {
        if round > 0 {
            let t_next = t + settle_periods * period;
            x = backend.advance(sys, t, x, t_next, false)?.x_end;
            t = t_next;
        }
        let window = backend.advance(sys, t, x, t + opts.n_max as f64 * period, true)?;
        // Recover stroboscopic states from one long run: restart per period is
        // cheaper to reason about and keeps the states bit-identical to P_S.
        let mut y = x;
        let mut found = None;
        for n in 1..=opts.n_max {
            let t_n = t + n as f64 * period;
            y = backend.advance(sys, t + (n - 1) as f64 * period, y, t_n, false)?.x_end;
            let res = (y - x).norm_inf();
            best_residual = best_residual.min(res);
            if res < opts.eps_per && found.is_none() {
                found = Some((n, res));
                break;
            }
        }
        if let Some((n, res)) = found {
            let t_hi = t + n as f64 * period;
            let m = window.inceptions_between(t, t_hi);
            let grazes = window.events.iter().filter(|e| e.kind == EventKind::Graze && e.t < t_hi).count();
            let ext: Vec<Extremum> = window.extrema.iter().filter(|e| e.t < t_hi).copied().collect();
            let class = if m > 0 { OrbitClass::MN { m: m as u32, n } } else { OrbitClass::Unclassified };
            return Ok(AttractorReport {
                class,
                residual: res,
                crossings: m,
                grazes,
                anchor: x,
                t_anchor: t,
                f_extrema: ext.iter().filter(|e| !e.virtual_).map(|e| e.f).collect(),
                grazing_margin: grazing_margin(&ext),
                rotation: Some(m as f64 / n as f64),
            });
        }
        if round < opts.extra_settle_rounds {
            continue;
        }
        // No recurrence: estimate the rotation number over a long window.
        let w = opts.rotation_periods.max(1) as f64;
        let long = backend.advance(sys, t, x, t + w * period, true)?;
        let inceptions = long.inceptions_between(t, t + w * period);
        let rho = inceptions as f64 / w;
        let class = if inceptions > 0 && rational_within(rho, 1.0 / w, opts.n_max).is_none() {
            OrbitClass::QuasiPeriodic
        } else {
            OrbitClass::Unclassified
        };
        let t_hi = t + opts.n_max as f64 * period;
        let ext: Vec<Extremum> = window.extrema.clone();
        return Ok(AttractorReport {
            class,
            residual: best_residual,
            crossings: window.inceptions_between(t, t_hi),
            grazes: long.grazes().count(),
            anchor: x,
            t_anchor: t,
            f_extrema: ext.iter().filter(|e| !e.virtual_).map(|e| e.f).collect(),
            grazing_margin: grazing_margin(&ext),
            rotation: Some(rho),
        });
    }
    unreachable!("the final settle round always returns")
}

/// A polished periodic orbit with its stroboscopic anchors at `t ≡ 0 mod 2π/ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub class: OrbitClass,
    pub period: f64,
    pub anchors: Vec<StateVec>,
    pub grazing_margin: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl PeriodicOrbit {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "class": self.class.to_string(),
            "class_m": self.class.code().0,
            "class_n": self.class.code().1,
            "period": self.period,
            "anchors": self.anchors.iter().map(|a| a.0).collect::<Vec<_>>(),
            "grazing_margin": self.grazing_margin,
            "residual": self.residual,
        })
    }
}

const POLISH_TOL: f64 = 1e-10;
const POLISH_MAX_ITER: usize = 500;

fn jacobian_fd<G: Fn(Vec3) -> Result<Vec3>>(g: &G, x: Vec3, gx: Vec3) -> Result<Mat3> {
    let mut cols = [Vec3::ZERO; 3];
    for (i, col) in cols.iter_mut().enumerate() {
        let h = 1e-7 * x[i].abs().max(1.0);
        let mut xp = x;
        xp.0[i] += h;
        *col = (g(xp)? - gx).scale(1.0 / h);
    }
    Ok(Mat3::from_cols(cols[0], cols[1], cols[2]))
}

/// Refine a fixed point of `P_Sⁿ` near `seed`.
///
/// Plain iteration of the map is accelerated by Newton steps on
/// `P_Sⁿ(x) − x` with a finite-difference Jacobian; a Newton step is kept
/// only when it lowers the residual. Unforced systems are handled by
/// [`polish_unforced_cycle`] instead.
pub fn polish_periodic_orbit(sys: &SystemReal, seed: StateVec, n: u32) -> Result<PeriodicOrbit> {
    if sys.forcing.terms.is_empty() || sys.forcing.is_silent() {
        return polish_unforced_cycle(sys, seed);
    }
    if n == 0 {
        return Err(Error::InvalidInput("period multiple must be positive".into()));
    }
    let period = forcing_period(sys)?;
    let map = |x: Vec3| poincare_iterate(sys, x, 0.0, n);
    let mut x = seed;
    let mut gx = map(x)?;
    let mut res = (gx - x).norm_inf();
    let mut iterations = 0;
    while res >= POLISH_TOL {
        iterations += 1;
        if iterations > POLISH_MAX_ITER {
            return Err(Error::NoConvergence { iterations: POLISH_MAX_ITER, residual: res });
        }
        let mut next = gx;
        if let Ok(j) = jacobian_fd(&map, x, gx) {
            if let Some(step) = (j - Mat3::IDENTITY).solve(x - gx) {
                let cand = x + step;
                if let Ok(gc) = map(cand) {
                    let rc = (gc - cand).norm_inf();
                    if rc < res {
                        x = cand;
                        gx = gc;
                        res = rc;
                        continue;
                    }
                }
            }
        }
        // Fall back to one plain iteration.
        x = next;
        next = map(x)?;
        gx = next;
        res = (gx - x).norm_inf();
    }

    let traj = propagate_exact(sys, 0.0, x, n as f64 * period, &FlowOptions::default().with_output(None))?;
    let mut anchors = Vec::with_capacity(n as usize);
    let mut y = x;
    for k in 0..n {
        anchors.push(y);
        y = poincare_iterate(sys, y, k as f64 * period, 1)?;
    }
    let m = traj.inceptions_between(0.0, n as f64 * period) as u32;
    let class = if m > 0 { OrbitClass::MN { m, n } } else { OrbitClass::Unclassified };
    Ok(PeriodicOrbit {
        class,
        period: n as f64 * period,
        anchors,
        grazing_margin: grazing_margin(&traj.extrema),
        residual: res,
        iterations,
    })
}

/// Autonomous limit cycle, anchored at its Minus→Plus crossing.
///
/// The period is measured between successive inceptions; `class` reports a
/// single cycle as `(1,1)`.
pub fn polish_unforced_cycle(sys: &SystemReal, seed: StateVec) -> Result<PeriodicOrbit> {
    let opts = FlowOptions { record_extrema: false, ..FlowOptions::lean() };
    let mut t = 0.0;
    let mut x = seed;
    let chunk = 3000.0;
    for round in 1..=20 {
        let traj = propagate_exact(sys, t, x, t + chunk, &opts)?;
        let inc: Vec<_> = traj.events.iter().filter(|e| e.kind == EventKind::CrossMinusToPlus).collect();
        if inc.len() >= 2 {
            let (a, b) = (inc[inc.len() - 2], inc[inc.len() - 1]);
            let res = (b.state - a.state).norm_inf();
            if res < POLISH_TOL {
                let period = b.t - a.t;
                let full = propagate_exact(sys, b.t, b.state, b.t + period, &FlowOptions::default().with_output(None))?;
                return Ok(PeriodicOrbit {
                    class: OrbitClass::MN { m: 1, n: 1 },
                    period,
                    anchors: vec![b.state],
                    grazing_margin: grazing_margin(&full.extrema),
                    residual: res,
                    iterations: round,
                });
            }
        }
        t = traj.t_end;
        x = traj.x_end;
    }
    Err(Error::NoConvergence { iterations: 20, residual: f64::NAN })
}

/// One evaluation of the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub eps: f64,
    pub image: StateVec,
    /// Distance of the image from the one-sided limit of its own side.
    pub distance: f64,
    pub impacts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub t_alpha: f64,
    pub t_beta: f64,
    pub t_graze: f64,
    /// Sign of ε on which the perturbed orbit cuts through Σ.
    pub impacting_sign: f64,
    /// Limit of the map from the non-impacting side.
    pub a: StateVec,
    /// Limit of the map from the impacting side.
    pub c: StateVec,
    /// Fitted exponent of `‖P_S(x+εp) − c‖` against `|ε|` on the impacting side.
    pub exponent: f64,
    pub exponent_rms: f64,
    /// Fitted exponent of `‖P_S(x+εp) − a‖` on the smooth side.
    pub smooth_exponent: f64,
    pub jump: f64,
    pub predicted_jump_vec: Vec3,
    pub predicted_jump: f64,
    pub jump_rel_error: f64,
    /// Largest one-sided variation over the grid.
    pub max_variation: f64,
    pub points: Vec<ProbePoint>,
}

impl ProbeReport {
    /// The jump dwarfs every one-sided variation by a factor 10.
    pub fn jump_dominates(&self) -> bool {
        self.jump > 10.0 * self.max_variation
    }
}

/// Log-spaced magnitudes between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn slope_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

/// Choose a section time for probing the graze of the orbit through `x0`
/// at `t0`: the window `[t_α, t_α + 2π/ω]` contains the tangency at `t_g`
/// and ends halfway to the next crossing of the impacting-side limit orbit,
/// so that orbit has no further impact before `t_β`.
///
/// Returns `(t_α, X(t_α))`.
pub fn probe_section(sys: &SystemReal, t0: f64, x0: StateVec, t_g: f64) -> Result<(f64, StateVec)> {
    let period = forcing_period(sys)?;
    let opts = FlowOptions { graze_policy: GrazePolicy::Cross, ..FlowOptions::lean() };
    let to_graze = propagate_exact(sys, t0, x0, t_g + period, &opts)?;
    let t_next = to_graze.crossings().map(|e| e.t).find(|&t| t > t_g + 1e-6).unwrap_or(t_g + period);
    let t_beta = t_g + 0.5 * (t_next - t_g).min(period);
    let t_alpha = t_beta - period;
    if t_alpha < t0 {
        return Err(Error::InvalidInput(format!("probe section {t_alpha} precedes the start time {t0}")));
    }
    let x_alpha = if t_alpha > t0 { propagate_exact(sys, t0, x0, t_alpha, &FlowOptions::lean())?.x_end } else { x0 };
    Ok((t_alpha, x_alpha))
}

/// Sample `P_S` on both sides of a grazing point along direction `p`.
///
/// `x_graze` at section time `t_alpha` must graze Σ within one forcing period.
/// `magnitudes` are the positive |ε| values to evaluate.
pub fn sqrt_discontinuity_probe(
    sys: &SystemReal,
    x_graze: StateVec,
    t_alpha: f64,
    p: Vec3,
    magnitudes: &[f64],
) -> Result<ProbeReport> {
    if magnitudes.len() < 2 || magnitudes.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidInput("probe needs at least two positive |ε| values".into()));
    }
    let period = forcing_period(sys)?;
    let t_beta = t_alpha + period;
    let base_opts = FlowOptions::default().with_output(None);
    let stay = propagate_exact(sys, t_alpha, x_graze, t_beta, &base_opts)?;
    let graze = stay
        .grazes()
        .next()
        .copied()
        .ok_or_else(|| Error::NotAGrazingPoint(format!("no tangency in [{t_alpha}, {t_beta}]")))?;
    let cross_opts = FlowOptions { graze_policy: GrazePolicy::Cross, ..base_opts };
    let a = stay.x_end;
    let c = propagate_exact(sys, t_alpha, x_graze, t_beta, &cross_opts)?.x_end;
    let n0 = stay.crossings().count();

    // Perturbed orbits: any dip below zero is a crossing pair.
    let sharp = FlowOptions { eps_graze: 0.0, ..base_opts };
    let eval = |eps: f64| -> Result<(StateVec, usize)> {
        let tr = propagate_exact(sys, t_alpha, x_graze + p.scale(eps), t_beta, &sharp)?;
        Ok((tr.x_end, tr.crossings().count()))
    };
    let eps_max = magnitudes.iter().cloned().fold(0.0, f64::max);
    let (_, n_pos) = eval(eps_max)?;
    let (_, n_neg) = eval(-eps_max)?;
    let impacting_sign = match (n_pos > n0, n_neg > n0) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        (true, true) => return Err(Error::NotAGrazingPoint("both sides impact".into())),
        (false, false) => return Err(Error::NotAGrazingPoint("neither side impacts".into())),
    };

    let mut points = Vec::with_capacity(2 * magnitudes.len());
    let (mut lx, mut ly, mut sx, mut sy) = (vec![], vec![], vec![], vec![]);
    for &m in magnitudes {
        for side in [impacting_sign, -impacting_sign] {
            let eps = side * m;
            let (img, n) = eval(eps)?;
            let impacts = n > n0;
            let reference = if impacts { c } else { a };
            let distance = (img - reference).norm();
            points.push(ProbePoint { eps, image: img, distance, impacts });
            if distance > 0.0 {
                if side == impacting_sign {
                    lx.push(m.ln());
                    ly.push(distance.ln());
                } else {
                    sx.push(m.ln());
                    sy.push(distance.ln());
                }
            }
        }
    }
    let (exponent, exponent_rms) = if lx.len() >= 2 { slope_fit(&lx, &ly) } else { (f64::NAN, f64::NAN) };
    let (smooth_exponent, _) = if sx.len() >= 2 { slope_fit(&sx, &sy) } else { (f64::NAN, f64::NAN) };

    let delta = t_beta - graze.t;
    let l_inv = sys.l.inverse().ok_or(Error::SingularResolvent)?;
    let predicted = l_inv * ((crate::linalg3::expm(&sys.l, delta)? - Mat3::IDENTITY) * (sys.b_plus - sys.b_minus));
    let jump = (a - c).norm();
    let predicted_jump = predicted.norm();
    Ok(ProbeReport {
        t_alpha,
        t_beta,
        t_graze: graze.t,
        impacting_sign,
        a,
        c,
        exponent,
        exponent_rms,
        smooth_exponent,
        jump,
        predicted_jump_vec: predicted,
        predicted_jump,
        jump_rel_error: (jump - predicted_jump).abs() / predicted_jump,
        max_variation: points.iter().map(|p| p.distance).fold(0.0, f64::max),
        points,
    })
}
