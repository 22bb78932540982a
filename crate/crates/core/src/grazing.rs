//! The grazing set: analytic grazing times, grazing initial conditions on a
//! fixed-`A` section, leaf continuation and push-forwards / pull-backs.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{propagate_exact, propagate_exact_backward, EventKind, FlowOptions, Trajectory};
use crate::io::fmt_f64;
use crate::linalg3::Vec3;
use crate::model::{RegionLabel, StateVec, SystemReal};
use crate::orbits::forcing_period;
use crate::roots::brent;

/// One root of the leading-order grazing equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrazingTime {
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingTimeSet {
    pub region: RegionLabel,
    pub t0: f64,
    pub t_max: f64,
    /// `√(A² + B²)` of the trigonometric part.
    pub amplitude: f64,
    /// Constant term `λ₁(c·r + d)`.
    pub offset: f64,
    pub times: Vec<GrazingTime>,
}

impl GrazingTimeSet {
    pub fn values(&self) -> Vec<f64> {
        self.times.iter().map(|g| g.t).collect()
    }

    /// Root nearest to `t`.
    pub fn nearest(&self, t: f64) -> Option<f64> {
        self.times.iter().map(|g| g.t).min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
    }
}

/// Roots in `[t0, t0 + t_max]` of the leading-order grazing condition
/// `A cos θ + B sin θ + K = 0`, `θ = ωt + φ`, obtained by eliminating the
/// slow-mode amplitude from `F = Ḟ = 0`.
pub fn solve_grazing_times(sys: &SystemReal, region: RegionLabel, t0: f64, t_max: f64) -> Result<GrazingTimeSet> {
    let [h] = sys.harmonics.as_slice() else {
        return Err(Error::InvalidInput("grazing times need exactly one forcing term".into()));
    };
    let lam = sys.lambda1();
    let w = h.omega;
    let a = lam * h.cp + w * h.cq;
    let b = lam * h.cq - w * h.cp;
    let k = lam * (sys.c.dot(&sys.rest_offset(region)) + sys.d);
    let r = a.hypot(b);
    let mut set = GrazingTimeSet { region, t0, t_max, amplitude: r, offset: k, times: Vec::new() };
    if r == 0.0 || k.abs() > r {
        return Ok(set);
    }
    let psi = b.atan2(a);
    let half = (-k / r).clamp(-1.0, 1.0).acos();
    let branches: &[f64] = if half == 0.0 || half == PI { &[0.0] } else { &[1.0, -1.0] };
    let t1 = t0 + t_max;
    for &sgn in branches {
        let theta = psi + sgn * half - h.phase;
        // t = (theta + 2πj)/ω; enumerate j covering the window.
        let j_lo = ((w * t0 - theta) / (2.0 * PI)).floor() as i64 - 1;
        let j_hi = ((w * t1 - theta) / (2.0 * PI)).ceil() as i64 + 1;
        for j in j_lo..=j_hi {
            let t = (theta + 2.0 * PI * j as f64) / w;
            if t >= t0 && t <= t1 {
                let th = w * t + h.phase;
                let residual = (a * th.cos() + b * th.sin() + k).abs();
                set.times.push(GrazingTime { t, residual });
            }
        }
    }
    set.times.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(set)
}

/// Which local extremum of `F` identifies the leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeafSelector {
    /// Extremum nearest this absolute time (must lie within the tracking radius).
    NearestTime(f64),
    /// Position in the ordered sequence of switch-facing extrema.
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrazingSearch {
    /// Side from which the graze is approached.
    pub region: RegionLabel,
    /// Largest allowed distance between the tracked extremum and the target time.
    pub track_radius: f64,
    /// Propagation horizon past the target time (or from `t0` for index selection).
    pub horizon: f64,
    /// `|F|` at which bisection stops before the final polish.
    pub f_tol: f64,
}

impl Default for GrazingSearch {
    fn default() -> Self {
        GrazingSearch { region: RegionLabel::Plus, track_radius: 10.0, horizon: 300.0, f_tol: 1e-9 }
    }
}

/// A grazing initial condition on the section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrazingIc {
    pub v: f64,
    pub a: f64,
    pub c: f64,
    /// Realized grazing time (absolute).
    pub t_g: f64,
    /// Transversal crossings strictly before the graze.
    pub impacts_before: usize,
    /// Signed distance of the tracked extremum from Σ at the returned `v`.
    pub margin: f64,
}

impl GrazingIc {
    pub fn state(&self) -> StateVec {
        Vec3::new(self.v, self.a, self.c)
    }
}

/// Tracked extremum of the trajectory from `x0` at `t0`: `(margin, time, impacts before)`.
pub fn tracked_extremum(
    sys: &SystemReal,
    t0: f64,
    x0: StateVec,
    selector: LeafSelector,
    search: &GrazingSearch,
) -> Result<(f64, f64, usize)> {
    let t_end = match selector {
        LeafSelector::NearestTime(t) => t.max(t0) + search.track_radius + 20.0,
        LeafSelector::Index(_) => t0 + search.horizon,
    };
    let opts = FlowOptions { output_step: None, record_extrema: true, ..FlowOptions::default() };
    let traj = propagate_exact(sys, t0, x0, t_end, &opts)?;
    select_extremum(&traj, selector, search).ok_or_else(|| Error::LeafLost {
        v: x0[0],
        c: x0[2],
        reason: "tracked extremum not found".into(),
    })
}

fn select_extremum(traj: &Trajectory, selector: LeafSelector, search: &GrazingSearch) -> Option<(f64, f64, usize)> {
    let mut cands = traj.extrema.iter().filter(|e| e.region == search.region && e.faces_switch());
    let e = match selector {
        LeafSelector::NearestTime(t) => cands
            .filter(|e| (e.t - t).abs() <= search.track_radius)
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))?,
        LeafSelector::Index(i) => cands.nth(i)?,
    };
    let before = traj.events.iter().filter(|ev| ev.kind.is_cross() && ev.t < e.t - 1e-9).count();
    Some((e.margin(), e.t, before))
}

/// Find `V` on the section `A = a0, C = c0` (time `t0`) whose trajectory
/// grazes Σ at the selected extremum.
///
/// The tracked extremum's signed distance to Σ is continuous in `V` while
/// earlier crossings stay transversal (its value past a crossing is taken
/// from the closed form), so it is bisected and then polished by Brent.
pub fn find_grazing_ic(
    sys: &SystemReal,
    t0: f64,
    a0: f64,
    c0: f64,
    v_bracket: (f64, f64),
    selector: LeafSelector,
    search: &GrazingSearch,
) -> Result<GrazingIc> {
    let (mut lo, mut hi) = v_bracket;
    let at = |v: f64, sel: LeafSelector| tracked_extremum(sys, t0, Vec3::new(v, a0, c0), sel, search);
    let lost = |v: f64, reason: String| Error::LeafLost { v, c: c0, reason };
    let (mut m_lo, _, _) = at(lo, selector).map_err(|_| Error::BracketInvalid { lo, hi })?;
    let (m_hi, _, _) = at(hi, selector).map_err(|_| Error::BracketInvalid { lo, hi })?;
    if m_lo.signum() == m_hi.signum() {
        return Err(Error::BracketInvalid { lo, hi });
    }
    // Follow the target in time as the bracket shrinks.
    let mut sel = selector;
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-7 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (m, t, _) = at(mid, sel).map_err(|e| match e {
            Error::LeafLost { reason, .. } => lost(mid, reason),
            other => other,
        })?;
        if let LeafSelector::NearestTime(_) = sel {
            sel = LeafSelector::NearestTime(t);
        }
        if m.abs() < search.f_tol * 1e-3 {
            lo = mid;
            hi = mid;
            break;
        }
        if m.signum() == m_lo.signum() {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
        }
    }
    let v = if lo == hi {
        lo
    } else {
        let f = |v: f64| at(v, sel).map(|r| r.0).unwrap_or(f64::NAN);
        brent(f, lo, hi, 1e-15, 200).unwrap_or(0.5 * (lo + hi))
    };
    let (margin, t_g, impacts_before) = at(v, sel)?;
    if margin.abs() > search.f_tol {
        // The bracket collapsed onto a jump of the tracked extremum: another
        // tangency upstream changed the orbit.
        return Err(lost(v, format!("tracked extremum jumps (|F| = {margin:e} at bracket collapse)")));
    }
    Ok(GrazingIc { v, a: a0, c: c0, t_g, impacts_before, margin })
}

/// One point of a traced leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafPoint {
    pub v: f64,
    pub a: f64,
    pub c: f64,
    pub tg_realized: f64,
    pub impacts_before: usize,
}

impl LeafPoint {
    pub fn state(&self) -> StateVec {
        Vec3::new(self.v, self.a, self.c)
    }
}

/// Total-least-squares line through a point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub centroid: Vec3,
    /// Unit direction of largest spread.
    pub direction: Vec3,
    /// RMS orthogonal distance of the points from the line.
    pub rms: f64,
}

/// Principal axis of the scatter matrix.
pub fn fit_line(points: &[Vec3]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::ZERO, |acc, p| acc + *p).scale(1.0 / n);
    let mut s = crate::linalg3::Mat3::ZERO;
    for p in points {
        let d = *p - centroid;
        for i in 0..3 {
            for j in 0..3 {
                s.0[i][j] += d[i] * d[j];
            }
        }
    }
    let direction = principal_axis(&s)?;
    let rms = (points
        .iter()
        .map(|p| {
            let d = *p - centroid;
            let along = d.dot(&direction);
            (d.dot(&d) - along * along).max(0.0)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Some(LineFit { centroid, direction, rms })
}

/// Unit eigenvector of the largest eigenvalue of a symmetric matrix (cyclic Jacobi).
fn principal_axis(m: &crate::linalg3::Mat3) -> Option<Vec3> {
    let mut a = m.0;
    let mut v = crate::linalg3::Mat3::IDENTITY.0;
    for _ in 0..50 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
            let (sn, cs) = theta.sin_cos();
            // A ← Gᵀ A G with the rotation in the (p, q) plane.
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = cs * akp - sn * akq;
                a[k][q] = sn * akp + cs * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = cs * apk - sn * aqk;
                a[q][k] = sn * apk + cs * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = cs * vp - sn * vq;
                row[q] = sn * vp + cs * vq;
            }
        }
    }
    let i = (0..3).max_by(|&i, &j| a[i][i].total_cmp(&a[j][j]))?;
    let axis = Vec3::new(v[0][i], v[1][i], v[2][i]);
    let n = axis.norm();
    (n > 0.0 && a[i][i] > 0.0).then(|| axis.scale(1.0 / n))
}

/// A leaf of the grazing set sampled on a fixed-`A` section (or its image
/// under `P_S^k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingLeaf {
    pub leaf_id: usize,
    /// Section time.
    pub t0: f64,
    /// Nominal (absolute) grazing time of the leaf.
    pub t_g: f64,
    pub a0: f64,
    pub points: Vec<LeafPoint>,
    pub fit: Option<LineFit>,
    /// Spread of realized grazing times.
    pub tg_spread: f64,
    /// Angle (degrees) between the fitted line's in-section normal and the
    /// section projection of `n`.
    pub normal_angle_deg: f64,
    /// Why continuation stopped early, if it did.
    pub terminated: Vec<String>,
}

impl GrazingLeaf {
    fn summarize(&mut self, sys: &SystemReal) {
        let pts: Vec<Vec3> = self.points.iter().map(LeafPoint::state).collect();
        self.fit = fit_line(&pts);
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.tg_realized), hi.max(p.tg_realized)));
        self.tg_spread = if self.points.is_empty() { f64::NAN } else { hi - lo };
        self.normal_angle_deg = self.fit.map_or(f64::NAN, |f| section_normal_angle(sys, f.direction));
    }

    /// Grazing time relative to the section time.
    pub fn relative_tg(&self) -> f64 {
        self.t_g - self.t0
    }

    pub fn write_csv<W: Write>(leaves: &[GrazingLeaf], mut w: W) -> io::Result<()> {
        writeln!(w, "leaf_id,tg,V,C,tg_realized,impacts_before")?;
        for leaf in leaves {
            for p in &leaf.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    leaf.leaf_id,
                    fmt_f64(leaf.t_g),
                    fmt_f64(p.v),
                    fmt_f64(p.c),
                    fmt_f64(p.tg_realized),
                    p.impacts_before
                )?;
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "leaf_id": self.leaf_id,
            "t0": self.t0,
            "tg": self.t_g,
            "A0": self.a0,
            "points": self.points.len(),
            "line": self.fit.map(|f| serde_json::json!({
                "centroid": f.centroid.0,
                "direction": f.direction.0,
                "rms": f.rms,
            })),
            "tg_spread": self.tg_spread,
            "normal_angle_deg": self.normal_angle_deg,
            "terminated": self.terminated,
        })
    }
}

/// Angle between the in-section normal of a line with direction `dir` and
/// the `(V, C)` projection of `n` (0° means the line is orthogonal to `n`).
pub fn section_normal_angle(sys: &SystemReal, dir: Vec3) -> f64 {
    let (dv, dc) = (dir[0], dir[2]);
    let (nv, nc) = (sys.n[0], sys.n[2]);
    let cos = (dv * nv + dc * nc).abs() / (dv.hypot(dc) * nv.hypot(nc));
    // Direction orthogonal to n ⇔ normal parallel to n.
    90.0 - cos.clamp(0.0, 1.0).acos().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub search: GrazingSearch,
    /// Initial half-width of the corrector bracket in `V`.
    pub bracket: f64,
    /// Largest half-width tried before giving up at a sample.
    pub max_bracket: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { search: GrazingSearch::default(), bracket: 0.01, max_bracket: 0.16 }
    }
}

/// Continue a leaf through `seed` across `C ∈ c_range` on `n_samples` equally
/// spaced values of `C`.
///
/// Each step predicts `V` from the last two points (the first from the
/// direction orthogonal to `n`) and corrects with [`find_grazing_ic`] on a
/// bracket around the prediction, tracking the extremum nearest the previous
/// grazing time. A direction stops at the first `LeafLost` or unbracketable
/// sample; the reason is recorded.
pub fn trace_leaf(
    sys: &SystemReal,
    t0: f64,
    a0: f64,
    c_range: (f64, f64),
    n_samples: usize,
    seed: &GrazingIc,
    leaf_id: usize,
    opts: &TraceOptions,
) -> Result<GrazingLeaf> {
    if n_samples < 2 || !(c_range.1 > c_range.0) {
        return Err(Error::InvalidInput("trace needs a non-empty C range and at least two samples".into()));
    }
    let h = (c_range.1 - c_range.0) / (n_samples - 1) as f64;
    let slope0 = if sys.n[0] != 0.0 { -sys.n[2] / sys.n[0] } else { 0.0 };
    let seed_pt = LeafPoint { v: seed.v, a: a0, c: seed.c, tg_realized: seed.t_g, impacts_before: seed.impacts_before };
    let mut terminated = Vec::new();
    let mut up = Vec::new();
    let mut down = Vec::new();

    for (dir, out) in [(1.0, &mut up), (-1.0, &mut down)] {
        // First grid value strictly beyond the seed in this direction.
        let k0 = ((seed.c - c_range.0) / h).floor() as i64;
        let mut k = if dir > 0.0 { k0 + 1 } else { k0 };
        let mut prev = seed_pt;
        let mut prev2: Option<LeafPoint> = None;
        loop {
            let c = c_range.0 + k as f64 * h;
            if c < c_range.0 - 1e-12 || c > c_range.1 + 1e-12 {
                break;
            }
            if (c - seed.c).abs() < 1e-12 {
                k += dir as i64;
                continue;
            }
            let slope = match prev2 {
                Some(p2) if (prev.c - p2.c).abs() > 0.0 => (prev.v - p2.v) / (prev.c - p2.c),
                _ => slope0,
            };
            let v_pred = prev.v + slope * (c - prev.c);
            let sel = LeafSelector::NearestTime(prev.tg_realized);
            // Narrow brackets first: near another leaf a wide one can straddle
            // a jump of the tracked extremum.
            let mut widths = vec![opts.bracket, opts.bracket / 4.0, opts.bracket / 16.0];
            let mut w = opts.bracket * 2.0;
            while w <= opts.max_bracket {
                widths.push(w);
                w *= 2.0;
            }
            let mut res = Err(Error::BracketInvalid { lo: v_pred, hi: v_pred });
            for w in widths {
                res = find_grazing_ic(sys, t0, a0, c, (v_pred - w, v_pred + w), sel, &opts.search);
                if !matches!(res, Err(Error::BracketInvalid { .. })) {
                    break;
                }
            }
            // Mid-continuation, no sign change anywhere near the prediction
            // means the leaf ends here (typically on another leaf).
            if let Err(Error::BracketInvalid { .. }) = res {
                res = Err(Error::LeafLost {
                    v: v_pred,
                    c,
                    reason: "no grazing V near the continuation prediction".into(),
                });
            }
            match res {
                Ok(ic) => {
                    let p = LeafPoint { v: ic.v, a: a0, c, tg_realized: ic.t_g, impacts_before: ic.impacts_before };
                    out.push(p);
                    prev2 = Some(prev);
                    prev = p;
                }
                Err(e) => {
                    terminated.push(format!("C = {}: {e}", fmt_f64(c)));
                    break;
                }
            }
            k += dir as i64;
        }
    }
    down.reverse();
    let mut points = down;
    points.push(seed_pt);
    points.extend(up);
    let mut leaf = GrazingLeaf {
        leaf_id,
        t0,
        t_g: seed.t_g,
        a0,
        points,
        fit: None,
        tg_spread: f64::NAN,
        normal_angle_deg: f64::NAN,
        terminated,
    };
    leaf.summarize(sys);
    Ok(leaf)
}

/// Image of a leaf under `P_S^k`: push-forward for `k > 0` (requires
/// `t0 + k·2π/ω < t_g`), pull-back through the time-reversed closed-form
/// flow for `k < 0`.
pub fn push_pull_leaf(sys: &SystemReal, leaf: &GrazingLeaf, k: i32) -> Result<GrazingLeaf> {
    if k == 0 {
        return Ok(leaf.clone());
    }
    let period = forcing_period(sys)?;
    let t_new = leaf.t0 + k as f64 * period;
    if k > 0 && t_new >= leaf.t_g {
        return Err(Error::PushPastGraze { k, t_end: t_new, t_g: leaf.t_g });
    }
    let opts = FlowOptions { output_step: None, record_extrema: false, ..FlowOptions::default() };
    let search = GrazingSearch::default();
    let mut points = Vec::with_capacity(leaf.points.len());
    for p in &leaf.points {
        let x = p.state();
        let traj = if k > 0 {
            propagate_exact(sys, leaf.t0, x, t_new, &opts)?
        } else {
            propagate_exact_backward(sys, leaf.t0, x, t_new, &opts)?
        };
        let y = traj.x_end;
        let (_, tg, before) = tracked_extremum(sys, t_new, y, LeafSelector::NearestTime(p.tg_realized), &search)?;
        points.push(LeafPoint { v: y[0], a: y[1], c: y[2], tg_realized: tg, impacts_before: before });
    }
    let mut out = GrazingLeaf {
        leaf_id: leaf.leaf_id,
        t0: t_new,
        t_g: leaf.t_g,
        a0: f64::NAN,
        points,
        fit: None,
        tg_spread: f64::NAN,
        normal_angle_deg: f64::NAN,
        terminated: Vec::new(),
    };
    out.summarize(sys);
    Ok(out)
}

/// Count of crossing events in a trajectory before `t`.
pub fn crossings_before(traj: &Trajectory, t: f64) -> usize {
    traj.events.iter().filter(|e| e.kind != EventKind::Graze && e.t < t).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, Forcing, ModelParams};

    fn sys() -> SystemReal {
        build_system(&ModelParams::default(), &Forcing::single(0.3, 0.115)).unwrap()
    }

    #[test]
    fn roots_satisfy_equation_and_periodicity() {
        let s = sys();
        let set = solve_grazing_times(&s, RegionLabel::Plus, 0.0, 250.0).unwrap();
        assert!(!set.times.is_empty());
        let period = 2.0 * PI / 0.115;
        for g in &set.times {
            assert!(g.residual < 1e-10);
            let next = g.t + period;
            if next <= 250.0 {
                assert!(set.times.iter().any(|h| (h.t - next).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn weak_forcing_has_no_roots() {
        let s = build_system(&ModelParams::default(), &Forcing::single(0.01, 0.115)).unwrap();
        let set = solve_grazing_times(&s, RegionLabel::Plus, 0.0, 500.0).unwrap();
        assert!(set.times.is_empty());
        assert!(set.offset.abs() > set.amplitude);
    }

    #[test]
    fn line_fit_recovers_direction() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.5 * i as f64, 0.2, 1.0 + i as f64)).collect();
        let f = fit_line(&pts).unwrap();
        assert!(f.rms < 1e-12);
        let d = Vec3::new(0.5, 0.0, 1.0);
        assert!((f.direction.dot(&d).abs() / d.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_axis_of_noisy_cloud() {
        let d = Vec3::new(0.3, -0.1, 0.9).scale(1.0 / 0.9539392014169456);
        let pts: Vec<Vec3> =
            (0..50).map(|i| d.scale(i as f64 * 0.1) + Vec3::new(0.0, 1e-5 * ((i * 7) % 5) as f64, 0.0)).collect();
        let f = fit_line(&pts).unwrap();
        assert!(f.direction.dot(&d).abs() > 1.0 - 1e-6);
        assert!(f.rms < 1e-4);
    }

    #[test]
    fn bad_bracket_is_reported() {
        let s = sys();
        let err = find_grazing_ic(
            &s,
            0.0,
            0.2089,
            0.2356,
            (0.30, 0.31),
            LeafSelector::NearestTime(72.4),
            &GrazingSearch::default(),
        );
        assert!(matches!(err, Err(Error::BracketInvalid { .. })));
    }
}
