//! Parameter-space experiments: Monte-Carlo sweeps, tongue maps, grazing
//! curves, basin grids and two-frequency forcing.
//!
//! Every task is a pure function of its index and the run seed, so results
//! are gathered in index order and do not depend on the rayon pool size.
//! Callers bound parallelism by running inside `ThreadPool::install`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{propagate_exact, EventKind, FlowOptions, ParamRamp, Trajectory};
use crate::io::fmt_f64;
use crate::linalg3::{eigenvalues, Mat3, Vec3};
use crate::model::{build_system, Forcing, ModelParams, StateVec, SystemReal};
use crate::orbits::{
    classify_attractor, forcing_period, poincare_iterate, polish_periodic_orbit, ClassifyOptions, OrbitClass,
    PeriodicOrbit,
};

/// Deterministic generator for task `(key, sample)` of a run.
///
/// The three words are laid into the ChaCha key directly, so draws depend
/// only on the identifiers and never on scheduling.
pub fn task_rng(seed: u64, key: u64, sample: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&key.to_le_bytes());
    bytes[16..24].copy_from_slice(&sample.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Box from which random initial states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcBox {
    pub v: (f64, f64),
    pub a: (f64, f64),
    pub c: (f64, f64),
}

impl Default for IcBox {
    fn default() -> Self {
        IcBox { v: (0.0, 1.2), a: (0.0, 1.2), c: (0.0, 1.0) }
    }
}

impl IcBox {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> StateVec {
        let u = |rng: &mut R, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
        Vec3::new(u(rng, self.v), u(rng, self.a), u(rng, self.c))
    }
}

/// The quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Omega,
    Mu,
    D,
    Eta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Omega => "omega",
            SweepParam::Mu => "mu",
            SweepParam::D => "d",
            SweepParam::Eta => "eta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "omega" => SweepParam::Omega,
            "mu" => SweepParam::Mu,
            "d" => SweepParam::D,
            "eta" => SweepParam::Eta,
            _ => return None,
        })
    }

    /// Apply `value` to copies of the base parameters and forcing. ω and μ
    /// act on the first forcing term.
    pub fn apply(self, params: &ModelParams, forcing: &Forcing, value: f64) -> Result<(ModelParams, Forcing)> {
        let mut p = *params;
        let mut f = forcing.clone();
        match self {
            SweepParam::D => p.d = value,
            SweepParam::Eta => p.eta = value,
            SweepParam::Omega | SweepParam::Mu => {
                let term = f
                    .terms
                    .first_mut()
                    .ok_or_else(|| Error::InvalidInput(format!("sweeping {} needs a forcing term", self.as_str())))?;
                if self == SweepParam::Omega {
                    term.omega = value;
                } else {
                    term.mu = value;
                }
            }
        }
        Ok((p, f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub params: ModelParams,
    pub forcing: Forcing,
    pub samples: usize,
    pub seed: u64,
    pub ic_box: IcBox,
    pub classify: ClassifyOptions,
    /// Bisection levels used to refine each reported transition.
    pub refine_levels: u32,
}

impl SweepSpec {
    pub fn new(param: SweepParam, from: f64, to: f64, step: f64, params: ModelParams, forcing: Forcing) -> Self {
        SweepSpec {
            param,
            from,
            to,
            step,
            params,
            forcing,
            samples: 10,
            seed: 0,
            ic_box: IcBox::default(),
            classify: ClassifyOptions::default(),
            refine_levels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!("sweep step must be positive, got {}", self.step)));
        }
        if !(self.from.is_finite() && self.to.is_finite()) || self.to < self.from {
            return Err(Error::InvalidInput(format!("sweep range [{}, {}] is empty", self.from, self.to)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("samples per point must be at least 1".into()));
        }
        let (p, f) = self.param.apply(&self.params, &self.forcing, self.from)?;
        p.validate()?;
        f.validate()
    }

    /// Grid values `from + k·step`, computed by multiplication so they do
    /// not drift.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.from + k as f64 * self.step).collect()
    }
}

/// One `(parameter value, initial condition)` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub param: f64,
    pub ic_index: usize,
    pub ic: StateVec,
    /// `Err(kind)` for in-band failures.
    pub class: std::result::Result<OrbitClass, String>,
    pub grazing_margin: f64,
    pub f_extrema: Vec<f64>,
}

impl SweepCell {
    pub fn code(&self) -> (i64, i64) {
        match &self.class {
            Ok(c) => c.code(),
            Err(_) => (-1, -1),
        }
    }
}

/// Where a transition was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    /// The class appears when the parameter increases past the edge.
    Appears,
    /// The class disappears when the parameter increases past the edge.
    Vanishes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub class: OrbitClass,
    pub kind: EdgeKind,
    /// Bracket after refinement: the class is present on one side only.
    pub lo: f64,
    pub hi: f64,
}

impl Transition {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub param: f64,
    pub classes: BTreeMap<String, usize>,
    pub dominant: Option<OrbitClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Index-ordered: point-major, then initial condition.
    pub cells: Vec<SweepCell>,
    pub points: Vec<PointSummary>,
    /// Existence-range edges of every periodic class.
    pub edges: Vec<Transition>,
    /// Parameter intervals between consecutive points whose dominant class
    /// differs.
    pub dominant_changes: Vec<(f64, f64, Option<OrbitClass>, Option<OrbitClass>)>,
}

fn point_key(value: f64) -> u64 {
    value.to_bits()
}

fn classify_point(spec: &SweepSpec, value: f64) -> Vec<SweepCell> {
    let sys = spec.param.apply(&spec.params, &spec.forcing, value).and_then(|(p, f)| build_system(&p, &f));
    (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(spec.seed, point_key(value), i as u64);
            let ic = spec.ic_box.sample(&mut rng);
            let outcome = sys.as_ref().map_err(Clone::clone).and_then(|s| classify_attractor(s, ic, &spec.classify));
            match outcome {
                Ok(r) => SweepCell {
                    param: value,
                    ic_index: i,
                    ic,
                    class: Ok(r.class),
                    grazing_margin: r.grazing_margin,
                    f_extrema: r.f_extrema,
                },
                Err(e) => SweepCell {
                    param: value,
                    ic_index: i,
                    ic,
                    class: Err(e.kind().to_string()),
                    grazing_margin: f64::NAN,
                    f_extrema: Vec::new(),
                },
            }
        })
        .collect()
}

fn class_set(cells: &[SweepCell]) -> BTreeSet<OrbitClassKey> {
    cells.iter().filter_map(|c| c.class.as_ref().ok()).filter(|c| c.is_periodic()).map(|c| OrbitClassKey(*c)).collect()
}

/// Total order on classes for use in sets and maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OrbitClassKey(OrbitClass);

impl OrbitClassKey {
    fn rank(&self) -> (i64, i64) {
        let (m, n) = self.0.code();
        (n, m)
    }
}

impl Ord for OrbitClassKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for OrbitClassKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn summarize(value: f64, cells: &[SweepCell]) -> PointSummary {
    let mut classes = BTreeMap::new();
    let mut counts: BTreeMap<OrbitClassKey, usize> = BTreeMap::new();
    for c in cells {
        let label = match &c.class {
            Ok(k) => k.to_string(),
            Err(kind) => format!("failed:{kind}"),
        };
        *classes.entry(label).or_insert(0) += 1;
        if let Ok(k) = c.class {
            *counts.entry(OrbitClassKey(k)).or_insert(0) += 1;
        }
    }
    // Plurality; ties go to the lower period so the choice is stable.
    let dominant = counts.iter().fold(None::<(OrbitClassKey, usize)>, |best, (k, &n)| match best {
        Some((_, bn)) if bn >= n => best,
        _ => Some((*k, n)),
    });
    PointSummary { param: value, classes, dominant: dominant.map(|(k, _)| k.0) }
}

/// Classify `spec.samples` random initial states at every grid value.
///
/// Failures are stored in-band. Edges of each periodic class's existence
/// range are refined by `spec.refine_levels` bisections between grid points.
pub fn monte_carlo_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let values = spec.values();
    let per_point: Vec<Vec<SweepCell>> = values.par_iter().map(|&v| classify_point(spec, v)).collect();

    let sets: Vec<BTreeSet<OrbitClassKey>> = per_point.iter().map(|c| class_set(c)).collect();
    let all: BTreeSet<OrbitClassKey> = sets.iter().flatten().copied().collect();

    // Raw edges between consecutive grid points.
    let mut raw = Vec::new();
    for class in &all {
        for i in 1..values.len() {
            let (before, after) = (sets[i - 1].contains(class), sets[i].contains(class));
            if before != after {
                let kind = if after { EdgeKind::Appears } else { EdgeKind::Vanishes };
                raw.push((class.0, kind, values[i - 1], values[i]));
            }
        }
    }
    let edges: Vec<Transition> = raw
        .into_par_iter()
        .map(|(class, kind, mut lo, mut hi)| {
            for _ in 0..spec.refine_levels {
                let mid = 0.5 * (lo + hi);
                let present = class_set(&classify_point(spec, mid)).contains(&OrbitClassKey(class));
                // The class is absent on the `lo` side for Appears.
                let mid_like_hi = present == (kind == EdgeKind::Appears);
                if mid_like_hi {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Transition { class, kind, lo, hi }
        })
        .collect();

    let points: Vec<PointSummary> = values.iter().zip(&per_point).map(|(&v, c)| summarize(v, c)).collect();
    let dominant_changes = points
        .windows(2)
        .filter(|w| w[0].dominant != w[1].dominant)
        .map(|w| (w[0].param, w[1].param, w[0].dominant, w[1].dominant))
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        cells: per_point.into_iter().flatten().collect(),
        points,
        edges,
        dominant_changes,
    })
}

impl SweepResult {
    /// Edges of `class` of the given kind, in parameter order.
    pub fn edges_of(&self, class: OrbitClass, kind: EdgeKind) -> Vec<&Transition> {
        self.edges.iter().filter(|e| e.class == class && e.kind == kind).collect()
    }

    /// Grid values at which `class` was observed.
    pub fn support(&self, class: OrbitClass) -> Vec<f64> {
        let mut out: Vec<f64> = self.cells.iter().filter(|c| c.class == Ok(class)).map(|c| c.param).collect();
        out.dedup();
        out
    }

    /// `param,ic_index,class_m,class_n,grazing_margin,f_extrema...`; the
    /// extrema fill the trailing columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "param,ic_index,class_m,class_n,grazing_margin,f_extrema")?;
        for c in &self.cells {
            let (m, n) = c.code();
            write!(w, "{},{},{},{},{}", fmt_f64(c.param), c.ic_index, m, n, fmt_f64(c.grazing_margin))?;
            for f in &c.f_extrema {
                write!(w, ",{}", fmt_f64(*f))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `class,kind,lo,hi,estimate`.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "class,kind,lo,hi,estimate")?;
        for e in &self.edges {
            let kind = match e.kind {
                EdgeKind::Appears => "appears",
                EdgeKind::Vanishes => "vanishes",
            };
            writeln!(w, "\"{}\",{},{},{},{}", e.class, kind, fmt_f64(e.lo), fmt_f64(e.hi), fmt_f64(e.estimate()))?;
        }
        Ok(())
    }
}

/// Uniform grid on `[lo, hi]` with `n ≥ 1` nodes (cell centres when
/// `centred`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Axis { lo, hi, n }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Cell centres.
    pub fn centres(&self) -> Vec<f64> {
        let h = self.width();
        (0..self.n).map(|i| self.lo + (i as f64 + 0.5) * h).collect()
    }

    /// Nodes including both ends.
    pub fn nodes(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + i as f64 * h).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n == 0 || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidInput(format!("axis {name} is empty or reversed")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueCell {
    pub omega: f64,
    pub mu: f64,
    /// Distinct classes seen, sorted by period then cycle count.
    pub classes: Vec<OrbitClass>,
    pub failures: usize,
    /// Tangencies on converged periodic attractors.
    pub grazes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueMap {
    pub omega: Axis,
    pub mu: Axis,
    /// Row-major in μ, then ω.
    pub cells: Vec<TongueCell>,
}

/// Observed class sets on an `(ω, μ)` grid (axis nodes, ends included).
pub fn tongue_map(
    params: &ModelParams,
    omega: Axis,
    mu: Axis,
    samples: usize,
    seed: u64,
    ic_box: IcBox,
    classify: &ClassifyOptions,
) -> Result<TongueMap> {
    omega.validate("omega")?;
    mu.validate("mu")?;
    if samples == 0 {
        return Err(Error::InvalidInput("samples per cell must be at least 1".into()));
    }
    params.validate()?;
    let ws = omega.nodes();
    let ms = mu.nodes();
    let cells = (0..ws.len() * ms.len())
        .into_par_iter()
        .map(|idx| {
            let (w, m) = (ws[idx % ws.len()], ms[idx / ws.len()]);
            let mut classes = BTreeSet::new();
            let mut failures = 0;
            let mut grazes = 0;
            match build_system(params, &Forcing::single(m, w)) {
                Ok(sys) => {
                    for s in 0..samples {
                        let mut rng = task_rng(seed, idx as u64, s as u64);
                        let ic = ic_box.sample(&mut rng);
                        match classify_attractor(&sys, ic, classify) {
                            Ok(r) => {
                                if r.class.is_periodic() {
                                    grazes += r.grazes;
                                }
                                classes.insert(OrbitClassKey(r.class));
                            }
                            Err(_) => failures += 1,
                        }
                    }
                }
                Err(_) => failures = samples,
            }
            TongueCell { omega: w, mu: m, classes: classes.into_iter().map(|k| k.0).collect(), failures, grazes }
        })
        .collect();
    Ok(TongueMap { omega, mu, cells })
}

impl TongueMap {
    pub fn cell(&self, i_omega: usize, i_mu: usize) -> &TongueCell {
        &self.cells[i_mu * self.omega.n + i_omega]
    }

    /// `omega,mu,classes` with classes joined by `;`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "omega,mu,classes")?;
        for c in &self.cells {
            let mut labels: Vec<String> = c.classes.iter().map(|k| k.to_string()).collect();
            if c.failures > 0 {
                labels.push("failed".into());
            }
            writeln!(w, "{},{},\"{}\"", fmt_f64(c.omega), fmt_f64(c.mu), labels.join(";"))?;
        }
        Ok(())
    }
}

/// A point of a grazing curve: at `omega_g` the `(1,n)` orbit touches Σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub omega_g: f64,
    /// Grazing margin of the polished orbit just above `omega_g`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingCurve {
    pub n: u32,
    pub points: Vec<CurvePoint>,
    /// `(μ, error kind, message)` for amplitudes where no point was found.
    pub failures: Vec<(f64, String, String)>,
}

impl GrazingCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "mu,omega_g,residual")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", fmt_f64(p.mu), fmt_f64(p.omega_g), fmt_f64(p.residual))?;
        }
        Ok(())
    }

    /// Least-squares `ω_g ≈ k·μ + b` with its coefficient of determination.
    pub fn linear_fit(&self) -> Option<(f64, f64, f64)> {
        let n = self.points.len();
        if n < 3 {
            return None;
        }
        let mx = self.points.iter().map(|p| p.mu).sum::<f64>() / n as f64;
        let my = self.points.iter().map(|p| p.omega_g).sum::<f64>() / n as f64;
        let sxy: f64 = self.points.iter().map(|p| (p.mu - mx) * (p.omega_g - my)).sum();
        let sxx: f64 = self.points.iter().map(|p| (p.mu - mx).powi(2)).sum();
        let syy: f64 = self.points.iter().map(|p| (p.omega_g - my).powi(2)).sum();
        if sxx == 0.0 || syy == 0.0 {
            return None;
        }
        let k = sxy / sxx;
        Some((k, my - k * mx, sxy * sxy / (sxx * syy)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    /// ω decrement while following the orbit toward the graze.
    pub omega_step: f64,
    /// Bisection stops when the ω bracket is narrower than this.
    pub omega_tol: f64,
    /// Lowest ω examined.
    pub omega_min: f64,
    /// The next amplitude starts this far above the previous `ω_g`.
    pub restart_offset: f64,
    pub seed: u64,
    /// Random initial states tried when continuation from the previous
    /// orbit fails.
    pub search_samples: usize,
    pub classify: ClassifyOptions,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            omega_step: 2e-3,
            omega_tol: 1e-7,
            omega_min: 0.01,
            restart_offset: 0.01,
            seed: 0,
            search_samples: 24,
            classify: ClassifyOptions::default(),
        }
    }
}

/// Floquet multipliers of a polished orbit: eigenvalues of `D(P_Sⁿ)` at
/// its first anchor, by central differences.
pub fn floquet_multipliers(sys: &SystemReal, orbit: &PeriodicOrbit) -> Result<[Complex64; 3]> {
    let n = orbit.class.code().1.max(1) as u32;
    let x = orbit.anchors[0];
    let mut cols = [Vec3::ZERO; 3];
    for (i, col) in cols.iter_mut().enumerate() {
        let h = 1e-7 * x[i].abs().max(1.0);
        let (mut xp, mut xm) = (x, x);
        xp.0[i] += h;
        xm.0[i] -= h;
        *col = (poincare_iterate(sys, xp, 0.0, n)? - poincare_iterate(sys, xm, 0.0, n)?).scale(0.5 / h);
    }
    Ok(eigenvalues(&Mat3::from_cols(cols[0], cols[1], cols[2])))
}

/// Largest multiplier modulus.
pub fn orbit_stability(sys: &SystemReal, orbit: &PeriodicOrbit) -> Result<f64> {
    Ok(floquet_multipliers(sys, orbit)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Dominant multiplier (largest modulus).
fn dominant(mults: &[Complex64; 3]) -> Complex64 {
    *mults.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(&Complex64::new(0.0, 0.0))
}

/// Where a followed orbit loses stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityLoss {
    pub param: f64,
    /// Dominant multiplier just past the loss; real part near −1 for a
    /// period doubling.
    pub multiplier_re: f64,
    pub multiplier_im: f64,
}

impl StabilityLoss {
    pub fn is_period_doubling(&self) -> bool {
        self.multiplier_im.abs() < 1e-6 && self.multiplier_re < 0.0
    }
}

/// Follow the polished `(1,n)` orbit from `from` toward `to` and bisect the
/// parameter value where its dominant multiplier leaves the unit circle.
///
/// `seed` must lie in the orbit's basin at `from`. Fails with
/// `OrbitLostBeforeGraze` when the orbit changes class or acquires a
/// tangency first.
pub fn locate_stability_loss(
    param: SweepParam,
    params: &ModelParams,
    forcing: &Forcing,
    n: u32,
    seed: StateVec,
    (from, to): (f64, f64),
    step: f64,
    tol: f64,
) -> Result<StabilityLoss> {
    let dir = if to >= from { 1.0 } else { -1.0 };
    let eval = |v: f64, hint: StateVec| -> Result<Option<(PeriodicOrbit, Complex64)>> {
        let (p, f) = param.apply(params, forcing, v)?;
        let sys = build_system(&p, &f)?;
        let orbit = match polish_periodic_orbit(&sys, hint, n) {
            Ok(o) if o.class == (OrbitClass::MN { m: 1, n }) && o.grazing_margin > 0.0 => o,
            _ => return Ok(None),
        };
        let z = dominant(&floquet_multipliers(&sys, &orbit)?);
        Ok(Some((orbit, z)))
    };
    let lost = |v: f64, why: &str| Error::OrbitLostBeforeGraze { omega: v, reason: why.to_string() };
    let (p0, f0) = param.apply(params, forcing, from)?;
    let sys0 = build_system(&p0, &f0)?;
    let start = classify_attractor(&sys0, seed, &ClassifyOptions::default()).map(|r| r.anchor).unwrap_or(seed);
    let (mut orbit, z0) = eval(from, start)?.ok_or_else(|| lost(from, "no (1,n) orbit at the start"))?;
    if z0.norm() >= 1.0 {
        return Err(lost(from, "orbit already unstable at the start"));
    }
    let mut good = from;
    let bad = loop {
        let v = good + dir * step;
        if (v - to) * dir > 1e-12 {
            return Err(lost(to, "no stability loss in range"));
        }
        match eval(v, orbit.anchors[0])? {
            Some((o, z)) if z.norm() < 1.0 => {
                orbit = o;
                good = v;
            }
            Some((_, z)) => break (v, z),
            None => return Err(lost(v, "orbit changed class before losing stability")),
        }
    };
    let (mut bad_v, mut bad_z) = bad;
    while (bad_v - good).abs() > tol {
        let mid = 0.5 * (good + bad_v);
        match eval(mid, orbit.anchors[0])? {
            Some((o, z)) if z.norm() < 1.0 => {
                orbit = o;
                good = mid;
            }
            Some((_, z)) => {
                bad_v = mid;
                bad_z = z;
            }
            None => return Err(lost(mid, "orbit changed class before losing stability")),
        }
    }
    Ok(StabilityLoss { param: 0.5 * (good + bad_v), multiplier_re: bad_z.re, multiplier_im: bad_z.im })
}

enum Probe {
    /// Stable `(1,n)` orbit with positive margin.
    Alive(PeriodicOrbit),
    /// Orbit has an extra impact, changed class or could not be polished.
    Grazed,
    /// Orbit became unstable with positive margin.
    Unstable(f64),
}

fn probe_orbit(params: &ModelParams, mu: f64, omega: f64, n: u32, seed: StateVec) -> Result<Probe> {
    let sys = build_system(params, &Forcing::single(mu, omega))?;
    let orbit = match polish_periodic_orbit(&sys, seed, n) {
        Ok(o) => o,
        Err(_) => return Ok(Probe::Grazed),
    };
    if orbit.class != (OrbitClass::MN { m: 1, n }) || orbit.grazing_margin <= 0.0 {
        return Ok(Probe::Grazed);
    }
    let rho = orbit_stability(&sys, &orbit)?;
    if rho >= 1.0 {
        return Ok(Probe::Unstable(rho));
    }
    Ok(Probe::Alive(orbit))
}

fn find_orbit(
    params: &ModelParams,
    mu: f64,
    omega: f64,
    n: u32,
    hint: Option<StateVec>,
    opts: &CurveOptions,
) -> Option<PeriodicOrbit> {
    if let Some(h) = hint {
        if let Ok(Probe::Alive(o)) = probe_orbit(params, mu, omega, n, h) {
            return Some(o);
        }
    }
    let sys = build_system(params, &Forcing::single(mu, omega)).ok()?;
    let key = mu.to_bits() ^ omega.to_bits().rotate_left(17);
    let ics: Vec<StateVec> =
        (0..opts.search_samples).map(|s| IcBox::default().sample(&mut task_rng(opts.seed, key, s as u64))).collect();
    let found = ics.par_iter().find_map_first(|&ic| {
        let r = classify_attractor(&sys, ic, &opts.classify).ok()?;
        (r.class == OrbitClass::MN { m: 1, n }).then_some(r.anchor)
    })?;
    match probe_orbit(params, mu, omega, n, found) {
        Ok(Probe::Alive(o)) => Some(o),
        _ => None,
    }
}

/// Follow the `(1,n)` orbit toward lower ω at one amplitude until it
/// acquires an extra impact.
fn grazing_point(
    params: &ModelParams,
    mu: f64,
    n: u32,
    omega_start: f64,
    hint: Option<StateVec>,
    opts: &CurveOptions,
) -> Result<(CurvePoint, StateVec)> {
    let lost = |omega: f64, reason: String| Error::OrbitLostBeforeGraze { omega, reason };
    let mut orbit = find_orbit(params, mu, omega_start, n, hint, opts)
        .ok_or_else(|| lost(omega_start, format!("no stable (1,{n}) orbit at the start")))?;
    let mut hi = omega_start;
    let lo = loop {
        let w = hi - opts.omega_step;
        if w < opts.omega_min {
            return Err(lost(w, "reached the lower frequency limit".into()));
        }
        match probe_orbit(params, mu, w, n, orbit.anchors[0])? {
            Probe::Alive(o) => {
                orbit = o;
                hi = w;
            }
            Probe::Grazed => break w,
            Probe::Unstable(rho) => return Err(lost(w, format!("Floquet radius {rho:.4} before grazing"))),
        }
    };
    let mut lo = lo;
    while hi - lo > opts.omega_tol {
        let mid = 0.5 * (lo + hi);
        match probe_orbit(params, mu, mid, n, orbit.anchors[0])? {
            Probe::Alive(o) => {
                orbit = o;
                hi = mid;
            }
            Probe::Grazed => lo = mid,
            Probe::Unstable(rho) => return Err(lost(mid, format!("Floquet radius {rho:.4} before grazing"))),
        }
    }
    Ok((CurvePoint { mu, omega_g: hi, residual: orbit.grazing_margin }, orbit.anchors[0]))
}

/// Trace `ω_g = G_n(μ)` for each amplitude in `mu_list` (continuation in
/// list order, seeded at `omega_seed` for the first).
pub fn trace_grazing_curve(
    params: &ModelParams,
    n: u32,
    mu_list: &[f64],
    omega_seed: f64,
    opts: &CurveOptions,
) -> Result<GrazingCurve> {
    if n == 0 {
        return Err(Error::InvalidInput("orbit index must be positive".into()));
    }
    params.validate()?;
    let mut curve = GrazingCurve { n, points: Vec::new(), failures: Vec::new() };
    let mut start = omega_seed;
    let mut hint = None;
    for &mu in mu_list {
        let mut attempt = grazing_point(params, mu, n, start, hint, opts);
        if attempt.is_err() && start != omega_seed {
            attempt = grazing_point(params, mu, n, omega_seed, None, opts);
        }
        match attempt {
            Ok((p, anchor)) => {
                start = p.omega_g + opts.restart_offset;
                hint = Some(anchor);
                curve.points.push(p);
            }
            Err(e) => curve.failures.push((mu, e.kind().to_string(), e.to_string())),
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaCell {
    pub class: Option<OrbitClass>,
    /// Index of the nearest stroboscopic point of the class's reference
    /// orbit; `None` without phase resolution or for aperiodic cells.
    pub phase: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    pub t0: f64,
    pub a0: f64,
    pub v: Axis,
    pub c: Axis,
    /// Row-major in C, then V.
    pub cells: Vec<DoaCell>,
}

/// Classify the centre of every `(V, C)` cell of the section `A = a0` at
/// time `t0`.
pub fn doa_grid(
    sys: &SystemReal,
    t0: f64,
    a0: f64,
    v: Axis,
    c: Axis,
    phase_resolve: bool,
    classify: &ClassifyOptions,
) -> Result<DoaGrid> {
    v.validate("V")?;
    c.validate("C")?;
    let period = forcing_period(sys)?;
    // Classification runs from a stroboscopic time; move the section there.
    let t_start = (t0 / period).ceil() * period;
    let vs = v.centres();
    let cs = c.centres();
    let reports: Vec<Option<(OrbitClass, StateVec)>> = (0..vs.len() * cs.len())
        .into_par_iter()
        .map(|idx| {
            let x = Vec3::new(vs[idx % vs.len()], a0, cs[idx / vs.len()]);
            let x =
                if t_start > t0 { propagate_exact(sys, t0, x, t_start, &FlowOptions::lean()).ok()?.x_end } else { x };
            let r = classify_attractor(sys, x, classify).ok()?;
            Some((r.class, r.anchor))
        })
        .collect();

    let mut cells: Vec<DoaCell> = reports.iter().map(|r| DoaCell { class: r.map(|(k, _)| k), phase: None }).collect();
    if phase_resolve {
        // Reference orbit per class: the first cell (in index order) that
        // reached it.
        let mut refs: BTreeMap<OrbitClassKey, Vec<StateVec>> = BTreeMap::new();
        for (k, anchor) in reports.iter().flatten() {
            if let OrbitClass::MN { n, .. } = k {
                if let std::collections::btree_map::Entry::Vacant(slot) = refs.entry(OrbitClassKey(*k)) {
                    let mut pts = vec![*anchor];
                    for j in 1..*n {
                        pts.push(poincare_iterate(sys, pts[j as usize - 1], 0.0, 1)?);
                    }
                    slot.insert(pts);
                }
            }
        }
        for (cell, r) in cells.iter_mut().zip(&reports) {
            if let Some((k, anchor)) = r {
                if let Some(pts) = refs.get(&OrbitClassKey(*k)) {
                    let best = pts
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (*a.1 - *anchor).norm_inf().total_cmp(&(*b.1 - *anchor).norm_inf()))
                        .map(|(j, _)| j as u32);
                    cell.phase = best;
                }
            }
        }
    }
    Ok(DoaGrid { t0, a0, v, c, cells })
}

impl DoaGrid {
    pub fn cell(&self, iv: usize, ic: usize) -> &DoaCell {
        &self.cells[ic * self.v.n + iv]
    }

    /// Midpoints between horizontally or vertically adjacent cells whose
    /// class (and phase, when resolved) differ, in `(V, C)`.
    pub fn boundary_points(&self, with_phase: bool) -> Vec<(f64, f64)> {
        let vs = self.v.centres();
        let cs = self.c.centres();
        let differs = |a: &DoaCell, b: &DoaCell| a.class != b.class || (with_phase && a.phase != b.phase);
        let mut out = Vec::new();
        for ic in 0..self.c.n {
            for iv in 0..self.v.n {
                let here = self.cell(iv, ic);
                if iv + 1 < self.v.n && differs(here, self.cell(iv + 1, ic)) {
                    out.push((0.5 * (vs[iv] + vs[iv + 1]), cs[ic]));
                }
                if ic + 1 < self.c.n && differs(here, self.cell(iv, ic + 1)) {
                    out.push((vs[iv], 0.5 * (cs[ic] + cs[ic + 1])));
                }
            }
        }
        out
    }

    /// `V,C,class_m,class_n,phase` (phase −1 when unresolved).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "V,C,class_m,class_n,phase")?;
        let vs = self.v.centres();
        let cs = self.c.centres();
        for (idx, cell) in self.cells.iter().enumerate() {
            let (m, n) = cell.class.map(|k| k.code()).unwrap_or((-1, -1));
            let phase = cell.phase.map(i64::from).unwrap_or(-1);
            writeln!(w, "{},{},{},{},{}", fmt_f64(vs[idx % self.v.n]), fmt_f64(cs[idx / self.v.n]), m, n, phase)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicReport {
    pub trajectory: Trajectory,
    /// The same start under the first forcing term alone.
    pub reference: Trajectory,
    /// Sup-norm gap between the two after `t_transient`.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub grazes: Vec<f64>,
    /// Times of extrema facing Σ that come within `near_graze` of it.
    pub near_grazes: Vec<f64>,
}

/// Follow `x0` under the full (two-term) forcing and compare with the
/// first term alone.
pub fn quasi_periodic_experiment(
    sys: &SystemReal,
    x0: StateVec,
    horizon: f64,
    t_transient: f64,
    near_graze: f64,
) -> Result<QuasiPeriodicReport> {
    if sys.forcing.terms.is_empty() {
        return Err(Error::InvalidInput("quasi-periodic experiment needs a forcing term".into()));
    }
    let reference_forcing = Forcing { terms: sys.forcing.terms[..1].to_vec() };
    let ref_sys = build_system(&sys.params, &reference_forcing)?;
    // Shared sample grid: both runs use the same output times.
    let opts = FlowOptions { output_step: Some(0.5), ..FlowOptions::default() };
    let trajectory = propagate_exact(sys, 0.0, x0, horizon, &opts)?;
    let reference = propagate_exact(&ref_sys, 0.0, x0, horizon, &opts)?;
    let gaps: Vec<f64> = trajectory
        .samples
        .iter()
        .zip(&reference.samples)
        .filter(|(a, _)| a.t >= t_transient)
        .map(|(a, b)| (a.state - b.state).norm_inf())
        .collect();
    let max_deviation = gaps.iter().copied().fold(0.0, f64::max);
    let mean_deviation = if gaps.is_empty() { 0.0 } else { gaps.iter().sum::<f64>() / gaps.len() as f64 };
    let grazes = trajectory.events.iter().filter(|e| e.kind == EventKind::Graze).map(|e| e.t).collect();
    let near_grazes = trajectory
        .extrema
        .iter()
        .filter(|e| !e.virtual_ && e.faces_switch() && e.margin() < near_graze)
        .map(|e| e.t)
        .collect();
    Ok(QuasiPeriodicReport { trajectory, reference, max_deviation, mean_deviation, grazes, near_grazes })
}

/// One glacial cycle of a ramped run: inception to the next inception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampCycle {
    pub t_start: f64,
    pub length: f64,
    /// Forcing periods per cycle at the cycle midpoint.
    pub periods: f64,
    /// Ramped parameter at the cycle start.
    pub param: f64,
}

impl RampCycle {
    /// Nearest `n` of a `(1,n)`-like cycle.
    pub fn n(&self) -> u32 {
        self.periods.round().max(0.0) as u32
    }
}

/// Split a ramped trajectory into inception-to-inception cycles, measuring
/// each against the local forcing period of term `omega_term` (whose
/// frequency may itself be the ramped quantity).
pub fn ramp_cycles(traj: &Trajectory, ramp: &ParamRamp, base_omega: f64) -> Vec<RampCycle> {
    let inceptions: Vec<f64> =
        traj.events.iter().filter(|e| e.kind == EventKind::CrossMinusToPlus).map(|e| e.t).collect();
    inceptions
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let rate = match ramp.param {
                crate::flow::RampedParam::Omega(_) => ramp.phase_rate(mid),
                crate::flow::RampedParam::D => base_omega,
            };
            RampCycle {
                t_start: w[0],
                length: w[1] - w[0],
                periods: (w[1] - w[0]) * rate / (2.0 * PI),
                param: ramp.value(w[0]),
            }
        })
        .collect()
}

/// First time each new `(1,n)` regime starts, in order of appearance; a
/// regime counts once it persists for `min_cycles` consecutive cycles.
pub fn ramp_transitions(cycles: &[RampCycle], min_cycles: usize) -> Vec<(u32, f64, f64)> {
    let mut out: Vec<(u32, f64, f64)> = Vec::new();
    let mut i = 0;
    while i < cycles.len() {
        let n = cycles[i].n();
        let mut j = i;
        while j < cycles.len() && cycles[j].n() == n {
            j += 1;
        }
        if j - i >= min_cycles.max(1) && out.last().map(|l| l.0) != Some(n) {
            out.push((n, cycles[i].t_start, cycles[i].param));
        }
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_rng_is_keyed() {
        let a: f64 = task_rng(1, 2, 3).gen();
        let b: f64 = task_rng(1, 2, 3).gen();
        let c: f64 = task_rng(1, 2, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spec_values_and_validation() {
        let spec =
            SweepSpec::new(SweepParam::Omega, 0.1, 0.12, 0.005, ModelParams::default(), Forcing::single(0.3, 0.1));
        assert_eq!(spec.values().len(), 5);
        assert!((spec.values()[4] - 0.12).abs() < 1e-15);
        let mut bad = spec.clone();
        bad.step = 0.0;
        assert!(bad.validate().is_err());
        bad = spec.clone();
        bad.samples = 0;
        assert!(bad.validate().is_err());
        let unforced = SweepSpec::new(SweepParam::Mu, 0.0, 0.1, 0.05, ModelParams::default(), Forcing::none());
        assert!(unforced.validate().is_err());
    }

    #[test]
    fn sweep_is_small_and_ordered() {
        let mut spec =
            SweepSpec::new(SweepParam::Omega, 0.114, 0.116, 0.002, ModelParams::default(), Forcing::single(0.3, 0.1));
        spec.samples = 4;
        spec.seed = 7;
        let r = monte_carlo_sweep(&spec).unwrap();
        assert_eq!(r.cells.len(), 8);
        for (k, c) in r.cells.iter().enumerate() {
            assert_eq!(c.ic_index, k % 4);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("param,ic_index,class_m,class_n,grazing_margin,f_extrema\n"));
    }

    #[test]
    fn ramp_regimes() {
        let mk = |t: f64, p: f64| RampCycle { t_start: t, length: 0.0, periods: p, param: 0.0 };
        let cycles = [mk(0.0, 3.1), mk(1.0, 2.9), mk(2.0, 2.1), mk(3.0, 3.0), mk(4.0, 2.0), mk(5.0, 1.9), mk(6.0, 1.1)];
        let tr = ramp_transitions(&cycles, 2);
        assert_eq!(tr.iter().map(|t| (t.0, t.1)).collect::<Vec<_>>(), vec![(3, 0.0), (2, 4.0)]);
    }
}
