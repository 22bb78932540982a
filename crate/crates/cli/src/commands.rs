//! Subcommand bodies. Each returns the names of the files it wrote.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use pp04::flow::{
    propagate_exact, propagate_ramped, propagate_smoothed, FlowOptions, GrazePolicy, ParamRamp, PhaseConvention,
    RampedParam, RkOptions, Trajectory,
};
use pp04::grazing::{
    find_grazing_ic, solve_grazing_times, trace_leaf, GrazingLeaf, GrazingSearch, LeafSelector, TraceOptions,
};
use pp04::io::{fmt_f64, write_json};
use pp04::orbits::{
    classify_attractor, log_grid, polish_periodic_orbit, probe_section, sqrt_discontinuity_probe, ClassifyOptions,
    OrbitClass,
};
use pp04::scan::{
    doa_grid, floquet_multipliers, monte_carlo_sweep, quasi_periodic_experiment, ramp_cycles, ramp_transitions,
    tongue_map, trace_grazing_curve, Axis, CurveOptions, IcBox, SweepParam, SweepSpec,
};
use pp04::{build_system, RegionLabel, SystemReal, Vec3};

use crate::config::Resolved;

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn file(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        body(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        self.file(name, |w| write_json(w, value))
    }

    fn trajectory(&mut self, name: &str, tr: &Trajectory) -> Result<()> {
        self.file(name, |w| tr.write_csv(w))
    }
}

fn system(cfg: &Resolved) -> Result<SystemReal> {
    Ok(build_system(&cfg.model_params(), &cfg.forcing())?)
}

fn classify_options(cfg: &Resolved) -> ClassifyOptions {
    ClassifyOptions {
        t_settle: cfg.num("t_settle"),
        n_max: cfg.num("n_max") as u32,
        eps_per: cfg.num("eps_per"),
        rotation_periods: cfg.num("rotation_periods") as u32,
        ..ClassifyOptions::default()
    }
}

fn region(cfg: &Resolved) -> RegionLabel {
    if cfg.text("region") == "minus" {
        RegionLabel::Minus
    } else {
        RegionLabel::Plus
    }
}

fn search(cfg: &Resolved) -> GrazingSearch {
    GrazingSearch {
        region: region(cfg),
        track_radius: cfg.num("track_radius"),
        horizon: cfg.num("horizon"),
        ..GrazingSearch::default()
    }
}

fn run_summary(tr: &Trajectory) -> serde_json::Value {
    json!({
        "t0": tr.t0,
        "t_end": tr.t_end,
        "x_end": tr.x_end.0,
        "region_end": tr.region_end.as_str(),
        "crossings": tr.crossings().count(),
        "grazes": tr.grazes().count(),
        "inceptions": tr.inceptions_between(tr.t0, tr.t_end + 1.0),
        "samples": tr.samples.len(),
    })
}

fn class_json(class: &OrbitClass) -> serde_json::Value {
    let (m, n) = class.code();
    json!({ "label": class.to_string(), "m": m, "n": n })
}

pub fn run(name: &str, cfg: &Resolved, dir: &Path) -> Result<Vec<String>> {
    let mut out = Outputs { dir, written: Vec::new() };
    match name {
        "simulate" => simulate(cfg, &mut out)?,
        "simulate-smoothed" => simulate_smoothed(cfg, &mut out)?,
        "ramp" => ramp(cfg, &mut out)?,
        "classify" => classify(cfg, &mut out)?,
        "orbit" => orbit(cfg, &mut out)?,
        "probe-sqrt" => probe_sqrt(cfg, &mut out)?,
        "grazing-times" => grazing_times(cfg, &mut out)?,
        "grazing-ic" => grazing_ic(cfg, &mut out)?,
        "leaf" => leaf(cfg, &mut out)?,
        "sweep" => sweep(cfg, &mut out)?,
        "tongue" => tongue(cfg, &mut out)?,
        "doa" => doa(cfg, &mut out)?,
        "grazing-curve" => grazing_curve(cfg, &mut out)?,
        "quasi" => quasi(cfg, &mut out)?,
        other => bail!("unknown subcommand {other}"),
    }
    Ok(out.written)
}

fn simulate(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("t0", "t_end")?;
    let sys = system(cfg)?;
    let opts = FlowOptions {
        output_step: Some(cfg.num("output_step")),
        graze_policy: if cfg.text("graze_policy") == "cross" { GrazePolicy::Cross } else { GrazePolicy::Stay },
        ..FlowOptions::default()
    };
    let tr = propagate_exact(&sys, cfg.num("t0"), cfg.state("v0", "a0", "c0"), cfg.num("t_end"), &opts)?;
    out.trajectory("trajectory.csv", &tr)?;
    out.file("events.csv", |w| tr.write_events_csv(w))?;
    out.json("summary.json", &run_summary(&tr))
}

fn simulate_smoothed(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("t0", "t_end")?;
    let sys = system(cfg)?;
    let opts = RkOptions {
        rtol: cfg.num("rtol"),
        atol: cfg.num("atol"),
        h_max: cfg.num("h_max"),
        output_step: Some(cfg.num("output_step")),
        ..RkOptions::default()
    };
    let tr = propagate_smoothed(
        &sys,
        &cfg.model_params(),
        cfg.num("t0"),
        cfg.state("v0", "a0", "c0"),
        cfg.num("t_end"),
        &opts,
    )?;
    out.trajectory("trajectory.csv", &tr)?;
    out.file("events.csv", |w| tr.write_events_csv(w))?;
    out.json("summary.json", &run_summary(&tr))
}

fn ramp(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("ramp_start", "ramp_end")?;
    cfg.require_less("ramp_start", "t_end")?;
    let (from, to) = (cfg.num("from"), cfg.num("to"));
    let mut params = cfg.model_params();
    let mut forcing = cfg.forcing();
    let (which, base_omega) = if cfg.text("param") == "omega" {
        forcing.terms[0].omega = from;
        (RampedParam::Omega(0), from)
    } else {
        params.d = from;
        (RampedParam::D, forcing.terms[0].omega)
    };
    let convention = if cfg.text("convention") == "integrated" {
        PhaseConvention::Integrated
    } else {
        PhaseConvention::Instantaneous
    };
    let ramp =
        ParamRamp::linear(which, cfg.num("ramp_start"), from, cfg.num("ramp_end"), to).with_convention(convention);
    let sys = build_system(&params, &forcing)?;
    let opts = RkOptions { output_step: Some(cfg.num("output_step")), ..RkOptions::default() };
    let tr = propagate_ramped(
        &sys,
        &params,
        &ramp,
        cfg.num("ramp_start"),
        cfg.state("v0", "a0", "c0"),
        cfg.num("t_end"),
        &opts,
    )?;
    let cycles = ramp_cycles(&tr, &ramp, base_omega);
    let regimes = ramp_transitions(&cycles, cfg.usize("min_cycles"));
    out.trajectory("trajectory.csv", &tr)?;
    out.file("cycles.csv", |w| {
        writeln!(w, "t_start,length,periods,n,param")?;
        for c in &cycles {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(c.t_start),
                fmt_f64(c.length),
                fmt_f64(c.periods),
                c.n(),
                fmt_f64(c.param)
            )?;
        }
        Ok(())
    })?;
    out.file("regimes.csv", |w| {
        writeln!(w, "n,t,param")?;
        for (n, t, p) in &regimes {
            writeln!(w, "{n},{},{}", fmt_f64(*t), fmt_f64(*p))?;
        }
        Ok(())
    })
}

fn classify(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let r = classify_attractor(&sys, cfg.state("v0", "a0", "c0"), &classify_options(cfg))?;
    out.json(
        "classification.json",
        &json!({
            "class": class_json(&r.class),
            "residual": r.residual,
            "crossings": r.crossings,
            "grazes": r.grazes,
            "anchor": r.anchor.0,
            "t_anchor": r.t_anchor,
            "grazing_margin": r.grazing_margin,
            "rotation": r.rotation,
        }),
    )
}

fn orbit(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let rep = classify_attractor(&sys, cfg.state("v0", "a0", "c0"), &classify_options(cfg))?;
    let n = match (cfg.num("n") as u32, rep.class) {
        (0, OrbitClass::MN { n, .. }) => n,
        (0, other) => bail!(pp04::Error::InvalidInput(format!("attractor is {other}, not periodic; set n explicitly"))),
        (n, _) => n,
    };
    let orbit = polish_periodic_orbit(&sys, rep.anchor, n)?;
    let mult = floquet_multipliers(&sys, &orbit)?;
    let mut doc = orbit.to_json();
    doc["multipliers"] = json!(mult.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
    doc["spectral_radius"] = json!(mult.iter().map(|z| z.norm()).fold(0.0, f64::max));
    out.json("orbit.json", &doc)?;
    let tr = propagate_exact(&sys, 0.0, orbit.anchors[0], orbit.period, &FlowOptions::default())?;
    out.trajectory("orbit.csv", &tr)
}

fn graze_ic(cfg: &Resolved, sys: &SystemReal) -> Result<pp04::grazing::GrazingIc> {
    cfg.require_less("v_lo", "v_hi")?;
    Ok(find_grazing_ic(
        sys,
        cfg.num("t0"),
        cfg.num("a0"),
        cfg.num("c0"),
        (cfg.num("v_lo"), cfg.num("v_hi")),
        LeafSelector::NearestTime(cfg.num("t_near")),
        &search(cfg),
    )?)
}

fn probe_sqrt(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("eps_min", "eps_max")?;
    let sys = system(cfg)?;
    let ic = graze_ic(cfg, &sys)?;
    let (t_alpha, x_alpha) = probe_section(&sys, cfg.num("t0"), ic.state(), ic.t_g)?;
    let dir = Vec3::new(cfg.num("dir_v"), cfg.num("dir_a"), cfg.num("dir_c"));
    let grid = log_grid(cfg.num("eps_min"), cfg.num("eps_max"), cfg.usize("count"));
    let rep = sqrt_discontinuity_probe(&sys, x_alpha, t_alpha, dir, &grid)?;
    out.file("probe.csv", |w| {
        writeln!(w, "eps,distance,impacts,V,A,C")?;
        for p in &rep.points {
            let [v, a, c] = p.image.0;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(p.eps),
                fmt_f64(p.distance),
                p.impacts as u8,
                fmt_f64(v),
                fmt_f64(a),
                fmt_f64(c)
            )?;
        }
        Ok(())
    })?;
    let mut doc = serde_json::to_value(&rep)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("points");
        obj.insert("grazing_ic".into(), serde_json::to_value(ic)?);
    }
    out.json("probe.json", &doc)
}

fn grazing_times(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let set = solve_grazing_times(&sys, region(cfg), cfg.num("t0"), cfg.num("t_max"))?;
    out.file("grazing_times.csv", |w| {
        writeln!(w, "t,residual")?;
        for g in &set.times {
            writeln!(w, "{},{}", fmt_f64(g.t), fmt_f64(g.residual))?;
        }
        Ok(())
    })?;
    out.json(
        "grazing_times.json",
        &json!({
            "region": set.region.as_str(),
            "amplitude": set.amplitude,
            "offset": set.offset,
            "times": set.values(),
        }),
    )
}

fn grazing_ic(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let ic = graze_ic(cfg, &sys)?;
    out.json("grazing_ic.json", &serde_json::to_value(ic)?)
}

fn leaf(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("c_lo", "c_hi")?;
    let sys = system(cfg)?;
    let ic = graze_ic(cfg, &sys)?;
    let opts = TraceOptions { search: search(cfg), ..TraceOptions::default() };
    let leaf = trace_leaf(
        &sys,
        cfg.num("t0"),
        cfg.num("a0"),
        (cfg.num("c_lo"), cfg.num("c_hi")),
        cfg.usize("samples"),
        &ic,
        cfg.usize("leaf_id"),
        &opts,
    )?;
    out.file("leaf.csv", |w| GrazingLeaf::write_csv(std::slice::from_ref(&leaf), w))?;
    out.json("leaf.json", &leaf.summary_json())
}

fn sweep(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    cfg.require_less("from", "to")?;
    let param = SweepParam::parse(cfg.text("param")).context("sweep parameter")?;
    let mut spec =
        SweepSpec::new(param, cfg.num("from"), cfg.num("to"), cfg.num("step"), cfg.model_params(), cfg.forcing());
    spec.samples = cfg.usize("samples");
    spec.seed = cfg.seed;
    spec.refine_levels = cfg.num("refine_levels") as u32;
    spec.classify = classify_options(cfg);
    let r = monte_carlo_sweep(&spec)?;
    out.file("sweep.csv", |w| r.write_csv(w))?;
    out.file("edges.csv", |w| r.write_edges_csv(w))?;
    let changes: Vec<_> = r
        .dominant_changes
        .iter()
        .map(|(lo, hi, a, b)| {
            json!({ "lo": lo, "hi": hi, "from": a.map(|c| c.to_string()), "to": b.map(|c| c.to_string()) })
        })
        .collect();
    out.json("sweep.json", &json!({ "points": r.points, "dominant_changes": changes }))
}

fn tongue(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let omega = Axis::new(cfg.num("omega_lo"), cfg.num("omega_hi"), cfg.usize("omega_n"));
    let mu = Axis::new(cfg.num("mu_lo"), cfg.num("mu_hi"), cfg.usize("mu_n"));
    let map = tongue_map(
        &cfg.model_params(),
        omega,
        mu,
        cfg.usize("samples"),
        cfg.seed,
        IcBox::default(),
        &classify_options(cfg),
    )?;
    out.file("tongue.csv", |w| map.write_csv(w))
}

fn doa(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let v = Axis::new(cfg.num("v_lo"), cfg.num("v_hi"), cfg.usize("v_n"));
    let c = Axis::new(cfg.num("c_lo"), cfg.num("c_hi"), cfg.usize("c_n"));
    let grid =
        doa_grid(&sys, cfg.num("t0"), cfg.num("a0"), v, c, cfg.text("phase_resolve") == "yes", &classify_options(cfg))?;
    out.file("doa.csv", |w| grid.write_csv(w))
}

fn grazing_curve(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let (lo, hi, step) = (cfg.num("mu_from"), cfg.num("mu_to"), cfg.num("mu_step"));
    let count = ((hi - lo) / step + 1e-9).floor().max(0.0) as usize;
    let mus: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    let opts = CurveOptions {
        omega_step: cfg.num("omega_step"),
        omega_tol: cfg.num("omega_tol"),
        seed: cfg.seed,
        ..CurveOptions::default()
    };
    let curve = trace_grazing_curve(&cfg.model_params(), cfg.num("n") as u32, &mus, cfg.num("omega_seed"), &opts)?;
    out.file("grazing_curve.csv", |w| curve.write_csv(w))?;
    let fit = curve.linear_fit().map(|(k, b, r2)| json!({ "slope": k, "intercept": b, "r2": r2 }));
    let failures: Vec<_> =
        curve.failures.iter().map(|(mu, kind, msg)| json!({ "mu": mu, "kind": kind, "message": msg })).collect();
    out.json(
        "grazing_curve.json",
        &json!({ "n": curve.n, "points": curve.points.len(), "fit": fit, "failures": failures }),
    )
}

fn quasi(cfg: &Resolved, out: &mut Outputs) -> Result<()> {
    let sys = system(cfg)?;
    let rep = quasi_periodic_experiment(
        &sys,
        cfg.state("v0", "a0", "c0"),
        cfg.num("horizon"),
        cfg.num("t_transient"),
        cfg.num("near_graze"),
    )?;
    out.trajectory("trajectory.csv", &rep.trajectory)?;
    out.trajectory("reference.csv", &rep.reference)?;
    out.json(
        "quasi.json",
        &json!({
            "max_deviation": rep.max_deviation,
            "mean_deviation": rep.mean_deviation,
            "grazes": rep.grazes,
            "near_grazes": rep.near_grazes,
        }),
    )
}
