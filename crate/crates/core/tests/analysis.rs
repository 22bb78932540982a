//! Orbit, grazing and scan behaviour on small, fast configurations.

use std::f64::consts::PI;

use pp04::flow::{propagate_exact, FlowOptions};
use pp04::grazing::{find_grazing_ic, solve_grazing_times, GrazingSearch, LeafSelector};
use pp04::orbits::{
    classify_attractor, log_grid, poincare_iterate, polish_periodic_orbit, probe_section, sqrt_discontinuity_probe,
    ClassifyOptions, OrbitClass,
};
use pp04::scan::{monte_carlo_sweep, SweepParam, SweepSpec};
use pp04::{build_system, Forcing, ModelParams, RegionLabel, SystemReal, Vec3};
use proptest::prelude::*;

fn system(mu: f64, omega: f64) -> SystemReal {
    build_system(&ModelParams::default(), &Forcing::single(mu, omega)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grazing_times_repeat_with_the_forcing_period(mu in 0.2..1.0_f64, omega in 0.05..0.3_f64) {
        let sys = system(mu, omega);
        let period = 2.0 * PI / omega;
        let set = solve_grazing_times(&sys, RegionLabel::Plus, 0.0, 4.0 * period).unwrap();
        for &t in set.values().iter().filter(|&&t| t + period < 3.9 * period) {
            let shifted = set.nearest(t + period).unwrap();
            prop_assert!((shifted - t - period).abs() < 1e-6);
        }
    }
}

#[test]
fn grazing_initial_condition_touches_the_surface() {
    let sys = system(0.3, 0.115);
    let ic = find_grazing_ic(
        &sys,
        0.0,
        0.2089,
        0.2356,
        (0.36, 0.40),
        LeafSelector::NearestTime(72.4),
        &GrazingSearch::default(),
    )
    .unwrap();
    let tr = propagate_exact(&sys, 0.0, ic.state(), ic.t_g + 5.0, &FlowOptions::default()).unwrap();
    let touch = tr
        .extrema
        .iter()
        .filter(|e| e.faces_switch())
        .min_by(|a, b| (a.t - ic.t_g).abs().total_cmp(&(b.t - ic.t_g).abs()))
        .unwrap();
    assert!((touch.t - ic.t_g).abs() < 1e-3);
    assert!(touch.f.abs() < 1e-7, "F at tangency {}", touch.f);
}

#[test]
fn polished_orbit_is_a_fixed_point_of_the_iterated_map() {
    let sys = system(0.3, 0.115);
    let rep = classify_attractor(&sys, Vec3::new(0.3636, 0.2089, 0.2356), &ClassifyOptions::default()).unwrap();
    assert_eq!(rep.class, OrbitClass::MN { m: 1, n: 3 });
    let orbit = polish_periodic_orbit(&sys, rep.anchor, 3).unwrap();
    let x = orbit.anchors[0];
    let back = poincare_iterate(&sys, x, 0.0, 3).unwrap();
    assert!((back - x).norm_inf() < 1e-9);
    let once = poincare_iterate(&sys, x, 0.0, 1).unwrap();
    assert!((once - x).norm_inf() > 1e-2);
}

#[test]
fn unforced_cycle_is_slower_than_typical_forcing() {
    let sys = build_system(&ModelParams::default(), &Forcing::none()).unwrap();
    let cycle = polish_periodic_orbit(&sys, Vec3::new(0.5, 0.5, 0.5), 1).unwrap();
    assert!(cycle.period > 100.0 && cycle.period < 200.0, "{}", cycle.period);
}

#[test]
fn discontinuity_probe_scales_like_a_square_root() {
    let sys = system(0.3, 0.115);
    let ic = find_grazing_ic(
        &sys,
        0.0,
        0.2089,
        0.2356,
        (0.36, 0.40),
        LeafSelector::NearestTime(72.4),
        &GrazingSearch::default(),
    )
    .unwrap();
    let (t_alpha, x_alpha) = probe_section(&sys, 0.0, ic.state(), ic.t_g).unwrap();
    let rep =
        sqrt_discontinuity_probe(&sys, x_alpha, t_alpha, Vec3::new(1.0, 0.0, 0.0), &log_grid(1e-8, 1e-4, 9)).unwrap();
    assert!((rep.exponent - 0.5).abs() < 0.05, "exponent {}", rep.exponent);
    assert!((rep.smooth_exponent - 1.0).abs() < 0.05);
}

#[test]
fn sweep_is_reproducible_and_worker_independent() {
    let run = |threads: usize| {
        let mut spec =
            SweepSpec::new(SweepParam::Omega, 0.112, 0.116, 0.002, ModelParams::default(), Forcing::single(0.3, 0.1));
        spec.samples = 3;
        spec.seed = 9;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| monte_carlo_sweep(&spec)).unwrap();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        String::from_utf8(csv).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
    assert!(one.starts_with("param,ic_index,class_m,class_n,grazing_margin,f_extrema\n"));
    assert_eq!(one.lines().count(), 1 + 3 * 3);
}

#[test]
fn invalid_sweep_is_rejected() {
    let spec = SweepSpec::new(SweepParam::Omega, 0.2, 0.1, 0.01, ModelParams::default(), Forcing::single(0.3, 0.1));
    assert!(monte_carlo_sweep(&spec).is_err());
}
