//! Exact-flow properties: agreement with an independent integrator, event
//! bookkeeping, and the absence of tangencies under weak forcing.

use pp04::flow::{propagate_exact, propagate_exact_backward, propagate_smoothed, EventKind, FlowOptions, RkOptions};
use pp04::orbits::{classify_attractor, ClassifyOptions};
use pp04::{build_system, Forcing, ModelParams, RegionLabel, StateVec, SystemReal, Vec3};
use proptest::prelude::*;

fn system(mu: f64, omega: f64) -> SystemReal {
    build_system(&ModelParams::default(), &Forcing::single(mu, omega)).unwrap()
}

/// Classical RK4 on one region's linear ODE.
fn rk4(sys: &SystemReal, region: RegionLabel, t0: f64, x0: StateVec, t1: f64, steps: usize) -> StateVec {
    let h = (t1 - t0) / steps as f64;
    let mut x = x0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = sys.rhs(region, t, &x);
        let k2 = sys.rhs(region, t + 0.5 * h, &(x + k1.scale(0.5 * h)));
        let k3 = sys.rhs(region, t + 0.5 * h, &(x + k2.scale(0.5 * h)));
        let k4 = sys.rhs(region, t + h, &(x + k3.scale(h)));
        x += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    x
}

fn state() -> impl Strategy<Value = StateVec> {
    (-1.0..1.5_f64, 0.0..1.2_f64, 0.0..1.0_f64).prop_map(|(v, a, c)| Vec3::new(v, a, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arcs_between_events_solve_the_region_ode(x0 in state(), mu in 0.0..1.0_f64, omega in 0.05..0.3_f64) {
        let sys = system(mu, omega);
        let tr = propagate_exact(&sys, 0.0, x0, 150.0, &FlowOptions::default()).unwrap();
        for w in tr.samples.windows(2) {
            let event_between = tr.events.iter().any(|e| e.t > w[0].t - 1e-9 && e.t < w[1].t + 1e-9);
            if event_between || w[0].region != w[1].region {
                continue;
            }
            let x = rk4(&sys, w[0].region, w[0].t, w[0].state, w[1].t, 40);
            prop_assert!((x - w[1].state).norm_inf() < 1e-9, "t = {}: {:?} vs {:?}", w[1].t, x, w[1].state);
        }
    }

    #[test]
    fn events_lie_on_the_switching_surface(x0 in state(), mu in 0.0..1.0_f64, omega in 0.05..0.3_f64) {
        let sys = system(mu, omega);
        let tr = propagate_exact(&sys, 0.0, x0, 300.0, &FlowOptions::default()).unwrap();
        let mut region = tr.region0;
        for e in &tr.events {
            prop_assert!(sys.switching_value(&e.state).abs() < 1e-8);
            match e.kind {
                EventKind::CrossPlusToMinus => {
                    prop_assert_eq!(region, RegionLabel::Plus);
                    prop_assert!(e.f_dot <= 0.0);
                    region = RegionLabel::Minus;
                }
                EventKind::CrossMinusToPlus => {
                    prop_assert_eq!(region, RegionLabel::Minus);
                    prop_assert!(e.f_dot >= 0.0);
                    region = RegionLabel::Plus;
                }
                EventKind::Graze => {}
            }
        }
        prop_assert_eq!(region, tr.region_end);
        for s in &tr.samples {
            if s.f.abs() > 1e-9 {
                prop_assert_eq!(s.region, RegionLabel::of_value(s.f));
            }
        }
    }

    #[test]
    fn propagation_composes(x0 in state(), split in 10.0..190.0_f64) {
        let sys = system(0.3, 0.115);
        let opts = FlowOptions::lean();
        let whole = propagate_exact(&sys, 0.0, x0, 200.0, &opts).unwrap();
        let near_graze = propagate_exact(&sys, 0.0, x0, 200.0, &FlowOptions::default())
            .unwrap()
            .extrema
            .iter()
            .any(|e| e.faces_switch() && e.margin().abs() < 1e-4);
        prop_assume!(!near_graze);
        let first = propagate_exact(&sys, 0.0, x0, split, &opts).unwrap();
        let second = propagate_exact(&sys, split, first.x_end, 200.0, &opts).unwrap();
        prop_assert!((whole.x_end - second.x_end).norm_inf() < 1e-8);
    }

    #[test]
    fn backward_flow_retraces_forward_flow(x0 in state()) {
        let sys = system(0.3, 0.115);
        let fwd = propagate_exact(&sys, 0.0, x0, 40.0, &FlowOptions::lean()).unwrap();
        prop_assume!(fwd.grazes().count() == 0);
        if let Ok(back) = propagate_exact_backward(&sys, 40.0, fwd.x_end, 0.0, &FlowOptions::lean()) {
            prop_assert!((back.x_end - x0).norm_inf() < 1e-6 * (1.0 + x0.norm_inf()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weak_forcing_never_grazes(x0 in state(), mu in 0.0..=0.05_f64, omega in 0.02..0.3_f64) {
        let opts = ClassifyOptions { rotation_periods: 100, ..ClassifyOptions::default() };
        let rep = classify_attractor(&system(mu, omega), x0, &opts).unwrap();
        prop_assert_eq!(rep.grazes, 0);
        prop_assert!(rep.grazing_margin > 0.0);
    }
}

#[test]
fn smoothed_flow_tracks_exact_flow_away_from_tangencies() {
    let sys = system(0.3, 0.115);
    let x0 = Vec3::new(0.3636, 0.2089, 0.2356);
    let exact = propagate_exact(&sys, 0.0, x0, 200.0, &FlowOptions::default()).unwrap();
    let smooth = propagate_smoothed(&sys, &ModelParams::default(), 0.0, x0, 200.0, &RkOptions::default()).unwrap();
    assert_eq!(exact.samples.len(), smooth.samples.len());
    let gap =
        exact.samples.iter().zip(&smooth.samples).map(|(a, b)| (a.state - b.state).norm_inf()).fold(0.0, f64::max);
    assert!(gap < 1e-2, "gap {gap}");
}

#[test]
fn unforced_flow_relaxes_to_a_cycle_with_crossings() {
    let sys = build_system(&ModelParams::default(), &Forcing::none()).unwrap();
    let tr = propagate_exact(&sys, 0.0, Vec3::new(0.5, 0.5, 0.5), 2000.0, &FlowOptions::lean()).unwrap();
    assert!(tr.inceptions_between(1000.0, 2000.0) >= 6);
    assert_eq!(tr.grazes().count(), 0);
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let sys = system(0.3, 0.115);
    let tr = propagate_exact(&sys, 0.0, Vec3::new(0.4, 0.3, 0.2), 10.0, &FlowOptions::default()).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,V,A,C,F,region"));
    assert_eq!(lines.count(), tr.samples.len());
}
