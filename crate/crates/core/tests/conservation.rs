//! Mass and energy books of committed schedules, recomputed from the data.

mod common;

use common::{battery_residual, h2_residual, simultaneity};
use h2grid::{run_rolling, synth, Mode, RollingOptions};
use proptest::prelude::*;

#[test]
fn hydrogen_books_close_over_the_rolling_week() {
    let s = synth::case33_24();
    let run = run_rolling(&s, &RollingOptions::default()).unwrap();
    let sol = &run.solution;
    assert!(h2_residual(&s, sol) <= 1e-6, "{}", h2_residual(&s, sol));
    assert!(simultaneity(sol) <= 1e-9, "{}", simultaneity(sol));
    // horizon totals: what went in minus what came out is what is left
    for h in &s.fleet.h2 {
        let (mut made, mut used, mut lost) = (0.0, 0.0, 0.0);
        for rec in &sol.hours {
            let x = &rec.h2[&h.id];
            made += x.qh_el + x.el_shed * h.kg_per_mwh();
            used += x.qh_fc + s.timeline.demand(&h.id, rec.hour);
            lost += h.dissipation * x.mass;
        }
        let last = sol.hours.last().unwrap().h2[&h.id].mass;
        assert!((h.initial_mass + made - used - lost - last).abs() <= 1e-6, "{}", h.id);
    }
}

#[test]
fn battery_books_close_over_the_rolling_week() {
    let s = synth::with_batteries(&synth::case33_24(), 4.0);
    let run = run_rolling(&s, &RollingOptions::default()).unwrap();
    assert!(battery_residual(&s, &run.solution) <= 1e-6, "{}", battery_residual(&s, &run.solution));
    assert!(simultaneity(&run.solution) <= 1e-9);
    for rec in &run.solution.hours {
        for (id, x) in &rec.battery {
            let b = s.fleet.batteries.iter().find(|b| &b.id == id).unwrap();
            assert!(x.soc >= -1e-9 && x.soc <= b.p_rating * b.duration + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tutorial_books_close_for_any_demand(
        d1 in 0.0f64..12.0,
        d2 in 0.0f64..12.0,
        m0 in 0.0f64..1.0,
    ) {
        let mut s = synth::tutorial();
        let h = &mut s.fleet.h2[0];
        h.initial_mass = h.tank_min + m0 * (h.tank_max - h.tank_min);
        s.timeline.fcev_demand.insert("HS1".into(), vec![d1, d2]);
        let opts = RollingOptions { mode: Mode::Perfect, ..RollingOptions::default() };
        let run = run_rolling(&s, &opts).unwrap();
        prop_assert!(h2_residual(&s, &run.solution) <= 1e-6);
        prop_assert!(simultaneity(&run.solution) <= 1e-9);
        for rec in &run.solution.hours {
            let x = &rec.h2["HS1"];
            let cap = s.timeline.demand("HS1", rec.hour) / s.fleet.h2[0].kg_per_mwh();
            prop_assert!(x.el_shed >= -1e-9 && x.el_shed <= cap + 1e-9);
        }
    }
}
