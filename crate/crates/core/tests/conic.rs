//! Tightness of the branch-flow cone at solved schedules.

mod common;

use common::{cone_gaps, solve_window};
use h2grid::{reveal_forecast, synth, DispatchSolution, Scenario};
use proptest::prelude::*;

fn assert_exact(s: &Scenario, start: usize, len: usize) {
    let (model, res) = solve_window(s, start, len, 1e-3);
    let w = reveal_forecast(s, start, len);
    let sol = DispatchSolution::extract(&w, &model.ir, &res).unwrap();
    let (lo, hi) = cone_gaps(s, &sol);
    assert!(lo >= -1e-5 && hi <= 1e-4, "{} from {start}: cone gap in [{lo:.3e}, {hi:.3e}]", s.name);
}

#[test]
fn tutorial_cone_is_tight() {
    assert_exact(&synth::tutorial(), 1, 2);
}

#[test]
fn bundled_week_cone_is_tight_in_normal_hours() {
    assert_exact(&synth::case33_24(), 1, 24);
}

#[test]
fn bundled_week_cone_is_tight_while_islanded() {
    // tie and DGs out, the feeder runs on PV, fuel cells and shedding
    assert_exact(&synth::case33_24(), 115, 24);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_feeders_stay_tight(
        r in 0.002f64..0.05,
        x in 0.002f64..0.08,
        load2 in 0.2f64..1.5,
        load3 in 0.1f64..1.0,
        pf in 0.1f64..0.5,
        pv in 0.0f64..0.5,
    ) {
        let mut s = synth::tutorial();
        // bid at the bus price, so the market does not push more power into
        // the feeder than it can use (the relaxation would burn the surplus
        // as fictitious losses)
        s.timeline.dso_bid_price = vec![10.0, 50.0];
        s.timeline.dso_offer_price = vec![10.0, 50.0];
        for l in &mut s.dn.lines {
            l.resistance = r;
            l.reactance = x;
        }
        s.timeline.dn_load[0].p = vec![load2, load2 * 1.1];
        s.timeline.dn_load[0].q = vec![load2 * pf, load2 * 1.1 * pf];
        s.timeline.dn_load[1].p = vec![load3, load3 * 0.9];
        s.timeline.dn_load[1].q = vec![load3 * pf, load3 * 0.9 * pf];
        s.fleet.pvs[0].p_max_profile = vec![pv, pv * 0.5];
        let (model, res) = solve_window(&s, 1, 2, 1e-6);
        let w = reveal_forecast(&s, 1, 2);
        let sol = DispatchSolution::extract(&w, &model.ir, &res).unwrap();
        let (lo, hi) = cone_gaps(&s, &sol);
        prop_assert!(lo >= -1e-5 && hi <= 1e-4, "gap in [{lo:.3e}, {hi:.3e}]");
    }
}
