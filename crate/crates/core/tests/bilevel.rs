//! The single-level model against the bi-level problem it replaces.

mod common;

use common::{enumerate, exact, market_hour, solve_window};
use h2grid::names::{self as nm, hour};
use h2grid::tn::{eval_expr, ll_dual_objective, ll_primal_objective};
use h2grid::{build_window_model, reveal_forecast, synth, InitialState, ModelError, Scenario};
use misocp::ipm::IpmSettings;
use misocp::relax::{RelaxStatus, Relaxation};

#[test]
fn enumeration_matches_the_single_level_optimum() {
    let s = synth::tutorial();
    let w = reveal_forecast(&s, 1, 2);
    let m = build_window_model(&w, &InitialState::from_scenario(&s)).unwrap();
    assert!(m.ir.num_binaries() <= 12, "{} binaries", m.ir.num_binaries());
    let single = exact(&s);
    let brute = enumerate(&s);
    assert!(
        (single - brute).abs() <= 1e-4 * brute.abs().max(1.0),
        "single-level {single} vs enumeration {brute}"
    );
}

#[test]
fn enumeration_matches_when_the_feeder_can_sell_at_a_profit() {
    let mut s = synth::tutorial();
    // PV surplus in hour 2 worth selling at a high price
    s.fleet.pvs[0].p_max_profile = vec![0.3, 2.5];
    s.fleet.pvs[0].inverter_rating = 2.6;
    s.timeline.dn_sell_price = vec![30.0, 60.0];
    let single = exact(&s);
    let brute = enumerate(&s);
    assert!(
        (single - brute).abs() <= 1e-4 * brute.abs().max(1.0),
        "single-level {single} vs enumeration {brute}"
    );
}

#[test]
fn doubling_big_m_keeps_the_optimum() {
    let s = synth::tutorial();
    let base = exact(&s);
    let mut doubled = s.clone();
    doubled.options.big_m = Some(2.0 * s.min_big_m());
    let other = exact(&doubled);
    assert!((base - other).abs() <= 1e-6, "{base} vs {other}");
}

#[test]
fn big_m_below_the_dual_bound_is_rejected() {
    let mut s = synth::tutorial();
    s.options.big_m = Some(0.5 * s.min_big_m());
    let w = reveal_forecast(&s, 1, 2);
    match build_window_model(&w, &InitialState::from_scenario(&s)) {
        Err(ModelError::BigM { given, required }) => assert!(given < required),
        other => panic!("expected a big-M error, got {other:?}"),
    }
}

#[test]
fn buying_direction_forces_the_products_to_zero() {
    let s = synth::tutorial();
    let w = reveal_forecast(&s, 1, 2);
    let m = build_window_model(&w, &InitialState::from_scenario(&s)).unwrap();
    for t in 1..=2 {
        // push both products up as far as the rows allow with U = 0
        let mut ir = m.ir.clone();
        let u = ir.var_id(&hour(nm::U, t)).unwrap();
        ir.vars[u].lower = 0.0;
        ir.vars[u].upper = 0.0;
        ir.objective = Default::default();
        for k in [nm::KB, nm::KS] {
            ir.objective.terms.push((ir.var_id(&hour(k, t)).unwrap(), -1.0));
        }
        let r = Relaxation::of(&ir).unwrap().solve(&IpmSettings::default()).unwrap();
        assert_eq!(r.status, RelaxStatus::Optimal);
        assert!(-r.objective <= 1e-6, "hour {t}: K can reach {}", -r.objective);
    }
    // and at the optimum the purchase term equals price × quantity
    let (model, res) = solve_window(&s, 1, 2, 1e-9);
    for t in 1..=2 {
        let x = |n: String| res.primal[model.ir.var_id(&n).unwrap()];
        let cap = w.exchange_cap(t);
        let term = w.bid(t) * x(hour(nm::BUY, t)) - cap * x(hour(nm::PSIB, t)) + x(hour(nm::KB, t));
        let lam = x(h2grid::names::at(nm::LAM, s.tn.dn_coupling_bus, t));
        let direct = lam * x(hour(nm::BUY, t));
        assert!((term - direct).abs() <= 1e-5, "hour {t}: {term} vs λ·Exb {direct}");
        if x(hour(nm::U, t)) < 0.5 {
            assert!(x(hour(nm::KB, t)).abs() <= 1e-6 && x(hour(nm::KS, t)).abs() <= 1e-6);
        }
    }
}

fn check_strong_duality(s: &Scenario, start: usize, len: usize) {
    let (model, res) = solve_window(s, start, len, 1e-3);
    let w = reveal_forecast(s, start, len);
    for t in w.hours() {
        let p = eval_expr(&model.ir, &ll_primal_objective(&s.tn, &w, t), &res.primal).unwrap();
        let d = eval_expr(&model.ir, &ll_dual_objective(&s.tn, &w, t), &res.primal).unwrap();
        assert!((p - d).abs() <= 1e-6 * (1.0 + p.abs()), "{} hour {t}: primal {p} dual {d}", s.name);
        // the market on its own, with the same direction, clears at the same cost
        let sell = res.primal[model.ir.var_id(&hour(nm::U, t)).unwrap()] > 0.5;
        let alone = market_hour(s, t, w.exchange_cap(t), sell).cost;
        assert!((p - alone).abs() <= 1e-6 * (1.0 + p.abs()), "{} hour {t}: {p} vs {alone}", s.name);
    }
}

#[test]
fn strong_duality_holds_on_the_tutorial() {
    check_strong_duality(&synth::tutorial(), 1, 2);
}

#[test]
fn strong_duality_holds_on_the_bundled_week() {
    let s = synth::case33_24();
    check_strong_duality(&s, 1, 24);
    // a window with the outage in it
    check_strong_duality(&s, 121, 24);
}

#[test]
fn purchase_cost_is_the_market_price_times_the_volume() {
    let s = synth::tutorial();
    let (model, res) = solve_window(&s, 1, 2, 1e-9);
    let w = reveal_forecast(&s, 1, 2);
    // hour 1: uncongested, λ = 10 and the market sells the full limit
    let x = |n: String| res.primal[model.ir.var_id(&n).unwrap()];
    let lam1 = x(h2grid::names::at(nm::LAM, 2, 1));
    assert!((lam1 - 10.0).abs() < 1e-5, "{lam1}");
    assert!((x(hour(nm::BUY, 1)) - w.exchange_cap(1)).abs() < 1e-5);
    // hour 2: congested, λ = 50 above the bid, nothing bought
    let lam2 = x(h2grid::names::at(nm::LAM, 2, 2));
    assert!((lam2 - 50.0).abs() < 1e-5, "{lam2}");
    assert!(x(hour(nm::BUY, 2)).abs() < 1e-6);
}
