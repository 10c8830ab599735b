//! Rolling-horizon protocol on the bundled week.

use std::sync::OnceLock;

use h2grid::names as nm;
use h2grid::rolling::{solve_window, state_after};
use h2grid::{build_window_model, reveal_forecast, run_rolling, synth, InitialState, Mode, RollingOptions, RollingRun, Scenario};

fn week() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(synth::case33_24)
}

fn rolling() -> &'static RollingRun {
    static R: OnceLock<RollingRun> = OnceLock::new();
    R.get_or_init(|| run_rolling(week(), &RollingOptions::default()).unwrap())
}

fn perfect() -> &'static RollingRun {
    static R: OnceLock<RollingRun> = OnceLock::new();
    R.get_or_init(|| {
        let opts = RollingOptions {
            mode: Mode::Perfect,
            ..RollingOptions::default()
        };
        run_rolling(week(), &opts).unwrap()
    })
}

fn has_var(start: usize, prefix: &str) -> bool {
    let s = week();
    let w = reveal_forecast(s, start, 48);
    let m = build_window_model(&w, &InitialState::from_scenario(s)).unwrap();
    m.ir.vars.iter().any(|v| v.name.starts_with(prefix)) || m.ir.rows.iter().any(|r| r.name.starts_with(prefix))
}

#[test]
fn windows_ending_before_the_event_have_no_outage_rows() {
    let event = week().timeline.outage_events[0].start_hour;
    assert_eq!(event, 115);
    for start in [1, 25, 49] {
        assert!(start + 47 < event);
        let w = reveal_forecast(week(), start, 48);
        assert!(w.events.is_empty(), "window {start}");
        assert!(w.hours().all(|t| w.tie_live(t) && !w.emergency(t)));
        assert!(!has_var(start, nm::SHED_P), "window {start} has shedding");
    }
    // the first window that reaches the event sees it
    assert!(has_var(73, nm::SHED_P));
}

#[test]
fn window_from_hour_73_activates_the_reserve() {
    for start in [1, 25, 49] {
        assert!(!has_var(start, nm::H2_RESERVE), "window {start}");
    }
    let s = week();
    let w = reveal_forecast(s, 73, 48);
    let m = build_window_model(&w, &InitialState::from_scenario(s)).unwrap();
    let hours: Vec<usize> = m
        .ir
        .rows
        .iter()
        .filter(|r| r.name.starts_with(nm::H2_RESERVE))
        .map(|r| r.name.rsplit_once('@').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(hours.first(), Some(&73));
    assert_eq!(hours.last(), Some(&114));
}

#[test]
fn carried_state_is_bit_identical() {
    let s = week();
    let run = rolling();
    assert_eq!(run.windows.len(), 7);
    assert_eq!(run.initial_states[0], InitialState::from_scenario(s));
    for k in 1..run.windows.len() {
        let prev = &run.windows[k - 1];
        let cut = prev.log.commit_end;
        let from_window = state_after(s, &prev.solution, cut).unwrap();
        let from_schedule = state_after(s, &run.solution, cut).unwrap();
        assert_eq!(run.initial_states[k], from_window, "window {}", k + 1);
        assert_eq!(from_window, from_schedule);
        assert_eq!(run.windows[k].model.initial, run.initial_states[k]);
        assert_eq!(run.windows[k].log.start, cut + 1);
    }
}

#[test]
fn committed_hours_cover_the_week_once() {
    let run = rolling();
    let hours: Vec<usize> = run.solution.hours.iter().map(|h| h.hour).collect();
    assert_eq!(hours, (1..=168).collect::<Vec<_>>());
    for t in [1, 24, 25, 115, 168] {
        let w = run.window_of(t).unwrap();
        assert_eq!(w.solution.hour(t), run.solution.hour(t));
    }
    let total: f64 = run.solution.hours.iter().map(|h| h.cost).sum();
    assert_eq!(total, run.solution.objective);
}

#[test]
fn every_window_schedule_satisfies_its_model() {
    assert!(rolling().revalidate(1e-5).unwrap().is_empty());
    assert!(perfect().revalidate(1e-5).unwrap().is_empty());
}

#[test]
fn perfect_foresight_is_no_worse_than_rolling() {
    let (p, r) = (perfect().solution.objective, rolling().solution.objective);
    // both within 0.1% of their own bounds
    assert!(p <= r * (1.0 + 1e-3), "perfect {p} rolling {r}");
    let tut = synth::tutorial();
    let p = run_rolling(
        &tut,
        &RollingOptions {
            mode: Mode::Perfect,
            ..RollingOptions::default()
        },
    )
    .unwrap();
    let opts = RollingOptions {
        window: 1,
        commit: 1,
        ..RollingOptions::default()
    };
    let r = run_rolling(&tut, &opts).unwrap();
    assert!(p.solution.objective <= r.solution.objective + 1e-6);
}

#[test]
fn rolling_fills_the_tanks_only_after_the_warning() {
    let s = week();
    let run = rolling();
    let mass = |t: usize| -> f64 { run.solution.hour(t).unwrap().h2.values().map(|h| h.mass).sum() };
    let full: f64 = s.fleet.h2.iter().map(|h| h.tank_max).sum();
    // before the window that sees the event the tanks are not being filled
    assert!(mass(72) < 0.5 * full, "{} of {full}", mass(72));
    assert!(mass(114) > mass(72));
    // with perfect foresight more is stored before the event
    let pm: f64 = perfect().solution.hour(114).unwrap().h2.values().map(|h| h.mass).sum();
    assert!(pm >= mass(114) - 1e-6);
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let s = week();
    let w = reveal_forecast(s, 1, 24);
    let init = InitialState::from_scenario(s);
    let mut one = RollingOptions::default().solve;
    one.threads = 1;
    let mut four = one.clone();
    four.threads = 4;
    let a = solve_window(&w, &init, &one, None, 1).unwrap();
    let b = solve_window(&w, &init, &four, None, 1).unwrap();
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.result.primal, b.result.primal);
    assert_eq!(a.log.nodes, b.log.nodes);
}

#[test]
fn a_window_that_cannot_be_met_names_the_rows() {
    let mut s = synth::tutorial();
    // demand-response signal beyond what the fuel cell can follow with an empty tank
    s.fleet.h2[0].initial_mass = s.fleet.h2[0].tank_min;
    s.timeline.fcev_demand.insert("HS1".into(), vec![0.0, 0.0]);
    s.timeline.cbdr = vec![-0.5, -0.5];
    let err = run_rolling(&s, &RollingOptions::default()).unwrap_err();
    match err {
        h2grid::ModelError::WindowFailed { window, detail, .. } => {
            assert_eq!(window, 1);
            assert!(!detail.is_empty());
        }
        other => panic!("unexpected {other}"),
    }
}
