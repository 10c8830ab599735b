#![allow(dead_code)]

use h2grid::analytics::{compute_dlmp, DlmpSeries};
use h2grid::dn::build_ul_blocks;
use h2grid::names::{self as nm, at, hour};
use h2grid::rolling::{solve_window as solve_forecast_window, WindowSolve};
use h2grid::{
    build_window_model, reveal_forecast, DispatchSolution, InitialState, RollingOptions, Scenario, WindowModel,
};
use misocp::bnb::{binary_assignment, fix_binaries_and_resolve};
use misocp::ipm::IpmSettings;
use misocp::relax::{RelaxStatus, Relaxation};
use misocp::{assemble, bnb, Block, Expr, SolveOptions, SolveResult};

/// Solves one window to a tight gap with the model's own rounding hint.
pub fn solve_window(s: &Scenario, start: usize, len: usize, gap: f64) -> (WindowModel, SolveResult) {
    let w = reveal_forecast(s, start, len);
    let model = build_window_model(&w, &InitialState::from_scenario(s)).expect("window builds");
    let hint = model.rounding_hint();
    let opts = SolveOptions {
        gap,
        threads: 4,
        ..SolveOptions::default()
    };
    let extras = bnb::Extras {
        hint: Some(&hint),
        start: None,
    };
    let res = bnb::solve_with(&model.ir, &opts, &extras).expect("solver runs");
    assert!(res.has_solution(), "window {start}+{len}: {:?}", res.status);
    (model, res)
}

/// The transmission market of hour `t` on its own, written from the network
/// data: DC flows, generator and wind limits, and the feeder's exchange at
/// the coupling bus with the direction fixed to `sell` (true: the feeder
/// sells). Objective is the market's cost including exchange payments.
pub struct MarketHour {
    pub cost: f64,
    /// price at the coupling bus
    pub lambda: f64,
}

fn market_block(s: &Scenario, t: usize, cap: f64, sell: bool, prefix: &str) -> (Block, Expr) {
    let tn = &s.tn;
    let tl = &s.timeline;
    let mut b = Block::new("market");
    let mut bal: Vec<Expr> = tn.buses.iter().map(|_| Expr::default()).collect();
    let pos = |k: usize| tn.buses.iter().position(|&m| m == k).unwrap();
    let mut cost = Expr::default();
    for g in &tn.generators {
        let p = b.continuous(format!("{prefix}pg.{}", g.id), g.p_min, g.p_max);
        bal[pos(g.bus)] = std::mem::take(&mut bal[pos(g.bus)]).add(&p, 1.0);
        cost = cost.add(&p, g.marginal_cost);
    }
    for wf in &tn.wind_farms {
        let p = b.continuous(format!("{prefix}pw.{}", wf.id), 0.0, wf.availability[t - 1]);
        bal[pos(wf.bus)] = std::mem::take(&mut bal[pos(wf.bus)]).add(&p, 1.0);
        cost = cost.add(&p, wf.marginal_cost);
    }
    for &k in &tn.buses {
        b.free(format!("{prefix}th.{k}"));
    }
    b.eq(format!("{prefix}ref"), Expr::var(format!("{prefix}th.{}", tn.reference_bus)), 0.0);
    for (i, l) in tn.lines.iter().enumerate() {
        let f = b.continuous(format!("{prefix}fl.{i}"), l.flow_min, l.flow_max);
        b.eq(
            format!("{prefix}fdef.{i}"),
            Expr::var(&f)
                .add(format!("{prefix}th.{}", l.from), -1.0 / l.reactance)
                .add(format!("{prefix}th.{}", l.to), 1.0 / l.reactance),
            0.0,
        );
        bal[pos(l.to)] = std::mem::take(&mut bal[pos(l.to)]).add(&f, 1.0);
        bal[pos(l.from)] = std::mem::take(&mut bal[pos(l.from)]).add(&f, -1.0);
    }
    let (buy_hi, sell_hi) = if sell { (0.0, cap) } else { (cap, 0.0) };
    let buy = b.continuous(hour(nm::BUY, t), 0.0, buy_hi);
    let sell = b.continuous(hour(nm::SELL, t), 0.0, sell_hi);
    let c = pos(tn.dn_coupling_bus);
    bal[c] = std::mem::take(&mut bal[c]).add(&buy, -1.0).add(&sell, 1.0);
    cost = cost.add(&buy, -tl.dso_bid_price[t - 1]).add(&sell, tl.dso_offer_price[t - 1]);
    for (k, e) in tn.buses.iter().zip(bal) {
        let load = tn.loads.get(k).map_or(0.0, |v| v[t - 1]);
        b.eq(format!("{prefix}bal.{k}"), e, load);
    }
    (b, cost)
}

/// Solves the market of hour `t` as an LP.
pub fn market_hour(s: &Scenario, t: usize, cap: f64, sell: bool) -> MarketHour {
    let (mut b, cost) = market_block(s, t, cap, sell, "m.");
    for (n, a) in &cost.terms {
        b.cost(n, *a);
    }
    let ir = assemble(&[b]).unwrap();
    let r = Relaxation::of(&ir).unwrap().solve(&IpmSettings::default()).unwrap();
    assert_eq!(r.status, RelaxStatus::Optimal, "market hour {t}");
    let row = ir.row_id(&format!("m.bal.{}", s.tn.dn_coupling_bus)).unwrap();
    MarketHour {
        cost: r.objective,
        lambda: r.row_duals[row],
    }
}

/// The market of hour `t` restricted to its optimal set (cost at most
/// `best + slack`), sharing the exchange variables with the feeder model.
pub fn market_optimal_set(s: &Scenario, t: usize, cap: f64, sell: bool, best: f64, slack: f64) -> Block {
    let (mut b, cost) = market_block(s, t, cap, sell, &format!("m{t}."));
    b.le(format!("m{t}.optimal"), cost, best + slack);
    b
}

pub fn exact(s: &Scenario) -> f64 {
    let w = reveal_forecast(s, 1, s.horizon());
    let m = build_window_model(&w, &InitialState::from_scenario(s)).unwrap();
    let opts = SolveOptions {
        gap: 1e-9,
        ..SolveOptions::default()
    };
    let r = bnb::solve(&m.ir, &opts).unwrap();
    assert!(r.has_solution());
    r.objective
}

/// Fix every binary, let the market clear on its own, and price the
/// feeder's purchases at the market's price: the bi-level problem by brute
/// force.
pub fn enumerate(s: &Scenario) -> f64 {
    let w = reveal_forecast(s, 1, s.horizon());
    let init = InitialState::from_scenario(s);
    let mut ul = build_ul_blocks(&w, &init).unwrap();
    // exchange terms of the objective are priced below from the market
    ul.remove(0);
    let hours: Vec<usize> = w.hours().collect();
    let mut best = f64::INFINITY;
    'dirs: for dirs in 0..(1u32 << hours.len()) {
        let mut blocks = ul.clone();
        let mut prices = Block::new("exchange prices");
        for (i, &t) in hours.iter().enumerate() {
            let sell = dirs >> i & 1 == 1;
            let cap = w.exchange_cap(t);
            if sell && cap == 0.0 {
                continue 'dirs;
            }
            let m = market_hour(s, t, cap, sell);
            blocks.push(market_optimal_set(s, t, cap, sell, m.cost, 1e-7));
            prices.cost(hour(nm::BUY, t), m.lambda);
            prices.cost(hour(nm::SELL, t), -w.sell_price(t));
        }
        blocks.push(prices);
        let ir = assemble(&blocks).unwrap();
        let bins: Vec<usize> = ir
            .binaries()
            .into_iter()
            .filter(|&j| ir.vars[j].lower != ir.vars[j].upper)
            .collect();
        let lo: Vec<f64> = ir.vars.iter().map(|v| v.lower).collect();
        let hi: Vec<f64> = ir.vars.iter().map(|v| v.upper).collect();
        for mask in 0..(1u64 << bins.len()) {
            let (mut l, mut h) = (lo.clone(), hi.clone());
            for (k, &j) in bins.iter().enumerate() {
                let v = (mask >> k & 1) as f64;
                l[j] = v;
                h[j] = v;
            }
            let r = Relaxation::new(&ir, &l, &h).unwrap().solve(&IpmSettings::default()).unwrap();
            if r.status == RelaxStatus::Optimal {
                best = best.min(r.objective);
            }
        }
    }
    best
}

/// Largest residual of `MOH_t(1+d) = MOH_{t−1} + QH_el − QH_dem + shed·kg/MWh − QH_fc`
/// over every hour and system, kg.
pub fn h2_residual(s: &Scenario, sol: &DispatchSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for h in &s.fleet.h2 {
        let mut prev = h.initial_mass;
        for rec in &sol.hours {
            let x = &rec.h2[&h.id];
            let dem = s.timeline.demand(&h.id, rec.hour);
            let rhs = prev + x.qh_el - dem + x.el_shed * h.kg_per_mwh() - x.qh_fc;
            worst = worst.max((x.mass * (1.0 + h.dissipation) - rhs).abs());
            // conversions
            worst = worst.max((x.qh_el - h.kg_per_mwh() * x.p_el).abs());
            worst = worst.max((x.p_fc - h.mwh_per_kg() * x.qh_fc).abs());
            prev = x.mass;
        }
    }
    worst
}

/// Largest residual of `soc_t = soc_{t−1} + η·ch − dis/η`, MWh.
pub fn battery_residual(s: &Scenario, sol: &DispatchSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for b in &s.fleet.batteries {
        let eta = b.round_trip_eff.sqrt();
        let mut prev = b.initial_soc;
        for rec in &sol.hours {
            let x = &rec.battery[&b.id];
            worst = worst.max((x.soc - (prev + eta * x.p_ch - x.p_dis / eta)).abs());
            prev = x.soc;
        }
    }
    worst
}

/// Largest `P_el·P_fc` and `P_ch·P_dis` over the schedule.
pub fn simultaneity(sol: &DispatchSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for rec in &sol.hours {
        for x in rec.h2.values() {
            worst = worst.max((x.p_el * x.p_fc).abs());
        }
        for x in rec.battery.values() {
            worst = worst.max((x.p_ch * x.p_dis).abs());
        }
    }
    worst
}

pub fn solved(s: &Scenario, start: usize, len: usize) -> (WindowSolve, DlmpSeries) {
    let w = reveal_forecast(s, start, len);
    let ws = solve_forecast_window(&w, &InitialState::from_scenario(s), &RollingOptions::default().solve, None, 1).unwrap();
    let d = compute_dlmp(s, &ws.model.ir, &ws.result, w.hours()).unwrap();
    (ws, d)
}

/// Central difference of the optimal cost (binaries held at the incumbent)
/// in the active load of `node` at hour `t`.
pub fn finite_difference(ws: &WindowSolve, node: usize, t: usize, eps: f64) -> f64 {
    let ir = &ws.model.ir;
    let fixed = binary_assignment(ir, &ws.result.primal);
    let row = ir.row_id(&at(nm::PBAL, node, t)).unwrap();
    let cost = |d: f64| {
        let mut m = ir.clone();
        m.rows[row].rhs += d;
        fix_binaries_and_resolve(&m, &fixed, &IpmSettings::default()).unwrap().objective
    };
    (cost(eps) - cost(-eps)) / (2.0 * eps)
}

/// Largest and smallest `a·V_from − |f|²` (per unit) over lines that carry
/// more than 1e-4 p.u.
pub fn cone_gaps(s: &Scenario, sol: &DispatchSolution) -> (f64, f64) {
    let sb = s.dn.mva_base;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for rec in &sol.hours {
        for l in &rec.lines {
            let (fp, fq) = (l.fp / sb, l.fq / sb);
            if fp.hypot(fq) <= 1e-4 {
                continue;
            }
            let v = rec.nodes.iter().find(|n| n.node == l.from).unwrap().v;
            let gap = l.a * v - (fp * fp + fq * fq);
            lo = lo.min(gap);
            hi = hi.max(gap);
        }
    }
    (lo, hi)
}
