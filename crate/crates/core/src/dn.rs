//! Upper-level (DSO) blocks: unit commitment of DGs, PV, hydrogen systems,
//! batteries, demand response and the tank reserve, and the branch-flow
//! model of the feeder with emergency load shedding.
//!
//! DN powers are in MW/MVAr; line impedances are per unit on the feeder's
//! MVA base, so the flow equations carry the base where they mix the two.
//! Each block adds its own cost terms; [`build_objective`] adds the
//! exchange terms.

use misocp::{Block, Expr};

use crate::error::ModelError;
use crate::model::{BatteryUnit, DgUnit, DistNetwork, Fleet, H2System, ModelOptions, PvUnit};
use crate::names::{self as nm, at, hour};
use crate::window::{ForecastWindow, InitialState};

const INF: f64 = f64::INFINITY;

/// Exchange terms of the DSO objective: the price paid for purchases in the
/// duality-based linear form `ρb·Exb − cap·ψ̲ + K̲` (equal to λ·Exb at any
/// lower-level optimum), minus sales revenue at the sell price β, or at the
/// LMP (`ρs·Exs + K̄`) when `sell_at_lmp` is set.
pub fn build_objective(w: &ForecastWindow, opts: &ModelOptions) -> Block {
    let mut b = Block::new("objective");
    for t in w.hours() {
        let cap = w.exchange_cap(t);
        b.cost(hour(nm::BUY, t), w.bid(t));
        b.cost(hour(nm::PSIB, t), -cap);
        b.cost(hour(nm::KB, t), 1.0);
        if opts.sell_at_lmp {
            b.cost(hour(nm::SELL, t), -w.offer(t));
            b.cost(hour(nm::KS, t), -1.0);
        } else {
            b.cost(hour(nm::SELL, t), -w.sell_price(t));
        }
    }
    b
}

pub fn build_dg_block(dg: &DgUnit, w: &ForecastWindow, init: &InitialState) -> Block {
    let mut b = Block::new(format!("dg {}", dg.id));
    let id = dg.id.as_str();
    let x0 = f64::from(u8::from(init.dg_on.get(id).copied().unwrap_or(dg.initial_status)));
    let p0 = init.dg_p.get(id).copied().unwrap_or(0.0);
    for t in w.hours() {
        let failed = w.failed(id, t);
        let x = if failed {
            b.fixed_binary(at(nm::DG_X, id, t), 0.0)
        } else {
            b.binary(at(nm::DG_X, id, t))
        };
        let (pmax, qlo, qhi) = if failed {
            (0.0, 0.0, 0.0)
        } else {
            (dg.p_max, dg.q_min.min(0.0), dg.q_max.max(0.0))
        };
        let p = b.continuous(at(nm::DG_P, id, t), 0.0, pmax);
        let q = b.continuous(at(nm::DG_Q, id, t), qlo, qhi);
        b.ge(at("dg.pmin", id, t), Expr::var(&p).add(&x, -dg.p_min), 0.0);
        b.le(at("dg.pmax", id, t), Expr::var(&p).add(&x, -dg.p_max), 0.0);
        b.ge(at("dg.qmin", id, t), Expr::var(&q).add(&x, -dg.q_min), 0.0);
        b.le(at("dg.qmax", id, t), Expr::var(&q).add(&x, -dg.q_max), 0.0);
        b.norm_cone(at("dg.cap", id, t), vec![Expr::var(&p), Expr::var(&q)], Expr::constant(dg.s_rating));

        let c = b.free(at(nm::DG_C, id, t));
        b.eq(
            at("dg.cost", id, t),
            Expr::var(&c).add(&x, -dg.fixed_cost).add(&p, -dg.marginal_cost),
            0.0,
        );
        b.cost(&c, 1.0);

        // previous status and output, constants at the window start
        let (xprev, pprev) = if t == w.start {
            (Expr::constant(x0), Expr::constant(p0))
        } else {
            (Expr::var(at(nm::DG_X, id, t - 1)), Expr::var(at(nm::DG_P, id, t - 1)))
        };
        let su = b.continuous(at(nm::DG_SU, id, t), 0.0, INF);
        let mut e = Expr::var(&su).add(&x, -dg.startup_cost);
        e.terms.extend(xprev.terms.iter().map(|(n, a)| (n.clone(), a * dg.startup_cost)));
        e.constant += xprev.constant * dg.startup_cost;
        b.ge(at("dg.sucost", id, t), e, 0.0);
        b.cost(&su, 1.0);
        let sd = b.continuous(at(nm::DG_SD, id, t), 0.0, INF);
        let mut e = Expr::var(&sd).add(&x, dg.shutdown_cost);
        e.terms.extend(xprev.terms.iter().map(|(n, a)| (n.clone(), -a * dg.shutdown_cost)));
        e.constant -= xprev.constant * dg.shutdown_cost;
        b.ge(at("dg.sdcost", id, t), e, 0.0);
        b.cost(&sd, 1.0);

        // a forced outage trips the unit, which is not a ramp
        if !failed {
            let mut up = Expr::var(&p);
            up.terms.extend(pprev.terms.iter().map(|(n, a)| (n.clone(), -a)));
            up.constant -= pprev.constant;
            b.le(at("dg.rampup", id, t), up.clone(), dg.ramp_up);
            let down = Expr {
                terms: up.terms.iter().map(|(n, a)| (n.clone(), -a)).collect(),
                constant: -up.constant,
            };
            b.le(at("dg.rampdown", id, t), down, dg.ramp_down);
        }
    }
    b
}

pub fn build_pv_block(pv: &PvUnit, index: usize, w: &ForecastWindow) -> Block {
    let mut b = Block::new(format!("pv {}", pv.id));
    let id = pv.id.as_str();
    for t in w.hours() {
        let avail = if w.failed(id, t) { 0.0 } else { w.pv_max(index, t) };
        let s = pv.inverter_rating;
        let p = b.continuous(at(nm::PV_P, id, t), 0.0, avail);
        let q = b.continuous(at(nm::PV_Q, id, t), -s, s);
        b.norm_cone(at("pv.inv", id, t), vec![Expr::var(&p), Expr::var(&q)], Expr::constant(s));
        b.cost(&p, pv.marginal_cost);
    }
    b
}

/// Electrolyzer, tank and fuel cell. `mode = 1` is electrolysis, `0` fuel
/// cell. The mass balance uses the implicit form
/// `MOH_t(1+d) = MOH_{t−1} + QH_el − QH_dem + shed·kg/MWh − QH_fc`, where the
/// shed term is FCEV demand left unserved (expressed in electrolyzer MW).
pub fn build_h2_block(h: &H2System, w: &ForecastWindow, init: &InitialState, opts: &ModelOptions) -> Block {
    let mut b = Block::new(format!("h2 {}", h.id));
    let id = h.id.as_str();
    let kpm = h.kg_per_mwh();
    let mpk = h.mwh_per_kg();
    let m0 = init.h2_mass.get(id).copied().unwrap_or(h.initial_mass);
    for t in w.hours() {
        let failed = w.failed(id, t);
        let mode = if failed {
            b.fixed_binary(at(nm::H2_MODE, id, t), 0.0)
        } else {
            b.binary(at(nm::H2_MODE, id, t))
        };
        let on = if failed { 0.0 } else { 1.0 };
        let pel = b.continuous(at(nm::H2_PEL, id, t), 0.0, on * h.el_p_max);
        let pfc = b.continuous(at(nm::H2_PFC, id, t), 0.0, on * h.fc_p_max);
        let qel = b.continuous(at(nm::H2_QEL, id, t), 0.0, on * h.el_kg_max);
        let qfc = b.continuous(at(nm::H2_QFC, id, t), 0.0, on * h.fc_kg_max);
        b.le(at("h2.elmode", id, t), Expr::var(&pel).add(&mode, -h.el_p_max), 0.0);
        b.le(at("h2.fcmode", id, t), Expr::var(&pfc).add(&mode, h.fc_p_max), h.fc_p_max);
        b.ge(at("h2.elmin", id, t), Expr::var(&qel).add(&mode, -h.el_kg_min), 0.0);
        b.le(at("h2.elmax", id, t), Expr::var(&qel).add(&mode, -h.el_kg_max), 0.0);
        b.ge(at("h2.fcmin", id, t), Expr::var(&qfc).add(&mode, h.fc_kg_min), h.fc_kg_min);
        b.le(at("h2.fcmax", id, t), Expr::var(&qfc).add(&mode, h.fc_kg_max), h.fc_kg_max);
        b.eq(at("h2.elconv", id, t), Expr::var(&qel).add(&pel, -kpm), 0.0);
        b.eq(at("h2.fcconv", id, t), Expr::var(&pfc).add(&qfc, -mpk), 0.0);

        let dem = w.demand(id, t);
        let moh = b.continuous(at(nm::H2_MOH, id, t), h.tank_min, h.tank_max);
        let shd = b.continuous(at(nm::H2_SHD, id, t), 0.0, dem / kpm);
        let penalty = if w.emergency(t) {
            opts.fcev_shed_penalty
        } else {
            opts.fcev_normal_shed_penalty
        };
        b.cost(&shd, penalty * kpm);
        let mut e = Expr::scaled(&moh, 1.0 + h.dissipation).add(&qel, -1.0).add(&qfc, 1.0).add(&shd, -kpm);
        let rhs = if t == w.start {
            m0 - dem
        } else {
            e = e.add(at(nm::H2_MOH, id, t - 1), -1.0);
            -dem
        };
        b.eq(at(nm::H2_MASS, id, t), e, rhs);

        let s = h.inverter_rating;
        let qhs = b.continuous(at(nm::H2_QHS, id, t), -s, s);
        b.norm_cone(
            at("h2.inv", id, t),
            vec![Expr::var(&pel).add(&pfc, -1.0), Expr::var(&qhs)],
            Expr::constant(s),
        );
    }
    b
}

/// Battery with one charge/discharge binary per hour (`mode = 1` charging)
/// and the round-trip efficiency split evenly between the two directions.
pub fn build_battery_block(bat: &BatteryUnit, w: &ForecastWindow, init: &InitialState) -> Block {
    let mut b = Block::new(format!("battery {}", bat.id));
    let id = bat.id.as_str();
    let eta = bat.leg_eff();
    let cap = bat.capacity();
    let soc0 = init.battery_soc.get(id).copied().unwrap_or(bat.initial_soc);
    for t in w.hours() {
        let failed = w.failed(id, t);
        let mode = if failed {
            b.fixed_binary(at(nm::BAT_MODE, id, t), 0.0)
        } else {
            b.binary(at(nm::BAT_MODE, id, t))
        };
        let pr = if failed { 0.0 } else { bat.p_rating };
        let ch = b.continuous(at(nm::BAT_CH, id, t), 0.0, pr);
        let dis = b.continuous(at(nm::BAT_DIS, id, t), 0.0, pr);
        b.le(at("bat.chmode", id, t), Expr::var(&ch).add(&mode, -bat.p_rating), 0.0);
        b.le(at("bat.dismode", id, t), Expr::var(&dis).add(&mode, bat.p_rating), bat.p_rating);
        let soc = b.continuous(at(nm::BAT_SOC, id, t), 0.0, cap);
        let mut e = Expr::var(&soc).add(&ch, -eta).add(&dis, 1.0 / eta);
        let rhs = if t == w.start {
            soc0
        } else {
            e = e.add(at(nm::BAT_SOC, id, t - 1), -1.0);
            0.0
        };
        b.eq(at(nm::BAT_BAL, id, t), e, rhs);
        let s = bat.inverter_rating;
        let q = b.continuous(at(nm::BAT_Q, id, t), -s, s);
        b.norm_cone(
            at("bat.inv", id, t),
            vec![Expr::var(&ch).add(&dis, -1.0), Expr::var(&q)],
            Expr::constant(s),
        );
    }
    b
}

/// Highest mass each tank can hold at every hour from `anchor` on, running
/// the electrolyzer flat out and serving demand from the tank.
fn h2_reach(h: &H2System, w: &ForecastWindow, init: &InitialState, anchor: usize, until: usize) -> f64 {
    let mut m = if anchor == w.start {
        init.h2_mass.get(&h.id).copied().unwrap_or(h.initial_mass)
    } else {
        h.tank_min
    };
    for t in anchor..=until {
        let made = if w.failed(&h.id, t) { 0.0 } else { h.el_kg_max };
        m = ((m + made - w.demand(&h.id, t)) / (1.0 + h.dissipation)).clamp(h.tank_min, h.tank_max);
    }
    m
}

fn battery_reach(bat: &BatteryUnit, w: &ForecastWindow, init: &InitialState, anchor: usize, until: usize) -> f64 {
    let mut soc = if anchor == w.start {
        init.battery_soc.get(&bat.id).copied().unwrap_or(bat.initial_soc)
    } else {
        0.0
    };
    for t in anchor..=until {
        let made = if w.failed(&bat.id, t) { 0.0 } else { bat.leg_eff() * bat.p_rating };
        soc = (soc + made).min(bat.capacity());
    }
    soc
}

/// Fleet-level demand-response rows and the pre-event storage reserve.
///
/// A positive signal asks the electrolyzers for at least that much load, a
/// negative one asks the fuel cells for that much output; a signal beyond
/// the fleet's rating is rejected. The reserve holds total stored mass at
/// `min(κ_t·Σ tank_max, reachable mass)` so that a late-announced event does
/// not make the window infeasible.
pub fn build_cbdr_block(
    fleet: &Fleet,
    w: &ForecastWindow,
    init: &InitialState,
    opts: &ModelOptions,
) -> Result<Block, ModelError> {
    let mut b = Block::new("cbdr");
    for t in w.hours() {
        let sig = w.cbdr(t);
        if !opts.ignore_cbdr && sig != 0.0 && !fleet.h2.is_empty() {
            if sig > 0.0 {
                let cap: f64 = fleet.h2.iter().map(|h| h.el_p_max).sum();
                if sig > cap + 1e-9 {
                    return Err(ModelError::InfeasibleSignal {
                        hour: t,
                        detail: format!("electrolyzer signal {sig} MW exceeds fleet rating {cap} MW"),
                    });
                }
                let e = Expr::from_terms(fleet.h2.iter().map(|h| (at(nm::H2_PEL, &h.id, t), 1.0)));
                b.ge(hour(nm::CBDR_EL, t), e, sig);
            } else {
                let cap: f64 = fleet.h2.iter().map(|h| h.fc_p_max).sum();
                if -sig > cap + 1e-9 {
                    return Err(ModelError::InfeasibleSignal {
                        hour: t,
                        detail: format!("fuel-cell signal {} MW exceeds fleet rating {cap} MW", -sig),
                    });
                }
                let e = Expr::from_terms(fleet.h2.iter().map(|h| (at(nm::H2_PFC, &h.id, t), 1.0)));
                b.ge(hour(nm::CBDR_FC, t), e, -sig);
            }
        }
        let Some(r) = w.reserve(t) else { continue };
        if !fleet.h2.is_empty() {
            let full: f64 = fleet.h2.iter().map(|h| h.tank_max).sum();
            let floor: f64 = fleet.h2.iter().map(|h| h.tank_min).sum();
            let reach: f64 = fleet.h2.iter().map(|h| h2_reach(h, w, init, r.anchor, t)).sum();
            let need = (r.kappa * full).min(reach);
            if need > floor + 1e-9 {
                let e = Expr::from_terms(fleet.h2.iter().map(|h| (at(nm::H2_MOH, &h.id, t), 1.0)));
                b.ge(hour(nm::H2_RESERVE, t), e, need);
            }
        }
        if !fleet.batteries.is_empty() {
            let full: f64 = fleet.batteries.iter().map(|x| x.capacity()).sum();
            let reach: f64 = fleet.batteries.iter().map(|x| battery_reach(x, w, init, r.anchor, t)).sum();
            let need = (r.kappa * full).min(reach);
            if need > 1e-9 {
                let e = Expr::from_terms(fleet.batteries.iter().map(|x| (at(nm::BAT_SOC, &x.id, t), 1.0)));
                b.ge(hour(nm::BAT_RESERVE, t), e, need);
            }
        }
    }
    Ok(b)
}

fn check_radial(dn: &DistNetwork) -> Result<(), ModelError> {
    for &n in &dn.nodes {
        if n == dn.root_node {
            continue;
        }
        let path = dn.path_to(n);
        if path.is_empty() || dn.lines[path[0]].from != dn.root_node {
            return Err(ModelError::Disconnected(n));
        }
    }
    Ok(())
}

/// Branch-flow model of the feeder with the conic relaxation
/// `fp² + fq² ≤ a·V_from`, sending- and receiving-end line limits, nodal
/// balances (whose duals are the DLMPs) and, in emergency hours only,
/// per-node load shedding priced at the tier's VOLL.
pub fn build_powerflow_block(
    dn: &DistNetwork,
    fleet: &Fleet,
    w: &ForecastWindow,
    opts: &ModelOptions,
) -> Result<Block, ModelError> {
    check_radial(dn)?;
    let tl = &w.scenario.timeline;
    let sb = dn.mva_base;
    let mut b = Block::new("powerflow");
    let (v_lo, v_hi) = (dn.v_min * dn.v_min, dn.v_max * dn.v_max);
    for t in w.hours() {
        let live = w.tie_live(t);
        let emergency = w.emergency(t);
        for &n in &dn.nodes {
            let (lo, hi) = if n == dn.root_node && live { (1.0, 1.0) } else { (v_lo, v_hi) };
            b.continuous(at(nm::V, n, t), lo, hi);
        }
        let cap = w.exchange_cap(t);
        b.continuous(hour(nm::EXQ, t), -cap, cap);

        let mut pbal: Vec<Expr> = dn.nodes.iter().map(|_| Expr::default()).collect();
        let mut qbal: Vec<Expr> = dn.nodes.iter().map(|_| Expr::default()).collect();
        let pos = |n: usize| dn.nodes.iter().position(|&m| m == n).expect("node in network");

        for l in &dn.lines {
            let key = nm::line_key(l.from, l.to);
            let smax = l.mva_limit * sb;
            let fp = b.continuous(at(nm::FP, &key, t), -smax, smax);
            let fq = b.continuous(at(nm::FQ, &key, t), -smax, smax);
            let amax = (l.mva_limit / dn.v_min).powi(2);
            let a = b.continuous(at(nm::A, &key, t), 0.0, amax);
            let (r, x) = (l.resistance, l.reactance);
            b.eq(
                at(nm::VDROP, &key, t),
                Expr::var(at(nm::V, l.to, t))
                    .add(at(nm::V, l.from, t), -1.0)
                    .add(&fp, 2.0 * r / sb)
                    .add(&fq, 2.0 * x / sb)
                    .add(&a, -(r * r + x * x)),
                0.0,
            );
            b.norm_cone(at(nm::SEND_CONE, &key, t), vec![Expr::var(&fp), Expr::var(&fq)], Expr::constant(smax));
            b.norm_cone(
                at(nm::RECV_CONE, &key, t),
                vec![Expr::var(&fp).add(&a, -r * sb), Expr::var(&fq).add(&a, -x * sb)],
                Expr::constant(smax),
            );
            b.rotated_cone(
                at(nm::SOC_CONE, &key, t),
                vec![Expr::scaled(&fp, 1.0 / sb), Expr::scaled(&fq, 1.0 / sb)],
                Expr::var(&a),
                Expr::var(at(nm::V, l.from, t)),
            );
            b.cost(&a, opts.loss_penalty * r * sb);

            let (i, j) = (pos(l.from), pos(l.to));
            pbal[j] = std::mem::take(&mut pbal[j]).add(&fp, 1.0).add(&a, -r * sb);
            qbal[j] = std::mem::take(&mut qbal[j]).add(&fq, 1.0).add(&a, -x * sb);
            pbal[i] = std::mem::take(&mut pbal[i]).add(&fp, -1.0);
            qbal[i] = std::mem::take(&mut qbal[i]).add(&fq, -1.0);
        }

        for d in &fleet.dgs {
            let k = pos(d.node);
            pbal[k] = std::mem::take(&mut pbal[k]).add(at(nm::DG_P, &d.id, t), 1.0);
            qbal[k] = std::mem::take(&mut qbal[k]).add(at(nm::DG_Q, &d.id, t), 1.0);
        }
        for pv in &fleet.pvs {
            let k = pos(pv.node);
            pbal[k] = std::mem::take(&mut pbal[k]).add(at(nm::PV_P, &pv.id, t), 1.0);
            qbal[k] = std::mem::take(&mut qbal[k]).add(at(nm::PV_Q, &pv.id, t), 1.0);
        }
        for h in &fleet.h2 {
            let k = pos(h.node);
            pbal[k] = std::mem::take(&mut pbal[k])
                .add(at(nm::H2_PFC, &h.id, t), 1.0)
                .add(at(nm::H2_PEL, &h.id, t), -1.0);
            qbal[k] = std::mem::take(&mut qbal[k]).add(at(nm::H2_QHS, &h.id, t), 1.0);
        }
        for x in &fleet.batteries {
            let k = pos(x.node);
            pbal[k] = std::mem::take(&mut pbal[k])
                .add(at(nm::BAT_DIS, &x.id, t), 1.0)
                .add(at(nm::BAT_CH, &x.id, t), -1.0);
            qbal[k] = std::mem::take(&mut qbal[k]).add(at(nm::BAT_Q, &x.id, t), 1.0);
        }
        let root = pos(dn.root_node);
        pbal[root] = std::mem::take(&mut pbal[root])
            .add(hour(nm::BUY, t), 1.0)
            .add(hour(nm::SELL, t), -1.0);
        qbal[root] = std::mem::take(&mut qbal[root]).add(hour(nm::EXQ, t), 1.0);

        if emergency {
            for load in &tl.dn_load {
                let (p, q) = (load.p[t - 1], load.q[t - 1]);
                if p <= 0.0 {
                    continue;
                }
                let n = load.node;
                let shp = b.continuous(at(nm::SHED_P, n, t), 0.0, p);
                let (qlo, qhi) = if q >= 0.0 { (0.0, q) } else { (q, 0.0) };
                let shq = b.continuous(at(nm::SHED_Q, n, t), qlo, qhi);
                b.eq(at(nm::SHED_RATIO, n, t), Expr::var(&shq).add(&shp, -q / p), 0.0);
                b.cost(&shp, tl.voll.of(load.tier));
                let k = pos(n);
                pbal[k] = std::mem::take(&mut pbal[k]).add(&shp, 1.0);
                qbal[k] = std::mem::take(&mut qbal[k]).add(&shq, 1.0);
            }
        }

        for (k, &n) in dn.nodes.iter().enumerate() {
            b.eq(at(nm::PBAL, n, t), std::mem::take(&mut pbal[k]), w.load_p(n, t));
            b.eq(at(nm::QBAL, n, t), std::mem::take(&mut qbal[k]), w.load_q(n, t));
        }
    }
    Ok(b)
}

/// All upper-level blocks of a window, in a fixed order.
pub fn build_ul_blocks(w: &ForecastWindow, init: &InitialState) -> Result<Vec<Block>, ModelError> {
    let s = w.scenario;
    let opts = &s.options;
    let mut out = vec![build_objective(w, opts)];
    out.extend(s.fleet.dgs.iter().map(|d| build_dg_block(d, w, init)));
    out.extend(s.fleet.pvs.iter().enumerate().map(|(i, p)| build_pv_block(p, i, w)));
    out.extend(s.fleet.h2.iter().map(|h| build_h2_block(h, w, init, opts)));
    out.extend(s.fleet.batteries.iter().map(|x| build_battery_block(x, w, init)));
    out.push(build_cbdr_block(&s.fleet, w, init, opts)?);
    out.push(build_powerflow_block(&s.dn, &s.fleet, w, opts)?);
    Ok(out)
}
