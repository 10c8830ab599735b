//! Scenario invariants, reported rather than raised.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{DistNetwork, Fleet, ScenarioTimeline, TransNetwork};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn add(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }
}

fn check_len(r: &mut ValidationReport, what: &str, len: usize, horizon: usize) {
    if len != horizon {
        r.add(format!("series {what} has {len} hours, expected {horizon}"));
    }
}

fn check_feeder(r: &mut ValidationReport, dn: &DistNetwork) {
    let nodes: BTreeSet<usize> = dn.nodes.iter().copied().collect();
    if nodes.len() != dn.nodes.len() {
        r.add("duplicate feeder node ids");
    }
    if !nodes.contains(&dn.root_node) {
        r.add(format!("root node {} not in the feeder", dn.root_node));
    }
    let mut radial = dn.lines.len() + 1 == dn.nodes.len();
    let mut parents: BTreeMap<usize, usize> = BTreeMap::new();
    for l in &dn.lines {
        if !nodes.contains(&l.from) || !nodes.contains(&l.to) {
            r.add(format!("feeder line {}-{} references an unknown node", l.from, l.to));
            radial = false;
        }
        if l.to == dn.root_node || parents.insert(l.to, l.from).is_some() {
            radial = false;
        }
        if l.resistance < 0.0 || l.reactance < 0.0 {
            r.add(format!("feeder line {}-{} has negative impedance", l.from, l.to));
        }
        if l.mva_limit <= 0.0 {
            r.add(format!("feeder line {}-{} has a nonpositive MVA limit", l.from, l.to));
        }
    }
    if radial {
        // every node must reach the root by walking up its parents
        for &n in &nodes {
            let mut cur = n;
            let mut steps = 0;
            while cur != dn.root_node {
                match parents.get(&cur) {
                    Some(&p) if steps <= dn.lines.len() => {
                        cur = p;
                        steps += 1;
                    }
                    _ => {
                        radial = false;
                        break;
                    }
                }
            }
        }
    }
    if !radial {
        r.add("topology not radial");
    }
    if !(dn.v_min < dn.v_max) || dn.v_min <= 0.0 {
        r.add("voltage bounds must satisfy 0 < v_min < v_max");
    }
    if dn.exchange_limit < 0.0 {
        r.add("negative exchange limit");
    }
    if dn.mva_base <= 0.0 {
        r.add("nonpositive MVA base");
    }
}

fn check_grid(r: &mut ValidationReport, tn: &TransNetwork, horizon: usize) {
    let buses: BTreeSet<usize> = tn.buses.iter().copied().collect();
    for (what, b) in [("coupling", tn.dn_coupling_bus), ("reference", tn.reference_bus)] {
        if !buses.contains(&b) {
            r.add(format!("{what} bus {b} not in the transmission network"));
        }
    }
    for l in &tn.lines {
        if !buses.contains(&l.from) || !buses.contains(&l.to) {
            r.add(format!("transmission line {}-{} references an unknown bus", l.from, l.to));
        }
        if l.reactance == 0.0 {
            r.add(format!("transmission line {}-{} has zero reactance", l.from, l.to));
        }
        if !(l.flow_min <= 0.0 && 0.0 <= l.flow_max) {
            r.add(format!("transmission line {}-{} needs flow_min <= 0 <= flow_max", l.from, l.to));
        }
    }
    for g in &tn.generators {
        if g.p_min > g.p_max {
            r.add(format!("generator {} has p_min > p_max", g.id));
        }
        if !buses.contains(&g.bus) {
            r.add(format!("generator {} at unknown bus {}", g.id, g.bus));
        }
    }
    for w in &tn.wind_farms {
        check_len(r, &format!("wind {}", w.id), w.availability.len(), horizon);
        if w.availability.iter().any(|&v| v < 0.0) {
            r.add(format!("wind farm {} has negative availability", w.id));
        }
        if !buses.contains(&w.bus) {
            r.add(format!("wind farm {} at unknown bus {}", w.id, w.bus));
        }
    }
    for (b, v) in &tn.loads {
        if !buses.contains(b) {
            r.add(format!("load at unknown bus {b}"));
        }
        check_len(r, &format!("tn load bus {b}"), v.len(), horizon);
    }
}

fn check_fleet(r: &mut ValidationReport, fleet: &Fleet, dn: &DistNetwork, horizon: usize) {
    let nodes: BTreeSet<usize> = dn.nodes.iter().copied().collect();
    let mut ids = BTreeSet::new();
    for id in fleet.asset_ids() {
        if !ids.insert(id) {
            r.add(format!("duplicate asset id {id}"));
        }
    }
    let mut at_node = |id: &str, n: usize| {
        if !nodes.contains(&n) {
            r.add(format!("asset {id} at unknown node {n}"));
        }
    };
    for d in &fleet.dgs {
        at_node(&d.id, d.node);
    }
    for p in &fleet.pvs {
        at_node(&p.id, p.node);
    }
    for h in &fleet.h2 {
        at_node(&h.id, h.node);
    }
    for b in &fleet.batteries {
        at_node(&b.id, b.node);
    }
    for d in &fleet.dgs {
        if !(0.0 <= d.p_min && d.p_min <= d.p_max) {
            r.add(format!("DG {} needs 0 <= p_min <= p_max", d.id));
        }
        if d.ramp_up <= 0.0 || d.ramp_down <= 0.0 {
            r.add(format!("DG {} ramp limits must be positive", d.id));
        }
        if d.s_rating < d.p_max {
            r.add(format!("DG {} rating below p_max", d.id));
        }
        if d.q_min > d.q_max {
            r.add(format!("DG {} has q_min > q_max", d.id));
        }
    }
    for p in &fleet.pvs {
        check_len(r, &format!("pv {}", p.id), p.p_max_profile.len(), horizon);
        if p.p_max_profile.iter().any(|&v| v < 0.0) {
            r.add(format!("PV {} has a negative profile value", p.id));
        }
        let peak = p.p_max_profile.iter().cloned().fold(0.0, f64::max);
        if p.inverter_rating < peak {
            r.add(format!("PV {} inverter below peak output", p.id));
        }
    }
    for h in &fleet.h2 {
        if !(h.tank_min <= h.initial_mass && h.initial_mass <= h.tank_max) {
            r.add(format!("H2 {} initial mass outside tank bounds", h.id));
        }
        for (what, e) in [("el_eff", h.el_eff), ("fc_eff", h.fc_eff)] {
            if !(e > 0.0 && e <= 1.0) {
                r.add(format!("H2 {} {what} outside (0,1]", h.id));
            }
        }
        if (h.el_kg_max - h.el_conv * h.el_eff * h.el_p_max).abs() > 1e-9 * (1.0 + h.el_kg_max) {
            r.add(format!("H2 {} el_kg_max inconsistent with el_conv·el_eff·el_p_max", h.id));
        }
        if (h.fc_kg_max * h.fc_conv * h.fc_eff - h.fc_p_max).abs() > 1e-9 * (1.0 + h.fc_p_max) {
            r.add(format!("H2 {} fc_kg_max inconsistent with fc_p_max", h.id));
        }
        if h.el_kg_min > h.el_kg_max || h.fc_kg_min > h.fc_kg_max {
            r.add(format!("H2 {} has a minimum rate above its maximum", h.id));
        }
        if h.dissipation < 0.0 {
            r.add(format!("H2 {} has negative dissipation", h.id));
        }
    }
    for b in &fleet.batteries {
        if !(0.0 <= b.initial_soc && b.initial_soc <= b.capacity()) {
            r.add(format!("battery {} initial SOC outside [0, capacity]", b.id));
        }
        if !(b.round_trip_eff > 0.0 && b.round_trip_eff <= 1.0) {
            r.add(format!("battery {} efficiency outside (0,1]", b.id));
        }
        if b.p_rating < 0.0 || b.duration < 0.0 {
            r.add(format!("battery {} has a negative rating or duration", b.id));
        }
    }
}

fn check_timeline(r: &mut ValidationReport, tl: &ScenarioTimeline, dn: &DistNetwork, fleet: &Fleet) {
    let h = tl.horizon_hours;
    let mut seen = BTreeSet::new();
    for l in &tl.dn_load {
        if !seen.insert(l.node) {
            r.add(format!("node {} has more than one load entry", l.node));
        }
        if !dn.nodes.contains(&l.node) {
            r.add(format!("load at unknown node {}", l.node));
        }
        check_len(r, &format!("load p node {}", l.node), l.p.len(), h);
        check_len(r, &format!("load q node {}", l.node), l.q.len(), h);
        if l.p.iter().any(|&v| v < 0.0) {
            r.add(format!("negative active load at node {}", l.node));
        }
    }
    for (what, s) in [
        ("cbdr", &tl.cbdr),
        ("kappa", &tl.kappa),
        ("dso_bid_price", &tl.dso_bid_price),
        ("dso_offer_price", &tl.dso_offer_price),
        ("dn_sell_price", &tl.dn_sell_price),
    ] {
        check_len(r, what, s.len(), h);
    }
    if tl.kappa.iter().any(|&k| !(0.0..=1.0).contains(&k)) {
        r.add("kappa out of [0,1]");
    }
    for (id, d) in &tl.fcev_demand {
        check_len(r, &format!("fcev demand {id}"), d.len(), h);
        if d.iter().any(|&v| v < 0.0) {
            r.add(format!("negative FCEV demand for {id}"));
        }
        if !fleet.h2.iter().any(|x| &x.id == id) {
            r.add(format!("FCEV demand for unknown H2 system {id}"));
        }
    }
    let v = tl.voll;
    if !(v.critical > 0.0 && v.moderately_critical > 0.0 && v.non_critical > 0.0) {
        r.add("VOLL must be positive");
    }
    let ids: BTreeSet<&str> = fleet.asset_ids().into_iter().collect();
    for e in &tl.outage_events {
        if !(1 <= e.start_hour && e.start_hour <= e.end_hour && e.end_hour <= h) {
            r.add(format!("outage {}-{} outside the horizon", e.start_hour, e.end_hour));
        }
        for a in &e.failed_assets {
            if !ids.contains(a.as_str()) {
                r.add(format!("outage names unknown asset {a}"));
            }
        }
    }
}

/// Lists every violated invariant; an empty report means the scenario is
/// usable.
pub fn validate_scenario(dn: &DistNetwork, tn: &TransNetwork, fleet: &Fleet, tl: &ScenarioTimeline) -> ValidationReport {
    let mut r = ValidationReport::default();
    check_feeder(&mut r, dn);
    check_grid(&mut r, tn, tl.horizon_hours);
    check_fleet(&mut r, fleet, dn, tl.horizon_hours);
    check_timeline(&mut r, tl, dn, fleet);
    r
}
