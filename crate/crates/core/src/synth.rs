//! Bundled scenarios. `case33_24` couples the 33-node Baran–Wu feeder to
//! the 24-bus RTS grid with synthetic weekly profiles; the profiles are
//! shaped after typical load/solar/wind days and are not measured data.
//! `tutorial` is a 3-node feeder on a 2-bus grid over 2 hours, small enough
//! to enumerate.

use std::collections::BTreeMap;

use crate::model::*;
use crate::tn;

const HOURS: usize = 168;

/// Feeder lines: from, to, R (Ω), X (Ω).
const FEEDER: [(usize, usize, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470),
    (2, 3, 0.4930, 0.2511),
    (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070),
    (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351),
    (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650),
    (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260),
    (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083),
    (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447),
    (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
];

/// Peak nodal demand, kW and kVAr, nodes 2..=33.
const FEEDER_LOAD: [(f64, f64); 32] = [
    (100.0, 60.0),
    (90.0, 40.0),
    (120.0, 80.0),
    (60.0, 30.0),
    (60.0, 20.0),
    (200.0, 100.0),
    (200.0, 100.0),
    (60.0, 20.0),
    (60.0, 20.0),
    (45.0, 30.0),
    (60.0, 35.0),
    (60.0, 35.0),
    (120.0, 80.0),
    (60.0, 10.0),
    (60.0, 20.0),
    (60.0, 20.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 40.0),
    (90.0, 50.0),
    (420.0, 200.0),
    (420.0, 200.0),
    (60.0, 25.0),
    (60.0, 25.0),
    (60.0, 20.0),
    (120.0, 70.0),
    (200.0, 600.0),
    (150.0, 70.0),
    (210.0, 100.0),
    (60.0, 40.0),
];

const CRITICAL: [usize; 4] = [7, 8, 24, 25];
const MODERATE: [usize; 3] = [30, 32, 33];

/// RTS-24 branches: from, to, X (p.u. on 100 MVA), rating (MW).
const GRID: [(usize, usize, f64, f64); 38] = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.1920, 175.0),
    (3, 9, 0.1190, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
];

/// RTS-24 peak bus loads, MW.
const GRID_LOAD: [(usize, f64); 17] = [
    (1, 108.0),
    (2, 97.0),
    (3, 180.0),
    (4, 74.0),
    (5, 71.0),
    (6, 136.0),
    (7, 125.0),
    (8, 171.0),
    (9, 175.0),
    (10, 195.0),
    (13, 265.0),
    (14, 194.0),
    (15, 317.0),
    (16, 100.0),
    (18, 333.0),
    (19, 181.0),
    (20, 128.0),
];

/// Aggregated plants per bus: bus, capacity (MW), marginal cost ($/MWh).
const PLANTS: [(usize, f64, f64); 10] = [
    (18, 400.0, 20.0),
    (21, 400.0, 21.0),
    (22, 300.0, 22.0),
    (23, 660.0, 27.0),
    (13, 591.0, 31.0),
    (15, 215.0, 35.0),
    (16, 155.0, 38.0),
    (7, 300.0, 45.0),
    (1, 192.0, 52.0),
    (2, 192.0, 60.0),
];

const WIND_BUSES: [usize; 6] = [3, 5, 7, 16, 21, 23];

/// Hourly share of daily peak (RTS daily curve).
const DAY_SHAPE: [f64; 24] = [
    0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95, 0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00,
    0.96, 0.91, 0.83, 0.73, 0.63,
];

/// Daily scaling over the week (weekend lighter) and solar clearness.
const WEEK_LOAD: [f64; 7] = [0.93, 0.96, 1.0, 0.98, 0.95, 0.84, 0.80];
const WEEK_SUN: [f64; 7] = [1.0, 0.8, 0.95, 0.7, 0.9, 1.0, 0.85];

/// FCEV refuelling share of the day's demand per hour.
const FCEV_SHAPE: [f64; 24] = [
    0.01, 0.01, 0.01, 0.01, 0.01, 0.02, 0.04, 0.07, 0.07, 0.05, 0.05, 0.05, 0.06, 0.05, 0.05, 0.05, 0.07, 0.08, 0.07,
    0.05, 0.04, 0.03, 0.02, 0.02,
];

fn day_hour(t: usize) -> (usize, usize) {
    ((t - 1) / 24, (t - 1) % 24)
}

fn load_factor(t: usize) -> f64 {
    let (d, h) = day_hour(t);
    DAY_SHAPE[h] * WEEK_LOAD[d % 7]
}

fn solar(t: usize) -> f64 {
    let (d, h) = day_hour(t);
    // daylight from 06:00 to 19:00, peak at 12:30
    let x = (h as f64 + 0.5 - 6.0) / 13.0;
    if (0.0..=1.0).contains(&x) {
        (std::f64::consts::PI * x).sin().powf(1.5) * WEEK_SUN[d % 7]
    } else {
        0.0
    }
}

fn wind(t: usize, farm: usize) -> f64 {
    // a calm-to-breezy background with two windy spells
    let base = 40.0 + 25.0 * ((t as f64 / 9.0 + farm as f64).sin() + 1.0);
    if (49..=53).contains(&t) || (145..=150).contains(&t) {
        450.0
    } else {
        base
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn case33_24_feeder() -> DistNetwork {
    let zbase = 12.66f64.powi(2) / 1.0;
    DistNetwork {
        nodes: (1..=33).collect(),
        lines: FEEDER
            .iter()
            .map(|&(f, t, r, x)| DnLine {
                from: f,
                to: t,
                resistance: round6(r / zbase),
                reactance: round6(x / zbase),
                mva_limit: if [1, 2, 3, 4, 5].contains(&f) && t == f + 1 { 6.0 } else { 3.0 },
            })
            .collect(),
        root_node: 1,
        root_tn_bus: 2,
        v_min: 0.9,
        v_max: 1.05,
        exchange_limit: 6.0,
        mva_base: 1.0,
    }
}

pub fn case33_24_grid() -> TransNetwork {
    TransNetwork {
        buses: (1..=24).collect(),
        lines: GRID
            .iter()
            .map(|&(f, t, x, cap)| TnLine {
                from: f,
                to: t,
                reactance: x,
                flow_min: -cap,
                flow_max: cap,
            })
            .collect(),
        generators: PLANTS
            .iter()
            .map(|&(bus, cap, cost)| Generator {
                id: format!("G{bus}"),
                bus,
                p_min: 0.0,
                p_max: cap,
                marginal_cost: cost,
            })
            .collect(),
        wind_farms: WIND_BUSES
            .iter()
            .enumerate()
            .map(|(k, &bus)| WindFarm {
                id: format!("W{bus}"),
                bus,
                marginal_cost: 23.5,
                availability: (1..=HOURS).map(|t| round6(wind(t, k))).collect(),
            })
            .collect(),
        loads: GRID_LOAD
            .iter()
            .map(|&(bus, peak)| (bus, (1..=HOURS).map(|t| round6(0.7 * peak * load_factor(t))).collect()))
            .collect(),
        dn_coupling_bus: 2,
        reference_bus: 1,
    }
}

pub fn case33_24_fleet() -> Fleet {
    let dg = |id: &str, node: usize, cost: f64| DgUnit {
        id: id.into(),
        node,
        p_min: 0.2,
        p_max: 1.0,
        q_min: -0.6,
        q_max: 0.6,
        s_rating: 1.2,
        fixed_cost: 0.0,
        marginal_cost: cost,
        startup_cost: 30.0,
        shutdown_cost: 10.0,
        ramp_up: 0.5,
        ramp_down: 0.5,
        initial_status: false,
        initial_p: 0.0,
    };
    let pv_nodes = [10, 14, 18, 22, 25, 31];
    Fleet {
        dgs: vec![dg("DG1", 13, 36.0), dg("DG2", 24, 40.0), dg("DG3", 30, 45.0)],
        pvs: pv_nodes
            .iter()
            .enumerate()
            .map(|(k, &node)| PvUnit {
                id: format!("PV{}", k + 1),
                node,
                inverter_rating: 0.7,
                marginal_cost: 5.0,
                p_max_profile: (1..=HOURS).map(|t| round6(0.6 * solar(t))).collect(),
            })
            .collect(),
        h2: [("HS1", 6), ("HS2", 16), ("HS3", 29)]
            .iter()
            .map(|&(id, node)| H2System::with_defaults(id, node))
            .collect(),
        batteries: Vec::new(),
    }
}

pub fn case33_24_timeline(grid: &TransNetwork) -> ScenarioTimeline {
    let dn_load = (2..=33)
        .map(|node| {
            let (p, q) = FEEDER_LOAD[node - 2];
            let tier = if CRITICAL.contains(&node) {
                LoadTier::Critical
            } else if MODERATE.contains(&node) {
                LoadTier::ModeratelyCritical
            } else {
                LoadTier::NonCritical
            };
            NodeLoad {
                node,
                tier,
                p: (1..=HOURS).map(|t| round6(p / 1000.0 * load_factor(t))).collect(),
                q: (1..=HOURS).map(|t| round6(q / 1000.0 * load_factor(t))).collect(),
            }
        })
        .collect();
    let fcev: Vec<f64> = (1..=HOURS).map(|t| round6(60.0 * FCEV_SHAPE[day_hour(t).1])).collect();
    let mut cbdr = vec![0.0; HOURS];
    for t in [21, 36, 38] {
        cbdr[t - 1] = -0.6;
    }
    for t in [28, 29] {
        cbdr[t - 1] = 1.5;
    }
    let price: Vec<f64> = (1..=HOURS)
        .map(|t| {
            let lmp = tn::market_prices(grid, t).expect("bundled grid clears");
            (lmp[&grid.dn_coupling_bus] * 1e4).round() / 1e4
        })
        .collect();
    ScenarioTimeline {
        horizon_hours: HOURS,
        dn_load,
        voll: Voll::default(),
        fcev_demand: ["HS1", "HS2", "HS3"].iter().map(|id| (id.to_string(), fcev.clone())).collect(),
        cbdr,
        kappa: vec![0.0; HOURS],
        dso_bid_price: price.clone(),
        dso_offer_price: price.clone(),
        dn_sell_price: price,
        outage_events: vec![OutageEvent {
            start_hour: 115,
            end_hour: 144,
            disconnected_tie: true,
            failed_assets: vec!["DG1".into(), "DG2".into(), "DG3".into()],
        }],
        forecast_lead: 24,
    }
}

/// The bundled week-long scenario.
pub fn case33_24() -> Scenario {
    let tn = case33_24_grid();
    let timeline = case33_24_timeline(&tn);
    Scenario {
        name: "case33_24".into(),
        dn: case33_24_feeder(),
        tn,
        fleet: case33_24_fleet(),
        timeline,
        options: ModelOptions::default(),
    }
}

/// Same scenario with the hydrogen fleet replaced by batteries of the same
/// power rating and the given duration, transit demand zeroed and demand
/// response ignored. Duration 0 leaves storage without energy.
pub fn with_batteries(base: &Scenario, duration: f64) -> Scenario {
    let mut s = without_transit(base);
    s.fleet.batteries = s
        .fleet
        .h2
        .iter()
        .map(|h| BatteryUnit {
            id: h.id.replace("HS", "BT"),
            node: h.node,
            p_rating: h.el_p_max,
            duration,
            round_trip_eff: 0.9,
            initial_soc: 0.0,
            inverter_rating: h.inverter_rating,
        })
        .collect();
    s.fleet.h2.clear();
    s.timeline.fcev_demand.clear();
    s.name = format!("{}-battery-{duration}h", base.name);
    s
}

/// The hydrogen case of the storage comparison: no transit demand, no
/// demand-response signals.
pub fn without_transit(base: &Scenario) -> Scenario {
    let mut s = base.clone();
    for d in s.timeline.fcev_demand.values_mut() {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
    s.options.ignore_cbdr = true;
    s.name = format!("{}-no-transit", base.name);
    s
}

/// A 3-node feeder on a 2-bus grid over 2 hours with two DGs, one PV unit
/// and one hydrogen system (8 binaries). The grid's cheap generator sits
/// behind a 30 MW line. In hour 1 the line has room, so the market sells
/// the feeder its full buy limit at λ = 10; in hour 2 the line is congested,
/// the bus price is 50 and the market sells nothing at the bid of 30 (and
/// would take the feeder's whole sell limit if it were allowed to sell).
pub fn tutorial() -> Scenario {
    let dn = DistNetwork {
        nodes: vec![1, 2, 3],
        lines: vec![
            DnLine {
                from: 1,
                to: 2,
                resistance: 0.01,
                reactance: 0.02,
                mva_limit: 3.0,
            },
            DnLine {
                from: 2,
                to: 3,
                resistance: 0.01,
                reactance: 0.02,
                mva_limit: 3.0,
            },
        ],
        root_node: 1,
        root_tn_bus: 2,
        v_min: 0.9,
        v_max: 1.05,
        exchange_limit: 2.0,
        mva_base: 1.0,
    };
    let tn = TransNetwork {
        buses: vec![1, 2],
        lines: vec![TnLine {
            from: 1,
            to: 2,
            reactance: 0.1,
            flow_min: -30.0,
            flow_max: 30.0,
        }],
        generators: vec![
            Generator {
                id: "G1".into(),
                bus: 1,
                p_min: 0.0,
                p_max: 100.0,
                marginal_cost: 10.0,
            },
            Generator {
                id: "G2".into(),
                bus: 2,
                p_min: 0.0,
                p_max: 100.0,
                marginal_cost: 50.0,
            },
        ],
        wind_farms: vec![WindFarm {
            id: "W1".into(),
            bus: 1,
            marginal_cost: 5.0,
            availability: vec![4.0, 3.0],
        }],
        loads: BTreeMap::from([(2, vec![27.0, 32.0])]),
        dn_coupling_bus: 2,
        reference_bus: 1,
    };
    let dg = |id: &str, node: usize, cost: f64, su: f64| DgUnit {
        id: id.into(),
        node,
        p_min: 0.1,
        p_max: 1.0,
        q_min: -0.5,
        q_max: 0.5,
        s_rating: 1.2,
        fixed_cost: 2.0,
        marginal_cost: cost,
        startup_cost: su,
        shutdown_cost: 1.0,
        ramp_up: 1.0,
        ramp_down: 1.0,
        initial_status: false,
        initial_p: 0.0,
    };
    let mut h2 = H2System::with_defaults("HS1", 3);
    h2.initial_mass = 40.0;
    let fleet = Fleet {
        dgs: vec![dg("DG1", 2, 36.0, 10.0), dg("DG2", 3, 45.0, 5.0)],
        pvs: vec![PvUnit {
            id: "PV1".into(),
            node: 3,
            inverter_rating: 0.5,
            marginal_cost: 1.0,
            p_max_profile: vec![0.3, 0.2],
        }],
        h2: vec![h2],
        batteries: Vec::new(),
    };
    let timeline = ScenarioTimeline {
        horizon_hours: 2,
        dn_load: vec![
            NodeLoad {
                node: 2,
                tier: LoadTier::Critical,
                p: vec![1.0, 1.1],
                q: vec![0.3, 0.3],
            },
            NodeLoad {
                node: 3,
                tier: LoadTier::NonCritical,
                p: vec![0.6, 0.7],
                q: vec![0.2, 0.2],
            },
        ],
        voll: Voll::default(),
        fcev_demand: BTreeMap::from([("HS1".to_string(), vec![2.0, 2.0])]),
        cbdr: vec![0.0, 0.0],
        kappa: vec![0.0, 0.0],
        dso_bid_price: vec![30.0, 30.0],
        dso_offer_price: vec![30.0, 30.0],
        dn_sell_price: vec![30.0, 30.0],
        outage_events: Vec::new(),
        forecast_lead: 24,
    };
    Scenario {
        name: "tutorial".into(),
        dn,
        tn,
        fleet,
        timeline,
        options: ModelOptions::default(),
    }
}
