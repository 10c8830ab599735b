//! Physical and market data of a scenario. Electrical quantities are per
//! unit on `DistNetwork::mva_base` (1 MVA by default, so p.u. equals MW),
//! energy in MWh, mass in kg, prices in $/MWh and the time step is 1 h.
//! Hours are numbered from 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnLine {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    pub reactance: f64,
    pub mva_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistNetwork {
    pub nodes: Vec<usize>,
    pub lines: Vec<DnLine>,
    pub root_node: usize,
    pub root_tn_bus: usize,
    pub v_min: f64,
    pub v_max: f64,
    /// MW that can cross the feeder tie in either direction
    pub exchange_limit: f64,
    #[serde(default = "one")]
    pub mva_base: f64,
}

fn one() -> f64 {
    1.0
}

impl DistNetwork {
    /// Index of the line feeding `node` (none for the root).
    pub fn parent_line(&self, node: usize) -> Option<usize> {
        self.lines.iter().position(|l| l.to == node)
    }

    pub fn child_lines(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines.iter().enumerate().filter(move |(_, l)| l.from == node).map(|(k, _)| k)
    }

    /// Line indices from the root down to `node`.
    pub fn path_to(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(k) = self.parent_line(cur) {
            path.push(k);
            cur = self.lines[k].from;
            if path.len() > self.lines.len() {
                break;
            }
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnLine {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub flow_min: f64,
    pub flow_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub marginal_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub id: String,
    pub bus: usize,
    pub marginal_cost: f64,
    /// hourly MW available
    #[serde(default)]
    pub availability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransNetwork {
    pub buses: Vec<usize>,
    pub lines: Vec<TnLine>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    /// hourly MW demand per bus
    #[serde(default)]
    pub loads: BTreeMap<usize, Vec<f64>>,
    pub dn_coupling_bus: usize,
    #[serde(default = "first_bus")]
    pub reference_bus: usize,
}

fn first_bus() -> usize {
    1
}

impl TransNetwork {
    pub fn load(&self, bus: usize, hour: usize) -> f64 {
        self.loads.get(&bus).map_or(0.0, |v| v[hour - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgUnit {
    pub id: String,
    pub node: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub s_rating: f64,
    pub fixed_cost: f64,
    pub marginal_cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub initial_status: bool,
    #[serde(default)]
    pub initial_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvUnit {
    pub id: String,
    pub node: usize,
    pub inverter_rating: f64,
    pub marginal_cost: f64,
    /// hourly MW available
    #[serde(default)]
    pub p_max_profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2System {
    pub id: String,
    pub node: usize,
    pub el_p_max: f64,
    pub fc_p_max: f64,
    pub el_kg_min: f64,
    pub el_kg_max: f64,
    pub fc_kg_min: f64,
    pub fc_kg_max: f64,
    pub tank_min: f64,
    pub tank_max: f64,
    /// kg per MWh
    pub el_conv: f64,
    /// MWh per kg
    pub fc_conv: f64,
    pub el_eff: f64,
    pub fc_eff: f64,
    /// fraction of stored mass lost per hour
    pub dissipation: f64,
    pub inverter_rating: f64,
    pub initial_mass: f64,
}

impl H2System {
    /// kg produced per MWh consumed
    pub fn kg_per_mwh(&self) -> f64 {
        self.el_conv * self.el_eff
    }

    /// MWh produced per kg consumed
    pub fn mwh_per_kg(&self) -> f64 {
        self.fc_conv * self.fc_eff
    }

    /// A system with the documented engineering defaults.
    pub fn with_defaults(id: &str, node: usize) -> Self {
        let el_p_max = 0.5;
        let fc_p_max = 0.5;
        let (el_conv, el_eff, fc_conv, fc_eff) = (20.0, 0.7, 0.05, 0.5);
        let tank_min = 10.0;
        Self {
            id: id.to_string(),
            node,
            el_p_max,
            fc_p_max,
            el_kg_min: 0.0,
            el_kg_max: el_conv * el_eff * el_p_max,
            fc_kg_min: 0.0,
            fc_kg_max: fc_p_max / (fc_conv * fc_eff),
            tank_min,
            tank_max: 300.0,
            el_conv,
            fc_conv,
            el_eff,
            fc_eff,
            dissipation: 0.0,
            inverter_rating: 0.6,
            initial_mass: tank_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryUnit {
    pub id: String,
    pub node: usize,
    pub p_rating: f64,
    pub duration: f64,
    pub round_trip_eff: f64,
    pub initial_soc: f64,
    pub inverter_rating: f64,
}

impl BatteryUnit {
    pub fn capacity(&self) -> f64 {
        self.p_rating * self.duration
    }

    /// Per-direction efficiency (the round trip split evenly).
    pub fn leg_eff(&self) -> f64 {
        self.round_trip_eff.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Fleet {
    pub dgs: Vec<DgUnit>,
    pub pvs: Vec<PvUnit>,
    pub h2: Vec<H2System>,
    #[serde(default)]
    pub batteries: Vec<BatteryUnit>,
}

impl Fleet {
    pub fn asset_ids(&self) -> Vec<&str> {
        self.dgs
            .iter()
            .map(|d| d.id.as_str())
            .chain(self.pvs.iter().map(|p| p.id.as_str()))
            .chain(self.h2.iter().map(|h| h.id.as_str()))
            .chain(self.batteries.iter().map(|b| b.id.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadTier {
    Critical,
    ModeratelyCritical,
    NonCritical,
}

impl LoadTier {
    pub const ALL: [LoadTier; 3] = [LoadTier::Critical, LoadTier::ModeratelyCritical, LoadTier::NonCritical];

    pub fn label(self) -> &'static str {
        match self {
            LoadTier::Critical => "critical",
            LoadTier::ModeratelyCritical => "moderately_critical",
            LoadTier::NonCritical => "non_critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLoad {
    pub node: usize,
    pub tier: LoadTier,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voll {
    pub critical: f64,
    pub moderately_critical: f64,
    pub non_critical: f64,
}

impl Default for Voll {
    fn default() -> Self {
        Self {
            critical: 10_000.0,
            moderately_critical: 5_000.0,
            non_critical: 1_000.0,
        }
    }
}

impl Voll {
    pub fn of(&self, tier: LoadTier) -> f64 {
        match tier {
            LoadTier::Critical => self.critical,
            LoadTier::ModeratelyCritical => self.moderately_critical,
            LoadTier::NonCritical => self.non_critical,
        }
    }

    pub fn max(&self) -> f64 {
        self.critical.max(self.moderately_critical).max(self.non_critical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageEvent {
    pub start_hour: usize,
    /// last affected hour (inclusive)
    pub end_hour: usize,
    pub disconnected_tie: bool,
    pub failed_assets: Vec<String>,
}

impl OutageEvent {
    pub fn covers(&self, hour: usize) -> bool {
        (self.start_hour..=self.end_hour).contains(&hour)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTimeline {
    pub horizon_hours: usize,
    pub dn_load: Vec<NodeLoad>,
    #[serde(default)]
    pub voll: Voll,
    /// kg/h per H2 system id
    pub fcev_demand: BTreeMap<String, Vec<f64>>,
    /// signed MW: positive asks electrolyzers to consume, negative asks fuel cells to produce
    pub cbdr: Vec<f64>,
    /// baseline fraction of total tank capacity to hold each hour
    pub kappa: Vec<f64>,
    pub dso_bid_price: Vec<f64>,
    pub dso_offer_price: Vec<f64>,
    pub dn_sell_price: Vec<f64>,
    pub outage_events: Vec<OutageEvent>,
    #[serde(default = "lead")]
    pub forecast_lead: usize,
}

fn lead() -> usize {
    24
}

impl ScenarioTimeline {
    pub fn load_p(&self, node: usize, hour: usize) -> f64 {
        self.dn_load.iter().filter(|l| l.node == node).map(|l| l.p[hour - 1]).sum()
    }

    pub fn load_q(&self, node: usize, hour: usize) -> f64 {
        self.dn_load.iter().filter(|l| l.node == node).map(|l| l.q[hour - 1]).sum()
    }

    pub fn demand(&self, h2_id: &str, hour: usize) -> f64 {
        self.fcev_demand.get(h2_id).map_or(0.0, |v| v[hour - 1])
    }
}

/// Modelling switches and numeric safeguards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    /// $/MWh on feeder losses; keeps the conic relaxation tight when energy is free
    pub loss_penalty: f64,
    /// $/kg on FCEV demand left unserved during emergency hours
    pub fcev_shed_penalty: f64,
    /// $/kg on FCEV demand left unserved outside emergency hours; the station
    /// is expected to serve its customers, so this sits well above the cost of
    /// making the hydrogen
    pub fcev_normal_shed_penalty: f64,
    /// hours before a visible event from which the tank reserve applies
    pub kappa_lead: usize,
    /// big-M of the exchange linearization; derived when absent
    pub big_m: Option<f64>,
    /// price sales through the LMP (second linearization) instead of the sell price
    pub sell_at_lmp: bool,
    /// ignore demand-response rows (battery comparison)
    pub ignore_cbdr: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            loss_penalty: 1e-3,
            fcev_shed_penalty: 1e-3,
            fcev_normal_shed_penalty: 10.0,
            kappa_lead: 42,
            big_m: None,
            sell_at_lmp: false,
            ignore_cbdr: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dn: DistNetwork,
    pub tn: TransNetwork,
    pub fleet: Fleet,
    pub timeline: ScenarioTimeline,
    #[serde(default)]
    pub options: ModelOptions,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.timeline.horizon_hours
    }

    /// Bound on the exchange duals: highest bid plus highest TN cost plus highest VOLL.
    pub fn exchange_dual_bound(&self) -> f64 {
        let rho = self.timeline.dso_bid_price.iter().chain(&self.timeline.dso_offer_price).cloned().fold(0.0, f64::max);
        let cost = self
            .tn
            .generators
            .iter()
            .map(|g| g.marginal_cost)
            .chain(self.tn.wind_farms.iter().map(|w| w.marginal_cost))
            .fold(0.0, f64::max);
        rho + cost + self.timeline.voll.max()
    }

    /// Smallest big-M that is provably valid for the exchange linearization.
    pub fn min_big_m(&self) -> f64 {
        self.dn.exchange_limit * self.exchange_dual_bound()
    }
}
