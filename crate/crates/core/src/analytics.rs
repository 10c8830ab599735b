//! Prices, costs and resilience figures computed from solved schedules.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use misocp::relax::{cone_contribution, RelaxResult};
use misocp::{ProblemIR, SolveResult};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{H2System, LoadTier, Scenario};
use crate::names::{self as nm, at, line_key};
use crate::rolling::{run_rolling, RollingOptions, RollingRun};
use crate::solution::DispatchSolution;
use crate::synth;

/// Nodal price of one hour split along the path from the root:
/// `total = energy + loss + voltage + congestion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlmpPoint {
    pub node: usize,
    pub hour: usize,
    pub total: f64,
    /// price at the feeder root
    pub energy: f64,
    pub loss: f64,
    pub voltage: f64,
    pub congestion: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DlmpSeries {
    pub points: Vec<DlmpPoint>,
}

impl DlmpSeries {
    pub fn get(&self, node: usize, hour: usize) -> Option<&DlmpPoint> {
        self.points.iter().find(|p| p.node == node && p.hour == hour)
    }

    pub fn extend(&mut self, other: DlmpSeries) {
        self.points.extend(other.points);
        self.points.sort_by_key(|p| (p.hour, p.node));
    }
}

fn row_dual(ir: &ProblemIR, res: &RelaxResult, name: &str) -> Result<f64, ModelError> {
    let i = ir.row_id(name).ok_or_else(|| ModelError::Missing(format!("row {name}")))?;
    Ok(res.row_duals[i])
}

fn cone_index(ir: &ProblemIR) -> BTreeMap<&str, usize> {
    ir.cones.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect()
}

/// DLMPs of `hours` from a solve that carries duals (an incumbent re-solved
/// with its binaries fixed). Each line's active-flow stationarity gives
/// `π_to = π_from − (2R/S)·μ_vdrop − c_soc − c_limits`, so summing along the
/// path splits the price into a voltage part (drop-row duals), a loss part
/// (the conic current relaxation) and a congestion part (line limits).
pub fn compute_dlmp(
    s: &Scenario,
    ir: &ProblemIR,
    res: &SolveResult,
    hours: RangeInclusive<usize>,
) -> Result<DlmpSeries, ModelError> {
    if res.row_duals.len() != ir.rows.len() || res.cone_duals.len() != ir.cones.len() {
        return Err(ModelError::Missing("duals of the solved model".into()));
    }
    let rel = res.as_relaxation();
    let cones = cone_index(ir);
    let dn = &s.dn;
    let sb = dn.mva_base;
    let contrib = |name: &str, j: usize| cones.get(name).map_or(0.0, |&ci| cone_contribution(ir, &rel, ci, j));
    let mut out = DlmpSeries::default();
    for t in hours {
        let root = row_dual(ir, &rel, &at(nm::PBAL, dn.root_node, t))?;
        // per-line price steps, keyed by the receiving node
        let mut step: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
        for l in &dn.lines {
            let key = line_key(l.from, l.to);
            let fp = at(nm::FP, &key, t);
            let j = ir.var_id(&fp).ok_or_else(|| ModelError::Missing(format!("variable {fp}")))?;
            let mu = row_dual(ir, &rel, &at(nm::VDROP, &key, t))?;
            let voltage = -2.0 * l.resistance / sb * mu;
            let loss = -contrib(&at(nm::SOC_CONE, &key, t), j);
            let (blo, bhi) = res.bound_duals[j];
            let congestion =
                -contrib(&at(nm::SEND_CONE, &key, t), j) - contrib(&at(nm::RECV_CONE, &key, t), j) - blo - bhi;
            step.insert(l.to, (loss, voltage, congestion));
        }
        for &n in &dn.nodes {
            let total = row_dual(ir, &rel, &at(nm::PBAL, n, t))?;
            let (mut loss, mut voltage, mut congestion) = (0.0, 0.0, 0.0);
            for li in dn.path_to(n) {
                let (a, b, c) = step[&dn.lines[li].to];
                loss += a;
                voltage += b;
                congestion += c;
            }
            out.points.push(DlmpPoint {
                node: n,
                hour: t,
                total,
                energy: root,
                loss,
                voltage,
                congestion,
            });
        }
    }
    Ok(out)
}

/// DLMPs of every committed hour of a run, each from the window that
/// committed it.
pub fn dlmp_of_run(s: &Scenario, run: &RollingRun) -> Result<DlmpSeries, ModelError> {
    let mut out = DlmpSeries::default();
    for w in &run.windows {
        out.extend(compute_dlmp(s, &w.model.ir, &w.result, w.log.start..=w.log.commit_end)?);
    }
    Ok(out)
}

/// Electrolyzer energy over its maximum over `hours`.
pub fn compute_capacity_factor(
    sol: &DispatchSolution,
    h2: &H2System,
    hours: RangeInclusive<usize>,
) -> Result<f64, ModelError> {
    let n = hours.clone().count();
    if n == 0 || h2.el_p_max <= 0.0 {
        return Err(ModelError::Invalid(format!("capacity factor of {} over no capacity", h2.id)));
    }
    let mut used = 0.0;
    for t in hours {
        let rec = sol
            .hour(t)
            .and_then(|r| r.h2.get(&h2.id))
            .ok_or_else(|| ModelError::Missing(format!("{} at hour {t}", h2.id)))?;
        used += rec.p_el;
    }
    Ok(used / (h2.el_p_max * n as f64))
}

/// Storage amortization: the tank's capital cost spread evenly over its
/// lifetime, charged to the kilograms produced while it was in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageCostParams {
    /// $ per kg of tank capacity
    pub capital_per_kg: f64,
    pub lifetime_years: f64,
}

impl Default for StorageCostParams {
    fn default() -> Self {
        Self {
            capital_per_kg: 35.0,
            lifetime_years: 20.0,
        }
    }
}

impl StorageCostParams {
    /// Tank cost attributable to `hours` of operation, $.
    pub fn amortized(&self, tank_kg: f64, hours: usize) -> f64 {
        self.capital_per_kg * tank_kg * hours as f64 / (self.lifetime_years * 8760.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2CostReport {
    pub h2_id: String,
    pub capacity_factor: f64,
    pub produced_kg: f64,
    /// $/kg; zero when nothing was produced
    pub electrolysis_cost: f64,
    pub storage_cost: f64,
    pub production_cost: f64,
    /// false when no hydrogen was produced and the $/kg figures are moot
    pub applicable: bool,
}

/// Hydrogen production cost over `hours`: energy bought at the node's DLMP
/// per kilogram produced, plus the amortized tank.
pub fn compute_h2_cost(
    sol: &DispatchSolution,
    dlmp: &DlmpSeries,
    h2: &H2System,
    hours: RangeInclusive<usize>,
    params: &StorageCostParams,
) -> Result<H2CostReport, ModelError> {
    let cf = compute_capacity_factor(sol, h2, hours.clone())?;
    let n = hours.clone().count();
    let (mut spend, mut kg) = (0.0, 0.0);
    for t in hours {
        let rec = &sol.hour(t).expect("checked by the capacity factor").h2[&h2.id];
        let price = dlmp
            .get(h2.node, t)
            .ok_or_else(|| ModelError::Missing(format!("DLMP at node {} hour {t}", h2.node)))?
            .total;
        spend += price * rec.p_el;
        kg += rec.qh_el;
    }
    if kg <= 1e-9 {
        return Ok(H2CostReport {
            h2_id: h2.id.clone(),
            capacity_factor: cf,
            produced_kg: 0.0,
            electrolysis_cost: 0.0,
            storage_cost: 0.0,
            production_cost: 0.0,
            applicable: false,
        });
    }
    let electrolysis_cost = spend / kg;
    let storage_cost = params.amortized(h2.tank_max, n) / kg;
    Ok(H2CostReport {
        h2_id: h2.id.clone(),
        capacity_factor: cf,
        produced_kg: kg,
        electrolysis_cost,
        storage_cost,
        production_cost: electrolysis_cost + storage_cost,
        applicable: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    /// energy not supplied per tier, MWh
    pub ens: BTreeMap<LoadTier, f64>,
    pub total_ens: f64,
    pub total_load: f64,
    /// served share of the load, percent
    pub ri: f64,
}

/// `(total − curtailed) / total × 100`.
pub fn resilience_index(total_load: f64, ens: f64) -> Result<f64, ModelError> {
    if total_load <= 0.0 {
        return Err(ModelError::Invalid("resilience index over zero load".into()));
    }
    Ok(((total_load - ens) / total_load * 100.0).clamp(0.0, 100.0))
}

/// Energy not supplied per tier and the resilience index over `hours`.
pub fn compute_resilience_index(
    s: &Scenario,
    sol: &DispatchSolution,
    hours: RangeInclusive<usize>,
) -> Result<ResilienceReport, ModelError> {
    let tier_of: BTreeMap<usize, LoadTier> = s.timeline.dn_load.iter().map(|l| (l.node, l.tier)).collect();
    let mut ens: BTreeMap<LoadTier, f64> = LoadTier::ALL.iter().map(|&k| (k, 0.0)).collect();
    let mut total_load = 0.0;
    for t in hours {
        let rec = sol.hour(t).ok_or_else(|| ModelError::Missing(format!("hour {t} in the schedule")))?;
        total_load += s.dn.nodes.iter().map(|&n| s.timeline.load_p(n, t)).sum::<f64>();
        for nh in &rec.nodes {
            if let Some(k) = tier_of.get(&nh.node) {
                *ens.get_mut(k).expect("all tiers present") += nh.shed_p;
            }
        }
    }
    let total_ens = ens.values().sum();
    Ok(ResilienceReport {
        ri: resilience_index(total_load, total_ens)?,
        ens,
        total_ens,
        total_load,
    })
}

/// The first outage of the scenario, or the whole horizon without one.
pub fn outage_hours(s: &Scenario) -> RangeInclusive<usize> {
    s.timeline
        .outage_events
        .iter()
        .min_by_key(|e| e.start_hour)
        .map_or(1..=s.horizon(), |e| e.start_hour..=e.end_hour)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: usize,
    pub storage: String,
    /// battery duration in hours, none for hydrogen
    pub duration_h: Option<f64>,
    pub critical_ens: f64,
    pub moderately_critical_ens: f64,
    pub non_critical_ens: f64,
    pub total_ens: f64,
    pub total_load: f64,
    pub ri: f64,
}

impl ComparisonRow {
    fn new(case: usize, storage: String, duration_h: Option<f64>, r: &ResilienceReport) -> Self {
        Self {
            case,
            storage,
            duration_h,
            critical_ens: r.ens[&LoadTier::Critical],
            moderately_critical_ens: r.ens[&LoadTier::ModeratelyCritical],
            non_critical_ens: r.ens[&LoadTier::NonCritical],
            total_ens: r.total_ens,
            total_load: r.total_load,
            ri: r.ri,
        }
    }
}

/// One case of the battery comparison with the scenario and run behind it.
pub struct ComparisonCase {
    pub row: ComparisonRow,
    pub scenario: Scenario,
    pub run: RollingRun,
}

/// Replaces the hydrogen fleet with batteries of each duration (same power
/// rating, 90% round trip, no demand-response signals, no transit demand)
/// and adds the hydrogen case under the same conditions last. Every case is
/// run through the rolling driver and scored over the first outage.
pub fn run_battery_comparison(
    base: &Scenario,
    durations: &[f64],
    opts: &RollingOptions,
) -> Result<Vec<ComparisonRow>, ModelError> {
    Ok(battery_comparison_cases(base, durations, opts)?
        .into_iter()
        .map(|c| c.row)
        .collect())
}

pub fn battery_comparison_cases(
    base: &Scenario,
    durations: &[f64],
    opts: &RollingOptions,
) -> Result<Vec<ComparisonCase>, ModelError> {
    let hours = outage_hours(base);
    let mut cases: Vec<(String, Option<f64>, Scenario)> = durations
        .iter()
        .map(|&d| (format!("battery {d}h"), Some(d), synth::with_batteries(base, d)))
        .collect();
    cases.push(("hydrogen".into(), None, synth::without_transit(base)));
    let mut out = Vec::new();
    for (i, (name, d, s)) in cases.into_iter().enumerate() {
        let run = run_rolling(&s, opts)?;
        let r = compute_resilience_index(&s, &run.solution, hours.clone())?;
        out.push(ComparisonCase {
            row: ComparisonRow::new(i + 1, name, d, &r),
            scenario: s,
            run,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2CostRow {
    /// "normal" or "resilient"
    pub mode: String,
    #[serde(flatten)]
    pub report: H2CostReport,
}

/// Hydrogen cost per system in normal operation (outages removed) and in
/// resilient operation (the scenario as given), both over the horizon.
pub fn run_h2_cost_table(
    base: &Scenario,
    opts: &RollingOptions,
    params: &StorageCostParams,
) -> Result<Vec<H2CostRow>, ModelError> {
    let mut normal = base.clone();
    normal.timeline.outage_events.clear();
    let mut rows = Vec::new();
    for (mode, s) in [("normal", &normal), ("resilient", base)] {
        let run = run_rolling(s, opts)?;
        let dlmp = dlmp_of_run(s, &run)?;
        for h in &s.fleet.h2 {
            rows.push(H2CostRow {
                mode: mode.into(),
                report: compute_h2_cost(&run.solution, &dlmp, h, 1..=s.horizon(), params)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resilience_index_arithmetic() {
        assert!((resilience_index(84.3, 52.87).unwrap() - 37.28).abs() < 0.01);
        assert_eq!(resilience_index(10.0, 0.0).unwrap(), 100.0);
        assert!(resilience_index(0.0, 0.0).is_err());
    }

    #[test]
    fn storage_amortization_scales_with_hours() {
        let p = StorageCostParams::default();
        assert!((p.amortized(300.0, 336) - 2.0 * p.amortized(300.0, 168)).abs() < 1e-12);
        assert!((p.amortized(1.0, 8760) - p.capital_per_kg / p.lifetime_years).abs() < 1e-12);
    }
}
