//! Scenario bundles on disk and report writers.
//!
//! A bundle is a directory with a `manifest.json` naming one JSON document
//! per network and for the fleet, an event list, and hourly CSV series. Each
//! CSV has an `hour` column (1..=horizon, in order) and one column per
//! series whose header carries its unit, e.g. `p_7 [MW]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{ComparisonRow, DlmpSeries, H2CostRow, ResilienceReport};
use crate::model::{
    DistNetwork, Fleet, LoadTier, ModelOptions, NodeLoad, OutageEvent, Scenario, ScenarioTimeline, TransNetwork, Voll,
};
use crate::solution::DispatchSolution;
use crate::validate::validate_scenario;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("{file}: column `{series}` is in {found}, expected {expected}")]
    Unit {
        file: PathBuf,
        series: String,
        expected: String,
        found: String,
    },
    #[error("{file}: missing series `{series}`")]
    MissingSeries { file: PathBuf, series: String },
    #[error("{file}: series `{series}` has {got} hours, expected {expected}")]
    Length {
        file: PathBuf,
        series: String,
        expected: usize,
        got: usize,
    },
    #[error("scenario does not validate: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl IoError {
    /// Machine-readable form for error records.
    pub fn to_record(&self) -> serde_json::Value {
        let mut v = serde_json::json!({ "error": self.to_string() });
        match self {
            IoError::Parse { file, line, column, .. } => {
                v["file"] = file.display().to_string().into();
                v["line"] = (*line).into();
                v["column"] = (*column).into();
            }
            IoError::Io { file, .. }
            | IoError::Unit { file, .. }
            | IoError::MissingSeries { file, .. }
            | IoError::Length { file, .. } => {
                v["file"] = file.display().to_string().into();
            }
            IoError::Invalid(list) => v["violations"] = list.clone().into(),
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFiles {
    pub dn_load: String,
    pub pv: String,
    pub fcev_demand: String,
    pub tn_load: String,
    pub wind: String,
    pub signals: String,
}

impl Default for SeriesFiles {
    fn default() -> Self {
        Self {
            dn_load: "dn_load.csv".into(),
            pv: "pv.csv".into(),
            fcev_demand: "fcev_demand.csv".into(),
            tn_load: "tn_load.csv".into(),
            wind: "wind.csv".into(),
            signals: "signals.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub horizon_hours: usize,
    pub distribution: String,
    pub transmission: String,
    pub fleet: String,
    pub events: String,
    pub series: SeriesFiles,
    /// tier of every loaded node
    pub load_tiers: BTreeMap<usize, LoadTier>,
    #[serde(default)]
    pub voll: Voll,
    #[serde(default = "lead")]
    pub forecast_lead: usize,
    #[serde(default)]
    pub options: ModelOptions,
}

fn lead() -> usize {
    24
}

const MW: &str = "MW";
const MVAR: &str = "MVAr";
const KG_H: &str = "kg/h";
const FRAC: &str = "frac";
const PRICE: &str = "$/MWh";

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        file: path.to_path_buf(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        file: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })
}

/// Columns of an hourly CSV, keyed by series name.
struct Table {
    file: PathBuf,
    units: BTreeMap<String, String>,
    data: BTreeMap<String, Vec<f64>>,
    hours: usize,
}

fn split_header(h: &str) -> (String, String) {
    match h.trim().split_once('[') {
        Some((name, unit)) => (name.trim().to_string(), unit.trim_end_matches(']').trim().to_string()),
        None => (h.trim().to_string(), String::new()),
    }
}

fn read_table(path: &Path) -> Result<Table, IoError> {
    let text = read_text(path)?;
    let parse_err = |line: u64, column: u64, message: String| IoError::Parse {
        file: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(1, 1, e.to_string()))?.clone();
    let cols: Vec<(String, String)> = headers.iter().map(split_header).collect();
    if cols.first().map(|c| c.0.as_str()) != Some("hour") {
        return Err(parse_err(1, 1, "first column must be `hour`".into()));
    }
    let mut data: BTreeMap<String, Vec<f64>> = cols[1..].iter().map(|c| (c.0.clone(), Vec::new())).collect();
    if data.len() + 1 != cols.len() {
        return Err(parse_err(1, 1, "duplicate column names".into()));
    }
    let mut hours = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let hour: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(line, 1, format!("bad hour `{}`", &rec[0])))?;
        if hour != hours + 1 {
            return Err(parse_err(line, 1, format!("expected hour {}, found {hour}", hours + 1)));
        }
        hours = hour;
        for (k, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, k as u64 + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, k as u64 + 1, "non-finite value".into()));
            }
            data.get_mut(&cols[k].0).expect("column registered").push(v);
        }
    }
    Ok(Table {
        file: path.to_path_buf(),
        units: cols[1..].iter().cloned().collect(),
        data,
        hours,
    })
}

impl Table {
    fn take(&mut self, series: &str, unit: &str, horizon: usize) -> Result<Vec<f64>, IoError> {
        let v = self.data.remove(series).ok_or_else(|| IoError::MissingSeries {
            file: self.file.clone(),
            series: series.into(),
        })?;
        let found = &self.units[series];
        if found != unit {
            return Err(IoError::Unit {
                file: self.file.clone(),
                series: series.into(),
                expected: unit.into(),
                found: found.clone(),
            });
        }
        if v.len() != horizon {
            return Err(IoError::Length {
                file: self.file.clone(),
                series: series.into(),
                expected: horizon,
                got: self.hours,
            });
        }
        Ok(v)
    }
}

/// Reads and validates a bundle directory.
pub fn load_bundle(root: &Path) -> Result<Scenario, IoError> {
    let m: Manifest = read_json(&root.join("manifest.json"))?;
    let h = m.horizon_hours;
    let dn: DistNetwork = read_json(&root.join(&m.distribution))?;
    let mut tn: TransNetwork = read_json(&root.join(&m.transmission))?;
    let mut fleet: Fleet = read_json(&root.join(&m.fleet))?;
    let outage_events: Vec<OutageEvent> = read_json(&root.join(&m.events))?;

    let mut loads = read_table(&root.join(&m.series.dn_load))?;
    let mut dn_load = Vec::new();
    for (&node, &tier) in &m.load_tiers {
        dn_load.push(NodeLoad {
            node,
            tier,
            p: loads.take(&format!("p_{node}"), MW, h)?,
            q: loads.take(&format!("q_{node}"), MVAR, h)?,
        });
    }
    let mut pv = read_table(&root.join(&m.series.pv))?;
    for p in &mut fleet.pvs {
        p.p_max_profile = pv.take(&p.id, MW, h)?;
    }
    let mut fcev = read_table(&root.join(&m.series.fcev_demand))?;
    let mut fcev_demand = BTreeMap::new();
    for x in &fleet.h2 {
        fcev_demand.insert(x.id.clone(), fcev.take(&x.id, KG_H, h)?);
    }
    let mut tl = read_table(&root.join(&m.series.tn_load))?;
    let buses: Vec<String> = tl.data.keys().cloned().collect();
    tn.loads.clear();
    for name in buses {
        let bus = name
            .strip_prefix("bus")
            .and_then(|b| b.parse::<usize>().ok())
            .ok_or_else(|| IoError::Parse {
                file: tl.file.clone(),
                line: 1,
                column: 1,
                message: format!("column `{name}` is not of the form bus<k>"),
            })?;
        tn.loads.insert(bus, tl.take(&name, MW, h)?);
    }
    let mut wind = read_table(&root.join(&m.series.wind))?;
    for w in &mut tn.wind_farms {
        w.availability = wind.take(&w.id, MW, h)?;
    }
    let mut sig = read_table(&root.join(&m.series.signals))?;
    let timeline = ScenarioTimeline {
        horizon_hours: h,
        dn_load,
        voll: m.voll,
        fcev_demand,
        cbdr: sig.take("cbdr", MW, h)?,
        kappa: sig.take("kappa", FRAC, h)?,
        dso_bid_price: sig.take("dso_bid_price", PRICE, h)?,
        dso_offer_price: sig.take("dso_offer_price", PRICE, h)?,
        dn_sell_price: sig.take("dn_sell_price", PRICE, h)?,
        outage_events,
        forecast_lead: m.forecast_lead,
    };
    let report = validate_scenario(&dn, &tn, &fleet, &timeline);
    if !report.is_valid() {
        return Err(IoError::Invalid(report.violations));
    }
    Ok(Scenario {
        name: m.name,
        dn,
        tn,
        fleet,
        timeline,
        options: m.options,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io {
        file: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(v).expect("plain data serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    IoError::Io {
        file: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Writes columns `(header, values)` next to an `hour` column.
fn write_table(path: &Path, cols: &[(String, &[f64])], horizon: usize) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["hour".to_string()];
    head.extend(cols.iter().map(|c| c.0.clone()));
    w.write_record(&head).map_err(|e| csv_err(path, e))?;
    for t in 0..horizon {
        let mut row = vec![(t + 1).to_string()];
        row.extend(cols.iter().map(|c| c.1[t].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Io {
        file: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    write_file(path, &bytes)
}

fn header(name: &str, unit: &str) -> String {
    format!("{name} [{unit}]")
}

fn create_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::Io {
        file: dir.to_path_buf(),
        source,
    })
}

/// Writes `s` as a bundle that [`load_bundle`] reads back unchanged.
pub fn write_bundle(dir: &Path, s: &Scenario) -> Result<(), IoError> {
    create_dir(dir)?;
    let h = s.horizon();
    let series = SeriesFiles::default();
    let manifest = Manifest {
        name: s.name.clone(),
        horizon_hours: h,
        distribution: "distribution.json".into(),
        transmission: "transmission.json".into(),
        fleet: "fleet.json".into(),
        events: "events.json".into(),
        series: series.clone(),
        load_tiers: s.timeline.dn_load.iter().map(|l| (l.node, l.tier)).collect(),
        voll: s.timeline.voll,
        forecast_lead: s.timeline.forecast_lead,
        options: s.options.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join(&manifest.distribution), &s.dn)?;
    let mut tn = s.tn.clone();
    tn.loads.clear();
    tn.wind_farms.iter_mut().for_each(|w| w.availability.clear());
    write_json(&dir.join(&manifest.transmission), &tn)?;
    let mut fleet = s.fleet.clone();
    fleet.pvs.iter_mut().for_each(|p| p.p_max_profile.clear());
    write_json(&dir.join(&manifest.fleet), &fleet)?;
    write_json(&dir.join(&manifest.events), &s.timeline.outage_events)?;

    let mut loads = s.timeline.dn_load.clone();
    loads.sort_by_key(|l| l.node);
    let mut cols: Vec<(String, &[f64])> = Vec::new();
    for l in &loads {
        cols.push((header(&format!("p_{}", l.node), MW), &l.p));
        cols.push((header(&format!("q_{}", l.node), MVAR), &l.q));
    }
    write_table(&dir.join(&series.dn_load), &cols, h)?;
    let cols: Vec<(String, &[f64])> =
        s.fleet.pvs.iter().map(|p| (header(&p.id, MW), p.p_max_profile.as_slice())).collect();
    write_table(&dir.join(&series.pv), &cols, h)?;
    let cols: Vec<(String, &[f64])> = s
        .fleet
        .h2
        .iter()
        .map(|x| {
            let d = s.timeline.fcev_demand.get(&x.id).map_or(&[][..], |v| v.as_slice());
            (header(&x.id, KG_H), d)
        })
        .collect();
    let zeros = vec![0.0; h];
    let cols: Vec<(String, &[f64])> =
        cols.into_iter().map(|(n, d)| (n, if d.is_empty() { &zeros[..] } else { d })).collect();
    write_table(&dir.join(&series.fcev_demand), &cols, h)?;
    let cols: Vec<(String, &[f64])> =
        s.tn.loads.iter().map(|(b, v)| (header(&format!("bus{b}"), MW), v.as_slice())).collect();
    write_table(&dir.join(&series.tn_load), &cols, h)?;
    let cols: Vec<(String, &[f64])> =
        s.tn.wind_farms.iter().map(|w| (header(&w.id, MW), w.availability.as_slice())).collect();
    write_table(&dir.join(&series.wind), &cols, h)?;
    let tl = &s.timeline;
    let cols: Vec<(String, &[f64])> = vec![
        (header("cbdr", MW), &tl.cbdr),
        (header("kappa", FRAC), &tl.kappa),
        (header("dso_bid_price", PRICE), &tl.dso_bid_price),
        (header("dso_offer_price", PRICE), &tl.dso_offer_price),
        (header("dn_sell_price", PRICE), &tl.dn_sell_price),
    ];
    write_table(&dir.join(&series.signals), &cols, h)?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Io {
        file: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    write_file(path, &bytes)
}

/// Writes `<stem>.json` and `<stem>.csv` with the same rows.
pub fn write_report<T: Serialize>(dir: &Path, stem: &str, rows: &[T]) -> Result<(), IoError> {
    create_dir(dir)?;
    write_json(&dir.join(format!("{stem}.json")), &rows)?;
    write_rows(&dir.join(format!("{stem}.csv")), rows)
}

/// Storage comparison in the resilience table's layout.
pub fn write_comparison(dir: &Path, rows: &[ComparisonRow]) -> Result<(), IoError> {
    write_report(dir, "resilience", rows)
}

#[derive(Serialize)]
struct CostCsvRow<'a> {
    mode: &'a str,
    h2_id: &'a str,
    capacity_factor_pct: f64,
    electrolysis_cost_usd_per_kg: f64,
    storage_cost_usd_per_kg: f64,
    production_cost_usd_per_kg: f64,
    produced_kg: f64,
    applicable: bool,
}

/// Hydrogen cost in the cost table's layout (capacity factor in percent).
pub fn write_h2_costs(dir: &Path, rows: &[H2CostRow]) -> Result<(), IoError> {
    let flat: Vec<CostCsvRow> = rows
        .iter()
        .map(|r| CostCsvRow {
            mode: &r.mode,
            h2_id: &r.report.h2_id,
            capacity_factor_pct: r.report.capacity_factor * 100.0,
            electrolysis_cost_usd_per_kg: r.report.electrolysis_cost,
            storage_cost_usd_per_kg: r.report.storage_cost,
            production_cost_usd_per_kg: r.report.production_cost,
            produced_kg: r.report.produced_kg,
            applicable: r.report.applicable,
        })
        .collect();
    write_report(dir, "h2_cost", &flat)
}

#[derive(Serialize)]
struct RiCsvRow {
    critical_ens_mwh: f64,
    moderately_critical_ens_mwh: f64,
    non_critical_ens_mwh: f64,
    total_ens_mwh: f64,
    total_load_mwh: f64,
    ri_pct: f64,
}

pub fn write_resilience(dir: &Path, r: &ResilienceReport) -> Result<(), IoError> {
    create_dir(dir)?;
    write_json(&dir.join("ri.json"), r)?;
    let tier = |k: LoadTier| r.ens.get(&k).copied().unwrap_or(0.0);
    let row = RiCsvRow {
        critical_ens_mwh: tier(LoadTier::Critical),
        moderately_critical_ens_mwh: tier(LoadTier::ModeratelyCritical),
        non_critical_ens_mwh: tier(LoadTier::NonCritical),
        total_ens_mwh: r.total_ens,
        total_load_mwh: r.total_load,
        ri_pct: r.ri,
    };
    write_rows(&dir.join("ri.csv"), &[row])
}

pub fn write_dlmp(dir: &Path, d: &DlmpSeries) -> Result<(), IoError> {
    write_report(dir, "dlmp", &d.points)
}

#[derive(Serialize)]
struct ScheduleRow {
    hour: usize,
    emergency: bool,
    buy_mw: f64,
    sell_mw: f64,
    dg_mw: f64,
    pv_mw: f64,
    electrolyzer_mw: f64,
    fuel_cell_mw: f64,
    battery_net_mw: f64,
    h2_mass_kg: f64,
    shed_mw: f64,
    cost_usd: f64,
}

/// Full schedule as JSON plus an hourly summary CSV.
pub fn write_schedule(dir: &Path, sol: &DispatchSolution) -> Result<(), IoError> {
    create_dir(dir)?;
    write_json(&dir.join("schedule.json"), sol)?;
    let rows: Vec<ScheduleRow> = sol
        .hours
        .iter()
        .map(|r| ScheduleRow {
            hour: r.hour,
            emergency: r.emergency,
            buy_mw: r.exchange.buy,
            sell_mw: r.exchange.sell,
            dg_mw: r.dg.values().map(|d| d.p).sum(),
            pv_mw: r.pv.values().map(|p| p.p).sum(),
            electrolyzer_mw: r.h2.values().map(|h| h.p_el).sum(),
            fuel_cell_mw: r.h2.values().map(|h| h.p_fc).sum(),
            battery_net_mw: r.battery.values().map(|b| b.p_dis - b.p_ch).sum(),
            h2_mass_kg: r.h2.values().map(|h| h.mass).sum(),
            shed_mw: r.nodes.iter().map(|n| n.shed_p).sum(),
            cost_usd: r.cost,
        })
        .collect();
    write_rows(&dir.join("schedule.csv"), &rows)
}

pub fn read_schedule(path: &Path) -> Result<DispatchSolution, IoError> {
    read_json(path)
}
