//! Per-hour schedules read back from a solved model, and the independent
//! feasibility check that maps a schedule onto a model's variables again.

use std::collections::BTreeMap;

use misocp::{ProblemIR, SolveResult, SolveStatus, VarKind, Violation};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::Scenario;
use crate::names::{self as nm, at, hour};
use crate::window::ForecastWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgHour {
    pub status: bool,
    pub p: f64,
    pub q: f64,
    pub cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvHour {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Hour {
    /// true in electrolysis mode
    pub mode: bool,
    pub p_el: f64,
    pub p_fc: f64,
    pub qh_el: f64,
    pub qh_fc: f64,
    pub mass: f64,
    pub q_support: f64,
    /// unserved FCEV demand in electrolyzer MW
    pub el_shed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryHour {
    pub charging: bool,
    pub p_ch: f64,
    pub p_dis: f64,
    pub soc: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineHour {
    pub from: usize,
    pub to: usize,
    pub fp: f64,
    pub fq: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeHour {
    pub node: usize,
    pub v: f64,
    pub shed_p: f64,
    pub shed_q: f64,
    /// shadow price of the active balance, $/MWh
    pub dlmp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeHour {
    pub buy: f64,
    pub sell: f64,
    pub u: bool,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TnHour {
    pub pg: BTreeMap<String, f64>,
    pub pw: BTreeMap<String, f64>,
    pub flow: BTreeMap<String, f64>,
    pub theta: BTreeMap<usize, f64>,
    pub lambda: BTreeMap<usize, f64>,
    pub alpha_min: BTreeMap<String, f64>,
    pub alpha_max: BTreeMap<String, f64>,
    pub zeta: BTreeMap<String, f64>,
    pub delta_min: BTreeMap<String, f64>,
    pub delta_max: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
    pub psi_buy: f64,
    pub psi_sell: f64,
    pub k_buy: f64,
    pub k_sell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub hour: usize,
    pub emergency: bool,
    pub tie_live: bool,
    pub dg: BTreeMap<String, DgHour>,
    pub pv: BTreeMap<String, PvHour>,
    pub h2: BTreeMap<String, H2Hour>,
    pub battery: BTreeMap<String, BatteryHour>,
    pub lines: Vec<LineHour>,
    pub nodes: Vec<NodeHour>,
    pub exchange: ExchangeHour,
    pub tn: TnHour,
    /// DSO objective accrued in this hour
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub hours: Vec<HourRecord>,
    pub objective: f64,
    pub mip_gap: f64,
    pub status: SolveStatus,
}

fn hour_of(name: &str) -> Option<usize> {
    name.rsplit_once('@').and_then(|(_, h)| h.parse().ok())
}

/// Objective contribution of each hour, attributed by the hour tag of the
/// variable carrying each term.
pub fn hourly_cost(ir: &ProblemIR, x: &[f64]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for &(j, c) in &ir.objective.terms {
        if let Some(t) = hour_of(&ir.vars[j].name) {
            *out.entry(t).or_insert(0.0) += c * x[j];
        }
    }
    out
}

struct Reader<'a> {
    ir: &'a ProblemIR,
    x: &'a [f64],
}

impl Reader<'_> {
    fn get(&self, name: &str) -> Result<f64, ModelError> {
        let j = self
            .ir
            .var_id(name)
            .ok_or_else(|| ModelError::Missing(format!("variable {name}")))?;
        let v = self.x[j];
        Ok(if self.ir.vars[j].kind == VarKind::Binary { v.round() } else { v })
    }

    fn opt(&self, name: &str) -> f64 {
        self.get(name).unwrap_or(0.0)
    }
}

impl DispatchSolution {
    /// Reads every hour of a solved window. Node DLMPs are filled when the
    /// result carries row duals.
    pub fn extract(w: &ForecastWindow, ir: &ProblemIR, res: &SolveResult) -> Result<Self, ModelError> {
        if res.primal.len() != ir.vars.len() {
            return Err(ModelError::Dimension(format!(
                "primal has {} values for {} variables",
                res.primal.len(),
                ir.vars.len()
            )));
        }
        let s = w.scenario;
        let r = Reader { ir, x: &res.primal };
        let costs = hourly_cost(ir, &res.primal);
        let mut hours = Vec::with_capacity(w.len());
        for t in w.hours() {
            let mut rec = HourRecord {
                hour: t,
                emergency: w.emergency(t),
                tie_live: w.tie_live(t),
                dg: BTreeMap::new(),
                pv: BTreeMap::new(),
                h2: BTreeMap::new(),
                battery: BTreeMap::new(),
                lines: Vec::new(),
                nodes: Vec::new(),
                exchange: ExchangeHour {
                    buy: r.get(&hour(nm::BUY, t))?,
                    sell: r.get(&hour(nm::SELL, t))?,
                    u: r.get(&hour(nm::U, t))? > 0.5,
                    q: r.get(&hour(nm::EXQ, t))?,
                },
                tn: TnHour::default(),
                cost: costs.get(&t).copied().unwrap_or(0.0),
            };
            for d in &s.fleet.dgs {
                let id = d.id.as_str();
                rec.dg.insert(
                    d.id.clone(),
                    DgHour {
                        status: r.get(&at(nm::DG_X, id, t))? > 0.5,
                        p: r.get(&at(nm::DG_P, id, t))?,
                        q: r.get(&at(nm::DG_Q, id, t))?,
                        cost: r.get(&at(nm::DG_C, id, t))?,
                        startup_cost: r.get(&at(nm::DG_SU, id, t))?,
                        shutdown_cost: r.get(&at(nm::DG_SD, id, t))?,
                    },
                );
            }
            for p in &s.fleet.pvs {
                rec.pv.insert(
                    p.id.clone(),
                    PvHour {
                        p: r.get(&at(nm::PV_P, &p.id, t))?,
                        q: r.get(&at(nm::PV_Q, &p.id, t))?,
                    },
                );
            }
            for h in &s.fleet.h2 {
                let id = h.id.as_str();
                rec.h2.insert(
                    h.id.clone(),
                    H2Hour {
                        mode: r.get(&at(nm::H2_MODE, id, t))? > 0.5,
                        p_el: r.get(&at(nm::H2_PEL, id, t))?,
                        p_fc: r.get(&at(nm::H2_PFC, id, t))?,
                        qh_el: r.get(&at(nm::H2_QEL, id, t))?,
                        qh_fc: r.get(&at(nm::H2_QFC, id, t))?,
                        mass: r.get(&at(nm::H2_MOH, id, t))?,
                        q_support: r.get(&at(nm::H2_QHS, id, t))?,
                        el_shed: r.get(&at(nm::H2_SHD, id, t))?,
                    },
                );
            }
            for b in &s.fleet.batteries {
                let id = b.id.as_str();
                rec.battery.insert(
                    b.id.clone(),
                    BatteryHour {
                        charging: r.get(&at(nm::BAT_MODE, id, t))? > 0.5,
                        p_ch: r.get(&at(nm::BAT_CH, id, t))?,
                        p_dis: r.get(&at(nm::BAT_DIS, id, t))?,
                        soc: r.get(&at(nm::BAT_SOC, id, t))?,
                        q: r.get(&at(nm::BAT_Q, id, t))?,
                    },
                );
            }
            for l in &s.dn.lines {
                let key = nm::line_key(l.from, l.to);
                rec.lines.push(LineHour {
                    from: l.from,
                    to: l.to,
                    fp: r.get(&at(nm::FP, &key, t))?,
                    fq: r.get(&at(nm::FQ, &key, t))?,
                    a: r.get(&at(nm::A, &key, t))?,
                });
            }
            for &n in &s.dn.nodes {
                let dlmp = if res.row_duals.is_empty() {
                    None
                } else {
                    ir.row_id(&at(nm::PBAL, n, t)).map(|i| res.row_duals[i])
                };
                rec.nodes.push(NodeHour {
                    node: n,
                    v: r.get(&at(nm::V, n, t))?,
                    shed_p: r.opt(&at(nm::SHED_P, n, t)),
                    shed_q: r.opt(&at(nm::SHED_Q, n, t)),
                    dlmp,
                });
            }
            let tn = &s.tn;
            let th = &mut rec.tn;
            for g in &tn.generators {
                th.pg.insert(g.id.clone(), r.get(&at(nm::PG, &g.id, t))?);
                th.alpha_min.insert(g.id.clone(), r.get(&at(nm::AMIN, &g.id, t))?);
                th.alpha_max.insert(g.id.clone(), r.get(&at(nm::AMAX, &g.id, t))?);
            }
            for wf in &tn.wind_farms {
                th.pw.insert(wf.id.clone(), r.get(&at(nm::PW, &wf.id, t))?);
                th.gamma.insert(wf.id.clone(), r.get(&at(nm::GAM, &wf.id, t))?);
            }
            for key in nm::tn_line_keys(tn) {
                th.flow.insert(key.clone(), r.get(&at(nm::FLOW, &key, t))?);
                th.zeta.insert(key.clone(), r.get(&at(nm::ZETA, &key, t))?);
                th.delta_min.insert(key.clone(), r.get(&at(nm::DMIN, &key, t))?);
                th.delta_max.insert(key.clone(), r.get(&at(nm::DMAX, &key, t))?);
            }
            for &k in &tn.buses {
                if k != tn.reference_bus {
                    th.theta.insert(k, r.get(&at(nm::THETA, k, t))?);
                } else {
                    th.theta.insert(k, 0.0);
                }
                th.lambda.insert(k, r.get(&at(nm::LAM, k, t))?);
            }
            th.psi_buy = r.get(&hour(nm::PSIB, t))?;
            th.psi_sell = r.get(&hour(nm::PSIS, t))?;
            th.k_buy = r.get(&hour(nm::KB, t))?;
            th.k_sell = r.get(&hour(nm::KS, t))?;
            hours.push(rec);
        }
        Ok(Self {
            hours,
            objective: res.objective,
            mip_gap: res.gap,
            status: res.status,
        })
    }

    pub fn hour(&self, t: usize) -> Option<&HourRecord> {
        let first = self.hours.first()?.hour;
        self.hours.get(t.checked_sub(first)?).filter(|h| h.hour == t)
    }

    /// Keeps hours `[from, to]`.
    pub fn slice(&self, from: usize, to: usize) -> Vec<HourRecord> {
        self.hours.iter().filter(|h| h.hour >= from && h.hour <= to).cloned().collect()
    }

    /// Value of a model variable by name, read from the schedule.
    pub fn value_of(&self, name: &str) -> Option<f64> {
        let (head, t) = name.rsplit_once('@')?;
        let t: usize = t.parse().ok()?;
        let rec = self.hour(t)?;
        let (base, key) = match head.split_once('[') {
            Some((b, k)) => (b, k.strip_suffix(']')?),
            None => (head, ""),
        };
        let node = || key.parse::<usize>().ok();
        let line = |k: &str| {
            let (f, to) = k.split_once('-')?;
            let (f, to): (usize, usize) = (f.parse().ok()?, to.parse().ok()?);
            rec.lines.iter().find(|l| l.from == f && l.to == to)
        };
        let nodeh = || node().and_then(|n| rec.nodes.iter().find(|x| x.node == n));
        let b = |v: bool| f64::from(u8::from(v));
        let tn = &rec.tn;
        Some(match base {
            nm::DG_X => b(rec.dg.get(key)?.status),
            nm::DG_P => rec.dg.get(key)?.p,
            nm::DG_Q => rec.dg.get(key)?.q,
            nm::DG_C => rec.dg.get(key)?.cost,
            nm::DG_SU => rec.dg.get(key)?.startup_cost,
            nm::DG_SD => rec.dg.get(key)?.shutdown_cost,
            nm::PV_P => rec.pv.get(key)?.p,
            nm::PV_Q => rec.pv.get(key)?.q,
            nm::H2_MODE => b(rec.h2.get(key)?.mode),
            nm::H2_PEL => rec.h2.get(key)?.p_el,
            nm::H2_PFC => rec.h2.get(key)?.p_fc,
            nm::H2_QEL => rec.h2.get(key)?.qh_el,
            nm::H2_QFC => rec.h2.get(key)?.qh_fc,
            nm::H2_MOH => rec.h2.get(key)?.mass,
            nm::H2_QHS => rec.h2.get(key)?.q_support,
            nm::H2_SHD => rec.h2.get(key)?.el_shed,
            nm::BAT_MODE => b(rec.battery.get(key)?.charging),
            nm::BAT_CH => rec.battery.get(key)?.p_ch,
            nm::BAT_DIS => rec.battery.get(key)?.p_dis,
            nm::BAT_SOC => rec.battery.get(key)?.soc,
            nm::BAT_Q => rec.battery.get(key)?.q,
            nm::V => nodeh()?.v,
            nm::SHED_P => nodeh()?.shed_p,
            nm::SHED_Q => nodeh()?.shed_q,
            nm::FP => line(key)?.fp,
            nm::FQ => line(key)?.fq,
            nm::A => line(key)?.a,
            nm::BUY => rec.exchange.buy,
            nm::SELL => rec.exchange.sell,
            nm::U => b(rec.exchange.u),
            nm::EXQ => rec.exchange.q,
            nm::PG => *tn.pg.get(key)?,
            nm::PW => *tn.pw.get(key)?,
            nm::FLOW => *tn.flow.get(key)?,
            nm::THETA => *tn.theta.get(&node()?)?,
            nm::LAM => *tn.lambda.get(&node()?)?,
            nm::AMIN => *tn.alpha_min.get(key)?,
            nm::AMAX => *tn.alpha_max.get(key)?,
            nm::ZETA => *tn.zeta.get(key)?,
            nm::DMIN => *tn.delta_min.get(key)?,
            nm::DMAX => *tn.delta_max.get(key)?,
            nm::GAM => *tn.gamma.get(key)?,
            nm::PSIB => tn.psi_buy,
            nm::PSIS => tn.psi_sell,
            nm::KB => tn.k_buy,
            nm::KS => tn.k_sell,
            _ => return None,
        })
    }

    /// The schedule as a point of `ir`; every variable must be covered.
    pub fn to_point(&self, ir: &ProblemIR) -> Result<Vec<f64>, ModelError> {
        ir.vars
            .iter()
            .map(|v| {
                self.value_of(&v.name)
                    .ok_or_else(|| ModelError::Dimension(format!("solution has no value for {}", v.name)))
            })
            .collect()
    }

    /// Total load and shed per node over the given hours, MWh.
    pub fn served(&self, s: &Scenario, from: usize, to: usize) -> (f64, f64) {
        let mut total = 0.0;
        let mut shed = 0.0;
        for rec in self.hours.iter().filter(|h| h.hour >= from && h.hour <= to) {
            total += s.dn.nodes.iter().map(|&n| s.timeline.load_p(n, rec.hour)).sum::<f64>();
            shed += rec.nodes.iter().map(|n| n.shed_p).sum::<f64>();
        }
        (total, shed)
    }
}

/// Residuals of every bound, integrality requirement, row and cone of `ir`
/// at the schedule's values that exceed `tol`.
pub fn validate_solution(sol: &DispatchSolution, ir: &ProblemIR, tol: f64) -> Result<Vec<Violation>, ModelError> {
    let x = sol.to_point(ir)?;
    Ok(ir.violations(&x, tol)?)
}
