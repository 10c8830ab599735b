//! Lower-level (TSO) market and the single-level model of a window.
//!
//! Per hour the TSO solves the DC-OPF
//!
//! ```text
//! min  Σ Cg·Pg + Σ Cw·Pw − ρb·Exb + ρs·Exs
//! s.t. Σ Pg + Σ Pw + inflow − outflow − [b = c](Exb − Exs) = TD_b   (λ_b free)
//!      Pg ≥ Pg_min (α̲ ≥ 0),  Pg ≤ Pg_max (ᾱ ≤ 0)
//!      Tfl − (θ_from − θ_to)/X = 0 (ζ free)
//!      Tfl ≥ TFl_min (δ̲ ≥ 0),  Tfl ≤ TFl_max (δ̄ ≤ 0)
//!      Pw ≤ Pw_max (γ ≤ 0),  Pw ≥ 0
//!      −Exs ≥ −cap·U (ψ̄ ≥ 0),  −Exb ≥ −cap·(1 − U) (ψ̲ ≥ 0),  Exb, Exs ≥ 0
//! ```
//!
//! with the reference angle fixed at zero. Multipliers follow the shadow-price
//! sign of their row (≥ rows nonnegative, ≤ rows nonpositive). The dual
//! objective contains `cap·U·ψ̲` and `cap·U·ψ̄`; both are replaced by
//! auxiliaries `K̲`, `K̄` tied to `U` with big-M rows and McCormick bounds.

use std::collections::BTreeMap;

use misocp::ipm::IpmSettings;
use misocp::relax::{RelaxStatus, Relaxation};
use misocp::{assemble, Block, Expr, ProblemIR};

use crate::dn;
use crate::error::ModelError;
use crate::model::TransNetwork;
use crate::names::{self as nm, at, hour};
use crate::window::{ForecastWindow, InitialState};

const INF: f64 = f64::INFINITY;

fn check_reactance(tn: &TransNetwork) -> Result<(), ModelError> {
    for l in &tn.lines {
        if l.reactance == 0.0 {
            return Err(ModelError::ZeroReactance { from: l.from, to: l.to });
        }
    }
    Ok(())
}

/// Lower-level primal feasibility rows, including the exchange variables
/// shared with the feeder and the direction binary `U`.
pub fn build_ll_primal(tn: &TransNetwork, w: &ForecastWindow) -> Result<Block, ModelError> {
    check_reactance(tn)?;
    let mut b = Block::new("ll primal");
    for t in w.hours() {
        let cap = w.exchange_cap(t);
        let buy = b.continuous(hour(nm::BUY, t), 0.0, INF);
        let sell = b.continuous(hour(nm::SELL, t), 0.0, INF);
        let u = if cap > 0.0 {
            b.binary(hour(nm::U, t))
        } else {
            b.fixed_binary(hour(nm::U, t), 0.0)
        };
        let mut bal = network_rows(&mut b, tn, t);
        push(&mut bal, tn.dn_coupling_bus, &buy, -1.0);
        push(&mut bal, tn.dn_coupling_bus, &sell, 1.0);
        for (k, e) in bal {
            b.eq(at(nm::TBAL, k, t), e, w.tn_load(k, t));
        }
        b.ge(hour(nm::SELL_LIM, t), Expr::scaled(&sell, -1.0).add(&u, cap), 0.0);
        b.ge(hour(nm::BUY_LIM, t), Expr::scaled(&buy, -1.0).add(&u, -cap), -cap);
    }
    Ok(b)
}

/// DC network of hour t: generators, wind, angles and flows with their
/// limits. Returns the nodal balance expressions (rows not yet added).
fn network_rows(b: &mut Block, tn: &TransNetwork, t: usize) -> BTreeMap<usize, Expr> {
    let mut bal: BTreeMap<usize, Expr> = tn.buses.iter().map(|&k| (k, Expr::default())).collect();
    for g in &tn.generators {
        let p = b.free(at(nm::PG, &g.id, t));
        b.ge(at(nm::GMIN, &g.id, t), Expr::var(&p), g.p_min);
        b.le(at(nm::GMAX, &g.id, t), Expr::var(&p), g.p_max);
        push(&mut bal, g.bus, &p, 1.0);
    }
    for wf in &tn.wind_farms {
        let p = b.continuous(at(nm::PW, &wf.id, t), 0.0, INF);
        b.le(at(nm::WMAX, &wf.id, t), Expr::var(&p), wf.availability[t - 1]);
        push(&mut bal, wf.bus, &p, 1.0);
    }
    for &k in &tn.buses {
        if k != tn.reference_bus {
            b.free(at(nm::THETA, k, t));
        }
    }
    for (l, key) in tn.lines.iter().zip(nm::tn_line_keys(tn)) {
        let f = b.free(at(nm::FLOW, &key, t));
        let mut e = Expr::var(&f);
        if l.from != tn.reference_bus {
            e = e.add(at(nm::THETA, l.from, t), -1.0 / l.reactance);
        }
        if l.to != tn.reference_bus {
            e = e.add(at(nm::THETA, l.to, t), 1.0 / l.reactance);
        }
        b.eq(at(nm::FDEF, &key, t), e, 0.0);
        b.ge(at(nm::FMIN, &key, t), Expr::var(&f), l.flow_min);
        b.le(at(nm::FMAX, &key, t), Expr::var(&f), l.flow_max);
        push(&mut bal, l.to, &f, 1.0);
        push(&mut bal, l.from, &f, -1.0);
    }
    bal
}

/// Nodal prices of the transmission market alone (no feeder exchange) in
/// hour t, $/MWh.
pub fn market_prices(tn: &TransNetwork, t: usize) -> Result<BTreeMap<usize, f64>, ModelError> {
    check_reactance(tn)?;
    let mut b = Block::new("dc-opf");
    let bal = network_rows(&mut b, tn, t);
    for (k, e) in bal {
        b.eq(at(nm::TBAL, k, t), e, tn.load(k, t));
    }
    for g in &tn.generators {
        b.cost(at(nm::PG, &g.id, t), g.marginal_cost);
    }
    for wf in &tn.wind_farms {
        b.cost(at(nm::PW, &wf.id, t), wf.marginal_cost);
    }
    let ir = assemble(&[b])?;
    let res = Relaxation::of(&ir)?.solve(&IpmSettings::default())?;
    if res.status != RelaxStatus::Optimal {
        return Err(ModelError::Invalid(format!("transmission market infeasible in hour {t}")));
    }
    Ok(tn
        .buses
        .iter()
        .map(|&k| (k, res.row_duals[ir.row_id(&at(nm::TBAL, k, t)).expect("balance row")]))
        .collect())
}

fn push(bal: &mut BTreeMap<usize, Expr>, bus: usize, var: &str, coef: f64) {
    let e = bal.get_mut(&bus).expect("bus in network");
    e.terms.push((var.to_string(), coef));
}

/// Lower-level primal objective of hour t.
pub fn ll_primal_objective(tn: &TransNetwork, w: &ForecastWindow, t: usize) -> Expr {
    let mut e = Expr::default();
    for g in &tn.generators {
        e = e.add(at(nm::PG, &g.id, t), g.marginal_cost);
    }
    for wf in &tn.wind_farms {
        e = e.add(at(nm::PW, &wf.id, t), wf.marginal_cost);
    }
    e.add(hour(nm::BUY, t), -w.bid(t)).add(hour(nm::SELL, t), w.offer(t))
}

/// Lower-level dual objective of hour t, with the `cap·U·ψ` products
/// already replaced by `K̲`, `K̄`.
pub fn ll_dual_objective(tn: &TransNetwork, w: &ForecastWindow, t: usize) -> Expr {
    let mut e = Expr::default();
    for g in &tn.generators {
        e = e.add(at(nm::AMIN, &g.id, t), g.p_min).add(at(nm::AMAX, &g.id, t), g.p_max);
    }
    for (l, key) in tn.lines.iter().zip(nm::tn_line_keys(tn)) {
        e = e.add(at(nm::DMIN, &key, t), l.flow_min).add(at(nm::DMAX, &key, t), l.flow_max);
    }
    for &k in &tn.buses {
        e = e.add(at(nm::LAM, k, t), w.tn_load(k, t));
    }
    for (k, wf) in tn.wind_farms.iter().enumerate() {
        e = e.add(at(nm::GAM, &wf.id, t), w.wind_max(k, t));
    }
    e.add(hour(nm::PSIB, t), -w.exchange_cap(t))
        .add(hour(nm::KB, t), 1.0)
        .add(hour(nm::KS, t), -1.0)
}

/// Dual feasibility: one row per primal variable.
pub fn build_ll_dual(tn: &TransNetwork, w: &ForecastWindow) -> Block {
    let psi_max = w.scenario.exchange_dual_bound();
    let c = tn.dn_coupling_bus;
    let mut b = Block::new("ll dual");
    for t in w.hours() {
        for &k in &tn.buses {
            b.free(at(nm::LAM, k, t));
        }
        for g in &tn.generators {
            let lo = b.continuous(at(nm::AMIN, &g.id, t), 0.0, INF);
            let hi = b.continuous(at(nm::AMAX, &g.id, t), -INF, 0.0);
            b.eq(
                at("tn.dpg", &g.id, t),
                Expr::var(lo).add(hi, 1.0).add(at(nm::LAM, g.bus, t), 1.0),
                g.marginal_cost,
            );
        }
        for wf in &tn.wind_farms {
            let gam = b.continuous(at(nm::GAM, &wf.id, t), -INF, 0.0);
            b.le(at("tn.dpw", &wf.id, t), Expr::var(gam).add(at(nm::LAM, wf.bus, t), 1.0), wf.marginal_cost);
        }
        let mut angle: BTreeMap<usize, Expr> = tn
            .buses
            .iter()
            .filter(|&&k| k != tn.reference_bus)
            .map(|&k| (k, Expr::default()))
            .collect();
        for (l, key) in tn.lines.iter().zip(nm::tn_line_keys(tn)) {
            let zeta = b.free(at(nm::ZETA, &key, t));
            let lo = b.continuous(at(nm::DMIN, &key, t), 0.0, INF);
            let hi = b.continuous(at(nm::DMAX, &key, t), -INF, 0.0);
            b.eq(
                at("tn.dfl", &key, t),
                Expr::var(&zeta)
                    .add(lo, 1.0)
                    .add(hi, 1.0)
                    .add(at(nm::LAM, l.to, t), 1.0)
                    .add(at(nm::LAM, l.from, t), -1.0),
                0.0,
            );
            if let Some(e) = angle.get_mut(&l.from) {
                e.terms.push((zeta.clone(), -1.0 / l.reactance));
            }
            if let Some(e) = angle.get_mut(&l.to) {
                e.terms.push((zeta.clone(), 1.0 / l.reactance));
            }
        }
        for (k, e) in angle {
            b.eq(at("tn.dth", k, t), e, 0.0);
        }
        let psis = b.continuous(hour(nm::PSIS, t), 0.0, psi_max);
        let psib = b.continuous(hour(nm::PSIB, t), 0.0, psi_max);
        b.le(hour("tn.dsell", t), Expr::var(at(nm::LAM, c, t)).add(psis, -1.0), w.offer(t));
        b.le(hour("tn.dbuy", t), Expr::scaled(at(nm::LAM, c, t), -1.0).add(psib, -1.0), -w.bid(t));
    }
    b
}

/// Primal objective equals dual objective, hour by hour (the lower level
/// separates by hour, so this is equivalent to the summed equality).
pub fn build_strong_duality(tn: &TransNetwork, w: &ForecastWindow) -> Block {
    let mut b = Block::new("strong duality");
    for t in w.hours() {
        let mut e = ll_primal_objective(tn, w, t);
        let d = ll_dual_objective(tn, w, t);
        e.terms.extend(d.terms.into_iter().map(|(n, a)| (n, -a)));
        b.eq(hour(nm::STRONG_DUALITY, t), e, 0.0);
    }
    b
}

/// `|primal − dual|`, the strong-duality residual.
pub fn assert_strong_duality(primal: f64, dual: f64, tol: f64) -> f64 {
    let r = (primal - dual).abs();
    if r > tol * (1.0 + primal.abs()) {
        log::warn!("strong duality residual {r:.3e} (primal {primal}, dual {dual})");
    }
    r
}

/// The big-M in force: the user's value when it is provably valid, else an
/// error; the derived value `cap·Ψ` when none is given.
pub fn big_m(w: &ForecastWindow) -> Result<f64, ModelError> {
    let required = w.scenario.min_big_m();
    match w.scenario.options.big_m {
        Some(m) if m < required => Err(ModelError::BigM { given: m, required }),
        Some(m) => Ok(m),
        None => Ok(required),
    }
}

/// Linearizes `K = cap·U·ψ` for the buy (ψ̲) and sell (ψ̄) limits:
/// `−M(1−U) ≤ K − cap·ψ ≤ M(1−U)`, `−M·U ≤ K ≤ M·U`, plus the McCormick
/// bounds `0 ≤ K ≤ cap·ψ` and `K ≤ cap·Ψ·U` from `0 ≤ ψ ≤ Ψ`, which make the
/// relaxation independent of how loose M is.
pub fn linearize_exchange_revenue(w: &ForecastWindow) -> Result<Block, ModelError> {
    let m = big_m(w)?;
    let psi_max = w.scenario.exchange_dual_bound();
    let mut b = Block::new("linearization");
    for t in w.hours() {
        let cap = w.exchange_cap(t);
        let u = hour(nm::U, t);
        for (kname, psi) in [(nm::KB, nm::PSIB), (nm::KS, nm::PSIS)] {
            let hi = if cap > 0.0 { INF } else { 0.0 };
            let k = b.continuous(hour(kname, t), 0.0, hi);
            let psi = hour(psi, t);
            let tag = &kname[3..];
            b.le(hour(&format!("lin.{tag}.hi"), t), Expr::var(&k).add(&psi, -cap).add(&u, m), m);
            b.ge(hour(&format!("lin.{tag}.lo"), t), Expr::var(&k).add(&psi, -cap).add(&u, -m), -m);
            b.le(hour(&format!("lin.{tag}.on"), t), Expr::var(&k).add(&u, -m), 0.0);
            b.ge(hour(&format!("lin.{tag}.off"), t), Expr::var(&k).add(&u, m), 0.0);
            b.le(hour(&format!("lin.{tag}.mc"), t), Expr::var(&k).add(&psi, -cap), 0.0);
            b.le(hour(&format!("lin.{tag}.mcu"), t), Expr::var(&k).add(&u, -cap * psi_max), 0.0);
        }
    }
    Ok(b)
}

/// Merges the upper-level blocks with the lower level's primal, dual,
/// strong duality and linearization into one problem.
pub fn assemble_single_level(
    ul: Vec<Block>,
    primal: Block,
    dual: Block,
    strong_duality: Block,
    linearization: Block,
) -> Result<ProblemIR, ModelError> {
    let mut blocks = vec![primal, dual, strong_duality, linearization];
    blocks.extend(ul);
    Ok(assemble(&blocks)?)
}

/// A window's single-level model together with what produced it.
#[derive(Debug, Clone)]
pub struct WindowModel {
    pub start: usize,
    pub end: usize,
    pub ir: ProblemIR,
    pub big_m: f64,
    pub initial: InitialState,
}

pub fn build_window_model(w: &ForecastWindow, init: &InitialState) -> Result<WindowModel, ModelError> {
    let tn = &w.scenario.tn;
    let ul = dn::build_ul_blocks(w, init)?;
    let ir = assemble_single_level(
        ul,
        build_ll_primal(tn, w)?,
        build_ll_dual(tn, w),
        build_strong_duality(tn, w),
        linearize_exchange_revenue(w)?,
    )?;
    Ok(WindowModel {
        start: w.start,
        end: w.end,
        ir,
        big_m: big_m(w)?,
        initial: init.clone(),
    })
}

/// Which continuous pair decides a binary when rounding a relaxed point.
enum Rule {
    /// on iff `x[a] > tol`
    Positive(usize),
    /// on iff `x[a] >= x[b]`
    Dominates(usize, usize),
    /// on iff `x[a] > x[b] + tol`
    Exceeds(usize, usize),
}

impl WindowModel {
    /// Rounding that reads each binary off the continuous variables it gates:
    /// a DG is on when it produces, a hydrogen system or battery is in
    /// charging mode unless it discharges more than it charges, and the tie
    /// sells when the feeder exports more than it imports.
    pub fn rounding_hint(&self) -> impl Fn(&[f64]) -> Vec<(usize, f64)> + Sync {
        let ir = &self.ir;
        let id = |n: String| ir.var_id(&n);
        let mut rules = Vec::new();
        for j in ir.binaries() {
            let v = &ir.vars[j];
            if v.lower == v.upper {
                continue;
            }
            let base = v.name.split(['[', '@']).next().unwrap_or("");
            let swap = |from: &str, to: &str| format!("{to}{}", &v.name[from.len()..]);
            let rule = match base {
                nm::DG_X => id(swap(nm::DG_X, nm::DG_P)).map(Rule::Positive),
                nm::H2_MODE => id(swap(nm::H2_MODE, nm::H2_PEL))
                    .zip(id(swap(nm::H2_MODE, nm::H2_PFC)))
                    .map(|(a, b)| Rule::Dominates(a, b)),
                nm::BAT_MODE => id(swap(nm::BAT_MODE, nm::BAT_CH))
                    .zip(id(swap(nm::BAT_MODE, nm::BAT_DIS)))
                    .map(|(a, b)| Rule::Dominates(a, b)),
                nm::U => id(swap(nm::U, nm::SELL))
                    .zip(id(swap(nm::U, nm::BUY)))
                    .map(|(a, b)| Rule::Exceeds(a, b)),
                _ => None,
            };
            if let Some(r) = rule {
                rules.push((j, r));
            }
        }
        let signals = self.signal_groups();
        move |x: &[f64]| {
            let mut out: Vec<(usize, f64)> = rules
                .iter()
                .map(|(j, r)| {
                    let on = match *r {
                        Rule::Positive(a) => x[a] > 1e-4,
                        Rule::Dominates(a, b) => x[a] >= x[b],
                        Rule::Exceeds(a, b) => x[a] > x[b] + 1e-4,
                    };
                    (*j, on as u8 as f64)
                })
                .collect();
            for g in &signals {
                g.repair(x, &mut out);
            }
            out
        }
    }

    /// Demand-response rows as groups of (mode binary, power variable). A
    /// signal row is met only if enough units sit in the mode it asks for.
    fn signal_groups(&self) -> Vec<SignalGroup> {
        let ir = &self.ir;
        let mut groups = Vec::new();
        for row in &ir.rows {
            let base = row.name.split('@').next().unwrap_or("");
            let (power, mode_value) = match base {
                nm::CBDR_EL => (nm::H2_PEL, 1.0),
                nm::CBDR_FC => (nm::H2_PFC, 0.0),
                _ => continue,
            };
            let members = row
                .terms
                .iter()
                .filter_map(|&(p, _)| {
                    let name = &ir.vars[p].name;
                    let mode = ir.var_id(&format!("{}{}", nm::H2_MODE, &name[power.len()..]))?;
                    let free = ir.vars[mode].lower != ir.vars[mode].upper;
                    Some((mode, p, ir.vars[p].upper, free))
                })
                .collect();
            groups.push(SignalGroup {
                need: row.rhs,
                mode_value,
                members,
            });
        }
        groups
    }
}

struct SignalGroup {
    need: f64,
    mode_value: f64,
    /// (mode binary, power variable, power rating, binary is free)
    members: Vec<(usize, usize, f64, bool)>,
}

impl SignalGroup {
    /// Moves the units carrying the most signal power into the requested mode
    /// until their ratings cover the signal.
    fn repair(&self, x: &[f64], out: &mut [(usize, f64)]) {
        let value = |out: &[(usize, f64)], j: usize| out.iter().find(|o| o.0 == j).map(|o| o.1);
        let mut cover: f64 = self
            .members
            .iter()
            .filter(|m| !m.3 || value(out, m.0) == Some(self.mode_value))
            .map(|m| m.2)
            .sum();
        let mut order: Vec<_> = self.members.iter().filter(|m| m.3).collect();
        order.sort_by(|a, b| x[b.1].total_cmp(&x[a.1]).then(a.0.cmp(&b.0)));
        for m in order {
            if cover >= self.need - 1e-9 {
                break;
            }
            if let Some(o) = out.iter_mut().find(|o| o.0 == m.0) {
                if o.1 != self.mode_value {
                    o.1 = self.mode_value;
                    cover += m.2;
                }
            }
        }
    }
}

/// Evaluates a named expression at a primal point of `ir`.
pub fn eval_expr(ir: &ProblemIR, e: &Expr, x: &[f64]) -> Result<f64, ModelError> {
    let mut v = e.constant;
    for (n, a) in &e.terms {
        let j = ir.var_id(n).ok_or_else(|| ModelError::Missing(format!("variable {n}")))?;
        v += a * x[j];
    }
    Ok(v)
}
