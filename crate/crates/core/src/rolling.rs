//! Rolling-horizon driver: plan a lookahead window, keep its first hours,
//! hand the state at the cut to the next window.
//!
//! Windows only see what [`reveal_forecast`] reveals, so an outage is
//! unknown to every window that ends before it starts. `Mode::Perfect`
//! plans the whole horizon in one solve with every event known.

use std::time::Instant;

use log::info;
use misocp::{bnb, Extras, ProblemIR, Sense, SolveOptions, SolveResult, SolveStatus, VarKind};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::Scenario;
use crate::names::{self as nm, at};
use crate::solution::{DispatchSolution, HourRecord};
use crate::tn::{build_window_model, WindowModel};
use crate::window::{reveal_forecast, ForecastWindow, InitialState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rolling,
    Perfect,
}

#[derive(Debug, Clone)]
pub struct RollingOptions {
    pub window: usize,
    pub commit: usize,
    pub mode: Mode,
    pub solve: SolveOptions,
    /// binaries tried first in every window (read by name, so a schedule
    /// from another run works)
    pub warm_start: Option<DispatchSolution>,
}

impl Default for RollingOptions {
    fn default() -> Self {
        Self {
            window: 48,
            commit: 24,
            mode: Mode::Rolling,
            solve: SolveOptions {
                threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
                ..SolveOptions::default()
            },
            warm_start: None,
        }
    }
}

/// One line of the per-window solve log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLog {
    pub window: usize,
    pub start: usize,
    pub end: usize,
    pub commit_end: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub visible_events: usize,
    pub wall_seconds: f64,
}

/// What the next window inherits.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingState {
    /// first hour not yet committed
    pub hour_cursor: usize,
    pub initial: InitialState,
    pub committed: Vec<HourRecord>,
}

impl RollingState {
    pub fn new(s: &Scenario) -> Self {
        Self {
            hour_cursor: 1,
            initial: InitialState::from_scenario(s),
            committed: Vec::new(),
        }
    }

    /// Commits hours `[hour_cursor, upto]` of `sol` and reads the carried
    /// state at `upto` straight from the committed records.
    pub fn commit(&mut self, sol: &DispatchSolution, upto: usize) -> Result<(), ModelError> {
        let kept = sol.slice(self.hour_cursor, upto);
        let last = kept
            .last()
            .filter(|r| r.hour == upto)
            .ok_or_else(|| ModelError::Missing(format!("hour {upto} in the window solution")))?;
        let mut next = self.initial.clone();
        for (id, d) in &last.dg {
            next.dg_on.insert(id.clone(), d.status);
            next.dg_p.insert(id.clone(), d.p);
        }
        for (id, h) in &last.h2 {
            next.h2_mass.insert(id.clone(), h.mass);
        }
        for (id, b) in &last.battery {
            next.battery_soc.insert(id.clone(), b.soc);
        }
        self.initial = next;
        self.committed.extend(kept);
        self.hour_cursor = upto + 1;
        Ok(())
    }
}

/// A solved window with the model behind it (needed for duals and checks).
#[derive(Debug, Clone)]
pub struct WindowSolve {
    pub model: WindowModel,
    pub result: SolveResult,
    pub solution: DispatchSolution,
    pub log: WindowLog,
}

#[derive(Debug, Clone)]
pub struct RollingRun {
    pub mode: Mode,
    /// committed schedule over the horizon
    pub solution: DispatchSolution,
    pub windows: Vec<WindowSolve>,
    /// state handed to each window, in window order
    pub initial_states: Vec<InitialState>,
}

impl RollingRun {
    pub fn logs(&self) -> impl Iterator<Item = &WindowLog> {
        self.windows.iter().map(|w| &w.log)
    }

    /// Maps every window's schedule back onto its model and lists the
    /// residuals above `tol`, tagged with the window number.
    pub fn revalidate(&self, tol: f64) -> Result<Vec<(usize, misocp::Violation)>, ModelError> {
        let mut out = Vec::new();
        for w in &self.windows {
            for v in crate::solution::validate_solution(&w.solution, &w.model.ir, tol)? {
                out.push((w.log.window, v));
            }
        }
        Ok(out)
    }

    /// The window whose committed hours include `t`.
    pub fn window_of(&self, t: usize) -> Option<&WindowSolve> {
        self.windows.iter().find(|w| w.log.start <= t && t <= w.log.commit_end)
    }
}

fn start_assignment(ir: &ProblemIR, sol: &DispatchSolution) -> Vec<(usize, f64)> {
    ir.binaries()
        .into_iter()
        .filter_map(|j| sol.value_of(&ir.vars[j].name).map(|v| (j, v)))
        .collect()
}

/// Builds and solves one window.
pub fn solve_window(
    w: &ForecastWindow,
    init: &InitialState,
    solve: &SolveOptions,
    warm: Option<&DispatchSolution>,
    index: usize,
) -> Result<WindowSolve, ModelError> {
    let clock = Instant::now();
    let model = build_window_model(w, init)?;
    let hint = model.rounding_hint();
    let extras = Extras {
        hint: Some(&hint),
        start: warm.map(|s| start_assignment(&model.ir, s)),
    };
    let result = bnb::solve_with(&model.ir, solve, &extras)?;
    if !result.has_solution() {
        let detail = match result.status {
            SolveStatus::Infeasible => describe_infeasibility(&model.ir),
            _ => "no feasible schedule found before the limit".to_string(),
        };
        return Err(ModelError::WindowFailed {
            window: index,
            start: w.start,
            end: w.end,
            status: serde_json::to_value(result.status)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            detail,
        });
    }
    let solution = DispatchSolution::extract(w, &model.ir, &result)?;
    let log = WindowLog {
        window: index,
        start: w.start,
        end: w.end,
        commit_end: w.end,
        status: result.status,
        objective: result.objective,
        bound: result.bound,
        gap: result.gap,
        nodes: result.nodes,
        visible_events: w.events.len(),
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    Ok(WindowSolve {
        model,
        result,
        solution,
        log,
    })
}

/// Rows that need the largest elastic slack to make the continuous
/// relaxation feasible, or a note when the relaxation itself is feasible.
pub fn describe_infeasibility(ir: &ProblemIR) -> String {
    let mut el = ir.clone();
    el.objective = Default::default();
    let mut slacks = Vec::new();
    for i in 0..ir.rows.len() {
        let sense = ir.rows[i].sense;
        let dirs: &[f64] = match sense {
            Sense::Le => &[-1.0],
            Sense::Ge => &[1.0],
            Sense::Eq => &[1.0, -1.0],
        };
        for (k, &d) in dirs.iter().enumerate() {
            let Ok(j) = el.add_var(&format!("elastic#{i}#{k}"), VarKind::Continuous, 0.0, f64::INFINITY) else {
                continue;
            };
            el.rows[i].terms.push((j, d));
            el.objective.terms.push((j, 1.0));
            slacks.push((i, j));
        }
    }
    let relaxed = misocp::relax::Relaxation::of(&el).and_then(|r| r.solve(&misocp::ipm::IpmSettings::default()));
    let res = match relaxed {
        Ok(r) if r.status == misocp::relax::RelaxStatus::Optimal => r,
        _ => return "elastic relaxation did not solve".to_string(),
    };
    let mut viol: Vec<(f64, &str)> = slacks
        .iter()
        .filter(|&&(_, j)| res.x[j] > 1e-6)
        .map(|&(i, j)| (res.x[j], ir.rows[i].name.as_str()))
        .collect();
    if viol.is_empty() {
        return "continuous relaxation is feasible; no binary assignment is".to_string();
    }
    viol.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let list: Vec<String> = viol.iter().take(12).map(|(v, n)| format!("{n} (+{v:.4})")).collect();
    format!("violated rows: {}", list.join(", "))
}

fn worst_status(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    let rank = |s: SolveStatus| match s {
        SolveStatus::Optimal => 0,
        SolveStatus::GapLimit => 1,
        SolveStatus::NodeLimit => 2,
        SolveStatus::TimeLimit => 3,
        SolveStatus::Infeasible => 4,
        SolveStatus::Unbounded => 5,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// Runs the scenario window by window (or in one piece for `Mode::Perfect`)
/// and returns the committed schedule.
pub fn run_rolling(s: &Scenario, opts: &RollingOptions) -> Result<RollingRun, ModelError> {
    let h = s.horizon();
    if h == 0 {
        return Err(ModelError::Invalid("empty horizon".into()));
    }
    let (window, commit) = match opts.mode {
        Mode::Rolling => (opts.window, opts.commit),
        Mode::Perfect => (h, h),
    };
    if commit == 0 || window < commit {
        return Err(ModelError::Invalid(format!(
            "window {window} must be at least the commit step {commit} > 0"
        )));
    }
    let mut state = RollingState::new(s);
    let mut windows = Vec::new();
    let mut initial_states = Vec::new();
    let mut status = SolveStatus::Optimal;
    let mut gap: f64 = 0.0;
    while state.hour_cursor <= h {
        let start = state.hour_cursor;
        let w = reveal_forecast(s, start, window);
        let index = windows.len() + 1;
        let mut solved = solve_window(&w, &state.initial, &opts.solve, opts.warm_start.as_ref(), index)?;
        let upto = (start + commit - 1).min(h);
        solved.log.commit_end = upto;
        info!("{}", serde_json::to_string(&solved.log).unwrap_or_default());
        initial_states.push(state.initial.clone());
        state.commit(&solved.solution, upto)?;
        status = worst_status(status, solved.log.status);
        gap = gap.max(solved.log.gap);
        windows.push(solved);
    }
    let objective = state.committed.iter().map(|r| r.cost).sum();
    Ok(RollingRun {
        mode: opts.mode,
        solution: DispatchSolution {
            hours: state.committed,
            objective,
            mip_gap: gap,
            status,
        },
        windows,
        initial_states,
    })
}

/// The state a schedule leaves behind at the end of hour `t`.
pub fn state_after(s: &Scenario, sol: &DispatchSolution, t: usize) -> Option<InitialState> {
    let mut st = InitialState::from_scenario(s);
    for d in &s.fleet.dgs {
        st.dg_on.insert(d.id.clone(), sol.value_of(&at(nm::DG_X, &d.id, t))? > 0.5);
        st.dg_p.insert(d.id.clone(), sol.value_of(&at(nm::DG_P, &d.id, t))?);
    }
    for x in &s.fleet.h2 {
        st.h2_mass.insert(x.id.clone(), sol.value_of(&at(nm::H2_MOH, &x.id, t))?);
    }
    for b in &s.fleet.batteries {
        st.battery_soc.insert(b.id.clone(), sol.value_of(&at(nm::BAT_SOC, &b.id, t))?);
    }
    Some(st)
}
