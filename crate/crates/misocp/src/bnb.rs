//! Best-bound branch-and-bound over continuous conic relaxations.
//!
//! Nodes are expanded in fixed-size batches whose composition does not depend
//! on the worker count; child relaxations inside a batch may be solved in
//! parallel but are always accounted for in creation order, so incumbents
//! and traces are identical for any number of threads.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::ipm::IpmSettings;
use crate::ir::{ProblemIR, VarId, VarKind};
use crate::relax::{RelaxResult, RelaxStatus, Relaxation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    NodeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// relative gap `(objective − bound) / max(1, |objective|)`
    pub gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub threads: usize,
    /// nodes expanded per batch; fixed so results do not depend on `threads`
    pub batch: usize,
    pub int_tol: f64,
    /// run the rounding heuristic on every k-th solved node
    pub heuristic_every: usize,
    pub node_ipm: IpmSettings,
    pub final_ipm: IpmSettings,
    pub keep_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap: 1e-3,
            time_limit: None,
            node_limit: 100_000,
            threads: 1,
            batch: 4,
            int_tol: 1e-5,
            heuristic_every: 8,
            node_ipm: IpmSettings {
                feastol: 1e-8,
                abstol: 1e-8,
                reltol: 1e-8,
                ..IpmSettings::default()
            },
            final_ipm: IpmSettings::default(),
            keep_trace: false,
        }
    }
}

/// Proposes values for some binaries given a relaxation point.
pub type RoundingHint<'a> = &'a (dyn Fn(&[f64]) -> Vec<(VarId, f64)> + Sync);

#[derive(Default)]
pub struct Extras<'a> {
    pub hint: Option<RoundingHint<'a>>,
    /// binary assignment tried before branching
    pub start: Option<Vec<(VarId, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// objective of the node relaxation as solved
    pub relaxation: f64,
    /// bound used for the node (never below the parent's)
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub primal: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub cone_duals: Vec<Vec<f64>>,
    pub bound_duals: Vec<(f64, f64)>,
    pub nodes: usize,
    pub trace: Vec<NodeRecord>,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        !self.primal.is_empty() && self.objective.is_finite()
    }

    /// The continuous solve behind the incumbent, for dual queries.
    pub fn as_relaxation(&self) -> RelaxResult {
        RelaxResult {
            status: RelaxStatus::Optimal,
            objective: self.objective,
            x: self.primal.clone(),
            row_duals: self.row_duals.clone(),
            cone_duals: self.cone_duals.clone(),
            bound_duals: self.bound_duals.clone(),
            iterations: 0,
        }
    }
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    fixings: Vec<(VarId, f64)>,
    branch: VarId,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // max-heap: smaller bound first, then older node first
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.id.cmp(&self.id))
    }
}

struct Search<'a> {
    ir: &'a ProblemIR,
    opts: &'a SolveOptions,
    extras: &'a Extras<'a>,
    binaries: Vec<VarId>,
    base_lo: Vec<f64>,
    base_hi: Vec<f64>,
    incumbent: Option<RelaxResult>,
    tried: HashSet<Vec<u8>>,
    trace: Vec<NodeRecord>,
    solved: usize,
}

impl<'a> Search<'a> {
    fn bounds_with(&self, fixings: &[(VarId, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.base_lo.clone();
        let mut hi = self.base_hi.clone();
        for &(j, v) in fixings {
            lo[j] = v;
            hi[j] = v;
        }
        (lo, hi)
    }

    fn solve_with(&self, fixings: &[(VarId, f64)], settings: &IpmSettings) -> Result<RelaxResult, SolverError> {
        let (lo, hi) = self.bounds_with(fixings);
        Relaxation::new(self.ir, &lo, &hi)?.solve(settings)
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |r| r.objective)
    }

    fn prunable(&self, bound: f64) -> bool {
        let inc = self.incumbent_value();
        inc.is_finite() && bound >= inc - self.opts.gap * inc.abs().max(1.0)
    }

    /// Fixes every binary to `assign` (0/1 per binary, in `binaries` order)
    /// and keeps the solve if it improves the incumbent.
    fn try_assignment(&mut self, assign: Vec<u8>) -> Result<(), SolverError> {
        if !self.tried.insert(assign.clone()) {
            return Ok(());
        }
        let fix: Vec<(VarId, f64)> = self.binaries.iter().zip(&assign).map(|(&j, &v)| (j, v as f64)).collect();
        // respect IR-level fixings of binaries
        if fix.iter().any(|&(j, v)| v < self.base_lo[j] || v > self.base_hi[j]) {
            return Ok(());
        }
        let r = self.solve_with(&fix, &self.opts.final_ipm)?;
        if r.status == RelaxStatus::Optimal && r.objective < self.incumbent_value() {
            debug!("incumbent {:.6}", r.objective);
            self.incumbent = Some(r);
        }
        Ok(())
    }

    fn rounded(&self, x: &[f64], hint: bool) -> Vec<u8> {
        let mut v: Vec<u8> = self.binaries.iter().map(|&j| (x[j] >= 0.5) as u8).collect();
        if hint {
            if let Some(h) = self.extras.hint {
                for (j, val) in h(x) {
                    if let Ok(k) = self.binaries.binary_search(&j) {
                        v[k] = (val >= 0.5) as u8;
                    }
                }
            }
        }
        v
    }

    fn heuristics(&mut self, x: &[f64]) -> Result<(), SolverError> {
        let near = self.rounded(x, false);
        self.try_assignment(near)?;
        if self.extras.hint.is_some() {
            let hinted = self.rounded(x, true);
            self.try_assignment(hinted)?;
        }
        Ok(())
    }

    /// Most fractional free binary, ties to the lowest id.
    fn branching_var(&self, x: &[f64], fixings: &[(VarId, f64)]) -> Option<VarId> {
        let mut best: Option<(f64, VarId)> = None;
        for &j in &self.binaries {
            if self.base_lo[j] == self.base_hi[j] || fixings.iter().any(|f| f.0 == j) {
                continue;
            }
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac > self.opts.int_tol && best.map_or(true, |(b, _)| frac > b + 1e-12) {
                best = Some((frac, j));
            }
        }
        best.map(|b| b.1)
    }

    fn first_free(&self, fixings: &[(VarId, f64)]) -> Option<VarId> {
        self.binaries
            .iter()
            .copied()
            .find(|&j| self.base_lo[j] != self.base_hi[j] && !fixings.iter().any(|f| f.0 == j))
    }
}

pub fn solve(ir: &ProblemIR, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    solve_with(ir, opts, &Extras::default())
}

pub fn solve_with(ir: &ProblemIR, opts: &SolveOptions, extras: &Extras) -> Result<SolveResult, SolverError> {
    ir.check()?;
    let started = Instant::now();
    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| SolverError::InvalidProblem(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut search = Search {
        ir,
        opts,
        extras,
        binaries: ir.binaries(),
        base_lo: ir.vars.iter().map(|v| v.lower).collect(),
        base_hi: ir.vars.iter().map(|v| v.upper).collect(),
        incumbent: None,
        tried: HashSet::new(),
        trace: Vec::new(),
        solved: 0,
    };

    let root = search.solve_with(&[], &opts.node_ipm)?;
    search.solved += 1;
    match root.status {
        RelaxStatus::Infeasible => return Ok(empty_result(SolveStatus::Infeasible, 1)),
        RelaxStatus::Unbounded => return Ok(empty_result(SolveStatus::Unbounded, 1)),
        RelaxStatus::Failed => {
            return Err(SolverError::Factorization("root relaxation did not converge".into()));
        }
        RelaxStatus::Optimal => {}
    }
    if opts.keep_trace {
        search.trace.push(NodeRecord {
            id: 0,
            parent: None,
            depth: 0,
            relaxation: root.objective,
            bound: root.objective,
        });
    }
    if let Some(start) = &extras.start {
        let mut assign = search.rounded(&root.x, false);
        for &(j, v) in start {
            if let Ok(k) = search.binaries.binary_search(&j) {
                assign[k] = (v >= 0.5) as u8;
            }
        }
        search.try_assignment(assign)?;
    }
    let mut queue = BinaryHeap::new();
    let mut next_id = 1;
    let mut gap_pruned = f64::INFINITY;
    match search.branching_var(&root.x, &[]) {
        None => {
            // integral relaxation: polish with the tight settings
            let assign = search.rounded(&root.x, false);
            search.try_assignment(assign)?;
            if search.incumbent.is_none() {
                search.incumbent = Some(root.clone());
            }
        }
        Some(branch) => {
            search.heuristics(&root.x)?;
            queue.push(Node {
                id: 0,
                depth: 0,
                bound: root.objective,
                fixings: Vec::new(),
                branch,
            });
        }
    }

    let mut status = None;
    let mut nodes = 1usize;
    loop {
        // global bound over open and gap-pruned nodes
        let open_min = queue.peek().map_or(f64::INFINITY, |n| n.bound);
        let bound = open_min.min(gap_pruned);
        if queue.is_empty() || (search.incumbent.is_some() && relative_gap(search.incumbent_value(), bound) <= opts.gap) {
            break;
        }
        if let Some(limit) = opts.time_limit {
            if started.elapsed() >= limit {
                status = Some(SolveStatus::TimeLimit);
                break;
            }
        }
        if nodes >= opts.node_limit {
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        let mut batch = Vec::new();
        while batch.len() < opts.batch {
            match queue.pop() {
                Some(n) if search.prunable(n.bound) => gap_pruned = gap_pruned.min(n.bound),
                Some(n) => batch.push(n),
                None => break,
            }
        }
        if batch.is_empty() {
            continue;
        }
        // children in creation order: (parent, value) with value 0 then 1
        let children: Vec<(usize, Vec<(VarId, f64)>, usize)> = batch
            .iter()
            .enumerate()
            .flat_map(|(bi, n)| {
                [0.0, 1.0].into_iter().map(move |v| {
                    let mut f = n.fixings.clone();
                    f.push((n.branch, v));
                    (bi, f, n.depth + 1)
                })
            })
            .collect();
        let run = |c: &(usize, Vec<(VarId, f64)>, usize)| search.solve_with(&c.1, &opts.node_ipm);
        let results: Vec<Result<RelaxResult, SolverError>> = match &pool {
            Some(p) => p.install(|| children.par_iter().map(run).collect()),
            None => children.iter().map(run).collect(),
        };
        for ((bi, fixings, depth), res) in children.into_iter().zip(results) {
            let res = res?;
            let parent = &batch[bi];
            let id = next_id;
            next_id += 1;
            nodes += 1;
            search.solved += 1;
            match res.status {
                RelaxStatus::Infeasible => {
                    if opts.keep_trace {
                        search.trace.push(NodeRecord {
                            id,
                            parent: Some(parent.id),
                            depth,
                            relaxation: f64::INFINITY,
                            bound: f64::INFINITY,
                        });
                    }
                }
                RelaxStatus::Unbounded => return Ok(empty_result(SolveStatus::Unbounded, nodes)),
                RelaxStatus::Failed => {
                    warn!("node {id}: relaxation failed, branching blindly");
                    if let Some(branch) = search.first_free(&fixings) {
                        queue.push(Node {
                            id,
                            depth,
                            bound: parent.bound,
                            fixings,
                            branch,
                        });
                    }
                }
                RelaxStatus::Optimal => {
                    let bound = res.objective.max(parent.bound);
                    if opts.keep_trace {
                        search.trace.push(NodeRecord {
                            id,
                            parent: Some(parent.id),
                            depth,
                            relaxation: res.objective,
                            bound,
                        });
                    }
                    if search.prunable(bound) {
                        gap_pruned = gap_pruned.min(bound);
                        continue;
                    }
                    match search.branching_var(&res.x, &fixings) {
                        None => {
                            let assign = search.rounded(&res.x, false);
                            search.try_assignment(assign)?;
                        }
                        Some(branch) => {
                            if search.solved % opts.heuristic_every.max(1) == 0 {
                                search.heuristics(&res.x)?;
                            }
                            queue.push(Node {
                                id,
                                depth,
                                bound,
                                fixings,
                                branch,
                            });
                        }
                    }
                }
            }
        }
    }

    let open_min = queue.peek().map_or(f64::INFINITY, |n| n.bound);
    let Some(inc) = search.incumbent.take() else {
        let st = status.unwrap_or(SolveStatus::Infeasible);
        let mut r = empty_result(st, nodes);
        r.bound = open_min.min(gap_pruned);
        r.trace = search.trace;
        return Ok(r);
    };
    let bound = open_min.min(gap_pruned).min(inc.objective);
    let gap = relative_gap(inc.objective, bound);
    let status = status.unwrap_or(if gap <= 1e-6 { SolveStatus::Optimal } else { SolveStatus::GapLimit });
    Ok(SolveResult {
        status,
        objective: inc.objective,
        bound,
        gap,
        primal: inc.x,
        row_duals: inc.row_duals,
        cone_duals: inc.cone_duals,
        bound_duals: inc.bound_duals,
        nodes,
        trace: search.trace,
    })
}

fn empty_result(status: SolveStatus, nodes: usize) -> SolveResult {
    SolveResult {
        status,
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        gap: f64::INFINITY,
        primal: Vec::new(),
        row_duals: Vec::new(),
        cone_duals: Vec::new(),
        bound_duals: Vec::new(),
        nodes,
        trace: Vec::new(),
    }
}

/// Fixes every binary to the given value and solves the remaining conic
/// program with tight tolerances; duals are exact for that program.
pub fn fix_binaries_and_resolve(
    ir: &ProblemIR,
    assignment: &[(VarId, f64)],
    settings: &IpmSettings,
) -> Result<SolveResult, SolverError> {
    ir.check()?;
    let mut lo: Vec<f64> = ir.vars.iter().map(|v| v.lower).collect();
    let mut hi: Vec<f64> = ir.vars.iter().map(|v| v.upper).collect();
    for (j, v) in ir.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let val = assignment
            .iter()
            .find(|a| a.0 == j)
            .map(|a| a.1)
            .ok_or_else(|| SolverError::IncompleteAssignment(v.name.clone()))?;
        lo[j] = val.round();
        hi[j] = val.round();
    }
    let r = Relaxation::new(ir, &lo, &hi)?.solve(settings)?;
    Ok(match r.status {
        RelaxStatus::Optimal => SolveResult {
            status: SolveStatus::Optimal,
            objective: r.objective,
            bound: r.objective,
            gap: 0.0,
            primal: r.x,
            row_duals: r.row_duals,
            cone_duals: r.cone_duals,
            bound_duals: r.bound_duals,
            nodes: 1,
            trace: Vec::new(),
        },
        RelaxStatus::Infeasible => empty_result(SolveStatus::Infeasible, 1),
        RelaxStatus::Unbounded => empty_result(SolveStatus::Unbounded, 1),
        RelaxStatus::Failed => return Err(SolverError::Factorization("fixed-binary solve did not converge".into())),
    })
}

/// Binary assignment of a solution vector.
pub fn binary_assignment(ir: &ProblemIR, x: &[f64]) -> Vec<(VarId, f64)> {
    ir.binaries().into_iter().map(|j| (j, x[j].round())).collect()
}
