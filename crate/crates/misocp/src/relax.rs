//! Continuous relaxation of a [`ProblemIR`] in the standard conic form used
//! by the interior-point solver, and mapping of the results back.
//!
//! Variables with equal lower and upper bounds are substituted out, which is
//! how branching decisions and binary fixings reach the relaxation.
//!
//! Dual values are returned as shadow prices: the derivative of the optimal
//! objective with respect to a row's right-hand side (or a bound). With that
//! convention stationarity reads, for every free variable `j`,
//!
//! ```text
//! c_j = Σ_rows a_ij·π_i + Σ_cones Σ_k g_kj·z_k + π_lo_j + π_hi_j
//! ```
//!
//! where `g_kj` are the coefficients of the standard cone components
//! returned by [`cone_components`].

use crate::cones::ConeSpec;
use crate::error::SolverError;
use crate::ipm::{self, ConicProblem, IpmSettings, IpmStatus};
use crate::ir::{Cone, ConeForm, LinExpr, ProblemIR, Sense, VarId};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Failed,
}

#[derive(Debug, Clone)]
pub struct RelaxResult {
    pub status: RelaxStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// shadow price per IR row (0 for rows eliminated by fixings)
    pub row_duals: Vec<f64>,
    /// dual vector per IR cone in standard component order (empty if dropped)
    pub cone_duals: Vec<Vec<f64>>,
    /// shadow prices of the lower and upper variable bounds
    pub bound_duals: Vec<(f64, f64)>,
    pub iterations: usize,
}

impl RelaxResult {
    fn without_solution(status: RelaxStatus, n: usize, rows: usize, cones: usize) -> Self {
        Self {
            status,
            objective: if status == RelaxStatus::Infeasible { f64::INFINITY } else { f64::NAN },
            x: vec![f64::NAN; n],
            row_duals: vec![0.0; rows],
            cone_duals: vec![Vec::new(); cones],
            bound_duals: vec![(0.0, 0.0); n],
            iterations: 0,
        }
    }
}

/// Standard cone components: `(r, v)` for a norm cone and
/// `(s + t, s − t, 2v)` for a rotated cone; each lies in a second-order cone.
pub fn cone_components(cone: &Cone) -> Vec<LinExpr> {
    match &cone.form {
        ConeForm::Norm { r } => {
            let mut out = vec![r.clone()];
            out.extend(cone.v.iter().cloned());
            out
        }
        ConeForm::Rotated { s, t } => {
            let mut sum = s.clone();
            let mut diff = s.clone();
            sum.constant += t.constant;
            diff.constant -= t.constant;
            sum.terms.extend(t.terms.iter().cloned());
            diff.terms.extend(t.terms.iter().map(|&(j, a)| (j, -a)));
            let mut out = vec![sum, diff];
            out.extend(cone.v.iter().map(|e| LinExpr {
                terms: e.terms.iter().map(|&(j, a)| (j, 2.0 * a)).collect(),
                constant: 2.0 * e.constant,
            }));
            out
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RowSlot {
    Dropped,
    Eq(usize),
    Le(usize),
    Ge(usize),
}

/// Relaxation of an IR under (possibly tightened) variable bounds.
pub struct Relaxation<'a> {
    ir: &'a ProblemIR,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cols: Vec<VarId>,
    col_of: Vec<Option<usize>>,
    /// values of substituted variables
    fixed_value: Vec<f64>,
    prob: ConicProblem,
    offset: f64,
    rows: Vec<RowSlot>,
    cone_slots: Vec<Option<(usize, usize)>>,
    bound_slots: Vec<(Option<usize>, Option<usize>)>,
    trivial: Option<RelaxStatus>,
}

const FEAS_TOL: f64 = 1e-9;

impl<'a> Relaxation<'a> {
    pub fn new(ir: &'a ProblemIR, lower: &[f64], upper: &[f64]) -> Result<Self, SolverError> {
        let n = ir.vars.len();
        if lower.len() != n || upper.len() != n {
            return Err(SolverError::Dimension {
                expected: n,
                got: lower.len().min(upper.len()),
            });
        }
        let mut trivial = None;
        let mut is_fixed = vec![false; n];
        let mut fixed_value = vec![0.0; n];
        for j in 0..n {
            if lower[j] > upper[j] + FEAS_TOL {
                trivial = Some(RelaxStatus::Infeasible);
            }
            if upper[j] - lower[j] <= 0.0 {
                is_fixed[j] = true;
                fixed_value[j] = lower[j];
            }
        }
        // columns referenced anywhere
        let mut used = vec![false; n];
        for r in &ir.rows {
            for &(j, a) in &r.terms {
                if a != 0.0 {
                    used[j] = true;
                }
            }
        }
        for c in &ir.cones {
            for e in c.exprs() {
                for &(j, a) in &e.terms {
                    if a != 0.0 {
                        used[j] = true;
                    }
                }
            }
        }
        let mut cobj = vec![0.0; n];
        for &(j, a) in &ir.objective.terms {
            cobj[j] += a;
        }
        let mut cols = Vec::new();
        let mut col_of = vec![None; n];
        for j in 0..n {
            if is_fixed[j] {
                continue;
            }
            let bounded = lower[j].is_finite() || upper[j].is_finite();
            if !used[j] && !bounded {
                if cobj[j] != 0.0 {
                    trivial.get_or_insert(RelaxStatus::Unbounded);
                }
                is_fixed[j] = true;
                fixed_value[j] = 0.0;
                continue;
            }
            col_of[j] = Some(cols.len());
            cols.push(j);
        }
        let nc = cols.len();

        let mut offset = ir.objective.constant;
        let mut c = vec![0.0; nc];
        for j in 0..n {
            match col_of[j] {
                Some(k) => c[k] = cobj[j],
                None => offset += cobj[j] * fixed_value[j],
            }
        }

        let mut a_trip = Vec::new();
        let mut b = Vec::new();
        let mut g_trip = Vec::new();
        let mut h = Vec::new();
        let mut rows = Vec::with_capacity(ir.rows.len());
        for r in &ir.rows {
            let mut rhs = r.rhs;
            let mut free = Vec::new();
            for &(j, a) in &r.terms {
                match col_of[j] {
                    Some(k) if a != 0.0 => free.push((k, a)),
                    Some(_) => {}
                    None => rhs -= a * fixed_value[j],
                }
            }
            if free.is_empty() {
                let tol = FEAS_TOL * (1.0 + r.rhs.abs());
                let bad = match r.sense {
                    Sense::Le => rhs < -tol,
                    Sense::Ge => rhs > tol,
                    Sense::Eq => rhs.abs() > tol,
                };
                if bad {
                    trivial = Some(RelaxStatus::Infeasible);
                }
                rows.push(RowSlot::Dropped);
                continue;
            }
            match r.sense {
                Sense::Eq => {
                    let i = b.len();
                    a_trip.extend(free.iter().map(|&(k, a)| (i, k, a)));
                    b.push(rhs);
                    rows.push(RowSlot::Eq(i));
                }
                Sense::Le => {
                    let i = h.len();
                    g_trip.extend(free.iter().map(|&(k, a)| (i, k, a)));
                    h.push(rhs);
                    rows.push(RowSlot::Le(i));
                }
                Sense::Ge => {
                    let i = h.len();
                    g_trip.extend(free.iter().map(|&(k, a)| (i, k, -a)));
                    h.push(-rhs);
                    rows.push(RowSlot::Ge(i));
                }
            }
        }
        let mut bound_slots = vec![(None, None); n];
        for (k, &j) in cols.iter().enumerate() {
            if lower[j].is_finite() {
                let i = h.len();
                g_trip.push((i, k, -1.0));
                h.push(-lower[j]);
                bound_slots[j].0 = Some(i);
            }
            if upper[j].is_finite() {
                let i = h.len();
                g_trip.push((i, k, 1.0));
                h.push(upper[j]);
                bound_slots[j].1 = Some(i);
            }
        }
        let nonneg = h.len();
        let mut soc = Vec::new();
        let mut cone_slots = vec![None; ir.cones.len()];
        for (ci, cone) in ir.cones.iter().enumerate() {
            let comps = cone_components(cone);
            // substitute fixed variables
            let mut reduced: Vec<(Vec<(usize, f64)>, f64)> = Vec::with_capacity(comps.len());
            for e in &comps {
                let mut cst = e.constant;
                let mut free = Vec::new();
                for &(j, a) in &e.terms {
                    match col_of[j] {
                        Some(k) if a != 0.0 => free.push((k, a)),
                        Some(_) => {}
                        None => cst += a * fixed_value[j],
                    }
                }
                reduced.push((free, cst));
            }
            if reduced.iter().all(|(f, _)| f.is_empty()) {
                let head = reduced[0].1;
                let tail: f64 = reduced[1..].iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if tail - head > FEAS_TOL * (1.0 + head.abs()) {
                    trivial = Some(RelaxStatus::Infeasible);
                }
                continue;
            }
            let off = h.len();
            for (k, (free, cst)) in reduced.iter().enumerate() {
                // s_k = e(x) = Σ a x + cst  ⇒  -a x + s = cst
                g_trip.extend(free.iter().map(|&(col, a)| (off + k, col, -a)));
                h.push(*cst);
            }
            soc.push(reduced.len());
            cone_slots[ci] = Some((off, reduced.len()));
        }
        let prob = ConicProblem {
            a: CscMatrix::from_triplets(b.len(), nc, &a_trip),
            g: CscMatrix::from_triplets(h.len(), nc, &g_trip),
            c,
            b,
            h,
            cones: ConeSpec { nonneg, soc },
        };
        Ok(Self {
            ir,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cols,
            col_of,
            fixed_value,
            prob,
            offset,
            rows,
            cone_slots,
            bound_slots,
            trivial,
        })
    }

    /// Relaxation at the IR's own bounds.
    pub fn of(ir: &'a ProblemIR) -> Result<Self, SolverError> {
        let lo: Vec<f64> = ir.vars.iter().map(|v| v.lower).collect();
        let hi: Vec<f64> = ir.vars.iter().map(|v| v.upper).collect();
        Self::new(ir, &lo, &hi)
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len()
    }

    pub fn conic(&self) -> &ConicProblem {
        &self.prob
    }

    pub fn solve(&self, settings: &IpmSettings) -> Result<RelaxResult, SolverError> {
        let ir = self.ir;
        let n = ir.vars.len();
        if let Some(st) = self.trivial {
            return Ok(RelaxResult::without_solution(st, n, ir.rows.len(), ir.cones.len()));
        }
        let mut x = self.fixed_value.clone();
        if self.cols.is_empty() {
            return Ok(RelaxResult {
                status: RelaxStatus::Optimal,
                objective: ir.objective_value(&x),
                x,
                row_duals: vec![0.0; ir.rows.len()],
                cone_duals: vec![Vec::new(); ir.cones.len()],
                bound_duals: vec![(0.0, 0.0); n],
                iterations: 0,
            });
        }
        let sol = ipm::solve(&self.prob, settings)?;
        let status = match sol.status {
            IpmStatus::Solved | IpmStatus::AlmostSolved => RelaxStatus::Optimal,
            IpmStatus::PrimalInfeasible => RelaxStatus::Infeasible,
            IpmStatus::DualInfeasible => RelaxStatus::Unbounded,
            IpmStatus::MaxIterations | IpmStatus::NumericalError => RelaxStatus::Failed,
        };
        if status != RelaxStatus::Optimal {
            let mut r = RelaxResult::without_solution(status, n, ir.rows.len(), ir.cones.len());
            r.iterations = sol.iterations;
            return Ok(r);
        }
        for (k, &j) in self.cols.iter().enumerate() {
            // clip tiny bound excursions left by the interior-point tolerance
            x[j] = sol.x[k].clamp(self.lower[j], self.upper[j]);
        }
        let row_duals = self
            .rows
            .iter()
            .map(|slot| match *slot {
                RowSlot::Dropped => 0.0,
                RowSlot::Eq(i) => -sol.y[i],
                RowSlot::Le(i) => -sol.z[i],
                RowSlot::Ge(i) => sol.z[i],
            })
            .collect();
        let cone_duals = self
            .cone_slots
            .iter()
            .map(|slot| match *slot {
                Some((off, q)) => sol.z[off..off + q].to_vec(),
                None => Vec::new(),
            })
            .collect();
        let bound_duals = self
            .bound_slots
            .iter()
            .map(|&(lo, hi)| (lo.map_or(0.0, |i| sol.z[i]), hi.map_or(0.0, |i| -sol.z[i])))
            .collect();
        Ok(RelaxResult {
            status,
            objective: sol.pcost + self.offset,
            x,
            row_duals,
            cone_duals,
            bound_duals,
            iterations: sol.iterations,
        })
    }

    pub fn is_free(&self, j: VarId) -> bool {
        self.col_of[j].is_some()
    }
}

/// Stationarity contribution of cone `ci` to variable `j`: `Σ_k g_kj·z_k`.
pub fn cone_contribution(ir: &ProblemIR, res: &RelaxResult, ci: usize, j: VarId) -> f64 {
    let z = &res.cone_duals[ci];
    if z.is_empty() {
        return 0.0;
    }
    cone_components(&ir.cones[ci])
        .iter()
        .zip(z)
        .map(|(e, zk)| e.terms.iter().filter(|t| t.0 == j).map(|t| t.1).sum::<f64>() * zk)
        .sum()
}
