//! Solver-agnostic mixed-integer conic problem representation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `Σ coef·x + constant`
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(id: VarId) -> Self {
        Self {
            terms: vec![(id, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConeForm {
    /// `‖v‖ ≤ r`
    Norm { r: LinExpr },
    /// `‖v‖² ≤ s·t` with `s, t ≥ 0`
    Rotated { s: LinExpr, t: LinExpr },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub name: String,
    pub v: Vec<LinExpr>,
    pub form: ConeForm,
}

impl Cone {
    /// Positive when violated; measured in the units of the norm.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let vv: f64 = self.v.iter().map(|e| e.eval(x).powi(2)).sum();
        match &self.form {
            ConeForm::Norm { r } => (vv.sqrt() - r.eval(x)).max(0.0),
            ConeForm::Rotated { s, t } => {
                let (s, t) = (s.eval(x), t.eval(x));
                // ‖(s - t, 2v)‖ ≤ s + t is the equivalent norm form
                let lhs = ((s - t).powi(2) + 4.0 * vv).sqrt();
                ((lhs - (s + t)) / 2.0).max(0.0).max(-s).max(-t)
            }
        }
    }

    /// Every expression of the cone, head first.
    pub fn exprs(&self) -> Vec<&LinExpr> {
        let mut out: Vec<&LinExpr> = match &self.form {
            ConeForm::Norm { r } => vec![r],
            ConeForm::Rotated { s, t } => vec![s, t],
        };
        out.extend(self.v.iter());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    Bound,
    Integrality,
    Row,
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub name: String,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProblemIR {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub cones: Vec<Cone>,
    pub objective: LinExpr,
    #[serde(skip)]
    var_index: HashMap<String, VarId>,
    #[serde(skip)]
    row_index: HashMap<String, usize>,
}

impl ProblemIR {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind, lower: f64, upper: f64) -> Result<VarId, SolverError> {
        if self.var_index.contains_key(name) {
            return Err(SolverError::NameCollision(name.to_string()));
        }
        let id = self.vars.len();
        self.vars.push(Variable {
            name: name.to_string(),
            kind,
            lower,
            upper,
        });
        self.var_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_row(&mut self, name: &str, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Result<usize, SolverError> {
        if self.row_index.contains_key(name) {
            return Err(SolverError::NameCollision(name.to_string()));
        }
        let id = self.rows.len();
        self.rows.push(Row {
            name: name.to_string(),
            terms,
            sense,
            rhs,
        });
        self.row_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_cone(&mut self, cone: Cone) -> usize {
        self.cones.push(cone);
        self.cones.len() - 1
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn row_id(&self, name: &str) -> Option<usize> {
        self.row_index.get(name).copied()
    }

    /// Rebuilds the name lookups (needed after deserialization).
    pub fn reindex(&mut self) {
        self.var_index = self.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        self.row_index = self.rows.iter().enumerate().map(|(i, r)| (r.name.clone(), i)).collect();
    }

    pub fn binaries(&self) -> Vec<VarId> {
        (0..self.vars.len()).filter(|&j| self.vars[j].kind == VarKind::Binary).collect()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Checks structural invariants.
    pub fn check(&self) -> Result<(), SolverError> {
        let n = self.vars.len();
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolverError::InvalidProblem(format!("bad bounds on `{}`", v.name)));
            }
            if v.kind == VarKind::Binary && !(v.lower >= 0.0 && v.upper <= 1.0) {
                return Err(SolverError::InvalidProblem(format!("binary `{}` bounds outside [0,1]", v.name)));
            }
        }
        let bad_ref = |terms: &[(VarId, f64)], owner: &str| -> Result<(), SolverError> {
            for &(j, a) in terms {
                if j >= n {
                    return Err(SolverError::UnknownVariable(format!("#{j} in {owner}")));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidProblem(format!("non-finite coefficient in {owner}")));
                }
            }
            Ok(())
        };
        for r in &self.rows {
            bad_ref(&r.terms, &r.name)?;
            if !r.rhs.is_finite() {
                return Err(SolverError::InvalidProblem(format!("non-finite rhs in {}", r.name)));
            }
        }
        for c in &self.cones {
            for e in c.exprs() {
                bad_ref(&e.terms, &c.name)?;
            }
        }
        bad_ref(&self.objective.terms, "objective")?;
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Every bound, integrality, row and cone violation above `tol`.
    pub fn violations(&self, x: &[f64], tol: f64) -> Result<Vec<Violation>, SolverError> {
        if x.len() != self.vars.len() {
            return Err(SolverError::Dimension {
                expected: self.vars.len(),
                got: x.len(),
            });
        }
        let mut out = Vec::new();
        for (v, &xv) in self.vars.iter().zip(x) {
            let amount = (v.lower - xv).max(xv - v.upper).max(0.0);
            if amount > tol || xv.is_nan() {
                out.push(Violation {
                    kind: ViolationKind::Bound,
                    name: v.name.clone(),
                    amount,
                });
            }
            if v.kind == VarKind::Binary {
                let frac = (xv - xv.round()).abs();
                if frac > tol {
                    out.push(Violation {
                        kind: ViolationKind::Integrality,
                        name: v.name.clone(),
                        amount: frac,
                    });
                }
            }
        }
        for r in &self.rows {
            let amount = r.violation(x);
            if amount > tol || amount.is_nan() {
                out.push(Violation {
                    kind: ViolationKind::Row,
                    name: r.name.clone(),
                    amount,
                });
            }
        }
        for c in &self.cones {
            let amount = c.violation(x);
            if amount > tol || amount.is_nan() {
                out.push(Violation {
                    kind: ViolationKind::Cone,
                    name: c.name.clone(),
                    amount,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collisions_and_lookup() {
        let mut ir = ProblemIR::new();
        let x = ir.add_var("x", VarKind::Continuous, 0.0, 1.0).unwrap();
        assert_eq!(ir.var_id("x"), Some(x));
        assert!(matches!(
            ir.add_var("x", VarKind::Binary, 0.0, 1.0),
            Err(SolverError::NameCollision(_))
        ));
        ir.add_row("r", vec![(x, 1.0)], Sense::Le, 0.5).unwrap();
        assert!(ir.add_row("r", vec![], Sense::Eq, 0.0).is_err());
        ir.check().unwrap();
    }

    #[test]
    fn violations_found() {
        let mut ir = ProblemIR::new();
        let p = ir.add_var("p", VarKind::Continuous, -10.0, 10.0).unwrap();
        let q = ir.add_var("q", VarKind::Continuous, -10.0, 10.0).unwrap();
        let b = ir.add_var("b", VarKind::Binary, 0.0, 1.0).unwrap();
        ir.add_cone(Cone {
            name: "cap".into(),
            v: vec![LinExpr::var(p), LinExpr::var(q)],
            form: ConeForm::Norm { r: LinExpr::constant(1.0) },
        });
        // P = Q = 0.8 S breaks the circle: 1.28 S² > S²
        let v = ir.violations(&[0.8, 0.8, 0.0], 1e-9).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Cone);
        // 0.6² + 0.8² = 1 lies on the boundary
        assert!(ir.violations(&[0.6, 0.8, 1.0], 1e-9).unwrap().is_empty());
        let v = ir.violations(&[0.0, 0.0, 0.5], 1e-9).unwrap();
        assert_eq!(v[0].kind, ViolationKind::Integrality);
        assert_eq!(ir.vars[b].kind, VarKind::Binary);
        assert!(ir.violations(&[0.0], 1e-9).is_err());
    }

    #[test]
    fn rotated_cone_violation() {
        let mut ir = ProblemIR::new();
        let f = ir.add_var("f", VarKind::Continuous, -5.0, 5.0).unwrap();
        let a = ir.add_var("a", VarKind::Continuous, 0.0, 5.0).unwrap();
        ir.add_cone(Cone {
            name: "soc".into(),
            v: vec![LinExpr::var(f)],
            form: ConeForm::Rotated {
                s: LinExpr::var(a),
                t: LinExpr::constant(1.0),
            },
        });
        assert!(ir.violations(&[2.0, 4.0], 1e-9).unwrap().is_empty());
        assert_eq!(ir.violations(&[2.0, 3.9], 1e-9).unwrap().len(), 1);
    }
}
