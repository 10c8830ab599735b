//! Name-addressed model fragments. Builders emit [`Block`]s that refer to
//! variables by string; [`assemble`] merges them into one [`ProblemIR`],
//! rejecting duplicate names and references to undeclared variables.

use crate::error::SolverError;
use crate::ir::{Cone, ConeForm, LinExpr, ProblemIR, Sense, VarKind};

/// Linear expression over variable names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    pub terms: Vec<(String, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Self {
            terms: vec![(name.into(), 1.0)],
            constant: 0.0,
        }
    }

    pub fn scaled(name: impl Into<String>, coef: f64) -> Self {
        Self {
            terms: vec![(name.into(), coef)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn from_terms<S: Into<String>>(terms: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self {
            terms: terms.into_iter().map(|(n, a)| (n.into(), a)).collect(),
            constant: 0.0,
        }
    }

    pub fn add(mut self, name: impl Into<String>, coef: f64) -> Self {
        self.terms.push((name.into(), coef));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

#[derive(Debug, Clone)]
struct VarDecl {
    name: String,
    kind: VarKind,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone)]
struct RowDecl {
    name: String,
    expr: Expr,
    sense: Sense,
    rhs: f64,
}

#[derive(Debug, Clone)]
enum ConeDecl {
    Norm { name: String, v: Vec<Expr>, r: Expr },
    Rotated { name: String, v: Vec<Expr>, s: Expr, t: Expr },
}

#[derive(Debug, Clone, Default)]
pub struct Block {
    pub label: String,
    vars: Vec<VarDecl>,
    rows: Vec<RowDecl>,
    cones: Vec<ConeDecl>,
    objective: Expr,
}

impl Block {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> String {
        let name = name.into();
        self.vars.push(VarDecl {
            name: name.clone(),
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        name
    }

    pub fn free(&mut self, name: impl Into<String>) -> String {
        self.continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.vars.push(VarDecl {
            name: name.clone(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        name
    }

    /// Binary with a fixed value (kept in the model so names stay stable).
    pub fn fixed_binary(&mut self, name: impl Into<String>, value: f64) -> String {
        let name = name.into();
        self.vars.push(VarDecl {
            name: name.clone(),
            kind: VarKind::Binary,
            lower: value,
            upper: value,
        });
        name
    }

    /// `expr (sense) rhs`; the expression constant moves to the right side.
    pub fn row(&mut self, name: impl Into<String>, expr: Expr, sense: Sense, rhs: f64) {
        self.rows.push(RowDecl {
            name: name.into(),
            expr,
            sense,
            rhs,
        });
    }

    pub fn le(&mut self, name: impl Into<String>, expr: Expr, rhs: f64) {
        self.row(name, expr, Sense::Le, rhs)
    }

    pub fn ge(&mut self, name: impl Into<String>, expr: Expr, rhs: f64) {
        self.row(name, expr, Sense::Ge, rhs)
    }

    pub fn eq(&mut self, name: impl Into<String>, expr: Expr, rhs: f64) {
        self.row(name, expr, Sense::Eq, rhs)
    }

    /// `‖v‖ ≤ r`
    pub fn norm_cone(&mut self, name: impl Into<String>, v: Vec<Expr>, r: Expr) {
        self.cones.push(ConeDecl::Norm { name: name.into(), v, r });
    }

    /// `‖v‖² ≤ s·t`
    pub fn rotated_cone(&mut self, name: impl Into<String>, v: Vec<Expr>, s: Expr, t: Expr) {
        self.cones.push(ConeDecl::Rotated { name: name.into(), v, s, t });
    }

    pub fn cost(&mut self, name: impl Into<String>, coef: f64) {
        if coef != 0.0 {
            self.objective.terms.push((name.into(), coef));
        }
    }

    pub fn cost_constant(&mut self, c: f64) {
        self.objective.constant += c;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cones(&self) -> usize {
        self.cones.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    pub fn row_names(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.name.as_str())
    }

    /// Appends another block (names must still be unique at assembly).
    pub fn extend(&mut self, other: Block) {
        self.vars.extend(other.vars);
        self.rows.extend(other.rows);
        self.cones.extend(other.cones);
        self.objective.terms.extend(other.objective.terms);
        self.objective.constant += other.objective.constant;
    }
}

fn resolve(ir: &ProblemIR, e: &Expr, owner: &str) -> Result<LinExpr, SolverError> {
    let mut terms = Vec::with_capacity(e.terms.len());
    for (n, a) in &e.terms {
        let id = ir
            .var_id(n)
            .ok_or_else(|| SolverError::UnknownVariable(format!("{n} (in {owner})")))?;
        terms.push((id, *a));
    }
    Ok(LinExpr {
        terms,
        constant: e.constant,
    })
}

/// Merges blocks in order into one problem.
pub fn assemble(blocks: &[Block]) -> Result<ProblemIR, SolverError> {
    let mut ir = ProblemIR::new();
    for b in blocks {
        for v in &b.vars {
            ir.add_var(&v.name, v.kind, v.lower, v.upper)?;
        }
    }
    for b in blocks {
        for r in &b.rows {
            let e = resolve(&ir, &r.expr, &r.name)?;
            ir.add_row(&r.name, e.terms, r.sense, r.rhs - e.constant)?;
        }
        for c in &b.cones {
            let cone = match c {
                ConeDecl::Norm { name, v, r } => Cone {
                    name: name.clone(),
                    v: v.iter().map(|e| resolve(&ir, e, name)).collect::<Result<_, _>>()?,
                    form: ConeForm::Norm { r: resolve(&ir, r, name)? },
                },
                ConeDecl::Rotated { name, v, s, t } => Cone {
                    name: name.clone(),
                    v: v.iter().map(|e| resolve(&ir, e, name)).collect::<Result<_, _>>()?,
                    form: ConeForm::Rotated {
                        s: resolve(&ir, s, name)?,
                        t: resolve(&ir, t, name)?,
                    },
                },
            };
            ir.add_cone(cone);
        }
        let obj = resolve(&ir, &b.objective, "objective")?;
        ir.objective.terms.extend(obj.terms);
        ir.objective.constant += obj.constant;
    }
    Ok(ir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_block_references_resolve() {
        let mut a = Block::new("a");
        a.continuous("x", 0.0, 1.0);
        let mut b = Block::new("b");
        b.continuous("y", 0.0, 1.0);
        b.le("link", Expr::var("x").add("y", 1.0).plus(0.5), 1.0);
        b.cost("x", 2.0);
        let ir = assemble(&[a, b]).unwrap();
        assert_eq!(ir.vars.len(), 2);
        assert_eq!(ir.rows[0].rhs, 0.5);
        assert_eq!(ir.objective.terms, vec![(0, 2.0)]);
    }

    #[test]
    fn collisions_and_dangling_names() {
        let mut a = Block::new("a");
        a.continuous("x", 0.0, 1.0);
        let mut b = Block::new("b");
        b.binary("x");
        assert!(matches!(assemble(&[a.clone(), b]), Err(SolverError::NameCollision(_))));
        let mut c = Block::new("c");
        c.eq("r", Expr::var("nope"), 0.0);
        assert!(matches!(assemble(&[a, c]), Err(SolverError::UnknownVariable(_))));
    }
}
