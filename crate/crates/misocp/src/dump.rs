//! Line-oriented text dump of a [`ProblemIR`].
//!
//! ```text
//! misocp-ir 1
//! var <id> <name> <C|B> <lower> <upper>
//! row <id> <name> <le|eq|ge> <rhs> <var-id>:<coef> ...
//! cone <id> <name> norm|rot <head>... | <v1> | <v2> ...
//! obj <constant> <var-id>:<coef> ...
//! ```
//!
//! Cone expressions are written as `[<constant> <var-id>:<coef> ...]`; a
//! norm cone has one head expression (`r`), a rotated cone two (`s t`).
//! Numbers use the shortest representation that round-trips, so a dump is
//! bit-exact across runs for identical inputs.

use std::fmt::Write;

use crate::ir::{ConeForm, LinExpr, ProblemIR, Sense, VarKind};

fn terms(out: &mut String, t: &[(usize, f64)]) {
    for (j, a) in t {
        let _ = write!(out, " {j}:{a:?}");
    }
}

fn expr(out: &mut String, e: &LinExpr) {
    let _ = write!(out, " [{:?}", e.constant);
    terms(out, &e.terms);
    out.push(']');
}

pub fn dump(ir: &ProblemIR) -> String {
    let mut out = String::from("misocp-ir 1\n");
    for (i, v) in ir.vars.iter().enumerate() {
        let k = match v.kind {
            VarKind::Continuous => 'C',
            VarKind::Binary => 'B',
        };
        let _ = writeln!(out, "var {i} {} {k} {:?} {:?}", v.name, v.lower, v.upper);
    }
    for (i, r) in ir.rows.iter().enumerate() {
        let s = match r.sense {
            Sense::Le => "le",
            Sense::Eq => "eq",
            Sense::Ge => "ge",
        };
        let _ = write!(out, "row {i} {} {s} {:?}", r.name, r.rhs);
        terms(&mut out, &r.terms);
        out.push('\n');
    }
    for (i, c) in ir.cones.iter().enumerate() {
        let _ = write!(out, "cone {i} {}", c.name);
        match &c.form {
            ConeForm::Norm { r } => {
                out.push_str(" norm");
                expr(&mut out, r);
            }
            ConeForm::Rotated { s, t } => {
                out.push_str(" rot");
                expr(&mut out, s);
                expr(&mut out, t);
            }
        }
        for e in &c.v {
            out.push_str(" |");
            expr(&mut out, e);
        }
        out.push('\n');
    }
    let _ = write!(out, "obj {:?}", ir.objective.constant);
    terms(&mut out, &ir.objective.terms);
    out.push('\n');
    out
}
