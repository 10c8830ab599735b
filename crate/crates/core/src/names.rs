//! Variable and row names shared by builders, extraction and tests.
//! Hours are absolute (1-based), so a name means the same thing in every
//! window that contains it.

use std::fmt::Display;

pub fn at(base: &str, key: impl Display, t: usize) -> String {
    format!("{base}[{key}]@{t}")
}

pub fn hour(base: &str, t: usize) -> String {
    format!("{base}@{t}")
}

pub fn line_key(from: usize, to: usize) -> String {
    format!("{from}-{to}")
}

/// Transmission line keys; parallel circuits get a `#k` suffix.
pub fn tn_line_keys(tn: &crate::model::TransNetwork) -> Vec<String> {
    let mut seen = std::collections::BTreeMap::new();
    tn.lines
        .iter()
        .map(|l| {
            let n = seen.entry((l.from, l.to)).or_insert(0usize);
            *n += 1;
            if *n == 1 {
                line_key(l.from, l.to)
            } else {
                format!("{}#{n}", line_key(l.from, l.to))
            }
        })
        .collect()
}

// feeder
pub const V: &str = "dn.V";
pub const FP: &str = "dn.fp";
pub const FQ: &str = "dn.fq";
pub const A: &str = "dn.a";
pub const SHED_P: &str = "dn.shp";
pub const SHED_Q: &str = "dn.shq";
pub const PBAL: &str = "dn.pbal";
pub const QBAL: &str = "dn.qbal";
pub const VDROP: &str = "dn.vdrop";
pub const SHED_RATIO: &str = "dn.shratio";
pub const SOC_CONE: &str = "dn.soc";
pub const SEND_CONE: &str = "dn.slim";
pub const RECV_CONE: &str = "dn.rlim";

// DG
pub const DG_X: &str = "dg.x";
pub const DG_P: &str = "dg.p";
pub const DG_Q: &str = "dg.q";
pub const DG_C: &str = "dg.c";
pub const DG_SU: &str = "dg.su";
pub const DG_SD: &str = "dg.sd";

// PV
pub const PV_P: &str = "pv.p";
pub const PV_Q: &str = "pv.q";

// hydrogen
pub const H2_MODE: &str = "h2.mode";
pub const H2_PEL: &str = "h2.pel";
pub const H2_PFC: &str = "h2.pfc";
pub const H2_QEL: &str = "h2.qel";
pub const H2_QFC: &str = "h2.qfc";
pub const H2_MOH: &str = "h2.moh";
pub const H2_QHS: &str = "h2.qhs";
pub const H2_SHD: &str = "h2.shd";
pub const H2_MASS: &str = "h2.mass";
pub const H2_RESERVE: &str = "h2.reserve";
pub const CBDR_EL: &str = "cbdr.el";
pub const CBDR_FC: &str = "cbdr.fc";

// battery
pub const BAT_MODE: &str = "bat.mode";
pub const BAT_CH: &str = "bat.pch";
pub const BAT_DIS: &str = "bat.pdis";
pub const BAT_SOC: &str = "bat.soc";
pub const BAT_Q: &str = "bat.q";
pub const BAT_BAL: &str = "bat.bal";
pub const BAT_RESERVE: &str = "bat.reserve";

// tie line
pub const BUY: &str = "ex.buy";
pub const SELL: &str = "ex.sell";
pub const U: &str = "ex.u";
pub const EXQ: &str = "ex.q";

// transmission primal
pub const PG: &str = "tn.pg";
pub const PW: &str = "tn.pw";
pub const FLOW: &str = "tn.fl";
pub const THETA: &str = "tn.th";
pub const TBAL: &str = "tn.bal";
pub const GMIN: &str = "tn.gmin";
pub const GMAX: &str = "tn.gmax";
pub const FDEF: &str = "tn.fdef";
pub const FMIN: &str = "tn.fmin";
pub const FMAX: &str = "tn.fmax";
pub const WMAX: &str = "tn.wmax";
pub const SELL_LIM: &str = "tn.selllim";
pub const BUY_LIM: &str = "tn.buylim";

// transmission dual
pub const LAM: &str = "tn.lam";
pub const AMIN: &str = "tn.amin";
pub const AMAX: &str = "tn.amax";
pub const ZETA: &str = "tn.zeta";
pub const DMIN: &str = "tn.dmin";
pub const DMAX: &str = "tn.dmax";
pub const GAM: &str = "tn.gam";
pub const PSIB: &str = "tn.psib";
pub const PSIS: &str = "tn.psis";
pub const KB: &str = "tn.kb";
pub const KS: &str = "tn.ks";
pub const STRONG_DUALITY: &str = "tn.sd";
