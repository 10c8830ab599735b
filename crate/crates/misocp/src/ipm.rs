//! Primal-dual interior-point method for
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             G x + s = h,   s ∈ K
//! ```
//!
//! using the homogeneous self-dual embedding with Nesterov–Todd scaling and
//! a Mehrotra predictor-corrector. `K` is a product of an orthant and
//! second-order cones (see [`ConeSpec`]).

use crate::cones::{dot, norm_inf, w2_pattern, ConeSpec, NtScaling};
use crate::error::SolverError;
use crate::sparse::{CscMatrix, LdlFactor};

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub g: CscMatrix,
    pub h: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<(), SolverError> {
        let n = self.n();
        let dims = [
            (self.a.ncols, n),
            (self.g.ncols, n),
            (self.a.nrows, self.b.len()),
            (self.g.nrows, self.h.len()),
            (self.cones.dim(), self.h.len()),
        ];
        for (got, expected) in dims {
            if got != expected {
                return Err(SolverError::Dimension { expected, got });
            }
        }
        if self.cones.soc.iter().any(|&q| q < 2) {
            return Err(SolverError::InvalidProblem("second-order cone of size < 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    /// looser tolerances accepted when progress stalls
    pub feastol_inacc: f64,
    pub reltol_inacc: f64,
    pub max_iter: usize,
    pub equilibrate_iters: usize,
    pub static_reg: f64,
    pub refine_steps: usize,
    pub step: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            feastol: 1e-9,
            abstol: 1e-9,
            reltol: 1e-9,
            feastol_inacc: 1e-5,
            reltol_inacc: 1e-5,
            max_iter: 120,
            equilibrate_iters: 15,
            static_reg: 1e-8,
            refine_steps: 4,
            step: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Solved,
    AlmostSolved,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalError,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub status: IpmStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub pcost: f64,
    pub dcost: f64,
    pub pres: f64,
    pub dres: f64,
    pub iterations: usize,
}

/// Diagonal equilibration of the scaled problem.
struct Equilibration {
    d: Vec<f64>,
    ea: Vec<f64>,
    eg: Vec<f64>,
    cost: f64,
}

fn equilibrate(p: &ConicProblem, iters: usize) -> (ConicProblem, Equilibration) {
    let n = p.n();
    let (pa, pg) = (p.a.nrows, p.g.nrows);
    let mut a = p.a.clone();
    let mut g = p.g.clone();
    let mut d = vec![1.0; n];
    let mut ea = vec![1.0; pa];
    let mut eg = vec![1.0; pg];
    let offsets = p.cones.soc_offsets();
    let clamp = |v: f64| if v > 0.0 { (1.0 / v.sqrt()).clamp(1e-4, 1e4) } else { 1.0 };
    for _ in 0..iters {
        let mut cn = vec![0.0f64; n];
        let mut ra = vec![0.0f64; pa];
        let mut rg = vec![0.0f64; pg];
        for j in 0..n {
            for k in a.colptr[j]..a.colptr[j + 1] {
                let v = a.vals[k].abs();
                cn[j] = cn[j].max(v);
                ra[a.rowidx[k]] = ra[a.rowidx[k]].max(v);
            }
            for k in g.colptr[j]..g.colptr[j + 1] {
                let v = g.vals[k].abs();
                cn[j] = cn[j].max(v);
                rg[g.rowidx[k]] = rg[g.rowidx[k]].max(v);
            }
        }
        for (off, &q) in offsets.iter().zip(&p.cones.soc) {
            let m = rg[*off..off + q].iter().cloned().fold(0.0, f64::max);
            rg[*off..off + q].iter_mut().for_each(|v| *v = m);
        }
        let dc: Vec<f64> = cn.iter().map(|&v| clamp(v)).collect();
        let dra: Vec<f64> = ra.iter().map(|&v| clamp(v)).collect();
        let drg: Vec<f64> = rg.iter().map(|&v| clamp(v)).collect();
        a.scale(&dra, &dc);
        g.scale(&drg, &dc);
        for j in 0..n {
            d[j] *= dc[j];
        }
        for i in 0..pa {
            ea[i] *= dra[i];
        }
        for i in 0..pg {
            eg[i] *= drg[i];
        }
    }
    let c: Vec<f64> = p.c.iter().zip(&d).map(|(c, d)| c * d).collect();
    let cmax = norm_inf(&c);
    let cost = if cmax > 0.0 { (1.0 / cmax).clamp(1e-6, 1e6) } else { 1.0 };
    let c = c.iter().map(|v| v * cost).collect();
    let b = p.b.iter().zip(&ea).map(|(b, e)| b * e).collect();
    let h = p.h.iter().zip(&eg).map(|(h, e)| h * e).collect();
    (
        ConicProblem {
            c,
            a,
            b,
            g,
            h,
            cones: p.cones.clone(),
        },
        Equilibration { d, ea, eg, cost },
    )
}

/// Reduced KKT system with a fixed sparsity pattern.
struct Kkt {
    n: usize,
    p: usize,
    m: usize,
    factor: LdlFactor,
    vals: Vec<f64>,
    /// start of the `-W²` entries in `vals`
    w2_start: usize,
    reg: f64,
    w2buf: Vec<f64>,
}

impl Kkt {
    fn new(prob: &ConicProblem, reg: f64) -> Result<Self, SolverError> {
        let n = prob.n();
        let p = prob.a.nrows;
        let m = prob.g.nrows;
        let mut pattern = Vec::new();
        let mut vals = Vec::new();
        for j in 0..n {
            pattern.push((j, j));
            vals.push(reg);
        }
        for j in 0..n {
            for k in prob.a.colptr[j]..prob.a.colptr[j + 1] {
                pattern.push((j, n + prob.a.rowidx[k]));
                vals.push(prob.a.vals[k]);
            }
            for k in prob.g.colptr[j]..prob.g.colptr[j + 1] {
                pattern.push((j, n + p + prob.g.rowidx[k]));
                vals.push(prob.g.vals[k]);
            }
        }
        for i in 0..p {
            pattern.push((n + i, n + i));
            vals.push(-reg);
        }
        let w2_start = pattern.len();
        for (i, j) in w2_pattern(&prob.cones) {
            pattern.push((n + p + i, n + p + j));
            vals.push(if i == j { -1.0 } else { 0.0 });
        }
        let mut signs = vec![1.0; n];
        signs.extend(std::iter::repeat(-1.0).take(p + m));
        let factor = LdlFactor::new(n + p + m, &pattern, signs)?;
        Ok(Self {
            n,
            p,
            m,
            factor,
            vals,
            w2_start,
            reg,
            w2buf: Vec::new(),
        })
    }

    fn refactor(&mut self, w: &NtScaling) -> Result<(), SolverError> {
        w.w2_values(&mut self.w2buf);
        for (k, v) in self.w2buf.iter().enumerate() {
            self.vals[self.w2_start + k] = -v;
        }
        self.factor.factor(&self.vals)
    }

    /// Unregularized product `K u`.
    fn mul(&self, prob: &ConicProblem, w: &NtScaling, u: &[f64], out: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        out.iter_mut().for_each(|v| *v = 0.0);
        let (ox, rest) = out.split_at_mut(n);
        let (oy, oz) = rest.split_at_mut(p);
        let (ux, urest) = u.split_at(n);
        let (uy, uz) = urest.split_at(p);
        prob.a.gemv_t(1.0, uy, ox);
        prob.g.gemv_t(1.0, uz, ox);
        prob.a.gemv(1.0, ux, oy);
        prob.g.gemv(1.0, ux, oz);
        let mut t = vec![0.0; self.m];
        w.apply_sq(uz, &mut t);
        for (o, v) in oz.iter_mut().zip(&t) {
            *o -= v;
        }
    }

    /// Solves `K u = rhs` with iterative refinement against the
    /// unregularized matrix.
    fn solve(&mut self, prob: &ConicProblem, w: &NtScaling, rhs: &[f64]) -> Vec<f64> {
        let mut u = rhs.to_vec();
        self.factor.solve(&mut u);
        if self.reg == 0.0 && self.factor.regularized_pivots == 0 {
            return u;
        }
        let dim = rhs.len();
        let mut ku = vec![0.0; dim];
        let bnorm = norm_inf(rhs).max(1.0);
        let mut best_err = f64::INFINITY;
        for _ in 0..self_refine_steps() {
            self.mul(prob, w, &u, &mut ku);
            let mut r: Vec<f64> = rhs.iter().zip(&ku).map(|(b, k)| b - k).collect();
            let err = norm_inf(&r);
            if err <= 1e-14 * bnorm || err >= 0.5 * best_err {
                break;
            }
            best_err = err;
            self.factor.solve(&mut r);
            for (x, d) in u.iter_mut().zip(&r) {
                *x += d;
            }
        }
        u
    }
}

fn self_refine_steps() -> usize {
    4
}

pub fn solve(prob: &ConicProblem, settings: &IpmSettings) -> Result<IpmSolution, SolverError> {
    prob.check()?;
    let (sp, eq) = equilibrate(prob, settings.equilibrate_iters);
    let n = sp.n();
    let p = sp.a.nrows;
    let m = sp.g.nrows;
    let cones = &sp.cones;
    let nu = cones.degree() as f64;

    let mut kkt = Kkt::new(&sp, settings.static_reg)?;
    let mut w = NtScaling::new(cones);

    // initial point
    kkt.refactor(&w)?;
    let mut rhs = vec![0.0; n + p + m];
    rhs[n..n + p].copy_from_slice(&sp.b);
    rhs[n + p..].copy_from_slice(&sp.h);
    let u = kkt.solve(&sp, &w, &rhs);
    let mut x = u[..n].to_vec();
    let mut s: Vec<f64> = u[n + p..].iter().map(|v| -v).collect();
    let alpha = -cones.min_eig(&s);
    if m > 0 && alpha >= -1e-8 {
        cones.add_identity(&mut s, 1.0 + alpha);
    }
    let mut rhs = vec![0.0; n + p + m];
    for j in 0..n {
        rhs[j] = -sp.c[j];
    }
    let u = kkt.solve(&sp, &w, &rhs);
    let mut y = u[n..n + p].to_vec();
    let mut z = u[n + p..].to_vec();
    let alpha = -cones.min_eig(&z);
    if m > 0 && alpha >= -1e-8 {
        cones.add_identity(&mut z, 1.0 + alpha);
    }
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    // unscaled data for termination checks
    let bnorm = norm_inf(&prob.b).max(norm_inf(&prob.h));
    let cnorm = norm_inf(&prob.c);

    let mut best: Option<(f64, IpmSolution)> = None;
    let mut status = IpmStatus::MaxIterations;
    let mut iter = 0;
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; p];
    let mut r3 = vec![0.0; m];
    let mut lambda = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut tmp2 = vec![0.0; m];

    while iter <= settings.max_iter {
        // residuals in scaled space
        r1.iter_mut().zip(&sp.c).for_each(|(r, c)| *r = c * tau);
        sp.a.gemv_t(1.0, &y, &mut r1);
        sp.g.gemv_t(1.0, &z, &mut r1);
        r2.iter_mut().zip(&sp.b).for_each(|(r, b)| *r = -b * tau);
        sp.a.gemv(1.0, &x, &mut r2);
        for i in 0..m {
            r3[i] = s[i] - sp.h[i] * tau;
        }
        sp.g.gemv(1.0, &x, &mut r3);
        let r4 = dot(&sp.c, &x) + dot(&sp.b, &y) + dot(&sp.h, &z) + kappa;

        // termination on the original data
        let cand = unscale(&eq, &x, &y, &z, &s, tau);
        let (pres, dres, pcost, dcost) = residuals(prob, &cand);
        let pres = pres / (1.0 + bnorm);
        let dres = dres / (1.0 + cnorm);
        let gap = dot(&cand.s, &cand.z).abs();
        let relgap = gap.min((pcost - dcost).abs()) / pcost.abs().max(dcost.abs()).max(1.0);
        let sol = IpmSolution {
            status: IpmStatus::Solved,
            pcost,
            dcost,
            pres,
            dres,
            iterations: iter,
            ..cand
        };
        let merit = pres.max(dres).max(relgap);
        if merit.is_finite() && best.as_ref().map_or(true, |(b, _)| merit < *b) {
            best = Some((merit, sol.clone()));
        }
        if pres < settings.feastol && dres < settings.feastol && (gap < settings.abstol || relgap < settings.reltol) {
            return Ok(sol);
        }
        if tau < kappa {
            let (infp, infd) = certificates(prob, &eq, &x, &y, &z, &s);
            if infp < settings.feastol {
                return Ok(IpmSolution {
                    status: IpmStatus::PrimalInfeasible,
                    ..sol
                });
            }
            if infd < settings.feastol {
                return Ok(IpmSolution {
                    status: IpmStatus::DualInfeasible,
                    ..sol
                });
            }
        }
        if iter == settings.max_iter {
            break;
        }
        iter += 1;

        if !w.update(&s, &z) {
            status = IpmStatus::NumericalError;
            break;
        }
        w.apply(&z, &mut lambda);
        if kkt.refactor(&w).is_err() {
            status = IpmStatus::NumericalError;
            break;
        }
        let mu = (dot(&s, &z) + tau * kappa) / (nu + 1.0);

        // K u1 = [-c; b; h]
        let mut rhs1 = vec![0.0; n + p + m];
        for j in 0..n {
            rhs1[j] = -sp.c[j];
        }
        rhs1[n..n + p].copy_from_slice(&sp.b);
        rhs1[n + p..].copy_from_slice(&sp.h);
        let u1 = kkt.solve(&sp, &w, &rhs1);
        let denom_base = dot(&sp.c, &u1[..n]) + dot(&sp.b, &u1[n..n + p]) + dot(&sp.h, &u1[n + p..]);

        // predictor: d_s = -λ∘λ, d_κ = -τκ
        let mut ds_target = vec![0.0; m];
        cones.jordan(&lambda, &lambda, &mut ds_target);
        ds_target.iter_mut().for_each(|v| *v = -*v);
        let aff = direction(
            &sp, &mut kkt, &w, cones, &lambda, &ds_target, -tau * kappa, 1.0, &r1, &r2, &r3, r4,
            &u1, denom_base, tau, kappa, &mut tmp, &mut tmp2,
        );
        let a_aff = step_length(cones, &s, &z, tau, kappa, &aff, 1.0);
        let sigma = (1.0 - a_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let mut wids = vec![0.0; m];
        let mut wdz = vec![0.0; m];
        w.apply_inv(&aff.ds, &mut wids);
        w.apply(&aff.dz, &mut wdz);
        let mut corr = vec![0.0; m];
        cones.jordan(&wids, &wdz, &mut corr);
        let mut ds_target = vec![0.0; m];
        cones.jordan(&lambda, &lambda, &mut ds_target);
        for i in 0..m {
            ds_target[i] = -ds_target[i] - corr[i];
        }
        cones.add_identity(&mut ds_target, sigma * mu);
        let dk_target = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = direction(
            &sp, &mut kkt, &w, cones, &lambda, &ds_target, dk_target, 1.0 - sigma, &r1, &r2, &r3,
            r4, &u1, denom_base, tau, kappa, &mut tmp, &mut tmp2,
        );
        let amax = step_length(cones, &s, &z, tau, kappa, &dir, 1.0 / settings.step);
        let alpha = (settings.step * amax).min(1.0);
        if !(alpha > 1e-12) || !dir.is_finite() {
            status = IpmStatus::NumericalError;
            break;
        }
        for j in 0..n {
            x[j] += alpha * dir.dx[j];
        }
        for i in 0..p {
            y[i] += alpha * dir.dy[i];
        }
        for i in 0..m {
            z[i] += alpha * dir.dz[i];
            s[i] += alpha * dir.ds[i];
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) {
            status = IpmStatus::NumericalError;
            break;
        }
    }

    // fall back to the best iterate if it is accurate enough
    if let Some((_, sol)) = best {
        let relgap = (sol.pcost - sol.dcost).abs() / sol.pcost.abs().max(1.0);
        if sol.pres < settings.feastol_inacc && sol.dres < settings.feastol_inacc && relgap < settings.reltol_inacc {
            return Ok(IpmSolution {
                status: IpmStatus::AlmostSolved,
                ..sol
            });
        }
        return Ok(IpmSolution { status, ..sol });
    }
    Err(SolverError::Factorization("no finite iterate".into()))
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

impl Direction {
    fn is_finite(&self) -> bool {
        self.dtau.is_finite()
            && self.dkappa.is_finite()
            && self.dx.iter().chain(&self.dz).chain(&self.ds).all(|v| v.is_finite())
    }
}

#[allow(clippy::too_many_arguments)]
fn direction(
    sp: &ConicProblem,
    kkt: &mut Kkt,
    w: &NtScaling,
    cones: &ConeSpec,
    lambda: &[f64],
    ds_target: &[f64],
    dk_target: f64,
    eta: f64,
    r1: &[f64],
    r2: &[f64],
    r3: &[f64],
    r4: f64,
    u1: &[f64],
    denom_base: f64,
    tau: f64,
    kappa: f64,
    tmp: &mut [f64],
    tmp2: &mut [f64],
) -> Direction {
    let n = r1.len();
    let p = r2.len();
    let m = r3.len();
    // tmp = λ \ d_s ; tmp2 = W tmp
    cones.jordan_div(lambda, ds_target, tmp);
    w.apply(tmp, tmp2);
    let mut rhs = vec![0.0; n + p + m];
    for j in 0..n {
        rhs[j] = -eta * r1[j];
    }
    for i in 0..p {
        rhs[n + i] = -eta * r2[i];
    }
    for i in 0..m {
        rhs[n + p + i] = -eta * r3[i] - tmp2[i];
    }
    let u0 = kkt.solve(sp, w, &rhs);
    let num = -eta * r4 - dk_target / tau - (dot(&sp.c, &u0[..n]) + dot(&sp.b, &u0[n..n + p]) + dot(&sp.h, &u0[n + p..]));
    let den = denom_base - kappa / tau;
    let dtau = num / den;
    let du: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| a + dtau * b).collect();
    let dz = du[n + p..].to_vec();
    // ds = W(λ\d_s - W dz)
    let mut wdz = vec![0.0; m];
    w.apply(&dz, &mut wdz);
    for i in 0..m {
        wdz[i] = tmp[i] - wdz[i];
    }
    let mut ds = vec![0.0; m];
    w.apply(&wdz, &mut ds);
    Direction {
        dx: du[..n].to_vec(),
        dy: du[n..n + p].to_vec(),
        dz,
        ds,
        dtau,
        dkappa: (dk_target - kappa * dtau) / tau,
    }
}

fn step_length(cones: &ConeSpec, s: &[f64], z: &[f64], tau: f64, kappa: f64, d: &Direction, cap: f64) -> f64 {
    let mut a = cones.max_step(s, &d.ds, cap);
    a = cones.max_step(z, &d.dz, a);
    if d.dtau < 0.0 {
        a = a.min(-tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        a = a.min(-kappa / d.dkappa);
    }
    a
}

fn unscale(eq: &Equilibration, x: &[f64], y: &[f64], z: &[f64], s: &[f64], tau: f64) -> IpmSolution {
    IpmSolution {
        status: IpmStatus::Solved,
        x: x.iter().zip(&eq.d).map(|(v, d)| v * d / tau).collect(),
        y: y.iter().zip(&eq.ea).map(|(v, e)| v * e / (eq.cost * tau)).collect(),
        z: z.iter().zip(&eq.eg).map(|(v, e)| v * e / (eq.cost * tau)).collect(),
        s: s.iter().zip(&eq.eg).map(|(v, e)| v / (e * tau)).collect(),
        pcost: 0.0,
        dcost: 0.0,
        pres: 0.0,
        dres: 0.0,
        iterations: 0,
    }
}

/// Returns `(pres, dres, pcost, dcost)` with absolute infinity norms.
fn residuals(prob: &ConicProblem, sol: &IpmSolution) -> (f64, f64, f64, f64) {
    let mut ra: Vec<f64> = prob.b.iter().map(|v| -v).collect();
    prob.a.gemv(1.0, &sol.x, &mut ra);
    let mut rg: Vec<f64> = prob.h.iter().zip(&sol.s).map(|(h, s)| s - h).collect();
    prob.g.gemv(1.0, &sol.x, &mut rg);
    let mut rd = prob.c.clone();
    prob.a.gemv_t(1.0, &sol.y, &mut rd);
    prob.g.gemv_t(1.0, &sol.z, &mut rd);
    let pres = norm_inf(&ra).max(norm_inf(&rg));
    let dres = norm_inf(&rd);
    let pcost = dot(&prob.c, &sol.x);
    let dcost = -dot(&prob.b, &sol.y) - dot(&prob.h, &sol.z);
    (pres, dres, pcost, dcost)
}

/// Relative residuals of the primal and dual infeasibility certificates.
fn certificates(prob: &ConicProblem, eq: &Equilibration, x: &[f64], y: &[f64], z: &[f64], s: &[f64]) -> (f64, f64) {
    let c = unscale(eq, x, y, z, s, 1.0);
    let by_hz = dot(&prob.b, &c.y) + dot(&prob.h, &c.z);
    let infp = if by_hz < 0.0 {
        let mut r = vec![0.0; prob.n()];
        prob.a.gemv_t(1.0, &c.y, &mut r);
        prob.g.gemv_t(1.0, &c.z, &mut r);
        norm_inf(&r) / -by_hz
    } else {
        f64::INFINITY
    };
    let cx = dot(&prob.c, &c.x);
    let infd = if cx < 0.0 {
        let mut ra = vec![0.0; prob.a.nrows];
        prob.a.gemv(1.0, &c.x, &mut ra);
        let mut rg = c.s.clone();
        prob.g.gemv(1.0, &c.x, &mut rg);
        norm_inf(&ra).max(norm_inf(&rg)) / -cx
    } else {
        f64::INFINITY
    };
    (infp, infd)
}
