//! Cone arithmetic for the product of a nonnegative orthant and a list of
//! second-order cones, including Nesterov–Todd scaling.

/// Layout of the cone `K`: the first `nonneg` slack entries are in the
/// orthant, followed by second-order cones of the given sizes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeSpec {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant entry plus one per second-order cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// Start offsets of the second-order cones.
    pub fn soc_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.soc.len());
        let mut k = self.nonneg;
        for &q in &self.soc {
            out.push(k);
            k += q;
        }
        out
    }

    /// Smallest "eigenvalue" of `u`; positive iff `u` lies in the interior.
    pub fn min_eig(&self, u: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &v in &u[..self.nonneg] {
            m = m.min(v);
        }
        for (off, &q) in self.soc_offsets().iter().zip(&self.soc) {
            let b = &u[*off..off + q];
            m = m.min(b[0] - norm(&b[1..]));
        }
        m
    }

    /// Adds `alpha * e` where `e` is the identity of the cone.
    pub fn add_identity(&self, u: &mut [f64], alpha: f64) {
        for v in &mut u[..self.nonneg] {
            *v += alpha;
        }
        for off in self.soc_offsets() {
            u[off] += alpha;
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn jordan(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for (off, &q) in self.soc_offsets().iter().zip(&self.soc) {
            let (a, b) = (&u[*off..off + q], &v[*off..off + q]);
            out[*off] = dot(a, b);
            for k in 1..q {
                out[off + k] = a[0] * b[k] + b[0] * a[k];
            }
        }
    }

    /// Solves `lambda ∘ x = d` for `x`.
    pub fn jordan_div(&self, lambda: &[f64], d: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = d[i] / lambda[i];
        }
        for (off, &q) in self.soc_offsets().iter().zip(&self.soc) {
            let l = &lambda[*off..off + q];
            let dd = &d[*off..off + q];
            let det = l[0] * l[0] - dot(&l[1..], &l[1..]);
            let x0 = (l[0] * dd[0] - dot(&l[1..], &dd[1..])) / det;
            out[*off] = x0;
            for k in 1..q {
                out[off + k] = (dd[k] - x0 * l[k]) / l[0];
            }
        }
    }

    /// Largest step `alpha <= cap` keeping `u + alpha * d` inside the cone.
    pub fn max_step(&self, u: &[f64], d: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        for i in 0..self.nonneg {
            if d[i] < 0.0 {
                alpha = alpha.min(-u[i] / d[i]);
            }
        }
        for (off, &q) in self.soc_offsets().iter().zip(&self.soc) {
            let (a, b) = (&u[*off..off + q], &d[*off..off + q]);
            alpha = alpha.min(soc_step(a, b));
        }
        alpha.max(0.0)
    }
}

fn soc_step(u: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = -u[0] / d[0];
    }
    // (u0 + a d0)^2 - |u1 + a d1|^2 >= 0
    let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let qb = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let qc = (u[0] * u[0] - dot(&u[1..], &u[1..])).max(0.0);
    let root = smallest_positive_root(qa, qb, qc);
    alpha.min(root)
}

/// Smallest positive root of `a t^2 + 2 b t + c` given `c >= 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return f64::INFINITY;
    }
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -(b + b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-b / a, -b / a) };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Nesterov–Todd scaling point for the current `(s, z)` pair.
#[derive(Debug, Clone)]
pub struct NtScaling {
    spec: ConeSpec,
    offsets: Vec<usize>,
    /// orthant: `sqrt(s/z)`
    d: Vec<f64>,
    /// per cone: `eta` and the normalized scaling vector
    eta: Vec<f64>,
    wbar: Vec<f64>,
}

impl NtScaling {
    pub fn new(spec: &ConeSpec) -> Self {
        Self {
            spec: spec.clone(),
            offsets: spec.soc_offsets(),
            d: vec![1.0; spec.nonneg],
            eta: vec![1.0; spec.soc.len()],
            wbar: {
                let mut w = vec![0.0; spec.dim()];
                spec.add_identity(&mut w, 1.0);
                w
            },
        }
    }

    /// Recomputes the scaling; returns `false` if a point left the interior.
    pub fn update(&mut self, s: &[f64], z: &[f64]) -> bool {
        for i in 0..self.spec.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return false;
            }
            self.d[i] = (s[i] / z[i]).sqrt();
        }
        for (c, (&off, &q)) in self.offsets.iter().zip(&self.spec.soc).enumerate() {
            let sb = &s[off..off + q];
            let zb = &z[off..off + q];
            let sres = sb[0] * sb[0] - dot(&sb[1..], &sb[1..]);
            let zres = zb[0] * zb[0] - dot(&zb[1..], &zb[1..]);
            if !(sres > 0.0 && zres > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return false;
            }
            let sn = sres.sqrt();
            let zn = zres.sqrt();
            let mut sz = sb[0] * zb[0];
            for k in 1..q {
                sz += sb[k] * zb[k];
            }
            let gamma = ((1.0 + sz / (sn * zn)) / 2.0).sqrt();
            let w = &mut self.wbar[off..off + q];
            w[0] = (sb[0] / sn + zb[0] / zn) / (2.0 * gamma);
            for k in 1..q {
                w[k] = (sb[k] / sn - zb[k] / zn) / (2.0 * gamma);
            }
            // renormalize so that w'Jw = 1 exactly
            let wn = (w[0] * w[0] - dot(&w[1..], &w[1..])).max(1e-300).sqrt();
            w.iter_mut().for_each(|v| *v /= wn);
            self.eta[c] = (sres / zres).powf(0.25);
        }
        true
    }

    /// `out = W v`
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.spec.nonneg {
            out[i] = self.d[i] * v[i];
        }
        for (c, (&off, &q)) in self.offsets.iter().zip(&self.spec.soc).enumerate() {
            let w = &self.wbar[off..off + q];
            let vb = &v[off..off + q];
            let eta = self.eta[c];
            let w1v1 = dot(&w[1..], &vb[1..]);
            out[off] = eta * (w[0] * vb[0] + w1v1);
            let coef = w1v1 / (1.0 + w[0]) + vb[0];
            for k in 1..q {
                out[off + k] = eta * (vb[k] + coef * w[k]);
            }
        }
    }

    /// `out = W^{-1} v`
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.spec.nonneg {
            out[i] = v[i] / self.d[i];
        }
        for (c, (&off, &q)) in self.offsets.iter().zip(&self.spec.soc).enumerate() {
            let w = &self.wbar[off..off + q];
            let vb = &v[off..off + q];
            let eta = self.eta[c];
            let w1v1 = dot(&w[1..], &vb[1..]);
            out[off] = (w[0] * vb[0] - w1v1) / eta;
            let coef = w1v1 / (1.0 + w[0]) - vb[0];
            for k in 1..q {
                out[off + k] = (vb[k] + coef * w[k]) / eta;
            }
        }
    }

    /// `out = W² v`
    pub fn apply_sq(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.spec.nonneg {
            out[i] = self.d[i] * self.d[i] * v[i];
        }
        for (c, (&off, &q)) in self.offsets.iter().zip(&self.spec.soc).enumerate() {
            let w = &self.wbar[off..off + q];
            let vb = &v[off..off + q];
            let e2 = self.eta[c] * self.eta[c];
            let wv = dot(w, vb);
            out[off] = e2 * (2.0 * w[0] * wv - vb[0]);
            for k in 1..q {
                out[off + k] = e2 * (2.0 * w[k] * wv + vb[k]);
            }
        }
    }

    /// Entries of the upper triangle of `W²`, in the order produced by
    /// [`w2_pattern`].
    pub fn w2_values(&self, out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.spec.nonneg {
            out.push(self.d[i] * self.d[i]);
        }
        for (c, (&off, &q)) in self.offsets.iter().zip(&self.spec.soc).enumerate() {
            let w = &self.wbar[off..off + q];
            let e2 = self.eta[c] * self.eta[c];
            for j in 0..q {
                for i in 0..=j {
                    let mut v = 2.0 * w[i] * w[j];
                    if i == j {
                        v += if i == 0 { -1.0 } else { 1.0 };
                    }
                    out.push(e2 * v);
                }
            }
        }
    }
}

/// Upper-triangle `(i, j)` pattern of `W²` relative to the slack offset.
pub fn w2_pattern(spec: &ConeSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..spec.nonneg {
        out.push((i, i));
    }
    for (off, &q) in spec.soc_offsets().iter().zip(&spec.soc) {
        for j in 0..q {
            for i in 0..=j {
                out.push((off + i, off + j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ConeSpec {
        ConeSpec {
            nonneg: 2,
            soc: vec![3, 4],
        }
    }

    #[test]
    fn nt_scaling_maps_z_to_s() {
        let k = spec();
        let s = vec![1.0, 2.0, 3.0, 1.0, -2.0, 5.0, 1.0, 2.0, -3.0];
        let z = vec![0.5, 4.0, 2.0, -1.0, 0.5, 4.0, -2.0, 0.0, 1.0];
        let mut w = NtScaling::new(&k);
        assert!(w.update(&s, &z));
        let mut wz = vec![0.0; 9];
        let mut winv_s = vec![0.0; 9];
        w.apply(&z, &mut wz);
        w.apply_inv(&s, &mut winv_s);
        for (a, b) in wz.iter().zip(&winv_s) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // W² z = s
        let mut w2z = vec![0.0; 9];
        w.apply_sq(&z, &mut w2z);
        for (a, b) in w2z.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
        // W W^{-1} = I
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut t = vec![0.0; 9];
        let mut back = vec![0.0; 9];
        w.apply_inv(&v, &mut t);
        w.apply(&t, &mut back);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let k = spec();
        let l = vec![1.0, 2.0, 3.0, 1.0, -1.0, 5.0, 1.0, 2.0, -3.0];
        let x = vec![0.3, -1.0, 2.0, 0.2, 0.1, -1.0, 0.5, 0.5, 0.5];
        let mut p = vec![0.0; 9];
        let mut back = vec![0.0; 9];
        k.jordan(&l, &x, &mut p);
        k.jordan_div(&l, &p, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let k = ConeSpec {
            nonneg: 0,
            soc: vec![3],
        };
        // from (1,0,0) along (0,1,0): boundary at alpha=1
        let a = k.max_step(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 10.0);
        assert!((a - 1.0).abs() < 1e-12);
        // along (1, 0, 0) never leaves
        assert_eq!(k.max_step(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 10.0), 10.0);
        // along (-1, 0, 0): apex at alpha=1
        let a = k.max_step(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], 10.0);
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w2_values_match_apply_sq() {
        let k = spec();
        let s = vec![1.0, 2.0, 3.0, 1.0, -2.0, 5.0, 1.0, 2.0, -3.0];
        let z = vec![0.5, 4.0, 2.0, -1.0, 0.5, 4.0, -2.0, 0.0, 1.0];
        let mut w = NtScaling::new(&k);
        w.update(&s, &z);
        let mut vals = Vec::new();
        w.w2_values(&mut vals);
        let pat = w2_pattern(&k);
        let v: Vec<f64> = (0..9).map(|i| (i as f64 + 1.0).ln()).collect();
        let mut dense = vec![0.0; 9];
        for (&(i, j), &x) in pat.iter().zip(&vals) {
            dense[i] += x * v[j];
            if i != j {
                dense[j] += x * v[i];
            }
        }
        let mut direct = vec![0.0; 9];
        w.apply_sq(&v, &mut direct);
        for (a, b) in dense.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
