//! Local solver for the rank-one problem behind a [`LiftedModel`].
//!
//! The lifted entries are substituted by `W_ij = a_i a_j + b_i b_j` and
//! `T_ij = b_i a_j − a_i b_j` (`y = a + ib`), which turns the model into a
//! smooth nonconvex NLP over `(a, b, aux)` with box bounds. It is solved by
//! an augmented Lagrangian with a projected L-BFGS inner loop, followed by
//! Gauss-Newton feasibility restoration.

use crate::lifted::{LExpr, LiftedModel, Term};
use crate::model::LiftedIndex;
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::relax::program::Sense;

#[derive(Debug, Clone)]
pub struct LocalResult {
    /// Lifted vector `y` (with `y_0 = 1` in homogenized models).
    pub y: ComplexVector,
    pub aux: Vec<f64>,
    pub objective: f64,
    pub maxviol: f64,
}

/// Smoothing of the cone norm at the apex.
const SOC_EPS: f64 = 1e-7;

enum Fun {
    Lin(LExpr),
    /// `√(‖tail‖² + ε²) − head`
    Soc(LExpr, Vec<LExpr>),
}

struct Con {
    f: Fun,
    eq: bool,
}

/// The NLP in the variables `z = [a; b; aux]`.
pub struct Nlp<'a> {
    model: &'a LiftedModel,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cons: Vec<Con>,
}

impl<'a> Nlp<'a> {
    pub fn new(model: &'a LiftedModel) -> Self {
        let n = model.dim;
        let nz = 2 * n + model.num_aux();
        let mut lo = vec![f64::NEG_INFINITY; nz];
        let mut hi = vec![f64::INFINITY; nz];
        let eb = &model.root_bounds;
        for i in 0..n {
            let r = eb.upper(LiftedIndex::new(i, i)).max(0.0).sqrt();
            lo[i] = -r;
            hi[i] = r;
            lo[n + i] = -r;
            hi[n + i] = r;
            if let Some(Some(b)) = model.component_box.as_ref().map(|v| v.get(i).copied().flatten()) {
                lo[i] = lo[i].max(b.re_lo);
                hi[i] = hi[i].min(b.re_hi);
                lo[n + i] = lo[n + i].max(b.im_lo);
                hi[n + i] = hi[n + i].min(b.im_hi);
            }
            if model.real {
                lo[n + i] = 0.0;
                hi[n + i] = 0.0;
            }
        }
        if model.homogenized {
            lo[0] = 1.0;
            hi[0] = 1.0;
            lo[n] = 0.0;
            hi[n] = 0.0;
        }
        if let Some(r) = model.phase_ref {
            lo[n + r] = 0.0;
            hi[n + r] = 0.0;
            lo[r] = lo[r].max(0.0);
        }
        for k in 0..model.num_aux() {
            lo[2 * n + k] = model.aux_lb[k];
            hi[2 * n + k] = model.aux_ub[k];
        }
        let mut cons = Vec::new();
        for (e, s) in &model.rows {
            match s {
                Sense::Le => cons.push(Con { f: Fun::Lin(e.clone()), eq: false }),
                Sense::Ge => cons.push(Con { f: Fun::Lin(e.scaled(-1.0)), eq: false }),
                Sense::Eq => cons.push(Con { f: Fun::Lin(e.clone()), eq: true }),
            }
        }
        for (h, t) in &model.socs {
            cons.push(Con { f: Fun::Soc(h.clone(), t.clone()), eq: false });
            cons.push(Con { f: Fun::Lin(h.scaled(-1.0)), eq: false });
        }
        for i in 0..n {
            if model.homogenized && i == 0 {
                continue;
            }
            let (l, u) = eb.interval(LiftedIndex::new(i, i));
            if l > 0.0 {
                let mut e = LExpr::constant(l);
                e.add(Term::w(i, i), -1.0);
                cons.push(Con { f: Fun::Lin(e), eq: false });
            }
            if u.is_finite() {
                let mut e = LExpr::constant(-u);
                e.add(Term::w(i, i), 1.0);
                cons.push(Con { f: Fun::Lin(e), eq: false });
            }
        }
        if !model.real {
            for e in &model.tracked {
                let (l, u) = eb.interval(*e);
                if !(l.is_finite() && u.is_finite()) {
                    continue;
                }
                let w = Term::w(e.i, e.j);
                let t = Term::T(e.i, e.j);
                let mut g0 = LExpr::default();
                g0.add(w, -1.0);
                let mut g1 = LExpr::default();
                g1.add(w, l).add(t, -1.0);
                let mut g2 = LExpr::default();
                g2.add(t, 1.0).add(w, -u);
                for g in [g0, g1, g2] {
                    cons.push(Con { f: Fun::Lin(g), eq: false });
                }
            }
        }
        Self { model, n, lo, hi, cons }
    }

    pub fn num_vars(&self) -> usize {
        self.lo.len()
    }

    fn term_val(&self, t: Term, z: &[f64]) -> f64 {
        let n = self.n;
        match t {
            Term::W(i, j) => z[i] * z[j] + z[n + i] * z[n + j],
            Term::T(i, j) => z[n + i] * z[j] - z[i] * z[n + j],
            Term::Aux(k) => z[2 * n + k],
        }
    }

    fn term_grad(&self, t: Term, z: &[f64], s: f64, g: &mut [f64]) {
        let n = self.n;
        match t {
            Term::W(i, j) => {
                g[i] += s * z[j];
                g[j] += s * z[i];
                g[n + i] += s * z[n + j];
                g[n + j] += s * z[n + i];
            }
            Term::T(i, j) => {
                g[n + i] += s * z[j];
                g[j] += s * z[n + i];
                g[i] -= s * z[n + j];
                g[n + j] -= s * z[i];
            }
            Term::Aux(k) => g[2 * n + k] += s,
        }
    }

    fn lin_val(&self, e: &LExpr, z: &[f64]) -> f64 {
        e.constant + e.terms.iter().map(|&(t, c)| c * self.term_val(t, z)).sum::<f64>()
    }

    fn lin_grad(&self, e: &LExpr, z: &[f64], s: f64, g: &mut [f64]) {
        for &(t, c) in &e.terms {
            self.term_grad(t, z, s * c, g);
        }
    }

    fn con_val(&self, c: &Con, z: &[f64]) -> f64 {
        match &c.f {
            Fun::Lin(e) => self.lin_val(e, z),
            Fun::Soc(h, t) => self.soc_norm(t, z) - self.lin_val(h, z),
        }
    }

    fn con_grad(&self, c: &Con, z: &[f64], s: f64, g: &mut [f64]) {
        match &c.f {
            Fun::Lin(e) => self.lin_grad(e, z, s, g),
            Fun::Soc(h, t) => {
                let nrm = self.soc_norm(t, z);
                for e in t {
                    let v = self.lin_val(e, z);
                    self.lin_grad(e, z, s * v / nrm, g);
                }
                self.lin_grad(h, z, -s, g);
            }
        }
    }

    fn soc_norm(&self, t: &[LExpr], z: &[f64]) -> f64 {
        (t.iter().map(|e| self.lin_val(e, z).powi(2)).sum::<f64>() + SOC_EPS * SOC_EPS).sqrt()
    }

    fn con_viol(&self, c: &Con, z: &[f64]) -> f64 {
        let v = self.con_val(c, z);
        if c.eq {
            v.abs()
        } else {
            v.max(0.0)
        }
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.lin_val(&self.model.objective, z)
    }

    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for c in &self.cons {
            v = v.max(self.con_viol(c, z));
        }
        for k in 0..z.len() {
            v = v.max(self.lo[k] - z[k]).max(z[k] - self.hi[k]);
        }
        v
    }

    /// Box of `z` as `(lo, hi)`.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn project(&self, z: &mut [f64]) {
        for k in 0..z.len() {
            z[k] = z[k].clamp(self.lo[k], self.hi[k]);
        }
    }

    /// Packs a lifted vector and auxiliaries into `z`.
    pub fn pack(&self, y: &ComplexVector, aux: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.num_vars()];
        for i in 0..self.n {
            z[i] = y.re[i];
            z[self.n + i] = y.im[i];
        }
        for (k, v) in aux.iter().enumerate().take(self.model.num_aux()) {
            z[2 * self.n + k] = *v;
        }
        self.project(&mut z);
        z
    }

    pub fn unpack(&self, z: &[f64]) -> (ComplexVector, Vec<f64>) {
        let n = self.n;
        let y = ComplexVector { re: z[..n].to_vec(), im: z[n..2 * n].to_vec() };
        (y, z[2 * n..].to_vec())
    }

    /// Augmented Lagrangian value and gradient.
    fn al(&self, z: &[f64], mult: &[f64], rho: f64, fscale: f64, g: &mut [f64]) -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut val = self.objective(z) / fscale;
        self.lin_grad(&self.model.objective, z, 1.0 / fscale, g);
        for (c, &m) in self.cons.iter().zip(mult) {
            let v = self.con_val(c, z);
            if c.eq {
                val += m * v + 0.5 * rho * v * v;
                self.con_grad(c, z, m + rho * v, g);
            } else {
                let s = (v + m / rho).max(0.0);
                if s > 0.0 {
                    val += 0.5 * rho * (s * s - (m / rho).powi(2));
                    self.con_grad(c, z, rho * s, g);
                } else {
                    val -= 0.5 * m * m / rho;
                }
            }
        }
        val
    }

    fn projected_grad_norm(&self, z: &[f64], g: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..z.len() {
            let p = (z[k] - g[k]).clamp(self.lo[k], self.hi[k]) - z[k];
            m = m.max(p.abs());
        }
        m
    }

    /// Projected L-BFGS on the augmented Lagrangian.
    fn inner(&self, z: &mut Vec<f64>, mult: &[f64], rho: f64, fscale: f64, max_iter: usize, tol: f64) {
        let nz = z.len();
        let mut g = vec![0.0; nz];
        let mut f = self.al(z, mult, rho, fscale, &mut g);
        let mem = 8;
        let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
        for _ in 0..max_iter {
            if self.projected_grad_norm(z, &g) <= tol {
                break;
            }
            // Variables pinned at a bound with the gradient pushing outward.
            let free: Vec<bool> = (0..nz)
                .map(|k| {
                    let at_lo = z[k] <= self.lo[k] + 1e-12 && g[k] > 0.0;
                    let at_hi = z[k] >= self.hi[k] - 1e-12 && g[k] < 0.0;
                    !(at_lo || at_hi) && self.lo[k] < self.hi[k]
                })
                .collect();
            let mut q: Vec<f64> = (0..nz).map(|k| if free[k] { g[k] } else { 0.0 }).collect();
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, r) in hist.iter().rev() {
                let a = r * dot(s, &q);
                axpy(-a, y, &mut q);
                alphas.push(a);
            }
            if let Some((s, y, _)) = hist.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|v| *v *= gamma);
            }
            for ((s, y, r), a) in hist.iter().zip(alphas.iter().rev()) {
                let b = r * dot(y, &q);
                axpy(a - b, s, &mut q);
            }
            let mut d: Vec<f64> = (0..nz).map(|k| if free[k] { -q[k] } else { 0.0 }).collect();
            if dot(&d, &g) >= 0.0 {
                d = (0..nz).map(|k| if free[k] { -g[k] } else { 0.0 }).collect();
                hist.clear();
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut zn: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                self.project(&mut zn);
                let mut gn = vec![0.0; nz];
                let fnew = self.al(&zn, mult, rho, fscale, &mut gn);
                let dec: f64 = g.iter().zip(zn.iter().zip(z.iter())).map(|(gi, (a, b))| gi * (a - b)).sum();
                if fnew.is_finite() && fnew <= f + 1e-4 * dec {
                    accepted = Some((zn, gn, fnew));
                    break;
                }
                step *= 0.5;
            }
            let Some((zn, gn, fnew)) = accepted else { break };
            let s: Vec<f64> = zn.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                hist.push_back((s, y, 1.0 / sy));
                if hist.len() > mem {
                    hist.pop_front();
                }
            }
            let rel = (f - fnew).abs() / (1.0 + f.abs());
            *z = zn;
            g = gn;
            f = fnew;
            if rel < 1e-15 {
                break;
            }
        }
    }

    /// Gauss-Newton minimum-norm steps on the violated constraints.
    fn restore(&self, z: &mut Vec<f64>, target: f64) {
        let nz = z.len();
        for _ in 0..30 {
            if self.max_violation(z) <= target {
                return;
            }
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut rhs: Vec<f64> = Vec::new();
            for c in &self.cons {
                let v = self.con_val(c, z);
                if (c.eq && v == 0.0) || (!c.eq && v <= 0.0) {
                    continue;
                }
                let mut g = vec![0.0; nz];
                self.con_grad(c, z, 1.0, &mut g);
                for k in 0..nz {
                    if self.lo[k] == self.hi[k] {
                        g[k] = 0.0;
                    }
                }
                rows.push(g);
                rhs.push(v);
            }
            if rows.is_empty() {
                self.project(z);
                return;
            }
            let m = rows.len();
            let j = nalgebra::DMatrix::from_fn(m, nz, |r, k| rows[r][k]);
            let jjt = &j * j.transpose() + nalgebra::DMatrix::identity(m, m) * 1e-12;
            let Some(sol) = jjt.lu().solve(&nalgebra::DVector::from_vec(rhs)) else { return };
            let dz = j.transpose() * sol;
            let before = self.max_violation(z);
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let mut zn: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a - step * b).collect();
                self.project(&mut zn);
                if self.max_violation(&zn) < before {
                    *z = zn;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                return;
            }
        }
    }

    /// Runs the local solver from `z0`.
    pub fn solve(&self, z0: &[f64]) -> LocalResult {
        let mut z = z0.to_vec();
        self.project(&mut z);
        let fscale = self.objective(&z).abs().max(1.0);
        let mut mult = vec![0.0; self.cons.len()];
        let mut rho = 10.0;
        let mut last_viol = f64::INFINITY;
        for _ in 0..40 {
            self.inner(&mut z, &mult, rho, fscale, 400, 1e-10);
            let viol = self.max_violation(&z);
            for (c, m) in self.cons.iter().zip(mult.iter_mut()) {
                let v = self.con_val(c, &z);
                *m = if c.eq { *m + rho * v } else { (*m + rho * v).max(0.0) };
            }
            if viol <= 1e-9 {
                let mut g = vec![0.0; z.len()];
                self.al(&z, &mult, rho, fscale, &mut g);
                if self.projected_grad_norm(&z, &g) <= 1e-7 {
                    break;
                }
            }
            if viol > 0.25 * last_viol {
                rho = (rho * 10.0).min(1e9);
            }
            last_viol = viol;
        }
        self.restore(&mut z, 1e-10);
        let (y, aux) = self.unpack(&z);
        LocalResult { objective: self.objective(&z), maxviol: self.max_violation(&z), y, aux }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Rank-one lifted matrix of a local solution.
pub fn lifted_point(res: &LocalResult) -> HermitianMatrix {
    HermitianMatrix::outer(&res.y)
}
