//! Dense primal-dual interior-point method for
//!
//! ```text
//! min c'x   s.t.   Ax = b,   s = h − Gx ∈ K
//! ```
//!
//! with `K` a product of the nonnegative orthant, second-order cones and
//! real PSD cones (in `svec` form). The iteration runs on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector, so infeasibility is detected from certificates
//! rather than from a phase-one problem.
//!
//! Each Newton system is reduced to `[[G̃'G̃, A'], [A, 0]]` with
//! `G̃ = W^{-T}G`, solved by LU and polished with iterative refinement on
//! the unreduced system.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::program::{smat, svec, svec_index, ConeDims, StandardForm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    /// Residual level at which a stalled run is still reported as
    /// [`IpmStatus::Inaccurate`] instead of a failure.
    pub near_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { max_iter: 200, feastol: 1e-8, abstol: 1e-9, reltol: 1e-8, near_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpmStatus {
    Optimal,
    /// Stopped before reaching the tolerances but close to optimal.
    Inaccurate,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    /// `c'x + offset` and `−b'y − h'z + offset`.
    pub pcost: f64,
    pub dcost: f64,
    pub pres: f64,
    pub dres: f64,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Cone algebra
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Cones {
    dims: ConeDims,
    /// Offsets of each SOC and PSD block in the stacked vector.
    q_off: Vec<usize>,
    s_off: Vec<usize>,
}

impl Cones {
    fn new(dims: ConeDims) -> Self {
        let mut off = dims.l;
        let mut q_off = Vec::new();
        for &q in &dims.q {
            q_off.push(off);
            off += q;
        }
        let mut s_off = Vec::new();
        for &k in &dims.s {
            s_off.push(off);
            off += k * (k + 1) / 2;
        }
        Self { dims, q_off, s_off }
    }

    fn degree(&self) -> f64 {
        self.dims.degree() as f64
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dims.total());
        e.rows_mut(0, self.dims.l).fill(1.0);
        for &o in &self.q_off {
            e[o] = 1.0;
        }
        for (b, &o) in self.s_off.iter().enumerate() {
            let k = self.dims.s[b];
            for a in 0..k {
                e[o + svec_index(k, a, a)] = 1.0;
            }
        }
        e
    }

    /// Jordan product `u ∘ v`.
    fn prod(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for i in 0..self.dims.l {
            out[i] = u[i] * v[i];
        }
        for (b, &o) in self.q_off.iter().enumerate() {
            let q = self.dims.q[b];
            let (uu, vv) = (u.rows(o, q), v.rows(o, q));
            out[o] = uu.dot(&vv);
            for i in 1..q {
                out[o + i] = uu[0] * vv[i] + vv[0] * uu[i];
            }
        }
        for (b, &o) in self.s_off.iter().enumerate() {
            let k = self.dims.s[b];
            let len = k * (k + 1) / 2;
            let um = smat(u.rows(o, len).as_slice(), k);
            let vm = smat(v.rows(o, len).as_slice(), k);
            let p = (&um * &vm + &vm * &um) * 0.5;
            out.rows_mut(o, len).copy_from(&svec(&p));
        }
        out
    }

    /// Solves `λ ∘ x = v` for a scaled point `λ` (diagonal on PSD blocks).
    fn div(&self, lam: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.dims.l {
            out[i] = v[i] / lam[i];
        }
        for (b, &o) in self.q_off.iter().enumerate() {
            let q = self.dims.q[b];
            let l0 = lam[o];
            let l1 = lam.rows(o + 1, q - 1);
            let v1 = v.rows(o + 1, q - 1);
            let det = l0 * l0 - l1.norm_squared();
            let x0 = (l0 * v[o] - l1.dot(&v1)) / det;
            out[o] = x0;
            for i in 1..q {
                out[o + i] = (v[o + i] - x0 * lam[o + i]) / l0;
            }
        }
        for (b, &o) in self.s_off.iter().enumerate() {
            let k = self.dims.s[b];
            for c in 0..k {
                for a in c..k {
                    let idx = o + svec_index(k, a, c);
                    let la = lam[o + svec_index(k, a, a)];
                    let lc = lam[o + svec_index(k, c, c)];
                    out[idx] = 2.0 * v[idx] / (la + lc);
                }
            }
        }
        out
    }

    /// Largest `α` (possibly `∞`) with `u + α d ∈ K`, for `u` strictly
    /// inside `K` and diagonal on PSD blocks.
    fn max_step(&self, u: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.dims.l {
            if d[i] < 0.0 {
                alpha = alpha.min(-u[i] / d[i]);
            }
        }
        for (b, &o) in self.q_off.iter().enumerate() {
            let q = self.dims.q[b];
            let (uu, dd) = (u.rows(o, q), d.rows(o, q));
            let jdot = |a: &nalgebra::DVectorView<f64>, b: &nalgebra::DVectorView<f64>| {
                a[0] * b[0] - a.rows(1, q - 1).dot(&b.rows(1, q - 1))
            };
            let qa = jdot(&dd, &dd);
            let qb = 2.0 * jdot(&uu, &dd);
            let qc = jdot(&uu, &uu);
            alpha = alpha.min(smallest_positive_root(qa, qb, qc));
        }
        for (b, &o) in self.s_off.iter().enumerate() {
            let k = self.dims.s[b];
            let len = k * (k + 1) / 2;
            let dm = smat(d.rows(o, len).as_slice(), k);
            let isq: Vec<f64> = (0..k).map(|a| 1.0 / u[o + svec_index(k, a, a)].sqrt()).collect();
            let m = DMatrix::from_fn(k, k, |a, c| dm[(a, c)] * isq[a] * isq[c]);
            let lmin = SymmetricEigen::new(m).eigenvalues.min();
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        alpha
    }
}

/// Smallest positive root of `qa·α² + qb·α + qc` with `qc > 0`, or `∞`.
fn smallest_positive_root(qa: f64, qb: f64, qc: f64) -> f64 {
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-14 * scale {
        return if qb < 0.0 { -qc / qb } else { f64::INFINITY };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let t = -0.5 * (qb + qb.signum() * sq);
    let (r1, r2) = if t != 0.0 { (t / qa, qc / t) } else { ((-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)) };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum BlockScaling {
    Soc { beta: f64, w: DVector<f64> },
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64>, sig: DVector<f64> },
}

#[derive(Debug, Clone)]
struct Scaling {
    d: DVector<f64>,
    blocks: Vec<BlockScaling>,
    lambda: DVector<f64>,
}

#[derive(Clone, Copy)]
enum Op {
    W,
    Wt,
    Winv,
    WinvT,
}

impl Scaling {
    fn compute(cones: &Cones, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let l = cones.dims.l;
        let mut lambda = DVector::zeros(s.len());
        let mut d = DVector::zeros(l);
        for i in 0..l {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            d[i] = (s[i] / z[i]).sqrt();
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut blocks = Vec::new();
        for (b, &o) in cones.q_off.iter().enumerate() {
            let q = cones.dims.q[b];
            let (ss, zz) = (s.rows(o, q), z.rows(o, q));
            let sj = ss[0] * ss[0] - ss.rows(1, q - 1).norm_squared();
            let zj = zz[0] * zz[0] - zz.rows(1, q - 1).norm_squared();
            if !(sj > 0.0 && zj > 0.0 && ss[0] > 0.0 && zz[0] > 0.0) {
                return None;
            }
            let (a, bb) = (sj.sqrt(), zj.sqrt());
            let sb = ss / a;
            let zb = zz / bb;
            let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
            let mut w = DVector::zeros(q);
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..q {
                w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
            }
            blocks.push(BlockScaling::Soc { beta: (a / bb).sqrt(), w });
        }
        for (b, &o) in cones.s_off.iter().enumerate() {
            let k = cones.dims.s[b];
            let len = k * (k + 1) / 2;
            let sm = smat(s.rows(o, len).as_slice(), k);
            let zm = smat(z.rows(o, len).as_slice(), k);
            let ls = nalgebra::Cholesky::new(sm)?.l();
            let lz = nalgebra::Cholesky::new(zm)?.l();
            let svd = (lz.transpose() * &ls).svd(true, true);
            let (vt, sig) = (svd.v_t?, svd.singular_values);
            if sig.iter().any(|&x| !(x > 0.0)) {
                return None;
            }
            let v = vt.transpose();
            let r = &ls * &v * DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
            let lsinv = ls.clone().try_inverse()?;
            let rinv = DMatrix::from_diagonal(&sig.map(|x| x.sqrt())) * &vt * lsinv;
            blocks.push(BlockScaling::Psd { r, rinv, sig });
        }
        let mut sc = Self { d, blocks, lambda };
        // λ = W z on the SOC and PSD blocks.
        let wz = sc.apply(cones, Op::W, z);
        sc.lambda.rows_mut(l, s.len() - l).copy_from(&wz.rows(l, s.len() - l));
        // On PSD blocks W z = diag(σ) exactly.
        let nq = cones.q_off.len();
        for (b, &o) in cones.s_off.iter().enumerate() {
            let k = cones.dims.s[b];
            let BlockScaling::Psd { sig, .. } = &sc.blocks[nq + b] else { unreachable!() };
            for c in 0..k {
                for a in c..k {
                    sc.lambda[o + svec_index(k, a, c)] = if a == c { sig[a] } else { 0.0 };
                }
            }
        }
        Some(sc)
    }

    fn apply(&self, cones: &Cones, op: Op, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..cones.dims.l {
            out[i] = match op {
                Op::W | Op::Wt => self.d[i] * v[i],
                Op::Winv | Op::WinvT => v[i] / self.d[i],
            };
        }
        let nq = cones.q_off.len();
        for (b, blk) in self.blocks.iter().enumerate() {
            match blk {
                BlockScaling::Soc { beta, w } => {
                    let o = cones.q_off[b];
                    let q = cones.dims.q[b];
                    let vv = v.rows(o, q);
                    let w1 = w.rows(1, q - 1);
                    let v1 = vv.rows(1, q - 1);
                    let inv = matches!(op, Op::Winv | Op::WinvT);
                    let sgn = if inv { -1.0 } else { 1.0 };
                    let sc = if inv { 1.0 / beta } else { *beta };
                    let w1v1 = w1.dot(&v1);
                    out[o] = sc * (w[0] * vv[0] + sgn * w1v1);
                    let coef = sgn * vv[0] + w1v1 / (1.0 + w[0]);
                    for i in 1..q {
                        out[o + i] = sc * (vv[i] + coef * w[i]);
                    }
                }
                BlockScaling::Psd { r, rinv, .. } => {
                    let sb = b - nq;
                    let o = cones.s_off[sb];
                    let k = cones.dims.s[sb];
                    let len = k * (k + 1) / 2;
                    let m = smat(v.rows(o, len).as_slice(), k);
                    let res = match op {
                        Op::W => r.transpose() * m * r,
                        Op::Wt => r * m * r.transpose(),
                        Op::Winv => rinv.transpose() * m * rinv,
                        Op::WinvT => rinv * m * rinv.transpose(),
                    };
                    out.rows_mut(o, len).copy_from(&svec(&res));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Newton systems
// ---------------------------------------------------------------------------

struct Kkt<'a> {
    a: &'a DMatrix<f64>,
    g: &'a DMatrix<f64>,
    gt: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    p: usize,
}

impl<'a> Kkt<'a> {
    fn factor(a: &'a DMatrix<f64>, g: &'a DMatrix<f64>, cones: &Cones, sc: &Scaling) -> Option<Self> {
        let (p, n) = (a.nrows(), g.ncols());
        let mut gt = DMatrix::zeros(g.nrows(), n);
        for j in 0..n {
            let col = DVector::from_iterator(g.nrows(), g.column(j).iter().copied());
            gt.set_column(j, &sc.apply(cones, Op::WinvT, &col));
        }
        let h = gt.transpose() * &gt;
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            k[(i, i)] += 1e-12 * h[(i, i)] + 1e-13;
        }
        k.view_mut((0, n), (n, p)).copy_from(&a.transpose());
        k.view_mut((n, 0), (p, n)).copy_from(a);
        for i in 0..p {
            k[(n + i, n + i)] = -1e-13;
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self { a, g, gt, lu, n, p })
    }

    /// Solves `[0 A' G'; −A 0 0; −G 0 W'W] [u; v; w] = [f1; f2; f3]`.
    fn solve(
        &self,
        cones: &Cones,
        sc: &Scaling,
        f1: &DVector<f64>,
        f2: &DVector<f64>,
        f3: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (mut u, mut v, mut w) = self.solve_once(cones, sc, f1, f2, f3)?;
        for _ in 0..8 {
            let r1 = f1 - (self.a.transpose() * &v + self.g.transpose() * &w);
            let r2 = f2 + self.a * &u;
            let wtw = sc.apply(cones, Op::Wt, &sc.apply(cones, Op::W, &w));
            let r3 = f3 - (-(self.g * &u) + wtw);
            let scale = 1.0 + f1.amax().max(f2.amax()).max(f3.amax());
            if r1.amax().max(r2.amax()).max(r3.amax()) <= 1e-14 * scale {
                break;
            }
            let (du, dv, dw) = self.solve_once(cones, sc, &r1, &r2, &r3)?;
            u += du;
            v += dv;
            w += dw;
        }
        Some((u, v, w))
    }

    fn solve_once(
        &self,
        cones: &Cones,
        sc: &Scaling,
        f1: &DVector<f64>,
        f2: &DVector<f64>,
        f3: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let g3 = sc.apply(cones, Op::WinvT, f3);
        let mut rhs = DVector::zeros(self.n + self.p);
        rhs.rows_mut(0, self.n).copy_from(&(f1 - self.gt.transpose() * &g3));
        rhs.rows_mut(self.n, self.p).copy_from(&(-f2));
        let sol = self.lu.solve(&rhs)?;
        if sol.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let u = sol.rows(0, self.n).into_owned();
        let v = sol.rows(self.n, self.p).into_owned();
        let wt = &self.gt * &u + g3;
        let w = sc.apply(cones, Op::Winv, &wt);
        Some((u, v, w))
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Row equilibration of the equality block and orthant rows, plus cost
/// scaling; undone on the returned solution.
struct Scaled {
    sf: StandardForm,
    a_scale: Vec<f64>,
    g_scale: Vec<f64>,
    c_scale: f64,
}

fn equilibrate(sf: &StandardForm) -> Scaled {
    let mut out = sf.clone();
    let mut a_scale = vec![1.0; sf.a.nrows()];
    for i in 0..sf.a.nrows() {
        let m = sf.a.row(i).amax();
        if m > 0.0 {
            a_scale[i] = 1.0 / m;
            out.a.row_mut(i).scale_mut(1.0 / m);
            out.b[i] /= m;
        }
    }
    let mut g_scale = vec![1.0; sf.g.nrows()];
    for i in 0..sf.dims.l {
        let m = sf.g.row(i).amax();
        if m > 0.0 {
            g_scale[i] = 1.0 / m;
            out.g.row_mut(i).scale_mut(1.0 / m);
            out.h[i] /= m;
        }
    }
    let cm = sf.c.amax();
    let c_scale = if cm > 0.0 { 1.0 / cm } else { 1.0 };
    out.c *= c_scale;
    Scaled { sf: out, a_scale, g_scale, c_scale }
}

pub fn solve(sf0: &StandardForm, st: &IpmSettings) -> IpmResult {
    let n = sf0.c.len();
    let p = sf0.a.nrows();
    let m = sf0.g.nrows();

    // Trivially inconsistent rows (all-zero coefficients).
    for i in 0..p {
        if sf0.a.row(i).amax() == 0.0 && sf0.b[i].abs() > st.feastol * (1.0 + sf0.b.amax()) {
            return trivial(n, p, m, IpmStatus::PrimalInfeasible, sf0.offset);
        }
    }
    for i in 0..sf0.dims.l {
        if sf0.g.row(i).amax() == 0.0 && sf0.h[i] < -st.feastol * (1.0 + sf0.h.amax()) {
            return trivial(n, p, m, IpmStatus::PrimalInfeasible, sf0.offset);
        }
    }

    let scaled = equilibrate(sf0);
    let sf = &scaled.sf;
    let cones = Cones::new(sf.dims.clone());
    let (a, b, g, h, c) = (&sf.a, &sf.b, &sf.g, &sf.h, &sf.c);
    let e = cones.identity();
    let deg = cones.degree();

    let resx0 = 1f64.max(c.norm());
    let resy0 = 1f64.max(b.norm());
    let resz0 = 1f64.max(h.norm());

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    let mut s = e.clone();
    let mut z = e.clone();
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);

    let mut best: Option<(f64, IpmResult)> = None;
    let mut stalls = 0;
    let mut status = IpmStatus::NumericalFailure;
    let mut iters = 0;

    for it in 0..=st.max_iter {
        iters = it;
        let hrx = -(a.transpose() * &y) - g.transpose() * &z;
        let hry = a * &x;
        let hrz = &s + g * &x;
        let rx = a.transpose() * &y + g.transpose() * &z + c * tau;
        let ry = b * tau - &hry;
        let rz = &hrz - h * tau;
        let (cx, by, hz) = (c.dot(&x), b.dot(&y), h.dot(&z));
        let gap = s.dot(&z);
        let mu = (gap + tau * kappa) / (deg + 1.0);

        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let pres = (ry.norm() / tau / resy0).max(rz.norm() / tau / resz0);
        let dres = rx.norm() / tau / resx0;
        let off = sf.offset * scaled.c_scale;
        let relgap = (gap / (tau * tau)) / (1e-9f64).max((pcost + off).abs().min((dcost + off).abs()));
        let absgap = gap / (tau * tau);

        log::trace!("ipm {it:3} pcost {pcost:+.6e} dcost {dcost:+.6e} pres {pres:.2e} dres {dres:.2e} gap {absgap:.2e} tau {tau:.2e} kappa {kappa:.2e}");

        let snapshot = |status| {
            package(&scaled, sf0, status, &x, &y, &z, &s, tau, pres, dres, it)
        };

        if pres <= st.feastol && dres <= st.feastol && (absgap <= st.abstol || relgap <= st.reltol) {
            status = IpmStatus::Optimal;
            best = Some((0.0, snapshot(status)));
            break;
        }
        if hz + by < 0.0 {
            let pinf = hrx.norm() / resx0 / (-(hz + by));
            if pinf <= st.feastol {
                status = IpmStatus::PrimalInfeasible;
                break;
            }
        }
        if cx < 0.0 {
            let dinf = (hry.norm() / resy0).max(hrz.norm() / resz0) / (-cx);
            if dinf <= st.feastol {
                status = IpmStatus::DualInfeasible;
                break;
            }
        }
        // Keep the best near-optimal iterate in case the run stalls.
        let merit = pres.max(dres).max(relgap.min(absgap));
        if merit <= st.near_tol && best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, snapshot(IpmStatus::Inaccurate)));
        }
        if it == st.max_iter {
            break;
        }

        let Some(sc) = Scaling::compute(&cones, &s, &z) else { break };
        let Some(kkt) = Kkt::factor(a, g, &cones, &sc) else { break };
        let Some((x1, y1, z1)) = kkt.solve(&cones, &sc, c, b, h) else { break };
        let wz1 = sc.apply(&cones, Op::W, &z1);
        let denom0 = wz1.norm_squared();

        let lam = sc.lambda.clone();
        let direction = |eta: f64, ds_rhs: &DVector<f64>, dk: f64| {
            let ldiv = cones.div(&lam, ds_rhs);
            let f1 = -(&rx * eta);
            let f2 = -(&ry * eta);
            let f3 = &rz * eta + sc.apply(&cones, Op::Wt, &ldiv);
            let r4 = -eta * (-cx - by - hz - kappa) + dk / tau;
            let (x2, y2, z2) = kkt.solve(&cones, &sc, &f1, &f2, &f3)?;
            let dtau = (r4 + c.dot(&x2) + b.dot(&y2) + h.dot(&z2)) / (kappa / tau + denom0);
            let dx = x2 - &x1 * dtau;
            let dy = y2 - &y1 * dtau;
            let dz = z2 - &z1 * dtau;
            let dzs = sc.apply(&cones, Op::W, &dz);
            let dss = &ldiv - &dzs;
            let dkappa = (dk - kappa * dtau) / tau;
            if !(dtau.is_finite() && dkappa.is_finite()) {
                return None;
            }
            Some((dx, dy, dz, dss, dzs, dtau, dkappa))
        };
        let step_len = |dss: &DVector<f64>, dzs: &DVector<f64>, dtau: f64, dkappa: f64| {
            let mut al = cones.max_step(&lam, dss).min(cones.max_step(&lam, dzs));
            if dtau < 0.0 {
                al = al.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                al = al.min(-kappa / dkappa);
            }
            al
        };

        // Predictor.
        let lsq = cones.prod(&lam, &lam);
        let Some((_, _, _, dss_a, dzs_a, dtau_a, dk_a)) = direction(1.0, &(-&lsq), -tau * kappa) else { break };
        let alpha_aff = step_len(&dss_a, &dzs_a, dtau_a, dk_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let ds_rhs = -&lsq + &e * (sigma * mu) - cones.prod(&dss_a, &dzs_a);
        let dk_rhs = -tau * kappa + sigma * mu - dtau_a * dk_a;
        let Some((dx, dy, dz, dss, dzs, dtau, dkappa)) = direction(1.0 - sigma, &ds_rhs, dk_rhs) else { break };
        let alpha = (0.99 * step_len(&dss, &dzs, dtau, dkappa)).min(1.0);
        log::trace!("ipm     alpha {alpha:.3e} sigma {sigma:.3e}");
        if !(alpha > 1e-12) {
            stalls += 1;
            if stalls > 3 {
                break;
            }
            continue;
        }
        let ds = sc.apply(&cones, Op::Wt, &dss);
        x += dx * alpha;
        y += dy * alpha;
        z += dz * alpha;
        s += ds * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        let _ = dzs;
    }

    match status {
        IpmStatus::Optimal => best.expect("optimal snapshot").1,
        IpmStatus::PrimalInfeasible | IpmStatus::DualInfeasible => {
            let mut r = package(&scaled, sf0, status, &x, &y, &z, &s, 1.0, f64::NAN, f64::NAN, iters);
            r.pcost = if status == IpmStatus::PrimalInfeasible { f64::INFINITY } else { f64::NEG_INFINITY };
            r.dcost = r.pcost;
            r
        }
        _ => match best {
            Some((_, r)) => r,
            None => {
                let mut r = package(&scaled, sf0, IpmStatus::NumericalFailure, &x, &y, &z, &s, tau, f64::NAN, f64::NAN, iters);
                r.status = IpmStatus::NumericalFailure;
                r
            }
        },
    }
}

fn trivial(n: usize, p: usize, m: usize, status: IpmStatus, offset: f64) -> IpmResult {
    let v = if status == IpmStatus::PrimalInfeasible { f64::INFINITY } else { offset };
    IpmResult {
        status,
        x: DVector::zeros(n),
        y: DVector::zeros(p),
        z: DVector::zeros(m),
        s: DVector::zeros(m),
        pcost: v,
        dcost: v,
        pres: 0.0,
        dres: 0.0,
        iterations: 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn package(
    scaled: &Scaled,
    sf0: &StandardForm,
    status: IpmStatus,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    s: &DVector<f64>,
    tau: f64,
    pres: f64,
    dres: f64,
    iterations: usize,
) -> IpmResult {
    let cs = scaled.c_scale;
    let x = x / tau;
    // Undo row scaling: A_s = D_a A, so y = D_a y_s / c_scale; likewise z.
    let y = DVector::from_iterator(y.len(), y.iter().zip(&scaled.a_scale).map(|(v, d)| v * d / (tau * cs)));
    let z = DVector::from_iterator(z.len(), z.iter().zip(&scaled.g_scale).map(|(v, d)| v * d / (tau * cs)));
    let s = DVector::from_iterator(s.len(), s.iter().zip(&scaled.g_scale).map(|(v, d)| v / (d * tau)));
    let pcost = sf0.c.dot(&x) + sf0.offset;
    let dcost = -(sf0.b.dot(&y) + sf0.h.dot(&z)) + sf0.offset;
    IpmResult { status, x, y, z, s, pcost, dcost, pres, dres, iterations }
}
