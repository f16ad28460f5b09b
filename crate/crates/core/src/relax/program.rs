//! Conic programs over a flat vector of real scalar variables.
//!
//! Every constraint is affine in the variables: linear rows (`expr ≤ 0`,
//! `≥ 0`, `= 0`), second-order cones `‖tail‖ ≤ head`, and PSD blocks whose
//! entries are affine expressions. Hermitian blocks are handed to the solver
//! through the real embedding `[[W, −T], [T, W]]`.

use nalgebra::{DMatrix, DVector};

/// `Σ coef·v[idx] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, c * s);
        }
        self.constant += other.constant * s;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut e = LinExpr::default();
        e.add_scaled(self, s);
        e
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `expr sense 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRow {
    pub expr: LinExpr,
    pub sense: Sense,
}

impl LinRow {
    pub fn le(expr: LinExpr) -> Self {
        Self { expr, sense: Sense::Le }
    }

    pub fn ge(expr: LinExpr) -> Self {
        Self { expr, sense: Sense::Ge }
    }

    pub fn eq(expr: LinExpr) -> Self {
        Self { expr, sense: Sense::Eq }
    }

    /// Signed violation (positive when violated).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.expr.eval(x);
        match self.sense {
            Sense::Le => v.max(0.0),
            Sense::Ge => (-v).max(0.0),
            Sense::Eq => v.abs(),
        }
    }
}

/// `‖tail‖₂ ≤ head`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub head: LinExpr,
    pub tail: Vec<LinExpr>,
}

impl SocBlock {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let n = self.tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        (n - self.head.eval(x)).max(0.0)
    }
}

/// PSD block on a `dim × dim` Hermitian (or real symmetric) matrix whose
/// entries are affine expressions. `w[a][b]` and `t[a][b]` are stored for
/// `a ≥ b`; the upper triangle follows by symmetry (`T_ba = −T_ab`).
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub w: Vec<Vec<LinExpr>>,
    /// `None` for a real symmetric block.
    pub t: Option<Vec<Vec<LinExpr>>>,
}

impl PsdBlock {
    pub fn new(dim: usize, hermitian: bool) -> Self {
        let lower = |_: ()| (0..dim).map(|a| vec![LinExpr::default(); a + 1]).collect::<Vec<_>>();
        Self { dim, w: lower(()), t: if hermitian { Some(lower(())) } else { None } }
    }

    pub fn is_hermitian(&self) -> bool {
        self.t.is_some()
    }

    /// Size of the real symmetric matrix handed to the solver.
    pub fn real_dim(&self) -> usize {
        if self.is_hermitian() {
            2 * self.dim
        } else {
            self.dim
        }
    }

    /// Entry `(a, b)` of the real matrix (embedded when Hermitian) as an
    /// expression plus a sign; `a ≥ b` is not required.
    pub fn real_entry(&self, a: usize, b: usize) -> LinExpr {
        let k = self.dim;
        let w_at = |a: usize, b: usize| if a >= b { self.w[a][b].clone() } else { self.w[b][a].clone() };
        match &self.t {
            None => w_at(a, b),
            Some(t) => {
                let t_at = |a: usize, b: usize| {
                    if a == b {
                        LinExpr::default()
                    } else if a > b {
                        t[a][b].clone()
                    } else {
                        t[b][a].neg()
                    }
                };
                match (a < k, b < k) {
                    (true, true) => w_at(a, b),
                    (false, false) => w_at(a - k, b - k),
                    // [[W, −T], [T, W]]
                    (true, false) => t_at(a, b - k).neg(),
                    (false, true) => t_at(a - k, b),
                }
            }
        }
    }

    /// Numeric value of the real (embedded) matrix at `x`.
    pub fn real_value(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.real_dim();
        DMatrix::from_fn(m, m, |a, b| self.real_entry(a, b).eval(x))
    }
}

/// `min objective` subject to all rows, cones and PSD blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: LinExpr,
    pub rows: Vec<LinRow>,
    pub socs: Vec<SocBlock>,
    pub psds: Vec<PsdBlock>,
}

/// Data in the form `min c'x  s.t.  Ax = b,  h − Gx ∈ K` where `K` is the
/// product of an orthant, second-order cones and PSD cones in `svec` form.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub c: DVector<f64>,
    pub offset: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub dims: ConeDims,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeDims {
    pub l: usize,
    pub q: Vec<usize>,
    pub s: Vec<usize>,
}

impl ConeDims {
    pub fn total(&self) -> usize {
        self.l + self.q.iter().sum::<usize>() + self.s.iter().map(|k| k * (k + 1) / 2).sum::<usize>()
    }

    pub fn degree(&self) -> usize {
        self.l + self.q.len() + self.s.iter().sum::<usize>()
    }
}

/// Position of `(a, b)` (`a ≥ b`) in the lower-triangular, column-major
/// `svec` of a `k × k` matrix.
pub fn svec_index(k: usize, a: usize, b: usize) -> usize {
    debug_assert!(a >= b && a < k);
    b * k - b * (b + 1) / 2 + a
}

pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let k = m.nrows();
    let mut v = DVector::zeros(k * (k + 1) / 2);
    for b in 0..k {
        for a in b..k {
            let s = if a == b { 1.0 } else { std::f64::consts::SQRT_2 };
            v[svec_index(k, a, b)] = s * 0.5 * (m[(a, b)] + m[(b, a)]);
        }
    }
    v
}

pub fn smat(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for b in 0..k {
        for a in b..k {
            let x = v[svec_index(k, a, b)];
            if a == b {
                m[(a, a)] = x;
            } else {
                m[(a, b)] = x / std::f64::consts::SQRT_2;
                m[(b, a)] = x / std::f64::consts::SQRT_2;
            }
        }
    }
    m
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, ..Default::default() }
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Largest violation of any constraint at `x` (PSD blocks measured by the
    /// negative part of the smallest eigenvalue of the real matrix).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for r in &self.rows {
            v = v.max(r.violation(x));
        }
        for s in &self.socs {
            v = v.max(s.violation(x));
        }
        for p in &self.psds {
            let m = p.real_value(x);
            let lmin = nalgebra::SymmetricEigen::new(m).eigenvalues.min();
            v = v.max(-lmin);
        }
        v
    }

    pub fn to_standard(&self) -> StandardForm {
        let n = self.num_vars;
        let mut c = DVector::zeros(n);
        for &(v, coef) in &self.objective.terms {
            c[v] += coef;
        }
        let eqs: Vec<&LinRow> = self.rows.iter().filter(|r| r.sense == Sense::Eq).collect();
        let ineqs: Vec<&LinRow> = self.rows.iter().filter(|r| r.sense != Sense::Eq).collect();

        let mut a = DMatrix::zeros(eqs.len(), n);
        let mut b = DVector::zeros(eqs.len());
        for (k, r) in eqs.iter().enumerate() {
            for &(v, coef) in &r.expr.terms {
                a[(k, v)] += coef;
            }
            b[k] = -r.expr.constant;
        }

        let dims = ConeDims {
            l: ineqs.len(),
            q: self.socs.iter().map(|s| 1 + s.tail.len()).collect(),
            s: self.psds.iter().map(|p| p.real_dim()).collect(),
        };
        let m = dims.total();
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        // s = h − Gx equals the cone member; an affine `e(x) = d'x + e0` placed
        // in the cone contributes G row −d and h entry e0.
        let mut put = |row: usize, e: &LinExpr, scale: f64| {
            for &(v, coef) in &e.terms {
                g[(row, v)] -= scale * coef;
            }
            h[row] += scale * e.constant;
        };
        let mut row = 0;
        for r in &ineqs {
            // Le: −expr ≥ 0; Ge: expr ≥ 0.
            let s = if r.sense == Sense::Le { -1.0 } else { 1.0 };
            put(row, &r.expr, s);
            row += 1;
        }
        for soc in &self.socs {
            put(row, &soc.head, 1.0);
            row += 1;
            for e in &soc.tail {
                put(row, e, 1.0);
                row += 1;
            }
        }
        for p in &self.psds {
            let k = p.real_dim();
            for bcol in 0..k {
                for arow in bcol..k {
                    let s = if arow == bcol { 1.0 } else { std::f64::consts::SQRT_2 };
                    put(row + svec_index(k, arow, bcol), &p.real_entry(arow, bcol), s);
                }
            }
            row += k * (k + 1) / 2;
        }
        debug_assert_eq!(row, m);
        StandardForm { c, offset: self.objective.constant, a, b, g, h, dims }
    }
}
