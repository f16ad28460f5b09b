//! CQCQP instances, the affine shift to positive components, and the entry
//! bound matrices used by the lifted formulation.
//!
//! Constraint `k` reads `x*Q_k x + Re(c_k* x) + b_k ≤ 0`; index 0 of
//! [`ComplexQcqp::forms`] is the objective. Box bounds `lb ≤ x ≤ ub` apply to
//! the real and imaginary parts separately.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::{Error, Result};

/// `x*Qx + Re(c*x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub q: HermitianMatrix,
    pub c: ComplexVector,
    pub b: f64,
}

impl QuadForm {
    pub fn value(&self, x: &ComplexVector) -> f64 {
        let lin: f64 = (0..x.len()).map(|i| self.c.re[i] * x.re[i] + self.c.im[i] * x.im[i]).sum();
        self.q.quad(x) + lin + self.b
    }

    /// Gradient with respect to the stacked real vector `[re; im]`.
    pub fn gradient(&self, x: &ComplexVector) -> Vec<f64> {
        let n = x.len();
        let r = x.stacked();
        let e = crate::numerics::real_embedding(&self.q);
        let mut g = vec![0.0; 2 * n];
        for i in 0..2 * n {
            g[i] = 2.0 * (0..2 * n).map(|j| e[(i, j)] * r[j]).sum::<f64>();
        }
        for i in 0..n {
            g[i] += self.c.re[i];
            g[n + i] += self.c.im[i];
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexQcqp {
    pub n: usize,
    /// `forms[0]` is the objective, `forms[1..]` the `≤ 0` constraints.
    pub forms: Vec<QuadForm>,
    pub lb: ComplexVector,
    pub ub: ComplexVector,
    /// Imaginary parts fixed at zero (real QCQP special case).
    pub real: bool,
}

impl ComplexQcqp {
    /// Builds an instance, replacing every `Q` by its Hermitian part.
    pub fn new(forms: Vec<QuadForm>, lb: ComplexVector, ub: ComplexVector, real: bool) -> Result<Self> {
        let n = lb.len();
        if forms.is_empty() {
            return Err(Error::Invalid("an objective form is required".into()));
        }
        if ub.len() != n {
            return Err(Error::Invalid("bound vectors differ in length".into()));
        }
        let mut forms = forms;
        for (k, f) in forms.iter_mut().enumerate() {
            if f.q.dim() != n || f.c.len() != n {
                return Err(Error::Invalid(format!("form {k} has wrong dimension")));
            }
            f.q = HermitianMatrix::symmetrized(&f.q.w, &f.q.t);
            if real {
                f.q.t.fill(0.0);
                f.c.im.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        for i in 0..n {
            for (lo, hi) in [(lb.re[i], ub.re[i]), (lb.im[i], ub.im[i])] {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Invalid(format!("variable {i} has an infinite bound")));
                }
                if lo > hi {
                    return Err(Error::Invalid(format!("variable {i} has lb > ub")));
                }
            }
            if real && (lb.im[i] != 0.0 || ub.im[i] != 0.0) {
                return Err(Error::Invalid(format!("real instance with nonzero imaginary bound on {i}")));
            }
        }
        Ok(Self { n, forms, lb, ub, real })
    }

    pub fn objective(&self) -> &QuadForm {
        &self.forms[0]
    }

    pub fn constraints(&self) -> &[QuadForm] {
        &self.forms[1..]
    }

    pub fn num_constraints(&self) -> usize {
        self.forms.len() - 1
    }

    /// Objective value and maximum violation over constraints and bounds.
    pub fn evaluate(&self, x: &ComplexVector) -> (f64, f64) {
        let obj = self.objective().value(x);
        let mut viol: f64 = 0.0;
        for f in self.constraints() {
            viol = viol.max(f.value(x));
        }
        for i in 0..self.n {
            viol = viol.max(self.lb.re[i] - x.re[i]).max(x.re[i] - self.ub.re[i]);
            viol = viol.max(self.lb.im[i] - x.im[i]).max(x.im[i] - self.ub.im[i]);
        }
        (obj, viol.max(0.0))
    }

    pub fn load_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from_instance(self))?)
    }
}

/// Shifts variables by `q = x − shift` with `shift = lb − (1 + i)` so every
/// real and imaginary lower bound becomes exactly 1 (imaginary parts stay at
/// zero for real instances). Returns the shifted instance and `shift`.
pub fn affine_shift_positive(p: &ComplexQcqp) -> (ComplexQcqp, ComplexVector) {
    let n = p.n;
    let mut shift = ComplexVector::zeros(n);
    for i in 0..n {
        shift.re[i] = p.lb.re[i] - 1.0;
        shift.im[i] = if p.real { 0.0 } else { p.lb.im[i] - 1.0 };
    }
    let forms = p
        .forms
        .iter()
        .map(|f| {
            // (q+s)*Q(q+s) + Re(c*(q+s)) + b
            //   = q*Qq + Re((c + 2Qs)* q) + s*Qs + Re(c*s) + b
            let qs = f.q.mul_vec(&shift);
            let mut c = f.c.clone();
            for i in 0..n {
                c.re[i] += 2.0 * qs.re[i];
                c.im[i] += 2.0 * qs.im[i];
            }
            let b = f.value(&shift);
            QuadForm { q: f.q.clone(), c, b }
        })
        .collect();
    let sub = |v: &ComplexVector| {
        ComplexVector { re: (0..n).map(|i| v.re[i] - shift.re[i]).collect(), im: (0..n).map(|i| v.im[i] - shift.im[i]).collect() }
    };
    let shifted = ComplexQcqp { n, forms, lb: sub(&p.lb), ub: sub(&p.ub), real: p.real };
    (shifted, shift)
}

/// Index pair into the lifted matrix; row/column 0 is the homogenizing 1
/// when the lifted problem has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedIndex {
    pub i: usize,
    pub j: usize,
}

impl LiftedIndex {
    pub fn new(a: usize, b: usize) -> Self {
        Self { i: a.min(b), j: a.max(b) }
    }

    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

impl std::fmt::Display for LiftedIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Bounds on the lifted matrix: diagonal entries bound `W_ii`, off-diagonal
/// entries bound the ratio `T_ij / W_ij` (for `i < j`; the mirrored entry
/// stores the same numbers). Unbounded ratios are `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryBounds {
    pub l: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

impl EntryBounds {
    pub fn new(dim: usize) -> Self {
        let mut l = DMatrix::from_element(dim, dim, f64::NEG_INFINITY);
        let mut u = DMatrix::from_element(dim, dim, f64::INFINITY);
        for i in 0..dim {
            l[(i, i)] = 0.0;
        }
        u.fill_diagonal(f64::INFINITY);
        l.fill_diagonal(0.0);
        Self { l, u }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self, e: LiftedIndex) -> f64 {
        self.l[(e.i, e.j)]
    }

    pub fn upper(&self, e: LiftedIndex) -> f64 {
        self.u[(e.i, e.j)]
    }

    pub fn interval(&self, e: LiftedIndex) -> (f64, f64) {
        (self.lower(e), self.upper(e))
    }

    pub fn set_lower(&mut self, e: LiftedIndex, v: f64) {
        self.l[(e.i, e.j)] = v;
        self.l[(e.j, e.i)] = v;
    }

    pub fn set_upper(&mut self, e: LiftedIndex, v: f64) {
        self.u[(e.i, e.j)] = v;
        self.u[(e.j, e.i)] = v;
    }

    pub fn set(&mut self, e: LiftedIndex, lo: f64, hi: f64) {
        self.set_lower(e, lo);
        self.set_upper(e, hi);
    }

    /// Bounds for the oriented ratio `T_ab / W_ab` (`T_ba = −T_ab`).
    pub fn ratio_bounds(&self, a: usize, b: usize) -> (f64, f64) {
        let (lo, hi) = self.interval(LiftedIndex::new(a, b));
        if a < b {
            (lo, hi)
        } else {
            (-hi, -lo)
        }
    }

    /// Checks `L ≤ U`, `L_ii ≥ 0` and symmetry; returns the first offending entry.
    pub fn check(&self) -> std::result::Result<(), LiftedIndex> {
        let n = self.dim();
        for i in 0..n {
            if self.l[(i, i)] < 0.0 || self.l[(i, i)].is_nan() {
                return Err(LiftedIndex::new(i, i));
            }
            for j in i..n {
                if !(self.l[(i, j)] <= self.u[(i, j)]) || self.l[(i, j)] != self.l[(j, i)] || self.u[(i, j)] != self.u[(j, i)]
                {
                    return Err(LiftedIndex::new(i, j));
                }
            }
        }
        Ok(())
    }

    /// True if every bound of `self` is at least as tight as `other`.
    pub fn within(&self, other: &EntryBounds) -> bool {
        self.l.iter().zip(other.l.iter()).all(|(a, b)| a >= b) && self.u.iter().zip(other.u.iter()).all(|(a, b)| a <= b)
    }
}

/// Entry bounds for a shifted instance (all component lower bounds ≥ 0 and
/// `W⁻ = w^L_i w^L_j + t^L_i t^L_j > 0` on every pair). Lifted index 0 is the
/// homogenizing 1; variable `k` sits at lifted index `k + 1`.
pub fn initial_entry_bounds(p: &ComplexQcqp) -> Result<EntryBounds> {
    let n = p.n;
    let mut eb = EntryBounds::new(n + 1);
    eb.set(LiftedIndex::new(0, 0), 1.0, 1.0);
    // Component lower bounds of y = (1, x).
    let lo_re = |i: usize| if i == 0 { 1.0 } else { p.lb.re[i - 1] };
    let lo_im = |i: usize| if i == 0 { 0.0 } else { p.lb.im[i - 1] };
    for i in 1..=n {
        let k = i - 1;
        if p.lb.re[k] < 0.0 || p.lb.im[k] < 0.0 {
            return Err(Error::Precondition(format!("variable {k} has a negative lower bound; apply the affine shift first")));
        }
        let sq_max = |lo: f64, hi: f64| lo.powi(2).max(hi.powi(2));
        let u = sq_max(p.lb.re[k], p.ub.re[k]) + sq_max(p.lb.im[k], p.ub.im[k]);
        let l = p.lb.re[k].powi(2) + p.lb.im[k].powi(2);
        eb.set(LiftedIndex::new(i, i), l, u);
    }
    for i in 0..=n {
        for j in (i + 1)..=n {
            let e = LiftedIndex::new(i, j);
            if p.real {
                eb.set(e, 0.0, 0.0);
                continue;
            }
            let wminus = lo_re(i) * lo_re(j) + lo_im(i) * lo_im(j);
            if wminus <= 0.0 {
                return Err(Error::Precondition(format!("W⁻ = {wminus} ≤ 0 on pair {e}; apply the affine shift first")));
            }
            let uii = eb.upper(LiftedIndex::new(i, i));
            let ujj = eb.upper(LiftedIndex::new(j, j));
            let r = (uii * ujj / (wminus * wminus) - 1.0).max(0.0).sqrt();
            eb.set(e, -r, r);
        }
    }
    Ok(eb)
}

// ---------------------------------------------------------------------------
// JSON instance format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct VecDoc {
    re: Vec<f64>,
    #[serde(default)]
    im: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MatDoc {
    /// Row-major dense real and (optional) imaginary parts.
    Dense {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    /// `[i, j, re, im]` entries; duplicates are summed.
    Triplets(Vec<(usize, usize, f64, f64)>),
}

#[derive(Debug, Serialize, Deserialize)]
struct FormDoc {
    q: MatDoc,
    c: VecDoc,
    #[serde(default)]
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    n: usize,
    #[serde(default)]
    real: bool,
    objective: FormDoc,
    #[serde(default)]
    constraints: Vec<FormDoc>,
    lb: VecDoc,
    ub: VecDoc,
}

impl VecDoc {
    fn into_vec(self, n: usize, what: &str) -> Result<ComplexVector> {
        let im = self.im.unwrap_or_else(|| vec![0.0; self.re.len()]);
        if self.re.len() != n || im.len() != n {
            return Err(Error::Invalid(format!("{what}: expected length {n}")));
        }
        ComplexVector::new(self.re, im)
    }

    fn from_vec(v: &ComplexVector) -> Self {
        Self { re: v.re.clone(), im: Some(v.im.clone()) }
    }
}

impl MatDoc {
    fn into_hermitian(self, n: usize) -> Result<HermitianMatrix> {
        let mut w = DMatrix::zeros(n, n);
        let mut t = DMatrix::zeros(n, n);
        match self {
            MatDoc::Dense { re, im } => {
                if re.len() != n || re.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid(format!("dense Q must be {n}×{n}")));
                }
                for (i, row) in re.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        w[(i, j)] = *v;
                    }
                }
                if let Some(im) = im {
                    if im.len() != n || im.iter().any(|r| r.len() != n) {
                        return Err(Error::Invalid(format!("dense Q imaginary part must be {n}×{n}")));
                    }
                    for (i, row) in im.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            t[(i, j)] = *v;
                        }
                    }
                }
            }
            MatDoc::Triplets(entries) => {
                for (i, j, re, im) in entries {
                    if i >= n || j >= n {
                        return Err(Error::Invalid(format!("triplet ({i},{j}) out of range")));
                    }
                    w[(i, j)] += re;
                    t[(i, j)] += im;
                }
            }
        }
        Ok(HermitianMatrix::symmetrized(&w, &t))
    }
}

impl FormDoc {
    fn into_form(self, n: usize) -> Result<QuadForm> {
        Ok(QuadForm { q: self.q.into_hermitian(n)?, c: self.c.into_vec(n, "c")?, b: self.b })
    }

    fn from_form(f: &QuadForm) -> Self {
        let n = f.q.dim();
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (re, im) = (f.q.w[(i, j)], f.q.t[(i, j)]);
                if re != 0.0 || im != 0.0 {
                    trip.push((i, j, re, im));
                }
            }
        }
        Self { q: MatDoc::Triplets(trip), c: VecDoc::from_vec(&f.c), b: f.b }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<ComplexQcqp> {
        let n = self.n;
        let mut forms = vec![self.objective.into_form(n)?];
        for c in self.constraints {
            forms.push(c.into_form(n)?);
        }
        ComplexQcqp::new(forms, self.lb.into_vec(n, "lb")?, self.ub.into_vec(n, "ub")?, self.real)
    }

    fn from_instance(p: &ComplexQcqp) -> Self {
        Self {
            n: p.n,
            real: p.real,
            objective: FormDoc::from_form(p.objective()),
            constraints: p.constraints().iter().map(FormDoc::from_form).collect(),
            lb: VecDoc::from_vec(&p.lb),
            ub: VecDoc::from_vec(&p.ub),
        }
    }
}
