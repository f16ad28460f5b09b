//! Problems stated over the lifted matrix `Y = W + iT`.
//!
//! A [`LiftedModel`] carries everything the search needs: linear rows and
//! second-order cones in the entries of `Y` (plus auxiliary scalars), the
//! clique tree whose blocks must be PSD, the tracked 2×2 pairs, root entry
//! bounds and an optional component box for `x`. Both the generic
//! [`ComplexQcqp`] path and the ACOPF frontend produce one.

use std::collections::BTreeMap;

use crate::model::{affine_shift_positive, initial_entry_bounds, ComplexQcqp, EntryBounds, LiftedIndex, QuadForm};
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::relax::chordal::{chordal_decompose, CliqueTree};
use crate::relax::program::Sense;
use crate::Result;

/// A scalar of the lifted space. `W(i, j)` uses `i ≤ j`; `T(i, j)` uses
/// `i < j` (the mirrored entry is `T_ji = −T_ij`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Term {
    W(usize, usize),
    T(usize, usize),
    Aux(usize),
}

impl Term {
    pub fn w(a: usize, b: usize) -> Term {
        Term::W(a.min(b), a.max(b))
    }

    /// `T_ab` as a canonical term and sign; `None` on the diagonal.
    pub fn t(a: usize, b: usize) -> Option<(Term, f64)> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some((Term::T(a, b), 1.0)),
            std::cmp::Ordering::Greater => Some((Term::T(b, a), -1.0)),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// `Σ coef·term + constant` over lifted scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LExpr {
    pub terms: Vec<(Term, f64)>,
    pub constant: f64,
}

impl LExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(t: Term) -> Self {
        Self { terms: vec![(t, 1.0)], constant: 0.0 }
    }

    pub fn add(&mut self, t: Term, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((t, c));
        }
        self
    }

    /// Adds `c·T_ab` with orientation handled.
    pub fn add_t(&mut self, a: usize, b: usize, c: f64) -> &mut Self {
        if let Some((t, s)) = Term::t(a, b) {
            self.add(t, s * c);
        }
        self
    }

    pub fn add_expr(&mut self, other: &LExpr, s: f64) -> &mut Self {
        for &(t, c) in &other.terms {
            self.add(t, c * s);
        }
        self.constant += s * other.constant;
        self
    }

    pub fn scaled(&self, s: f64) -> LExpr {
        let mut e = LExpr::default();
        e.add_expr(self, s);
        e
    }

    pub fn compact(mut self) -> Self {
        let mut acc: BTreeMap<Term, f64> = BTreeMap::new();
        for (t, c) in self.terms.drain(..) {
            *acc.entry(t).or_default() += c;
        }
        self.terms = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
        self
    }

    pub fn eval(&self, y: &HermitianMatrix, aux: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(t, c)| {
                    c * match t {
                        Term::W(i, j) => y.w[(i, j)],
                        Term::T(i, j) => y.t[(i, j)],
                        Term::Aux(k) => aux[k],
                    }
                })
                .sum::<f64>()
    }
}

/// Per-index rectangle on the components of `x`: real part in
/// `[re_lo, re_hi]`, imaginary part in `[im_lo, im_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentBox {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

/// How the lifted point maps back to the user's variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    /// Generic instance: lifted index `k + 1` holds `x_k − shift_k`.
    Qcqp { original: ComplexQcqp, shift: ComplexVector },
    /// The lifted indices are the variables themselves (e.g. bus voltages).
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModel {
    pub dim: usize,
    /// Index 0 is the constant 1 (`W_00 = 1`, `W_0k = Re x_k`, `T_0k = −Im x_k`).
    pub homogenized: bool,
    /// Real instance: no `T` variables.
    pub real: bool,
    pub aux_lb: Vec<f64>,
    pub aux_ub: Vec<f64>,
    pub objective: LExpr,
    pub rows: Vec<(LExpr, Sense)>,
    /// `‖tail‖ ≤ head`.
    pub socs: Vec<(LExpr, Vec<LExpr>)>,
    pub cliques: CliqueTree,
    /// Off-diagonal pairs whose 2×2 minors are monitored, each once.
    pub tracked: Vec<LiftedIndex>,
    pub root_bounds: EntryBounds,
    pub component_box: Option<Vec<Option<ComponentBox>>>,
    /// Lower bound on `W_ij` from component lower bounds, per pair.
    pub wminus: BTreeMap<LiftedIndex, f64>,
    /// Index whose phase is fixed to zero in the local solver.
    pub phase_ref: Option<usize>,
    pub origin: Origin,
}

impl LiftedModel {
    pub fn num_aux(&self) -> usize {
        self.aux_lb.len()
    }

    /// Tracked pairs in the order they are listed per clique (tree order).
    pub fn tracked_from_cliques(ct: &CliqueTree) -> Vec<LiftedIndex> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (c, _) in ct.bfs_order() {
            let cl = &ct.cliques[c];
            for (a, &i) in cl.iter().enumerate() {
                for &j in &cl[a + 1..] {
                    let e = LiftedIndex::new(i, j);
                    if seen.insert(e) {
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    /// Lifted rank-one point `y yᵀ` for `y ∈ ℂ^dim`.
    pub fn rank_one(y: &ComplexVector) -> HermitianMatrix {
        HermitianMatrix::outer(y)
    }

    /// Maps a lifted vector back to the user's variables.
    pub fn to_user(&self, y: &ComplexVector) -> ComplexVector {
        match &self.origin {
            Origin::Qcqp { shift, .. } => {
                let n = shift.len();
                let mut x = ComplexVector::zeros(n);
                for k in 0..n {
                    // y_0 is the constant (kept exactly at 1 by the local solver).
                    let v = y.get(k + 1);
                    x.re[k] = v.re + shift.re[k];
                    x.im[k] = v.im + shift.im[k];
                }
                x
            }
            Origin::Direct => y.clone(),
        }
    }

    /// Maps user variables into the lifted vector (inverse of [`to_user`](Self::to_user)).
    pub fn from_user(&self, x: &ComplexVector) -> ComplexVector {
        match &self.origin {
            Origin::Qcqp { shift, .. } => {
                let n = shift.len();
                let mut y = ComplexVector::zeros(n + 1);
                y.re[0] = 1.0;
                for k in 0..n {
                    y.re[k + 1] = x.re[k] - shift.re[k];
                    y.im[k + 1] = x.im[k] - shift.im[k];
                }
                y
            }
            Origin::Direct => x.clone(),
        }
    }

    /// Lifted form of a quadratic function for a homogenized model where
    /// variable `k` sits at index `k + 1`.
    pub fn lift_form(f: &QuadForm, real: bool) -> LExpr {
        let n = f.c.len();
        let mut e = LExpr::constant(f.b);
        // x*Qx = Σ_ij Qw_ij W_ij + Qt_ij T_ij
        for i in 0..n {
            e.add(Term::w(i + 1, i + 1), f.q.w[(i, i)]);
            for j in (i + 1)..n {
                e.add(Term::w(i + 1, j + 1), 2.0 * f.q.w[(i, j)]);
                if !real {
                    e.add_t(i + 1, j + 1, 2.0 * f.q.t[(i, j)]);
                }
            }
        }
        // Re(c*x) = c.re·w + c.im·t with w = W_0k, t = −T_0k
        for k in 0..n {
            e.add(Term::w(0, k + 1), f.c.re[k]);
            if !real {
                e.add_t(0, k + 1, -f.c.im[k]);
            }
        }
        e.compact()
    }

    /// Builds the lifted model of a generic instance: affine shift, entry
    /// bounds, chordal decomposition of the aggregate sparsity pattern with
    /// index 0 in every clique.
    pub fn from_qcqp(p: &ComplexQcqp) -> Result<Self> {
        let (ps, shift) = affine_shift_positive(p);
        let eb = initial_entry_bounds(&ps)?;
        let n = p.n;
        let dim = n + 1;
        let mut edges = Vec::new();
        for k in 1..dim {
            edges.push((0, k));
        }
        for f in &ps.forms {
            for i in 0..n {
                for j in (i + 1)..n {
                    if f.q.w[(i, j)] != 0.0 || f.q.t[(i, j)] != 0.0 {
                        edges.push((i + 1, j + 1));
                    }
                }
            }
        }
        let ct = chordal_decompose(dim, &edges);
        let tracked = Self::tracked_from_cliques(&ct);
        let lo = |i: usize| if i == 0 { (1.0, 0.0) } else { (ps.lb.re[i - 1], ps.lb.im[i - 1]) };
        let mut wminus = BTreeMap::new();
        for e in &tracked {
            let (a, b) = (lo(e.i), lo(e.j));
            wminus.insert(*e, a.0 * b.0 + a.1 * b.1);
        }
        let mut boxes = vec![None];
        for k in 0..n {
            boxes.push(Some(ComponentBox { re_lo: ps.lb.re[k], re_hi: ps.ub.re[k], im_lo: ps.lb.im[k], im_hi: ps.ub.im[k] }));
        }
        Ok(Self {
            dim,
            homogenized: true,
            real: p.real,
            aux_lb: Vec::new(),
            aux_ub: Vec::new(),
            objective: Self::lift_form(ps.objective(), p.real),
            rows: ps.constraints().iter().map(|f| (Self::lift_form(f, p.real), Sense::Le)).collect(),
            socs: Vec::new(),
            cliques: ct,
            tracked,
            root_bounds: eb,
            component_box: Some(boxes),
            wminus,
            phase_ref: None,
            origin: Origin::Qcqp { original: p.clone(), shift },
        })
    }

    /// Indices `(i, j)`, `i ≤ j`, that appear together in some clique.
    pub fn lifted_pairs(&self) -> Vec<LiftedIndex> {
        let mut v: Vec<LiftedIndex> = (0..self.dim).map(|i| LiftedIndex::new(i, i)).collect();
        v.extend(self.cliques.filled_edges().into_iter().map(|(i, j)| LiftedIndex::new(i, j)));
        v.sort();
        v
    }

    /// Worst violation of the model's constraints (rows, cones, root
    /// diagonal and ratio bounds) at a rank-one point.
    pub fn violation(&self, y: &HermitianMatrix, aux: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (e, s) in &self.rows {
            let x = e.eval(y, aux);
            v = v.max(match s {
                Sense::Le => x.max(0.0),
                Sense::Ge => (-x).max(0.0),
                Sense::Eq => x.abs(),
            });
        }
        for (h, t) in &self.socs {
            let n = t.iter().map(|e| e.eval(y, aux).powi(2)).sum::<f64>().sqrt();
            v = v.max(n - h.eval(y, aux));
        }
        for i in 0..self.dim {
            let (lo, hi) = self.root_bounds.interval(LiftedIndex::new(i, i));
            let w = y.w[(i, i)];
            v = v.max(lo - w).max(w - hi);
        }
        for e in &self.tracked {
            let (lo, hi) = self.root_bounds.interval(*e);
            if lo.is_finite() && hi.is_finite() {
                let (w, t) = (y.w[(e.i, e.j)], y.t[(e.i, e.j)]);
                v = v.max(-w).max(lo * w - t).max(t - hi * w);
            }
        }
        for (k, (&lo, &hi)) in self.aux_lb.iter().zip(&self.aux_ub).enumerate() {
            v = v.max(lo - aux[k]).max(aux[k] - hi);
        }
        v.max(0.0)
    }
}
