//! Conic relaxations of a [`LiftedModel`] at a search node.

pub mod chordal;
pub mod ipm;
pub mod program;
pub mod sdpa;

use std::collections::BTreeMap;

use crate::cuts::LinearCut;
use crate::lifted::{LExpr, LiftedModel, Term};
use crate::model::{EntryBounds, LiftedIndex};
use crate::numerics::HermitianMatrix;

use self::ipm::{IpmSettings, IpmStatus};
use self::program::{ConicProgram, LinExpr, LinRow, PsdBlock, Sense, SocBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Location of each lifted scalar in the conic program.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    pub w: BTreeMap<LiftedIndex, usize>,
    pub t: BTreeMap<LiftedIndex, usize>,
    pub aux: Vec<usize>,
}

impl VarMap {
    /// Affine expression of a lifted term (`W_00` is the constant 1 in
    /// homogenized models; `T` is zero in real ones).
    fn term(&self, t: Term) -> LinExpr {
        match t {
            Term::W(i, j) => match self.w.get(&LiftedIndex::new(i, j)) {
                Some(&v) => LinExpr::var(v),
                None => LinExpr::constant(if i == j { 1.0 } else { 0.0 }),
            },
            Term::T(i, j) => match self.t.get(&LiftedIndex::new(i, j)) {
                Some(&v) => LinExpr::var(v),
                None => LinExpr::default(),
            },
            Term::Aux(k) => LinExpr::var(self.aux[k]),
        }
    }

    pub fn expr(&self, e: &LExpr) -> LinExpr {
        let mut out = LinExpr::constant(e.constant);
        for &(t, c) in &e.terms {
            out.add_scaled(&self.term(t), c);
        }
        out.compact();
        out
    }

    fn t_signed(&self, a: usize, b: usize) -> LinExpr {
        match Term::t(a, b) {
            Some((t, s)) => self.term(t).scaled(s),
            None => LinExpr::default(),
        }
    }
}

/// Relaxation solution with the lifted matrix filled on clique entries.
#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    pub status: RelaxStatus,
    pub objective: f64,
    pub y: HermitianMatrix,
    pub aux: Vec<f64>,
    pub iterations: usize,
}

impl RelaxationSolution {
    pub fn infeasible(dim: usize) -> Self {
        Self { status: RelaxStatus::Infeasible, objective: f64::INFINITY, y: HermitianMatrix::zeros(dim), aux: Vec::new(), iterations: 0 }
    }

    pub fn pair_lambda_min(&self, e: LiftedIndex) -> f64 {
        crate::numerics::min_eigenvalue_2x2(
            self.y.w[(e.i, e.i)],
            self.y.w[(e.j, e.j)],
            self.y.w[(e.i, e.j)],
            self.y.t[(e.i, e.j)],
        )
    }

    /// Block of `y` on `idx`.
    pub fn block(&self, idx: &[usize]) -> HermitianMatrix {
        self.y.principal(idx)
    }
}

/// Builds the node relaxation. Returns `None` when the bounds are empty.
pub fn build_csdp(model: &LiftedModel, eb: &EntryBounds, cuts: &[LinearCut]) -> Option<(ConicProgram, VarMap)> {
    if eb.check().is_err() {
        return None;
    }
    let mut cp = ConicProgram::new(0);
    let mut vm = VarMap::default();
    for i in 0..model.dim {
        if !(model.homogenized && i == 0) {
            vm.w.insert(LiftedIndex::new(i, i), cp.add_var());
        }
    }
    for (i, j) in model.cliques.filled_edges() {
        let e = LiftedIndex::new(i, j);
        vm.w.insert(e, cp.add_var());
        if !model.real {
            vm.t.insert(e, cp.add_var());
        }
    }
    for _ in 0..model.num_aux() {
        vm.aux.push(cp.add_var());
    }

    cp.objective = vm.expr(&model.objective);
    for (e, s) in &model.rows {
        let x = vm.expr(e);
        cp.rows.push(match s {
            Sense::Le => LinRow::le(x),
            Sense::Ge => LinRow::ge(x),
            Sense::Eq => LinRow::eq(x),
        });
    }
    for (h, t) in &model.socs {
        cp.socs.push(SocBlock { head: vm.expr(h), tail: t.iter().map(|e| vm.expr(e)).collect() });
    }
    for (k, (&lo, &hi)) in model.aux_lb.iter().zip(&model.aux_ub).enumerate() {
        let v = vm.aux[k];
        if lo.is_finite() {
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(v, 1.0)], constant: -lo }));
        }
        if hi.is_finite() {
            cp.rows.push(LinRow::le(LinExpr { terms: vec![(v, 1.0)], constant: -hi }));
        }
    }

    // Diagonal bounds.
    for i in 0..model.dim {
        let e = LiftedIndex::new(i, i);
        let Some(&v) = vm.w.get(&e) else { continue };
        let (lo, hi) = eb.interval(e);
        if lo == hi {
            cp.rows.push(LinRow::eq(LinExpr { terms: vec![(v, 1.0)], constant: -lo }));
            continue;
        }
        if lo > 0.0 {
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(v, 1.0)], constant: -lo }));
        }
        if hi.is_finite() {
            cp.rows.push(LinRow::le(LinExpr { terms: vec![(v, 1.0)], constant: -hi }));
        }
    }
    // Ratio bounds L·W ≤ T ≤ U·W and W ≥ 0 where the ratio is bounded.
    for (i, j) in model.cliques.filled_edges() {
        let e = LiftedIndex::new(i, j);
        let (lo, hi) = eb.interval(e);
        if !(lo.is_finite() && hi.is_finite()) {
            continue;
        }
        let w = vm.term(Term::w(i, j));
        cp.rows.push(LinRow::ge(w.clone()));
        if model.real {
            continue;
        }
        let t = vm.t_signed(i, j);
        let mut up = w.scaled(hi);
        up.add_scaled(&t, -1.0);
        up.compact();
        if lo == hi {
            cp.rows.push(LinRow::eq(up));
        } else {
            cp.rows.push(LinRow::ge(up));
            let mut dn = t;
            dn.add_scaled(&w, -lo);
            dn.compact();
            cp.rows.push(LinRow::ge(dn));
        }
    }
    // Component box on W_0k and −T_0k.
    if let (true, Some(boxes)) = (model.homogenized, &model.component_box) {
        for (k, b) in boxes.iter().enumerate() {
            let Some(b) = b else { continue };
            if k == 0 {
                continue;
            }
            let w = vm.term(Term::w(0, k));
            push_interval(&mut cp, &w, b.re_lo, b.re_hi);
            if !model.real {
                let t = vm.t_signed(0, k).scaled(-1.0);
                push_interval(&mut cp, &t, b.im_lo, b.im_hi);
            }
        }
    }
    for cut in cuts {
        let mut e = LinExpr::constant(cut.constant);
        for &(t, c) in &cut.terms {
            e.add_scaled(&vm.term(t), c);
        }
        e.compact();
        cp.rows.push(LinRow::ge(e));
    }
    // PSD blocks.
    for c in &model.cliques.cliques {
        let k = c.len();
        if k == 1 {
            continue; // W_ii ≥ 0 holds through the diagonal bound.
        }
        let mut blk = PsdBlock::new(k, !model.real);
        for a in 0..k {
            for b in 0..=a {
                blk.w[a][b] = vm.term(Term::w(c[a], c[b]));
                if let Some(t) = blk.t.as_mut() {
                    if a != b {
                        t[a][b] = vm.t_signed(c[a], c[b]);
                    }
                }
            }
        }
        cp.psds.push(blk);
    }
    for i in 0..model.dim {
        let e = LiftedIndex::new(i, i);
        if let Some(&v) = vm.w.get(&e) {
            if eb.lower(e) <= 0.0 && model.cliques.cliques.iter().all(|c| c.len() == 1 || !c.contains(&i)) {
                cp.rows.push(LinRow::ge(LinExpr::var(v)));
            }
        }
    }
    Some((cp, vm))
}

fn push_interval(cp: &mut ConicProgram, e: &LinExpr, lo: f64, hi: f64) {
    if lo == hi {
        let mut x = e.clone();
        x.add_const(-lo);
        cp.rows.push(LinRow::eq(x));
        return;
    }
    if lo.is_finite() {
        let mut x = e.clone();
        x.add_const(-lo);
        cp.rows.push(LinRow::ge(x));
    }
    if hi.is_finite() {
        let mut x = e.clone();
        x.add_const(-hi);
        cp.rows.push(LinRow::le(x));
    }
}

/// Solves a conic program with the built-in interior-point method.
pub fn solve_conic(cp: &ConicProgram, settings: &IpmSettings) -> (RelaxStatus, f64, Vec<f64>, usize) {
    let sf = cp.to_standard();
    let r = ipm::solve(&sf, settings);
    let status = match r.status {
        IpmStatus::Optimal | IpmStatus::Inaccurate => RelaxStatus::Optimal,
        IpmStatus::PrimalInfeasible => RelaxStatus::Infeasible,
        IpmStatus::DualInfeasible | IpmStatus::NumericalFailure => RelaxStatus::NumericalFailure,
    };
    // The dual objective is a valid bound up to the dual residual; use the
    // smaller of the two values for inaccurate solves.
    let obj = match r.status {
        IpmStatus::Optimal => r.pcost,
        IpmStatus::Inaccurate => r.pcost.min(r.dcost),
        IpmStatus::PrimalInfeasible => f64::INFINITY,
        _ => f64::NAN,
    };
    (status, obj, r.x.as_slice().to_vec(), r.iterations)
}

/// Builds and solves the node relaxation and reads back the lifted matrix.
pub fn solve_node(model: &LiftedModel, eb: &EntryBounds, cuts: &[LinearCut], settings: &IpmSettings) -> RelaxationSolution {
    let Some((cp, vm)) = build_csdp(model, eb, cuts) else {
        return RelaxationSolution::infeasible(model.dim);
    };
    let (status, objective, x, iterations) = solve_conic(&cp, settings);
    let mut y = HermitianMatrix::zeros(model.dim);
    if model.homogenized {
        y.w[(0, 0)] = 1.0;
    }
    if status == RelaxStatus::Optimal {
        for (e, &v) in &vm.w {
            y.w[(e.i, e.j)] = x[v];
            y.w[(e.j, e.i)] = x[v];
        }
        for (e, &v) in &vm.t {
            y.t[(e.i, e.j)] = x[v];
            y.t[(e.j, e.i)] = -x[v];
        }
    }
    let aux = if status == RelaxStatus::Optimal { vm.aux.iter().map(|&v| x[v]).collect() } else { Vec::new() };
    RelaxationSolution { status, objective, y, aux, iterations }
}
