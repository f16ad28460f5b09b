//! AC optimal power flow in the lifted voltage matrix `W + iT = V Vᴴ`.
//!
//! Nodal injections are linear in the lifted entries:
//! `P_i = Σ_j G_ij W_ij + B_ij T_ij`, `Q_i = Σ_j G_ij T_ij − B_ij W_ij`.
//! Generator outputs and the quadratic-cost epigraph variables are
//! auxiliaries; line limits are second-order cones on the branch flow
//! expressions.

pub mod admittance;
pub mod matpower;

use crate::cuts::RelaxKind;
use crate::driver::{solve_model, Config, Outcome};
use crate::lifted::{ComponentBox, LExpr, LiftedModel, Origin, Term};
use crate::model::{EntryBounds, LiftedIndex};
use crate::numerics::ComplexVector;
use crate::relax::chordal::chordal_decompose;
use crate::relax::program::Sense;
use crate::{Error, Result};

pub use admittance::{build_admittances, Admittances, BranchAdmittance};
pub use matpower::{parse_matpower, to_matpower, PowerCase};

/// Angle-difference bound applied to branches without one.
pub const DEFAULT_ANGLE_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcopfOptions {
    /// Default angle-difference bound in radians.
    pub default_angle: f64,
    /// Add a constant index 0 so that `W_0k = Re V_k`, `T_0k = −Im V_k`
    /// (needed for product-of-bounds cuts on voltage components).
    pub homogenize: bool,
}

impl Default for AcopfOptions {
    fn default() -> Self {
        Self { default_angle: DEFAULT_ANGLE_DEG.to_radians(), homogenize: false }
    }
}

impl AcopfOptions {
    pub fn for_relaxation(kind: RelaxKind) -> Self {
        Self { homogenize: kind == RelaxKind::SdpRlt, ..Self::default() }
    }
}

/// Auxiliary layout: `P_g` at `2g`, `Q_g` at `2g + 1`, then one cost
/// epigraph variable per generator with a positive quadratic coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxLayout {
    pub num_gens: usize,
    pub epigraph: Vec<Option<usize>>,
}

impl AuxLayout {
    pub fn p(&self, g: usize) -> usize {
        2 * g
    }
    pub fn q(&self, g: usize) -> usize {
        2 * g + 1
    }
}

pub fn aux_layout(pc: &PowerCase) -> AuxLayout {
    let mut next = 2 * pc.gens.len();
    let epigraph = pc
        .gens
        .iter()
        .map(|g| {
            (g.cost[0] > 0.0).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    AuxLayout { num_gens: pc.gens.len(), epigraph }
}

/// `(P, Q)` injected at bus `i` as lifted expressions.
pub fn injection_exprs(adm: &Admittances, i: usize, off: usize) -> (LExpr, LExpr) {
    let n = adm.g.nrows();
    let mut p = LExpr::default();
    let mut q = LExpr::default();
    for j in 0..n {
        let (g, b) = (adm.g[(i, j)], adm.b[(i, j)]);
        if g == 0.0 && b == 0.0 {
            continue;
        }
        p.add(Term::w(i + off, j + off), g);
        q.add(Term::w(i + off, j + off), -b);
        if i != j {
            p.add_t(i + off, j + off, b);
            q.add_t(i + off, j + off, g);
        }
    }
    (p.compact(), q.compact())
}

/// Branch flows `(P_f, Q_f, P_t, Q_t)` as lifted expressions.
pub fn flow_exprs(a: &BranchAdmittance, off: usize) -> [LExpr; 4] {
    let side = |m: usize, k: usize, ymm: num_complex::Complex64, ymk: num_complex::Complex64| {
        let (m, k) = (m + off, k + off);
        let mut p = LExpr::default();
        let mut q = LExpr::default();
        p.add(Term::w(m, m), ymm.re);
        q.add(Term::w(m, m), -ymm.im);
        p.add(Term::w(m, k), ymk.re);
        q.add(Term::w(m, k), -ymk.im);
        p.add_t(m, k, ymk.im);
        q.add_t(m, k, ymk.re);
        (p.compact(), q.compact())
    };
    let (pf, qf) = side(a.from, a.to, a.yff, a.yft);
    let (pt, qt) = side(a.to, a.from, a.ytt, a.ytf);
    [pf, qf, pt, qt]
}

/// Builds the lifted ACOPF model.
pub fn build_lacopf(pc: &PowerCase, opts: &AcopfOptions) -> Result<LiftedModel> {
    let n = pc.num_buses();
    if n == 0 {
        return Err(Error::Invalid("case has no buses".into()));
    }
    let adm = build_admittances(pc)?;
    let off = usize::from(opts.homogenize);
    let dim = n + off;
    let layout = aux_layout(pc);
    let ng = pc.gens.len();
    let num_aux = 2 * ng + layout.epigraph.iter().flatten().count();
    let mut aux_lb = vec![0.0; num_aux];
    let mut aux_ub = vec![f64::INFINITY; num_aux];
    let mut objective = LExpr::default();
    let mut socs = Vec::new();
    for (g, gen) in pc.gens.iter().enumerate() {
        aux_lb[layout.p(g)] = gen.pmin;
        aux_ub[layout.p(g)] = gen.pmax;
        aux_lb[layout.q(g)] = gen.qmin;
        aux_ub[layout.q(g)] = gen.qmax;
        objective.add(Term::Aux(layout.p(g)), gen.cost[1]);
        objective.constant += gen.cost[2];
        if let Some(t) = layout.epigraph[g] {
            // c2·p² ≤ t  ⇔  ‖(2√c2·p, t − 1)‖ ≤ t + 1
            objective.add(Term::Aux(t), 1.0);
            let mut head = LExpr::constant(1.0);
            head.add(Term::Aux(t), 1.0);
            let mut a = LExpr::default();
            a.add(Term::Aux(layout.p(g)), 2.0 * gen.cost[0].sqrt());
            let mut b = LExpr::constant(-1.0);
            b.add(Term::Aux(t), 1.0);
            socs.push((head, vec![a, b]));
        }
    }
    let objective = objective.compact();

    let mut rows = Vec::new();
    for (i, bus) in pc.buses.iter().enumerate() {
        let (p, q) = injection_exprs(&adm, i, off);
        let mut pb = LExpr::constant(-bus.pd);
        let mut qb = LExpr::constant(-bus.qd);
        for (g, gen) in pc.gens.iter().enumerate() {
            if gen.bus == i {
                pb.add(Term::Aux(layout.p(g)), 1.0);
                qb.add(Term::Aux(layout.q(g)), 1.0);
            }
        }
        pb.add_expr(&p, -1.0);
        qb.add_expr(&q, -1.0);
        rows.push((pb.compact(), Sense::Eq));
        rows.push((qb.compact(), Sense::Eq));
    }
    for (r, br) in pc.branches.iter().enumerate() {
        if br.rate > 0.0 {
            let [pf, qf, pt, qt] = flow_exprs(&adm.branches[r], off);
            socs.push((LExpr::constant(br.rate), vec![pf, qf]));
            socs.push((LExpr::constant(br.rate), vec![pt, qt]));
        }
    }

    let mut eb = EntryBounds::new(dim);
    if opts.homogenize {
        eb.set(LiftedIndex::new(0, 0), 1.0, 1.0);
    }
    for (i, bus) in pc.buses.iter().enumerate() {
        eb.set(LiftedIndex::new(i + off, i + off), bus.vmin * bus.vmin, bus.vmax * bus.vmax);
    }
    let mut edges = Vec::new();
    if opts.homogenize {
        edges.extend((1..dim).map(|k| (0, k)));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut ratio: std::collections::BTreeMap<LiftedIndex, (f64, f64)> = Default::default();
    for (r, br) in pc.branches.iter().enumerate() {
        if br.from == br.to {
            return Err(Error::Invalid(format!("branch {r} is a self loop")));
        }
        let (lo, hi) = br.angle.unwrap_or((-opts.default_angle, opts.default_angle));
        if lo.abs() >= half_pi || hi.abs() >= half_pi || lo > hi {
            return Err(Error::Invalid(format!(
                "branch {r}: angle bounds [{:.3}°, {:.3}°] must lie strictly within ±90°",
                lo.to_degrees(),
                hi.to_degrees()
            )));
        }
        let (a, b) = (br.from + off, br.to + off);
        let (lo, hi) = if a < b { (lo.tan(), hi.tan()) } else { (-hi.tan(), -lo.tan()) };
        let e = LiftedIndex::new(a, b);
        let cur = ratio.entry(e).or_insert((f64::NEG_INFINITY, f64::INFINITY));
        *cur = (cur.0.max(lo), cur.1.min(hi));
        edges.push((a, b));
    }
    for (e, (lo, hi)) in ratio {
        if lo > hi {
            return Err(Error::Invalid(format!("parallel branches {e:?} have disjoint angle bounds")));
        }
        eb.set(e, lo, hi);
    }
    let cliques = chordal_decompose(dim, &edges);
    let tracked = LiftedModel::tracked_from_cliques(&cliques);
    let reference = pc.reference_bus().unwrap_or(0);
    let component_box = opts.homogenize.then(|| {
        let mut boxes = vec![None];
        for (i, bus) in pc.buses.iter().enumerate() {
            let v = bus.vmax;
            boxes.push(Some(if i == reference {
                ComponentBox { re_lo: 0.0, re_hi: v, im_lo: 0.0, im_hi: 0.0 }
            } else {
                ComponentBox { re_lo: -v, re_hi: v, im_lo: -v, im_hi: v }
            }));
        }
        boxes
    });
    Ok(LiftedModel {
        dim,
        homogenized: opts.homogenize,
        real: false,
        aux_lb,
        aux_ub,
        objective,
        rows,
        socs,
        cliques,
        tracked,
        root_bounds: eb,
        component_box,
        wminus: Default::default(),
        phase_ref: Some(reference + off),
        origin: Origin::Direct,
    })
}

/// Bus voltages from a lifted vector.
pub fn voltages(model: &LiftedModel, y: &ComplexVector) -> ComplexVector {
    let off = usize::from(model.homogenized);
    let n = model.dim - off;
    ComplexVector::new(y.re[off..off + n].to_vec(), y.im[off..off + n].to_vec()).expect("same length")
}

/// Solver defaults for ACOPF.
pub fn default_config() -> Config {
    Config { relax: RelaxKind::SdpCvi, rule: crate::branch::BranchRule::Mvwb, gap: 1e-3, ..Config::default() }
}

/// Builds the lifted model for `cfg.relax` and runs the search.
pub fn solve_acopf(pc: &PowerCase, cfg: &Config) -> Result<(LiftedModel, Outcome)> {
    let model = build_lacopf(pc, &AcopfOptions::for_relaxation(cfg.relax))?;
    let out = solve_model(&model, cfg);
    Ok((model, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::HermitianMatrix;
    use num_complex::Complex64;

    const CASE3: &str = include_str!("../../../../data/case3_lmbd.m");

    #[test]
    fn injections_match_complex_power() {
        let pc = parse_matpower(CASE3).unwrap();
        let adm = build_admittances(&pc).unwrap();
        let v = ComplexVector::new(vec![1.02, 0.97, 1.05], vec![0.0, -0.11, 0.07]).unwrap();
        let y = HermitianMatrix::outer(&v);
        let yb = adm.ybus();
        let vc = v.to_complex();
        for i in 0..3 {
            let cur: Complex64 = (0..3).map(|j| yb[(i, j)] * vc[j]).sum();
            let s = vc[i] * cur.conj();
            let (p, q) = injection_exprs(&adm, i, 0);
            assert!((p.eval(&y, &[]) - s.re).abs() < 1e-12);
            assert!((q.eval(&y, &[]) - s.im).abs() < 1e-12);
        }
        for a in &adm.branches {
            let sf = vc[a.from] * (a.yff * vc[a.from] + a.yft * vc[a.to]).conj();
            let st = vc[a.to] * (a.ytf * vc[a.from] + a.ytt * vc[a.to]).conj();
            let [pf, qf, pt, qt] = flow_exprs(a, 0);
            assert!((pf.eval(&y, &[]) - sf.re).abs() < 1e-12);
            assert!((qf.eval(&y, &[]) - sf.im).abs() < 1e-12);
            assert!((pt.eval(&y, &[]) - st.re).abs() < 1e-12);
            assert!((qt.eval(&y, &[]) - st.im).abs() < 1e-12);
        }
    }

    #[test]
    fn model_structure() {
        let pc = parse_matpower(CASE3).unwrap();
        let m = build_lacopf(&pc, &AcopfOptions::default()).unwrap();
        assert_eq!(m.dim, 3);
        assert_eq!(m.num_aux(), 6 + 2);
        assert_eq!(m.rows.len(), 6);
        // Two cost cones and two cones per limited branch.
        assert_eq!(m.socs.len(), 2 + 6);
        assert_eq!(m.tracked.len(), 3);
        let t = (30f64).to_radians().tan();
        assert_eq!(m.root_bounds.interval(LiftedIndex::new(1, 2)), (-t, t));
        assert_eq!(m.root_bounds.interval(LiftedIndex::new(0, 0)), (0.81, 1.2100000000000002));
        assert_eq!(m.phase_ref, Some(0));
        let h = build_lacopf(&pc, &AcopfOptions { homogenize: true, ..AcopfOptions::default() }).unwrap();
        assert_eq!(h.dim, 4);
        assert_eq!(h.cliques.cliques, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn rejects_right_angle_bounds() {
        let mut pc = parse_matpower(CASE3).unwrap();
        pc.branches[0].angle = Some((-std::f64::consts::FRAC_PI_2, 0.1));
        assert!(build_lacopf(&pc, &AcopfOptions::default()).is_err());
    }
}
