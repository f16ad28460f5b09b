//! Closed-form bound tightening.
//!
//! * [`tighten_quadratic`]: bounds on `q` implied by `a q² + q y + c ≤ 0`
//!   with `y` in an interval.
//! * [`aggregate_to_1d`]: reduces one constraint of an instance to that form
//!   for one real component by interval arithmetic on the rest.
//! * [`tighten_cycle`]: angle sums around triangles bound the ratios
//!   `T_ij / W_ij = tan(θ_i − θ_j)`.

use std::f64::consts::FRAC_PI_2;

use crate::lifted::LiftedModel;
use crate::model::{ComplexQcqp, EntryBounds, LiftedIndex};
use crate::numerics::{real_embedding, ComplexVector};

const MAX_PASSES: usize = 5;

/// `a q² + q y + c ≤ 0` with `y ∈ [ly, uy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConstraint1D {
    pub a: f64,
    pub c: f64,
    pub ly: f64,
    pub uy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadOutcome {
    /// Every feasible `q` lies in `[lo, hi]` (possibly infinite ends).
    Interval(f64, f64),
    Infeasible,
}

pub fn tighten_quadratic(qc: QuadConstraint1D) -> QuadOutcome {
    let QuadConstraint1D { a, c, ly, uy } = qc;
    if a < 0.0 {
        return QuadOutcome::Interval(f64::NEG_INFINITY, f64::INFINITY);
    }
    if a == 0.0 {
        return linear_case(c, ly, uy);
    }
    let k = -4.0 * a * c;
    let lo_root = |y: f64| (-y - (y * y + k).max(0.0).sqrt()) / (2.0 * a);
    let hi_root = |y: f64| (-y + (y * y + k).max(0.0).sqrt()) / (2.0 * a);
    if k >= 0.0 {
        // Both roots decrease in y.
        return QuadOutcome::Interval(lo_root(uy), hi_root(ly));
    }
    let s = (-k).sqrt();
    let mut pts = Vec::with_capacity(4);
    for y in [ly, uy, -s, s] {
        if y >= ly && y <= uy && y.abs() >= s {
            pts.push(y);
        }
    }
    if pts.is_empty() {
        return QuadOutcome::Infeasible;
    }
    let lo = pts.iter().map(|&y| lo_root(y)).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|&y| hi_root(y)).fold(f64::NEG_INFINITY, f64::max);
    QuadOutcome::Interval(lo, hi)
}

/// `q y + c ≤ 0` for some `y ∈ [ly, uy]`.
fn linear_case(c: f64, ly: f64, uy: f64) -> QuadOutcome {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut include = |a: f64, b: f64| {
        if a <= b {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    };
    // q > 0: need q·ly ≤ −c.
    if ly > 0.0 {
        if c < 0.0 {
            include(0.0, -c / ly);
        }
    } else if ly == 0.0 {
        if c <= 0.0 {
            include(0.0, f64::INFINITY);
        }
    } else {
        include((-c / ly).max(0.0), f64::INFINITY);
    }
    // q < 0: need q·uy ≤ −c.
    if uy < 0.0 {
        if c < 0.0 {
            include(-c / uy, 0.0);
        }
    } else if uy == 0.0 {
        if c <= 0.0 {
            include(f64::NEG_INFINITY, 0.0);
        }
    } else {
        include(f64::NEG_INFINITY, (-c / uy).min(0.0));
    }
    if c <= 0.0 {
        include(0.0, 0.0);
    }
    if lo > hi {
        QuadOutcome::Infeasible
    } else {
        QuadOutcome::Interval(lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Iv(f64, f64);

impl Iv {
    fn scale(self, s: f64) -> Iv {
        if s >= 0.0 {
            Iv(self.0 * s, self.1 * s)
        } else {
            Iv(self.1 * s, self.0 * s)
        }
    }
    fn add(self, o: Iv) -> Iv {
        Iv(self.0 + o.0, self.1 + o.1)
    }
    fn mul(self, o: Iv) -> Iv {
        let p = [self.0 * o.0, self.0 * o.1, self.1 * o.0, self.1 * o.1];
        Iv(p.iter().copied().fold(f64::INFINITY, f64::min), p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
    fn square(self) -> Iv {
        let lo = if self.0 <= 0.0 && self.1 >= 0.0 { 0.0 } else { self.0.powi(2).min(self.1.powi(2)) };
        Iv(lo, self.0.powi(2).max(self.1.powi(2)))
    }
}

/// Reduces constraint `k` (1-based; 0 is the objective) of `p` to a 1-D
/// system in the real component `target` of the stacked vector
/// `[re x; im x]`.
pub fn aggregate_to_1d(p: &ComplexQcqp, k: usize, target: usize) -> QuadConstraint1D {
    let f = &p.forms[k];
    let e = real_embedding(&f.q);
    let n = p.n;
    let g: Vec<f64> = f.c.re.iter().chain(f.c.im.iter()).copied().collect();
    let bound = |j: usize| if j < n { Iv(p.lb.re[j], p.ub.re[j]) } else { Iv(p.lb.im[j - n], p.ub.im[j - n]) };
    let m = 2 * n;
    let i = target;
    let mut y = Iv(g[i], g[i]);
    let mut rest = Iv(f.b, f.b);
    for j in 0..m {
        if j == i {
            continue;
        }
        y = y.add(bound(j).scale(2.0 * e[(i, j)]));
        rest = rest.add(bound(j).scale(g[j]));
        rest = rest.add(bound(j).square().scale(e[(j, j)]));
        for l in (j + 1)..m {
            if l != i && e[(j, l)] != 0.0 {
                rest = rest.add(bound(j).mul(bound(l)).scale(2.0 * e[(j, l)]));
            }
        }
    }
    QuadConstraint1D { a: e[(i, i)], c: rest.0, ly: y.0, uy: y.1 }
}

/// Tightens the variable box of `p` using every constraint, for at most a
/// few passes. Returns `None` when infeasibility is detected.
pub fn tighten_box(p: &ComplexQcqp) -> Option<ComplexQcqp> {
    let mut q = p.clone();
    let n = p.n;
    let comps = if p.real { n } else { 2 * n };
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for k in 1..q.forms.len() {
            for t in 0..comps {
                let qc = aggregate_to_1d(&q, k, t);
                let (lo, hi) = match tighten_quadratic(qc) {
                    QuadOutcome::Infeasible => return None,
                    QuadOutcome::Interval(lo, hi) => (lo, hi),
                };
                let (cur_lo, cur_hi) = if t < n { (&mut q.lb.re[t], &mut q.ub.re[t]) } else { (&mut q.lb.im[t - n], &mut q.ub.im[t - n]) };
                let slack = 1e-9 * (1.0 + cur_lo.abs().max(cur_hi.abs()));
                if lo - slack > *cur_lo {
                    *cur_lo = lo - slack;
                    changed = true;
                }
                if hi + slack < *cur_hi {
                    *cur_hi = hi + slack;
                    changed = true;
                }
                if *cur_lo > *cur_hi {
                    return None;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Some(q)
}

/// Outcome of a bound-tightening pass on entry bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TightenResult {
    Unchanged,
    Tightened,
    Infeasible,
}

/// Angle-sum tightening on the triangle `(a, b, c)`: for each edge, the
/// other two edges bound its angle. Bounds never loosen.
pub fn tighten_cycle(cycle: [usize; 3], eb: &mut EntryBounds) -> TightenResult {
    let mut out = TightenResult::Unchanged;
    let [a, b, c] = cycle;
    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
        // θ_xy = −(θ_yz + θ_zx)
        let (lyz, uyz) = eb.ratio_bounds(y, z);
        let (lzx, uzx) = eb.ratio_bounds(z, x);
        let (mut lo, mut hi) = eb.ratio_bounds(x, y);
        let mut changed = false;
        if uyz.is_finite() && uzx.is_finite() {
            let s = uyz.atan() + uzx.atan();
            if s.abs() < FRAC_PI_2 - 1e-9 {
                let v = (-s).tan();
                if v > lo {
                    lo = v;
                    changed = true;
                }
            }
        }
        if lyz.is_finite() && lzx.is_finite() {
            let s = lyz.atan() + lzx.atan();
            if s.abs() < FRAC_PI_2 - 1e-9 {
                let v = (-s).tan();
                if v < hi {
                    hi = v;
                    changed = true;
                }
            }
        }
        if changed {
            if lo > hi {
                return TightenResult::Infeasible;
            }
            let e = LiftedIndex::new(x, y);
            if x < y {
                eb.set(e, lo, hi);
            } else {
                eb.set(e, -hi, -lo);
            }
            out = TightenResult::Tightened;
        }
    }
    out
}

/// Triangles of the filled graph (excluding the homogenizing index).
pub fn triangles(model: &LiftedModel) -> Vec<[usize; 3]> {
    let edges = model.cliques.filled_edges();
    let set: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let skip = |v: usize| model.homogenized && v == 0;
    let mut out = Vec::new();
    for &(i, j) in &edges {
        if skip(i) {
            continue;
        }
        for k in (j + 1)..model.dim {
            if set.contains(&(i, k)) && set.contains(&(j, k)) {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// Ratio bound implied by `W_ij ≥ W⁻` and the diagonal upper bounds:
/// `|T_ij| / W_ij ≤ √(U_ii U_jj / (W⁻)² − 1)`.
pub fn refresh_ratio_bounds(model: &LiftedModel, eb: &mut EntryBounds) -> TightenResult {
    let mut out = TightenResult::Unchanged;
    if model.real {
        return out;
    }
    for (e, &wm) in &model.wminus {
        if wm <= 0.0 {
            continue;
        }
        let uii = eb.upper(LiftedIndex::new(e.i, e.i));
        let ujj = eb.upper(LiftedIndex::new(e.j, e.j));
        let r = (uii * ujj / (wm * wm) - 1.0).max(0.0).sqrt();
        let (lo, hi) = eb.interval(*e);
        let (nlo, nhi) = (lo.max(-r), hi.min(r));
        if nlo > nhi {
            return TightenResult::Infeasible;
        }
        if nlo > lo || nhi < hi {
            eb.set(*e, nlo, nhi);
            out = TightenResult::Tightened;
        }
    }
    out
}

/// Node tightening: ratio refresh then triangle passes until no change
/// (capped).
pub fn tighten_node(model: &LiftedModel, eb: &mut EntryBounds) -> TightenResult {
    let mut out = refresh_ratio_bounds(model, eb);
    if out == TightenResult::Infeasible {
        return out;
    }
    let tris = triangles(model);
    for _ in 0..MAX_PASSES {
        let mut any = false;
        for &t in &tris {
            match tighten_cycle(t, eb) {
                TightenResult::Infeasible => return TightenResult::Infeasible,
                TightenResult::Tightened => any = true,
                TightenResult::Unchanged => {}
            }
        }
        if !any {
            break;
        }
        out = TightenResult::Tightened;
    }
    if eb.check().is_err() {
        return TightenResult::Infeasible;
    }
    out
}

/// Real box of component `k` as `(lo, hi)` from a [`ComplexVector`] pair.
pub fn component_range(lb: &ComplexVector, ub: &ComplexVector, k: usize, imag: bool) -> (f64, f64) {
    if imag {
        (lb.im[k], ub.im[k])
    } else {
        (lb.re[k], ub.re[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadForm;
    use crate::numerics::HermitianMatrix;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn qc(a: f64, c: f64, ly: f64, uy: f64) -> QuadConstraint1D {
        QuadConstraint1D { a, c, ly, uy }
    }

    #[test]
    fn quadratic_examples() {
        assert_eq!(tighten_quadratic(qc(1.0, -1.0, 0.0, 0.0)), QuadOutcome::Interval(-1.0, 1.0));
        assert_eq!(tighten_quadratic(qc(1.0, 0.0, -1.0, 1.0)), QuadOutcome::Interval(-1.0, 1.0));
        assert_eq!(tighten_quadratic(qc(1.0, 1.0, -1.0, 1.0)), QuadOutcome::Infeasible);
    }

    #[test]
    fn quadratic_negative_k_uses_branch_points() {
        // q² + q y + 1 ≤ 0, y ∈ [2, 3]: roots at y = 2 give q = −1, at y = 3 give (−3 ± √5)/2.
        match tighten_quadratic(qc(1.0, 1.0, 2.0, 3.0)) {
            QuadOutcome::Interval(lo, hi) => {
                assert_abs_diff_eq!(lo, (-3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-12);
                assert_abs_diff_eq!(hi, (-3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn linear_cases() {
        // q y − 1 ≤ 0, y ∈ [1, 2] → q ≤ 1
        assert_eq!(tighten_quadratic(qc(0.0, -1.0, 1.0, 2.0)), QuadOutcome::Interval(f64::NEG_INFINITY, 1.0));
        // q y + 1 ≤ 0, y ∈ [1, 2] → q ≤ −1/2
        assert_eq!(tighten_quadratic(qc(0.0, 1.0, 1.0, 2.0)), QuadOutcome::Interval(f64::NEG_INFINITY, -0.5));
        // q·0 + 1 ≤ 0 infeasible
        assert_eq!(tighten_quadratic(qc(0.0, 1.0, 0.0, 0.0)), QuadOutcome::Infeasible);
    }

    fn real_form(q: &[f64], n: usize, c: &[f64], b: f64) -> QuadForm {
        QuadForm { q: HermitianMatrix::real(DMatrix::from_row_slice(n, n, q)).unwrap(), c: ComplexVector::real(c.to_vec()), b }
    }

    #[test]
    fn aggregation_examples() {
        let zero = real_form(&[0.0], 1, &[0.0], 0.0);
        let p = ComplexQcqp::new(
            vec![zero, real_form(&[1.0], 1, &[0.0], -1.0)],
            ComplexVector::real(vec![-5.0]),
            ComplexVector::real(vec![5.0]),
            true,
        )
        .unwrap();
        assert_eq!(aggregate_to_1d(&p, 1, 0), qc(1.0, -1.0, 0.0, 0.0));
        let zero2 = real_form(&[0.0; 4], 2, &[0.0, 0.0], 0.0);
        let p2 = ComplexQcqp::new(
            vec![zero2, real_form(&[1.0, 0.5, 0.5, 0.0], 2, &[0.0, 0.0], 0.0)],
            ComplexVector::real(vec![-5.0, 0.0]),
            ComplexVector::real(vec![5.0, 1.0]),
            true,
        )
        .unwrap();
        assert_eq!(aggregate_to_1d(&p2, 1, 0), qc(1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn box_tightening_on_disc() {
        // |x|² ≤ 1 with a loose box → both parts within [−1, 1].
        let zero = QuadForm { q: HermitianMatrix::zeros(1), c: ComplexVector::zeros(1), b: 0.0 };
        let disc = QuadForm { q: HermitianMatrix::identity(1), c: ComplexVector::zeros(1), b: -1.0 };
        let lb = ComplexVector::new(vec![-4.0], vec![-4.0]).unwrap();
        let ub = ComplexVector::new(vec![4.0], vec![4.0]).unwrap();
        let p = ComplexQcqp::new(vec![zero, disc], lb, ub, false).unwrap();
        let t = tighten_box(&p).unwrap();
        assert!(t.ub.re[0] <= 1.0 + 1e-6 && t.lb.im[0] >= -1.0 - 1e-6);
    }

    #[test]
    fn cycle_example() {
        let mut eb = EntryBounds::new(4);
        eb.set(LiftedIndex::new(2, 3), -1.0, 0.25);
        // U_31 = 0.5 ⇔ stored (1, 3) bounds [−0.5, ·]
        eb.set(LiftedIndex::new(1, 3), -0.5, 1.0);
        assert_eq!(tighten_cycle([1, 2, 3], &mut eb), TightenResult::Tightened);
        assert_abs_diff_eq!(eb.lower(LiftedIndex::new(1, 2)), -6.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn cycle_no_change_when_tighter() {
        let mut eb = EntryBounds::new(3);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            eb.set(LiftedIndex::new(i, j), -0.1, 0.1);
        }
        let before = eb.clone();
        assert_eq!(tighten_cycle([0, 1, 2], &mut eb), TightenResult::Unchanged);
        assert_eq!(eb, before);
    }

    #[test]
    fn cycle_symmetric_loose_bounds_unchanged() {
        // ±1 on all edges: implied bound on each edge is ±tan(π/2) → skipped.
        let mut eb = EntryBounds::new(3);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            eb.set(LiftedIndex::new(i, j), -1.0, 1.0);
        }
        assert_eq!(tighten_cycle([0, 1, 2], &mut eb), TightenResult::Unchanged);
        // ±0.2: implied ±tan(2 atan 0.2) ≈ ±0.4167 looser than 0.2.
        let mut eb = EntryBounds::new(3);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            eb.set(LiftedIndex::new(i, j), -0.2, 0.2);
        }
        assert_eq!(tighten_cycle([0, 1, 2], &mut eb), TightenResult::Unchanged);
    }

    #[test]
    fn cycle_detects_infeasibility() {
        let mut eb = EntryBounds::new(3);
        eb.set(LiftedIndex::new(0, 1), 0.5, 1.0);
        eb.set(LiftedIndex::new(1, 2), 0.5, 1.0);
        eb.set(LiftedIndex::new(0, 2), -1.0, -0.5); // θ_20 ∈ [0.46, 0.79]
        assert_eq!(tighten_cycle([0, 1, 2], &mut eb), TightenResult::Infeasible);
    }
}
