//! Valid inequalities on 2×2 principal submatrices of the lifted matrix.
//!
//! For a pair `(i, j)` with bounds `L_ii ≤ W_ii ≤ U_ii`, `L_jj ≤ W_jj ≤ U_jj`
//! and `L_ij·W_ij ≤ T_ij ≤ U_ij·W_ij`, the rank-one set
//!
//! ```text
//! J_C = { W_ii W_jj = W_ij² + T_ij², bounds above, W_ij ≥ 0 }
//! ```
//!
//! has a convex hull described by the 2×2 PSD condition plus two linear
//! inequalities ([`generate_cvi`]). RLT (McCormick) cuts on the components
//! of `x` are provided for comparison and for the `sdp+rlt` relaxation.

use crate::lifted::{LiftedModel, Term};
use crate::model::{EntryBounds, LiftedIndex};
use crate::numerics::HermitianMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    Vi1,
    Vi2,
    Rlt(u8),
    RltDiag(u8),
}

impl std::fmt::Display for CutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CutKind::Vi1 => write!(f, "vi1"),
            CutKind::Vi2 => write!(f, "vi2"),
            CutKind::Rlt(k) => write!(f, "rlt-{k}"),
            CutKind::RltDiag(k) => write!(f, "rlt-diag-{k}"),
        }
    }
}

/// `Σ coef·term + constant ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCut {
    pub pair: LiftedIndex,
    pub terms: Vec<(Term, f64)>,
    pub constant: f64,
    pub kind: CutKind,
}

impl LinearCut {
    /// Left-hand side at a lifted point.
    pub fn eval(&self, y: &HermitianMatrix) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(t, c)| {
                    c * match t {
                        Term::W(i, j) => y.w[(i, j)],
                        Term::T(i, j) => y.t[(i, j)],
                        Term::Aux(_) => 0.0,
                    }
                })
                .sum::<f64>()
    }

    /// Coefficients on `(W_ii, W_jj, W_ij, T_ij)` and the constant.
    pub fn pair_coefficients(&self) -> [f64; 5] {
        let (i, j) = (self.pair.i, self.pair.j);
        let mut out = [0.0; 5];
        out[4] = self.constant;
        for &(t, c) in &self.terms {
            match t {
                Term::W(a, b) if a == i && b == i => out[0] += c,
                Term::W(a, b) if a == j && b == j => out[1] += c,
                Term::W(a, b) if a == i && b == j => out[2] += c,
                Term::T(a, b) if a == i && b == j => out[3] += c,
                _ => {}
            }
        }
        out
    }
}

fn subscript(n: usize) -> String {
    n.to_string().chars().map(|c| char::from_u32(0x2080 + c.to_digit(10).unwrap_or(0)).unwrap_or(c)).collect()
}

/// Rounds to 12 decimals so that values like `2.9999999999999996` print
/// as `3`.
fn tidy(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Prints as e.g. `−6W₁₁ − W₂₂ + 3W₁₂ + 1.5T₁₂ + 4 ≥ 0`.
impl std::fmt::Display for LinearCut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts: Vec<(f64, String)> = Vec::new();
        for &(t, c) in &self.terms {
            let name = match t {
                Term::W(i, j) => format!("W{}{}", subscript(i), subscript(j)),
                Term::T(i, j) => format!("T{}{}", subscript(i), subscript(j)),
                Term::Aux(k) => format!("a{}", subscript(k)),
            };
            parts.push((tidy(c), name));
        }
        parts.push((tidy(self.constant), String::new()));
        let mut first = true;
        for (c, name) in parts {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "−" } else { "+" };
            let mag = c.abs();
            let num = if mag == 1.0 && !name.is_empty() { String::new() } else { mag.to_string() };
            if first {
                if c < 0.0 {
                    f.write_str(sign)?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{num}{name}")?;
        }
        if first {
            f.write_str("0")?;
        }
        f.write_str(" ≥ 0")
    }
}

/// Relaxation variant used at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RelaxKind {
    #[serde(rename = "sdp")]
    Sdp,
    #[serde(rename = "sdp+rlt")]
    SdpRlt,
    #[serde(rename = "sdp+cvi")]
    SdpCvi,
}

impl std::str::FromStr for RelaxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdp" => Ok(RelaxKind::Sdp),
            "sdp+rlt" => Ok(RelaxKind::SdpRlt),
            "sdp+cvi" => Ok(RelaxKind::SdpCvi),
            _ => Err(Error::Invalid(format!("unknown relaxation `{s}`"))),
        }
    }
}

impl std::fmt::Display for RelaxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RelaxKind::Sdp => "sdp",
            RelaxKind::SdpRlt => "sdp+rlt",
            RelaxKind::SdpCvi => "sdp+cvi",
        })
    }
}

/// `f(x) = (√(1+x²) − 1)/x`, `f(0) = 0`.
pub fn sigmoid_f(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        x.signum()
    } else {
        // x / (√(1+x²) + 1) avoids cancellation near 0.
        x / ((1.0 + x * x).sqrt() + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiCoefficients {
    pub pi: [f64; 5],
}

fn csqrt(v: f64) -> f64 {
    v.max(0.0).sqrt()
}

pub fn pi_coefficients(lii: f64, uii: f64, ljj: f64, ujj: f64, lij: f64, uij: f64) -> Result<PiCoefficients> {
    let all = [lii, uii, ljj, ujj, lij, uij];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("bounds must be finite".into()));
    }
    if lii < 0.0 || ljj < 0.0 || lii > uii || ljj > ujj || lij > uij {
        return Err(Error::Invalid(format!("inconsistent bounds {all:?}")));
    }
    let (fl, fu) = (sigmoid_f(lij), sigmoid_f(uij));
    let k = (csqrt(lii) + csqrt(uii)) * (csqrt(ljj) + csqrt(ujj));
    let den = 1.0 + fl * fu;
    Ok(PiCoefficients {
        pi: [
            -csqrt(lii * ljj * uii * ujj),
            -csqrt(ljj * ujj),
            -csqrt(lii * uii),
            k * (1.0 - fl * fu) / den,
            k * (fl + fu) / den,
        ],
    })
}

/// Bounds of the pair in the order `(Lii, Uii, Ljj, Ujj, Lij, Uij)`.
pub fn pair_bounds(pair: LiftedIndex, eb: &EntryBounds) -> [f64; 6] {
    let (lii, uii) = eb.interval(LiftedIndex::new(pair.i, pair.i));
    let (ljj, ujj) = eb.interval(LiftedIndex::new(pair.j, pair.j));
    let (lij, uij) = eb.interval(pair);
    [lii, uii, ljj, ujj, lij, uij]
}

/// The two hull inequalities on pair `(i, j)`, `i < j`. Empty when a
/// bound is infinite or a diagonal is fixed at zero.
pub fn generate_cvi(pair: LiftedIndex, eb: &EntryBounds) -> Vec<LinearCut> {
    let [lii, uii, ljj, ujj, lij, uij] = pair_bounds(pair, eb);
    if pair.is_diagonal() || uii == 0.0 || ujj == 0.0 {
        return Vec::new();
    }
    let Ok(PiCoefficients { pi }) = pi_coefficients(lii, uii, ljj, ujj, lij, uij) else {
        return Vec::new();
    };
    let (i, j) = (pair.i, pair.j);
    let make = |a: f64, b: f64, kind| {
        // π0 + π1 Wii + π2 Wjj + π3 Wij + π4 Tij − (a Wii + b Wjj − a b) ≥ 0
        // with (a, b) = (Ujj, Uii) or (Ljj, Lii).
        let mut terms = vec![(Term::w(i, i), pi[1] - a), (Term::w(j, j), pi[2] - b), (Term::w(i, j), pi[3])];
        if pi[4] != 0.0 {
            terms.push((Term::T(i, j), pi[4]));
        }
        LinearCut { pair, terms, constant: pi[0] + a * b, kind }
    };
    vec![make(ujj, uii, CutKind::Vi1), make(ljj, lii, CutKind::Vi2)]
}

/// Interval for one real scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sq_min(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.powi(2).min(self.hi.powi(2))
        }
    }

    fn sq_max(&self) -> f64 {
        self.lo.powi(2).max(self.hi.powi(2))
    }
}

/// Linear form `Σ c·term + k` used while assembling composite envelopes.
#[derive(Debug, Clone, Default)]
struct Lin {
    terms: Vec<(Term, f64)>,
    k: f64,
}

impl Lin {
    fn add(mut self, t: Term, c: f64) -> Self {
        if c != 0.0 {
            self.terms.push((t, c));
        }
        self
    }

    fn plus(mut self, o: &Lin, s: f64) -> Self {
        for &(t, c) in &o.terms {
            self = self.add(t, s * c);
        }
        self.k += s * o.k;
        self
    }
}

/// A component of `x` as a lifted expression: `w_k = W_0k`, `t_k = −T_0k`.
#[derive(Debug, Clone, Copy)]
enum Comp {
    Re(usize),
    Im(usize),
}

impl Comp {
    fn lin(self, c: f64) -> Lin {
        match self {
            Comp::Re(k) => Lin::default().add(Term::w(0, k), c),
            Comp::Im(k) => Lin::default().add(Term::T(0, k), -c),
        }
    }
}

/// McCormick envelopes of `a·b`: two under- and two over-estimators.
fn envelopes(a: Comp, ia: Interval, b: Comp, ib: Interval) -> ([Lin; 2], [Lin; 2]) {
    let lin = |ca: f64, cb: f64, k: f64| {
        let mut l = a.lin(ca).plus(&b.lin(cb), 1.0);
        l.k += k;
        l
    };
    let under = [lin(ib.lo, ia.lo, -ia.lo * ib.lo), lin(ib.hi, ia.hi, -ia.hi * ib.hi)];
    let over = [lin(ib.hi, ia.lo, -ia.lo * ib.hi), lin(ib.lo, ia.hi, -ia.hi * ib.lo)];
    (under, over)
}

fn cut_from(pair: LiftedIndex, lhs: Term, lhs_sign: f64, rhs: &Lin, kind: CutKind) -> LinearCut {
    // lhs_sign = +1: rhs − lhs ≥ 0 (lhs ≤ rhs); −1: lhs − rhs ≥ 0.
    let mut l = Lin::default().add(lhs, -lhs_sign).plus(rhs, lhs_sign);
    let mut terms: Vec<(Term, f64)> = Vec::new();
    for (t, c) in l.terms.drain(..) {
        match terms.iter_mut().find(|(u, _)| *u == t) {
            Some(e) => e.1 += c,
            None => terms.push((t, c)),
        }
    }
    terms.retain(|(_, c)| *c != 0.0);
    LinearCut { pair, terms, constant: l.k, kind }
}

/// RLT cuts on a real pair `W_pq = w_p w_q` (`p ≤ q`, both ≥ 1 in a
/// homogenized model): four cuts, or three on the diagonal.
pub fn generate_rlt_real(p: usize, q: usize, ip: Interval, iq: Interval) -> Vec<LinearCut> {
    let pair = LiftedIndex::new(p, q);
    let lhs = Term::w(p, q);
    if p == q {
        let (l, u) = (ip.lo, ip.hi);
        let w = Comp::Re(p);
        let over = { let mut x = w.lin(l + u); x.k = -l * u; x };
        let tan = |a: f64| { let mut x = w.lin(2.0 * a); x.k = -a * a; x };
        return vec![
            cut_from(pair, lhs, 1.0, &over, CutKind::RltDiag(1)),
            cut_from(pair, lhs, -1.0, &tan(l), CutKind::RltDiag(2)),
            cut_from(pair, lhs, -1.0, &tan(u), CutKind::RltDiag(3)),
        ];
    }
    let (under, over) = envelopes(Comp::Re(p), ip, Comp::Re(q), iq);
    vec![
        cut_from(pair, lhs, -1.0, &under[0], CutKind::Rlt(1)),
        cut_from(pair, lhs, -1.0, &under[1], CutKind::Rlt(2)),
        cut_from(pair, lhs, 1.0, &over[0], CutKind::Rlt(3)),
        cut_from(pair, lhs, 1.0, &over[1], CutKind::Rlt(4)),
    ]
}

/// Composite RLT cuts on a complex pair: `W_pq = w_p w_q + t_p t_q` gets
/// four over- and four under-estimators, `T_pq = t_p w_q − w_p t_q` the
/// same; on the diagonal `W_pp = w_p² + t_p²` gets one over- and four
/// under-estimators. `(re_p, im_p)` bound `(w_p, t_p)`.
pub fn generate_rlt_complex(p: usize, q: usize, re_p: Interval, im_p: Interval, re_q: Interval, im_q: Interval) -> Vec<LinearCut> {
    let pair = LiftedIndex::new(p, q);
    let mut out = Vec::new();
    if p == q {
        let lhs = Term::w(p, p);
        let sec = |c: Comp, i: Interval| { let mut x = c.lin(i.lo + i.hi); x.k = -i.lo * i.hi; x };
        let tan = |c: Comp, a: f64| { let mut x = c.lin(2.0 * a); x.k = -a * a; x };
        let over = sec(Comp::Re(p), re_p).plus(&sec(Comp::Im(p), im_p), 1.0);
        out.push(cut_from(pair, lhs, 1.0, &over, CutKind::RltDiag(1)));
        let mut k = 2;
        for a in [re_p.lo, re_p.hi] {
            for b in [im_p.lo, im_p.hi] {
                let under = tan(Comp::Re(p), a).plus(&tan(Comp::Im(p), b), 1.0);
                out.push(cut_from(pair, lhs, -1.0, &under, CutKind::RltDiag(k)));
                k += 1;
            }
        }
        return out;
    }
    let (ww_u, ww_o) = envelopes(Comp::Re(p), re_p, Comp::Re(q), re_q);
    let (tt_u, tt_o) = envelopes(Comp::Im(p), im_p, Comp::Im(q), im_q);
    let (tw_u, tw_o) = envelopes(Comp::Im(p), im_p, Comp::Re(q), re_q);
    let (wt_u, wt_o) = envelopes(Comp::Re(p), re_p, Comp::Im(q), im_q);
    let w = Term::w(p, q);
    let (t, ts) = Term::t(p, q).expect("off-diagonal");
    let mut k = 1;
    for a in 0..2 {
        for b in 0..2 {
            out.push(cut_from(pair, w, 1.0, &ww_o[a].clone().plus(&tt_o[b], 1.0), CutKind::Rlt(k)));
            out.push(cut_from(pair, w, -1.0, &ww_u[a].clone().plus(&tt_u[b], 1.0), CutKind::Rlt(k + 1)));
            // T_pq (canonical orientation ts = +1 since p < q).
            let up = tw_o[a].clone().plus(&wt_u[b], -1.0);
            let dn = tw_u[a].clone().plus(&wt_o[b], -1.0);
            out.push(cut_from(pair, t, ts, &up, CutKind::Rlt(k + 2)));
            out.push(cut_from(pair, t, -ts, &dn, CutKind::Rlt(k + 3)));
            k += 4;
        }
    }
    out
}

/// Component intervals for index `k` at a node: the model's box, tightened
/// by the diagonal bounds `L_kk ≤ w² + t² ≤ U_kk`.
pub fn component_intervals(model: &LiftedModel, eb: &EntryBounds, k: usize) -> (Interval, Interval) {
    let (l, u) = eb.interval(LiftedIndex::new(k, k));
    let b = model.component_box.as_ref().and_then(|v| v.get(k).copied().flatten());
    let r = csqrt(u);
    let (mut re, mut im) = match b {
        Some(b) => (Interval::new(b.re_lo.max(-r), b.re_hi.min(r)), Interval::new(b.im_lo.max(-r), b.im_hi.min(r))),
        None => (Interval::new(-r, r), Interval::new(-r, r)),
    };
    if model.real {
        im = Interval::new(0.0, 0.0);
    }
    // |w| ≤ √(U − min t²) and, for a nonnegative part, w ≥ √(L − max t²).
    let re_cap = csqrt(u - im.sq_min());
    let im_cap = csqrt(u - re.sq_min());
    let re_floor = csqrt(l - im.sq_max());
    let im_floor = csqrt(l - re.sq_max());
    re = Interval::new(re.lo.max(-re_cap), re.hi.min(re_cap));
    im = Interval::new(im.lo.max(-im_cap), im.hi.min(im_cap));
    if re.lo >= 0.0 {
        re.lo = re.lo.max(re_floor);
    }
    if im.lo >= 0.0 && !model.real {
        im.lo = im.lo.max(im_floor);
    }
    (re, im)
}

/// All cuts of the chosen relaxation at a node.
pub fn node_cuts(model: &LiftedModel, eb: &EntryBounds, kind: RelaxKind) -> Vec<LinearCut> {
    let mut out = Vec::new();
    match kind {
        RelaxKind::Sdp => {}
        RelaxKind::SdpCvi => {
            for &pair in &model.tracked {
                out.extend(generate_cvi(pair, eb));
            }
        }
        RelaxKind::SdpRlt => {
            if !model.homogenized {
                return out;
            }
            let ints: Vec<(Interval, Interval)> = (0..model.dim).map(|k| component_intervals(model, eb, k)).collect();
            for e in model.lifted_pairs() {
                if e.i == 0 {
                    continue;
                }
                let (a, b) = (ints[e.i], ints[e.j]);
                if [a.0, a.1, b.0, b.1].iter().any(|x| !(x.lo.is_finite() && x.hi.is_finite()) || x.lo > x.hi) {
                    continue;
                }
                if model.real {
                    out.extend(generate_rlt_real(e.i, e.j, a.0, b.0));
                } else {
                    out.extend(generate_rlt_complex(e.i, e.j, a.0, a.1, b.0, b.1));
                }
            }
        }
    }
    out
}

/// Classification of a 2×2 point relative to `J_C` and its hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    InJc,
    InHullOnly,
    Outside,
}

/// Classifies `(W_ii, W_jj, W_ij, T_ij)` against bounds
/// `[Lii, Uii, Ljj, Ujj, Lij, Uij]`.
pub fn hull_membership(v: [f64; 4], b: [f64; 6], tol: f64) -> Membership {
    let [wii, wjj, wij, tij] = v;
    let [lii, uii, ljj, ujj, lij, uij] = b;
    let boxed = wii >= lii - tol
        && wii <= uii + tol
        && wjj >= ljj - tol
        && wjj <= ujj + tol
        && wij >= -tol
        && tij >= lij * wij - tol
        && tij <= uij * wij + tol;
    if !boxed {
        return Membership::Outside;
    }
    let gap = wii * wjj - wij * wij - tij * tij;
    let scale = 1.0 + wii.abs() + wjj.abs();
    if gap.abs() <= tol * scale * scale {
        return Membership::InJc;
    }
    if gap < 0.0 {
        return Membership::Outside;
    }
    let mut eb = EntryBounds::new(2);
    eb.set(LiftedIndex::new(0, 0), lii, uii);
    eb.set(LiftedIndex::new(1, 1), ljj, ujj);
    eb.set(LiftedIndex::new(0, 1), lij, uij);
    let mut y = HermitianMatrix::zeros(2);
    y.w[(0, 0)] = wii;
    y.w[(1, 1)] = wjj;
    y.w[(0, 1)] = wij;
    y.w[(1, 0)] = wij;
    y.t[(0, 1)] = tij;
    y.t[(1, 0)] = -tij;
    // On pair (0, 1) of a standalone 2×2 system, W_00 is a variable.
    let cuts = generate_cvi(LiftedIndex::new(0, 1), &eb);
    if cuts.iter().all(|c| c.eval(&y) >= -tol * scale) {
        Membership::InHullOnly
    } else {
        Membership::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn example_bounds() -> EntryBounds {
        let mut eb = EntryBounds::new(3);
        eb.set(LiftedIndex::new(1, 1), 0.0, 1.0);
        eb.set(LiftedIndex::new(2, 2), 1.0, 4.0);
        eb.set(LiftedIndex::new(1, 2), 0.0, 4.0 / 3.0);
        eb
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_f(0.0), 0.0);
        assert_abs_diff_eq!(sigmoid_f(4.0 / 3.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid_f(-4.0 / 3.0), -0.5, epsilon = 1e-15);
        assert!(sigmoid_f(1e300).abs() < 1.0 + 1e-15);
    }

    #[test]
    fn pi_example_and_real_case() {
        let p = pi_coefficients(0.0, 1.0, 1.0, 4.0, 0.0, 4.0 / 3.0).unwrap().pi;
        for (a, b) in p.iter().zip([0.0, -2.0, 0.0, 3.0, 1.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let r = pi_coefficients(0.0, 1.0, 1.0, 4.0, 0.0, 0.0).unwrap().pi;
        assert_abs_diff_eq!(r[3], 3.0, epsilon = 1e-12);
        assert_eq!(r[4], 0.0);
        let s = pi_coefficients(1.0, 2.0, 1.0, 3.0, -0.7, 0.7).unwrap().pi;
        assert_abs_diff_eq!(s[4], 0.0, epsilon = 1e-15);
        assert!(pi_coefficients(0.0, 1.0, 1.0, 4.0, 1.0, 0.0).is_err());
        assert!(pi_coefficients(-1.0, 1.0, 1.0, 4.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cvi_example_cuts() {
        let cuts = generate_cvi(LiftedIndex::new(1, 2), &example_bounds());
        assert_eq!(cuts.len(), 2);
        let expect = [[-6.0, -1.0, 3.0, 1.5, 4.0], [-3.0, 0.0, 3.0, 1.5, 0.0]];
        for (c, e) in cuts.iter().zip(expect) {
            for (a, b) in c.pair_coefficients().iter().zip(e) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
        assert_eq!(cuts[0].kind, CutKind::Vi1);
        assert_eq!(cuts[1].kind.to_string(), "vi2");
        assert_eq!(cuts[0].to_string(), "−6W₁₁ − W₂₂ + 3W₁₂ + 1.5T₁₂ + 4 ≥ 0");
        assert_eq!(cuts[1].to_string(), "−3W₁₁ + 3W₁₂ + 1.5T₁₂ ≥ 0");
    }

    #[test]
    fn cvi_real_case() {
        let mut eb = example_bounds();
        eb.set(LiftedIndex::new(1, 2), 0.0, 0.0);
        let cuts = generate_cvi(LiftedIndex::new(1, 2), &eb);
        assert_eq!(cuts[0].pair_coefficients(), [-6.0, -1.0, 3.0, 0.0, 4.0]);
        assert_eq!(cuts[1].pair_coefficients(), [-3.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(cuts[0].to_string(), "−6W₁₁ − W₂₂ + 3W₁₂ + 4 ≥ 0");
        assert_eq!(cuts[1].to_string(), "−3W₁₁ + 3W₁₂ ≥ 0");
    }

    #[test]
    fn degenerate_pairs_are_skipped() {
        let mut eb = example_bounds();
        eb.set(LiftedIndex::new(1, 1), 0.0, 0.0);
        assert!(generate_cvi(LiftedIndex::new(1, 2), &eb).is_empty());
        let mut eb = example_bounds();
        eb.set(LiftedIndex::new(1, 2), f64::NEG_INFINITY, 1.0);
        assert!(generate_cvi(LiftedIndex::new(1, 2), &eb).is_empty());
    }

    fn lifted_point(w: &[f64], t: &[f64], wpq: f64, tpq: f64, wpp: f64, wqq: f64) -> HermitianMatrix {
        let mut y = HermitianMatrix::zeros(3);
        y.w[(0, 0)] = 1.0;
        for k in 1..3 {
            y.w[(0, k)] = w[k - 1];
            y.w[(k, 0)] = w[k - 1];
            y.t[(0, k)] = -t[k - 1];
            y.t[(k, 0)] = t[k - 1];
        }
        y.w[(1, 1)] = wpp;
        y.w[(2, 2)] = wqq;
        y.w[(1, 2)] = wpq;
        y.w[(2, 1)] = wpq;
        y.t[(1, 2)] = tpq;
        y.t[(2, 1)] = -tpq;
        y
    }

    #[test]
    fn unit_box_mccormick() {
        let u = Interval::new(0.0, 1.0);
        let cuts = generate_rlt_real(1, 2, u, u);
        assert_eq!(cuts.len(), 4);
        // At w = (1, 0): W12 = 0 is the only value admitted.
        let y0 = lifted_point(&[1.0, 0.0], &[0.0, 0.0], 0.0, 0.0, 1.0, 0.0);
        assert!(cuts.iter().all(|c| c.eval(&y0) >= -1e-12));
        let y1 = lifted_point(&[1.0, 0.0], &[0.0, 0.0], 0.1, 0.0, 1.0, 0.0);
        assert!(cuts.iter().any(|c| c.eval(&y1) < 0.0));
        let d = generate_rlt_real(1, 1, u, u);
        assert_eq!(d.len(), 3);
        // W11 ≤ w1
        let y2 = lifted_point(&[0.5, 0.0], &[0.0, 0.0], 0.0, 0.0, 0.6, 0.0);
        assert!(d[0].eval(&y2) < 0.0);
    }

    #[test]
    fn composite_rlt_admits_counterexample() {
        let (a, b) = (Interval::new(-1.0, 1.0), Interval::new(-2.0, 2.0));
        let mut cuts = generate_rlt_complex(1, 2, a, a, b, b);
        assert_eq!(cuts.len(), 16);
        cuts.extend(generate_rlt_complex(1, 1, a, a, a, a));
        cuts.extend(generate_rlt_complex(2, 2, b, b, b, b));
        let y = lifted_point(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0, 1.0, 4.0);
        assert!(cuts.iter().all(|c| c.eval(&y) >= -1e-12));
        let vi = generate_cvi(LiftedIndex::new(1, 2), &example_bounds());
        assert_abs_diff_eq!(vi[1].eval(&y), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_rlt_valid_on_rank_one_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (rp, ip, rq, iq) = (Interval::new(-0.5, 1.0), Interval::new(0.2, 1.5), Interval::new(-2.0, -0.1), Interval::new(-1.0, 1.0));
        let mut cuts = generate_rlt_complex(1, 2, rp, ip, rq, iq);
        cuts.extend(generate_rlt_complex(1, 1, rp, ip, rp, ip));
        cuts.extend(generate_rlt_complex(2, 2, rq, iq, rq, iq));
        for _ in 0..2000 {
            let w = [rng.gen_range(rp.lo..=rp.hi), rng.gen_range(rq.lo..=rq.hi)];
            let t = [rng.gen_range(ip.lo..=ip.hi), rng.gen_range(iq.lo..=iq.hi)];
            let y = lifted_point(&w, &t, w[0] * w[1] + t[0] * t[1], t[0] * w[1] - w[0] * t[1], w[0] * w[0] + t[0] * t[0], w[1] * w[1] + t[1] * t[1]);
            for c in &cuts {
                assert!(c.eval(&y) >= -1e-12, "{} violated by {}", c.kind, c.eval(&y));
            }
        }
    }

    #[test]
    fn membership_examples() {
        let b = [0.0, 1.0, 1.0, 4.0, 0.0, 4.0 / 3.0];
        assert_eq!(hull_membership([1.0, 4.0, 0.0, 0.0], b, 1e-9), Membership::Outside);
        assert_eq!(hull_membership([0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 1e-9), Membership::InJc);
        // Rank-one point with angle on the upper ratio bound.
        let (wii, wjj) = (1.0, 4.0);
        let m = (wii * wjj as f64).sqrt();
        let c = 1.0 / (1.0 + (4.0f64 / 3.0).powi(2)).sqrt();
        let pt = [wii, wjj, m * c, m * c * 4.0 / 3.0];
        assert_eq!(hull_membership(pt, b, 1e-9), Membership::InJc);
        // Midpoint of two rank-one points lies in the hull only.
        let q = [0.0, 1.0, 0.0, 0.0];
        let mid = [(pt[0] + q[0]) / 2.0, (pt[1] + q[1]) / 2.0, (pt[2] + q[2]) / 2.0, (pt[3] + q[3]) / 2.0];
        assert_eq!(hull_membership(mid, b, 1e-9), Membership::InHullOnly);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn cuts_valid_on_rank_one_surface(
            lii in 0.0f64..2.0, dii in 0.0f64..3.0, ljj in 0.0f64..2.0, djj in 0.0f64..3.0,
            lij in -3.0f64..3.0, dij in 0.0f64..3.0,
            s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0, s3 in 0.0f64..=1.0,
        ) {
            let (uii, ujj, uij) = (lii + dii, ljj + djj, lij + dij);
            let mut eb = EntryBounds::new(2);
            eb.set(LiftedIndex::new(0, 0), lii, uii);
            eb.set(LiftedIndex::new(1, 1), ljj, ujj);
            eb.set(LiftedIndex::new(0, 1), lij, uij);
            let wii = lii + s1 * dii;
            let wjj = ljj + s2 * djj;
            let alpha = (lij.atan() + s3 * (uij.atan() - lij.atan())).tan();
            let m = (wii * wjj).sqrt();
            let wij = m / (1.0 + alpha * alpha).sqrt();
            let tij = alpha * wij;
            let mut y = HermitianMatrix::zeros(2);
            y.w[(0, 0)] = wii; y.w[(1, 1)] = wjj; y.w[(0, 1)] = wij; y.w[(1, 0)] = wij;
            y.t[(0, 1)] = tij; y.t[(1, 0)] = -tij;
            for c in generate_cvi(LiftedIndex::new(0, 1), &eb) {
                prop_assert!(c.eval(&y) >= -1e-9 * (1.0 + uii + ujj));
            }
        }
    }
}
