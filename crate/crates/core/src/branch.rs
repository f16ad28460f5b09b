//! Violation measurement, branching-entry selection and pseudocosts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cuts::generate_cvi;
use crate::model::{EntryBounds, LiftedIndex};
use crate::relax::ipm::{self, IpmSettings, IpmStatus};
use crate::relax::program::{ConicProgram, LinExpr, LinRow, SocBlock};
use crate::relax::{RelaxStatus, RelaxationSolution};
use crate::{Error, Result};

/// Weight on the larger child score.
pub const DEFAULT_MU: f64 = 0.15;
/// Evaluations per side before pseudocosts replace strong branching.
pub const DEFAULT_ETA: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchRule {
    Mvsb,
    Mvwb,
    Rbeb,
}

impl std::str::FromStr for BranchRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvsb" => Ok(BranchRule::Mvsb),
            "mvwb" => Ok(BranchRule::Mvwb),
            "rbeb" => Ok(BranchRule::Rbeb),
            _ => Err(Error::Invalid(format!("unknown branching rule `{s}`"))),
        }
    }
}

impl std::fmt::Display for BranchRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BranchRule::Mvsb => "mvsb",
            BranchRule::Mvwb => "mvwb",
            BranchRule::Rbeb => "rbeb",
        })
    }
}

/// `λ_min` of every tracked 2×2 submatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub values: Vec<(LiftedIndex, f64)>,
}

impl ViolationReport {
    /// Pair with the largest `λ_min`, ties to the lowest index.
    pub fn most_violated(&self) -> Option<(LiftedIndex, f64)> {
        let mut best: Option<(LiftedIndex, f64)> = None;
        for &(e, v) in &self.values {
            match best {
                Some((be, bv)) if v < bv || (v == bv && e >= be) => {}
                _ => best = Some((e, v)),
            }
        }
        best
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pairs with `λ_min` above `tol(pair)`.
    pub fn violated(&self, tol: impl Fn(LiftedIndex) -> f64) -> Vec<LiftedIndex> {
        self.values.iter().filter(|(e, v)| *v > tol(*e)).map(|(e, _)| *e).collect()
    }
}

pub fn measure_violation(sol: &RelaxationSolution, tracked: &[LiftedIndex]) -> ViolationReport {
    let mut values: Vec<(LiftedIndex, f64)> = tracked.iter().map(|&e| (e, sol.pair_lambda_min(e))).collect();
    values.sort_by_key(|v| v.0);
    ViolationReport { values }
}

/// Violation threshold for a pair: `1e-6·(1 + W_ii + W_jj)`.
pub fn violation_tol(sol: &RelaxationSolution, e: LiftedIndex) -> f64 {
    1e-6 * (1.0 + sol.y.w[(e.i, e.i)].abs() + sol.y.w[(e.j, e.j)].abs())
}

/// The diagonal and ratio intervals of pair `c*` that can still be split.
pub fn candidate_entries(cstar: LiftedIndex, eb: &EntryBounds, real: bool) -> Vec<LiftedIndex> {
    let mut out = Vec::with_capacity(3);
    for e in [LiftedIndex::new(cstar.i, cstar.i), LiftedIndex::new(cstar.j, cstar.j), cstar] {
        if real && !e.is_diagonal() {
            continue;
        }
        let (lo, hi) = eb.interval(e);
        if lo.is_finite() && hi.is_finite() && hi > lo && (hi - lo) > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            out.push(e);
        }
    }
    out
}

/// Bisection: `(up, down)` children with `L' = mid` and `U' = mid`.
pub fn apply_branch(eb: &EntryBounds, entry: LiftedIndex) -> (EntryBounds, EntryBounds) {
    let (lo, hi) = eb.interval(entry);
    let mid = 0.5 * (lo + hi);
    let mut up = eb.clone();
    up.set_lower(entry, mid);
    let mut down = eb.clone();
    down.set_upper(entry, mid);
    (up, down)
}

/// `μ·max + (1−μ)·min`.
pub fn combine(mu: f64, a: f64, b: f64) -> f64 {
    mu * a.max(b) + (1.0 - mu) * a.min(b)
}

/// Strong-branching score from child `λ_min(c*)` values (`None` for an
/// infeasible child, scored as `+∞` on its side).
pub fn score_from_children(mu: f64, up: Option<f64>, down: Option<f64>) -> f64 {
    let s = |v: Option<f64>| v.map_or(f64::INFINITY, |l| -l);
    combine(mu, s(up), s(down))
}

/// Largest `λ` with `‖(W_ii − W_jj, 2W_ij, 2T_ij)‖ ≤ W_ii + W_jj − 2λ` over
/// the 2×2 hull of the pair's bounds (box, ratio bounds, both hull cuts).
/// `None` when the bounds are empty.
pub fn wev(pair: LiftedIndex, eb: &EntryBounds, settings: &IpmSettings) -> Option<f64> {
    if eb.check().is_err() {
        return None;
    }
    let (lii, uii) = eb.interval(LiftedIndex::new(pair.i, pair.i));
    let (ljj, ujj) = eb.interval(LiftedIndex::new(pair.j, pair.j));
    let (lij, uij) = eb.interval(pair);
    // Variables: 0 W_ii, 1 W_jj, 2 W_ij, 3 T_ij, 4 λ
    let mut cp = ConicProgram::new(5);
    cp.objective = LinExpr { terms: vec![(4, -1.0)], constant: 0.0 };
    let bound = |cp: &mut ConicProgram, v: usize, lo: f64, hi: f64| {
        if lo == hi {
            cp.rows.push(LinRow::eq(LinExpr { terms: vec![(v, 1.0)], constant: -lo }));
            return;
        }
        if lo.is_finite() {
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(v, 1.0)], constant: -lo }));
        }
        if hi.is_finite() {
            cp.rows.push(LinRow::le(LinExpr { terms: vec![(v, 1.0)], constant: -hi }));
        }
    };
    bound(&mut cp, 0, lii, uii);
    bound(&mut cp, 1, ljj, ujj);
    if lij.is_finite() && uij.is_finite() {
        cp.rows.push(LinRow::ge(LinExpr::var(2)));
        if lij == uij {
            cp.rows.push(LinRow::eq(LinExpr { terms: vec![(3, 1.0), (2, -lij)], constant: 0.0 }));
        } else {
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(3, 1.0), (2, -lij)], constant: 0.0 }));
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(2, uij), (3, -1.0)], constant: 0.0 }));
        }
        // Hull cuts in local coordinates (indices 0, 1 of a 2×2 system).
        let mut local = EntryBounds::new(2);
        local.set(LiftedIndex::new(0, 0), lii, uii);
        local.set(LiftedIndex::new(1, 1), ljj, ujj);
        local.set(LiftedIndex::new(0, 1), lij, uij);
        for cut in generate_cvi(LiftedIndex::new(0, 1), &local) {
            let [a, b, c, d, k] = cut.pair_coefficients();
            cp.rows.push(LinRow::ge(LinExpr { terms: vec![(0, a), (1, b), (2, c), (3, d)], constant: k }));
        }
    }
    let mut head = LinExpr { terms: vec![(0, 1.0), (1, 1.0), (4, -2.0)], constant: 0.0 };
    head.compact();
    cp.socs.push(SocBlock {
        head,
        tail: vec![
            LinExpr { terms: vec![(0, 1.0), (1, -1.0)], constant: 0.0 },
            LinExpr { terms: vec![(2, 2.0)], constant: 0.0 },
            LinExpr { terms: vec![(3, 2.0)], constant: 0.0 },
        ],
    });
    let r = ipm::solve(&cp.to_standard(), settings);
    match r.status {
        IpmStatus::Optimal | IpmStatus::Inaccurate => Some(-r.pcost),
        IpmStatus::PrimalInfeasible => None,
        // Unbounded diagonal: no useful estimate.
        _ => Some(f64::INFINITY),
    }
}

/// Per-entry running sums of per-unit objective improvements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudocostTable {
    pub up: BTreeMap<LiftedIndex, (f64, usize)>,
    pub down: BTreeMap<LiftedIndex, (f64, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl PseudocostTable {
    fn side(&self, d: Direction) -> &BTreeMap<LiftedIndex, (f64, usize)> {
        match d {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
        }
    }

    /// Records an objective improvement `delta` for a branch on an interval
    /// of width `width`; returns the per-unit value `delta / (width / 2)`.
    pub fn record(&mut self, e: LiftedIndex, d: Direction, delta: f64, width: f64) -> f64 {
        let unit = delta / (0.5 * width);
        let side = match d {
            Direction::Up => &mut self.up,
            Direction::Down => &mut self.down,
        };
        let s = side.entry(e).or_insert((0.0, 0));
        s.0 += unit;
        s.1 += 1;
        unit
    }

    pub fn count(&self, e: LiftedIndex, d: Direction) -> usize {
        self.side(d).get(&e).map_or(0, |s| s.1)
    }

    pub fn mean(&self, e: LiftedIndex, d: Direction) -> Option<f64> {
        self.side(d).get(&e).filter(|s| s.1 > 0).map(|s| s.0 / s.1 as f64)
    }

    pub fn reliable(&self, e: LiftedIndex, eta: usize) -> bool {
        self.count(e, Direction::Up) >= eta && self.count(e, Direction::Down) >= eta
    }

    /// `(μ·max Φ + (1−μ)·min Φ)·(U − L)/2`.
    pub fn score(&self, e: LiftedIndex, mu: f64, width: f64) -> f64 {
        let up = self.mean(e, Direction::Up).unwrap_or(0.0);
        let dn = self.mean(e, Direction::Down).unwrap_or(0.0);
        combine(mu, up, dn) * 0.5 * width
    }
}

/// Objective improvement of a child over its parent (`+∞` if infeasible).
pub fn improvement(parent: f64, child: &RelaxationSolution) -> f64 {
    match child.status {
        RelaxStatus::Infeasible => f64::INFINITY,
        RelaxStatus::Optimal => (child.objective - parent).max(0.0),
        RelaxStatus::NumericalFailure => 0.0,
    }
}
