//! Depth-first spatial branch-and-cut.
//!
//! Nodes carry entry bounds and a solved relaxation. Children are created
//! by bisecting one entry interval, tightened, and solved immediately, so a
//! node's value is known when it is pushed. A local solve runs at every
//! node to update the incumbent.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::branch::{
    apply_branch, candidate_entries, combine, improvement, measure_violation, score_from_children, violation_tol, wev,
    BranchRule, Direction, PseudocostTable, DEFAULT_ETA, DEFAULT_MU,
};
use crate::cuts::{node_cuts, RelaxKind};
use crate::lifted::{LiftedModel, Origin};
use crate::local::{LocalResult, Nlp};
use crate::model::{ComplexQcqp, EntryBounds, LiftedIndex};
use crate::numerics::{fix_phase, ComplexVector};
use crate::relax::chordal::rank_one_complete_lenient;
use crate::relax::ipm::IpmSettings;
use crate::relax::{solve_node, RelaxStatus, RelaxationSolution};
use crate::tighten::{tighten_box, tighten_node, TightenResult};
use crate::Result;

/// Feasibility tolerance for accepting a local solution.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Config {
    pub relax: RelaxKind,
    pub rule: BranchRule,
    /// Relative optimality gap.
    pub gap: f64,
    pub max_nodes: usize,
    pub time_limit: Option<Duration>,
    pub max_depth: usize,
    pub mu: f64,
    pub eta: usize,
    /// Worker threads for strong-branching solves (1 = sequential).
    pub threads: usize,
    /// Seed for the root multistart.
    pub seed: u64,
    /// Random local-solver starts at the root.
    pub restarts: usize,
    pub ipm: IpmSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            relax: RelaxKind::SdpCvi,
            rule: BranchRule::Mvsb,
            gap: 1e-4,
            max_nodes: 10_000,
            time_limit: None,
            max_depth: 100,
            mu: DEFAULT_MU,
            eta: DEFAULT_ETA,
            threads: 1,
            seed: 0,
            restarts: 4,
            ipm: IpmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    NodeLimit,
    TimeLimit,
    /// Search finished but some subtree was dropped (depth limit or an
    /// unsplittable node) with a bound below the incumbent.
    GapNotCertified,
    /// No incumbent and the root relaxation could not be solved.
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    pub glb: f64,
    pub gub: f64,
    pub gap: f64,
    pub nodes: usize,
    pub depth: usize,
    pub lbtime: f64,
    pub ubtime: f64,
    pub time: f64,
    pub solved: bool,
    pub root_bound: f64,
}

#[derive(Debug, Clone)]
pub struct Incumbent {
    /// User variables.
    pub x: ComplexVector,
    /// Lifted vector.
    pub y: ComplexVector,
    pub aux: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub incumbent: Option<Incumbent>,
    /// NDJSON event records, one per line, without timings.
    pub log: Vec<String>,
}

impl Outcome {
    pub fn log_text(&self) -> String {
        let mut s = self.log.join("\n");
        s.push('\n');
        s
    }
}

/// Relative gap `(gub − glb) / max(|gub|, 1e-9)`.
pub fn relative_gap(glb: f64, gub: f64) -> f64 {
    if !gub.is_finite() || !glb.is_finite() {
        return f64::INFINITY;
    }
    ((gub - glb) / gub.abs().max(1e-9)).max(0.0)
}

/// Absolute pruning tolerance at incumbent `gub`.
pub fn prune_tol(gap: f64, gub: f64) -> f64 {
    (gap * gub.abs().max(1e-9)).max(1e-6)
}

struct Node {
    id: usize,
    depth: usize,
    eb: EntryBounds,
    sol: RelaxationSolution,
    value: f64,
    resolved: bool,
}

struct Child {
    eb: EntryBounds,
    sol: RelaxationSolution,
}

fn entry_json(e: LiftedIndex) -> Value {
    json!([e.i, e.j])
}

fn opt_json(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

struct Solver<'a> {
    model: &'a LiftedModel,
    cfg: &'a Config,
    nlp: Nlp<'a>,
    pool: Option<rayon::ThreadPool>,
    log: Vec<String>,
    pc: PseudocostTable,
    lbtime: Duration,
    ubtime: Duration,
    gub: f64,
    incumbent: Option<Incumbent>,
    next_id: usize,
}

impl<'a> Solver<'a> {
    fn emit(&mut self, v: Value) {
        self.log.push(v.to_string());
    }

    fn eval_child(&self, mut eb: EntryBounds) -> Child {
        if tighten_node(self.model, &mut eb) == TightenResult::Infeasible {
            return Child { sol: RelaxationSolution::infeasible(self.model.dim), eb };
        }
        let cuts = node_cuts(self.model, &eb, self.cfg.relax);
        let sol = solve_node(self.model, &eb, &cuts, &self.cfg.ipm);
        Child { eb, sol }
    }

    /// Evaluates both children of each entry, in parallel if configured.
    fn eval_pairs(&mut self, eb: &EntryBounds, entries: &[LiftedIndex]) -> Vec<(Child, Child)> {
        let t0 = Instant::now();
        let work = |e: &LiftedIndex| {
            let (up, dn) = apply_branch(eb, *e);
            (self.eval_child(up), self.eval_child(dn))
        };
        let out: Vec<(Child, Child)> = match &self.pool {
            Some(p) if entries.len() > 1 => p.install(|| entries.par_iter().map(work).collect()),
            _ => entries.iter().map(work).collect(),
        };
        self.lbtime += t0.elapsed();
        out
    }

    fn local_start(&self, y: &ComplexVector, aux: &[f64]) -> Vec<f64> {
        let y = match (self.model.homogenized, self.model.phase_ref) {
            (true, _) => fix_phase(y, 0),
            (false, Some(r)) => fix_phase(y, r),
            _ => y.clone(),
        };
        let mut aux = aux.to_vec();
        aux.resize(self.model.num_aux(), 0.0);
        self.nlp.pack(&y, &aux)
    }

    /// Objective of an acceptable local solution.
    fn accept(&self, r: &LocalResult) -> Option<f64> {
        if !r.objective.is_finite() || r.maxviol > FEAS_TOL {
            return None;
        }
        match &self.model.origin {
            Origin::Qcqp { original, .. } => {
                let x = self.model.to_user(&r.y);
                let (obj, viol) = original.evaluate(&x);
                (viol <= FEAS_TOL).then_some(obj)
            }
            Origin::Direct => Some(r.objective),
        }
    }

    fn heuristic(&mut self, node: &Node, root: bool) {
        let t0 = Instant::now();
        let sol = &node.sol;
        let mut starts = Vec::new();
        if self.model.homogenized {
            let n = self.model.dim;
            let mut y = ComplexVector::zeros(n);
            y.re[0] = 1.0;
            for k in 1..n {
                y.re[k] = sol.y.w[(0, k)];
                y.im[k] = -sol.y.t[(0, k)];
            }
            starts.push(self.local_start(&y, &sol.aux));
        }
        let blocks: Vec<_> = self.model.cliques.cliques.iter().map(|c| sol.block(c)).collect();
        if let Ok(y) = rank_one_complete_lenient(&self.model.cliques, &blocks) {
            starts.push(self.local_start(&y, &sol.aux));
        }
        if root && self.cfg.restarts > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            let (lo, hi) = self.nlp.bounds();
            for _ in 0..self.cfg.restarts {
                let z: Vec<f64> = lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        let (l, h) = (l.max(-1e3), h.min(1e3));
                        if h > l {
                            rng.gen_range(l..=h)
                        } else {
                            l
                        }
                    })
                    .collect();
                starts.push(z);
            }
        }
        for z in starts {
            let r = self.nlp.solve(&z);
            if let Some(obj) = self.accept(&r) {
                if obj < self.gub - 1e-9 * obj.abs().max(1.0) {
                    self.gub = obj;
                    self.incumbent = Some(Incumbent { x: self.model.to_user(&r.y), y: r.y, aux: r.aux, objective: obj });
                    self.emit(json!({"type": "incumbent", "node": node.id, "value": obj}));
                }
            }
        }
        self.ubtime += t0.elapsed();
    }

    /// Widest finite interval among the diagonal and tracked ratio entries.
    fn widest_entry(&self, eb: &EntryBounds) -> Option<LiftedIndex> {
        let mut best: Option<(LiftedIndex, f64)> = None;
        let mut consider = |e: LiftedIndex| {
            let (lo, hi) = eb.interval(e);
            let w = hi - lo;
            if lo.is_finite() && hi.is_finite() && w > 1e-12 * (1.0 + lo.abs().max(hi.abs())) && best.is_none_or(|b| w > b.1) {
                best = Some((e, w));
            }
        };
        for i in 0..self.model.dim {
            consider(LiftedIndex::new(i, i));
        }
        if !self.model.real {
            for &e in &self.model.tracked {
                consider(e);
            }
        }
        best.map(|b| b.0)
    }

    fn record(&mut self, e: LiftedIndex, dir: Direction, parent: f64, child: &RelaxationSolution, width: f64) {
        if child.status != RelaxStatus::Optimal {
            return;
        }
        let delta = improvement(parent, child);
        let value = self.pc.record(e, dir, delta, width);
        let mean = self.pc.mean(e, dir);
        let count = self.pc.count(e, dir);
        self.emit(json!({
            "type": "pseudocost", "entry": entry_json(e), "dir": dir, "delta": delta,
            "width": width, "value": value, "mean": mean, "count": count,
        }));
    }

    /// Chooses the branching entry; returns it with already-solved children
    /// when available.
    fn decide(&mut self, node: &Node) -> Option<(LiftedIndex, Option<LiftedIndex>, Option<(Child, Child)>)> {
        let fallback = |s: &Self| s.widest_entry(&node.eb).map(|e| (e, None, None));
        if !node.resolved {
            return fallback(self);
        }
        let report = measure_violation(&node.sol, &self.model.tracked);
        let violated = report.violated(|e| violation_tol(&node.sol, e));
        if violated.is_empty() {
            return fallback(self);
        }
        let (cstar, lam) = report.most_violated()?;
        let real = self.model.real;
        let mu = self.cfg.mu;
        let mut cands_log = Vec::new();
        let mut best: Option<(LiftedIndex, f64, usize)> = None;
        let better = |best: &Option<(LiftedIndex, f64, usize)>, e: LiftedIndex, s: f64| match best {
            None => true,
            Some((be, bs, _)) => s > *bs || (s == *bs && e < *be),
        };
        let (choice, cached, extra) = match self.cfg.rule {
            BranchRule::Mvsb => {
                let cands = candidate_entries(cstar, &node.eb, real);
                if cands.is_empty() {
                    return fallback(self);
                }
                let kids = self.eval_pairs(&node.eb, &cands);
                let lam_of = |c: &Child| match c.sol.status {
                    RelaxStatus::Optimal => Some(c.sol.pair_lambda_min(cstar)),
                    RelaxStatus::Infeasible => None,
                    RelaxStatus::NumericalFailure => Some(lam),
                };
                for (k, (e, (up, dn))) in cands.iter().zip(&kids).enumerate() {
                    let (lu, ld) = (lam_of(up), lam_of(dn));
                    let s = score_from_children(mu, lu, ld);
                    cands_log.push(json!({"entry": entry_json(*e), "up": opt_json(lu), "down": opt_json(ld), "score": s, "strong": true}));
                    if better(&best, *e, s) {
                        best = Some((*e, s, k));
                    }
                }
                let (e, _, k) = best?;
                (e, kids.into_iter().nth(k), Value::Null)
            }
            BranchRule::Mvwb => {
                let cands = candidate_entries(cstar, &node.eb, real);
                if cands.is_empty() {
                    return fallback(self);
                }
                let t0 = Instant::now();
                let mut wevs = Vec::new();
                for (k, e) in cands.iter().enumerate() {
                    let (up, dn) = apply_branch(&node.eb, *e);
                    let (wu, wd) = (wev(cstar, &up, &self.cfg.ipm), wev(cstar, &dn, &self.cfg.ipm));
                    let s = score_from_children(mu, wu, wd);
                    cands_log.push(json!({"entry": entry_json(*e), "up": opt_json(wu), "down": opt_json(wd), "score": s, "strong": false}));
                    wevs.push((wu, wd));
                    if better(&best, *e, s) {
                        best = Some((*e, s, k));
                    }
                }
                self.lbtime += t0.elapsed();
                let (e, _, k) = best?;
                (e, None, json!([opt_json(wevs[k].0), opt_json(wevs[k].1)]))
            }
            BranchRule::Rbeb => {
                let mut cands: Vec<LiftedIndex> =
                    violated.iter().flat_map(|&p| candidate_entries(p, &node.eb, real)).collect();
                cands.sort();
                cands.dedup();
                if cands.is_empty() {
                    return fallback(self);
                }
                let strong: Vec<LiftedIndex> = cands.iter().copied().filter(|e| !self.pc.reliable(*e, self.cfg.eta)).collect();
                let kids = self.eval_pairs(&node.eb, &strong);
                let mut kid_of = std::collections::BTreeMap::new();
                for (e, (up, dn)) in strong.iter().zip(kids) {
                    let (lo, hi) = node.eb.interval(*e);
                    self.record(*e, Direction::Up, node.sol.objective, &up.sol, hi - lo);
                    self.record(*e, Direction::Down, node.sol.objective, &dn.sol, hi - lo);
                    kid_of.insert(*e, (up, dn));
                }
                for (k, e) in cands.iter().enumerate() {
                    let (lo, hi) = node.eb.interval(*e);
                    let (s, up, dn, sb) = match kid_of.get(e) {
                        Some((u, d)) => {
                            let (du, dd) = (improvement(node.sol.objective, &u.sol), improvement(node.sol.objective, &d.sol));
                            (combine(mu, du, dd), du, dd, true)
                        }
                        None => {
                            let (pu, pd) = (
                                self.pc.mean(*e, Direction::Up).unwrap_or(0.0),
                                self.pc.mean(*e, Direction::Down).unwrap_or(0.0),
                            );
                            (self.pc.score(*e, mu, hi - lo), pu, pd, false)
                        }
                    };
                    cands_log.push(json!({"entry": entry_json(*e), "up": up, "down": dn, "score": s, "strong": sb}));
                    if better(&best, *e, s) {
                        best = Some((*e, s, k));
                    }
                }
                let (e, _, _) = best?;
                (e, kid_of.remove(&e), Value::Null)
            }
        };
        self.emit(json!({
            "type": "branch", "node": node.id, "rule": self.cfg.rule, "cstar": entry_json(cstar),
            "lambda": lam, "entry": entry_json(choice), "candidates": cands_log, "wev": extra,
        }));
        Some((choice, Some(cstar), cached))
    }

    fn make_node(&mut self, parent: &Node, child: Child, entry: LiftedIndex, dir: Direction, cstar: Option<LiftedIndex>) -> Option<Node> {
        let id = self.next_id;
        self.next_id += 1;
        let (value, resolved) = match child.sol.status {
            RelaxStatus::Optimal => (child.sol.objective.max(parent.value), true),
            RelaxStatus::NumericalFailure => (parent.value, false),
            RelaxStatus::Infeasible => (f64::INFINITY, true),
        };
        let clam = match (cstar, child.sol.status) {
            (Some(c), RelaxStatus::Optimal) => json!(child.sol.pair_lambda_min(c)),
            _ => Value::Null,
        };
        self.emit(json!({
            "type": "node", "id": id, "parent": parent.id, "depth": parent.depth + 1, "entry": entry_json(entry),
            "dir": dir, "status": child.sol.status, "objective": child.sol.objective, "value": value, "cstar_lambda": clam,
        }));
        if child.sol.status == RelaxStatus::Infeasible {
            return None;
        }
        Some(Node { id, depth: parent.depth + 1, eb: child.eb, sol: child.sol, value, resolved })
    }
}

/// Solves a lifted model.
pub fn solve_model(model: &LiftedModel, cfg: &Config) -> Outcome {
    let start = Instant::now();
    let pool = (cfg.threads > 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().ok()).flatten();
    let mut s = Solver {
        model,
        cfg,
        nlp: Nlp::new(model),
        pool,
        log: Vec::new(),
        pc: PseudocostTable::default(),
        lbtime: Duration::ZERO,
        ubtime: Duration::ZERO,
        gub: f64::INFINITY,
        incumbent: None,
        next_id: 1,
    };
    let t0 = Instant::now();
    let root_child = s.eval_child(model.root_bounds.clone());
    s.lbtime += t0.elapsed();
    let root_bound = match root_child.sol.status {
        RelaxStatus::Optimal => root_child.sol.objective,
        RelaxStatus::Infeasible => f64::INFINITY,
        RelaxStatus::NumericalFailure => f64::NEG_INFINITY,
    };
    s.emit(json!({
        "type": "node", "id": 0, "parent": Value::Null, "depth": 0, "status": root_child.sol.status,
        "objective": root_child.sol.objective, "value": root_bound,
    }));
    let mut nodes = 1usize;
    let mut max_depth = 0usize;
    let mut lost = f64::INFINITY;
    // Smallest bound among subtrees closed by the pruning test.
    let mut pruned = f64::INFINITY;
    let mut stack: Vec<Node> = Vec::new();
    let mut status = None;
    if root_child.sol.status == RelaxStatus::Infeasible {
        status = Some(Status::Infeasible);
    } else {
        let resolved = root_child.sol.status == RelaxStatus::Optimal;
        let root = Node { id: 0, depth: 0, eb: root_child.eb, sol: root_child.sol, value: root_bound, resolved };
        s.heuristic(&root, true);
        stack.push(root);
    }
    let mut root_heuristic_done = true;
    while status.is_none() {
        let glb = stack.iter().map(|n| n.value).fold(lost.min(pruned).min(s.gub), f64::min);
        if s.gub.is_finite() && s.gub - glb <= prune_tol(cfg.gap, s.gub) {
            status = Some(if lost < s.gub - prune_tol(cfg.gap, s.gub) { Status::GapNotCertified } else { Status::Optimal });
            break;
        }
        let Some(node) = stack.pop() else {
            status = Some(if lost.is_finite() {
                Status::GapNotCertified
            } else if s.gub.is_finite() {
                Status::Optimal
            } else {
                Status::Infeasible
            });
            break;
        };
        if nodes >= cfg.max_nodes {
            stack.push(node);
            status = Some(Status::NodeLimit);
            break;
        }
        if cfg.time_limit.is_some_and(|t| start.elapsed() >= t) {
            stack.push(node);
            status = Some(Status::TimeLimit);
            break;
        }
        if node.value >= s.gub - prune_tol(cfg.gap, s.gub) {
            pruned = pruned.min(node.value);
            continue;
        }
        if node.resolved && !(node.id == 0 && root_heuristic_done) {
            s.heuristic(&node, false);
            if node.value >= s.gub - prune_tol(cfg.gap, s.gub) {
                pruned = pruned.min(node.value);
                continue;
            }
        }
        root_heuristic_done = false;
        if node.depth >= cfg.max_depth {
            lost = lost.min(node.value);
            continue;
        }
        let Some((entry, cstar, cached)) = s.decide(&node) else {
            lost = lost.min(node.value);
            continue;
        };
        let (up, dn) = match cached {
            Some(k) => k,
            None => {
                let mut v = s.eval_pairs(&node.eb, &[entry]);
                let (u, d) = v.pop().expect("one pair");
                if cfg.rule == BranchRule::Rbeb && cstar.is_some() {
                    let (lo, hi) = node.eb.interval(entry);
                    s.record(entry, Direction::Up, node.sol.objective, &u.sol, hi - lo);
                    s.record(entry, Direction::Down, node.sol.objective, &d.sol, hi - lo);
                }
                (u, d)
            }
        };
        nodes += 2;
        let up = s.make_node(&node, up, entry, Direction::Up, cstar);
        let dn = s.make_node(&node, dn, entry, Direction::Down, cstar);
        max_depth = max_depth.max(node.depth + 1);
        // The lower-valued child is explored first (down on ties).
        match (up, dn) {
            (Some(u), Some(d)) => {
                if u.value < d.value {
                    stack.push(d);
                    stack.push(u);
                } else {
                    stack.push(u);
                    stack.push(d);
                }
            }
            (Some(c), None) | (None, Some(c)) => stack.push(c),
            (None, None) => {}
        }
    }
    let status = status.expect("loop sets status");
    let glb = match status {
        Status::Infeasible => f64::INFINITY,
        _ => stack.iter().map(|n| n.value).fold(lost.min(pruned).min(s.gub), f64::min),
    };
    let status = if status == Status::Infeasible && root_bound == f64::NEG_INFINITY && s.gub.is_infinite() {
        Status::Failed
    } else {
        status
    };
    let gap = relative_gap(glb, s.gub);
    let solved = status == Status::Optimal;
    s.emit(json!({"type": "end", "status": status, "glb": glb, "gub": s.gub, "nodes": nodes}));
    let report = Report {
        status,
        glb,
        gub: s.gub,
        gap,
        nodes,
        depth: max_depth,
        lbtime: s.lbtime.as_secs_f64(),
        ubtime: s.ubtime.as_secs_f64(),
        time: start.elapsed().as_secs_f64(),
        solved,
        root_bound,
    };
    Outcome { report, incumbent: s.incumbent, log: s.log }
}

/// Solves a generic instance: box tightening, lifting, branch-and-cut.
pub fn solve_qcqp(p: &ComplexQcqp, cfg: &Config) -> Result<Outcome> {
    let Some(tight) = tighten_box(p) else {
        let report = Report {
            status: Status::Infeasible,
            glb: f64::INFINITY,
            gub: f64::INFINITY,
            gap: f64::INFINITY,
            nodes: 0,
            depth: 0,
            lbtime: 0.0,
            ubtime: 0.0,
            time: 0.0,
            solved: false,
            root_bound: f64::INFINITY,
        };
        let log = vec![json!({"type": "end", "status": Status::Infeasible}).to_string()];
        return Ok(Outcome { report, incumbent: None, log });
    };
    let mut model = LiftedModel::from_qcqp(&tight)?;
    if let Origin::Qcqp { original, .. } = &mut model.origin {
        *original = p.clone();
    }
    Ok(solve_model(&model, cfg))
}
