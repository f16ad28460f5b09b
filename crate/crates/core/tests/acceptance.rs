//! Acceptance checks, one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sbc_core::acopf::{self, parse_matpower, solve_acopf};
use sbc_core::boxqp::{boxqp_to_model, default_config as boxqp_config, random_instance};
use sbc_core::branch::BranchRule;
use sbc_core::cuts::{generate_cvi, generate_rlt_complex, pi_coefficients, sigmoid_f, Interval, RelaxKind};
use sbc_core::driver::{solve_qcqp, Config, Outcome, Status};
use sbc_core::model::{EntryBounds, LiftedIndex};
use sbc_core::numerics::{hermitian_eigenvalues, ComplexVector, HermitianMatrix};
use sbc_core::relax::chordal::{chordal_decompose, extract_blocks, rank_one_complete};
use sbc_core::relax::ipm::{self, IpmSettings, IpmStatus};
use sbc_core::relax::program::{ConicProgram, LinExpr, LinRow, SocBlock};
use sbc_core::tighten::{tighten_cycle, tighten_quadratic, QuadConstraint1D, QuadOutcome};

const CASE3: &str = include_str!("../../../data/case3_lmbd.m");
/// Best known AC objective of the three-bus case.
const CASE3_AC: f64 = 5812.645;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pair_bounds_eb(b: [f64; 6]) -> EntryBounds {
    let mut eb = EntryBounds::new(2);
    eb.set(LiftedIndex::new(0, 0), b[0], b[1]);
    eb.set(LiftedIndex::new(1, 1), b[2], b[3]);
    eb.set(LiftedIndex::new(0, 1), b[4], b[5]);
    eb
}

fn point2(v: [f64; 4]) -> HermitianMatrix {
    let mut y = HermitianMatrix::zeros(2);
    y.w[(0, 0)] = v[0];
    y.w[(1, 1)] = v[1];
    y.w[(0, 1)] = v[2];
    y.w[(1, 0)] = v[2];
    y.t[(0, 1)] = v[3];
    y.t[(1, 0)] = -v[3];
    y
}

fn random_bounds(rng: &mut ChaCha8Rng) -> [f64; 6] {
    let mut diag = || {
        let lo = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) };
        (lo, lo + rng.gen_range(0.1..3.0))
    };
    let (lii, uii) = diag();
    let (ljj, ujj) = diag();
    let lij = rng.gen_range(-3.0..3.0);
    [lii, uii, ljj, ujj, lij, lij + rng.gen_range(0.0..3.0)]
}

/// A point of the rank-one set with the given bounds.
fn sample_jc(rng: &mut ChaCha8Rng, b: [f64; 6]) -> [f64; 4] {
    // Endpoints are drawn with positive probability to reach the cuts'
    // binding points.
    let mut pick = |lo: f64, hi: f64| match rng.gen_range(0..5) {
        0 => lo,
        1 => hi,
        _ => rng.gen_range(lo..=hi),
    };
    let wii = pick(b[0], b[1]);
    let wjj = pick(b[2], b[3]);
    let a = pick(b[4].atan(), b[5].atan()).tan();
    let wij = (wii * wjj).sqrt() / (1.0 + a * a).sqrt();
    [wii, wjj, wij, a * wij]
}

fn c1_cut_coefficients() -> Check {
    let t = Instant::now();
    let pi = pi_coefficients(0.0, 1.0, 1.0, 4.0, 0.0, 4.0 / 3.0).map_err(|e| e.to_string())?.pi;
    let want = [0.0, -2.0, 0.0, 3.0, 1.5];
    let err = pi.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut eb = EntryBounds::new(3);
    eb.set(LiftedIndex::new(1, 1), 0.0, 1.0);
    eb.set(LiftedIndex::new(2, 2), 1.0, 4.0);
    eb.set(LiftedIndex::new(1, 2), 0.0, 4.0 / 3.0);
    let cuts: Vec<String> = generate_cvi(LiftedIndex::new(1, 2), &eb).iter().map(|c| c.to_string()).collect();
    let elapsed = t.elapsed();
    ensure(err <= 1e-12, || format!("π = {pi:?}, max error {err:e}"))?;
    ensure(
        cuts == ["−6W₁₁ − W₂₂ + 3W₁₂ + 1.5T₁₂ + 4 ≥ 0", "−3W₁₁ + 3W₁₂ + 1.5T₁₂ ≥ 0"],
        || format!("cuts {cuts:?}"),
    )?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("π = {pi:?} (max error {err:.1e}); cuts {cuts:?}"))
}

fn c2_angle_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let scale = [0.1, 1.0, 10.0, 100.0][k % 4];
        let a = rng.gen_range(-scale..scale);
        let b = rng.gen_range(-scale..scale);
        let (l, u) = if a <= b { (a, b) } else { (b, a) };
        let l = if k % 17 == 0 { 0.0f64.min(u) } else { l };
        let alpha = if rng.gen_bool(0.5) { l } else { u };
        let (fl, fu) = (sigmoid_f(l), sigmoid_f(u));
        let r = (1.0 - fl * fu + alpha * (fl + fu) - (1.0 + fl * fu) * (1.0 + alpha * alpha).sqrt()).abs();
        worst = worst.max(r);
    }
    ensure(worst <= 1e-9, || format!("max residual {worst:e}"))?;
    Ok(format!("10000 triples, max residual {worst:.2e}"))
}

/// Minimizes `c·(W_ii, W_jj, W_ij, T_ij)` over the PSD cone, the bounds
/// and both hull cuts.
fn optimize_over_hull(b: [f64; 6], c: [f64; 4]) -> Option<[f64; 4]> {
    let mut cp = ConicProgram::new(4);
    cp.objective = LinExpr { terms: (0..4).map(|k| (k, c[k])).collect(), constant: 0.0 };
    let lin = |terms: Vec<(usize, f64)>, constant: f64| LinExpr { terms, constant };
    cp.rows.push(LinRow::ge(lin(vec![(0, 1.0)], -b[0])));
    cp.rows.push(LinRow::le(lin(vec![(0, 1.0)], -b[1])));
    cp.rows.push(LinRow::ge(lin(vec![(1, 1.0)], -b[2])));
    cp.rows.push(LinRow::le(lin(vec![(1, 1.0)], -b[3])));
    cp.rows.push(LinRow::ge(lin(vec![(2, 1.0)], 0.0)));
    cp.rows.push(LinRow::ge(lin(vec![(3, 1.0), (2, -b[4])], 0.0)));
    cp.rows.push(LinRow::ge(lin(vec![(2, b[5]), (3, -1.0)], 0.0)));
    for cut in generate_cvi(LiftedIndex::new(0, 1), &pair_bounds_eb(b)) {
        let [a0, a1, a2, a3, k] = cut.pair_coefficients();
        cp.rows.push(LinRow::ge(lin(vec![(0, a0), (1, a1), (2, a2), (3, a3)], k)));
    }
    cp.socs.push(SocBlock {
        head: lin(vec![(0, 1.0), (1, 1.0)], 0.0),
        tail: vec![lin(vec![(0, 1.0), (1, -1.0)], 0.0), lin(vec![(2, 2.0)], 0.0), lin(vec![(3, 2.0)], 0.0)],
    });
    let r = ipm::solve(&cp.to_standard(), &IpmSettings::default());
    (r.status == IpmStatus::Optimal).then(|| [r.x[0], r.x[1], r.x[2], r.x[3]])
}

fn c3_hull() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_cut = f64::INFINITY;
    for _ in 0..10_000 {
        let b = random_bounds(&mut rng);
        let v = sample_jc(&mut rng, b);
        let y = point2(v);
        for cut in generate_cvi(LiftedIndex::new(0, 1), &pair_bounds_eb(b)) {
            worst_cut = worst_cut.min(cut.eval(&y));
        }
    }
    ensure(worst_cut >= -1e-9, || format!("a sampled rank-one point violates a cut by {:e}", -worst_cut))?;
    let mut worst_rank = 0.0f64;
    for k in 0..100 {
        let b = random_bounds(&mut rng);
        let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let v = optimize_over_hull(b, c).ok_or_else(|| format!("hull solve {k} failed for bounds {b:?}"))?;
        let scale = (b[1] * b[3]).max(1.0);
        let r = (v[0] * v[1] - v[2] * v[2] - v[3] * v[3]).abs() / scale;
        worst_rank = worst_rank.max(r);
    }
    let elapsed = t.elapsed();
    ensure(worst_rank <= 1e-5, || format!("rank-one residual {worst_rank:e}"))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("min cut value {worst_cut:.2e} over 10000 points; max scaled rank-one residual {worst_rank:.2e} over 100 solves"))
}

fn lifted3(x: [f64; 2], w11: f64, w22: f64, w12: f64, t12: f64) -> HermitianMatrix {
    let mut y = HermitianMatrix::zeros(3);
    y.w[(0, 0)] = 1.0;
    for k in 1..3 {
        y.w[(0, k)] = x[k - 1];
        y.w[(k, 0)] = x[k - 1];
    }
    y.w[(1, 1)] = w11;
    y.w[(2, 2)] = w22;
    y.w[(1, 2)] = w12;
    y.w[(2, 1)] = w12;
    y.t[(1, 2)] = t12;
    y.t[(2, 1)] = -t12;
    y
}

fn c4_rlt_comparison() -> Check {
    let (a, b) = (Interval::new(-1.0, 1.0), Interval::new(-2.0, 2.0));
    let mut rlt = generate_rlt_complex(1, 2, a, a, b, b);
    rlt.extend(generate_rlt_complex(1, 1, a, a, a, a));
    rlt.extend(generate_rlt_complex(2, 2, b, b, b, b));
    let y = lifted3([0.0, 0.0], 1.0, 4.0, 0.0, 0.0);
    let rlt_min = rlt.iter().map(|c| c.eval(&y)).fold(f64::INFINITY, f64::min);
    let eig_min = hermitian_eigenvalues(&y).into_iter().fold(f64::INFINITY, f64::min);
    let mut eb = EntryBounds::new(3);
    eb.set(LiftedIndex::new(1, 1), 0.0, 1.0);
    eb.set(LiftedIndex::new(2, 2), 1.0, 4.0);
    eb.set(LiftedIndex::new(1, 2), 0.0, 4.0 / 3.0);
    let vi = generate_cvi(LiftedIndex::new(1, 2), &eb);
    let vi2 = vi[1].eval(&y);
    ensure(rlt_min >= -1e-12, || format!("point violates an RLT cut by {}", -rlt_min))?;
    ensure(eig_min >= -1e-12, || format!("point is not PSD ({eig_min})"))?;
    ensure((vi2 + 3.0).abs() <= 1e-12, || format!("vi2 value {vi2}"))?;

    // Real case: points satisfying McCormick cuts and PSD satisfy both
    // real hull cuts.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut accepted, mut worst) = (0usize, f64::INFINITY);
    while accepted < 10_000 {
        let l: [f64; 2] = std::array::from_fn(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.5) });
        let u: [f64; 2] = std::array::from_fn(|k| l[k] + rng.gen_range(0.05..2.0));
        let x: [f64; 2] = std::array::from_fn(|k| rng.gen_range(l[k]..=u[k]));
        let diag = |k: usize, r: &mut ChaCha8Rng| {
            let lo = (2.0 * l[k] * x[k] - l[k] * l[k]).max(2.0 * u[k] * x[k] - u[k] * u[k]).max(x[k] * x[k]);
            let hi = (l[k] + u[k]) * x[k] - l[k] * u[k];
            if hi > lo {
                r.gen_range(lo..=hi)
            } else {
                hi
            }
        };
        let (w11, w22) = (diag(0, &mut rng), diag(1, &mut rng));
        let lo = (l[0] * x[1] + l[1] * x[0] - l[0] * l[1]).max(u[0] * x[1] + u[1] * x[0] - u[0] * u[1]);
        let hi = (u[0] * x[1] + l[1] * x[0] - u[0] * l[1]).min(l[0] * x[1] + u[1] * x[0] - l[0] * u[1]);
        if hi < lo {
            continue;
        }
        let w12 = rng.gen_range(lo..=hi);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, x[0], x[1], x[0], w11, w12, x[1], w12, w22]);
        if m.symmetric_eigenvalues().min() < 0.0 {
            continue;
        }
        accepted += 1;
        let mut eb = EntryBounds::new(3);
        eb.set(LiftedIndex::new(1, 1), l[0] * l[0], u[0] * u[0]);
        eb.set(LiftedIndex::new(2, 2), l[1] * l[1], u[1] * u[1]);
        eb.set(LiftedIndex::new(1, 2), 0.0, 0.0);
        let y = lifted3(x, w11, w22, w12, 0.0);
        for c in generate_cvi(LiftedIndex::new(1, 2), &eb) {
            worst = worst.min(c.eval(&y) / (1.0 + u[0] * u[0] + u[1] * u[1]));
        }
    }
    ensure(worst >= -1e-9, || format!("an RLT+PSD point violates a real hull cut by {:e}", -worst))?;
    Ok(format!("counterexample passes RLT ({rlt_min:.1e}) and PSD, vi2 = {vi2}; 10000 real samples, min scaled cut value {worst:.2e}"))
}

fn c5_cycle() -> Check {
    let mut eb = EntryBounds::new(4);
    eb.set(LiftedIndex::new(2, 3), -1.0, 0.25);
    // Ratio bound of the reversed edge (3, 1) is stored negated on (1, 3).
    eb.set(LiftedIndex::new(1, 3), -0.5, 1.0);
    tighten_cycle([1, 2, 3], &mut eb);
    let l12 = eb.lower(LiftedIndex::new(1, 2));
    let err = (l12 + 6.0 / 7.0).abs();
    ensure(err <= 1e-12, || format!("L12 = {l12}"))?;
    Ok(format!("L12 = {l12} (error {err:.1e})"))
}

fn c6_quadratic() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-3;
    let qgrid: Vec<f64> = (0..=10_000).map(|k| -5.0 + k as f64 * h).collect();
    let (mut infeasible, mut points) = (0usize, 0usize);
    for k in 0..100 {
        let a = match k % 10 {
            0 => 0.0,
            1 => -rng.gen_range(0.5..2.0),
            _ => rng.gen_range(1.0..2.0),
        };
        let c = rng.gen_range(-2.0..2.0);
        let ly = rng.gen_range(-2.0..2.0);
        let uy = (ly + rng.gen_range(0.0..2.0f64)).min(2.0);
        let qc = QuadConstraint1D { a, c, ly, uy };
        let out = tighten_quadratic(qc);
        let ny = ((uy - ly) / h).ceil() as usize;
        let mut any = false;
        for j in 0..=ny {
            let y = (ly + j as f64 * h).min(uy);
            for &q in &qgrid {
                if a * q * q + q * y + c <= 0.0 {
                    any = true;
                    points += 1;
                    match out {
                        QuadOutcome::Infeasible => return Err(format!("system {k} {qc:?}: feasible (q={q}, y={y}) but reported infeasible")),
                        QuadOutcome::Interval(lo, hi) => {
                            ensure(q >= lo - 1e-9 && q <= hi + 1e-9, || format!("system {k} {qc:?}: q={q} (y={y}) outside [{lo}, {hi}]"))?
                        }
                    }
                }
            }
        }
        if out == QuadOutcome::Infeasible {
            infeasible += 1;
        } else if !any && a > 0.0 {
            // Feasible points exist iff the discriminant is nonnegative
            // somewhere on the y-range; endpoints are on the grid.
            let disc = (ly * ly).max(uy * uy) - 4.0 * a * c;
            ensure(disc < 0.0, || format!("system {k} {qc:?}: no grid point but discriminant {disc}"))?;
            return Err(format!("system {k} {qc:?}: no feasible point, infeasibility not detected"));
        }
    }
    Ok(format!("100 systems, {points} feasible grid points kept, {infeasible} infeasible systems detected"))
}

fn c7_boxqp() -> Check {
    let mut worst = 0.0f64;
    let mut max_nodes = 0;
    for k in 0..20u64 {
        let n = 3 + (k as usize % 3);
        let density = [0.3, 0.6, 1.0][(k as usize / 3) % 3];
        let b = random_instance(n, density, 7000 + k);
        let out = solve_qcqp(&boxqp_to_model(&b), &boxqp_config()).map_err(|e| e.to_string())?;
        let oracle = common::boxqp_global(&b);
        let r = &out.report;
        ensure(r.status == Status::Optimal, || format!("instance {k}: {r:?}"))?;
        ensure(r.gap <= 1e-4, || format!("instance {k}: gap {}", r.gap))?;
        let d = common::rel_diff(r.gub, oracle);
        ensure(d <= 1e-4, || format!("instance {k}: {} vs oracle {oracle}", r.gub))?;
        ensure(r.nodes <= 10_000, || format!("instance {k}: {} nodes", r.nodes))?;
        worst = worst.max(d);
        max_nodes = max_nodes.max(r.nodes);
    }
    Ok(format!("20 instances, max relative difference {worst:.2e}, max nodes {max_nodes}"))
}

fn c8_acopf() -> Check {
    let pc = parse_matpower(CASE3).map_err(|e| e.to_string())?;
    let cfg = Config { relax: RelaxKind::SdpCvi, max_nodes: 1, ..acopf::default_config() };
    let (_, root) = solve_acopf(&pc, &cfg).map_err(|e| e.to_string())?;
    let root_gap = 100.0 * (CASE3_AC - root.report.root_bound) / CASE3_AC;
    ensure((root_gap - 0.39).abs() <= 0.1, || format!("root gap {root_gap:.3}% (bound {})", root.report.root_bound))?;
    let cfg = Config { rule: BranchRule::Mvwb, time_limit: Some(Duration::from_secs(600)), ..acopf::default_config() };
    let (_, out) = solve_acopf(&pc, &cfg).map_err(|e| e.to_string())?;
    let r = &out.report;
    ensure(r.status == Status::Optimal && r.gap <= 1e-3, || format!("{r:?}"))?;
    ensure(r.time < 600.0, || format!("took {} s", r.time))?;
    Ok(format!(
        "root bound {:.3}, gap {root_gap:.3}%; MVWB gap {:.3}% in {} nodes, {:.2} s",
        root.report.root_bound,
        100.0 * r.gap,
        r.nodes,
        r.time
    ))
}

fn c9_completion() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let n = rng.gen_range(2..=12);
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.gen_range(0..v), v));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.15) && !edges.contains(&(i, j)) {
                    edges.push((i, j));
                }
            }
        }
        let ct = chordal_decompose(n, &edges);
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::from_polar(rng.gen_range(0.9..1.1), rng.gen_range(-PI..PI))).collect();
        let x = ComplexVector::from_complex(&v);
        let y = rank_one_complete(&ct, &extract_blocks(&ct, &x)).map_err(|e| format!("trial {k}: {e}"))?;
        let (yc, xc) = (y.to_complex(), x.to_complex());
        let m = (0..n).max_by(|&a, &b| xc[a].norm().total_cmp(&xc[b].norm())).unwrap_or(0);
        let rot = xc[m] / yc[m];
        let rot = rot / rot.norm();
        let err = (0..n).map(|i| (yc[i] * rot - xc[i]).norm()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    ensure(worst <= 1e-6, || format!("max entry error {worst:e}"))?;
    Ok(format!("1000 vectors, max entry error {worst:.2e}"))
}

fn events(out: &Outcome) -> Vec<Value> {
    out.log.iter().map(|l| serde_json::from_str(l).expect("log line is JSON")).collect()
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

/// `−λ` per side with `+∞` for an infeasible child, combined with μ = 0.15.
fn hand_score(up: &Value, down: &Value) -> f64 {
    let a = num(up).map_or(f64::INFINITY, |l| -l);
    let b = num(down).map_or(f64::INFINITY, |l| -l);
    0.15 * a.max(b) + 0.85 * a.min(b)
}

fn children(ev: &[Value]) -> BTreeMap<(u64, String), &Value> {
    ev.iter()
        .filter(|e| e["type"] == "node" && !e["parent"].is_null())
        .map(|e| ((e["parent"].as_u64().unwrap(), e["dir"].as_str().unwrap().to_string()), e))
        .collect()
}

fn check_wev(ev: &[Value]) -> Result<usize, String> {
    let kids = children(ev);
    let mut checked = 0;
    for b in ev.iter().filter(|e| e["type"] == "branch") {
        let node = b["node"].as_u64().unwrap();
        for (k, dir) in ["up", "down"].iter().enumerate() {
            let Some(child) = kids.get(&(node, dir.to_string())) else { continue };
            let w = &b["wev"][k];
            match (num(w), num(&child["cstar_lambda"])) {
                (Some(w), Some(l)) => {
                    ensure(w >= l - 1e-6, || format!("node {node} {dir}: WEV {w} < child λ_min {l}"))?;
                    checked += 1;
                }
                (None, Some(l)) => return Err(format!("node {node} {dir}: WEV infeasible but child solved with λ_min {l}")),
                _ => {}
            }
        }
    }
    Ok(checked)
}

fn check_pseudocosts(ev: &[Value]) -> Result<usize, String> {
    let mut acc: BTreeMap<(String, String), (f64, u64)> = BTreeMap::new();
    let mut n = 0;
    for e in ev.iter().filter(|e| e["type"] == "pseudocost") {
        let key = (e["entry"].to_string(), e["dir"].as_str().unwrap().to_string());
        let delta = num(&e["delta"]).ok_or("non-finite delta")?;
        let width = num(&e["width"]).ok_or("non-finite width")?;
        let unit = delta / (0.5 * width);
        let s = acc.entry(key.clone()).or_insert((0.0, 0));
        s.0 += unit;
        s.1 += 1;
        ensure(num(&e["value"]) == Some(unit), || format!("{key:?}: value {} vs {unit}", e["value"]))?;
        ensure(e["count"].as_u64() == Some(s.1), || format!("{key:?}: count {} vs {}", e["count"], s.1))?;
        let mean = s.0 / s.1 as f64;
        ensure(num(&e["mean"]) == Some(mean), || format!("{key:?}: mean {} vs {mean}", e["mean"]))?;
        n += 1;
    }
    // Strong-branching improvements of the chosen entry match the logged
    // parent and child objectives.
    let kids = children(ev);
    let objective: BTreeMap<u64, &Value> =
        ev.iter().filter(|e| e["type"] == "node").map(|e| (e["id"].as_u64().unwrap(), &e["objective"])).collect();
    for b in ev.iter().filter(|e| e["type"] == "branch") {
        let node = b["node"].as_u64().unwrap();
        let Some(chosen) = b["candidates"].as_array().unwrap().iter().find(|c| c["entry"] == b["entry"]) else {
            return Err(format!("node {node}: chosen entry not among candidates"));
        };
        if chosen["strong"] != true {
            continue;
        }
        let parent = num(objective[&node]).ok_or("parent objective missing")?;
        for dir in ["up", "down"] {
            let Some(child) = kids.get(&(node, dir.to_string())) else { continue };
            let want = match child["status"].as_str() {
                Some("optimal") => Some((num(&child["objective"]).unwrap() - parent).max(0.0)),
                Some("infeasible") => None,
                _ => continue,
            };
            ensure(num(&chosen[dir]) == want, || format!("node {node} {dir}: logged {} vs {want:?}", chosen[dir]))?;
        }
    }
    Ok(n)
}

fn check_mvsb(ev: &[Value]) -> Result<usize, String> {
    let kids = children(ev);
    let mut n = 0;
    for b in ev.iter().filter(|e| e["type"] == "branch") {
        let node = b["node"].as_u64().unwrap();
        let mut best: Option<(f64, &Value)> = None;
        for c in b["candidates"].as_array().unwrap() {
            let want = hand_score(&c["up"], &c["down"]);
            let got = num(&c["score"]).unwrap_or(f64::INFINITY);
            ensure(got == want, || format!("node {node} {}: score {got} vs {want}", c["entry"]))?;
            if best.is_none_or(|(s, _)| want > s) {
                best = Some((want, &c["entry"]));
            }
            if c["entry"] == b["entry"] {
                for dir in ["up", "down"] {
                    if let Some(child) = kids.get(&(node, dir.to_string())) {
                        if child["status"] == "optimal" {
                            ensure(child["cstar_lambda"] == c[dir], || format!("node {node} {dir}: child λ differs from scored λ"))?;
                        }
                    }
                }
            }
            n += 1;
        }
        ensure(best.map(|b| b.1) == Some(&b["entry"]), || format!("node {node}: chosen entry is not the best score"))?;
    }
    Ok(n)
}

fn c10_branching() -> Check {
    let b = random_instance(8, 1.0, 1);
    let p = boxqp_to_model(&b);
    let pc = parse_matpower(CASE3).map_err(|e| e.to_string())?;
    let run = |rule: BranchRule| -> Result<[Outcome; 2], String> {
        let cfg = Config { relax: RelaxKind::SdpCvi, rule, ..boxqp_config() };
        let q = solve_qcqp(&p, &cfg).map_err(|e| e.to_string())?;
        let cfg = Config { rule, ..acopf::default_config() };
        let (_, a) = solve_acopf(&pc, &cfg).map_err(|e| e.to_string())?;
        Ok([q, a])
    };
    let mvwb = run(BranchRule::Mvwb)?;
    let rbeb = run(BranchRule::Rbeb)?;
    let mvsb = run(BranchRule::Mvsb)?;
    let (mut wev_checked, mut pc_checked, mut sb_checked) = (0, 0, 0);
    for k in 0..2 {
        wev_checked += check_wev(&events(&mvwb[k]))?;
        pc_checked += check_pseudocosts(&events(&rbeb[k]))?;
        sb_checked += check_mvsb(&events(&mvsb[k]))?;
    }
    ensure(wev_checked > 0, || "no WEV comparisons in the logs".into())?;
    ensure(pc_checked > 0, || "no pseudocost events".into())?;
    ensure(sb_checked > 0, || "no MVSB candidates".into())?;
    for (rule, first) in [(BranchRule::Mvsb, &mvsb), (BranchRule::Mvwb, &mvwb), (BranchRule::Rbeb, &rbeb)] {
        let again = run(rule)?;
        for k in 0..2 {
            ensure(again[k].log_text() == first[k].log_text(), || format!("{rule} logs differ between runs"))?;
        }
    }
    let nodes = |o: &[Outcome; 2]| format!("{}/{}", o[0].report.nodes, o[1].report.nodes);
    Ok(format!(
        "{wev_checked} WEV bounds, {pc_checked} pseudocost updates, {sb_checked} MVSB scores checked; \
         logs identical across runs (nodes BoxQP/ACOPF: mvsb {}, mvwb {}, rbeb {})",
        nodes(&mvsb),
        nodes(&mvwb),
        nodes(&rbeb)
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("cut coefficients", c1_cut_coefficients),
        ("angle identity", c2_angle_identity),
        ("hull validity and exactness", c3_hull),
        ("RLT comparison", c4_rlt_comparison),
        ("cycle tightening", c5_cycle),
        ("quadratic tightening", c6_quadratic),
        ("BoxQP vs global oracle", c7_boxqp),
        ("ACOPF case3_lmbd", c8_acopf),
        ("rank-one completion", c9_completion),
        ("branching mechanics", c10_branching),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|a| a == &id.to_string()) {
            continue;
        }
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("PASS {id:>2} {name}: {msg} [{secs:.2} s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {msg} [{secs:.2} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
