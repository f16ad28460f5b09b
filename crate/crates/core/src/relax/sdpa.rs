//! SDPA sparse format (`.dat-s`) export and import.
//!
//! A [`StandardForm`] is written as the SDPA primal
//! `min c'x  s.t.  Σ F_i x_i − F_0 ⪰ 0` with `F_i = −G_i` and `F_0 = −h`.
//! Block order:
//!
//! 1. one diagonal block holding the orthant rows followed by each equality
//!    row twice (`a'x − b ≥ 0`, `b − a'x ≥ 0`);
//! 2. one arrow block `[[u₀, u₁'], [u₁, u₀ I]]` per second-order cone;
//! 3. the PSD blocks in their original order.
//!
//! The objective offset is recorded in a leading comment line.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::program::{svec_index, ConeDims, StandardForm};
use crate::{Error, Result};

pub fn export(sf: &StandardForm) -> String {
    let n = sf.c.len();
    let dims = &sf.dims;
    let p = sf.a.nrows();
    let lp = dims.l + 2 * p;
    let mut blocks: Vec<i64> = Vec::new();
    if lp > 0 {
        blocks.push(-(lp as i64));
    }
    blocks.extend(dims.q.iter().map(|&q| q as i64));
    blocks.extend(dims.s.iter().map(|&k| k as i64));

    // entries[matno] = (block, i, j, value), 1-based, i ≤ j
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    let mut push = |mat: usize, blk: usize, i: usize, j: usize, v: f64| {
        if v != 0.0 {
            entries.push((mat, blk, i.min(j), i.max(j), v));
        }
    };
    // Coefficient of x_v (mat v+1) and constant (mat 0) of the affine
    // matrix h − Gx at row `r` of the stacked cone vector.
    let mut blk = 0;
    if lp > 0 {
        blk = 1;
        for r in 0..dims.l {
            push(0, blk, r + 1, r + 1, -sf.h[r]);
            for v in 0..n {
                push(v + 1, blk, r + 1, r + 1, -sf.g[(r, v)]);
            }
        }
        for e in 0..p {
            let (r1, r2) = (dims.l + 2 * e + 1, dims.l + 2 * e + 2);
            push(0, blk, r1, r1, sf.b[e]);
            push(0, blk, r2, r2, -sf.b[e]);
            for v in 0..n {
                push(v + 1, blk, r1, r1, sf.a[(e, v)]);
                push(v + 1, blk, r2, r2, -sf.a[(e, v)]);
            }
        }
    }
    let mut off = dims.l;
    for &q in &dims.q {
        blk += 1;
        for v in 0..=n {
            let coef = |r: usize| if v == 0 { -sf.h[r] } else { -sf.g[(r, v - 1)] };
            let head = coef(off);
            for d in 1..=q {
                push(v, blk, d, d, head);
            }
            for t in 1..q {
                push(v, blk, 1, t + 1, coef(off + t));
            }
        }
        off += q;
    }
    for &k in &dims.s {
        blk += 1;
        for v in 0..=n {
            for b in 0..k {
                for a in b..k {
                    let r = off + svec_index(k, a, b);
                    let raw = if v == 0 { -sf.h[r] } else { -sf.g[(r, v - 1)] };
                    let val = if a == b { raw } else { raw / std::f64::consts::SQRT_2 };
                    push(v, blk, b + 1, a + 1, val);
                }
            }
        }
        off += k * (k + 1) / 2;
    }
    entries.sort_by(|x, y| (x.0, x.1, x.2, x.3).cmp(&(y.0, y.1, y.2, y.3)));

    let mut out = String::new();
    let _ = writeln!(out, "* objective offset {:.17e}", sf.offset);
    let _ = writeln!(out, "{n}");
    let _ = writeln!(out, "{}", blocks.len());
    let _ = writeln!(out, "{}", blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "{}", sf.c.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "));
    for (m, b, i, j, v) in entries {
        let _ = writeln!(out, "{m} {b} {i} {j} {v:.17e}");
    }
    out
}

/// Parses an SDPA sparse file into a standard form whose cones are the
/// diagonal blocks (as one orthant) and the PSD blocks; arrow blocks come
/// back as ordinary PSD blocks.
pub fn parse(text: &str) -> Result<StandardForm> {
    let mut offset = 0.0;
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if let Some(rest) = t.strip_prefix('*').or_else(|| t.strip_prefix('"')) {
            if let Some(v) = rest.trim().strip_prefix("objective offset") {
                offset = v.trim().parse().map_err(|_| Error::parse(no + 1, "bad offset"))?;
            }
            continue;
        }
        if !t.is_empty() {
            lines.push((no + 1, t.replace([',', '{', '}', '(', ')'], " ")));
        }
    }
    let mut it = lines.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| Error::parse(0, format!("missing {what}")));
    let (ln, l) = next("mDIM")?;
    let n: usize = l.split_whitespace().next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(ln, "bad mDIM"))?;
    let (ln, l) = next("nBLOCK")?;
    let nb: usize = l.split_whitespace().next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(ln, "bad nBLOCK"))?;
    let (ln, l) = next("block structure")?;
    let bs: Vec<i64> = l.split_whitespace().take(nb).map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|_| Error::parse(ln, "bad block structure"))?;
    if bs.len() != nb {
        return Err(Error::parse(ln, "block count mismatch"));
    }
    let (ln, l) = next("objective")?;
    let c: Vec<f64> = l.split_whitespace().map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|_| Error::parse(ln, "bad objective"))?;
    if c.len() != n {
        return Err(Error::parse(ln, "objective length mismatch"));
    }

    let lp: usize = bs.iter().filter(|&&b| b < 0).map(|&b| (-b) as usize).sum();
    let psd: Vec<usize> = bs.iter().filter(|&&b| b > 0).map(|&b| b as usize).collect();
    let dims = ConeDims { l: lp, q: Vec::new(), s: psd.clone() };
    // Offsets of each block in the stacked vector.
    let mut offs = Vec::with_capacity(nb);
    let (mut lo, mut so) = (0usize, lp);
    for &b in &bs {
        if b < 0 {
            offs.push(lo);
            lo += (-b) as usize;
        } else {
            offs.push(so);
            so += (b * (b + 1) / 2) as usize;
        }
    }
    let total = dims.total();
    let mut g = DMatrix::zeros(total, n);
    let mut h = DVector::zeros(total);
    for (ln, l) in it {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(ln, "expected 5 fields"));
        }
        let bad = || Error::parse(ln, "bad entry");
        let m: usize = f[0].parse().map_err(|_| bad())?;
        let b: usize = f[1].parse().map_err(|_| bad())?;
        let i: usize = f[2].parse().map_err(|_| bad())?;
        let j: usize = f[3].parse().map_err(|_| bad())?;
        let v: f64 = f[4].parse().map_err(|_| bad())?;
        if m > n || b == 0 || b > nb || i == 0 || j == 0 {
            return Err(bad());
        }
        let size = bs[b - 1];
        let row = if size < 0 {
            if i != j || i as i64 > -size {
                return Err(Error::parse(ln, "off-diagonal entry in diagonal block"));
            }
            offs[b - 1] + i - 1
        } else {
            let k = size as usize;
            if i > k || j > k {
                return Err(bad());
            }
            let (a, bb) = ((i.max(j)) - 1, (i.min(j)) - 1);
            offs[b - 1] + svec_index(k, a, bb)
        };
        let scale = if size > 0 && i != j { std::f64::consts::SQRT_2 } else { 1.0 };
        // F_0 = −h, F_v = −G_v.
        if m == 0 {
            h[row] -= scale * v;
        } else {
            g[(row, m - 1)] -= scale * v;
        }
    }
    Ok(StandardForm {
        c: DVector::from_vec(c),
        offset,
        a: DMatrix::zeros(0, n),
        b: DVector::zeros(0),
        g,
        h,
        dims,
    })
}
