//! MATPOWER case files (version 2): `bus`, `gen`, `branch` and polynomial
//! `gencost` matrices. Values are stored per unit on `base_mva`; angles in
//! radians.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External bus number.
    pub id: usize,
    /// 1 PQ, 2 PV, 3 reference, 4 isolated.
    pub kind: u8,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vmin: f64,
    pub vmax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    /// `(c2, c1, c0)` for cost `c2·p² + c1·p + c0`, `p` per unit.
    pub cost: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    /// Apparent-power limit; 0 means unlimited.
    pub rate: f64,
    /// Off-nominal tap ratio (1 for a line).
    pub tap: f64,
    pub shift: f64,
    /// Angle-difference bounds `θ_from − θ_to`, `None` if unspecified.
    pub angle: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Generator>,
    pub branches: Vec<Branch>,
}

impl PowerCase {
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == 3)
    }
}

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    // `%` starts a comment outside quotes; case files only quote the version.
    let mut in_q = false;
    for (k, ch) in line.char_indices() {
        match ch {
            '\'' => in_q = !in_q,
            '%' if !in_q => return &line[..k],
            _ => {}
        }
    }
    line
}

fn push_rows(m: &mut Matrix, key: &str, body: &str, ln: usize) -> Result<()> {
    for row in body.split(';') {
        let vals: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if vals.is_empty() {
            continue;
        }
        let nums = vals
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{v}` in mpc.{key}"))))
            .collect::<Result<Vec<_>>>()?;
        m.rows.push((ln, nums));
    }
    Ok(())
}

fn parse_sections(text: &str) -> Result<(String, BTreeMap<String, Matrix>, BTreeMap<String, (usize, String)>)> {
    let mut name = String::new();
    let mut mats = BTreeMap::new();
    let mut scalars = BTreeMap::new();
    let mut current: Option<(String, Matrix)> = None;
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let mut line = strip_comment(raw).trim();
        if let Some((key, m)) = current.as_mut() {
            let mut done = false;
            if let Some(pos) = line.find(']') {
                line = &line[..pos];
                done = true;
            }
            push_rows(m, key, line, ln)?;
            if done {
                let (key, m) = current.take().expect("open matrix");
                mats.insert(key, m);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else { continue };
        let Some((key, val)) = rest.split_once('=') else {
            return Err(Error::parse(ln, "expected `mpc.<field> = …`"));
        };
        let key = key.trim().to_string();
        let val = val.trim();
        if let Some(body) = val.strip_prefix('[') {
            current = Some((key, Matrix { rows: Vec::new() }));
            let (key, m) = current.as_mut().expect("just set");
            let (body, done) = match body.find(']') {
                Some(p) => (&body[..p], true),
                None => (body, false),
            };
            push_rows(m, key, body, ln)?;
            if done {
                let (key, m) = current.take().expect("open matrix");
                mats.insert(key, m);
            }
        } else {
            scalars.insert(key, (ln, val.trim_end_matches(';').trim().to_string()));
        }
    }
    if let Some((key, _)) = current {
        return Err(Error::parse(text.lines().count(), format!("unterminated matrix mpc.{key}")));
    }
    Ok((name, mats, scalars))
}

fn need(row: &(usize, Vec<f64>), cols: usize, what: &str) -> Result<()> {
    if row.1.len() < cols {
        return Err(Error::parse(row.0, format!("{what} row has {} columns, expected at least {cols}", row.1.len())));
    }
    Ok(())
}

/// Parses a MATPOWER case. Out-of-service generators and branches are
/// dropped; piecewise-linear costs and cost polynomials above degree two
/// are rejected.
pub fn parse_matpower(text: &str) -> Result<PowerCase> {
    let (name, mats, scalars) = parse_sections(text)?;
    let base_mva = match scalars.get("baseMVA") {
        Some((ln, v)) => v.parse::<f64>().ok().filter(|b| *b > 0.0).ok_or_else(|| Error::parse(*ln, "bad baseMVA"))?,
        None => 100.0,
    };
    let get = |k: &str| mats.get(k).ok_or_else(|| Error::Invalid(format!("missing mpc.{k}")));
    let bus_m = get("bus")?;
    let gen_m = get("gen")?;
    let br_m = get("branch")?;
    let cost_m = get("gencost")?;

    let mut index = BTreeMap::new();
    let mut buses = Vec::new();
    for row in &bus_m.rows {
        need(row, 13, "bus")?;
        let v = &row.1;
        let id = v[0] as usize;
        if index.insert(id, buses.len()).is_some() {
            return Err(Error::parse(row.0, format!("duplicate bus {id}")));
        }
        let (vmax, vmin) = (v[11], v[12]);
        if !(vmin > 0.0 && vmin <= vmax) {
            return Err(Error::parse(row.0, format!("bus {id}: bad voltage limits [{vmin}, {vmax}]")));
        }
        buses.push(Bus {
            id,
            kind: v[1] as u8,
            pd: v[2] / base_mva,
            qd: v[3] / base_mva,
            gs: v[4] / base_mva,
            bs: v[5] / base_mva,
            vmin,
            vmax,
        });
    }
    let bus_of = |ln: usize, id: f64| -> Result<usize> {
        index.get(&(id as usize)).copied().ok_or_else(|| Error::parse(ln, format!("unknown bus {id}")))
    };

    if cost_m.rows.len() < gen_m.rows.len() {
        return Err(Error::Invalid(format!("mpc.gencost has {} rows for {} generators", cost_m.rows.len(), gen_m.rows.len())));
    }
    let mut gens = Vec::new();
    for (row, crow) in gen_m.rows.iter().zip(&cost_m.rows) {
        need(row, 10, "gen")?;
        need(crow, 4, "gencost")?;
        let v = &row.1;
        if v[7] <= 0.0 {
            continue;
        }
        let c = &crow.1;
        if c[0] as i64 != 2 {
            return Err(Error::Unsupported(format!("line {}: only polynomial costs (model 2) are supported", crow.0)));
        }
        let nc = c[3] as usize;
        if nc > 3 {
            return Err(Error::Unsupported(format!("line {}: cost polynomial of degree {}", crow.0, nc - 1)));
        }
        if c.len() < 4 + nc {
            return Err(Error::parse(crow.0, "gencost row shorter than its coefficient count"));
        }
        let mut cost = [0.0; 3];
        for k in 0..nc {
            cost[3 - nc + k] = c[4 + k];
        }
        if cost[0] < 0.0 {
            return Err(Error::parse(crow.0, "negative quadratic cost coefficient"));
        }
        gens.push(Generator {
            bus: bus_of(row.0, v[0])?,
            pmin: v[9] / base_mva,
            pmax: v[8] / base_mva,
            qmin: v[4] / base_mva,
            qmax: v[3] / base_mva,
            cost: [cost[0] * base_mva * base_mva, cost[1] * base_mva, cost[2]],
        });
    }

    let mut branches = Vec::new();
    for row in &br_m.rows {
        need(row, 11, "branch")?;
        let v = &row.1;
        if v[10] <= 0.0 {
            continue;
        }
        let angle = if v.len() >= 13 {
            let (lo, hi) = (v[11], v[12]);
            let lo_set = lo > -360.0 && !(lo == 0.0 && hi == 0.0);
            let hi_set = hi < 360.0 && !(lo == 0.0 && hi == 0.0);
            match (lo_set, hi_set) {
                (true, true) => Some((lo.to_radians(), hi.to_radians())),
                (true, false) => Some((lo.to_radians(), -lo.to_radians())),
                (false, true) => Some((-hi.to_radians(), hi.to_radians())),
                (false, false) => None,
            }
        } else {
            None
        };
        branches.push(Branch {
            from: bus_of(row.0, v[0])?,
            to: bus_of(row.0, v[1])?,
            r: v[2],
            x: v[3],
            b: v[4],
            rate: v[5] / base_mva,
            tap: if v[8] == 0.0 { 1.0 } else { v[8] },
            shift: v[9].to_radians(),
            angle,
        });
    }
    Ok(PowerCase { name, base_mva, buses, gens, branches })
}

/// Writes a case in MATPOWER syntax (inverse of [`parse_matpower`] on the
/// supported fields).
pub fn to_matpower(pc: &PowerCase) -> String {
    let b = pc.base_mva;
    let mut s = String::new();
    let name = if pc.name.is_empty() { "case" } else { &pc.name };
    let _ = writeln!(s, "function mpc = {name}\nmpc.version = '2';\nmpc.baseMVA = {b};\n\nmpc.bus = [");
    for bus in &pc.buses {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t1\t0\t0\t1\t{}\t{};",
            bus.id,
            bus.kind,
            bus.pd * b,
            bus.qd * b,
            bus.gs * b,
            bus.bs * b,
            bus.vmax,
            bus.vmin
        );
    }
    s.push_str("];\n\nmpc.gen = [\n");
    for g in &pc.gens {
        let _ = writeln!(
            s,
            "\t{}\t0\t0\t{}\t{}\t1\t{b}\t1\t{}\t{};",
            pc.buses[g.bus].id,
            g.qmax * b,
            g.qmin * b,
            g.pmax * b,
            g.pmin * b
        );
    }
    s.push_str("];\n\nmpc.gencost = [\n");
    for g in &pc.gens {
        let _ = writeln!(s, "\t2\t0\t0\t3\t{}\t{}\t{};", g.cost[0] / (b * b), g.cost[1] / b, g.cost[2]);
    }
    s.push_str("];\n\nmpc.branch = [\n");
    for br in &pc.branches {
        let (lo, hi) = br.angle.map_or((-360.0, 360.0), |(l, h)| (l.to_degrees(), h.to_degrees()));
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{}\t{}\t1\t{lo}\t{hi};",
            pc.buses[br.from].id,
            pc.buses[br.to].id,
            br.r,
            br.x,
            br.b,
            br.rate * b,
            br.tap,
            br.shift.to_degrees()
        );
    }
    s.push_str("];\n");
    s
}
