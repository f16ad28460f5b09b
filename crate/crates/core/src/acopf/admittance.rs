//! Bus and branch admittances of the standard π branch model.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matpower::PowerCase;
use crate::{Error, Result};

/// Per-branch 2×2 admittance block: `I_f = yff V_f + yft V_t`,
/// `I_t = ytf V_f + ytt V_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admittances {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub gf: DMatrix<f64>,
    pub bf: DMatrix<f64>,
    pub gt: DMatrix<f64>,
    pub bt: DMatrix<f64>,
    pub cf: DMatrix<f64>,
    pub ct: DMatrix<f64>,
    pub branches: Vec<BranchAdmittance>,
}

impl Admittances {
    pub fn ybus(&self) -> DMatrix<Complex64> {
        self.g.zip_map(&self.b, Complex64::new)
    }
}

pub fn branch_admittance(pc: &PowerCase, k: usize) -> Result<BranchAdmittance> {
    let br = &pc.branches[k];
    let z = Complex64::new(br.r, br.x);
    if z.norm() == 0.0 {
        return Err(Error::Invalid(format!("branch {k} ({} → {}) has zero impedance", br.from, br.to)));
    }
    let ys = z.inv();
    let tap = Complex64::from_polar(br.tap, br.shift);
    let ytt = ys + Complex64::new(0.0, br.b / 2.0);
    Ok(BranchAdmittance {
        from: br.from,
        to: br.to,
        yff: ytt / (br.tap * br.tap),
        yft: -ys / tap.conj(),
        ytf: -ys / tap,
        ytt,
    })
}

pub fn build_admittances(pc: &PowerCase) -> Result<Admittances> {
    let n = pc.num_buses();
    let k = pc.branches.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut yf = DMatrix::from_element(k, n, Complex64::new(0.0, 0.0));
    let mut yt = yf.clone();
    let mut cf = DMatrix::zeros(k, n);
    let mut ct = DMatrix::zeros(k, n);
    let mut branches = Vec::with_capacity(k);
    for r in 0..k {
        let a = branch_admittance(pc, r)?;
        let (f, t) = (a.from, a.to);
        y[(f, f)] += a.yff;
        y[(f, t)] += a.yft;
        y[(t, f)] += a.ytf;
        y[(t, t)] += a.ytt;
        yf[(r, f)] += a.yff;
        yf[(r, t)] += a.yft;
        yt[(r, f)] += a.ytf;
        yt[(r, t)] += a.ytt;
        cf[(r, f)] = 1.0;
        ct[(r, t)] = 1.0;
        branches.push(a);
    }
    for (i, bus) in pc.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.gs, bus.bs);
    }
    Ok(Admittances {
        g: y.map(|z| z.re),
        b: y.map(|z| z.im),
        gf: yf.map(|z| z.re),
        bf: yf.map(|z| z.im),
        gt: yt.map(|z| z.re),
        bt: yt.map(|z| z.im),
        cf,
        ct,
        branches,
    })
}
