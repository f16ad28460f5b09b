//! Box-constrained QP: `min ½x'Qx + f'x` over `[0, 1]ⁿ`.
//!
//! Text format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! n
//! f_1 … f_n
//! Q_11 … Q_1n
//! …
//! Q_n1 … Q_nn
//! ```
//!
//! `Q` is symmetrized on load.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cuts::RelaxKind;
use crate::driver::Config;
use crate::model::{ComplexQcqp, QuadForm};
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpInstance {
    pub q: DMatrix<f64>,
    pub f: DVector<f64>,
}

impl BoxQpInstance {
    pub fn new(q: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != f.len() {
            return Err(Error::Invalid(format!("Q is {}×{}, f has {} entries", q.nrows(), q.ncols(), f.len())));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, f })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.q * &x)) + self.f.dot(&x)
    }

    /// Fraction of nonzero off-diagonal entries of `Q`.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let nz = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && self.q[(i, j)] != 0.0).count();
        nz as f64 / (n * (n - 1)) as f64
    }

    pub fn to_text(&self) -> String {
        let n = self.n();
        let row = |v: Vec<f64>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = format!("{n}\n{}\n", row(self.f.iter().copied().collect()));
        for i in 0..n {
            s.push_str(&row(self.q.row(i).iter().copied().collect()));
            s.push('\n');
        }
        s
    }
}

pub fn parse_boxqp(text: &str) -> Result<BoxQpInstance> {
    let mut toks = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for t in line.split_whitespace() {
            toks.push((ln + 1, t));
        }
    }
    let mut it = toks.into_iter();
    let (ln, t) = it.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let n: usize = t.parse().map_err(|_| Error::parse(ln, format!("bad dimension `{t}`")))?;
    if n == 0 {
        return Err(Error::parse(ln, "dimension must be positive"));
    }
    let mut last = ln;
    let mut num = |what: &str| -> Result<f64> {
        let (ln, t) = it.next().ok_or_else(|| Error::parse(last, format!("dimension mismatch: missing {what}")))?;
        last = ln;
        t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::parse(ln, format!("bad number `{t}`")))
    };
    let f = (0..n).map(|_| num("f entry")).collect::<Result<Vec<_>>>()?;
    let q = (0..n * n).map(|_| num("Q entry")).collect::<Result<Vec<_>>>()?;
    if let Some((ln, _)) = it.next() {
        return Err(Error::parse(ln, "dimension mismatch: trailing data"));
    }
    BoxQpInstance::new(DMatrix::from_row_slice(n, n, &q), DVector::from_vec(f))
}

/// Real instance with `q = Q/2` so that `x'qx + f'x` is the objective.
pub fn boxqp_to_model(b: &BoxQpInstance) -> ComplexQcqp {
    let n = b.n();
    let form = QuadForm {
        q: HermitianMatrix::real(&b.q * 0.5).expect("symmetric"),
        c: ComplexVector::real(b.f.iter().copied().collect()),
        b: 0.0,
    };
    ComplexQcqp::new(vec![form], ComplexVector::real(vec![0.0; n]), ComplexVector::real(vec![1.0; n]), true)
        .expect("valid box")
}

/// Solver defaults for BoxQP: RLT-strengthened relaxation, 0.01% gap.
pub fn default_config() -> Config {
    Config { relax: RelaxKind::SdpRlt, gap: 1e-4, ..Config::default() }
}

/// Random instance with integer entries in `[−50, 50]`; off-diagonal
/// entries are nonzero with probability `density`.
pub fn random_instance(n: usize, density: f64, seed: u64) -> BoxQpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = rng.gen_range(-50i32..=50) as f64;
        for j in (i + 1)..n {
            if rng.gen_bool(density.clamp(0.0, 1.0)) {
                let v = rng.gen_range(-50i32..=50) as f64;
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
    }
    let f = DVector::from_fn(n, |_, _| rng.gen_range(-50i32..=50) as f64);
    BoxQpInstance { q, f }
}
