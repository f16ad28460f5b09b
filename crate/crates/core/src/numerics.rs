//! Dense Hermitian linear algebra shared by the rest of the crate.
//!
//! A Hermitian matrix `Y = W + iT` is stored as its real symmetric part `W`
//! and real skew-symmetric part `T`. Every cut and branching formula reads
//! `W_ij` and `T_ij` separately, so the split form is the working form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance (scaled by `1 + trace`) below which an eigenvalue or a
/// 2×2 minor counts as zero.
pub const ZERO_EIG_RTOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Invalid(format!(
                "complex vector parts differ in length ({} vs {})",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        Self { re: vec![0.0; n], im: vec![0.0; n] }
    }

    pub fn real(re: Vec<f64>) -> Self {
        let n = re.len();
        Self { re, im: vec![0.0; n] }
    }

    pub fn from_complex(v: &[Complex64]) -> Self {
        Self { re: v.iter().map(|z| z.re).collect(), im: v.iter().map(|z| z.im).collect() }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn set(&mut self, i: usize, z: Complex64) {
        self.re[i] = z.re;
        self.im[i] = z.im;
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.re.iter().chain(self.im.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Multiplies every entry by the unit phase `e^{iθ}`.
    pub fn rotate(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self::from_complex(&self.to_complex().iter().map(|z| z * r).collect::<Vec<_>>())
    }

    /// Stacks `[re; im]` into a real vector of length `2n`.
    pub fn stacked(&self) -> Vec<f64> {
        self.re.iter().chain(self.im.iter()).copied().collect()
    }

    pub fn from_stacked(r: &[f64]) -> Self {
        let n = r.len() / 2;
        Self { re: r[..n].to_vec(), im: r[n..].to_vec() }
    }
}

/// Hermitian matrix `W + iT`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    pub w: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl HermitianMatrix {
    /// Validates symmetry of `w` and skew-symmetry of `t` (to `1e-12` relative).
    pub fn new(w: DMatrix<f64>, t: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n || t.nrows() != n || t.ncols() != n {
            return Err(Error::Invalid("hermitian parts must be square and equal-sized".into()));
        }
        let scale = 1.0 + w.amax().max(t.amax());
        for i in 0..n {
            if t[(i, i)].abs() > 1e-12 * scale {
                return Err(Error::Invalid(format!("T[{i}][{i}] must be zero")));
            }
            for j in 0..i {
                if (w[(i, j)] - w[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Invalid(format!("W not symmetric at ({i},{j})")));
                }
                if (t[(i, j)] + t[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Invalid(format!("T not skew-symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { w, t })
    }

    /// Projects arbitrary real/imaginary parts onto the Hermitian matrices,
    /// i.e. returns `(Q + Q*)/2`.
    pub fn symmetrized(w: &DMatrix<f64>, t: &DMatrix<f64>) -> Self {
        Self { w: (w + w.transpose()) * 0.5, t: (t - t.transpose()) * 0.5 }
    }

    pub fn zeros(n: usize) -> Self {
        Self { w: DMatrix::zeros(n, n), t: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { w: DMatrix::identity(n, n), t: DMatrix::zeros(n, n) }
    }

    pub fn real(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        Self::new(w, DMatrix::zeros(n, n))
    }

    /// Rank-one matrix `xx*`.
    pub fn outer(x: &ComplexVector) -> Self {
        let n = x.len();
        let mut h = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let z = x.get(i) * x.get(j).conj();
                h.w[(i, j)] = z.re;
                h.t[(i, j)] = z.im;
            }
        }
        h
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        let w = m.map(|z| z.re);
        let t = m.map(|z| z.im);
        Self::symmetrized(&w, &t)
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.w[(i, j)], self.t[(i, j)])
    }

    /// Sets entry `(i, j)` and its conjugate mirror.
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.w[(i, j)] = z.re;
        self.w[(j, i)] = z.re;
        if i == j {
            self.t[(i, i)] = 0.0;
        } else {
            self.t[(i, j)] = z.im;
            self.t[(j, i)] = -z.im;
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        self.w.trace()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        Self {
            w: DMatrix::from_fn(k, k, |a, b| self.w[(idx[a], idx[b])]),
            t: DMatrix::from_fn(k, k, |a, b| self.t[(idx[a], idx[b])]),
        }
    }

    /// `x* H x` (always real for Hermitian `H`).
    pub fn quad(&self, x: &ComplexVector) -> f64 {
        let r = DVector::from_vec(x.stacked());
        let e = real_embedding(self);
        r.dot(&(&e * &r))
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        let n = self.dim();
        let mut out = ComplexVector::zeros(n);
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.get(i, j) * x.get(j);
            }
            out.set(i, acc);
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        (self.w.norm_squared() + self.t.norm_squared()).sqrt()
    }
}

/// Smallest eigenvalue of `[[Wii, Wij + iTij], [Wij − iTij, Wjj]]`.
pub fn min_eigenvalue_2x2(wii: f64, wjj: f64, wij: f64, tij: f64) -> f64 {
    let d = wii - wjj;
    0.5 * (wii + wjj - (d * d + 4.0 * wij * wij + 4.0 * tij * tij).sqrt())
}

/// Real symmetric embedding `[[W, −T], [T, W]]`; it is PSD iff `H` is, and
/// carries each eigenvalue of `H` twice.
pub fn real_embedding(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.dim();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    e.view_mut((0, 0), (n, n)).copy_from(&h.w);
    e.view_mut((n, n), (n, n)).copy_from(&h.w);
    e.view_mut((0, n), (n, n)).copy_from(&(-&h.t));
    e.view_mut((n, 0), (n, n)).copy_from(&h.t);
    e
}

/// Eigenvalues of `H` in descending order, deduplicated from the doubled
/// spectrum of the real embedding.
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(real_embedding(h));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.into_iter().step_by(2).collect()
}

pub fn min_eigenvalue(h: &HermitianMatrix) -> f64 {
    hermitian_eigenvalues(h).last().copied().unwrap_or(0.0)
}

/// Largest eigenvalue of `H` and a unit eigenvector (unique up to phase when
/// the eigenvalue is simple).
pub fn principal_eigvec(h: &HermitianMatrix) -> Result<(f64, ComplexVector)> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    let e = real_embedding(h);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let eig = SymmetricEigen::try_new(e, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let (k, lam) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    let col = eig.eigenvectors.column(k);
    let mut v = ComplexVector::new(col.rows(0, n).iter().copied().collect(), col.rows(n, n).iter().copied().collect())?;
    let nv = v.norm();
    v.re.iter_mut().chain(v.im.iter_mut()).for_each(|x| *x /= nv);

    let hv = h.mul_vec(&v);
    let resid = (0..n).map(|i| (hv.get(i) - v.get(i) * lam).norm_sqr()).sum::<f64>().sqrt();
    if resid > 1e-8 * h.frobenius().max(1e-300) {
        return Err(Error::Numerical(format!("eigenvector residual {resid:.3e}")));
    }
    Ok((lam, v))
}

/// PSD test via Cholesky of `A + tol·I`.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    let n = a.nrows();
    nalgebra::Cholesky::new(a + DMatrix::identity(n, n) * tol).is_some()
}

/// Rotates `v` so that entry `k` becomes real and nonnegative.
pub fn fix_phase(v: &ComplexVector, k: usize) -> ComplexVector {
    let z = v.get(k);
    if z.norm() == 0.0 {
        return v.clone();
    }
    v.rotate(-z.arg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn char_poly_min_root(a: f64, d: f64, b: Complex64) -> f64 {
        // λ² − (a+d)λ + (ad − |b|²) = 0
        let tr = a + d;
        let det = a * d - b.norm_sqr();
        0.5 * (tr - (tr * tr - 4.0 * det).sqrt())
    }

    #[test]
    fn min_eig_2x2_examples() {
        assert_abs_diff_eq!(min_eigenvalue_2x2(1.0, 1.0, 1.0, 0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(min_eigenvalue_2x2(1.0, 1.0, 0.0, 0.0), 1.0, epsilon = 1e-15);
        // [[1, 1−i], [1+i, 4]]: Y_12 = W_12 + iT_12 = 1 − i.
        let expected = 0.5 * (5.0 - 17f64.sqrt());
        assert_abs_diff_eq!(char_poly_min_root(1.0, 4.0, Complex64::new(1.0, -1.0)), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(min_eigenvalue_2x2(1.0, 4.0, 1.0, -1.0), expected, epsilon = 1e-14);
        let mut h = HermitianMatrix::zeros(2);
        h.set(0, 0, Complex64::new(1.0, 0.0));
        h.set(1, 1, Complex64::new(4.0, 0.0));
        h.set(0, 1, Complex64::new(1.0, -1.0));
        assert_abs_diff_eq!(min_eigenvalue(&h), expected, epsilon = 1e-12);
    }

    #[test]
    fn embedding_examples() {
        let e = real_embedding(&HermitianMatrix::identity(2));
        assert_eq!(e, DMatrix::identity(4, 4));

        let w = DMatrix::identity(2, 2);
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let h = HermitianMatrix::new(w, t).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(real_embedding(&h)).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 0.0, 2.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian_parts() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(HermitianMatrix::new(w, DMatrix::zeros(2, 2)).is_err());
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(HermitianMatrix::new(DMatrix::identity(2, 2), t).is_err());
    }

    #[test]
    fn principal_eigvec_examples() {
        let mut h = HermitianMatrix::zeros(2);
        h.set(0, 0, Complex64::new(3.0, 0.0));
        h.set(1, 1, Complex64::new(1.0, 0.0));
        let (lam, v) = principal_eigvec(&h).unwrap();
        assert_abs_diff_eq!(lam, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.get(0).norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.get(1).norm(), 0.0, epsilon = 1e-12);

        let x = ComplexVector::new(vec![1.0, -2.0, 0.5], vec![0.3, 1.0, -1.5]).unwrap();
        let (lam, v) = principal_eigvec(&HermitianMatrix::outer(&x)).unwrap();
        let nx = x.norm();
        assert_abs_diff_eq!(lam, nx * nx, epsilon = 1e-10);
        let a = fix_phase(&v, 0);
        let b = fix_phase(&x, 0);
        for i in 0..3 {
            assert_abs_diff_eq!((a.get(i) - b.get(i) / nx).norm(), 0.0, epsilon = 1e-10);
        }
    }

    fn hermitian_strategy(n: usize) -> impl Strategy<Value = HermitianMatrix> {
        proptest::collection::vec(-5.0f64..5.0, 2 * n * n).prop_map(move |v| {
            let w = DMatrix::from_column_slice(n, n, &v[..n * n]);
            let t = DMatrix::from_column_slice(n, n, &v[n * n..]);
            HermitianMatrix::symmetrized(&w, &t)
        })
    }

    /// Dense complex oracle: the eigenvalues of `H` are the roots of the
    /// characteristic polynomial; for 4×4 we compare the Rayleigh quotient of
    /// the returned vector and the trace/Frobenius identities instead.
    #[test]
    fn principal_matches_dense_oracle_4x4() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let w = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let t = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let h = HermitianMatrix::symmetrized(&w, &t);
            let eigs = hermitian_eigenvalues(&h);
            assert_eq!(eigs.len(), 4);
            assert_abs_diff_eq!(eigs.iter().sum::<f64>(), h.trace(), epsilon = 1e-10);
            let fro2: f64 = eigs.iter().map(|e| e * e).sum();
            assert_abs_diff_eq!(fro2, h.frobenius().powi(2), epsilon = 1e-9);
            let (lam, v) = principal_eigvec(&h).unwrap();
            assert_abs_diff_eq!(lam, eigs[0], epsilon = 1e-8);
            assert_abs_diff_eq!(h.quad(&v), lam, epsilon = 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn min_eig_2x2_matches_general(h in hermitian_strategy(2)) {
            let fast = min_eigenvalue_2x2(h.w[(0, 0)], h.w[(1, 1)], h.w[(0, 1)], h.t[(0, 1)]);
            prop_assert!((fast - min_eigenvalue(&h)).abs() <= 1e-10 * (1.0 + h.frobenius()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn embedding_preserves_min_eig_and_psd(h in hermitian_strategy(4)) {
            let e = real_embedding(&h);
            let lmin_e = SymmetricEigen::new(e.clone()).eigenvalues.min();
            prop_assert!((lmin_e - min_eigenvalue(&h)).abs() <= 1e-10 * (1.0 + h.frobenius()));

            // Shift to a clearly PSD / clearly indefinite matrix and compare
            // the complex spectrum with Cholesky on the embedding.
            for shift in [-lmin_e + 0.5, -lmin_e - 0.5] {
                let mut hs = h.clone();
                for i in 0..4 { hs.w[(i, i)] += shift; }
                let c = hs.to_complex();
                let complex_ok = c.symmetric_eigenvalues().min() >= 0.0;
                prop_assert_eq!(complex_ok, is_psd(&real_embedding(&hs), 0.0));
            }
        }
    }
}
