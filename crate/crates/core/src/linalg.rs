//! Small dense complex vectors and matrices.
//!
//! Everything here is sized for the two- and four-dimensional systems the
//! experiments use, but no routine assumes a particular dimension. Matrices
//! are stored row-major with an explicit dimension.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Index, IndexMut, Mul, Neg};
use std::sync::LazyLock;

use num_complex::Complex64;
use thiserror::Error;

/// Maximum entry of `U†U - I` accepted for a unitary.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Maximum off-diagonal magnitude accepted in `U†AU`.
pub const DIAGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix data of length {len} is not square")]
    NotSquare { len: usize },
    #[error("matrix is not unitary (max |U†U - I| = {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max |A - A†| = {0:e})")]
    NotHermitian(f64),
    #[error("U†AU is not diagonal (max off-diagonal = {0:e})")]
    NotDiagonalized(f64),
    #[error("non-finite entry")]
    NonFinite,
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Complex column vector.
#[derive(Clone, PartialEq, Default)]
pub struct CVec(Vec<Complex64>);

impl CVec {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// Basis vector `|index⟩` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = c(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Returns `self / ‖self‖`; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scale(1.0 / n)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.iter().map(|z| z * k).collect())
    }

    /// `k * self + other`.
    pub fn axpy(&self, k: f64, other: &CVec) -> Result<CVec, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(x, y)| x * k + y).collect()))
    }

    /// Kronecker product of two vectors.
    pub fn kron(&self, other: &CVec) -> CVec {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for x in &self.0 {
            for y in &other.0 {
                out.push(x * y);
            }
        }
        Self(out)
    }
}

impl Index<usize> for CVec {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl From<Vec<Complex64>> for CVec {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn from_rows(rows: &[&[Complex64]]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::NotSquare { len: dim * row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != dim * dim {
            return Err(LinalgError::NotSquare { len: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Real matrix from row-major entries, optionally scaled.
    pub fn from_real(dim: usize, entries: &[f64], scale: f64) -> Result<Self, LinalgError> {
        Self::from_vec(dim, entries.iter().map(|&x| c(x * scale, 0.0)).collect())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for (i, &v) in values.iter().enumerate() {
            data[i * dim + i] = c(v, 0.0);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    /// Column `col` as a vector.
    pub fn column(&self, col: usize) -> CVec {
        CVec((0..self.dim).map(|r| self.get(r, col)).collect())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for col in 0..n {
                data.push(self.get(col, r).conj());
            }
        }
        Self { dim: n, data }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(CMat { dim: n, data })
    }

    pub fn mul_vec(&self, v: &CVec) -> Result<CVec, LinalgError> {
        let mut out = CVec::zeros(self.dim);
        self.mul_vec_into(v.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// `out = U v` without allocating.
    pub fn mul_vec_into(&self, v: &[Complex64], out: &mut [Complex64]) -> Result<(), LinalgError> {
        self.check_len(v.len(), out.len())?;
        let n = self.dim;
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.data[r * n..(r + 1) * n].iter().zip(v).map(|(m, x)| m * x).sum();
        }
        Ok(())
    }

    /// `U† v`, the change of basis applied before threshold detection.
    pub fn adjoint_mul_vec(&self, v: &CVec) -> Result<CVec, LinalgError> {
        let mut out = CVec::zeros(self.dim);
        self.adjoint_mul_vec_into(v.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    pub fn adjoint_mul_vec_into(&self, v: &[Complex64], out: &mut [Complex64]) -> Result<(), LinalgError> {
        self.check_len(v.len(), out.len())?;
        let n = self.dim;
        for (col, o) in out.iter_mut().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (r, x) in v.iter().enumerate() {
                acc += self.data[r * n + col].conj() * x;
            }
            *o = acc;
        }
        Ok(())
    }

    fn check_len(&self, input: usize, output: usize) -> Result<(), LinalgError> {
        if input != self.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, input));
        }
        if output != self.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, output));
        }
        Ok(())
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &CMat) -> Result<f64, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest entry magnitude of `U†U - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("adjoint has the same dimension");
        gram.max_abs_diff(&CMat::identity(self.dim)).expect("same dimension")
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint()).expect("same dimension")
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale(c(-1.0, 0.0))
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = self.data.chunks(self.dim).collect();
        f.debug_struct("CMat")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    let (n, m) = (a.dim, b.dim);
    let dim = n * m;
    let mut data = vec![c(0.0, 0.0); dim * dim];
    for i in 0..n {
        for j in 0..n {
            let aij = a.get(i, j);
            for k in 0..m {
                for l in 0..m {
                    data[(i * m + k) * dim + (j * m + l)] = aij * b.get(k, l);
                }
            }
        }
    }
    CMat { dim, data }
}

/// Checks that `u` diagonalizes the Hermitian `a` and returns the diagonal of
/// `U†AU` in the column order of `u`.
pub fn verify_diagonalization(u: &CMat, a: &CMat) -> Result<Vec<f64>, LinalgError> {
    if u.dim() != a.dim() {
        return Err(LinalgError::DimensionMismatch(u.dim(), a.dim()));
    }
    let residual = u.unitarity_residual();
    if residual > UNITARITY_TOL {
        return Err(LinalgError::NotUnitary(residual));
    }
    let herm = a.hermiticity_residual();
    if herm > DIAGONAL_TOL {
        return Err(LinalgError::NotHermitian(herm));
    }
    let d = &(&u.adjoint() * a) * u;
    let n = d.dim();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(d.get(i, j).norm());
            }
        }
    }
    if off > DIAGONAL_TOL {
        return Err(LinalgError::NotDiagonalized(off));
    }
    Ok(d.diagonal().iter().map(|z| snap_eigenvalue(z.re)).collect())
}

/// Rounds an eigenvalue to the nearest integer when it lies within
/// rounding noise of it, so that equal eigenvalues compare equal.
fn snap_eigenvalue(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= DIAGONAL_TOL {
        r
    } else {
        x
    }
}

/// An observable given by its diagonalizing unitary and the eigenvalue
/// attached to each column.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSpec {
    unitary: CMat,
    eigenvalues: Vec<f64>,
}

impl ObservableSpec {
    pub fn new(unitary: CMat, eigenvalues: Vec<f64>) -> Result<Self, LinalgError> {
        if eigenvalues.len() != unitary.dim() {
            return Err(LinalgError::DimensionMismatch(unitary.dim(), eigenvalues.len()));
        }
        let residual = unitary.unitarity_residual();
        if residual > UNITARITY_TOL {
            return Err(LinalgError::NotUnitary(residual));
        }
        Ok(Self { unitary, eigenvalues })
    }

    /// Builds the observable from an operator and a unitary that diagonalizes it.
    pub fn from_operator(unitary: CMat, operator: &CMat) -> Result<Self, LinalgError> {
        let eigenvalues = verify_diagonalization(&unitary, operator)?;
        Ok(Self { unitary, eigenvalues })
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }
}

/// The fixed matrices used throughout the experiments.
#[derive(Debug, Clone)]
pub struct StandardUnitaries {
    pub i: CMat,
    pub x: CMat,
    pub y: CMat,
    pub z: CMat,
    /// Hadamard; diagonalizes X.
    pub h: CMat,
    /// Diagonalizes Y.
    pub v: CMat,
    pub w_plus: CMat,
    pub w_minus: CMat,
    /// `B₊ = -(X + Z)/√2`
    pub b_plus: CMat,
    /// `B₋ = (X - Z)/√2`
    pub b_minus: CMat,
    pub u_r1: CMat,
    pub u_r2: CMat,
    pub u_r3: CMat,
    pub u_c1: CMat,
    pub u_c2: CMat,
    pub u_c3: CMat,
}

static STANDARD: LazyLock<StandardUnitaries> = LazyLock::new(build_standard);

/// Shared instance of the named matrices.
pub fn standard_unitaries() -> &'static StandardUnitaries {
    &STANDARD
}

fn w_matrix(sign: f64) -> CMat {
    let r2 = 2f64.sqrt();
    let r8 = 8f64.sqrt();
    let d_same = (4.0 + sign * r8).sqrt();
    let d_other = (4.0 - sign * r8).sqrt();
    CMat::from_real(
        2,
        &[
            (r2 + sign) / d_same,
            -(r2 - sign) / d_other,
            1.0 / d_same,
            1.0 / d_other,
        ],
        1.0,
    )
    .expect("2x2")
}

fn build_standard() -> StandardUnitaries {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let im = c(0.0, 1.0);
    let h = FRAC_1_SQRT_2;

    let i = CMat::identity(2);
    let x = CMat::from_rows(&[&[o, one], &[one, o]]).unwrap();
    let y = CMat::from_rows(&[&[o, -im], &[im, o]]).unwrap();
    let z = CMat::diag(&[1.0, -1.0]);
    let hadamard = CMat::from_real(2, &[1.0, 1.0, 1.0, -1.0], h).unwrap();
    let v = CMat::from_rows(&[&[one * h, one * h], &[im * h, -im * h]]).unwrap();

    let x_plus_z = CMat::from_real(2, &[1.0, 1.0, 1.0, -1.0], 1.0).unwrap();
    let x_minus_z = CMat::from_real(2, &[-1.0, 1.0, 1.0, 1.0], 1.0).unwrap();
    let b_plus = x_plus_z.scale(c(-h, 0.0));
    let b_minus = x_minus_z.scale(c(h, 0.0));

    let u_r3 = CMat::from_rows(&[
        &[one, o, one, o],
        &[o, -im, o, -im],
        &[o, -one, o, one],
        &[im, o, -im, o],
    ])
    .unwrap()
    .scale(c(h, 0.0));
    let u_c3 = CMat::from_real(
        4,
        &[
            1.0, 0.0, 1.0, 0.0, //
            0.0, -1.0, 0.0, -1.0, //
            0.0, -1.0, 0.0, 1.0, //
            1.0, 0.0, -1.0, 0.0,
        ],
        h,
    )
    .unwrap();

    StandardUnitaries {
        u_r1: tensor(&hadamard, &hadamard),
        u_r2: tensor(&v, &v),
        u_r3,
        u_c1: tensor(&hadamard, &v),
        u_c2: tensor(&v, &hadamard),
        u_c3,
        w_plus: w_matrix(1.0),
        w_minus: w_matrix(-1.0),
        b_plus,
        b_minus,
        i,
        x,
        y,
        z,
        h: hadamard,
        v,
    }
}

impl StandardUnitaries {
    /// Lookup by the conventional name (`"H"`, `"W+"`, `"U_C3"`, ...).
    pub fn by_name(&self, name: &str) -> Option<&CMat> {
        Some(match name {
            "I" => &self.i,
            "X" => &self.x,
            "Y" => &self.y,
            "Z" => &self.z,
            "H" => &self.h,
            "V" => &self.v,
            "W+" => &self.w_plus,
            "W-" => &self.w_minus,
            "B+" => &self.b_plus,
            "B-" => &self.b_minus,
            "U_R1" => &self.u_r1,
            "U_R2" => &self.u_r2,
            "U_R3" => &self.u_r3,
            "U_C1" => &self.u_c1,
            "U_C2" => &self.u_c2,
            "U_C3" => &self.u_c3,
            _ => return None,
        })
    }

    pub const UNITARY_NAMES: [&'static str; 14] = [
        "I", "X", "Y", "Z", "H", "V", "W+", "W-", "U_R1", "U_R2", "U_R3", "U_C1", "U_C2", "U_C3",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn su() -> &'static StandardUnitaries {
        standard_unitaries()
    }

    #[test]
    fn identity_tensor_identity() {
        let i4 = tensor(&CMat::identity(2), &CMat::identity(2));
        assert_eq!(i4, CMat::identity(4));
    }

    #[test]
    fn tensor_dims_multiply() {
        let t = tensor(&CMat::identity(2), &tensor(&su().x, &su().z));
        assert_eq!(t.dim(), 8);
    }

    #[test]
    fn u_r1_is_h_tensor_h() {
        let s = su();
        let expect = CMat::from_real(
            4,
            &[
                1.0, 1.0, 1.0, 1.0, //
                1.0, -1.0, 1.0, -1.0, //
                1.0, 1.0, -1.0, -1.0, //
                1.0, -1.0, -1.0, 1.0,
            ],
            0.5,
        )
        .unwrap();
        assert!(s.u_r1.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn hadamard_on_basis_state() {
        let out = su().h.mul_vec(&CVec::basis(2, 0)).unwrap();
        assert_abs_diff_eq!(out[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(out[0].im, 0.0);
    }

    #[test]
    fn all_named_unitaries_are_unitary() {
        let s = su();
        for name in StandardUnitaries::UNITARY_NAMES {
            let u = s.by_name(name).unwrap();
            assert!(
                u.unitarity_residual() <= UNITARITY_TOL,
                "{name}: {}",
                u.unitarity_residual()
            );
        }
    }

    #[test]
    fn w_plus_diagonalizes_b_plus() {
        let s = su();
        let eig = verify_diagonalization(&s.w_plus, &s.b_plus).unwrap();
        assert_abs_diff_eq!(eig[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn w_minus_diagonalizes_b_minus_with_reversed_signs() {
        let s = su();
        let eig = verify_diagonalization(&s.w_minus, &s.b_minus).unwrap();
        assert_abs_diff_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], -1.0, epsilon = 1e-12);
    }

    fn assert_signs(eig: &[f64], expect: &[f64]) {
        assert_eq!(eig.len(), expect.len());
        for (a, b) in eig.iter().zip(expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn z_already_diagonal() {
        let eig = verify_diagonalization(&CMat::identity(2), &su().z).unwrap();
        assert_signs(&eig, &[1.0, -1.0]);
    }

    #[test]
    fn row3_column3_sign_patterns() {
        let s = su();
        let xy = tensor(&s.x, &s.y);
        let yx = tensor(&s.y, &s.x);
        let zz = tensor(&s.z, &s.z);
        let xx = tensor(&s.x, &s.x);
        let yy = tensor(&s.y, &s.y);
        assert_signs(&verify_diagonalization(&s.u_r3, &xy).unwrap(), &[1.0, 1.0, -1.0, -1.0]);
        assert_signs(&verify_diagonalization(&s.u_r3, &yx).unwrap(), &[1.0, -1.0, -1.0, 1.0]);
        assert_signs(&verify_diagonalization(&s.u_r3, &zz).unwrap(), &[1.0, -1.0, 1.0, -1.0]);
        assert_signs(&verify_diagonalization(&s.u_c3, &xx).unwrap(), &[1.0, 1.0, -1.0, -1.0]);
        assert_signs(&verify_diagonalization(&s.u_c3, &yy).unwrap(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_signs(&verify_diagonalization(&s.u_c3, &zz).unwrap(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn chsh_joint_sign_patterns() {
        let s = su();
        let i = &s.i;
        let ab = tensor(&s.z, &s.b_plus);
        let abp = tensor(&s.z, &s.b_minus);
        let apb = tensor(&s.x, &s.b_plus);
        let apbp = tensor(&s.x, &s.b_minus);
        let u1 = tensor(i, &s.w_plus);
        let u2 = tensor(i, &s.w_minus);
        let u3 = tensor(&s.h, &s.w_plus);
        let u4 = tensor(&s.h, &s.w_minus);
        assert_signs(&verify_diagonalization(&u1, &ab).unwrap(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_signs(&verify_diagonalization(&u2, &abp).unwrap(), &[1.0, -1.0, -1.0, 1.0]);
        assert_signs(&verify_diagonalization(&u3, &apb).unwrap(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_signs(&verify_diagonalization(&u4, &apbp).unwrap(), &[1.0, -1.0, -1.0, 1.0]);
        // Bob's local operators
        assert_signs(
            &verify_diagonalization(&u1, &tensor(i, &s.b_plus)).unwrap(),
            &[-1.0, 1.0, -1.0, 1.0],
        );
        assert_signs(
            &verify_diagonalization(&u2, &tensor(i, &s.b_minus)).unwrap(),
            &[1.0, -1.0, 1.0, -1.0],
        );
    }

    #[test]
    fn verify_rejects_non_unitary_and_non_diagonalizing() {
        let s = su();
        let not_unitary = CMat::diag(&[2.0, 1.0]);
        assert!(matches!(
            verify_diagonalization(&not_unitary, &s.z),
            Err(LinalgError::NotUnitary(_))
        ));
        assert!(matches!(
            verify_diagonalization(&CMat::identity(2), &s.x),
            Err(LinalgError::NotDiagonalized(_))
        ));
        assert!(matches!(
            verify_diagonalization(&CMat::identity(4), &s.x),
            Err(LinalgError::DimensionMismatch(4, 2))
        ));
    }

    #[test]
    fn pauli_algebra() {
        let s = su();
        let i2 = CMat::identity(2);
        for p in [&s.x, &s.y, &s.z] {
            assert!((p * p).max_abs_diff(&i2).unwrap() <= 1e-14);
        }
        let iz = s.z.scale(c(0.0, 1.0));
        assert!((&s.x * &s.y).max_abs_diff(&iz).unwrap() <= 1e-14);
    }

    #[test]
    fn magic_square_products() {
        let s = su();
        let t = |a: &CMat, b: &CMat| tensor(a, b);
        let (i, x, y, z) = (&s.i, &s.x, &s.y, &s.z);
        let square = [
            [t(x, i), t(i, x), t(x, x)],
            [t(i, y), t(y, i), t(y, y)],
            [t(x, y), t(y, x), t(z, z)],
        ];
        let id = CMat::identity(4);
        for row in &square {
            let p = &(&row[0] * &row[1]) * &row[2];
            assert!(p.max_abs_diff(&id).unwrap() < 1e-14);
        }
        #[allow(clippy::needless_range_loop)]
        for col in 0..3 {
            let p = &(&square[0][col] * &square[1][col]) * &square[2][col];
            let expect = if col == 2 { -&id } else { id.clone() };
            assert!(p.max_abs_diff(&expect).unwrap() < 1e-14, "column {col}");
        }
    }

    #[test]
    fn observable_spec_rejects_wrong_length() {
        assert!(ObservableSpec::new(CMat::identity(2), vec![1.0]).is_err());
        let spec = ObservableSpec::from_operator(su().h.clone(), &su().x).unwrap();
        assert_signs(spec.eigenvalues(), &[1.0, -1.0]);
    }

    #[test]
    fn adjoint_mul_matches_explicit_adjoint() {
        let s = su();
        let v = CVec::new(vec![c(0.3, -0.2), c(-0.1, 0.9), c(0.5, 0.5), c(0.0, -1.0)]);
        let a = s.u_c3.adjoint_mul_vec(&v).unwrap();
        let b = s.u_c3.adjoint().mul_vec(&v).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).norm() < 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cvec(dim: usize) -> impl Strategy<Value = CVec> {
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), dim)
                .prop_map(|v| CVec::new(v.into_iter().map(|(r, i)| c(r, i)).collect()))
        }

        proptest! {
            #[test]
            fn unitaries_preserve_norm(v2 in cvec(2), v4 in cvec(4)) {
                let s = standard_unitaries();
                for name in StandardUnitaries::UNITARY_NAMES {
                    let u = s.by_name(name).unwrap();
                    let v = if u.dim() == 2 { &v2 } else { &v4 };
                    let n0 = v.norm();
                    let n1 = u.mul_vec(v).unwrap().norm();
                    prop_assert!((n1 - n0).abs() <= 1e-12 * n0.max(1e-300));
                    let n2 = u.adjoint_mul_vec(v).unwrap().norm();
                    prop_assert!((n2 - n0).abs() <= 1e-12 * n0.max(1e-300));
                }
            }
        }
    }
}
