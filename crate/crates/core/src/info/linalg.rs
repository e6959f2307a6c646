//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{DibError, Result};

/// Eigenvalue tolerance for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

/// Symmetry tolerance for covariance inputs.
pub const SYM_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    m.is_square() && max_asymmetry(m) <= SYM_TOL * (1.0 + m.amax()) && min_eigenvalue(m) >= -PSD_TOL
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn map_eigenvalues(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
}

/// Principal square root of a PSD matrix (small negative eigenvalues clipped).
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    map_eigenvalues(m, |v| v.max(0.0).sqrt())
}

/// Inverse via Cholesky; fails unless `m` is numerically positive definite.
pub fn inverse_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m).cholesky().ok_or_else(|| {
        DibError::Numerical(format!(
            "{what} is not positive definite (min eigenvalue {:.3e})",
            min_eigenvalue(m)
        ))
    })?;
    Ok(symmetrize(&chol.inverse()))
}

/// `ln|m|` via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = symmetrize(m).cholesky().ok_or_else(|| {
        DibError::Numerical(format!(
            "{what} is not positive definite (min eigenvalue {:.3e})",
            min_eigenvalue(m)
        ))
    })?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `ln|m|` of a symmetric PSD matrix; `-inf` when singular.
pub fn logdet_psd(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if let Some(chol) = symmetrize(m).cholesky() {
        let v: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if v.is_finite() {
            return v;
        }
    }
    let vals = eigenvalues(m);
    if vals.iter().any(|&v| v <= 0.0) {
        return f64::NEG_INFINITY;
    }
    vals.iter().map(|v| v.ln()).sum()
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Serde adapters writing matrices as arrays of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
            let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
            all.iter()
                .map(|rows| from_rows(rows).ok_or_else(|| D::Error::custom("ragged matrix rows")))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_and_inverse_agree() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let ld = logdet_spd(&m, "m").unwrap();
        assert!((ld - (2.0f64 - 0.25).ln()).abs() < 1e-14);
        let inv = inverse_spd(&m, "m").unwrap();
        assert!((&m * inv - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert_eq!(logdet_psd(&DMatrix::zeros(2, 2)), f64::NEG_INFINITY);
        assert!(inverse_spd(&DMatrix::zeros(2, 2), "zero").is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sqrt_psd(&m);
        assert!((&r * &r - m).amax() < 1e-13);
    }

    #[test]
    fn block_helpers() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::identity(2, 2);
        let d = block_diag(&[a.clone(), b.clone()]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);
        let v = vstack(&[DMatrix::from_element(1, 2, 1.0), b]);
        assert_eq!(v.shape(), (3, 2));
    }
}
