//! Dense symmetric-positive-definite layer.
//!
//! Every covariance and information matrix in the crate travels as an
//! [`SpdMatrix`]: a symmetrized matrix together with the `L D Lᵀ`
//! factorization that certified it. All "inverse times something" products
//! are factor-solves against that factorization; no estimation path forms an
//! explicit inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative asymmetry tolerated by [`spd_check`] before symmetrizing.
pub const SYM_TOL: f64 = 1e-8;
/// Relative residual bound met by [`solve_spd`] on well-conditioned inputs.
pub const SOLVE_TOL: f64 = 1e-10;
/// Relative pivot tolerance used when certifying positive semidefinite matrices.
pub const PSD_TOL: f64 = 1e-10;
/// Pivot ratio above which a certified matrix is flagged as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e12;

/// Which certification a [`SpdMatrix`] passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    /// All pivots strictly positive.
    Positive,
    /// Pivots non-negative up to `PSD_TOL` relative to the largest entry;
    /// pivots inside the tolerance band are stored as exact zeros.
    SemiDefinite,
}

/// A symmetric matrix certified positive (semi)definite by a complete `L D Lᵀ` factorization.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: Matrix,
    unit_lower: Matrix,
    pivots: Vec<f64>,
    definiteness: Definiteness,
    ill_conditioned: bool,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

/// Certifies `m` as symmetric positive definite.
///
/// The returned wrapper holds `(M + Mᵀ)/2` and its factorization.
pub fn spd_check(m: &Matrix, tol: f64) -> Result<SpdMatrix> {
    certify(m, tol, Definiteness::Positive)
}

/// Certifies `m` as symmetric positive semidefinite (pivots ≥ −`PSD_TOL`·max|M|).
pub fn psd_check(m: &Matrix, tol: f64) -> Result<SpdMatrix> {
    certify(m, tol, Definiteness::SemiDefinite)
}

fn certify(m: &Matrix, tol: f64, definiteness: Definiteness) -> Result<SpdMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::mismatch("spd_check", "at least 1x1", "0x0"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = max_abs(m.as_slice());
    let asymmetry = max_abs((m - m.transpose()).as_slice());
    if asymmetry > tol * scale {
        return Err(Error::AsymmetryExceedsTol {
            asymmetry,
            tol: tol * scale,
        });
    }
    let sym = symmetrize_unchecked(m);
    let (unit_lower, pivots) = ldlt(&sym, definiteness, scale)?;

    let (lo, hi) = pivots
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let ill_conditioned = lo <= 0.0 || hi / lo > CONDITION_WARN;

    Ok(SpdMatrix {
        matrix: sym,
        unit_lower,
        pivots,
        definiteness,
        ill_conditioned,
    })
}

/// Unpivoted `L D Lᵀ`. In semidefinite mode a pivot inside the tolerance band
/// is zeroed, and the rest of its column must vanish with it.
fn ldlt(a: &Matrix, definiteness: Definiteness, scale: f64) -> Result<(Matrix, Vec<f64>)> {
    let n = a.nrows();
    let mut l = Matrix::identity(n, n);
    let mut d = vec![0.0; n];
    let zero_band = PSD_TOL * scale;
    let column_band = PSD_TOL.sqrt() * scale;

    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)] * d[k];
        }
        match definiteness {
            Definiteness::Positive => {
                if pivot.is_nan() || pivot <= 0.0 {
                    return Err(Error::NotPositiveDefinite { index: j, pivot });
                }
            }
            Definiteness::SemiDefinite => {
                if pivot < -zero_band {
                    return Err(Error::NotPositiveDefinite { index: j, pivot });
                }
                if pivot <= zero_band {
                    for i in (j + 1)..n {
                        let mut v = a[(i, j)];
                        for k in 0..j {
                            v -= l[(i, k)] * l[(j, k)] * d[k];
                        }
                        if v.abs() > column_band {
                            return Err(Error::NotPositiveDefinite { index: j, pivot });
                        }
                    }
                    d[j] = 0.0;
                    continue;
                }
            }
        }
        d[j] = pivot;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / pivot;
        }
    }
    Ok((l, d))
}

impl SpdMatrix {
    pub fn identity(n: usize) -> Self {
        SpdMatrix {
            matrix: Matrix::identity(n, n),
            unit_lower: Matrix::identity(n, n),
            pivots: vec![1.0; n],
            definiteness: Definiteness::Positive,
            ill_conditioned: false,
        }
    }

    /// Symmetrizes and certifies a matrix produced by an internal computation.
    pub fn certify_computed(m: Matrix, definiteness: Definiteness) -> Result<Self> {
        certify(&m, SYM_TOL, definiteness)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// The `D` entries of `L D Lᵀ`.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    /// Set when the pivot ratio exceeds [`CONDITION_WARN`] or a pivot is zero.
    pub fn is_ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    pub fn has_zero_pivot(&self) -> bool {
        self.pivots.contains(&0.0)
    }

    /// Smallest over largest pivot.
    pub fn pivot_ratio(&self) -> f64 {
        let hi = self.pivots.iter().cloned().fold(0.0, f64::max);
        let lo = self.pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            lo / hi
        } else {
            0.0
        }
    }

    /// A factor `F` with `F Fᵀ = A`, valid in both certification modes.
    pub fn factor(&self) -> Matrix {
        let mut f = self.unit_lower.clone();
        for (j, &d) in self.pivots.iter().enumerate() {
            let s = d.max(0.0).sqrt();
            f.column_mut(j).scale_mut(s);
        }
        f
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(Error::mismatch(
                "solve_spd",
                format!("{n} rows"),
                format!("{} rows", b.nrows()),
            ));
        }
        if let Some(index) = self.pivots.iter().position(|&d| d == 0.0) {
            return Err(Error::Singular { index });
        }
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            for i in 0..n {
                let mut v = col[i];
                for k in 0..i {
                    v -= self.unit_lower[(i, k)] * col[k];
                }
                col[i] = v;
            }
            for i in 0..n {
                col[i] /= self.pivots[i];
            }
            for i in (0..n).rev() {
                let mut v = col[i];
                for k in (i + 1)..n {
                    v -= self.unit_lower[(k, i)] * col[k];
                }
                col[i] = v;
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &Vector) -> Result<Vector> {
        let x = self.solve(&Matrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(Vector::from_column_slice(x.as_slice()))
    }

    /// `xᵀ A⁻¹ x` through the unit-lower factor.
    pub fn inverse_quadratic_form(&self, x: &Vector) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::mismatch("quadratic form", n, x.len()));
        }
        if let Some(index) = self.pivots.iter().position(|&d| d == 0.0) {
            return Err(Error::Singular { index });
        }
        let mut y = x.clone();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.unit_lower[(i, k)] * y[k];
            }
            y[i] = v;
        }
        Ok(y.iter().zip(&self.pivots).map(|(v, d)| v * v / d).sum())
    }

    /// Natural log of the determinant; `-inf` for a semidefinite matrix with a zero pivot.
    pub fn logdet(&self) -> f64 {
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

impl AsRef<Matrix> for SpdMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.matrix
    }
}

pub fn solve_spd(a: &SpdMatrix, b: &Matrix) -> Result<Matrix> {
    a.solve(b)
}

pub fn logdet(a: &SpdMatrix) -> f64 {
    a.logdet()
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(symmetrize_unchecked(m))
}

fn symmetrize_unchecked(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `(P⁻¹ + Hᵀ R⁻¹ H)⁻¹` evaluated through the matrix inversion lemma as
/// `P − P Hᵀ (R + H P Hᵀ)⁻¹ H P`.
pub fn woodbury_posterior_cov(p: &SpdMatrix, h: &Matrix, r: &SpdMatrix) -> Result<SpdMatrix> {
    let n = p.dim();
    let m = r.dim();
    if h.nrows() != m || h.ncols() != n {
        return Err(Error::mismatch(
            "woodbury H",
            format!("{m}x{n}"),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let hp = h * p.matrix();
    let s = SpdMatrix::certify_computed(r.matrix() + &hp * h.transpose(), Definiteness::Positive)?;
    let correction = hp.transpose() * s.solve(&hp)?;
    SpdMatrix::certify_computed(p.matrix() - correction, Definiteness::Positive)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)` in the Frobenius norm; zero when both are zero.
pub fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_deviation: length mismatch");
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}
