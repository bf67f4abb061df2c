//! Small dense complex linear algebra.
//!
//! Everything in the simulator is at most 16x16, so matrices are plain
//! row-major `Vec<Complex64>` buffers. Subsystem index 0 is the leftmost
//! tensor factor.

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-12;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch {
                expected: "positive dimensions".into(),
                found: format!("{rows}x{cols}"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C_ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C_ONE;
        }
        m
    }

    /// Outer product `|v><v|` of a state vector.
    pub fn projector_onto(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                found: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C_ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let m = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (row, col): (usize, usize)) -> &Complex64 {
        &self.data[row * self.cols + col]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.data[(i * b.rows + k) * cols + j * b.cols + l] = aij * b.get(k, l);
                }
            }
        }
    }
    out
}

/// A square operator on a register of subsystems, carrying probability
/// weight in its trace (states along the pipeline are unnormalized).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityOperator {
    /// Validates Hermiticity, positivity and `trace <= 1`.
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::with_dims(matrix, dims)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Checks only the shape. Used on the hot path where the state is
    /// produced from a valid state by a completely positive map.
    pub(crate) fn with_dims(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", matrix.rows, matrix.cols),
            });
        }
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || total != matrix.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("subsystem dimensions with product {}", matrix.rows),
                found: format!("{dims:?}"),
            });
        }
        Ok(Self { matrix, dims })
    }

    pub fn validate(&self) -> Result<()> {
        let dev = self.matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if tr > 1.0 + TRACE_TOL {
            return Err(Error::TraceExceeded(tr));
        }
        let min_eig = self.matrix.hermitian_eigenvalues()?[0];
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `Tr(op ρ)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        Ok(op.matmul(&self.matrix)?.trace().re)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            matrix: kron(&self.matrix, &other.matrix),
            dims,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
            dims: self.dims.clone(),
        }
    }
}

/// Traces out every subsystem not listed in `keep`.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let dims = rho.dims();
    let n_sub = dims.len();
    if keep.is_empty() || keep.len() >= n_sub {
        return Err(Error::InvalidSubsystems(format!(
            "keep set {keep:?} must be a nonempty strict subset of {n_sub} subsystems"
        )));
    }
    let mut kept = vec![false; n_sub];
    for &k in keep {
        if k >= n_sub {
            return Err(Error::InvalidSubsystems(format!(
                "subsystem {k} does not exist (register has {n_sub})"
            )));
        }
        if kept[k] {
            return Err(Error::InvalidSubsystems(format!("subsystem {k} listed twice")));
        }
        kept[k] = true;
    }

    let kept_dims: Vec<usize> = (0..n_sub).filter(|&s| kept[s]).map(|s| dims[s]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let total = rho.dim();

    // Split a full register index into (kept index, traced index).
    let split = |mut idx: usize| -> (usize, usize) {
        let (mut k_idx, mut k_stride) = (0, 1);
        let (mut t_idx, mut t_stride) = (0, 1);
        for s in (0..n_sub).rev() {
            let digit = idx % dims[s];
            idx /= dims[s];
            if kept[s] {
                k_idx += digit * k_stride;
                k_stride *= dims[s];
            } else {
                t_idx += digit * t_stride;
                t_stride *= dims[s];
            }
        }
        (k_idx, t_idx)
    };
    let parts: Vec<(usize, usize)> = (0..total).map(split).collect();

    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    let m = rho.matrix();
    for i in 0..total {
        let (ki, ti) = parts[i];
        for j in 0..total {
            let (kj, tj) = parts[j];
            if ti == tj {
                out.data[ki * out_dim + kj] += m.get(i, j);
            }
        }
    }
    DensityOperator::with_dims(out, kept_dims)
}

/// `u ρ u†`, left unnormalized.
pub fn conjugate_product(u: &ComplexMatrix, rho: &DensityOperator) -> Result<DensityOperator> {
    if u.rows != u.cols || u.cols != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} operator", rho.dim()),
            found: format!("{}x{}", u.rows, u.cols),
        });
    }
    let out = u.matmul(&rho.matrix)?.matmul(&u.adjoint())?;
    DensityOperator::with_dims(out, rho.dims.clone())
}
