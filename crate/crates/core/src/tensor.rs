//! Third-order tensors, mode-k unfolding/folding, and mode products.
//!
//! Layout is row-major with the third index fastest: entry `(i1, i2, i3)`
//! lives at `(i1 * I2 + i2) * I3 + i3`. All indices are zero-based.
//! Values are stored as `f32`; every reduction accumulates in `f64`.

use crate::error::{Error, Result};

/// One of the three tensor modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis number.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    pub fn number(self) -> u32 {
        self.axis() as u32 + 1
    }
}

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Adds `other` entrywise; shapes must match.
    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Largest absolute deviation from symmetry, relative to the largest
    /// absolute entry. Zero matrix counts as symmetric.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut max_abs = 0.0f64;
        let mut max_dev = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let a = self.get(r, c);
                max_abs = max_abs.max(a.abs());
                if c > r {
                    max_dev = max_dev.max((a - self.get(c, r)).abs());
                }
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_dev / max_abs
        }
    }
}

/// Third-order tensor of `f32` values, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        })
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f32>) -> Result<Self> {
        check_dims(dims)?;
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::shape(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self { dims, data })
    }

    /// Builds a tensor by evaluating `f` at every index, in layout order.
    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for i1 in 0..dims.0 {
            for i2 in 0..dims.1 {
                for i3 in 0..dims.2 {
                    data.push(f(i1, i2, i3));
                }
            }
        }
        Self::from_vec(dims, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize, i3: usize) -> f32 {
        debug_assert!(i1 < self.dims.0 && i2 < self.dims.1 && i3 < self.dims.2);
        self.data[(i1 * self.dims.1 + i2) * self.dims.2 + i3]
    }

    /// Squared Frobenius norm, accumulated in `f64`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|&v| v as f64 * v as f64).sum()
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Tensor3::from_vec(self.dims, data)
    }
}

fn check_dims(dims: (usize, usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::shape(format!("dims {dims:?} must all be positive")));
    }
    Ok(())
}

/// Mode-k unfolding. Row index is `i_k`; the column index packs the other
/// two: mode 1 -> `i2 + I2*i3`, mode 2 -> `i1 + I1*i3`, mode 3 -> `i1 + I1*i2`.
pub fn unfold(x: &Tensor3, mode: Mode) -> Matrix {
    let (i1n, i2n, i3n) = x.dims();
    let (rows, cols) = unfolded_shape(x.dims(), mode);
    let mut m = Matrix::zeros(rows, cols);
    for i1 in 0..i1n {
        for i2 in 0..i2n {
            for i3 in 0..i3n {
                let v = x.at(i1, i2, i3) as f64;
                let (r, c) = match mode {
                    Mode::One => (i1, i2 + i2n * i3),
                    Mode::Two => (i2, i1 + i1n * i3),
                    Mode::Three => (i3, i1 + i1n * i2),
                };
                m.set(r, c, v);
            }
        }
    }
    m
}

fn unfolded_shape(dims: (usize, usize, usize), mode: Mode) -> (usize, usize) {
    let (i1, i2, i3) = dims;
    match mode {
        Mode::One => (i1, i2 * i3),
        Mode::Two => (i2, i1 * i3),
        Mode::Three => (i3, i1 * i2),
    }
}

/// Inverse of [`unfold`]: `fold(unfold(x, k), k, x.dims())` is bit-identical
/// to `x`. Matrix values are narrowed to `f32` storage.
pub fn fold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
    check_dims(dims)?;
    let (rows, cols) = unfolded_shape(dims, mode);
    if (m.rows(), m.cols()) != (rows, cols) {
        return Err(Error::shape(format!(
            "cannot fold {}x{} as mode-{} of dims {:?} (need {}x{})",
            m.rows(),
            m.cols(),
            mode.number(),
            dims,
            rows,
            cols
        )));
    }
    let (i1n, i2n, _) = dims;
    Tensor3::from_fn(dims, |i1, i2, i3| {
        let (r, c) = match mode {
            Mode::One => (i1, i2 + i2n * i3),
            Mode::Two => (i2, i1 + i1n * i3),
            Mode::Three => (i3, i1 + i1n * i2),
        };
        m.get(r, c) as f32
    })
}

/// Mode-k product `x ×_k v`, i.e. `fold(v · unfold(x, k), k, ...)` with
/// `I_k` replaced by `v.rows()`. Projection by `V^T` is
/// `mode_product(x, &v.transpose(), k)`.
pub fn mode_product(x: &Tensor3, v: &Matrix, mode: Mode) -> Result<Tensor3> {
    let ik = match mode {
        Mode::One => x.dims().0,
        Mode::Two => x.dims().1,
        Mode::Three => x.dims().2,
    };
    if v.cols() != ik {
        return Err(Error::shape(format!(
            "mode-{} product needs {} matrix columns, got {}",
            mode.number(),
            ik,
            v.cols()
        )));
    }
    let product = v.matmul(&unfold(x, mode))?;
    let mut dims = x.dims();
    match mode {
        Mode::One => dims.0 = v.rows(),
        Mode::Two => dims.1 = v.rows(),
        Mode::Three => dims.2 = v.rows(),
    }
    fold(&product, mode, dims)
}

/// Entrywise mean of the samples, accumulated in `f64`.
pub fn mean_tensor(samples: &[Tensor3]) -> Result<Tensor3> {
    let first = samples
        .first()
        .ok_or_else(|| Error::argument("mean of an empty sample list"))?;
    let dims = first.dims();
    let mut acc = vec![0.0f64; first.len()];
    for (i, s) in samples.iter().enumerate() {
        if s.dims() != dims {
            return Err(Error::shape(format!(
                "sample {i} has dims {:?}, expected {:?}",
                s.dims(),
                dims
            )));
        }
        for (a, &v) in acc.iter_mut().zip(s.data()) {
            *a += v as f64;
        }
    }
    let n = samples.len() as f64;
    Tensor3::from_vec(dims, acc.into_iter().map(|a| (a / n) as f32).collect())
}

/// Centers the samples: returns `(X_i - mean, mean)`.
pub fn center(samples: &[Tensor3]) -> Result<(Vec<Tensor3>, Tensor3)> {
    let mean = mean_tensor(samples)?;
    let centered = samples
        .iter()
        .map(|s| s.sub(&mean))
        .collect::<Result<Vec<_>>>()?;
    Ok((centered, mean))
}

/// Row-wise vectorization: the rows of the mode-3 unfolding concatenated in
/// order. Output length is `I1*I2*I3`.
pub fn vectorize(x: &Tensor3) -> Vec<f64> {
    let (i1n, i2n, i3n) = x.dims();
    let mut out = Vec::with_capacity(x.len());
    for i3 in 0..i3n {
        for i2 in 0..i2n {
            for i1 in 0..i1n {
                out.push(x.at(i1, i2, i3) as f64);
            }
        }
    }
    out
}
