//! Classical PCA on vectorized features — the comparison arm.
//!
//! The scatter matrix is eigendecomposed directly, which is fine at the
//! dimensions this library targets but quadratic in memory; `MAX_PCA_DIM`
//! guards against accidentally feeding it something enormous.

use crate::eig::{sym_eig, Spectrum};
use crate::error::{Error, Result};
use crate::mpca::select_dim_for_ccr;
use crate::par;
use crate::tensor::Matrix;

/// Hard ceiling on the input dimension (the scatter matrix is dense
/// in_dim x in_dim).
pub const MAX_PCA_DIM: usize = 4096;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Keep exactly this many.
    OutDim(usize),
    /// Keep the smallest count whose CCR reaches the target.
    TargetCcr(f64),
}

#[derive(Debug, Clone)]
pub struct PcaModel {
    in_dim: usize,
    out_dim: usize,
    mean: Vec<f64>,
    components: Matrix,
    spectrum: Spectrum,
}

impl PcaModel {
    /// Reassembles a model from stored parts, revalidating the invariants.
    pub fn from_parts(mean: Vec<f64>, components: Matrix, spectrum: Spectrum) -> Result<Self> {
        let in_dim = mean.len();
        let out_dim = components.cols();
        let model = Self {
            in_dim,
            out_dim,
            mean,
            components,
            spectrum,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.out_dim == 0 || self.out_dim > self.in_dim {
            return Err(Error::argument(format!(
                "out_dim {} outside [1, {}]",
                self.out_dim, self.in_dim
            )));
        }
        if self.components.rows() != self.in_dim {
            return Err(Error::shape(format!(
                "components matrix is {}x{}, expected {} rows",
                self.components.rows(),
                self.components.cols(),
                self.in_dim
            )));
        }
        if self.spectrum.len() != self.in_dim {
            return Err(Error::shape(format!(
                "spectrum has length {}, expected {}",
                self.spectrum.len(),
                self.in_dim
            )));
        }
        let ctc = self.components.transpose().matmul(&self.components)?;
        for i in 0..self.out_dim {
            for j in 0..self.out_dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (ctc.get(i, j) - expect).abs() >= 1e-8 {
                    return Err(Error::numeric("principal components are not orthonormal"));
                }
            }
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }
}

fn chunk_scatter(chunk: &[Vec<f64>], dim: usize) -> Matrix {
    let mut partial = Matrix::zeros(dim, dim);
    for v in chunk {
        for a in 0..dim {
            let va = v[a];
            if va == 0.0 {
                continue;
            }
            for (b, &vb) in v.iter().enumerate().skip(a) {
                partial.set(a, b, partial.get(a, b) + va * vb);
            }
        }
    }
    partial
}

/// Fits PCA on the vectors: center, scatter, eigendecompose, truncate.
pub fn fit_pca(vectors: &[Vec<f64>], selection: Selection) -> Result<PcaModel> {
    if vectors.len() < 2 {
        return Err(Error::argument(format!(
            "PCA needs at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    if dim == 0 {
        return Err(Error::argument("PCA on zero-length vectors"));
    }
    if dim > MAX_PCA_DIM {
        return Err(Error::Capacity(format!(
            "input dimension {dim} exceeds the PCA limit of {MAX_PCA_DIM} \
             (the scatter matrix is dense {dim}x{dim})"
        )));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::shape(format!(
                "vector {i} has length {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument(format!("vector {i} has non-finite values")));
        }
    }

    let n = vectors.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }

    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(&x, &m)| x - m).collect())
        .collect();
    let partials = par::map_chunks(&centered, |chunk| chunk_scatter(chunk, dim));
    let mut scatter = Matrix::zeros(dim, dim);
    for p in partials {
        scatter.add_assign(&p);
    }
    for a in 0..dim {
        for b in a + 1..dim {
            let v = scatter.get(a, b);
            scatter.set(b, a, v);
        }
    }

    let (spectrum, q) = sym_eig(&scatter)?;
    let out_dim = match selection {
        Selection::OutDim(d) => {
            if d == 0 || d > dim {
                return Err(Error::argument(format!("out_dim {d} outside [1, {dim}]")));
            }
            d
        }
        Selection::TargetCcr(target) => select_dim_for_ccr(&spectrum, target)?,
    };

    let mut components = Matrix::zeros(dim, out_dim);
    for r in 0..dim {
        for c in 0..out_dim {
            components.set(r, c, q.get(r, c));
        }
    }
    Ok(PcaModel {
        in_dim: dim,
        out_dim,
        mean,
        components,
        spectrum,
    })
}

/// Projects one vector: `components^T (v - mean)`.
pub fn project_pca(model: &PcaModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.in_dim {
        return Err(Error::shape(format!(
            "vector length {} does not match model input dim {}",
            v.len(),
            model.in_dim
        )));
    }
    let centered: Vec<f64> = v.iter().zip(&model.mean).map(|(&x, &m)| x - m).collect();
    let mut out = vec![0.0f64; model.out_dim];
    for (r, &x) in centered.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = model.components.row(r);
        for (o, &c) in out.iter_mut().zip(row) {
            *o += c * x;
        }
    }
    Ok(out)
}
