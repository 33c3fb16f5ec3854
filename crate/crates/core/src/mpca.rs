//! Simplified multilinear PCA: center, per-mode total scatter, per-mode
//! symmetric eigendecomposition, truncated projection. Single pass — no
//! alternating iteration.
//!
//! Also home to the contribution-rate arithmetic used to pick output
//! dimensions: CCR, weighted CCR, compression-rate dimension selection,
//! and CCR-target dimension selection.

use crate::eig::{sym_eig, Spectrum};
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{center, mode_product, unfold, Matrix, Mode, Tensor3};

/// Fitted MPCA model: mean, per-mode projections, and full spectra.
#[derive(Debug, Clone)]
pub struct MpcaModel {
    in_dims: (usize, usize, usize),
    out_dims: (usize, usize, usize),
    mean: Tensor3,
    projections: [Matrix; 3],
    spectra: [Spectrum; 3],
}

impl MpcaModel {
    /// Reassembles a model from stored parts, revalidating the invariants.
    pub fn from_parts(
        out_dims: (usize, usize, usize),
        mean: Tensor3,
        projections: [Matrix; 3],
        spectra: [Spectrum; 3],
    ) -> Result<Self> {
        let in_dims = mean.dims();
        let model = Self {
            in_dims,
            out_dims,
            mean,
            projections,
            spectra,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let ins = [self.in_dims.0, self.in_dims.1, self.in_dims.2];
        let outs = [self.out_dims.0, self.out_dims.1, self.out_dims.2];
        for k in 0..3 {
            if outs[k] < 1 || outs[k] > ins[k] {
                return Err(Error::argument(format!(
                    "output dim d{} = {} outside [1, {}]",
                    k + 1,
                    outs[k],
                    ins[k]
                )));
            }
            let v = &self.projections[k];
            if (v.rows(), v.cols()) != (ins[k], outs[k]) {
                return Err(Error::shape(format!(
                    "projection V{} is {}x{}, expected {}x{}",
                    k + 1,
                    v.rows(),
                    v.cols(),
                    ins[k],
                    outs[k]
                )));
            }
            if self.spectra[k].len() != ins[k] {
                return Err(Error::shape(format!(
                    "mode-{} spectrum has length {}, expected {}",
                    k + 1,
                    self.spectra[k].len(),
                    ins[k]
                )));
            }
            let vtv = v.transpose().matmul(v)?;
            for i in 0..outs[k] {
                for j in 0..outs[k] {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    if (vtv.get(i, j) - expect).abs() >= 1e-8 {
                        return Err(Error::numeric(format!(
                            "projection V{} columns are not orthonormal",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn in_dims(&self) -> (usize, usize, usize) {
        self.in_dims
    }

    pub fn out_dims(&self) -> (usize, usize, usize) {
        self.out_dims
    }

    pub fn mean(&self) -> &Tensor3 {
        &self.mean
    }

    pub fn projection(&self, mode: Mode) -> &Matrix {
        &self.projections[mode.axis()]
    }

    pub fn spectrum(&self, mode: Mode) -> &Spectrum {
        &self.spectra[mode.axis()]
    }
}

fn check_centered_input(centered: &[Tensor3]) -> Result<(usize, usize, usize)> {
    let first = centered
        .first()
        .ok_or_else(|| Error::argument("scatter of an empty sample list"))?;
    let dims = first.dims();
    for (i, s) in centered.iter().enumerate() {
        if s.dims() != dims {
            return Err(Error::shape(format!(
                "sample {i} has dims {:?}, expected {dims:?}",
                s.dims()
            )));
        }
    }
    Ok(dims)
}

fn chunk_scatter(chunk: &[Tensor3], mode: Mode, ik: usize) -> Matrix {
    // Upper triangle only; mirrored once after all partials are merged.
    let mut partial = Matrix::zeros(ik, ik);
    for x in chunk {
        let u = unfold(x, mode);
        for r in 0..ik {
            let row_r = u.row(r);
            for r2 in r..ik {
                let dot: f64 = row_r.iter().zip(u.row(r2)).map(|(a, b)| a * b).sum();
                partial.set(r, r2, partial.get(r, r2) + dot);
            }
        }
    }
    partial
}

fn merge_scatter(partials: Vec<Matrix>, ik: usize) -> Matrix {
    let mut s = Matrix::zeros(ik, ik);
    for p in partials {
        s.add_assign(&p);
    }
    for r in 0..ik {
        for r2 in r + 1..ik {
            let v = s.get(r, r2);
            s.set(r2, r, v);
        }
    }
    s
}

/// Mode-k total scatter `S^(k) = Σ_i U_i U_i^T` over already-centered
/// samples, where `U_i` is the mode-k unfolding. Chunked reduction with a
/// fixed merge order, so results are identical for any thread count.
pub fn scatter_matrix(centered: &[Tensor3], mode: Mode) -> Result<Matrix> {
    let dims = check_centered_input(centered)?;
    let ik = [dims.0, dims.1, dims.2][mode.axis()];
    let partials = par::map_chunks(centered, |chunk| chunk_scatter(chunk, mode, ik));
    Ok(merge_scatter(partials, ik))
}

/// Sequential twin of [`scatter_matrix`]; used for benchmarks.
pub fn scatter_matrix_seq(centered: &[Tensor3], mode: Mode) -> Result<Matrix> {
    let dims = check_centered_input(centered)?;
    let ik = [dims.0, dims.1, dims.2][mode.axis()];
    let partials = par::map_chunks_seq(centered, |chunk| chunk_scatter(chunk, mode, ik));
    Ok(merge_scatter(partials, ik))
}

/// Fits the simplified MPCA model: center, one scatter matrix and one
/// eigendecomposition per mode, keep the leading `d_k` eigenvectors.
pub fn fit(samples: &[Tensor3], out_dims: (usize, usize, usize)) -> Result<MpcaModel> {
    if samples.len() < 2 {
        return Err(Error::argument(format!(
            "MPCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let (centered, mean) = center(samples)?;
    let in_dims = mean.dims();
    let ins = [in_dims.0, in_dims.1, in_dims.2];
    let outs = [out_dims.0, out_dims.1, out_dims.2];
    for k in 0..3 {
        if outs[k] < 1 || outs[k] > ins[k] {
            return Err(Error::argument(format!(
                "output dim d{} = {} outside [1, {}]",
                k + 1,
                outs[k],
                ins[k]
            )));
        }
    }

    let mut projections = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    for (k, mode) in Mode::ALL.into_iter().enumerate() {
        let s = scatter_matrix(&centered, mode)?;
        let (spectrum, q) = sym_eig(&s)?;
        let mut v = Matrix::zeros(ins[k], outs[k]);
        for r in 0..ins[k] {
            for c in 0..outs[k] {
                v.set(r, c, q.get(r, c));
            }
        }
        projections.push(v);
        spectra.push(spectrum);
    }

    let projections: [Matrix; 3] = projections.try_into().expect("three modes");
    let spectra: [Spectrum; 3] = spectra.try_into().expect("three modes");
    Ok(MpcaModel {
        in_dims,
        out_dims,
        mean,
        projections,
        spectra,
    })
}

/// Projects one sample: `Y = (x − mean) ×1 V1^T ×2 V2^T ×3 V3^T`.
pub fn project(model: &MpcaModel, x: &Tensor3) -> Result<Tensor3> {
    if x.dims() != model.in_dims {
        return Err(Error::shape(format!(
            "sample dims {:?} do not match model input dims {:?}",
            x.dims(),
            model.in_dims
        )));
    }
    let mut y = x.sub(&model.mean)?;
    for mode in Mode::ALL {
        y = mode_product(&y, &model.projection(mode).transpose(), mode)?;
    }
    Ok(y)
}

/// Clamps a scatter spectrum to nonnegative values. Eigenvalues below
/// `-1e-8 * λ_max` mean the matrix was not numerically PSD.
fn clamped(spectrum: &Spectrum) -> Result<Vec<f64>> {
    let max = spectrum.values().first().copied().unwrap_or(0.0);
    if max < 0.0 {
        return Err(Error::numeric(format!(
            "spectrum is entirely negative (largest eigenvalue {max})"
        )));
    }
    let floor = -1e-8 * max;
    spectrum
        .values()
        .iter()
        .map(|&l| {
            if l < floor {
                Err(Error::numeric(format!(
                    "eigenvalue {l} below the PSD tolerance {floor}"
                )))
            } else {
                Ok(l.max(0.0))
            }
        })
        .collect()
}

/// Cumulative contribution rate of the leading `d` eigenvalues.
pub fn ccr(spectrum: &Spectrum, d: usize) -> Result<f64> {
    if d < 1 || d > spectrum.len() {
        return Err(Error::argument(format!(
            "d = {d} outside [1, {}]",
            spectrum.len()
        )));
    }
    let values = clamped(spectrum)?;
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Err(Error::argument(
            "all-zero spectrum has no contribution rates",
        ));
    }
    let leading: f64 = values[..d].iter().sum();
    Ok(leading / total)
}

/// Weighted CCR: per-mode rates combined with weights `I_k / (I1+I2+I3)`.
pub fn weighted_ccr(ccrs: (f64, f64, f64), in_dims: (usize, usize, usize)) -> f64 {
    let (i1, i2, i3) = (in_dims.0 as f64, in_dims.1 as f64, in_dims.2 as f64);
    (ccrs.0 * i1 + ccrs.1 * i2 + ccrs.2 * i3) / (i1 + i2 + i3)
}

/// Per-mode dimension selection at a common compression rate:
/// `d_k = round(cr * I_k)` (half away from zero), clamped to `[1, I_k]`.
pub fn select_dims_by_cr(in_dims: (usize, usize, usize), cr: f64) -> Result<(usize, usize, usize)> {
    if !(cr > 0.0 && cr <= 1.0) {
        return Err(Error::argument(format!(
            "compression rate {cr} outside (0, 1]"
        )));
    }
    let pick = |i: usize| -> usize {
        let d = (cr * i as f64).round() as usize;
        d.clamp(1, i)
    };
    Ok((pick(in_dims.0), pick(in_dims.1), pick(in_dims.2)))
}

/// Smallest `d` whose CCR reaches `target`. An all-zero spectrum keeps
/// everything (returns the full length).
pub fn select_dim_for_ccr(spectrum: &Spectrum, target: f64) -> Result<usize> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::argument(format!(
            "target CCR {target} outside (0, 1]"
        )));
    }
    let values = clamped(spectrum)?;
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(values.len());
    }
    let mut leading = 0.0;
    for (i, v) in values.iter().enumerate() {
        leading += v;
        if leading / total >= target {
            return Ok(i + 1);
        }
    }
    Ok(values.len())
}
