//! Synthetic clustered feature datasets for tests and demos.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor3;

/// A labeled collection of equally-shaped feature tensors.
#[derive(Debug, Clone)]
pub struct FeatureDataset {
    dims: (usize, usize, usize),
    items: Vec<(u64, u32, Tensor3)>,
}

impl FeatureDataset {
    pub fn new(dims: (usize, usize, usize), items: Vec<(u64, u32, Tensor3)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (id, _, t) in &items {
            if t.dims() != dims {
                return Err(Error::shape(format!(
                    "item {id} has dims {:?}, dataset declares {dims:?}",
                    t.dims()
                )));
            }
            if !seen.insert(*id) {
                return Err(Error::argument(format!("duplicate id {id}")));
            }
        }
        Ok(Self { dims, items })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn items(&self) -> &[(u64, u32, Tensor3)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tensors(&self) -> Vec<Tensor3> {
        self.items.iter().map(|(_, _, t)| t.clone()).collect()
    }
}

/// Draws `num_classes * per_class` items: each class gets a standard-normal
/// center tensor, and every item is `center + noise * (standard-normal
/// draw)` entrywise. Ids run 0.. in class-major order; labels are class
/// indices. Fully determined by the seed.
pub fn gen_synthetic(
    num_classes: usize,
    per_class: usize,
    dims: (usize, usize, usize),
    noise: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if num_classes < 2 {
        return Err(Error::argument(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if per_class < 1 {
        return Err(Error::argument("need at least 1 item per class"));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::argument(format!(
            "noise must be finite and nonnegative, got {noise}"
        )));
    }
    let n = dims.0 * dims.1 * dims.2;
    let mut rng = Rng::from_seed(seed);
    let mut items = Vec::with_capacity(num_classes * per_class);
    let mut id = 0u64;
    for class in 0..num_classes {
        let mut class_center = vec![0.0f64; n];
        rng.fill_normal(&mut class_center);
        for _ in 0..per_class {
            let data: Vec<f32> = class_center
                .iter()
                .map(|&c| (c + noise * rng.next_normal()) as f32)
                .collect();
            items.push((id, class as u32, Tensor3::from_vec(dims, data)?));
            id += 1;
        }
    }
    FeatureDataset::new(dims, items)
}
