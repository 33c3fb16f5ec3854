//! Random-hyperplane binary hashing (simhash) and Hamming distance.
//!
//! A model is fully determined by `(dim, bits, seed)`: hyperplane entries
//! are standard-normal draws from the seeded generator in `rng`, filled
//! row by row. Codes are packed little-endian into 64-bit words — bit `b`
//! lives in word `b / 64` at position `b % 64` — with unused high bits
//! kept zero so equal codes are equal bytes.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;
use crate::tensor::Matrix;

#[derive(Debug, Clone)]
pub struct HashModel {
    dim: usize,
    bits: usize,
    seed: u64,
    hyperplanes: Matrix,
}

impl HashModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyperplanes(&self) -> &Matrix {
        &self.hyperplanes
    }
}

/// Packed binary code in canonical form (unused high bits zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::argument("a code needs at least one bit"));
        }
        let expected = bits.div_ceil(64);
        if words.len() != expected {
            return Err(Error::shape(format!(
                "{bits}-bit code needs {expected} words, got {}",
                words.len()
            )));
        }
        if !bits.is_multiple_of(64) {
            let mask = !0u64 << (bits % 64);
            if words[expected - 1] & mask != 0 {
                return Err(Error::argument(format!(
                    "non-canonical {bits}-bit code: unused high bits set"
                )));
            }
        }
        Ok(Self { bits, words })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, b: usize) -> bool {
        debug_assert!(b < self.bits);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    /// Bitwise complement, re-canonicalized.
    pub fn complement(&self) -> BinaryCode {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if !self.bits.is_multiple_of(64) {
            let last = words.len() - 1;
            words[last] &= !(!0u64 << (self.bits % 64));
        }
        Self {
            bits: self.bits,
            words,
        }
    }
}

/// Builds the deterministic hash model for `(dim, bits, seed)`.
pub fn fit_hash(dim: usize, bits: usize, seed: u64) -> Result<HashModel> {
    if dim == 0 {
        return Err(Error::argument("hash input dimension must be at least 1"));
    }
    if bits == 0 {
        return Err(Error::argument("hash code needs at least one bit"));
    }
    let mut rng = Rng::from_seed(seed);
    let mut data = vec![0.0f64; bits * dim];
    rng.fill_normal(&mut data);
    Ok(HashModel {
        dim,
        bits,
        seed,
        hyperplanes: Matrix::from_vec(bits, dim, data)?,
    })
}

/// Encodes a vector: bit `b` is 1 iff `hyperplanes[b] · v >= 0`.
pub fn encode(model: &HashModel, v: &[f64]) -> Result<BinaryCode> {
    if v.len() != model.dim {
        return Err(Error::shape(format!(
            "vector length {} does not match hash dimension {}",
            v.len(),
            model.dim
        )));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::argument("cannot hash a vector containing NaN"));
    }
    let mut words = vec![0u64; model.bits.div_ceil(64)];
    for b in 0..model.bits {
        let dot: f64 = model
            .hyperplanes
            .row(b)
            .iter()
            .zip(v)
            .map(|(h, x)| h * x)
            .sum();
        if dot >= 0.0 {
            words[b / 64] |= 1u64 << (b % 64);
        }
    }
    Ok(BinaryCode {
        bits: model.bits,
        words,
    })
}

/// Encodes every vector, preserving order.
pub fn encode_all(model: &HashModel, vectors: &[Vec<f64>]) -> Result<Vec<BinaryCode>> {
    par::ordered_map(vectors, |v| encode(model, v))
        .into_iter()
        .collect()
}

/// Sequential twin of [`encode_all`]; used for benchmarks.
pub fn encode_all_seq(model: &HashModel, vectors: &[Vec<f64>]) -> Result<Vec<BinaryCode>> {
    vectors.iter().map(|v| encode(model, v)).collect()
}

/// Number of differing bits.
pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::shape(format!(
            "cannot compare {}-bit and {}-bit codes",
            a.bits, b.bits
        )));
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refitting_reproduces_identical_hyperplanes() {
        let a = fit_hash(16, 64, 99).unwrap();
        let b = fit_hash(16, 64, 99).unwrap();
        assert_eq!(a.hyperplanes().data(), b.hyperplanes().data());
        let c = fit_hash(16, 64, 100).unwrap();
        assert_ne!(a.hyperplanes().data(), c.hyperplanes().data());
    }

    #[test]
    fn hyperplane_shape() {
        let m = fit_hash(2, 64, 0).unwrap();
        assert_eq!((m.hyperplanes().rows(), m.hyperplanes().cols()), (64, 2));
    }

    #[test]
    fn hyperplane_moments() {
        let m = fit_hash(100, 100, 7).unwrap();
        let data = m.hyperplanes().data();
        assert_eq!(data.len(), 10_000);
        let n = data.len() as f64;
        let mean: f64 = data.iter().sum::<f64>() / n;
        let var: f64 = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn zero_vector_hashes_to_all_ones() {
        let m = fit_hash(4, 70, 1).unwrap();
        let code = encode(&m, &[0.0; 4]).unwrap();
        assert!((0..70).all(|b| code.bit(b)));
        // still canonical: bits 70..128 of the second word are zero
        assert_eq!(code.words()[1] >> 6, 0);
    }

    #[test]
    fn positive_scaling_leaves_codes_unchanged() {
        let m = fit_hash(8, 128, 5).unwrap();
        let mut rng = Rng::from_seed(8);
        for _ in 0..50 {
            let v: Vec<f64> = (0..8).map(|_| rng.next_normal()).collect();
            let base = encode(&m, &v).unwrap();
            for scale in [2.0, 1024.0, 3.7, 0.001] {
                let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
                assert_eq!(encode(&m, &scaled).unwrap(), base, "scale {scale}");
            }
        }
    }

    #[test]
    fn scalar_input_matches_sign_oracle() {
        let m = fit_hash(1, 96, 3).unwrap();
        for v in [2.5, -1.0, 0.0] {
            let code = encode(&m, &[v]).unwrap();
            for b in 0..96 {
                let expect = m.hyperplanes().get(b, 0) * v >= 0.0;
                assert_eq!(code.bit(b), expect, "v = {v}, bit {b}");
            }
        }
    }

    #[test]
    fn encode_rejects_bad_input() {
        let m = fit_hash(3, 8, 0).unwrap();
        assert!(matches!(encode(&m, &[0.0; 2]), Err(Error::Shape(_))));
        assert!(matches!(
            encode(&m, &[0.0, f64::NAN, 0.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn code_construction_validates() {
        assert!(BinaryCode::from_words(4, vec![0b1010]).is_ok());
        assert!(BinaryCode::from_words(4, vec![0b11010]).is_err()); // bit 4 set
        assert!(BinaryCode::from_words(4, vec![0, 0]).is_err());
        assert!(BinaryCode::from_words(0, vec![]).is_err());
        assert!(BinaryCode::from_words(128, vec![!0, !0]).is_ok());
    }

    #[test]
    fn hamming_basics() {
        let a = BinaryCode::from_words(4, vec![0b1010]).unwrap();
        let b = BinaryCode::from_words(4, vec![0b0110]).unwrap();
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &b).unwrap(), 2);
        let c = BinaryCode::from_words(5, vec![0b1010]).unwrap();
        assert!(matches!(hamming(&a, &c), Err(Error::Shape(_))));
    }

    #[test]
    fn hamming_matches_bit_loop_oracle() {
        let mut rng = Rng::from_seed(11);
        for _ in 0..200 {
            let words_a = vec![rng.next_u64(), rng.next_u64()];
            let words_b = vec![rng.next_u64(), rng.next_u64()];
            let a = BinaryCode::from_words(128, words_a).unwrap();
            let b = BinaryCode::from_words(128, words_b).unwrap();
            let oracle = (0..128).filter(|&i| a.bit(i) != b.bit(i)).count() as u32;
            assert_eq!(hamming(&a, &b).unwrap(), oracle);
        }
    }

    #[test]
    fn hamming_is_a_metric() {
        let mut rng = Rng::from_seed(13);
        let mask = |w: u64| w & ((1u64 << 40) - 1);
        for _ in 0..200 {
            let a = BinaryCode::from_words(40, vec![mask(rng.next_u64())]).unwrap();
            let b = BinaryCode::from_words(40, vec![mask(rng.next_u64())]).unwrap();
            let c = BinaryCode::from_words(40, vec![mask(rng.next_u64())]).unwrap();
            let (ab, ba) = (hamming(&a, &b).unwrap(), hamming(&b, &a).unwrap());
            assert_eq!(ab, ba);
            assert_eq!(hamming(&a, &a).unwrap(), 0);
            if ab == 0 {
                assert_eq!(a, b);
            }
            let (bc, ac) = (hamming(&b, &c).unwrap(), hamming(&a, &c).unwrap());
            assert!(ac <= ab + bc);
        }
    }

    #[test]
    fn complement_is_canonical_and_flips_every_bit() {
        let code = BinaryCode::from_words(70, vec![0xDEAD_BEEF, 0x2A]).unwrap();
        let comp = code.complement();
        assert!((0..70).all(|b| code.bit(b) != comp.bit(b)));
        assert_eq!(comp.words()[1] >> 6, 0);
    }

    #[test]
    fn encode_all_matches_seq() {
        let m = fit_hash(6, 64, 21).unwrap();
        let mut rng = Rng::from_seed(22);
        let vectors: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..6).map(|_| rng.next_normal()).collect())
            .collect();
        let par = encode_all(&m, &vectors).unwrap();
        let seq = encode_all_seq(&m, &vectors).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn empirical_bit_disagreement_tracks_angle() {
        // Right-angle case of the simhash angle law; the full sweep lives
        // in the integration suite.
        let m = fit_hash(8, 128, 17).unwrap();
        let mut rng = Rng::from_seed(18);
        let mut total = 0.0;
        let pairs = 2000;
        for _ in 0..pairs {
            let u = random_unit(8, &mut rng);
            let w = orthogonal_unit(&u, &mut rng);
            total +=
                hamming(&encode(&m, &u).unwrap(), &encode(&m, &w).unwrap()).unwrap() as f64 / 128.0;
        }
        let mean = total / pairs as f64;
        assert!((mean - 0.5).abs() < 0.03, "mean {mean}");
    }

    pub(crate) fn random_unit(dim: usize, rng: &mut Rng) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    pub(crate) fn orthogonal_unit(u: &[f64], rng: &mut Rng) -> Vec<f64> {
        loop {
            let w = random_unit(u.len(), rng);
            let dot: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
            let mut v: Vec<f64> = w.iter().zip(u).map(|(w, u)| w - dot * u).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for x in &mut v {
                    *x /= norm;
                }
                return v;
            }
        }
    }
}
