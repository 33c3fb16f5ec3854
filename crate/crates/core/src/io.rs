//! Versioned binary file formats.
//!
//! Every format shares the same header discipline: 4 magic bytes, then a
//! u32 version (currently 1), then dimensions, then the payload. All
//! multi-byte integers and floats are little-endian; tensors are f32 in
//! layout order, everything else is f64. Malformed input is rejected with
//! the byte offset of the offending field; a truncated file reports the
//! offset of the first missing byte. Writes go through a temp file in the
//! destination directory and are renamed into place.
//!
//! Formats:
//! - `MPFT` features: N, (I1,I2,I3), then N x (id u64, label u32, I1*I2*I3 f32).
//! - `MPCM` MPCA model: (I1,I2,I3), (d1,d2,d3), mean as f64, V1..V3
//!   row-major, three full spectra.
//! - `PCAM` PCA model: in_dim, out_dim, mean, components row-major, spectrum.
//! - `LSH1` hash model: dim, bits, seed, then an FNV-1a 64 checksum of the
//!   regenerated hyperplane bytes — hyperplanes themselves are never stored.
//! - `MPIX` retrieval index: bits, N, then N x (id u64, label u32, packed
//!   code words), ids strictly ascending.

use std::io::Write as _;
use std::path::Path;

use crate::eig::Spectrum;
use crate::error::{Error, Result};
use crate::hash::{fit_hash, BinaryCode, HashModel};
use crate::index::{IndexEntry, RetrievalIndex};
use crate::mpca::MpcaModel;
use crate::pca::PcaModel;
use crate::synth::FeatureDataset;
use crate::tensor::{Matrix, Mode, Tensor3};

pub const FORMAT_VERSION: u32 = 1;

const MAGIC_FEATURES: &[u8; 4] = b"MPFT";
const MAGIC_MPCA: &[u8; 4] = b"MPCM";
const MAGIC_PCA: &[u8; 4] = b"PCAM";
const MAGIC_HASH: &[u8; 4] = b"LSH1";
const MAGIC_INDEX: &[u8; 4] = b"MPIX";

// ---------------------------------------------------------------- reading

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.buf.len() as u64,
                format!(
                    "file truncated: {what} at offset {} needs {n} bytes, file ends at {}",
                    self.pos,
                    self.buf.len()
                ),
            ));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expect {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expect)
                ),
            ));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let at = self.offset();
        let v = self.u32("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(
                at,
                format!("unsupported version {v}, expected {FORMAT_VERSION}"),
            ));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    /// A u32 that must be >= 1 (dimension fields).
    fn dim(&mut self, what: &str) -> Result<usize> {
        let at = self.offset();
        let v = self.u32(what)?;
        if v == 0 {
            return Err(Error::format(at, format!("{what} must be positive")));
        }
        Ok(v as usize)
    }

    fn f32_block(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let start = self.offset();
        let bytes = self.take(4 * n, what)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(Error::format(
                    start + 4 * i as u64,
                    format!("non-finite value in {what}"),
                ));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn f64_block(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.offset();
        let bytes = self.take(8 * n, what)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::format(
                    start + 8 * i as u64,
                    format!("non-finite value in {what}"),
                ));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.pos as u64,
                format!(
                    "{} trailing bytes after the payload",
                    self.buf.len() - self.pos
                ),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- writing

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        Self { buf }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32_block(&mut self, values: &[f32]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn f64_block(&mut self, values: &[f64]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// Writes atomically: temp file in the same directory, then rename.
    fn persist(self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.buf)?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::argument(format!("{what} {v} exceeds u32 range")))
}

/// FNV-1a 64 over a byte stream.
fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn hyperplane_checksum(model: &HashModel) -> u64 {
    fnv1a64(
        model
            .hyperplanes()
            .data()
            .iter()
            .flat_map(|v| v.to_le_bytes()),
    )
}

// --------------------------------------------------------------- features

pub fn write_features(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC_FEATURES);
    let (i1, i2, i3) = dataset.dims();
    w.u32(u32_of(dataset.len(), "item count")?);
    w.u32(u32_of(i1, "I1")?);
    w.u32(u32_of(i2, "I2")?);
    w.u32(u32_of(i3, "I3")?);
    for (id, label, tensor) in dataset.items() {
        w.u64(*id);
        w.u32(*label);
        w.f32_block(tensor.data());
    }
    w.persist(path)
}

pub fn read_features(path: &Path) -> Result<FeatureDataset> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    r.magic(MAGIC_FEATURES)?;
    r.version()?;
    let n = r.u32("item count")? as usize;
    let dims = (r.dim("I1")?, r.dim("I2")?, r.dim("I3")?);
    let per_item = dims.0 * dims.1 * dims.2;
    let mut items = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..n {
        let id_at = r.offset();
        let id = r.u64("item id")?;
        if !seen.insert(id) {
            return Err(Error::format(id_at, format!("duplicate id {id}")));
        }
        let label = r.u32("item label")?;
        let data = r.f32_block(per_item, "tensor data")?;
        items.push((id, label, Tensor3::from_vec(dims, data)?));
    }
    r.finish()?;
    FeatureDataset::new(dims, items)
}

// ------------------------------------------------------------- MPCA model

pub fn write_mpca_model(model: &MpcaModel, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC_MPCA);
    let (i1, i2, i3) = model.in_dims();
    let (d1, d2, d3) = model.out_dims();
    for v in [i1, i2, i3, d1, d2, d3] {
        w.u32(u32_of(v, "dimension")?);
    }
    w.f64_block(
        &model
            .mean()
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<_>>(),
    );
    for mode in Mode::ALL {
        w.f64_block(model.projection(mode).data());
    }
    for mode in Mode::ALL {
        w.f64_block(model.spectrum(mode).values());
    }
    w.persist(path)
}

pub fn read_mpca_model(path: &Path) -> Result<MpcaModel> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    r.magic(MAGIC_MPCA)?;
    r.version()?;
    let ins = [r.dim("I1")?, r.dim("I2")?, r.dim("I3")?];
    let mut outs = [0usize; 3];
    for k in 0..3 {
        let at = r.offset();
        let d = r.dim(&format!("d{}", k + 1))?;
        if d > ins[k] {
            return Err(Error::format(
                at,
                format!("d{} = {d} exceeds I{} = {}", k + 1, k + 1, ins[k]),
            ));
        }
        outs[k] = d;
    }
    let n = ins[0] * ins[1] * ins[2];
    let mean_at = r.offset();
    let mean: Vec<f32> = r
        .f64_block(n, "mean tensor")?
        .into_iter()
        .map(|v| v as f32)
        .collect();
    if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            mean_at + 8 * i as u64,
            "mean value overflows f32",
        ));
    }
    let mean = Tensor3::from_vec((ins[0], ins[1], ins[2]), mean)?;

    let mut projections = Vec::with_capacity(3);
    for (k, (&inn, &out)) in ins.iter().zip(&outs).enumerate() {
        let data = r.f64_block(inn * out, &format!("projection V{}", k + 1))?;
        projections.push(Matrix::from_vec(inn, out, data)?);
    }
    let mut spectra = Vec::with_capacity(3);
    for (k, &inn) in ins.iter().enumerate() {
        let at = r.offset();
        let values = r.f64_block(inn, &format!("mode-{} spectrum", k + 1))?;
        let spectrum = Spectrum::new(values)
            .map_err(|e| Error::format(at, format!("mode-{} spectrum invalid: {e}", k + 1)))?;
        spectra.push(spectrum);
    }
    r.finish()?;
    MpcaModel::from_parts(
        (outs[0], outs[1], outs[2]),
        mean,
        projections.try_into().expect("three modes"),
        spectra.try_into().expect("three modes"),
    )
}

// -------------------------------------------------------------- PCA model

pub fn write_pca_model(model: &PcaModel, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC_PCA);
    w.u32(u32_of(model.in_dim(), "in_dim")?);
    w.u32(u32_of(model.out_dim(), "out_dim")?);
    w.f64_block(model.mean());
    w.f64_block(model.components().data());
    w.f64_block(model.spectrum().values());
    w.persist(path)
}

pub fn read_pca_model(path: &Path) -> Result<PcaModel> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    r.magic(MAGIC_PCA)?;
    r.version()?;
    let in_dim = r.dim("in_dim")?;
    let out_at = r.offset();
    let out_dim = r.dim("out_dim")?;
    if out_dim > in_dim {
        return Err(Error::format(
            out_at,
            format!("out_dim {out_dim} exceeds in_dim {in_dim}"),
        ));
    }
    let mean = r.f64_block(in_dim, "mean vector")?;
    let components = Matrix::from_vec(
        in_dim,
        out_dim,
        r.f64_block(in_dim * out_dim, "components")?,
    )?;
    let at = r.offset();
    let spectrum = Spectrum::new(r.f64_block(in_dim, "spectrum")?)
        .map_err(|e| Error::format(at, format!("spectrum invalid: {e}")))?;
    r.finish()?;
    PcaModel::from_parts(mean, components, spectrum)
}

// ------------------------------------------------------------- hash model

pub fn write_hash_model(model: &HashModel, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC_HASH);
    w.u32(u32_of(model.dim(), "dim")?);
    w.u32(u32_of(model.bits(), "bits")?);
    w.u64(model.seed());
    w.u64(hyperplane_checksum(model));
    w.persist(path)
}

pub fn read_hash_model(path: &Path) -> Result<HashModel> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    r.magic(MAGIC_HASH)?;
    r.version()?;
    let dim = r.dim("dim")?;
    let bits = r.dim("bits")?;
    let seed = r.u64("seed")?;
    let sum_at = r.offset();
    let stored = r.u64("checksum")?;
    r.finish()?;
    let model = fit_hash(dim, bits, seed)?;
    let actual = hyperplane_checksum(&model);
    if stored != actual {
        return Err(Error::format(
            sum_at,
            format!(
                "hyperplane checksum mismatch: stored {stored:#018x}, regenerated {actual:#018x}"
            ),
        ));
    }
    Ok(model)
}

// ------------------------------------------------------------------ index

pub fn write_index(index: &RetrievalIndex, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC_INDEX);
    w.u32(u32_of(index.bits(), "bits")?);
    w.u32(u32_of(index.len(), "entry count")?);
    for entry in index.entries() {
        w.u64(entry.id);
        w.u32(entry.label);
        for word in entry.code.words() {
            w.u64(*word);
        }
    }
    w.persist(path)
}

pub fn read_index(path: &Path) -> Result<RetrievalIndex> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    r.magic(MAGIC_INDEX)?;
    r.version()?;
    let bits = r.dim("bits")?;
    let n = r.u32("entry count")? as usize;
    if n == 0 {
        return Err(Error::format(12, "index must hold at least one entry"));
    }
    let words_per_code = bits.div_ceil(64);
    let mut entries = Vec::with_capacity(n);
    let mut last_id: Option<u64> = None;
    for _ in 0..n {
        let id_at = r.offset();
        let id = r.u64("entry id")?;
        match last_id {
            Some(prev) if prev == id => {
                return Err(Error::format(id_at, format!("duplicate id {id}")));
            }
            Some(prev) if prev > id => {
                return Err(Error::format(
                    id_at,
                    format!("ids not in ascending order: {id} after {prev}"),
                ));
            }
            _ => last_id = Some(id),
        }
        let label = r.u32("entry label")?;
        let code_at = r.offset();
        let mut words = Vec::with_capacity(words_per_code);
        for _ in 0..words_per_code {
            words.push(r.u64("code word")?);
        }
        let code = BinaryCode::from_words(bits, words)
            .map_err(|e| Error::format(code_at, format!("bad code: {e}")))?;
        entries.push(IndexEntry { id, label, code });
    }
    r.finish()?;
    crate::index::build_index(
        entries
            .into_iter()
            .map(|e| (e.id, e.label, e.code))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::mpca;
    use crate::pca::{self, Selection};
    use crate::rng::Rng;
    use crate::synth::gen_synthetic;

    fn tempdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    fn corrupt(path: &Path, offset: usize, byte: u8) {
        let mut buf = std::fs::read(path).unwrap();
        buf[offset] = byte;
        std::fs::write(path, buf).unwrap();
    }

    #[test]
    fn features_round_trip_is_bit_identical() {
        let dir = tempdir();
        let a = dir.path().join("a.mpft");
        let b = dir.path().join("b.mpft");
        let ds = gen_synthetic(2, 2, (2, 3, 4), 0.5, 8).unwrap();
        write_features(&ds, &a).unwrap();
        let back = read_features(&a).unwrap();
        write_features(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(back.len(), ds.len());
        for ((ia, la, ta), (ib, lb, tb)) in ds.items().iter().zip(back.items()) {
            assert_eq!((ia, la), (ib, lb));
            assert_eq!(ta.data(), tb.data());
        }
    }

    #[test]
    fn features_file_size_arithmetic() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 3, (2, 2, 2), 0.1, 3).unwrap();
        write_features(&ds, &path).unwrap();
        let expect = 24 + 6 * (12 + 4 * 8);
        assert_eq!(std::fs::read(&path).unwrap().len(), expect);
        // production-scale payload arithmetic: N = 80000 of (6,6,256)
        let payload: u64 = 80_000 * (12 + 4 * 6 * 6 * 256);
        assert_eq!(payload, 80_000 * (12 + 4 * 9216));
    }

    #[test]
    fn bad_magic_is_offset_zero() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        write_features(&ds, &path).unwrap();
        corrupt(&path, 0, b'X');
        match read_features(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_version_is_offset_four() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        write_features(&ds, &path).unwrap();
        corrupt(&path, 4, 9);
        match read_features(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_reports_first_missing_byte() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        write_features(&ds, &path).unwrap();
        let full = std::fs::read(&path).unwrap();
        for cut in [2, 7, 20, full.len() - 3] {
            std::fs::write(&path, &full[..cut]).unwrap();
            match read_features(&path) {
                Err(Error::Format { offset, .. }) => assert_eq!(offset, cut as u64),
                other => panic!("cut {cut}: expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        write_features(&ds, &path).unwrap();
        let mut buf = std::fs::read(&path).unwrap();
        let len = buf.len() as u64;
        buf.push(0);
        std::fs::write(&path, buf).unwrap();
        match read_features(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, len),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_feature_id_names_offset_of_second_record() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        write_features(&ds, &path).unwrap();
        // second record's id field: header 24 + one record (12 + 8) = 44
        let mut buf = std::fs::read(&path).unwrap();
        buf[44..52].copy_from_slice(&0u64.to_le_bytes());
        std::fs::write(&path, buf).unwrap();
        match read_features(&path) {
            Err(Error::Format { offset, reason }) => {
                assert_eq!(offset, 44);
                assert!(reason.contains("duplicate id 0"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn mpca_model_round_trip() {
        let dir = tempdir();
        let a = dir.path().join("a.mpcm");
        let b = dir.path().join("b.mpcm");
        let ds = gen_synthetic(2, 5, (3, 2, 4), 0.4, 12).unwrap();
        let model = mpca::fit(&ds.tensors(), (2, 2, 3)).unwrap();
        write_mpca_model(&model, &a).unwrap();
        let back = read_mpca_model(&a).unwrap();
        write_mpca_model(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(back.in_dims(), model.in_dims());
        assert_eq!(back.out_dims(), model.out_dims());
        assert_eq!(back.mean().data(), model.mean().data());
        for mode in Mode::ALL {
            assert_eq!(back.projection(mode).data(), model.projection(mode).data());
            assert_eq!(back.spectrum(mode).values(), model.spectrum(mode).values());
        }
    }

    #[test]
    fn pca_model_round_trip() {
        let dir = tempdir();
        let a = dir.path().join("a.pcam");
        let b = dir.path().join("b.pcam");
        let mut rng = Rng::from_seed(77);
        let vectors: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.next_normal()).collect())
            .collect();
        let model = pca::fit_pca(&vectors, Selection::OutDim(3)).unwrap();
        write_pca_model(&model, &a).unwrap();
        let back = read_pca_model(&a).unwrap();
        write_pca_model(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(back.mean(), model.mean());
        assert_eq!(back.components().data(), model.components().data());
        assert_eq!(back.spectrum().values(), model.spectrum().values());
    }

    #[test]
    fn hash_model_round_trip_regenerates_hyperplanes() {
        let dir = tempdir();
        let path = dir.path().join("m.lsh1");
        let model = fit_hash(10, 96, 0xDEADBEEF).unwrap();
        write_hash_model(&model, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 32);
        let back = read_hash_model(&path).unwrap();
        assert_eq!(back.hyperplanes().data(), model.hyperplanes().data());
        assert_eq!((back.dim(), back.bits(), back.seed()), (10, 96, 0xDEADBEEF));
    }

    #[test]
    fn hash_checksum_mismatch_is_detected() {
        let dir = tempdir();
        let path = dir.path().join("m.lsh1");
        let model = fit_hash(4, 64, 5).unwrap();
        write_hash_model(&model, &path).unwrap();
        corrupt(&path, 24, 0xAA); // inside the checksum field
        match read_hash_model(&path) {
            Err(Error::Format { offset, reason }) => {
                assert_eq!(offset, 24);
                assert!(reason.contains("checksum"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn index_round_trip_and_size() {
        let dir = tempdir();
        let a = dir.path().join("a.mpix");
        let b = dir.path().join("b.mpix");
        let mut rng = Rng::from_seed(88);
        let items: Vec<_> = (0..100u64)
            .map(|id| {
                let code =
                    BinaryCode::from_words(128, vec![rng.next_u64(), rng.next_u64()]).unwrap();
                (id, (id % 3) as u32, code)
            })
            .collect();
        let index = build_index(items).unwrap();
        write_index(&index, &a).unwrap();
        assert_eq!(std::fs::read(&a).unwrap().len(), 16 + 100 * (8 + 4 + 16));
        let back = read_index(&a).unwrap();
        write_index(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(back, index);
    }

    #[test]
    fn index_rejects_disorder_and_duplicates() {
        let dir = tempdir();
        let path = dir.path().join("x.mpix");
        let items = vec![
            (0u64, 0u32, BinaryCode::from_words(64, vec![1]).unwrap()),
            (1, 0, BinaryCode::from_words(64, vec![2]).unwrap()),
        ];
        write_index(&build_index(items).unwrap(), &path).unwrap();
        // second record id field sits at 16 + (8 + 4 + 8) = 36
        let mut buf = std::fs::read(&path).unwrap();
        buf[36..44].copy_from_slice(&0u64.to_le_bytes());
        std::fs::write(&path, buf.clone()).unwrap();
        match read_index(&path) {
            Err(Error::Format { offset, reason }) => {
                assert_eq!(offset, 36);
                assert!(reason.contains("duplicate"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn index_rejects_non_canonical_codes() {
        let dir = tempdir();
        let path = dir.path().join("x.mpix");
        let items = vec![(0u64, 0u32, BinaryCode::from_words(4, vec![0b1010]).unwrap())];
        write_index(&build_index(items).unwrap(), &path).unwrap();
        // code word at 16 + 12 = 28; set an unused high bit
        corrupt(&path, 28 + 7, 0x80);
        match read_index(&path) {
            Err(Error::Format { offset, reason }) => {
                assert_eq!(offset, 28);
                assert!(reason.contains("canonical"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn writes_replace_existing_files_atomically() {
        let dir = tempdir();
        let path = dir.path().join("x.mpft");
        let ds1 = gen_synthetic(2, 1, (1, 1, 2), 0.0, 0).unwrap();
        let ds2 = gen_synthetic(2, 2, (1, 1, 2), 0.0, 1).unwrap();
        write_features(&ds1, &path).unwrap();
        write_features(&ds2, &path).unwrap();
        assert_eq!(read_features(&path).unwrap().len(), 4);
        // no stray temp files left behind
        let count = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(count, 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_features(Path::new("/nonexistent/x.mpft")),
            Err(Error::Io(_))
        ));
    }
}
