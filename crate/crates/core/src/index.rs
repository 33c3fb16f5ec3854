//! Exhaustive Hamming-distance retrieval and MAP evaluation.
//!
//! Rankings are totally ordered by (distance, id), so every query result
//! is reproducible regardless of thread count. Queries are linear scans —
//! at the code lengths involved, XOR + popcount over the whole index is
//! fast enough that no bucketing structure is warranted.

use crate::error::{Error, Result};
use crate::hash::{hamming, BinaryCode};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: u64,
    pub label: u32,
    pub code: BinaryCode,
}

/// Code database in canonical order (ascending id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalIndex {
    bits: usize,
    entries: Vec<IndexEntry>,
}

impl RetrievalIndex {
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One row of a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedHit {
    pub id: u64,
    pub label: u32,
    pub distance: u32,
}

/// Builds the canonical index: entries sorted by id, ids unique, one code
/// length throughout.
pub fn build_index(items: Vec<(u64, u32, BinaryCode)>) -> Result<RetrievalIndex> {
    let first = items
        .first()
        .ok_or_else(|| Error::argument("cannot build an index from no items"))?;
    let bits = first.2.bits();
    let mut entries: Vec<IndexEntry> = Vec::with_capacity(items.len());
    for (id, label, code) in items {
        if code.bits() != bits {
            return Err(Error::shape(format!(
                "mixed code lengths: {} and {bits} bits",
                code.bits()
            )));
        }
        entries.push(IndexEntry { id, label, code });
    }
    entries.sort_by_key(|e| e.id);
    for w in entries.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::argument(format!("duplicate id {}", w[0].id)));
        }
    }
    Ok(RetrievalIndex { bits, entries })
}

fn rank(index: &RetrievalIndex, distances: Vec<u32>, k: Option<usize>) -> Vec<RankedHit> {
    let mut hits: Vec<RankedHit> = index
        .entries
        .iter()
        .zip(distances)
        .map(|(e, distance)| RankedHit {
            id: e.id,
            label: e.label,
            distance,
        })
        .collect();
    hits.sort_unstable_by_key(|h| (h.distance, h.id));
    if let Some(k) = k {
        hits.truncate(k);
    }
    hits
}

/// Exhaustive scan ranked by (distance, id), truncated to `k` if given.
pub fn query(
    index: &RetrievalIndex,
    code: &BinaryCode,
    k: Option<usize>,
) -> Result<Vec<RankedHit>> {
    if code.bits() != index.bits {
        return Err(Error::shape(format!(
            "query code has {} bits, index stores {}",
            code.bits(),
            index.bits
        )));
    }
    let distances = par::ordered_map(&index.entries, |e| {
        hamming(&e.code, code).expect("index enforces uniform bit length")
    });
    Ok(rank(index, distances, k))
}

/// Sequential twin of [`query`]; used for benchmarks and the
/// single-threaded throughput check.
pub fn query_seq(
    index: &RetrievalIndex,
    code: &BinaryCode,
    k: Option<usize>,
) -> Result<Vec<RankedHit>> {
    if code.bits() != index.bits {
        return Err(Error::shape(format!(
            "query code has {} bits, index stores {}",
            code.bits(),
            index.bits
        )));
    }
    let distances = par::ordered_map_seq(&index.entries, |e| {
        hamming(&e.code, code).expect("index enforces uniform bit length")
    });
    Ok(rank(index, distances, k))
}

/// Average precision over a relevance-flagged ranking, with a flag that is
/// set when the ranking holds no relevant item at all (AP is then 0 so
/// means stay total).
pub fn average_precision(flags: &[bool]) -> (f64, bool) {
    let relevant = flags.iter().filter(|&&f| f).count();
    if relevant == 0 {
        return (0.0, true);
    }
    let mut hits = 0u64;
    let mut sum = 0.0f64;
    for (pos, &flag) in flags.iter().enumerate() {
        if flag {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    (sum / relevant as f64, false)
}

/// MAP over the queries against the full index. Each query's own id is
/// excluded from its ranking; relevance is label equality. Returns the
/// mean AP and how many queries had no relevant entries.
pub fn mean_average_precision(
    index: &RetrievalIndex,
    queries: &[(u64, u32, BinaryCode)],
) -> Result<(f64, usize)> {
    if queries.is_empty() {
        return Err(Error::argument("MAP over an empty query set"));
    }
    let aps = par::ordered_map(queries, |(id, label, code)| -> Result<(f64, bool)> {
        let ranking = query_seq(index, code, None)?;
        let flags: Vec<bool> = ranking
            .iter()
            .filter(|hit| hit.id != *id)
            .map(|hit| hit.label == *label)
            .collect();
        Ok(average_precision(&flags))
    });
    let mut total = 0.0;
    let mut zero_relevant = 0;
    for ap in aps {
        let (ap, warned) = ap?;
        total += ap;
        if warned {
            zero_relevant += 1;
        }
    }
    Ok((total / queries.len() as f64, zero_relevant))
}
