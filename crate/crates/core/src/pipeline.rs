//! End-to-end pipeline: reduce → hash → index → evaluate.
//!
//! The MPCA arm projects tensors, vectorizes, hashes, and evaluates MAP
//! with every item as a query (self-excluded). The PCA arm does the same
//! on vectorized inputs. `Method::Both` runs MPCA first, then gives PCA
//! the MPCA run's weighted CCR as its target so the two arms keep a
//! comparable amount of spectral energy — the report then carries both
//! MAP numbers side by side.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::hash::{encode_all, fit_hash};
use crate::index::{average_precision, build_index, mean_average_precision, query, RetrievalIndex};
use crate::mpca::{self, ccr, select_dims_by_cr, weighted_ccr};
use crate::par;
use crate::pca::{fit_pca, project_pca, Selection};
use crate::synth::FeatureDataset;
use crate::tensor::{vectorize, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mpca,
    Pca,
    Both,
}

/// Either a common per-mode compression rate or explicit output dims.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimSpec {
    Cr(f64),
    Dims((usize, usize, usize)),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub reduction: DimSpec,
    pub bits: usize,
    pub seed: u64,
    pub method: Method,
    /// Optional ranking cutoff for evaluation; MAP is over the full
    /// ranking when unset.
    pub topk: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MpcaArmReport {
    pub out_dims: (usize, usize, usize),
    pub ccrs: (f64, f64, f64),
    pub ccr_w: f64,
    pub map: f64,
    pub zero_relevant: usize,
    pub fit_ms: f64,
    pub query_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PcaArmReport {
    pub out_dim: usize,
    pub ccr: f64,
    pub map: f64,
    pub zero_relevant: usize,
    pub fit_ms: f64,
    pub query_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub items: usize,
    pub in_dims: (usize, usize, usize),
    pub bits: usize,
    pub seed: u64,
    pub topk: Option<usize>,
    pub mpca: Option<MpcaArmReport>,
    pub pca: Option<PcaArmReport>,
}

impl Report {
    pub fn method(&self) -> Method {
        match (&self.mpca, &self.pca) {
            (Some(_), Some(_)) => Method::Both,
            (Some(_), None) => Method::Mpca,
            _ => Method::Pca,
        }
    }

    /// Machine-readable key-value pairs, full float precision.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        push(
            "method",
            match self.method() {
                Method::Mpca => "mpca",
                Method::Pca => "pca",
                Method::Both => "both",
            }
            .to_string(),
        );
        push("items", self.items.to_string());
        push(
            "in_dims",
            format!("{}x{}x{}", self.in_dims.0, self.in_dims.1, self.in_dims.2),
        );
        push("bits", self.bits.to_string());
        push("seed", self.seed.to_string());
        if let Some(k) = self.topk {
            push("topk", k.to_string());
        }
        match (&self.mpca, &self.pca) {
            (Some(m), pca) => {
                push(
                    "dims",
                    format!("{}x{}x{}", m.out_dims.0, m.out_dims.1, m.out_dims.2),
                );
                push("ccr1", format!("{}", m.ccrs.0));
                push("ccr2", format!("{}", m.ccrs.1));
                push("ccr3", format!("{}", m.ccrs.2));
                push("ccr_w", format!("{}", m.ccr_w));
                push("map", format!("{}", m.map));
                push("zero_relevant", m.zero_relevant.to_string());
                push("fit_ms", format!("{:.3}", m.fit_ms));
                push("query_ms", format!("{:.3}", m.query_ms));
                if let Some(p) = pca {
                    push("pca_dims", p.out_dim.to_string());
                    push("pca_ccr", format!("{}", p.ccr));
                    push("pca_map", format!("{}", p.map));
                    push("pca_zero_relevant", p.zero_relevant.to_string());
                    push("pca_fit_ms", format!("{:.3}", p.fit_ms));
                    push("pca_query_ms", format!("{:.3}", p.query_ms));
                }
            }
            (None, Some(p)) => {
                push("dims", p.out_dim.to_string());
                push("ccr_w", format!("{}", p.ccr));
                push("map", format!("{}", p.map));
                push("zero_relevant", p.zero_relevant.to_string());
                push("fit_ms", format!("{:.3}", p.fit_ms));
                push("query_ms", format!("{:.3}", p.query_ms));
            }
            (None, None) => unreachable!("a report always has at least one arm"),
        }
        kv
    }

    /// The kv pairs that must be identical across runs and thread counts —
    /// everything except wall-clock timings.
    pub fn deterministic_kv(&self) -> Vec<(String, String)> {
        self.to_kv()
            .into_iter()
            .filter(|(k, _)| !k.ends_with("_ms"))
            .collect()
    }

    /// Human-readable rendering.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_kv() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

fn in_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Shape(m) => Error::Shape(format!("{stage}: {m}")),
        Error::Argument(m) => Error::Argument(format!("{stage}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{stage}: {m}")),
        Error::Capacity(m) => Error::Capacity(format!("{stage}: {m}")),
        Error::Format { offset, reason } => Error::Format {
            offset,
            reason: format!("{stage}: {reason}"),
        },
        Error::Io(e) => Error::Io(e),
    }
}

/// MAP with an optional ranking cutoff. `None` is the plain full-ranking
/// MAP from the retrieval module.
fn map_with_topk(
    index: &RetrievalIndex,
    queries: &[(u64, u32, crate::hash::BinaryCode)],
    topk: Option<usize>,
) -> Result<(f64, usize)> {
    match topk {
        None => mean_average_precision(index, queries),
        Some(k) => {
            if queries.is_empty() {
                return Err(Error::argument("MAP over an empty query set"));
            }
            let aps = par::ordered_map(queries, |(id, label, code)| -> Result<(f64, bool)> {
                // +1 so a ranking that contains the query itself still
                // yields k candidates after self-exclusion
                let ranking = query(index, code, Some(k + 1))?;
                let flags: Vec<bool> = ranking
                    .iter()
                    .filter(|hit| hit.id != *id)
                    .take(k)
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
    }
}

fn run_mpca_arm(config: &PipelineConfig, dataset: &FeatureDataset) -> Result<MpcaArmReport> {
    let in_dims = dataset.dims();
    let out_dims = match config.reduction {
        DimSpec::Cr(cr) => {
            select_dims_by_cr(in_dims, cr).map_err(|e| in_stage("select-dims", e))?
        }
        DimSpec::Dims(d) => d,
    };

    let fit_start = Instant::now();
    let tensors = dataset.tensors();
    let model = mpca::fit(&tensors, out_dims).map_err(|e| in_stage("mpca-fit", e))?;
    let ccrs = (
        ccr(model.spectrum(Mode::One), out_dims.0).map_err(|e| in_stage("mpca-fit", e))?,
        ccr(model.spectrum(Mode::Two), out_dims.1).map_err(|e| in_stage("mpca-fit", e))?,
        ccr(model.spectrum(Mode::Three), out_dims.2).map_err(|e| in_stage("mpca-fit", e))?,
    );
    let ccr_w = weighted_ccr(ccrs, in_dims);

    let vectors: Vec<Vec<f64>> = par::ordered_map(&tensors, |t| {
        mpca::project(&model, t).map(|y| vectorize(&y))
    })
    .into_iter()
    .collect::<Result<_>>()
    .map_err(|e| in_stage("project", e))?;

    let hash_dim = out_dims.0 * out_dims.1 * out_dims.2;
    let hash = fit_hash(hash_dim, config.bits, config.seed).map_err(|e| in_stage("hash-fit", e))?;
    let codes = encode_all(&hash, &vectors).map_err(|e| in_stage("encode", e))?;

    let items: Vec<(u64, u32, crate::hash::BinaryCode)> = dataset
        .items()
        .iter()
        .zip(&codes)
        .map(|((id, label, _), code)| (*id, *label, code.clone()))
        .collect();
    let index = build_index(items.clone()).map_err(|e| in_stage("index-build", e))?;
    let fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

    let query_start = Instant::now();
    let (map, zero_relevant) =
        map_with_topk(&index, &items, config.topk).map_err(|e| in_stage("evaluate", e))?;
    let query_ms = query_start.elapsed().as_secs_f64() * 1e3;

    Ok(MpcaArmReport {
        out_dims,
        ccrs,
        ccr_w,
        map,
        zero_relevant,
        fit_ms,
        query_ms,
    })
}

fn run_pca_arm(
    config: &PipelineConfig,
    dataset: &FeatureDataset,
    selection: Selection,
) -> Result<PcaArmReport> {
    let fit_start = Instant::now();
    let vectors: Vec<Vec<f64>> = par::ordered_map(dataset.items(), |(_, _, t)| vectorize(t));
    let model = fit_pca(&vectors, selection).map_err(|e| in_stage("pca-fit", e))?;
    let achieved = ccr(model.spectrum(), model.out_dim()).map_err(|e| in_stage("pca-fit", e))?;

    let projected: Vec<Vec<f64>> = par::ordered_map(&vectors, |v| project_pca(&model, v))
        .into_iter()
        .collect::<Result<_>>()
        .map_err(|e| in_stage("project", e))?;

    let hash =
        fit_hash(model.out_dim(), config.bits, config.seed).map_err(|e| in_stage("hash-fit", e))?;
    let codes = encode_all(&hash, &projected).map_err(|e| in_stage("encode", e))?;

    let items: Vec<(u64, u32, crate::hash::BinaryCode)> = dataset
        .items()
        .iter()
        .zip(&codes)
        .map(|((id, label, _), code)| (*id, *label, code.clone()))
        .collect();
    let index = build_index(items.clone()).map_err(|e| in_stage("index-build", e))?;
    let fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

    let query_start = Instant::now();
    let (map, zero_relevant) =
        map_with_topk(&index, &items, config.topk).map_err(|e| in_stage("evaluate", e))?;
    let query_ms = query_start.elapsed().as_secs_f64() * 1e3;

    Ok(PcaArmReport {
        out_dim: model.out_dim(),
        ccr: achieved,
        map,
        zero_relevant,
        fit_ms,
        query_ms,
    })
}

/// Runs the configured pipeline over the dataset and reports CCRs,
/// selected dims, and MAP. Deterministic for a given (config, dataset)
/// apart from the `_ms` timing entries.
pub fn run_pipeline(config: &PipelineConfig, dataset: &FeatureDataset) -> Result<Report> {
    if config.bits == 0 {
        return Err(Error::argument("bits must be at least 1"));
    }
    if let DimSpec::Cr(cr) = config.reduction {
        if !(cr > 0.0 && cr <= 1.0) {
            return Err(in_stage(
                "select-dims",
                Error::argument(format!("compression rate {cr} outside (0, 1]")),
            ));
        }
    }
    let mut report = Report {
        items: dataset.len(),
        in_dims: dataset.dims(),
        bits: config.bits,
        seed: config.seed,
        topk: config.topk,
        mpca: None,
        pca: None,
    };
    match config.method {
        Method::Mpca => {
            report.mpca = Some(run_mpca_arm(config, dataset)?);
        }
        Method::Pca => {
            let in_dim = dataset.dims().0 * dataset.dims().1 * dataset.dims().2;
            let selection = match config.reduction {
                DimSpec::Cr(cr) => {
                    let d = (cr * in_dim as f64).round() as usize;
                    Selection::OutDim(d.clamp(1, in_dim))
                }
                DimSpec::Dims((d1, d2, d3)) => Selection::OutDim(d1 * d2 * d3),
            };
            report.pca = Some(run_pca_arm(config, dataset, selection)?);
        }
        Method::Both => {
            let mpca_arm = run_mpca_arm(config, dataset)?;
            let target = Selection::TargetCcr(mpca_arm.ccr_w);
            report.mpca = Some(mpca_arm);
            report.pca = Some(run_pca_arm(config, dataset, target)?);
        }
    }
    Ok(report)
}
