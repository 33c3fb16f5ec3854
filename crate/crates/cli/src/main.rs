//! Command-line front end: synthesize datasets, fit reduction models,
//! project, hash, index, and evaluate retrieval — each stage reads and
//! writes the binary formats so pipelines can be scripted piecemeal, or
//! run end to end with the `pipeline` subcommand.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, bad arguments,
//! missing files), 2 on data format or numeric failures.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tenret::eig::Spectrum;
use tenret::hash::{encode_all, fit_hash, BinaryCode};
use tenret::index::{build_index, mean_average_precision, query};
use tenret::io::{
    read_features, read_hash_model, read_index, read_mpca_model, read_pca_model, write_features,
    write_hash_model, write_index, write_mpca_model, write_pca_model,
};
use tenret::mpca::{self, select_dim_for_ccr, select_dims_by_cr};
use tenret::pca::{fit_pca, project_pca, Selection};
use tenret::pipeline::{run_pipeline, DimSpec, Method, PipelineConfig};
use tenret::synth::{gen_synthetic, FeatureDataset};
use tenret::tensor::{vectorize, Matrix, Mode, Tensor3};

#[derive(Parser)]
#[command(
    name = "tenret",
    version,
    about = "Tensor feature compression and hashed retrieval",
    after_help = "Exit codes: 0 success, 1 usage error, 2 format/numeric error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled feature dataset
    Gen {
        /// Number of classes
        #[arg(long, default_value_t = 5)]
        classes: usize,
        /// Items per class
        #[arg(long = "per-class", default_value_t = 200)]
        per_class: usize,
        /// Tensor dims as d1,d2,d3
        #[arg(long, value_parser = parse_dims)]
        dims: (usize, usize, usize),
        /// Within-class noise ratio
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output features file
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a reduction model on a features file
    Fit {
        /// Input features file
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FitMethod::Mpca)]
        method: FitMethod,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a features file through a fitted model
    Project {
        /// Model file (MPCM or PCAM)
        #[arg(long)]
        model: PathBuf,
        /// Input features file
        #[arg(long)]
        input: PathBuf,
        /// Output (reduced) features file
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a random-hyperplane hash model
    HashFit {
        /// Input vector dimension
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        dim: Option<usize>,
        /// Infer the dimension from a features file instead
        #[arg(long)]
        input: Option<PathBuf>,
        /// Code length in bits
        #[arg(long, default_value_t = 128)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output hash model file
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a features file into a binary-code index
    Encode {
        /// Hash model file
        #[arg(long)]
        hash: PathBuf,
        /// Input (reduced) features file
        #[arg(long)]
        input: PathBuf,
        /// Output index file
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge and canonicalize one or more index files
    Index {
        /// Input index files
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Output index file
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank neighbours of an indexed item by Hamming distance
    Query {
        /// Index file
        #[arg(long)]
        index: PathBuf,
        /// Query item id (must be present in the index; excluded from results)
        #[arg(long)]
        id: u64,
        /// Number of results
        #[arg(long, default_value_t = 10)]
        topk: usize,
    },
    /// Evaluate mean average precision with every item as a query
    Eval {
        /// Index file
        #[arg(long)]
        index: PathBuf,
        /// Also write the key=value report to this path
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full reduce-hash-index-evaluate pipeline
    Pipeline {
        /// Input features file
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = PipeMethod::Mpca)]
        method: PipeMethod,
        /// Common per-mode compression rate in (0, 1]
        #[arg(long, conflicts_with = "dims", required_unless_present = "dims")]
        cr: Option<f64>,
        /// Explicit output dims as d1,d2,d3
        #[arg(long, value_parser = parse_dims)]
        dims: Option<(usize, usize, usize)>,
        #[arg(long, default_value_t = 128)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional ranking cutoff for evaluation
        #[arg(long)]
        topk: Option<usize>,
        /// Also write the key=value report to this path
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Mpca,
    Pca,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipeMethod {
    Mpca,
    Pca,
    Both,
}

/// Exactly one of --cr / --dims / --target-ccr.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct ReductionArgs {
    /// Common per-mode compression rate in (0, 1]
    #[arg(long)]
    cr: Option<f64>,
    /// Explicit output dims as d1,d2,d3
    #[arg(long, value_parser = parse_dims)]
    dims: Option<(usize, usize, usize)>,
    /// Keep the smallest dims whose cumulative contribution reaches this
    #[arg(long = "target-ccr")]
    target_ccr: Option<f64>,
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected d1,d2,d3, got {s:?}"));
    }
    let mut d = [0usize; 3];
    for (slot, part) in d.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad dimension {part:?}: {e}"))?;
    }
    Ok((d[0], d[1], d[2]))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here with a zero exit code
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Format and numeric failures are data errors (2); everything else is a
/// usage error (1).
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tenret::Error>() {
            return match e {
                tenret::Error::Format { .. } | tenret::Error::Numeric(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            classes,
            per_class,
            dims,
            noise,
            seed,
            out,
        } => {
            let ds = gen_synthetic(classes, per_class, dims, noise, seed)?;
            write_features(&ds, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} items of dims {}x{}x{} to {}",
                ds.len(),
                dims.0,
                dims.1,
                dims.2,
                out.display()
            );
            Ok(())
        }
        Command::Fit {
            input,
            method,
            reduction,
            out,
        } => {
            let ds =
                read_features(&input).with_context(|| format!("reading {}", input.display()))?;
            match method {
                FitMethod::Mpca => fit_mpca_cmd(&ds, &reduction, &out),
                FitMethod::Pca => fit_pca_cmd(&ds, &reduction, &out),
            }
        }
        Command::Project { model, input, out } => project_cmd(&model, &input, &out),
        Command::HashFit {
            dim,
            input,
            bits,
            seed,
            out,
        } => {
            let dim = match (dim, input) {
                (Some(d), _) => d,
                (None, Some(path)) => {
                    let ds = read_features(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let (i1, i2, i3) = ds.dims();
                    i1 * i2 * i3
                }
                (None, None) => unreachable!("clap enforces one of --dim/--input"),
            };
            let model = fit_hash(dim, bits, seed)?;
            write_hash_model(&model, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {}-bit hash model over dim {dim} to {}",
                bits,
                out.display()
            );
            Ok(())
        }
        Command::Encode { hash, input, out } => {
            let model =
                read_hash_model(&hash).with_context(|| format!("reading {}", hash.display()))?;
            let ds =
                read_features(&input).with_context(|| format!("reading {}", input.display()))?;
            let vectors: Vec<Vec<f64>> = ds.items().iter().map(|(_, _, t)| vectorize(t)).collect();
            let codes = encode_all(&model, &vectors)?;
            let items: Vec<(u64, u32, BinaryCode)> = ds
                .items()
                .iter()
                .zip(codes)
                .map(|((id, label, _), code)| (*id, *label, code))
                .collect();
            let index = build_index(items)?;
            write_index(&index, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("encoded {} items into {}", index.len(), out.display());
            Ok(())
        }
        Command::Index { input, out } => {
            let mut items: Vec<(u64, u32, BinaryCode)> = Vec::new();
            for path in &input {
                let index =
                    read_index(path).with_context(|| format!("reading {}", path.display()))?;
                items.extend(
                    index
                        .entries()
                        .iter()
                        .map(|e| (e.id, e.label, e.code.clone())),
                );
            }
            let index = build_index(items)?;
            write_index(&index, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("indexed {} items into {}", index.len(), out.display());
            Ok(())
        }
        Command::Query { index, id, topk } => {
            let idx = read_index(&index).with_context(|| format!("reading {}", index.display()))?;
            let probe = idx
                .entries()
                .iter()
                .find(|e| e.id == id)
                .ok_or_else(|| anyhow!("id {id} is not in the index"))?
                .code
                .clone();
            let hits = query(&idx, &probe, Some(topk.saturating_add(1)))?;
            let mut rank = 0;
            println!("rank\tid\tlabel\tdistance");
            for hit in hits.iter().filter(|h| h.id != id).take(topk) {
                rank += 1;
                println!("{rank}\t{}\t{}\t{}", hit.id, hit.label, hit.distance);
            }
            Ok(())
        }
        Command::Eval { index, report } => {
            let idx = read_index(&index).with_context(|| format!("reading {}", index.display()))?;
            let queries: Vec<(u64, u32, BinaryCode)> = idx
                .entries()
                .iter()
                .map(|e| (e.id, e.label, e.code.clone()))
                .collect();
            let start = Instant::now();
            let (map, zero_relevant) = mean_average_precision(&idx, &queries)?;
            let query_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut text = String::new();
            let _ = writeln!(text, "items={}", idx.len());
            let _ = writeln!(text, "bits={}", idx.bits());
            let _ = writeln!(text, "map={map}");
            let _ = writeln!(text, "zero_relevant={zero_relevant}");
            let _ = writeln!(text, "query_ms={query_ms:.3}");
            print!("{text}");
            if let Some(path) = report {
                write_text(&text, &path).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Pipeline {
            input,
            method,
            cr,
            dims,
            bits,
            seed,
            topk,
            report,
        } => {
            let ds =
                read_features(&input).with_context(|| format!("reading {}", input.display()))?;
            let reduction = match (cr, dims) {
                (Some(cr), None) => DimSpec::Cr(cr),
                (None, Some(d)) => DimSpec::Dims(d),
                _ => unreachable!("clap enforces exactly one of --cr/--dims"),
            };
            let config = PipelineConfig {
                reduction,
                bits,
                seed,
                method: match method {
                    PipeMethod::Mpca => Method::Mpca,
                    PipeMethod::Pca => Method::Pca,
                    PipeMethod::Both => Method::Both,
                },
                topk,
            };
            let result = run_pipeline(&config, &ds)?;
            let text = result.text();
            print!("{text}");
            if let Some(path) = report {
                write_text(&text, &path).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}

fn fit_mpca_cmd(ds: &FeatureDataset, reduction: &ReductionArgs, out: &Path) -> Result<()> {
    let in_dims = ds.dims();
    let tensors = ds.tensors();
    let model = match (reduction.cr, reduction.dims, reduction.target_ccr) {
        (Some(cr), None, None) => {
            let out_dims = select_dims_by_cr(in_dims, cr)?;
            mpca::fit(&tensors, out_dims)?
        }
        (None, Some(out_dims), None) => mpca::fit(&tensors, out_dims)?,
        (None, None, Some(target)) => {
            // fit at full dims first; the spectra then pick the smallest
            // per-mode dims that reach the target contribution
            let full = mpca::fit(&tensors, in_dims)?;
            let out_dims = (
                select_dim_for_ccr(full.spectrum(Mode::One), target)?,
                select_dim_for_ccr(full.spectrum(Mode::Two), target)?,
                select_dim_for_ccr(full.spectrum(Mode::Three), target)?,
            );
            truncate_mpca(&full, out_dims)?
        }
        _ => unreachable!("clap enforces exactly one reduction flag"),
    };
    write_mpca_model(&model, out).with_context(|| format!("writing {}", out.display()))?;
    let d = model.out_dims();
    println!(
        "fit mpca model {}x{}x{} -> {}x{}x{} into {}",
        in_dims.0,
        in_dims.1,
        in_dims.2,
        d.0,
        d.1,
        d.2,
        out.display()
    );
    Ok(())
}

fn truncate_mpca(
    full: &tenret::mpca::MpcaModel,
    out_dims: (usize, usize, usize),
) -> Result<tenret::mpca::MpcaModel> {
    let mut projections = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    for (mode, keep) in Mode::ALL.iter().zip([out_dims.0, out_dims.1, out_dims.2]) {
        projections.push(truncate_cols(full.projection(*mode), keep)?);
        spectra.push(Spectrum::new(full.spectrum(*mode).values().to_vec())?);
    }
    Ok(tenret::mpca::MpcaModel::from_parts(
        out_dims,
        full.mean().clone(),
        projections.try_into().expect("three modes"),
        spectra.try_into().expect("three modes"),
    )?)
}

fn truncate_cols(m: &Matrix, keep: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(m.rows() * keep);
    for r in 0..m.rows() {
        data.extend_from_slice(&m.row(r)[..keep]);
    }
    Ok(Matrix::from_vec(m.rows(), keep, data)?)
}

fn fit_pca_cmd(ds: &FeatureDataset, reduction: &ReductionArgs, out: &Path) -> Result<()> {
    let (i1, i2, i3) = ds.dims();
    let in_dim = i1 * i2 * i3;
    let selection = match (reduction.cr, reduction.dims, reduction.target_ccr) {
        (Some(cr), None, None) => {
            if !(cr > 0.0 && cr <= 1.0) {
                bail!("compression rate {cr} outside (0, 1]");
            }
            Selection::OutDim(((cr * in_dim as f64).round() as usize).clamp(1, in_dim))
        }
        (None, Some((d1, d2, d3)), None) => Selection::OutDim(d1 * d2 * d3),
        (None, None, Some(target)) => Selection::TargetCcr(target),
        _ => unreachable!("clap enforces exactly one reduction flag"),
    };
    let vectors: Vec<Vec<f64>> = ds.items().iter().map(|(_, _, t)| vectorize(t)).collect();
    let model = fit_pca(&vectors, selection)?;
    write_pca_model(&model, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "fit pca model {} -> {} into {}",
        model.in_dim(),
        model.out_dim(),
        out.display()
    );
    Ok(())
}

fn project_cmd(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let ds = read_features(input).with_context(|| format!("reading {}", input.display()))?;
    let magic = sniff_magic(model_path)?;
    match &magic {
        b"MPCM" => {
            let model = read_mpca_model(model_path)
                .with_context(|| format!("reading {}", model_path.display()))?;
            let mut items = Vec::with_capacity(ds.len());
            for (id, label, t) in ds.items() {
                items.push((*id, *label, mpca::project(&model, t)?));
            }
            let reduced = FeatureDataset::new(model.out_dims(), items)?;
            write_features(&reduced, out).with_context(|| format!("writing {}", out.display()))?;
        }
        b"PCAM" => {
            let model = read_pca_model(model_path)
                .with_context(|| format!("reading {}", model_path.display()))?;
            let mut items = Vec::with_capacity(ds.len());
            for (id, label, t) in ds.items() {
                let y = project_pca(&model, &vectorize(t))?;
                let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
                items.push((
                    *id,
                    *label,
                    Tensor3::from_vec((model.out_dim(), 1, 1), y32)?,
                ));
            }
            let reduced = FeatureDataset::new((model.out_dim(), 1, 1), items)?;
            write_features(&reduced, out).with_context(|| format!("writing {}", out.display()))?;
        }
        other => bail!(
            "{} is not a reduction model (magic {:?})",
            model_path.display(),
            String::from_utf8_lossy(other)
        ),
    }
    println!("projected {} items into {}", ds.len(), out.display());
    Ok(())
}

fn sniff_magic(path: &Path) -> Result<[u8; 4]> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() < 4 {
        bail!("{} is too short to hold a file header", path.display());
    }
    Ok([bytes[0], bytes[1], bytes[2], bytes[3]])
}

/// Atomic text write: temp file in the target directory, then rename.
fn write_text(text: &str, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
