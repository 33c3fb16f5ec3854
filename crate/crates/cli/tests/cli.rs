//! End-to-end tests of the binary: staged workflows, exit codes, and
//! report determinism across thread counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tenret::hash::{encode, fit_hash};
use tenret::index::build_index;
use tenret::io::write_index;
use tenret::rng::Rng;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tenret")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn tenret")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        stderr(out)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// key=value lines without the wall-clock entries.
fn stable_report(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.split('=').next().unwrap_or("").ends_with("_ms"))
        .map(|l| l.to_string())
        .collect()
}

fn gen_features(dir: &Path, name: &str) -> String {
    let out = p(dir, name);
    assert_ok(&run(&[
        "gen",
        "--classes",
        "3",
        "--per-class",
        "15",
        "--dims",
        "3,3,8",
        "--noise",
        "0.2",
        "--seed",
        "11",
        "--out",
        &out,
    ]));
    out
}

#[test]
fn staged_workflow_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");

    assert_ok(&run(&[
        "fit",
        "--input",
        &features,
        "--method",
        "mpca",
        "--cr",
        "0.5",
        "--out",
        &p(dir, "m.mpcm"),
    ]));
    assert_ok(&run(&[
        "project",
        "--model",
        &p(dir, "m.mpcm"),
        "--input",
        &features,
        "--out",
        &p(dir, "r.mpft"),
    ]));
    assert_ok(&run(&[
        "hash-fit",
        "--input",
        &p(dir, "r.mpft"),
        "--bits",
        "64",
        "--seed",
        "5",
        "--out",
        &p(dir, "h.lsh1"),
    ]));
    assert_ok(&run(&[
        "encode",
        "--hash",
        &p(dir, "h.lsh1"),
        "--input",
        &p(dir, "r.mpft"),
        "--out",
        &p(dir, "i.mpix"),
    ]));
    assert_ok(&run(&[
        "index",
        "--input",
        &p(dir, "i.mpix"),
        "--out",
        &p(dir, "all.mpix"),
    ]));

    let q = run(&[
        "query",
        "--index",
        &p(dir, "all.mpix"),
        "--id",
        "3",
        "--topk",
        "5",
    ]);
    assert_ok(&q);
    let lines: Vec<String> = stdout(&q).lines().map(String::from).collect();
    assert_eq!(lines[0], "rank\tid\tlabel\tdistance");
    assert_eq!(lines.len(), 6, "header plus five hits");
    assert!(
        !lines
            .iter()
            .skip(1)
            .any(|l| l.split('\t').nth(1) == Some("3")),
        "query id must be excluded from its own results"
    );

    let e = run(&[
        "eval",
        "--index",
        &p(dir, "all.mpix"),
        "--report",
        &p(dir, "eval.txt"),
    ]);
    assert_ok(&e);
    let text = stdout(&e);
    assert!(text.contains("items=45"), "{text}");
    assert!(text.contains("bits=64"), "{text}");
    assert!(text.contains("map="), "{text}");
    let written = std::fs::read_to_string(p(dir, "eval.txt")).unwrap();
    assert_eq!(written, text, "report file must match stdout");
}

#[test]
fn staged_pca_workflow_matches_pipeline_map() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");

    assert_ok(&run(&[
        "fit",
        "--input",
        &features,
        "--method",
        "pca",
        "--cr",
        "0.25",
        "--out",
        &p(dir, "m.pcam"),
    ]));
    assert_ok(&run(&[
        "project",
        "--model",
        &p(dir, "m.pcam"),
        "--input",
        &features,
        "--out",
        &p(dir, "r.mpft"),
    ]));
    assert_ok(&run(&[
        "hash-fit",
        "--input",
        &p(dir, "r.mpft"),
        "--bits",
        "64",
        "--seed",
        "5",
        "--out",
        &p(dir, "h.lsh1"),
    ]));
    assert_ok(&run(&[
        "encode",
        "--hash",
        &p(dir, "h.lsh1"),
        "--input",
        &p(dir, "r.mpft"),
        "--out",
        &p(dir, "i.mpix"),
    ]));
    let e = run(&["eval", "--index", &p(dir, "i.mpix")]);
    assert_ok(&e);
    let staged_map = stdout(&e)
        .lines()
        .find_map(|l| l.strip_prefix("map=").map(String::from))
        .expect("map line");

    let pl = run(&[
        "pipeline", "--input", &features, "--method", "pca", "--cr", "0.25", "--bits", "64",
        "--seed", "5",
    ]);
    assert_ok(&pl);
    let pipeline_map = stdout(&pl)
        .lines()
        .find_map(|l| l.strip_prefix("map=").map(String::from))
        .expect("map line");
    // the staged path stores projections as f32, so codes may differ on
    // near-zero dots; on well-separated data both reach the same MAP
    assert_eq!(staged_map, "1", "staged MAP");
    assert_eq!(pipeline_map, "1", "pipeline MAP");
}

#[test]
fn pipeline_reports_are_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");
    let args = [
        "pipeline",
        "--input",
        features.as_str(),
        "--method",
        "both",
        "--cr",
        "0.5",
        "--bits",
        "128",
        "--seed",
        "3",
    ];
    let one = run_env(&args, &[("RAYON_NUM_THREADS", "1")]);
    let many = run_env(&args, &[("RAYON_NUM_THREADS", "8")]);
    assert_ok(&one);
    assert_ok(&many);
    assert_eq!(
        stable_report(&stdout(&one)),
        stable_report(&stdout(&many)),
        "reports must not depend on the thread count"
    );
    let again = run_env(&args, &[("RAYON_NUM_THREADS", "8")]);
    assert_eq!(
        stable_report(&stdout(&many)),
        stable_report(&stdout(&again))
    );
}

#[test]
fn fit_with_target_ccr_selects_dims() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");
    let out = run(&[
        "fit",
        "--input",
        &features,
        "--method",
        "mpca",
        "--target-ccr",
        "0.9",
        "--out",
        &p(dir, "m.mpcm"),
    ]);
    assert_ok(&out);
    assert!(
        stdout(&out).contains("fit mpca model 3x3x8 -> "),
        "{}",
        stdout(&out)
    );
    // the written model projects without complaint
    assert_ok(&run(&[
        "project",
        "--model",
        &p(dir, "m.mpcm"),
        "--input",
        &features,
        "--out",
        &p(dir, "r.mpft"),
    ]));
}

#[test]
fn index_merges_disjoint_shards_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let model = fit_hash(4, 16, 9).unwrap();
    let mut rng = Rng::from_seed(1);
    let mut shard = |ids: std::ops::Range<u64>, path: &str| {
        let items: Vec<_> = ids
            .map(|id| {
                let mut v = vec![0.0; 4];
                rng.fill_normal(&mut v);
                (id, (id % 3) as u32, encode(&model, &v).unwrap())
            })
            .collect();
        let index = build_index(items).unwrap();
        write_index(&index, &dir.join(path)).unwrap();
    };
    shard(0..10, "a.mpix");
    shard(10..20, "b.mpix");

    let merged = run(&[
        "index",
        "--input",
        &p(dir, "a.mpix"),
        &p(dir, "b.mpix"),
        "--out",
        &p(dir, "all.mpix"),
    ]);
    assert_ok(&merged);
    assert!(
        stdout(&merged).contains("indexed 20 items"),
        "{}",
        stdout(&merged)
    );

    let dup = run(&[
        "index",
        "--input",
        &p(dir, "a.mpix"),
        &p(dir, "a.mpix"),
        "--out",
        &p(dir, "dup.mpix"),
    ]);
    assert_eq!(code(&dup), 1, "duplicate ids are a usage error");
    assert!(stderr(&dup).contains("duplicate id"), "{}", stderr(&dup));
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    // usage errors -> 1
    assert_eq!(code(&run(&[])), 1, "no subcommand");
    assert_eq!(code(&run(&["frobnicate"])), 1, "unknown subcommand");
    let missing = run(&[
        "fit",
        "--input",
        &p(dir, "absent.mpft"),
        "--method",
        "mpca",
        "--cr",
        "0.5",
        "--out",
        &p(dir, "m"),
    ]);
    assert_eq!(code(&missing), 1, "missing input file");
    let bad_dims = run(&["gen", "--dims", "3x3x8", "--out", &p(dir, "f.mpft")]);
    assert_eq!(code(&bad_dims), 1, "malformed dims");
    let bad_cr = run(&[
        "pipeline",
        "--input",
        &p(dir, "f.mpft"),
        "--cr",
        "0.5",
        "--dims",
        "1,1,1",
        "--out",
        &p(dir, "x"),
    ]);
    assert_eq!(code(&bad_cr), 1, "cr and dims together");

    // data errors -> 2
    let features = gen_features(dir, "f.mpft");
    let bytes = std::fs::read(&features).unwrap();
    std::fs::write(p(dir, "badmagic.mpft"), {
        let mut b = bytes.clone();
        b[0] = b'X';
        b
    })
    .unwrap();
    let bad_magic = run(&[
        "fit",
        "--input",
        &p(dir, "badmagic.mpft"),
        "--method",
        "mpca",
        "--cr",
        "0.5",
        "--out",
        &p(dir, "m"),
    ]);
    assert_eq!(code(&bad_magic), 2, "corrupt magic");
    assert!(
        stderr(&bad_magic).contains("byte 0"),
        "{}",
        stderr(&bad_magic)
    );

    std::fs::write(p(dir, "trunc.mpft"), &bytes[..bytes.len() - 5]).unwrap();
    let trunc = run(&[
        "fit",
        "--input",
        &p(dir, "trunc.mpft"),
        "--method",
        "mpca",
        "--cr",
        "0.5",
        "--out",
        &p(dir, "m"),
    ]);
    assert_eq!(code(&trunc), 2, "truncated file");

    // success and help -> 0
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn query_for_unknown_id_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");
    assert_ok(&run(&[
        "hash-fit",
        "--input",
        &features,
        "--bits",
        "32",
        "--seed",
        "1",
        "--out",
        &p(dir, "h.lsh1"),
    ]));
    assert_ok(&run(&[
        "encode",
        "--hash",
        &p(dir, "h.lsh1"),
        "--input",
        &features,
        "--out",
        &p(dir, "i.mpix"),
    ]));
    let out = run(&["query", "--index", &p(dir, "i.mpix"), "--id", "9999"]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("not in the index"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn pipeline_report_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let features = gen_features(dir, "f.mpft");
    let report: PathBuf = dir.join("report.txt");
    let out = run(&[
        "pipeline",
        "--input",
        &features,
        "--method",
        "mpca",
        "--dims",
        "2,2,4",
        "--bits",
        "64",
        "--seed",
        "1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let text = stdout(&out);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), text);
    for key in [
        "dims=2x2x4",
        "ccr1=",
        "ccr2=",
        "ccr3=",
        "ccr_w=",
        "bits=64",
        "map=",
        "fit_ms=",
        "query_ms=",
    ] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
}
