mod common;

use std::fs;
use std::path::Path;

use common::{forge, forge_ok, report_value, snapshot, synthetic_shape, write_config, write_corpus, write_mesh};
use forge_cli::commands::roundtrip::rms_chamfer;
use forge_cli::store::{write_checkpoint, CheckpointInfo};
use forge_core::diffusion::{Denoiser, NetworkConfig, TrainState};
use forge_core::geometry::{load_mesh, normalize_mesh, sample_surface_points};
use forge_core::metrics;
use forge_core::rng::{derive_seed, Purpose};

const SMALL: &str = "seed = 3\n[encode]\nresolution = 32\nd = 6\n[cluster]\nn_clusters = 6\npoints_per_shape = 256\n\
[evaluate]\npoints_per_shape = 256\njsd_resolution = 8\n[train]\nsteps = 300\nbatch_size = 4\ncheckpoint_every = 100\n";

fn setup(n: usize, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus"), n);
    let cfg = write_config(dir.path(), body);
    (dir, cfg)
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn usage_errors_exit_with_one() {
    let (dir, cfg) = setup(2, SMALL);
    let bare = std::process::Command::new(env!("CARGO_BIN_EXE_forge")).arg("cluster").output().unwrap();
    assert_eq!(bare.status.code(), Some(1));
    assert_eq!(forge(&cfg, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(forge(&cfg, &["--help"]).status.code(), Some(0));

    let bad = write_config(dir.path(), "[encode]\nresolutoin = 32\n");
    let out = forge(&bad, &["cluster"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolutoin"));

    let threads = std::process::Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(["cluster", "--config"])
        .arg(&bad)
        .env("FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(1));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = forge(&cfg, &["cluster"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corpus"));
}

#[test]
fn unreadable_mesh_is_named() {
    let (dir, cfg) = setup(3, "[cluster]\nn_clusters = 2\npoints_per_shape = 64\n");
    fs::write(dir.path().join("corpus/broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let out = forge(&cfg, &["cluster"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken"));
}

#[test]
fn more_clusters_than_meshes_is_rejected() {
    let (_dir, cfg) = setup(3, "[cluster]\nn_clusters = 4\n");
    let out = forge(&cfg, &["cluster"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_clusters"));
}

#[test]
fn one_cluster_per_mesh_keeps_every_mesh() {
    let (dir, cfg) = setup(6, SMALL);
    forge_ok(&cfg, &["cluster"]);
    let mut ids = lines(&dir.path().join("ws/clusters/ids.txt"));
    ids.sort();
    let expected: Vec<String> = (0..6).map(|i| format!("shape-{i:02}")).collect();
    assert_eq!(ids, expected);
    assert!(dir.path().join("ws/clusters/distances.spdt").exists());
    assert!(dir.path().join("ws/clusters/embedding.spdt").exists());
}

#[test]
fn duplicated_corpus_keeps_one_copy_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for i in 0..5 {
        for copy in ["a", "b"] {
            write_mesh(&corpus.join(format!("{copy}-{i}.obj")), &synthetic_shape(i));
        }
    }
    let cfg = write_config(dir.path(), "[cluster]\nn_clusters = 5\npoints_per_shape = 512\n");
    forge_ok(&cfg, &["cluster"]);
    let mut shapes: Vec<String> = lines(&dir.path().join("ws/clusters/ids.txt"))
        .iter()
        .map(|id| id[2..].to_string())
        .collect();
    shapes.sort();
    assert_eq!(shapes, ["0", "1", "2", "3", "4"]);

    let first = snapshot(&dir.path().join("ws/clusters"));
    forge_ok(&cfg, &["cluster"]);
    assert_eq!(first, snapshot(&dir.path().join("ws/clusters")));
}

#[test]
fn encode_is_exact_at_full_rank_and_matches_truncation_below() {
    let (dir, cfg) = setup(6, SMALL);
    let out = forge_ok(&cfg, &["encode"]);
    assert!(out.contains("compression d/N^3 = 6/32^3"), "{out}");
    let report = dir.path().join("ws/reports/encode.txt");
    let max: f64 = report_value(&report, "max_relative_residual").parse().unwrap();
    assert!(max < 1e-8, "full-rank residual {max}");
    let features = fs::read(dir.path().join("ws/features/features.spdb")).unwrap();
    forge_ok(&cfg, &["encode"]);
    assert_eq!(features, fs::read(dir.path().join("ws/features/features.spdb")).unwrap());

    let truncated = write_config(dir.path(), &SMALL.replace("d = 6", "d = 3"));
    forge_ok(&truncated, &["encode"]);
    let got: f64 = report_value(&report, "residual_sq").parse().unwrap();
    let predicted: f64 = report_value(&report, "predicted_residual_sq").parse().unwrap();
    assert!(predicted > 0.0);
    assert!((got - predicted).abs() <= 1e-8 * predicted, "{got} vs {predicted}");
}

#[test]
fn train_smoke_run_writes_checkpoints_and_history() {
    let (dir, cfg) = setup(6, SMALL);
    forge_ok(&cfg, &["encode"]);
    forge_ok(&cfg, &["train"]);
    let ckpt = dir.path().join("ws/checkpoints");
    for name in ["step-00000100.spdb", "step-00000200.spdb", "step-00000300.spdb", "final.spdb"] {
        assert!(ckpt.join(name).exists(), "{name}");
    }
    let rows = lines(&dir.path().join("ws/reports/loss.csv"));
    assert_eq!(rows.len(), 301);

    let plain = write_config(dir.path(), &format!("{SMALL}[edm]\nlambda = 0.0\n"));
    forge_ok(&plain, &["train"]);
    for row in &lines(&dir.path().join("ws/reports/loss.csv"))[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[1], cols[2], "total differs from L_alpha at λ = 0: {row}");
    }
}

#[test]
fn divergence_exits_with_three() {
    let (_dir, cfg) = setup(6, &SMALL.replace("steps = 300", "steps = 300\nlearning_rate = 1e300"));
    forge_ok(&cfg, &["encode"]);
    let out = forge(&cfg, &["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last checkpoint"));
}

#[test]
fn generate_is_deterministic_and_checks_dimension() {
    let (dir, cfg) = setup(6, SMALL);
    forge_ok(&cfg, &["encode"]);
    forge_ok(&cfg, &["train"]);
    forge_ok(&cfg, &["generate", "--count", "4"]);
    let samples = dir.path().join("ws/samples");
    let report = lines(&dir.path().join("ws/reports/generate.txt"));
    assert_eq!(report.len(), 4);
    let written = report.iter().filter(|l| l.ends_with("=ok")).count();
    assert_eq!(fs::read_dir(&samples).unwrap().count(), written);
    let first = snapshot(&samples);
    forge_ok(&cfg, &["generate", "--count", "4"]);
    assert_eq!(first, snapshot(&samples));

    let wrong = dir.path().join("wrong.spdb");
    let net = Denoiser::new(5, NetworkConfig::desk(), 0).unwrap();
    let info = CheckpointInfo { basis_id: "0".into(), sigma_data: 1.0 };
    write_checkpoint(&wrong, &TrainState::new(net, 0), &info).unwrap();
    let out = forge(&cfg, &["generate", "--checkpoint", wrong.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d = 5"));
}

#[test]
fn training_row_decodes_to_its_own_round_trip() {
    let (dir, cfg) = setup(6, SMALL);
    forge_ok(&cfg, &["encode"]);
    forge_ok(&cfg, &["generate", "--from-training-row", "2"]);
    forge_ok(&cfg, &["roundtrip", "--mesh", dir.path().join("corpus/shape-02.obj").to_str().unwrap()]);
    let generated = load_mesh(dir.path().join("ws/samples/sample-0000.obj")).unwrap();
    let coarse = load_mesh(dir.path().join("ws/reports/roundtrip-coarse.obj")).unwrap();
    let a = sample_surface_points(&generated, 2048, 1).unwrap();
    let b = sample_surface_points(&coarse, 2048, 2).unwrap();
    let spacing: f64 = report_value(&dir.path().join("ws/reports/roundtrip.txt"), "spacing").parse().unwrap();
    let d = rms_chamfer(&a, &b);
    assert!(d < 2.0 * spacing, "distance {d} vs spacing {spacing}");
}

#[test]
fn evaluate_identity_and_module_agreement() {
    let (dir, cfg) = setup(4, SMALL);
    let corpus = dir.path().join("corpus");
    let out = forge_ok(&cfg, &["evaluate", "--generated", corpus.to_str().unwrap(), "--reference", corpus.to_str().unwrap()]);
    assert!(out.contains("COV"), "{out}");
    let report = dir.path().join("ws/reports/eval.txt");
    assert_eq!(report_value(&report, "mmd").parse::<f64>().unwrap(), 0.0);
    assert_eq!(report_value(&report, "cov").parse::<f64>().unwrap(), 100.0);
    assert_eq!(report_value(&report, "jsd").parse::<f64>().unwrap(), 0.0);
    assert_eq!(report_value(&report, "points_per_shape"), "256");
    assert_eq!(report_value(&report, "jsd_resolution"), "8");

    let gen_dir = dir.path().join("gen");
    fs::create_dir_all(&gen_dir).unwrap();
    for i in 0..3 {
        write_mesh(&gen_dir.join(format!("g{i}.obj")), &synthetic_shape(i + 7));
    }
    forge_ok(&cfg, &["evaluate", "--generated", gen_dir.to_str().unwrap(), "--reference", corpus.to_str().unwrap()]);
    let points = |shapes: Vec<usize>| -> Vec<Vec<[f64; 3]>> {
        shapes
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let m = normalize_mesh(&synthetic_shape(i)).unwrap();
                sample_surface_points(&m, 256, derive_seed(3, Purpose::SurfaceSampling, k as u64)).unwrap()
            })
            .collect()
    };
    let g = points(vec![7, 8, 9]);
    let r = points(vec![0, 1, 2, 3]);
    let kv = |k: &str| report_value(&report, k).parse::<f64>().unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
    assert!(close(kv("mmd"), metrics::mmd(&g, &r).unwrap()));
    assert_eq!(kv("cov"), metrics::coverage(&g, &r).unwrap());
    assert_eq!(kv("one_nna"), metrics::one_nna(&g, &r).unwrap());
    assert!(close(kv("jsd"), metrics::jsd(&g, &r, 8).unwrap()));
    assert_eq!(lines(&dir.path().join("ws/reports/novelty.csv")).len(), 4);
}

#[test]
fn roundtrip_sphere_keeps_coarse_close_to_full() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("sphere.obj");
    write_mesh(&mesh, &forge_core::geometry::primitives::icosphere(0.4, 4));
    let cfg = write_config(dir.path(), "[cluster]\npoints_per_shape = 4096\n");
    forge_ok(&cfg, &["roundtrip", "--mesh", mesh.to_str().unwrap()]);
    let report = dir.path().join("ws/reports/roundtrip.txt");
    let v = |k: &str| report_value(&report, k).parse::<f64>().unwrap();
    let (h, full, coarse) = (v("spacing"), v("full_distance"), v("coarse_distance"));
    assert!(coarse <= 2.0 * full + 2.0 * h, "coarse {coarse} full {full} spacing {h}");
    assert!(full <= coarse + 0.1 * h, "full {full} coarse {coarse}");

    let first = snapshot(&dir.path().join("ws/reports"));
    forge_ok(&cfg, &["roundtrip", "--mesh", mesh.to_str().unwrap()]);
    assert_eq!(first, snapshot(&dir.path().join("ws/reports")));
}
