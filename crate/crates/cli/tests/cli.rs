use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use sha2::{Digest, Sha256};

use temperley_cli::config::hex;
use temperley_cli::{execute, render_svg, tilings_from_text, tilings_to_text, Command, ExperimentConfig, RunOptions};
use temperley_core::{build_temperleyan, height_field, sample_many, build_system, PolyominoRegion, Tiling};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn small_annulus(samples: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "domain": {{
                "outer": {{"rect": {{"min": [0, 0], "max": [1, 1]}}}},
                "holes": [{{"rect": {{"min": [0.35, 0.35], "max": [0.65, 0.65]}}}}],
                "marked_points": [[0.5, 0], [0.5, 0.35]],
                "rasterization": "staircase"
            }},
            "eps": [0.0625],
            "N": {samples},
            "seed": 99,
            "queries": [[0.2, 0.2], [0.8, 0.5]]
        }}"#
    ))
    .unwrap()
}

fn opts(out: &Path, threads: usize) -> RunOptions {
    RunOptions { out: Some(out.to_path_buf()), threads: Some(threads), ..Default::default() }
}

fn temperley() -> Process {
    Process::new(env!("CARGO_BIN_EXE_temperley"))
}

#[test]
fn smoke_run_passes_and_manifest_matches_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs().join("annulus_smoke.json")).unwrap();
    let o = execute(Command::Run, &cfg, &opts(dir.path(), 2)).unwrap();
    assert!(o.passed(), "{}", o.report);
    let m = o.manifest.unwrap();
    assert_eq!(m.config_hash, cfg.hash());
    assert_eq!(m.gates_passed, Some(true));
    let paths: BTreeSet<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for want in [
        "config.json",
        "region_0.json",
        "region_1.txt",
        "surface.json",
        "harmonic.json",
        "predictions.json",
        "tilings_1.txt",
        "rows_1.csv",
        "moments_1.json",
        "moments_1.txt",
        "gof_1.json",
        "gof_1.txt",
        "render_1.svg",
        "trend.json",
        "summary.json",
    ] {
        assert!(paths.contains(want), "missing {want}: {paths:?}");
    }
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(bytes.len(), f.bytes, "{}", f.path);
        assert_eq!(hex(&Sha256::digest(&bytes)), f.sha256, "{}", f.path);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    // every JSON artifact carries the config hash
    let moments: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("moments_1.json")).unwrap()).unwrap();
    assert_eq!(moments["config_hash"], cfg.hash());
    assert_eq!(moments["kind"], "moment_report");
    let gof = std::fs::read_to_string(dir.path().join("gof_1.txt")).unwrap();
    assert!(gof.starts_with(&format!("# config_hash={}", cfg.hash())));
    assert!(gof.contains("TV distance"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = small_annulus(12);
    let mut runs = Vec::new();
    for threads in [1, 3, 1] {
        let dir = tempfile::tempdir().unwrap();
        let o = execute(Command::Heights, &cfg, &opts(dir.path(), threads)).unwrap();
        let m = o.manifest.unwrap();
        let csv = std::fs::read(dir.path().join("heights_0_sample0.csv")).unwrap();
        let holes = std::fs::read(dir.path().join("holes_0.csv")).unwrap();
        let files: Vec<(String, String)> = m.files.into_iter().map(|f| (f.path, f.sha256)).collect();
        runs.push((files, csv, holes));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    // a different seed changes the samples
    let dir = tempfile::tempdir().unwrap();
    let o = RunOptions { seed: Some(100), ..opts(dir.path(), 1) };
    execute(Command::Heights, &cfg, &o).unwrap();
    assert_ne!(std::fs::read(dir.path().join("holes_0.csv")).unwrap(), runs[0].2);
}

#[test]
fn sample_zero_matches_sampled_tilings() {
    let cfg = small_annulus(5);
    let dir = tempfile::tempdir().unwrap();
    execute(Command::Sample, &cfg, &opts(dir.path(), 2)).unwrap();
    let text = std::fs::read_to_string(dir.path().join("tilings_0.txt")).unwrap();
    let tilings = tilings_from_text(&text).unwrap();
    assert_eq!(tilings.len(), 5);
    let region = build_temperleyan(&cfg.domain, cfg.eps[0]).unwrap();
    let system = build_system(&region).unwrap();
    let again = sample_many(&system, cfg.seed, 5).unwrap();
    assert_eq!(tilings, again);
    for t in &tilings {
        t.check(&region).unwrap();
    }
}

#[test]
fn tiling_text_round_trip() {
    let region = PolyominoRegion::rectangle(0, 0, 3, 1);
    let system = build_system(&region).unwrap();
    let tilings = sample_many(&system, 1, 4).unwrap();
    let text = tilings_to_text(&tilings);
    assert_eq!(tilings_from_text(&text).unwrap(), tilings);
    assert!(tilings_from_text("").unwrap().is_empty());
    assert!(tilings_from_text("# sample 0\nnot a domino\n").is_err());
}

#[test]
fn zero_samples_is_a_config_error() {
    let mut cfg = small_annulus(1);
    cfg.samples = 0;
    let err = execute(Command::Sample, &cfg, &RunOptions::default()).unwrap_err();
    assert!(format!("{err:#}").contains("N must be ≥ 1"), "{err:#}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(configs().join("annulus_smoke.json")).unwrap().replace("\"samples\": 200", "\"N\": 0");
    std::fs::write(&path, text).unwrap();
    let out = temperley().args(["sample", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N must be ≥ 1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = temperley()
        .args(["validate", "--config"])
        .arg(configs().join("annulus_smoke.json"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("config OK"));

    // an impossible gate fails the run but is not an error
    let strict = dir.path().join("strict.json");
    let mut cfg = small_annulus(40);
    cfg.gates.z_max = 1e-9;
    cfg.gates.min_moment_samples = 40;
    cfg.gates.min_gof_samples = 40;
    cfg.gates.jackknife_groups = 10;
    std::fs::write(&strict, serde_json::to_string(&cfg).unwrap()).unwrap();
    let failed = temperley().args(["verify", "--config"]).arg(&strict).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(failed.status.code(), Some(1), "{}", String::from_utf8_lossy(&failed.stderr));
    assert!(String::from_utf8_lossy(&failed.stdout).contains("[FAIL]"));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"domain": {}, "eps": [0.1], "N": 1, "bogus": 1}"#).unwrap();
    let err = temperley().args(["build", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(err.status.code(), Some(2));

    let range = temperley()
        .args(["build", "--eps-index", "7", "--config"])
        .arg(configs().join("annulus_smoke.json"))
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(range.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&range.stderr).contains("out of range"));
}

#[test]
fn two_by_two_render_has_two_dominoes() {
    let region = PolyominoRegion::rectangle(0, 0, 1, 1);
    for text in ["0,0-1,0\n1,1-0,1\n", "0,0-0,1\n1,1-1,0\n"] {
        let t: Tiling = text.parse().unwrap();
        t.check(&region).unwrap();
        let svg = render_svg(&region, &t, None);
        assert_eq!(svg.matches(r#"class="domino "#).count(), 2, "{svg}");
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(!svg.contains(r#"class="hole""#));
    }
}

#[test]
fn genus_one_render_shows_hole_marks_and_rigid_boundary_colours() {
    let cfg = small_annulus(2);
    let region = build_temperleyan(&cfg.domain, cfg.eps[0]).unwrap();
    let system = build_system(&region).unwrap();
    let tilings = sample_many(&system, 5, 2).unwrap();
    assert_ne!(tilings[0], tilings[1]);
    let svgs: Vec<String> = tilings
        .iter()
        .map(|t| render_svg(&region, t, Some(&height_field(&region, t).unwrap())))
        .collect();
    let svg = &svgs[0];
    assert_eq!(svg.matches(r#"class="hole""#).count(), 1);
    assert_eq!(svg.matches("boundary outer").count(), 1);
    assert_eq!(svg.matches("boundary hole").count(), 1);
    assert_eq!(svg.matches("marked added").count(), 1);
    assert_eq!(svg.matches("marked removed").count(), 1);
    assert_eq!(svg.matches(r#"class="domino "#).count(), region.len() / 2);

    // circles follow the vertex index order, so boundary vertices line up across samples
    let boundary: BTreeSet<_> = region.boundary_loops().iter().flatten().copied().collect();
    let h = height_field(&region, &tilings[0]).unwrap();
    let circles: Vec<Vec<&str>> = svgs.iter().map(|s| s.lines().filter(|l| l.starts_with("<circle")).collect()).collect();
    assert_eq!(circles[0].len(), h.index().vertices().len());
    let mut differ = 0;
    for (k, v) in h.index().vertices().iter().enumerate() {
        if boundary.contains(v) {
            assert_eq!(circles[0][k], circles[1][k], "boundary vertex {v:?}");
        } else if circles[0][k] != circles[1][k] {
            differ += 1;
        }
    }
    assert!(differ > 0);
}

#[test]
fn render_command_writes_one_svg_per_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs().join("annulus_smoke.json")).unwrap();
    let o = RunOptions { eps_index: Some(0), ..opts(dir.path(), 1) };
    let out = execute(Command::Render, &cfg, &o).unwrap();
    let files: Vec<&str> = out.manifest.as_ref().unwrap().files.iter().map(|f| f.path.as_str()).collect();
    assert!(files.contains(&"render_0.svg"), "{files:?}");
    assert!(!files.iter().any(|f| f.starts_with("tilings_")));
    let svg = std::fs::read_to_string(dir.path().join("render_0.svg")).unwrap();
    assert!(svg.contains(&format!("config_hash={}", cfg.hash())));
    assert!(svg.contains("marked added"));
}
