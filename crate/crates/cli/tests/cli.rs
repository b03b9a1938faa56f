mod common;

use std::path::Path;

use common::{input, ok, regloss};
use regloss_core::raster::{self, SampleType};
use regloss_core::ImageBuffer;
use serde_json::Value;

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

const SMALL_SWEEP: [&str; 10] = [
    "--target-size",
    "64",
    "--tile-size",
    "32",
    "--trials",
    "6",
    "--levels",
    "0,5,10",
    "--seed",
    "9",
];

#[test]
fn help_exits_zero_everywhere() {
    for sub in [
        vec!["--help"],
        vec!["register", "--help"],
        vec!["sweep-noise", "--help"],
        vec!["sweep-blur", "--help"],
        vec!["loss", "--help"],
        vec!["metrics", "--help"],
        vec!["match-cells", "--help"],
        vec!["gli", "--help"],
        vec!["pli", "--help"],
        vec!["pli", "sim", "--help"],
        vec!["pli", "fit", "--help"],
        vec!["pli", "fom", "--help"],
        vec!["pli", "gamma", "--help"],
    ] {
        let out = regloss(&sub, &[]);
        assert_eq!(out.code, 0, "{sub:?}");
        assert!(out.stdout.contains("Usage"), "{sub:?}");
    }
}

#[test]
fn invalid_flags_exit_3() {
    let fixed = input("fixed.fras");
    let moving = input("moving.fras");
    for args in [
        vec![],
        vec!["register", &fixed, &moving, "--metric", "ncc"],
        vec!["register", &fixed, &moving, "--angles", "5:0:1"],
        vec!["register", &fixed, &moving, "--bogus"],
        vec!["--threads", "0", "register", &fixed, &moving],
        vec!["sweep-noise", "--levels", "5,0"],
        vec!["sweep-noise", "--tile-size", "600"],
        vec!["loss", &moving, &fixed, "--lambda", "2"],
    ] {
        let out = regloss(&args, &[]);
        assert_eq!(out.code, 3, "{args:?}: {}", out.stderr);
    }
}

#[test]
fn malformed_header_exits_1_naming_the_field() {
    let dir = tmp();
    let good = raster::encode(&ImageBuffer::zeros(4, 4), SampleType::F64);
    let moving = input("moving.fras");
    for (field, offset, byte) in [("magic", 0, b'X'), ("version", 4, 9), ("dtype", 5, 7), ("height", 6, 0)] {
        let mut bad = good.clone();
        bad[offset] = byte;
        if field == "height" {
            bad[6..10].copy_from_slice(&0u32.to_le_bytes());
        }
        let p = dir.path().join(format!("{field}.fras"));
        std::fs::write(&p, &bad).unwrap();
        let out = regloss(&["register", &s(&p), &moving], &[]);
        assert_eq!(out.code, 1, "{field}");
        assert!(out.stderr.contains(&format!("`{field}`")), "{field}: {}", out.stderr);
    }
    let truncated = dir.path().join("short.fras");
    std::fs::write(&truncated, &good[..good.len() - 3]).unwrap();
    let out = regloss(&["register", &s(&truncated), &moving], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("payload"));
}

#[test]
fn unreadable_inputs_exit_1() {
    let out = regloss(&["register", "/nonexistent/a.fras", &input("moving.fras")], &[]);
    assert_eq!(out.code, 1);
    let out = regloss(&["register", &input("transform.json"), &input("moving.fras")], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("extension"));
}

#[test]
fn no_solution_exits_2() {
    let dir = tmp();
    let empty = dir.path().join("empty.fras");
    std::fs::write(&empty, raster::encode(&ImageBuffer::zeros(32, 32), SampleType::F32)).unwrap();
    let out = regloss(
        &["register", &input("fixed.fras"), &input("moving.fras"), "--moving-mask", &s(&empty)],
        &[],
    );
    assert_eq!(out.code, 2, "{}", out.stderr);
    // search window entirely outside the feasible placements
    let out = regloss(
        &["register", &input("fixed.fras"), &input("moving.fras"), "--region", "100:110,0:5"],
        &[],
    );
    assert_eq!(out.code, 2, "{}", out.stderr);
}

#[test]
fn identity_pair_gives_zero_transform() {
    let f = input("fixed.fras");
    for angles in ["0:0:1", "-7.5:7.5:0.5"] {
        let out = ok(&["register", &f, &f, "--angles", angles]);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!((v["du"].as_i64(), v["dv"].as_i64(), v["theta"].as_f64()), (Some(0), Some(0), Some(0.0)));
    }
}

#[test]
fn register_writes_transform_warp_score_map_and_sidecar() {
    let dir = tmp();
    let out_json = dir.path().join("t.json");
    let warped = dir.path().join("warped.fras");
    let map = dir.path().join("map.fras");
    ok(&[
        "register",
        &input("fixed.fras"),
        &input("moving.fras"),
        "--angles",
        "0:0:1",
        "--out",
        &s(&out_json),
        "--warped",
        &s(&warped),
        "--score-map",
        &s(&map),
    ]);
    let t = json_file(&out_json);
    assert_eq!((t["du"].as_i64(), t["dv"].as_i64()), (Some(11), Some(7)));

    let (w, _) = regloss_cli::io::read_raster(&warped).unwrap();
    let (m, _) = regloss_cli::io::read_raster(Path::new(&input("moving.fras"))).unwrap();
    assert_eq!(w.shape(), (64, 64));
    assert_eq!(w.get(11, 7), m.get(0, 0));
    assert_eq!(w.get(11 + 31, 7 + 31), m.get(31, 31));
    assert_eq!(w.get(0, 0), 0.0);

    let (sm, _) = regloss_cli::io::read_raster(&map).unwrap();
    assert_eq!(sm.channels(), 3);
    let desc = json_file(&dir.path().join("map.fras.json"));
    let (oi, oj) = (desc["origin"][0].as_i64().unwrap(), desc["origin"][1].as_i64().unwrap());
    assert_eq!(desc["objective"], "minimize");
    // the reported optimum sits at the planted shift in the exported map
    let (i, j) = ((oi + 11) as usize, (oj + 7) as usize);
    assert_eq!(sm.get_c(1, i, j), 1.0);
    assert_eq!(sm.get_c(0, i, j), t["score"].as_f64().unwrap());

    let rec = json_file(&dir.path().join("t.json.run.json"));
    assert_eq!(rec["subcommand"], "register");
    assert_eq!(rec["settings"]["metric"], "mse");
    assert_eq!(rec["settings"]["overlap"], "full");
    assert_eq!(rec["settings"]["angles"]["step"], 1.0);
    assert_eq!(rec["outputs"]["warped"], s(&warped));
}

#[test]
fn sweep_is_byte_stable_across_runs_and_threads() {
    let mut args = vec!["sweep-noise"];
    args.extend(SMALL_SWEEP);
    let mut one = vec!["--threads", "1"];
    one.extend(&args);
    let mut three = vec!["--threads", "3"];
    three.extend(&args);
    let a = ok(&one).stdout;
    let b = ok(&one).stdout;
    let c = ok(&three).stdout;
    assert_eq!(a, b);
    assert_eq!(a, c);
    let env = regloss(&args, &[("REGLOSS_THREADS", "2")]);
    assert_eq!(env.code, 0);
    assert_eq!(env.stdout, a);
}

#[test]
fn restricted_metric_list_limits_rows() {
    let mut args = vec!["sweep-blur", "--metrics", "mse,bipc"];
    args.extend(SMALL_SWEEP);
    let out = ok(&args);
    let rows: Vec<&str> = out.stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.starts_with("mse,") || r.starts_with("bipc,")));
    assert_eq!(
        out.stdout.lines().next().unwrap(),
        "metric,level,trials,hits,rate,mean_runtime_ms"
    );
}

#[test]
fn sweep_outputs_and_sidecar() {
    let dir = tmp();
    let (csv, json, svg) = (dir.path().join("r.csv"), dir.path().join("r.json"), dir.path().join("r.svg"));
    let (csv_s, json_s, svg_s) = (s(&csv), s(&json), s(&svg));
    let mut args = vec!["--threads", "2", "sweep-noise", "--csv", &csv_s, "--json", &json_s, "--svg", &svg_s];
    args.extend(SMALL_SWEEP);
    let out = ok(&args);
    assert!(out.stdout.is_empty());
    let rates = regloss_core::bench::rates_from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rates.len(), 12);
    let report = json_file(&json);
    assert_eq!(report["records"].as_array().unwrap().len(), 3 * 6 * 4);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg") && svg_text.trim_end().ends_with("</svg>"));

    let rec = json_file(&dir.path().join("r.csv.run.json"));
    assert_eq!(rec["threads"], 2);
    assert_eq!(rec["settings"]["trials_per_level"], 6);
    assert_eq!(rec["settings"]["hit_threshold"], 5.0);
    assert_eq!(rec["settings"]["clip_8bit"], true);
    assert_eq!(rec["settings"]["texture"]["style"], "cell_blobs");
}

#[test]
fn config_file_layers_under_flags() {
    let dir = tmp();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"metric": "cc", "angles": {"start": 0.0, "stop": 0.0, "step": 1.0}, "overlap": {"min_fraction": 0.5}}"#).unwrap();
    let side = dir.path().join("run.json");
    ok(&[
        "--config",
        &s(&cfg),
        "--sidecar",
        &s(&side),
        "register",
        &input("fixed.fras"),
        &input("moving.fras"),
        "--metric",
        "mse",
    ]);
    let rec = json_file(&side);
    assert_eq!(rec["settings"]["metric"], "mse");
    assert_eq!(rec["settings"]["angles"]["stop"], 0.0);
    assert_eq!(rec["settings"]["overlap"]["min_fraction"], 0.5);
    assert_eq!(rec["config_file"], s(&cfg));

    std::fs::write(&cfg, r#"{"metrc": "cc"}"#).unwrap();
    let out = regloss(&["--config", &s(&cfg), "register", &input("fixed.fras"), &input("moving.fras")], &[]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("metrc"));

    std::fs::write(&cfg, "{not json").unwrap();
    let out = regloss(&["--config", &s(&cfg), "register", &input("fixed.fras"), &input("moving.fras")], &[]);
    assert_eq!(out.code, 1);
}

#[test]
fn sidecar_replays_as_config() {
    let dir = tmp();
    let first = dir.path().join("a.json");
    ok(&["metrics", &input("stain.png"), &input("stain_blur.png"), "--bins", "16", "--out", &s(&first)]);
    let rec = json_file(&dir.path().join("a.json.run.json"));
    assert_eq!(rec["settings"]["ssim"]["dynamic_range"], 255.0);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_vec(&rec["settings"]).unwrap()).unwrap();
    let second = dir.path().join("b.json");
    ok(&["--config", &s(&cfg), "metrics", &input("stain.png"), &input("stain_blur.png"), "--out", &s(&second)]);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn loss_defaults_and_lambda_one() {
    let base = ["loss", &input("pred.fras"), &input("fixed.fras"), "--transform", &input("transform.json")];
    let v: Value = serde_json::from_str(&ok(&base).stdout).unwrap();
    assert_eq!(v["l_e"], 0.0);
    let mut only_r = base.to_vec();
    only_r.extend(["--lambda", "1"]);
    let w: Value = serde_json::from_str(&ok(&only_r).stdout).unwrap();
    assert_eq!(w["total"], w["l_r"]);
    assert_eq!(w["l_r"], v["l_r"]);
}

#[test]
fn loss_identity_alignment_is_zero() {
    let dir = tmp();
    let t = dir.path().join("t.json");
    std::fs::write(&t, r#"{"du": -11, "dv": -7}"#).unwrap();
    let out = ok(&["loss", &input("moving.fras"), &input("fixed.fras"), "--transform", &s(&t)]);
    let v: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["l_r"], 0.0);
    assert_eq!(v["l_s"], 0.0);
    assert_eq!(v["total"], 0.0);
}

#[test]
fn loss_transform_leaving_target_exits_2() {
    let dir = tmp();
    let t = dir.path().join("t.json");
    std::fs::write(&t, r#"{"du": 30, "dv": 0}"#).unwrap();
    let out = regloss(&["loss", &input("moving.fras"), &input("fixed.fras"), "--transform", &s(&t)], &[]);
    assert_eq!(out.code, 2, "{}", out.stderr);
}

#[test]
fn metrics_identical_images() {
    let out = ok(&["metrics", &input("stain.png"), &input("stain.png")]);
    let v: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["rmse"], 0.0);
    assert!((v["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn match_cells_self_is_perfect() {
    let out = ok(&["match-cells", &input("labels_target.png"), &input("labels_target.png"), "--min-area-um2", "0"]);
    let v: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["overall"]["f1"], 100.0);
    assert_eq!(v["overall"]["tp"], 5);
}

#[test]
fn gli_image_output() {
    let dir = tmp();
    let img = dir.path().join("gli.fras");
    let png = dir.path().join("gli.png");
    ok(&["gli", &input("stain.png"), "--window", "31", "--block", "8", "--image", &s(&img)]);
    ok(&["gli", &input("stain.png"), "--window", "31", "--block", "8", "--image", &s(&png)]);
    let (g, _) = regloss_cli::io::read_raster(&img).unwrap();
    assert_eq!(g.shape(), (12, 12));
    assert!(g.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let (p, depth) = regloss_cli::io::read_raster(&png).unwrap();
    assert_eq!(depth, regloss_cli::io::Depth::U8);
    assert_eq!(p.get(3, 4), (g.get(3, 4) * 255.0).round());
}

#[test]
fn pli_gamma_and_channel_checks() {
    let dir = tmp();
    let out = dir.path().join("g.png");
    ok(&["pli", "gamma", &input("stain.png"), "--gamma", "1", "--out", &s(&out)]);
    let (a, _) = regloss_cli::io::read_raster(Path::new(&input("stain.png"))).unwrap();
    let (b, _) = regloss_cli::io::read_raster(&out).unwrap();
    assert_eq!(a, b);
    let bad = regloss(&["pli", "fom", &input("fixed.fras"), "--out", &s(&out)], &[]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("3 channels"));
    let neg = regloss(&["pli", "gamma", &input("stain.png"), "--gamma", "-1", "--out", &s(&out)], &[]);
    assert_eq!(neg.code, 3);
}
