use std::path::Path;
use std::process::{Command, Output};

use ebt_core::cli::decode_region_counts;
use ebt_core::datapipe::{load_gt, save_binary, save_gray};
use ebt_core::experiment::{train_and_evaluate, Experiment};
use ebt_core::{classify, BinaryMap, LossKind};

fn ebt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebt")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn regions_all_zero_gt_prints_unit_weights() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.png");
    save_binary(&gt, &BinaryMap::zeros(5, 6).unwrap()).unwrap();
    let out = ebt(&["regions", "--gt", p(&gt), "--out", p(&dir.path().join("v.png"))]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("E=0 B=0 T=30"), "{text}");
    assert!(text.contains("w_e=1.000000 w_b=1.000000 w_t=0.000000"), "{text}");
}

#[test]
fn regions_center_edge_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gt_path = dir.path().join("gt.png");
    let vis = dir.path().join("nested/vis.png");
    save_binary(&gt_path, &BinaryMap::from_rows(&[[0, 0, 0], [0, 1, 0], [0, 0, 0]]).unwrap()).unwrap();
    let out = ebt(&["regions", "--gt", p(&gt_path), "--out", p(&vis), "--r", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("E=1 B=8 T=0"));
    assert_eq!(decode_region_counts(&vis).unwrap(), (1, 8, 0));

    // Larger map: decoded counts equal a fresh classification of the gt.
    let gt = BinaryMap::from_fn(30, 40, |r, c| r == 7 || c == 33).unwrap();
    save_binary(&gt_path, &gt).unwrap();
    assert!(ebt(&["regions", "--gt", p(&gt_path), "--out", p(&vis)]).status.success());
    let reread = load_gt(&gt_path).unwrap();
    assert_eq!(decode_region_counts(&vis).unwrap(), classify(&reread, 7).unwrap().counts());
}

#[test]
fn eval_on_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (pd, gd) = (dir.path().join("pred"), dir.path().join("gt"));
    for (i, k) in [3usize, 5, 8].iter().enumerate() {
        let gt = BinaryMap::from_fn(16, 16, |r, c| (r + c) % k == 0).unwrap();
        save_binary(&gd.join(format!("img{i}.png")), &gt).unwrap();
        save_gray(&pd.join(format!("img{i}.png")), &gt.to_pixels()).unwrap();
    }
    let csv = dir.path().join("report/eval.csv");
    let out = ebt(&["eval", "--pred-dir", p(&pd), "--gt-dir", p(&gd), "--out", p(&csv)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "ODS=1.000000 OIS=1.000000 AP=1.000000");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("threshold,precision,recall,f1\n0.010000,"));
    assert!(text.ends_with("ods,ods_threshold,ois,ap\n1.000000,0.010000,1.000000,1.000000\n"));
}

#[test]
fn eval_rejects_empty_and_mismatched_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let (pd, gd) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pd).unwrap();
    save_binary(&gd.join("a.png"), &BinaryMap::zeros(4, 4).unwrap()).unwrap();
    let csv = dir.path().join("e.csv");
    let out = ebt(&["eval", "--pred-dir", p(&pd), "--gt-dir", p(&gd), "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    save_binary(&pd.join("b.png"), &BinaryMap::zeros(4, 4).unwrap()).unwrap();
    let out = ebt(&["eval", "--pred-dir", p(&pd), "--gt-dir", p(&gd), "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!csv.exists());
}

#[test]
fn gradcheck_passes_and_reports() {
    let out = ebt(&["gradcheck", "--seed", "3", "--size", "6", "--instances", "4"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("limit=1e-4 PASS"));
}

#[test]
fn synth_train_infer_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model");
    let common = ["--images", "3", "--canvas", "32", "--seed", "11"];
    let run = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend_from_slice(&common);
        let o = ebt(&all);
        assert!(o.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&["synth", "--out", p(&data)]);
    assert_eq!(std::fs::read_dir(data.join("images")).unwrap().count(), 3);
    run(&["train", "--data", p(&data), "--out", p(&model), "--epochs", "6", "--lr", "0.1", "--crop", "0"]);
    let hist = std::fs::read_to_string(model.join("history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 7);
    run(&["infer", "--weights", p(&model.join("weights.txt")), "--image-dir", p(&data.join("images")),
          "--out", p(dir.path()), "--patch", "20", "--stride", "12"]);
    let out = run(&["eval", "--pred-dir", p(&dir.path().join("pred")), "--gt-dir", p(&data.join("edges")),
                    "--out", p(&dir.path().join("e.csv"))]);
    assert!(stdout(&out).starts_with("ODS="));

    // Same flags, same weights.
    let model2 = dir.path().join("model2");
    run(&["train", "--data", p(&data), "--out", p(&model2), "--epochs", "6", "--lr", "0.1", "--crop", "0"]);
    assert_eq!(
        std::fs::read(model.join("weights.txt")).unwrap(),
        std::fs::read(model2.join("weights.txt")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# radius for the demo\nr = 0\nloss = wbce\n").unwrap();
    let gt = dir.path().join("gt.png");
    save_binary(&gt, &BinaryMap::from_rows(&[[0, 0, 0], [0, 1, 0], [0, 0, 0]]).unwrap()).unwrap();
    let vis = dir.path().join("v.png");
    let from_file = ebt(&["regions", "--config", p(&cfg), "--gt", p(&gt), "--out", p(&vis)]);
    assert!(stdout(&from_file).contains("E=1 B=0 T=8"));
    let overridden = ebt(&["regions", "--config", p(&cfg), "--r", "1", "--gt", p(&gt), "--out", p(&vis)]);
    assert!(stdout(&overridden).contains("E=1 B=8 T=0"));

    std::fs::write(&cfg, "r = 1\nbogus = 3\n").unwrap();
    let bad = ebt(&["regions", "--config", p(&cfg), "--gt", p(&gt), "--out", p(&vis)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains(":2"));
}

#[test]
fn one_cell_sweep_equals_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = [
        "sweep", "--out", p(&csv), "--b-b-grid", "0.7", "--b-t-grid", "0.4", "--epochs", "8",
        "--images", "4", "--test-images", "3", "--canvas", "32", "--lr", "0.1", "--crop", "0",
    ];
    let out = ebt(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();

    let mut exp = Experiment::desk();
    exp.train_images = 4;
    exp.test_images = 3;
    exp.synth.height = 32;
    exp.synth.width = 32;
    exp.train.epochs = 8;
    exp.train.loss_kind = LossKind::Ebt;
    exp.train.params.b_b = 0.7;
    exp.train.params.b_t = 0.4;
    let (tr, te) = exp.datasets().unwrap();
    let single = train_and_evaluate(&tr, &te, &exp.train, &exp.eval).unwrap();
    let want = [1.0, 0.7, 0.4, single.report.ods, single.report.ois, single.report.ap];
    for (a, b) in row.iter().zip(want) {
        assert!((a - b).abs() <= 5e-7, "{row:?} vs {want:?}");
    }

    let empty = ebt(&["sweep", "--out", p(&csv), "--b-b-grid", ""]);
    assert_ne!(empty.status.code(), Some(0));
}
