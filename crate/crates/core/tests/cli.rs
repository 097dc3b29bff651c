use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modify_core::synthdata::read_samples;

const SMALL: &[&str] =
    &["--epochs", "2", "--n-train", "64", "--n-eval", "8", "--base-lr", "0.01", "--batch-size", "16"];

fn modify(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modify")).args(args).env("MODIFY_OUT", out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn only_run_dir(root: &Path, prefix: &str) -> std::path::PathBuf {
    let dirs: Vec<_> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir() && p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    (header, r.records().map(|r| r.unwrap()).collect())
}

fn assert_self_contained_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("well-formed XML");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    for n in doc.descendants().filter(|n| n.is_element()) {
        assert!(!matches!(n.tag_name().name(), "script" | "image" | "use" | "foreignObject"));
        for a in n.attributes() {
            assert!(!a.name().contains("href"), "external reference in {}", a.name());
        }
    }
}

#[test]
fn missing_mode_and_bad_thresholds_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = modify(&["train", "--epochs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mode"));

    let o = modify(&["train", "--mode", "full", "--t-easy", "0.5", "--t-hard", "0.4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_easy"));

    let o = modify(&["train", "--mode", "sideways"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mode = full\nwarp = 9\n").unwrap();
    let o = modify(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp"));
}

#[test]
fn flag_overrides_file_and_env_sets_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\nmode = full\nlambda = 0.9\n").unwrap();
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--lambda", "0.5"];
    args.extend_from_slice(SMALL);
    let o = modify(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let run = only_run_dir(dir.path(), "full-s0-");
    let text = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(text.contains("lambda = 0.5"), "{text}");

    let (h, rows) = read_csv(&run.join("metrics.csv"));
    assert_eq!(h[..3], ["iter", "epoch", "sample_id"]);
    assert_eq!(rows.len(), 2 * 64);
    let (h, rows) = read_csv(&run.join("iterations.csv"));
    assert_eq!(h[0], "iter");
    assert_eq!(rows.len(), 8);
    let (_, rows) = read_csv(&run.join("accuracy.csv"));
    assert_eq!(rows.len(), 4);
    assert!(run.join("checkpoint.mdck").exists());

    // a finished run is reused as is
    let before = fs::read(run.join("iterations.csv")).unwrap();
    let o = modify(&args, dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("already finished"));
    assert_eq!(fs::read(run.join("iterations.csv")).unwrap(), before);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = modify(
        &["train", "--mode", "baseline", "--epochs", "3", "--n-train", "64", "--n-eval", "8", "--base-lr", "1e250"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn gen_data_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = modify(&["gen-data", "--n-train", "40", "--n-eval", "8", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let d = dir.path().join("data-s3");
    let (h, s) = read_samples(fs::File::open(d.join("train.mdfy")).unwrap()).unwrap();
    assert_eq!((h.n, s.len()), (40, 40));
    for name in ["source", "target1", "target2", "target3"] {
        let (_, s) = read_samples(fs::File::open(d.join(format!("eval_{name}.mdfy"))).unwrap()).unwrap();
        assert_eq!(s.len(), 8);
    }
}

#[test]
fn flow_channel_and_loss_curves_emit_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["flow-channel", "--no-timestamp"];
    args.extend_from_slice(SMALL);
    let o = modify(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("flow_channel.csv"));
    assert_eq!(h, ["window_start_iter", "mean_m_c", "mean_degree", "mean_applied_rate"]);
    assert_eq!(rows.len(), 1);
    assert_self_contained_svg(&dir.path().join("flow_channel.svg"));
    let svg = fs::read_to_string(dir.path().join("flow_channel.svg")).unwrap();
    assert!(!svg.contains("<!--"));

    let mut args = vec!["loss-curves"];
    args.extend_from_slice(SMALL);
    let o = modify(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("loss_curves.csv"));
    assert_eq!(h, ["iter", "loss_no_da", "loss_modify", "loss_strong_da"]);
    assert_eq!(rows.len(), 8);
    assert_self_contained_svg(&dir.path().join("loss_curves.svg"));
    let svg = fs::read_to_string(dir.path().join("loss_curves.svg")).unwrap();
    assert!(svg.contains("<!-- generated"));
}

#[test]
fn emission_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    fs::write(
        empty.join("iterations.csv"),
        "iter,epoch,batch,mean_loss,mean_degree,applied_rate,admitted_rate,m_c,lr,stepped\n",
    )
    .unwrap();
    let o = modify(&["flow-channel", "--run-dir", empty.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let mut short = vec!["train", "--mode", "baseline"];
    short.extend_from_slice(SMALL);
    assert!(modify(&short, dir.path()).status.success());
    let mut long = vec!["train", "--mode", "strong_da", "--epochs", "3"];
    long.extend_from_slice(&SMALL[2..]);
    assert!(modify(&long, dir.path()).status.success());
    let (a, b) = (only_run_dir(dir.path(), "baseline-"), only_run_dir(dir.path(), "strong_da-"));
    let o = modify(
        &["loss-curves", "--run-dirs", a.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("equal-length"));
}

#[test]
fn ablation_is_complete_resumable_and_byte_stable() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = vec!["ablation", "--seeds", "0"];
    args.extend_from_slice(SMALL);
    for d in [&d1, &d2] {
        let o = modify(&args, d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (h, rows) = read_csv(&d1.path().join("ablation.csv"));
    assert_eq!(h, ["mode", "domain", "seed", "accuracy"]);
    assert_eq!(rows.len(), 24);
    let modes: std::collections::BTreeSet<_> = rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(modes.len(), 6);
    for f in ["ablation.csv", "ablation_summary.csv"] {
        assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
    let first = fs::read(d1.path().join("ablation.csv")).unwrap();
    let o = modify(&args, d1.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("6 run(s) reused"));
    assert_eq!(fs::read(d1.path().join("ablation.csv")).unwrap(), first);
}
