use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corrspec_core::dpi::ChainSpec;
use corrspec_core::prob::{Alphabet, JointDist, Kernel, Marginal};
use corrspec_core::regions::{self, CondChannel};
use serde_json::{json, Value};
use tempfile::TempDir;

fn corrspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stdout).expect("stdout is JSON");
    assert_eq!(v["schema"], "corrspec/1");
    v
}

fn write(dir: &TempDir, name: &str, v: &impl serde::Serialize) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn common_info(dir: &TempDir) -> PathBuf {
    let ch = regions::common_information_channel(2, 2).unwrap();
    let f = regions::candidate_dist(&JointDist::dsbs(0.25), &ch).unwrap();
    write(dir, "common_info.json", &f)
}

#[test]
fn spectrum_of_symmetric_source() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bss025.json", &JointDist::dsbs(0.25));
    let o = corrspec(&["spectrum", s(&p)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!((v["lambda2"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["valid"], true);
    assert!(v["decomposes"].is_null());
    assert_eq!(v["sigma"].as_array().unwrap().len(), 2);
}

#[test]
fn decomposable_joint_reports_split() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "block.json", &json!({"mass": [[0.5, 0.0], [0.0, 0.5]]}));
    let v = stdout_json(&corrspec(&["spectrum", s(&p)]));
    assert!(v["decomposes"].is_object());
}

#[test]
fn io_and_validation_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&corrspec(&["spectrum", "/nonexistent/missing.json"])), 3);
    let bad = write(&dir, "bad.json", &json!({"mass": [[0.5, 0.6]]}));
    let o = corrspec(&["spectrum", s(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
    let extra = write(&dir, "extra.json", &json!({"mass": [[1.0]], "note": 1}));
    assert_eq!(code(&corrspec(&["spectrum", s(&extra)])), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&corrspec(&["frobnicate"])), 2);
    assert_eq!(code(&corrspec(&["spectrum", "x.json", "--no-such-flag"])), 2);
    assert_eq!(
        code(&corrspec(&["witsenhausen", "--px1", "0.3,0.7", "--pu", "0.5,0.5", "--n", "9..4"])),
        2
    );
    assert_eq!(code(&corrspec(&["binary-bounds", "--lambda2", "0.5", "--format", "xml"])), 2);
    assert_eq!(code(&corrspec(&["--help"])), 0);
}

#[test]
fn help_documents_formats() {
    let o = corrspec(&["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["\"mass\"", "\"pxy\"", "\"axes\"", "\"tilde\"", "\"target\"", "corrspec/1"] {
        assert!(text.contains(key), "help lacks {key}");
    }
}

#[test]
fn necc_rejects_common_information() {
    let dir = TempDir::new().unwrap();
    let p = common_info(&dir);
    let o = corrspec(&["necc", s(&p), "--lambda2", "0.5"]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert_eq!(v["pass"], false);
    let failing: Vec<&Value> = v["constraints"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .collect();
    assert!(!failing.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("failing constraint"));

    let o = corrspec(&["necc", s(&p), "--lambda2", "0.5", "--subsets", "none"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["constraints"].as_array().unwrap().len(), 1);
}

#[test]
fn dpi_check_on_cascade() {
    let dir = TempDir::new().unwrap();
    let c = ChainSpec::new(JointDist::dsbs(0.25), Kernel::bsc(0.1)).unwrap();
    let p = write(&dir, "chain.json", &c);
    let o = corrspec(&["dpi-check", s(&p)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["holds"], true);
    assert!(v["slack"][0].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn validate_joint_and_raw_tilde() {
    let dir = TempDir::new().unwrap();
    let j = write(&dir, "j.json", &JointDist::dsbs(0.1));
    assert_eq!(code(&corrspec(&["validate", s(&j)])), 0);
    let t = write(&dir, "t.json", &json!({"tilde": [[0.9, 0.0], [0.0, 0.5]]}));
    let o = corrspec(&["validate", "--tilde", s(&t)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["accept"], false);
}

#[test]
fn nletter_reports_multiplicity() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bss.json", &JointDist::dsbs(0.25));
    let o = corrspec(&["nletter", s(&p), "--n", "3", "--top-k", "8"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["multiplicity_holds"], true);
    let vals: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(vals.len(), 8);
    assert!((vals[1] - 0.5).abs() < 1e-12 && (vals[3] - 0.5).abs() < 1e-12);
    assert!((vals[4] - 0.25).abs() < 1e-12);
}

#[test]
fn witsenhausen_csv_trajectory() {
    let o = corrspec(&["witsenhausen", "--px1", "0.3,0.7", "--pu", "0.5,0.5", "--n", "4..16", "--s1", "0"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,gap,certified_lower,lambda2");
    assert_eq!(lines.len(), 14);
    assert!(!text.contains('\r'));
    let last: Vec<f64> = lines[13].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 16.0);
    assert!(last[3] >= 0.999);

    let o = corrspec(&["witsenhausen", "--px1", "0.3,0.7", "--pu", "0.5,0.5", "--n", "5", "--format", "json"]);
    assert_eq!(stdout_json(&o)["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn binary_bounds_csv() {
    let a = corrspec(&["binary-bounds", "--lambda2", "0.5", "--grid", "99"]);
    let b = corrspec(&["binary-bounds", "--lambda2", "0.5", "--grid", "99"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "a,b,outer1_lo,outer1_hi,outer2_lo,outer2_hi,inner_lo,inner_hi"
    );
    assert_eq!(text.lines().count(), 100);
}

#[test]
fn oracle_is_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bss.json", &JointDist::dsbs(0.25));
    let one = dir.path().join("one.json");
    let two = dir.path().join("two.json");
    let args = ["oracle", "--sources", s(&p), "--n", "2", "--mode", "random", "--budget", "3000", "--seed", "7"];
    let o1 = corrspec(&[&args[..], &["--workers", "1", "--output", s(&one)]].concat());
    let o2 = corrspec(&[&args[..], &["--workers", "2", "--output", s(&two)]].concat());
    assert_eq!(code(&o1), 0);
    assert_eq!(code(&o2), 0);
    assert!(o1.stdout.is_empty());
    let (a, b) = (std::fs::read(&one).unwrap(), std::fs::read(&two).unwrap());
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["schema"], "corrspec/1");
    assert_eq!(v["samples_evaluated"], 3000);
    assert_eq!(v["pass"], true);

    assert_eq!(code(&corrspec(&["oracle", "--sources", s(&p), "--mode", "sideways"])), 2);
}

#[test]
fn rd_region_csv_and_summary() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "s.json", &JointDist::dsbs(0.25));
    let d = write(
        &dir,
        "d.json",
        &json!({"d1": [[0.0, 1.0], [1.0, 0.0]], "d2": [[0.0, 1.0], [1.0, 0.0]], "target": [0.3, 0.3]}),
    );
    let sum = dir.path().join("summary.json");
    let args = ["rd-region", "--sources", s(&src), "--distortion", s(&d), "--set", "sin", "--budget", "20", "--seed", "3"];
    let o = corrspec(&[&args[..], &["--summary", s(&sum)]].concat());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,kind,r1,r2,rsum,ed1,ed2,in_set,accepted");
    assert_eq!(text.lines().count(), 21);
    let v: Value = serde_json::from_slice(&std::fs::read(&sum).unwrap()).unwrap();
    assert_eq!(v["schema"], "corrspec/1");
    assert_eq!(v["budget"], 20);
    assert_eq!(corrspec(&args).stdout, o.stdout);

    let j = corrspec(&[&args[..], &["--format", "json"]].concat());
    let v = stdout_json(&j);
    assert_eq!(v["samples"].as_array().unwrap().len(), 20);
    assert_eq!(v["summary"]["seed"], 3);

    assert_eq!(code(&corrspec(&[&args[..6], &["--set", "s9"]].concat())), 2);
}

#[test]
fn mac_check_verdicts() {
    let dir = TempDir::new().unwrap();
    let bss = JointDist::dsbs(0.25);
    let src = write(&dir, "s.json", &bss);
    let a2 = Alphabet::range(2);
    let copy = CondChannel::product(&Kernel::identity(&a2), &Kernel::identity(&a2));
    let cand = write(&dir, "p.json", &regions::candidate_dist(&bss, &copy).unwrap());
    let id = write(&dir, "id.json", &Kernel::identity(&Alphabet::range(4)));
    let dead = write(&dir, "dead.json", &Kernel::constant(&Alphabet::range(4), &Marginal::uniform(2)));

    let o = corrspec(&["mac-check", "--sources", s(&src), "--channel", s(&id), "--candidate", s(&cand)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["pass"], true);
    assert!(v["spectral"]["constraints"].is_array());

    let o = corrspec(&["mac-check", "--sources", s(&src), "--channel", s(&dead), "--candidate", s(&cand), "--lambda2", "0.5"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["rates_ok"], false);

    let other = write(&dir, "other.json", &JointDist::dsbs(0.1));
    let o = corrspec(&["mac-check", "--sources", s(&other), "--channel", s(&id), "--candidate", s(&cand)]);
    assert_eq!(code(&o), 3);
}
