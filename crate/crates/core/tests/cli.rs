use std::fs;
use std::path::Path;
use std::process::Command;

use lqo_rom::LqoSystem;

fn lqo_rom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lqo-rom"))
}

fn write_small_config(path: &Path) {
    let config = r#"{
        "benchmark": { "n": 40, "r_list": [2, 4], "horizon": 2.0 },
        "optimizer": { "max_iterations": 200 }
    }"#;
    fs::write(path, config).unwrap();
}

#[test]
fn check_suite_passes() {
    let out = lqo_rom().args(["check", "--suite", "manifold", "--seeds", "5"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.contains("PASS")), "{stdout}");
}

#[test]
fn reduce_writes_summary_history_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write_small_config(&config);
    let out_dir = dir.path().join("out");
    let out = lqo_rom()
        .args(["reduce", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .arg("--emit-plots-data")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let orders = summary["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    for order in orders {
        let (bt, opt) = (order["h2_bt"].as_f64().unwrap(), order["h2_opt"].as_f64().unwrap());
        assert!(opt <= bt, "{order}");
    }
    for r in [2, 4] {
        let csv = fs::read_to_string(out_dir.join(format!("convergence_r{r}.csv"))).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "k,f,grad_norm_rel,step,backtracks,pair_accepted");
        assert!(out_dir.join(format!("time_response_r{r}.csv")).is_file());
        let rom = LqoSystem::load(&out_dir.join(format!("rom_r{r}"))).unwrap();
        assert_eq!(rom.n(), r);
    }
}

#[test]
fn exported_system_round_trips_through_reduce() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write_small_config(&config);
    let fom_dir = dir.path().join("fom");
    let out = lqo_rom().args(["export", "--config"]).arg(&config).arg("--out").arg(&fom_dir).output().unwrap();
    assert!(out.status.success());
    assert_eq!(LqoSystem::load(&fom_dir).unwrap().n(), 40);

    let out_dir = dir.path().join("out");
    let out = lqo_rom()
        .args(["reduce", "--orders", "3", "--config"])
        .arg(&config)
        .arg("--fom")
        .arg(&fom_dir)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("r=3"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"benchmark": {"nn": 10}}"#).unwrap();
    let out = lqo_rom().args(["export", "--config"]).arg(&config).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}

#[test]
fn order_larger_than_system_is_rejected_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    write_small_config(&config);
    let out = lqo_rom()
        .args(["reduce", "--orders", "41", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("reduced order 41"));
    assert!(!dir.path().join("out").join("summary.json").exists());
}
