use std::fs;
use std::path::Path;
use std::process::Command;

use rumrec::io;

fn rumrec(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_rumrec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run rumrec");
    assert!(
        out.status.success(),
        "rumrec {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

const ENV: &str =
    r#"{"nb_users": 30, "nb_prods": 12, "nb_sessions": 6, "nb_items_session": 4, "dimension": 3}"#;

#[test]
fn simulate_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();
    fs::write(d.join("env.json"), ENV).unwrap();
    fs::write(
        d.join("train.json"),
        r#"{"epochs": 5, "dimension": 3, "batch": 16}"#,
    )
    .unwrap();

    rumrec(&[
        "simulate",
        "--config",
        &s("env.json"),
        "--seed",
        "4",
        "--out",
        &s("sim"),
    ]);
    let world = io::read_world(&d.join("sim/world.json")).unwrap();
    assert_eq!(
        (world.nb_users(), world.nb_prods(), world.config.seed),
        (30, 12, 4)
    );
    assert_eq!(
        io::read_events(&d.join("sim/events.csv")).unwrap().len(),
        180
    );

    for family in ["rum-mf", "mf-sm", "mf-pclick"] {
        rumrec(&[
            "train",
            "--world",
            &s("sim/world.json"),
            "--events",
            &s("sim/events.csv"),
            "--family",
            family,
            "--config",
            &s("train.json"),
            "--out",
            &s(family),
        ]);
        let params = io::read_checkpoint(&d.join(family).join("checkpoint.json")).unwrap();
        assert_eq!(params.family.name(), family);
        assert_eq!(params.dimension(), 3);
        assert_eq!(
            header(&d.join(family).join("loss.csv")),
            "epoch,mean_nll,reg_term"
        );
        assert_eq!(
            fs::read_to_string(d.join(family).join("loss.csv"))
                .unwrap()
                .lines()
                .count(),
            6
        );
    }

    rumrec(&[
        "evaluate",
        "--world",
        &s("sim/world.json"),
        "--events",
        &s("sim/events.csv"),
        "--checkpoint",
        &s("rum-mf/checkpoint.json"),
        "--checkpoint",
        &s("mf-pclick/checkpoint.json"),
        "--k",
        "1,3",
        "--out",
        &s("eval"),
    ]);
    let metrics = fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("method,objective,k,welfare,utility,revenue,sales,precision,"));
    // 2 oracles + bestof + 4 rum-mf objectives + 2 pclick objectives, at 2 ks
    assert_eq!(metrics.lines().count(), 1 + 9 * 2);
    assert!(metrics.contains("\nrum-mf,welfare,3,"));
    assert!(metrics.contains("\nmf-pclick,revenue,1,"));
    assert!(!metrics.contains("mf-pclick,welfare"));
    assert_eq!(
        header(&d.join("eval/slates.csv")),
        "user,method,objective,k,rank,item,evps"
    );
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg =
        format!(r#"{{"env": {ENV}, "train": {{"epochs": 3, "dimension": 3}}, "n_seeds": 2}}"#);
    fs::write(d.join("exp.json"), cfg).unwrap();
    let out = d.join("exp");
    rumrec(&[
        "experiment",
        "--config",
        d.join("exp.json").to_str().unwrap(),
        "--k",
        "1,2",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let metrics = fs::read_to_string(out.join("custom/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 13 * 2);
    let runs = fs::read_to_string(out.join("custom/runs.csv")).unwrap();
    assert!(runs.starts_with("seed,method,"));
    assert_eq!(runs.lines().count(), 1 + 13 * 2 * 2);
    assert!(runs.lines().nth(1).unwrap().starts_with("7,"));
    assert!(fs::read_to_string(out.join("report.md"))
        .unwrap()
        .contains("Welfare@1"));
    assert!(out.join("config.json").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_rumrec"))
        .args(["simulate", "--preset", "tiny", "--out", "/nonexistent/x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tiny"));
}
