use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_latent-probe");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LATENT_PROBE_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn fixtures(dir: &Path, count: usize) -> PathBuf {
    let out = dir.join("fx");
    let o = run(&[
        "make-fixtures",
        "--out",
        out.to_str().unwrap(),
        "--count",
        &count.to_string(),
        "--seed",
        "42",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("experiment.json")
}

fn attack(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "attack",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn seeded_batch_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 8);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&attack(&cfg, &a, &["--seed", "42"])), 0);
    assert_eq!(code(&attack(&cfg, &b, &["--seed", "42"])), 0);
    let ra = std::fs::read(a.join("run_record.json")).unwrap();
    let rb = std::fs::read(b.join("run_record.json")).unwrap();
    assert_eq!(ra, rb);
    assert!(a.join("adversarial/img_007.imgf").exists());
}

#[test]
fn env_seed_is_the_last_resort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 2);
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let zero = dir.path().join("zero");
    assert_eq!(code(&attack(&cfg, &flag, &["--seed", "7"])), 0);
    let o = Command::new(BIN)
        .args([
            "attack",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            env.to_str().unwrap(),
        ])
        .env("LATENT_PROBE_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(code(&attack(&cfg, &zero, &[])), 0);
    let read = |p: &Path| std::fs::read_to_string(p.join("run_record.json")).unwrap();
    assert_eq!(read(&flag), read(&env));
    assert_ne!(read(&flag), read(&zero));

    // a seed written in the config beats the environment
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["attack"] = serde_json::json!({"seed": 0});
    let pinned = cfg.with_file_name("pinned.json");
    std::fs::write(&pinned, v.to_string()).unwrap();
    let pinned_out = dir.path().join("pinned");
    let o = Command::new(BIN)
        .args([
            "attack",
            "--config",
            pinned.to_str().unwrap(),
            "--out",
            pinned_out.to_str().unwrap(),
        ])
        .env("LATENT_PROBE_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(read(&pinned_out), read(&zero));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["attack", "--config", missing.to_str().unwrap()])), 2);
    let cfg = fixtures(dir.path(), 1);
    let out = dir.path().join("o");
    assert_eq!(code(&attack(&cfg, &out, &["--mode", "Z"])), 2);
    assert_eq!(code(&attack(&cfg, &out, &["--eta", "-0.5"])), 2);
    assert_eq!(code(&attack(&cfg, &out, &["--queries", "0"])), 2);
    assert_eq!(code(&run(&["attack", "--grad", "newton"])), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"oracle": {"kind": "toy-linear"}}"#).unwrap();
    assert_eq!(code(&run(&["attack", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn budget_shortfall_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 1);
    let o = attack(&cfg, &dir.path().join("o"), &["--queries", "3", "--budget", "2"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // the partial report is still written
    assert!(dir.path().join("o/run_record.json").exists());
}

#[test]
fn unreachable_oracle_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 1);
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}");
    let o = attack(&cfg, &dir.path().join("o"), &["--oracle-url", &url, "--grad", "spsa"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn remote_attack_against_served_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 2);
    let mut child = Child(
        Command::new(BIN)
            .args(["serve", "--seed", "42", "--bind", "127.0.0.1:0", "--budget", "100"])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut line = String::new();
    BufReader::new(child.0.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = line.split_whitespace().last().unwrap().to_string();
    assert!(url.starts_with("http://127.0.0.1:"), "{line}");

    let (remote, local) = (dir.path().join("remote"), dir.path().join("local"));
    // analytic gradients need a Jacobian the remote side does not expose
    assert_eq!(code(&attack(&cfg, &remote, &["--oracle-url", &url])), 2);
    let spsa = ["--grad", "spsa", "--seed", "1"];
    let o = attack(
        &cfg,
        &remote,
        &[&["--oracle-url", url.as_str()][..], &spsa[..]].concat(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&attack(&cfg, &local, &spsa)), 0);
    let load = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(p.join("run_record.json")).unwrap()).unwrap()
    };
    let (r, l) = (load(&remote), load(&local));
    let g = |v: &serde_json::Value| v["aggregate"]["mean_growth_pct"].as_f64().unwrap();
    // the wire carries f32 pixels; results agree to that precision
    assert!((g(&r) - g(&l)).abs() < 1e-3, "{} vs {}", g(&r), g(&l));
    assert_eq!(r["aggregate"]["mean_queries_used"], 3.0 * 17.0);
}

#[test]
fn sensitivity_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures(dir.path(), 2);
    let s = dir.path().join("s");
    let o = run(&[
        "sensitivity",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        s.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("img_000: eta_min "), "{stdout}");
    assert!(s.join("sensitivity.json").exists());

    let mut outs = Vec::new();
    for t in ["5", "1", "3"] {
        let out = dir.path().join(format!("t{t}"));
        assert_eq!(code(&attack(&cfg, &out, &["--queries", t])), 0);
        outs.push(out);
    }
    let csv = dir.path().join("plot.csv");
    let mut args = vec!["plot-data", "--sweep", "queries", "--out", csv.to_str().unwrap()];
    args.extend(outs.iter().map(|p| p.to_str().unwrap()));
    assert_eq!(code(&run(&args)), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let keys: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(keys, ["queries", "1", "3", "5"]);

    // a record with a different lambda cannot join the sweep
    let odd = dir.path().join("odd");
    assert_eq!(code(&attack(&cfg, &odd, &["--queries", "2", "--lambda", "3"])), 0);
    let o = run(&[
        "plot-data",
        "--sweep",
        "queries",
        outs[0].to_str().unwrap(),
        odd.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}
