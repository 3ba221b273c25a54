use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

fn pmpl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pmpl"));
    c.env_remove("PMPL_SEED").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    pmpl().args(args).output().expect("spawn pmpl")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// 240 points in the unit square, labelled by which side of the diagonal they fall.
fn write_csv(dir: &Path) -> PathBuf {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut s = String::from("x1,x2,label\n");
    for _ in 0..240 {
        let (a, b) = (next(), next());
        s.push_str(&format!("{a:.4},{b:.4},{}\n", if a > b { 0 } else { 1 }));
    }
    let p = dir.join("toy.csv");
    fs::write(&p, s).unwrap();
    p
}

fn free_ports() -> String {
    let ls: Vec<TcpListener> = (0..3).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    ls.iter().map(|l| l.local_addr().unwrap().to_string()).collect::<Vec<_>>().join(",")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn matrix_check_prints_the_standard_coefficients() {
    let o = run(&["matrix-check"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    assert!(out.contains("c    (1, -2, 1)"), "{out}");
    assert!(out.contains("c'   (1, -3, 1)"), "{out}");
    assert!(out.contains("c''  (1, 3, -2)"), "{out}");
    assert!(out.contains("a1 a2 (1, 1)"), "{out}");
}

#[test]
fn matrix_check_rejects_bad_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let singular = dir.path().join("singular.txt");
    fs::write(&singular, "1 0 1\n2 0 2\n2 2 -3\n3 3 -4\n").unwrap();
    let o = run(&["matrix-check", "--matrix", s(&singular)]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains("Invertible"), "{}", text(&o));

    let wide = dir.path().join("wide.txt");
    fs::write(&wide, "1 0 1 0 0\n".repeat(6)).unwrap();
    let o = run(&["matrix-check", "--matrix", s(&wide)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("unsupported shape: 6x5"), "{}", text(&o));

    let big = dir.path().join("big.txt");
    fs::write(&big, "1 0 1\n1 1 -1\n2 2 300\n3 3 -4\n").unwrap();
    let o = run(&["matrix-check", "--matrix", s(&big), "--ell", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("RingEntries"), "{}", text(&o));
}

#[test]
fn dealer_gen_writes_three_pools() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let out = dir.path().join("pools");
    let o = run(&["dealer-gen", "--data", s(&csv), "--batch", "20", "--out", s(&out)]);
    assert!(o.status.success(), "{}", text(&o));
    for i in 0..3 {
        let len = fs::metadata(out.join(format!("p{i}.pool"))).unwrap().len();
        assert!(len > 1000, "p{i}.pool has {len} bytes");
    }

    let empty = dir.path().join("empty");
    let o = run(&["dealer-gen", "--samples", "0", "--out", s(&empty)]);
    assert!(o.status.success(), "{}", text(&o));
    let sizes: Vec<u64> = (0..3).map(|i| fs::metadata(empty.join(format!("p{i}.pool"))).unwrap().len()).collect();
    assert!(sizes.iter().all(|l| *l == sizes[0] && *l < 1000), "{sizes:?}");
}

#[test]
fn local_sim_trains_and_pools_with_a_drop_match_the_live_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let live = dir.path().join("live.bin");
    let common = ["--data", s(&csv), "--batch", "10", "--epochs", "2", "--lr", "0.5", "--seed", "4"];

    let o = pmpl().arg("train").args(common).args(["--out", s(&live)]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    let acc: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("accuracy on 240 training samples: "))
        .and_then(|v| v.trim_end_matches('%').parse().ok())
        .unwrap_or_else(|| panic!("no accuracy line in {out}"));
    assert!(acc > 85.0, "accuracy {acc}");
    assert!(fs::read_to_string(format!("{}.txt", live.display())).unwrap().starts_with("# layer 0 2x1"));

    let pools = dir.path().join("pools");
    let o = pmpl().arg("dealer-gen").args(common).args(["--out", s(&pools)]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let dropped = dir.path().join("dropped.bin");
    let o = pmpl()
        .arg("train")
        .args(common)
        .args(["--pool", s(&pools), "--drop-at", "17", "--out", s(&dropped)])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("P2 left after 17 iterations"), "{}", text(&o));
    assert_eq!(fs::read(&live).unwrap(), fs::read(&dropped).unwrap());
}

#[test]
fn config_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let conf = dir.path().join("run.conf");
    fs::write(&conf, format!("data = {}\nbatch = 12\nseed = 5\nlr = 0.4\n", csv.display())).unwrap();
    let train = |name: &str, env: Option<&str>, extra: &[&str]| -> Vec<u8> {
        let out = dir.path().join(name);
        let mut c = pmpl();
        if let Some(e) = env {
            c.env("PMPL_SEED", e);
        }
        let o = c.args(["train", "--config", s(&conf), "--out", s(&out)]).args(extra).output().unwrap();
        assert!(o.status.success(), "{}", text(&o));
        fs::read(out).unwrap()
    };
    let from_conf = train("a.bin", None, &[]);
    let explicit = train("b.bin", None, &["--seed", "5", "--batch", "12"]);
    assert_eq!(from_conf, explicit);
    let env7 = train("c.bin", Some("7"), &[]);
    let flag7 = train("d.bin", None, &["--seed", "7"]);
    assert_eq!(env7, flag7);
    assert_ne!(env7, from_conf);
    let flag_wins = train("e.bin", Some("9"), &["--seed", "7"]);
    assert_eq!(flag_wins, flag7);

    fs::write(&conf, "colour = red\n").unwrap();
    let o = run(&["train", "--config", s(&conf)]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn role_and_transport_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    for args in [
        vec!["--role", "local-sim", "--transport", "tcp"],
        vec!["--role", "p1", "--transport", "inproc"],
        vec!["--role", "dealer"],
        vec!["--role", "p3"],
    ] {
        let o = pmpl().args(["train", "--data", s(&csv), "--batch", "10"]).args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", text(&o));
    }
    let o = run(&["train", "--data", s(&csv), "--role", "p0", "--peers", "127.0.0.1:1,127.0.0.1:2,127.0.0.1:3"]);
    assert_eq!(o.status.code(), Some(2), "missing pool: {}", text(&o));
}

fn spawn_party(role: &str, peers: &str, pools: &Path, csv: &Path, out: &Path, extra: &[&str]) -> Child {
    pmpl()
        .args(["train", "--role", role, "--peers", peers, "--pool", s(pools), "--data", s(csv)])
        .args(["--batch", "10", "--epochs", "2", "--lr", "0.5", "--seed", "4", "--out", s(out)])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap()
}

#[test]
fn tcp_parties_reveal_only_at_p0_and_survive_p2_leaving() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_csv(dir.path());
    let pools = dir.path().join("pools");
    let common = ["--data", s(&csv), "--batch", "10", "--epochs", "2", "--lr", "0.5", "--seed", "4"];
    let o = pmpl().arg("dealer-gen").args(common).args(["--out", s(&pools)]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let reference = dir.path().join("ref.bin");
    let o = pmpl().arg("train").args(common).args(["--out", s(&reference)]).output().unwrap();
    assert!(o.status.success(), "{}", text(&o));

    for p2_extra in [vec![], vec!["--drop-at", "9"]] {
        let peers = free_ports();
        let outs: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("tcp{i}.bin"))).collect();
        let kids: Vec<Child> = (0..3)
            .map(|i| {
                let extra: &[&str] = if i == 2 { &p2_extra } else { &[] };
                spawn_party(&format!("p{i}"), &peers, &pools, &csv, &outs[i], extra)
            })
            .collect();
        let res: Vec<Output> = kids.into_iter().map(|k| k.wait_with_output().unwrap()).collect();
        for (i, o) in res.iter().enumerate() {
            assert!(o.status.success(), "p{i} {p2_extra:?}: {}", text(o));
        }
        assert_eq!(fs::read(&outs[0]).unwrap(), fs::read(&reference).unwrap(), "{p2_extra:?}");
        for i in 1..3 {
            assert!(!outs[i].exists(), "P{i} wrote a model");
            assert!(text(&res[i]).contains("no model at this party"));
        }
        fs::remove_file(&outs[0]).unwrap();
    }
}

#[test]
fn verify_reports_no_mismatches() {
    let o = run(&["verify", "--op", "mul", "--trials", "64"]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(text(&o).matches("0 mismatches  PASS").count(), 2, "{}", text(&o));
    let o = run(&["verify", "--op", "cube"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_rows_match_closed_forms() {
    let o = run(&["bench", "--n", "2", "--d", "3", "--m", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = text(&o);
    assert_eq!(out.matches("PASS").count(), 8, "{out}");
    assert!(out.contains("reported (not asserted)"));
}
