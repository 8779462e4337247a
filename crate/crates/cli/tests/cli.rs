use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_semzsl");

fn repo_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn semzsl(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn semzsl")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Synthetic dataset plus its generated config in `dir/s`.
fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth-data", "--out", "s", "--seed", "4"];
    args.extend_from_slice(extra);
    ok(&semzsl(dir, &args));
    dir.join("s/run.cfg")
}

#[test]
fn train_eval_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--sigma-class", "1", "--sigma-desc", "0.1"]);
    let cfg = cfg.to_str().unwrap();
    let files = [
        "losses.csv",
        "report.csv",
        "predictions_zsl.csv",
        "predictions_gzsl.csv",
        "checkpoint.txt",
    ];
    let mut runs = Vec::new();
    for out in ["a", "b"] {
        let o = format!("output={out}");
        ok(&semzsl(
            tmp.path(),
            &["-c", cfg, "--set", &o, "--set", "epochs=60", "train"],
        ));
        ok(&semzsl(tmp.path(), &["-c", cfg, "--set", &o, "eval"]));
        let dir = tmp.path().join(out);
        runs.push(files.map(|f| std::fs::read(dir.join(f)).unwrap()));
    }
    for (i, f) in files.iter().enumerate() {
        assert!(!runs[0][i].is_empty(), "{f} empty");
        assert_eq!(runs[0][i], runs[1][i], "{f} differs between reruns");
    }
    let report = String::from_utf8(runs[0][1].clone()).unwrap();
    assert!(report.starts_with("variation,averaging,acc,acc_s,acc_u,hm,bc\nours,per-class,"));
}

#[test]
fn generative_train_eval_synthesize() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &[]);
    let cfg = cfg.to_str().unwrap();
    let common = ["-c", cfg, "--method", "gen", "--set", "steps=40", "--set", "output=g"];
    ok(&semzsl(tmp.path(), &[&common[..], &["train"]].concat()));
    let table = ok(&semzsl(tmp.path(), &[&common[..], &["eval"]].concat()));
    assert!(table.contains("Acc_u"), "{table}");
    ok(&semzsl(
        tmp.path(),
        &[&common[..], &["synthesize", "--n", "7"]].concat(),
    ));
    let synth = std::fs::read_to_string(tmp.path().join("g/synthetic_unseen.csv")).unwrap();
    assert_eq!(synth.lines().count(), 3 * 7);
    assert!(synth.lines().all(|l| l.starts_with("unseen_")));
    let first = std::fs::read(tmp.path().join("g/synthetic_unseen.csv")).unwrap();
    ok(&semzsl(
        tmp.path(),
        &[&common[..], &["synthesize", "--n", "7"]].concat(),
    ));
    assert_eq!(std::fs::read(tmp.path().join("g/synthetic_unseen.csv")).unwrap(), first);

    // an embedding checkpoint cannot synthesize
    ok(&semzsl(
        tmp.path(),
        &["-c", cfg, "--set", "epochs=5", "--set", "output=e", "train-embed"],
    ));
    let out = semzsl(tmp.path(), &["-c", cfg, "--set", "output=e", "synthesize"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

/// Points per row: one for each column where the row holds the maximum.
fn borda_oracle(rows: &[Vec<f64>]) -> Vec<u32> {
    let mut pts = vec![0; rows.len()];
    for c in 0..rows[0].len() {
        let mut best = f64::NEG_INFINITY;
        for r in rows {
            if r[c] > best {
                best = r[c];
            }
        }
        for (p, r) in pts.iter_mut().zip(rows) {
            if r[c] == best {
                *p += 1;
            }
        }
    }
    pts
}

#[test]
fn compare_bc_column_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--sigma-class", "1.5", "--sigma-desc", "0.5"]);
    let out = ok(&semzsl(
        tmp.path(),
        &[
            "-c",
            cfg.to_str().unwrap(),
            "--set",
            "epochs=40",
            "--set",
            "output=cmp",
            "compare",
        ],
    ));
    assert!(out.contains("Only Class Name") && out.contains("Only ChatGPT") && out.contains("Ours"));
    let csv = std::fs::read_to_string(tmp.path().join("cmp/compare.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let metrics: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r[2..6].iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    let bc: Vec<u32> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert_eq!(bc, borda_oracle(&metrics));
    for v in ["only-class-name", "only-chatgpt", "ours"] {
        assert!(tmp.path().join("cmp").join(v).join("checkpoint.txt").exists());
    }
}

#[test]
fn sweep_alpha_rows_and_empty_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &[]);
    let cfg = cfg.to_str().unwrap();
    let out = ok(&semzsl(
        tmp.path(),
        &["-c", cfg, "--set", "epochs=10", "--set", "output=sw", "sweep-alpha"],
    ));
    assert_eq!(out.lines().count(), 1 + 5 * 2, "{out}");
    let zsl_only = ok(&semzsl(
        tmp.path(),
        &[
            "-c",
            cfg,
            "--set",
            "epochs=10",
            "--mode",
            "zsl",
            "--set",
            "output=sw2",
            "sweep-alpha",
            "--alphas",
            "0.3,0.7",
        ],
    ));
    assert_eq!(zsl_only.lines().count(), 1 + 2);
    let empty = semzsl(tmp.path(), &["-c", cfg, "sweep-alpha", "--alphas"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(stderr(&empty).contains("empty"));
}

#[test]
fn fetch_descriptions_fully_cached() {
    let split = repo_data().join("splits/modelnet40.split");
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&semzsl(
        tmp.path(),
        &["--split", split.to_str().unwrap(), "fetch-descriptions", "--offline"],
    ));
    assert!(out.contains("0 fetched, 40 cached"), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("hit\t")).count(), 40);
}

#[test]
fn fetch_descriptions_offline_miss() {
    let split = repo_data().join("splits/modelnet40.split");
    let tmp = tempfile::tempdir().unwrap();
    let out = semzsl(
        tmp.path(),
        &[
            "--split",
            split.to_str().unwrap(),
            "fetch-descriptions",
            "--offline",
            "--cache",
            "empty",
            "--workers",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("\"airplane\""), "{}", stderr(&out));
}

/// Chat-completion stand-in answering `n` requests.
fn mock_endpoint(n: usize) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for _ in 0..n {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            bodies.push(String::from_utf8(body).unwrap());
            let reply = r#"{"choices":[{"message":{"role":"assistant","content":"A chair has four legs."}}]}"#;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, handle)
}

#[test]
fn fetch_descriptions_from_mock_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("tiny.split"),
        "name = tiny\nseen = chair\nunseen = night stand\n",
    )
    .unwrap();
    let (url, server) = mock_endpoint(2);
    let out = Command::new(BIN)
        .current_dir(tmp.path())
        .env("SEMZSL_MOCK_KEY", "k")
        .args([
            "--split",
            "tiny.split",
            "fetch-descriptions",
            "--cache",
            "cache",
            "--url",
            &url,
            "--api-key-env",
            "SEMZSL_MOCK_KEY",
            "--workers",
            "1",
        ])
        .output()
        .unwrap();
    let text = ok(&out);
    assert!(text.contains("2 fetched, 0 cached"), "{text}");
    let bodies = server.join().unwrap();
    assert!(bodies.iter().any(|b| b.contains("Describe the night stand object")));
    let cache = tmp.path().join("cache");
    assert_eq!(
        std::fs::read_to_string(cache.join("chair.txt")).unwrap(),
        "A chair has four legs.\n"
    );
    assert!(cache.join("night_stand.txt").exists());
    let meta = std::fs::read_to_string(cache.join("meta.txt")).unwrap();
    assert!(meta.contains("model=gpt-3.5-turbo") && meta.contains("prompt_sha256="));

    // second run is all hits and needs no endpoint
    let again = ok(&semzsl(
        tmp.path(),
        &[
            "--split",
            "tiny.split",
            "fetch-descriptions",
            "--cache",
            "cache",
            "--offline",
        ],
    ));
    assert!(again.contains("0 fetched, 2 cached"));
}

#[test]
fn fetch_without_api_key_is_transport_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("tiny.split"),
        "name = tiny\nseen = chair\nunseen = bed\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .current_dir(tmp.path())
        .env_remove("SEMZSL_UNSET_KEY")
        .args([
            "--split",
            "tiny.split",
            "fetch-descriptions",
            "--cache",
            "c",
            "--api-key-env",
            "SEMZSL_UNSET_KEY",
            "--url",
            "http://127.0.0.1:9/never",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("SEMZSL_UNSET_KEY"));
}

fn semantics_rows(path: &Path) -> Vec<(String, String, Vec<f64>)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("class,"))
        .map(|l| {
            let mut f = l.split(',');
            let name = f.next().unwrap().to_string();
            let part = f.next().unwrap().to_string();
            (name, part, f.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn build_semantics_variations() {
    let tmp = tempfile::tempdir().unwrap();
    let split = repo_data().join("splits/scanobjectnn_a.split");
    let wv = repo_data().join("sample_vectors.txt");
    let build = |v: &str| {
        let out = format!("{v}.csv");
        ok(&semzsl(
            tmp.path(),
            &[
                "--split",
                split.to_str().unwrap(),
                "--variation",
                v,
                "build-semantics",
                "--word-vectors",
                wv.to_str().unwrap(),
                "--out",
                &out,
            ],
        ));
        semantics_rows(&tmp.path().join(out))
    };
    let name = build("only-class-name");
    let desc = build("only-chatgpt");
    let ours = build("ours");
    assert_eq!(name.len(), 2 * 37);
    for rows in [&name, &desc] {
        assert!(rows
            .iter()
            .filter(|r| r.1 == "p")
            .all(|r| r.2.iter().all(|&x| x == 0.0)));
    }
    // ours carries both; the others pick one of them into the class slot
    for ((n, d), o) in name.chunks(2).zip(desc.chunks(2)).zip(ours.chunks(2)) {
        assert_eq!(n[0].2, o[0].2);
        assert_eq!(d[0].2, o[1].2);
        assert!(o[1].2.iter().any(|&x| x != 0.0));
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &[]);
    let cfg = cfg.to_str().unwrap();

    let missing_ckpt = semzsl(tmp.path(), &["-c", cfg, "--set", "output=none", "eval"]);
    assert_eq!(missing_ckpt.status.code(), Some(3));

    let unknown_key = semzsl(tmp.path(), &["-c", cfg, "--set", "colour=red", "train"]);
    assert_eq!(unknown_key.status.code(), Some(2));

    let bad_alpha = semzsl(tmp.path(), &["-c", cfg, "--alpha", "0.25", "train"]);
    assert_eq!(bad_alpha.status.code(), Some(2));

    let csv = tmp.path().join("s/train.csv");
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str("seen_000,1.0,2.0\n");
    std::fs::write(&csv, text).unwrap();
    let ragged = semzsl(tmp.path(), &["-c", cfg, "train"]);
    assert_eq!(ragged.status.code(), Some(3), "{}", stderr(&ragged));
}
