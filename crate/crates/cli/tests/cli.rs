use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use misinfo_forge::dataset::Manifest;
use misinfo_forge::synth::SyntheticCorpus;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_misinfo-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Corpus, entities and mock embeddings for 400 records.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let synth = SyntheticCorpus::generate(400, 4, 3);
        synth.corpus.save(dir.path().join("corpus.jsonl")).unwrap();
        synth.annotations.save(dir.path().join("entities.jsonl")).unwrap();
        let ws = Self { dir };
        for modality in ["image", "text"] {
            ok(&[
                "mock-embed",
                "--corpus",
                p(&ws.path("corpus.jsonl")),
                "--modality",
                modality,
                "--dim",
                "32",
                "--seed",
                "5",
                "--out",
                p(&ws.path(&format!("{modality}.mfeb"))),
            ]);
        }
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn generate(&self, strategy: &str, seed: &str, out: &str, extra: &[&str]) -> String {
        let mut args = vec![
            "generate".to_string(),
            "--corpus".into(),
            p(&self.path("corpus.jsonl")).into(),
            "--image-embeddings".into(),
            p(&self.path("image.mfeb")).into(),
            "--text-embeddings".into(),
            p(&self.path("text.mfeb")).into(),
            "--entities".into(),
            p(&self.path("entities.jsonl")).into(),
            "--strategy".into(),
            strategy.into(),
            "--seed".into(),
            seed.into(),
            "--out".into(),
            p(&self.path(out)).into(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }
}

#[test]
fn generate_is_reproducible_across_workers_and_cache() {
    let ws = Workspace::new();
    ws.generate("clip-nest-alt", "42", "a.jsonl", &["--workers", "1"]);
    ws.generate("clip-nest-alt", "42", "b.jsonl", &["--workers", "3"]);
    assert_eq!(fs::read(ws.path("a.jsonl")).unwrap(), fs::read(ws.path("b.jsonl")).unwrap());
    let ma = fs::read(ws.path("a.jsonl.manifest.json")).unwrap();
    assert_eq!(ma, fs::read(ws.path("b.jsonl.manifest.json")).unwrap());

    let manifest = Manifest::load(ws.path("a.jsonl.manifest.json")).unwrap();
    let config = manifest.config.unwrap();
    assert_eq!(config["strategy"], "clip-nest-alt");
    assert_eq!(config["seed"], 42);
    assert_eq!(config["retry_budget"], 10);
    assert!(config.get("workers").is_none() && config.get("out").is_none());

    ok(&[
        "index",
        "--corpus",
        p(&ws.path("corpus.jsonl")),
        "--image-embeddings",
        p(&ws.path("image.mfeb")),
        "--text-embeddings",
        p(&ws.path("text.mfeb")),
        "--k",
        "4",
        "--out",
        p(&ws.path("nn.mftk")),
    ]);
    ws.generate("clip-nest-alt", "42", "c.jsonl", &["--cache", p(&ws.path("nn.mftk"))]);
    assert_eq!(fs::read(ws.path("a.jsonl")).unwrap(), fs::read(ws.path("c.jsonl")).unwrap());

    ws.generate("clip-nest-alt", "43", "d.jsonl", &[]);
    assert_ne!(fs::read(ws.path("a.jsonl")).unwrap(), fs::read(ws.path("d.jsonl")).unwrap());
}

#[test]
fn balanced_runs_and_hybrid() {
    let ws = Workspace::new();
    let out = ws.generate("r-nest", "1", "nei.jsonl", &["--balance", "balanced"]);
    assert!(out.contains("R-NESt"));
    let m = Manifest::load(ws.path("nei.jsonl.manifest.json")).unwrap();
    assert_eq!(m.counts.truthful, m.counts.nei);
    assert!(m.skipped > 0);

    ws.generate("cst-alt", "1", "ooc.jsonl", &[]);
    ok(&[
        "combine",
        "--ooc",
        p(&ws.path("ooc.jsonl")),
        "--nei",
        p(&ws.path("nei.jsonl")),
        "--balance",
        "downsample",
        "--seed",
        "2",
        "--out",
        p(&ws.path("hybrid.jsonl")),
    ]);
    let h = Manifest::load(ws.path("hybrid.jsonl.manifest.json")).unwrap();
    assert_eq!(h.strategy, "R-NESt + CSt-alt");
    assert_eq!((h.counts.truthful, h.counts.ooc), (h.counts.nei, h.counts.nei));

    let table = ok(&["stats", "--dataset", p(&ws.path("ooc.jsonl")), "--dataset", p(&ws.path("hybrid.jsonl"))]);
    let rows: Vec<Vec<&str>> =
        table.lines().skip(2).map(|l| l.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect()).collect();
    assert_eq!(rows[0], ["CSt-alt", "400", "400", "-"]);
    assert_eq!(rows[1][0], "R-NESt + CSt-alt");
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let ws = Workspace::new();
    let config = ws.path("run.toml");
    fs::write(
        &config,
        format!(
            "corpus = {:?}\nseed = 7\n[generate]\nstrategy = \"rst-alt\"\nbalance = \"keep-all\"\nout = {:?}\n",
            p(&ws.path("corpus.jsonl")),
            p(&ws.path("from-config.jsonl"))
        ),
    )
    .unwrap();
    ok(&["--config", p(&config), "generate"]);
    let m = Manifest::load(ws.path("from-config.jsonl.manifest.json")).unwrap();
    assert_eq!((m.strategy.as_str(), m.seed), ("RSt-alt", Some(7)));

    ok(&["generate", "--config", p(&config), "--seed", "8", "--out", p(&ws.path("flag.jsonl"))]);
    let m = Manifest::load(ws.path("flag.jsonl.manifest.json")).unwrap();
    assert_eq!(m.seed, Some(8));
}

#[test]
fn evaluate_and_report() {
    let ws = Workspace::new();
    let cosmos = ws.path("cosmos.json");
    let mut lines = String::new();
    for i in 0..6 {
        lines.push_str(&format!(
            "{{\"img_local_path\":\"test/{i}.jpg\",\"caption1\":\"c{i}\",\"caption2\":\"d{i}\",\"context_label\":{}}}\n",
            i % 2
        ));
    }
    fs::write(&cosmos, lines).unwrap();
    let out = ok(&["import", "--format", "cosmos-test", "--input", p(&cosmos), "--out", p(&ws.path("bench.jsonl"))]);
    assert!(out.contains("6 items (3 truthful / 3 falsified)"));

    // Items 0,2,4 are truthful; 1,3,5 falsified.
    let preds = [
        r#"{"id":0,"pred_label":"truthful"}"#,
        r#"{"id":1,"pred_label":"nei"}"#,
        r#"{"id":2,"pred_label":"ooc"}"#,
        r#"{"id":3,"scores":{"truthful":0.1,"ooc":0.7,"nei":0.2}}"#,
        r#"{"id":4,"pred_label":"truthful"}"#,
        r#"{"id":5,"pred_label":"truthful"}"#,
    ];
    fs::write(ws.path("preds.jsonl"), preds.join("\n")).unwrap();
    let out = ok(&[
        "evaluate",
        "--benchmark",
        p(&ws.path("bench.jsonl")),
        "--predictions",
        p(&ws.path("preds.jsonl")),
        "--name",
        "RSt-C",
        "--out",
        p(&ws.path("r1.json")),
    ]);
    assert!(out.contains("TT 2  TF 1  FT 1  FF 2"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("r1.json")).unwrap()).unwrap();
    assert_eq!(report["counts"], serde_json::json!({"tt": 2, "tf": 1, "ft": 1, "ff": 2}));

    ok(&[
        "evaluate",
        "--benchmark",
        p(&ws.path("bench.jsonl")),
        "--predictions",
        p(&ws.path("preds.jsonl")),
        "--name",
        "RSt-C",
        "--modality",
        "text-only",
        "--out",
        p(&ws.path("r2.json")),
    ]);
    let table = ok(&["report", "--layout", "table3", "--reports", p(&ws.path("r1.json")), p(&ws.path("r2.json"))]);
    let row: Vec<&str> = table.lines().nth(2).unwrap().split_whitespace().collect();
    assert_eq!(row, ["OOC", "RSt-C", "-", "66.7", "66.7", "66.7", "66.7"]);

    fs::write(ws.path("short.jsonl"), preds[..5].join("\n")).unwrap();
    let out =
        run(&["evaluate", "--benchmark", p(&ws.path("bench.jsonl")), "--predictions", p(&ws.path("short.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing predictions"));
}

#[test]
fn meir_import_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("meir.jsonl");
    let mut text = String::new();
    for i in 0..1_500u64 {
        text.push_str(&format!(
            "{{\"id\":{i},\"image_id\":{},\"caption\":\"caption {i}\",\"manipulated\":{}}}\n",
            i / 2,
            i % 3 == 0
        ));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("meir-ds.jsonl");
    ok(&["import", "--format", "meir", "--input", p(&input), "--out", p(&out)]);
    let table = ok(&["stats", "--dataset", p(&out)]);
    let row: Vec<&str> = table.lines().nth(2).unwrap().split_whitespace().collect();
    assert_eq!(row, ["MEIR", "1,000", "-", "500"]);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let corpus = p(&ws.path("corpus.jsonl")).to_string();
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["generate", "--corpus", &corpus, "--seed", "1", "--out", "x"]), Some(2));
    assert_eq!(code(&["generate", "--corpus", &corpus, "--strategy", "nc/bal", "--seed", "1", "--out", "x"]), Some(2));
    assert_eq!(code(&["generate", "--unknown-flag"]), Some(2));
    assert_eq!(code(&["import", "--format", "visualnews", "--input", &corpus, "--out", "x"]), Some(2));
    assert_eq!(code(&["report", "--layout", "table9", "--reports", "r.json"]), Some(2));

    let bad = ws.path("bad.jsonl");
    fs::write(
        &bad,
        "{\"id\":1,\"image_ref\":\"a\",\"caption\":\"\",\"topic\":\"t\",\"source\":\"s\",\"split\":\"train\"}\n",
    )
    .unwrap();
    let out = run(&["generate", "--corpus", p(&bad), "--strategy", "rs-c", "--seed", "1", "--out", p(&ws.path("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = run(&["generate", "--corpus", &corpus, "--strategy", "cst-c", "--seed", "1", "--out", p(&ws.path("o"))]);
    assert_eq!(out.status.code(), Some(1), "missing text embeddings is a data error");
}
