use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn docsiam(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docsiam"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DOCSIAM_DATA_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Two classes with disjoint vocabularies, plus matching word vectors.
fn write_data(dir: &Path) {
    let classes = [("sport", ["goal", "match", "team", "coach", "league"]), ("tech", ["chip", "phone", "code", "robot", "cloud"])];
    for (c, (label, words)) in classes.iter().enumerate() {
        let class_dir = dir.join("corpus").join(label);
        fs::create_dir_all(&class_dir).unwrap();
        for i in 0..30 {
            let text: Vec<&str> = (0..20).map(|j| words[(i * 3 + j * (c + 2)) % words.len()]).collect();
            fs::write(class_dir.join(format!("{i:02}.txt")), text.join(" ")).unwrap();
        }
    }
    let mut vectors = String::new();
    for (c, (_, words)) in classes.iter().enumerate() {
        for (i, w) in words.iter().enumerate() {
            vectors.push_str(&format!("{w} {} {} 0.{i} -0.{c}\n", c as f64, 1.0 - c as f64));
        }
    }
    fs::write(dir.join("vectors.txt"), vectors).unwrap();
    fs::write(
        dir.join("run.toml"),
        r#"
seed = 3
data_dir = "."

[corpus]
root = "corpus"
fractions = [0.6, 0.2, 0.2]

[features]
kinds = ["tfidf", "avg"]
dims = [4]
word_vectors = "vectors.txt"

[pairs]
train = 500
validation = 40
test = 40

[network]
inputs = ["tfidf"]

[train]
max_iters = 500
eval_every = 100

[evaluate]
classifiers = ["knn", "dtree"]
knn_k = [1, 3]

[tsne]
perplexity = 2.0
iters = 100
"#,
    )
    .unwrap();
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(docsiam(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(docsiam(&[], tmp.path()).status.code(), Some(1));
    assert_eq!(docsiam(&["--version"], tmp.path()).status.code(), Some(0));
    assert_eq!(docsiam(&["prepare", "--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[train]\nlearning_rate = 1.0\n").unwrap();
    assert_eq!(docsiam(&["prepare", "-c", "bad.toml"], tmp.path()).status.code(), Some(1));
    assert_eq!(docsiam(&["prepare", "--set", "train.lr0=-1"], tmp.path()).status.code(), Some(1));
    assert_eq!(docsiam(&["prepare", "--set", "novalue"], tmp.path()).status.code(), Some(1));
    assert_eq!(docsiam(&["prepare", "-c", "missing.toml"], tmp.path()).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = docsiam(&["prepare", "--set", "corpus.root=\"nowhere\""], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // Later stages need the earlier artifacts.
    let out = docsiam(&["train", "--set", "features.kinds=[\"tfidf\"]"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_run_is_reproducible_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    write_data(tmp.path());
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["all", "-c", "run.toml", "-o", out];
        args.extend_from_slice(extra);
        let o = docsiam(&args, tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        tmp.path().join(out)
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--seed", "11"]);

    for file in [
        "split.json",
        "features/tfidf_4.csv",
        "features/avg_4.csv",
        "pairs/train.csv",
        "models/deep_tfidf_4.model",
        "features/deep_tfidf_4.csv",
        "eval/sweep.csv",
        "tsne/tfidf_4.svg",
    ] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs between identical runs");
    }
    assert_ne!(read(&a.join("pairs/train.csv")), read(&c.join("pairs/train.csv")));

    let sweep = read(&a.join("eval/sweep.csv"));
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("representation,dim,classifier,param,macro_f1"));
    // tfidf, avg and deep_tfidf, each with two k values and one tree.
    assert_eq!(lines.count(), 9);
    assert!(sweep.contains("deep_tfidf,4,knn,k=3,"));
}

#[test]
fn overrides_reach_the_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write_data(tmp.path());
    let o = docsiam(&["prepare", "-c", "run.toml", "--set", "corpus.fractions=[0.5, 0.25, 0.25]", "-o", "x"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = read(&tmp.path().join("x/split.config.json"));
    assert!(echo.contains("0.25"), "{echo}");
    let split = read(&tmp.path().join("x/split.json"));
    assert!(split.contains("\"seed\": 3") || split.contains("\"seed\":3"), "{split}");

    // --data-dir resolves relative paths when the config has none.
    let sub = tmp.path().join("elsewhere");
    fs::create_dir(&sub).unwrap();
    let o = docsiam(
        &["prepare", "--set", "corpus.root=\"corpus\"", "--data-dir", tmp.path().to_str().unwrap(), "-o", "y"],
        &sub,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(sub.join("y/split.json").exists());
}
