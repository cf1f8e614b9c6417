//! End-to-end tests of the `tgeval` binary: exit-code discipline, JSON
//! output, library/CLI result equivalence, and the external-model
//! protocol.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tgeval::corpus::{load_corpus, CorpusFormat};
use tgeval::ngram::{corpus_bleu, BleuConfig};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tgeval")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).trim().to_string()
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tgeval-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_lines(path: &Path, lines: &[&str]) {
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn bleu_cli_matches_library() {
    let dir = workdir("bleu");
    let samples = dir.join("samples.txt");
    let reference = dir.join("reference.txt");
    write_lines(&samples, &["the cat sat on the mat", "a dog runs fast"]);
    write_lines(
        &reference,
        &["the cat sat on a mat", "the dog runs fast today"],
    );

    let output = run(&[
        "bleu",
        "--samples",
        samples.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let cli_value: f64 = stdout_of(&output).parse().unwrap();

    let lib_value = corpus_bleu(
        &load_corpus(&samples, CorpusFormat::Lines).unwrap(),
        &load_corpus(&reference, CorpusFormat::Lines).unwrap(),
        &BleuConfig::default(),
    )
    .unwrap();
    assert_eq!(cli_value.to_bits(), lib_value.to_bits());
}

#[test]
fn bleu_json_record_carries_sub_precisions() {
    let dir = workdir("bleu-json");
    let samples = dir.join("samples.txt");
    let reference = dir.join("reference.txt");
    write_lines(&samples, &["the cat sat on the mat"]);
    write_lines(&reference, &["the cat sat on a mat"]);

    let output = run(&[
        "bleu",
        "--json",
        "--samples",
        samples.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let record: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert!(record["bleu"].is_f64());
    assert_eq!(record["precisions"].as_array().unwrap().len(), 4);
    assert_eq!(record["clipped"][0], serde_json::json!(5));
    assert_eq!(record["totals"][0], serde_json::json!(6));
}

#[test]
fn fd_identical_corpora_is_zero_exit_zero() {
    let dir = workdir("fd");
    let corpus = dir.join("a.txt");
    write_lines(
        &corpus,
        &["a man is walking", "the cat sat", "dogs run far"],
    );

    let output = run(&[
        "fd",
        "--real",
        corpus.to_str().unwrap(),
        "--gen",
        corpus.to_str().unwrap(),
        "--embedder",
        "hash",
        "--dim",
        "16",
    ]);
    assert!(output.status.success(), "{output:?}");
    let value: f64 = stdout_of(&output).parse().unwrap();
    assert!(value.abs() < 1e-9, "fd {value}");
}

#[test]
fn fd_from_embedding_files_matches_corpus_route() {
    let dir = workdir("fd-file");
    let real = dir.join("real.txt");
    let gen = dir.join("gen.txt");
    write_lines(&real, &["a b c d", "e f g h", "i j k l", "m n o p"]);
    write_lines(&gen, &["a b c d", "e f g h", "q r s t", "u v w x"]);

    for (corpus, out) in [(&real, "real-emb.txt"), (&gen, "gen-emb.txt")] {
        let output = run(&[
            "embed",
            "--samples",
            corpus.to_str().unwrap(),
            "--out",
            dir.join(out).to_str().unwrap(),
            "--dim",
            "12",
            "--seed",
            "5",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let via_files = run(&[
        "fd",
        "--real-embeddings",
        dir.join("real-emb.txt").to_str().unwrap(),
        "--gen-embeddings",
        dir.join("gen-emb.txt").to_str().unwrap(),
    ]);
    assert!(via_files.status.success());
    let via_corpus = run(&[
        "fd",
        "--real",
        real.to_str().unwrap(),
        "--gen",
        gen.to_str().unwrap(),
        "--dim",
        "12",
        "--seed",
        "5",
    ]);
    assert!(via_corpus.status.success());
    let a: f64 = stdout_of(&via_files).parse().unwrap();
    let b: f64 = stdout_of(&via_corpus).parse().unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let dir = workdir("exit");
    // 1: usage error.
    let output = run(&["bleu", "--samples", "x.txt"]);
    assert_eq!(output.status.code(), Some(1));

    // 2: data error (missing file).
    let output = run(&[
        "ngrams",
        "--samples",
        dir.join("nope.txt").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));

    // 2: format error (topic TSV without a TAB).
    let bad = dir.join("bad.tsv");
    fs::write(&bad, "topic-without-tab\n").unwrap();
    let reference = dir.join("ref.txt");
    write_lines(&reference, &["a b c"]);
    let output = run(&[
        "modedrop",
        "--train",
        bad.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--keep-k",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(2));

    // 1: invalid argument value.
    let samples = dir.join("s.txt");
    write_lines(&samples, &["a b"]);
    let output = run(&[
        "perturb",
        "--in",
        samples.to_str().unwrap(),
        "--out",
        dir.join("out.txt").to_str().unwrap(),
        "--dropout",
        "1.5",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn stderr_carries_diagnostics_stdout_carries_results() {
    let output = run(&["bleu", "--samples", "only.txt"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(output.stdout.is_empty());
    assert!(!output.stderr.is_empty());
}

#[test]
fn perturb_round_trip_preserves_counts() {
    let dir = workdir("perturb");
    let input = dir.join("in.txt");
    let out = dir.join("out.txt");
    let lines: Vec<String> = (0..50).map(|i| format!("w{i} x{i} y{i} z{i}")).collect();
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    write_lines(&input, &refs);

    let output = run(&[
        "perturb",
        "--in",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dropout",
        "0",
        "--swap",
        "0.5",
        "--seed",
        "3",
    ]);
    assert!(output.status.success());
    let perturbed = load_corpus(&out, CorpusFormat::Lines).unwrap();
    assert_eq!(perturbed.len(), 50);
    // Swap only: token multisets survive the file round trip.
    let original = load_corpus(&input, CorpusFormat::Lines).unwrap();
    for (a, b) in original.sentences().iter().zip(perturbed.sentences()) {
        let mut x = a.tokens().to_vec();
        let mut y = b.tokens().to_vec();
        x.sort();
        y.sort();
        assert_eq!(x, y);
    }
}

#[test]
fn lmscore_external_scores_route() {
    let dir = workdir("external");
    let scores = dir.join("scores.tsv");
    fs::write(&scores, "-2.0\t2\n-4.0\t2\n").unwrap();
    let output = run(&["lmscore", "--external-scores", scores.to_str().unwrap()]);
    assert!(output.status.success());
    let ppl: f64 = stdout_of(&output).parse().unwrap();
    assert!((ppl - (6.0f64 / 4.0).exp()).abs() < 1e-12);

    // Positive log-probability is a data error.
    fs::write(&scores, "0.5\t1\n").unwrap();
    let output = run(&["lmscore", "--external-scores", scores.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn selfbleu_split_matches_library_split() {
    let dir = workdir("selfbleu");
    let samples = dir.join("samples.txt");
    let lines: Vec<String> = (0..20)
        .map(|i| {
            format!(
                "token{} token{} token{} token{} token{}",
                i,
                i + 1,
                i + 2,
                i + 3,
                i + 4
            )
        })
        .collect();
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    write_lines(&samples, &refs);

    let output = run(&[
        "selfbleu",
        "--samples",
        samples.to_str().unwrap(),
        "--split-seed",
        "11",
    ]);
    assert!(output.status.success());
    let cli_value: f64 = stdout_of(&output).parse().unwrap();

    let corpus = load_corpus(&samples, CorpusFormat::Lines).unwrap();
    let (a, b) = tgeval::corpus::split_corpus(&corpus, 0.5, tgeval::rng::RngSeed(11)).unwrap();
    let lib_value = tgeval::ngram::self_bleu(&a, &b, &BleuConfig::default()).unwrap();
    assert_eq!(cli_value.to_bits(), lib_value.to_bits());
}

#[cfg(unix)]
mod external_model {
    use super::*;
    use std::os::unix::fs::PermissionsExt;

    fn write_script(path: &Path, body: &str) {
        fs::write(path, body).unwrap();
        let mut perms = fs::metadata(path).unwrap().permissions();
        perms.set_mode(0o755);
        fs::set_permissions(path, perms).unwrap();
    }

    fn fixture_reference(dir: &Path) -> PathBuf {
        let reference = dir.join("reference.txt");
        let lines: Vec<String> = (0..40)
            .map(|i| format!("item{} rests beside item{} quietly", i % 8, (i + 3) % 8))
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        write_lines(&reference, &refs);
        reference
    }

    fn space_json(dir: &Path) -> PathBuf {
        let path = dir.join("space.json");
        fs::write(
            &path,
            r#"[{"name": "dropout", "kind": "uniform_real", "low": 0.0, "high": 1.0}]"#,
        )
        .unwrap();
        path
    }

    #[test]
    fn tune_with_external_model_and_report() {
        let dir = workdir("ext-model");
        let reference = fixture_reference(&dir);
        let space = space_json(&dir);

        // A well-behaved model: emits n_samples fixed lines.
        let model = dir.join("model.sh");
        write_script(
            &model,
            "#!/bin/sh\n\
             n=$(grep -o '\"n_samples\":[0-9]*' \"$1\" | grep -o '[0-9]*$')\n\
             i=1\n\
             : > \"$2\"\n\
             while [ \"$i\" -le \"$n\" ]; do\n\
             echo \"item1 rests beside item4 quietly\" >> \"$2\"\n\
             i=$((i+1))\n\
             done\n",
        );

        let runs = dir.join("runs.jsonl");
        let best = dir.join("best.json");
        let output = run(&[
            "tune",
            "--model",
            &format!("cmd:{}", model.display()),
            "--space",
            space.to_str().unwrap(),
            "--budget",
            "4",
            "--objective",
            "bleu",
            "--reference",
            reference.to_str().unwrap(),
            "--heldout",
            reference.to_str().unwrap(),
            "--samples-n",
            "25",
            "--runs",
            runs.to_str().unwrap(),
            "--best-out",
            best.to_str().unwrap(),
            "--dim",
            "8",
            "--seed",
            "2",
        ]);
        assert!(output.status.success(), "{output:?}");
        assert!(best.exists());

        let records = tgeval::protocol::RunStore::read(&runs).unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.is_ok()));

        // The report subcommand re-aggregates the store.
        let output = run(&[
            "report",
            "--runs",
            runs.to_str().unwrap(),
            "--format",
            "csv",
        ]);
        assert!(output.status.success());
        let text = stdout_of(&output);
        assert!(
            text.lines().next().unwrap().contains("bleu4_mean"),
            "{text}"
        );
    }

    #[test]
    fn failing_external_model_exits_four() {
        let dir = workdir("ext-fail");
        let reference = fixture_reference(&dir);
        let space = space_json(&dir);
        let runs = dir.join("runs.jsonl");

        let output = run(&[
            "tune",
            "--model",
            "cmd:/bin/false",
            "--space",
            space.to_str().unwrap(),
            "--budget",
            "3",
            "--objective",
            "bleu",
            "--reference",
            reference.to_str().unwrap(),
            "--heldout",
            reference.to_str().unwrap(),
            "--samples-n",
            "10",
            "--runs",
            runs.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(4));

        // The store still carries every failed trial.
        let records = tgeval::protocol::RunStore::read(&runs).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| !r.is_ok()));
    }

    #[test]
    fn flaky_external_model_still_yields_a_search_result() {
        let dir = workdir("ext-flaky");
        let reference = fixture_reference(&dir);
        let space = space_json(&dir);

        // Fails on roughly half the trials (odd seeds), succeeds otherwise.
        let model = dir.join("flaky.sh");
        write_script(
            &model,
            "#!/bin/sh\n\
             seed=$(grep -o '\"seed\":[0-9]*' \"$1\" | grep -o '[0-9]*$')\n\
             if [ $((seed % 2)) -eq 1 ]; then exit 3; fi\n\
             n=$(grep -o '\"n_samples\":[0-9]*' \"$1\" | grep -o '[0-9]*$')\n\
             i=1\n\
             : > \"$2\"\n\
             while [ \"$i\" -le \"$n\" ]; do\n\
             echo \"item2 rests beside item5 quietly\" >> \"$2\"\n\
             i=$((i+1))\n\
             done\n",
        );

        let runs = dir.join("runs.jsonl");
        let output = run(&[
            "tune",
            "--model",
            &format!("cmd:{}", model.display()),
            "--space",
            space.to_str().unwrap(),
            "--budget",
            "10",
            "--objective",
            "bleu",
            "--reference",
            reference.to_str().unwrap(),
            "--heldout",
            reference.to_str().unwrap(),
            "--samples-n",
            "20",
            "--runs",
            runs.to_str().unwrap(),
            "--seed",
            "6",
        ]);
        assert!(output.status.success(), "{output:?}");
        let records = tgeval::protocol::RunStore::read(&runs).unwrap();
        assert_eq!(records.len(), 10);
        let ok = records.iter().filter(|r| r.is_ok()).count();
        assert!(
            ok > 0 && ok < 10,
            "expected a mix of outcomes, got {ok}/10 ok"
        );
    }

    #[test]
    fn hanging_external_model_times_out() {
        let dir = workdir("ext-hang");
        let reference = fixture_reference(&dir);
        let space = space_json(&dir);

        let model = dir.join("sleeper.sh");
        write_script(&model, "#!/bin/sh\nsleep 60\n");

        let started = std::time::Instant::now();
        let output = run(&[
            "tune",
            "--model",
            &format!("cmd:{}", model.display()),
            "--space",
            space.to_str().unwrap(),
            "--budget",
            "1",
            "--objective",
            "bleu",
            "--reference",
            reference.to_str().unwrap(),
            "--heldout",
            reference.to_str().unwrap(),
            "--samples-n",
            "5",
            "--runs",
            dir.join("runs.jsonl").to_str().unwrap(),
            "--timeout-secs",
            "1",
        ]);
        assert_eq!(output.status.code(), Some(4));
        assert!(started.elapsed().as_secs() < 30, "timeout did not fire");
    }

    #[test]
    fn replicate_external_model_renders_table() {
        let dir = workdir("ext-replicate");
        let reference = fixture_reference(&dir);

        let model = dir.join("model.sh");
        write_script(
            &model,
            "#!/bin/sh\n\
             n=$(grep -o '\"n_samples\":[0-9]*' \"$1\" | grep -o '[0-9]*$')\n\
             seed=$(grep -o '\"seed\":[0-9]*' \"$1\" | grep -o '[0-9]*$')\n\
             i=1\n\
             : > \"$2\"\n\
             while [ \"$i\" -le \"$n\" ]; do\n\
             echo \"item$(( (i + seed) % 8 )) rests beside item$(( (i + seed + 3) % 8 )) quietly\" >> \"$2\"\n\
             i=$((i+1))\n\
             done\n",
        );

        let params = dir.join("params.json");
        fs::write(&params, "{}").unwrap();
        let output = run(&[
            "replicate",
            "--model",
            &format!("cmd:{}", model.display()),
            "--params",
            params.to_str().unwrap(),
            "--replicas",
            "3",
            "--reference",
            reference.to_str().unwrap(),
            "--heldout",
            reference.to_str().unwrap(),
            "--samples-n",
            "30",
            "--metrics",
            "bleu,revlm",
            "--label",
            "shell-model",
            "--dim",
            "8",
        ]);
        assert!(output.status.success(), "{output:?}");
        let text = stdout_of(&output);
        assert!(text.contains("| shell-model |"), "{text}");
        assert!(text.contains("bleu4"), "{text}");
    }
}
