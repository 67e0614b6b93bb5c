use std::path::PathBuf;
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn staged(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_staged")).args(args).current_dir(workspace()).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn c4c_accepts_the_eager_false_positive() {
    let o = staged(&["run", "--kind=c4c", "listings/eager_false_positive.sl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("Ret(Lam("), "{}", stdout(&o));
}

#[test]
fn eager_rejects_it_naming_the_variable() {
    let o = staged(&["run", "--kind=eager", "listings/eager_false_positive.sl"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("offending [α0]"), "{}", stderr(&o));
}

#[test]
fn classifiers_accept_the_safe_listing() {
    let o = staged(&["typecheck", "--static=classifiers", "listings/classifier_safe.sl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn classifiers_reject_with_a_positioned_diagnostic() {
    let o = staged(&["typecheck", "--static=classifiers", "listings/safe_uses.sl"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).starts_with("listings/safe_uses.sl:5:"), "{}", stderr(&o));
}

#[test]
fn extrusion_under_lazy_exits_with_scope_error() {
    assert_eq!(code(&staged(&["run", "listings/eager_extrusion.sl"])), 2);
}

#[test]
fn core_programs_run_directly() {
    let o = staged(&["run", "listings/accum.core"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "22");
}

#[test]
fn fuel_exhaustion_has_its_own_code() {
    assert_eq!(code(&staged(&["run", "--fuel=3", "listings/splice_identity.sl"])), 5);
}

#[test]
fn unhandled_operations_are_rejected_statically() {
    let dir = std::env::temp_dir().join(format!("staged-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("unhandled.core");
    std::fs::write(&file, "effect ping : Nat -> Nat\nperform ping(1)\n").unwrap();
    let o = staged(&["run", file.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).ok();
    // A program with an unhandled operation is statically ill typed, so the
    // core checker refuses it before the machine runs.
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn corpus_matches_and_structured_output_is_stable() {
    let text = staged(&["corpus"]);
    assert_eq!(code(&text), 0);
    assert!(stdout(&text).contains("corpus matches golden grid"));
    let structured = staged(&["corpus", "--format=structured"]);
    assert_eq!(code(&structured), 0);
    let golden = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/corpus.jsonl")).unwrap();
    assert_eq!(stdout(&structured), golden);
}

#[test]
fn missing_corpus_directory_is_a_usage_error() {
    let o = staged(&["corpus", "--dir", "does/not/exist"]);
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("missing"));
}

#[test]
fn matrix_emits_one_record_per_cell() {
    let o = staged(&["matrix", "--format=structured", "listings/safe_uses.sl", "listings/classifier_safe.sl"]);
    assert_eq!(code(&o), 0);
    let records: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 8);
    assert_eq!(records[3]["check"], "classifiers");
    assert_eq!(records[3]["outcome"], "reject");
    assert_eq!(records[7]["outcome"], "accept");
}

#[test]
fn traces_are_identical_across_runs() {
    let a = staged(&["run", "--trace", "listings/c4c_false_positive.sl", "--kind=c4c"]);
    let b = staged(&["run", "--trace", "listings/c4c_false_positive.sl", "--kind=c4c"]);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn elaborate_prints_core() {
    let o = staged(&["elaborate", "--kind=naive", "listings/splice_identity.sl"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("tls("), "{}", stdout(&o));
}

#[test]
fn gen_is_deterministic_and_typechecks() {
    let a = staged(&["gen", "--seed=11", "--size=20"]);
    assert_eq!(a.stdout, staged(&["gen", "--seed=11", "--size=20"]).stdout);
    let dir = std::env::temp_dir().join(format!("staged-gen-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("g.sl");
    std::fs::write(&file, &a.stdout).unwrap();
    let o = staged(&["typecheck", file.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(code(&staged(&["run"])), 64);
    assert_eq!(code(&staged(&["frobnicate"])), 64);
    assert_eq!(code(&staged(&["run", "no/such/file.sl"])), 64);
}
