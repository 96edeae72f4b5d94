use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gtr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtr"))
        .args(args)
        .env_remove("GTR_STORE")
        .env_remove("GTR_LLM_URL")
        .env_remove("GTR_EMBED_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn toy_db(dir: &Path) -> PathBuf {
    let path = dir.join("toy.sqlite");
    let conn = rusqlite::Connection::open(&path).unwrap();
    conn.execute_batch(
        "CREATE TABLE singer(singer_id INTEGER PRIMARY KEY, name TEXT, age INTEGER);
         CREATE TABLE stadium(stadium_id INTEGER PRIMARY KEY, location TEXT, capacity INTEGER);
         INSERT INTO singer VALUES (1, 'Ann', 31), (2, 'Bo', 25), (3, 'Cy', 40);
         INSERT INTO stadium VALUES (1, 'North', 5000), (2, 'South', 12000);",
    )
    .unwrap();
    path
}

struct TextFixture {
    _dir: TempDir,
    store: PathBuf,
    root: PathBuf,
}

fn ingested() -> TextFixture {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.txt");
    fs::write(
        &doc,
        "Rust has strict ownership and borrowing rules. Cargo builds crates and runs all tests. \
         Tokio schedules async tasks on worker threads.",
    )
    .unwrap();
    let store = dir.path().join("s.jsonl");
    let o = gtr(&["ingest", "--input", p(&doc), "--store", p(&store), "--chunk-size", "8", "--overlap", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("docs=1 chunks=3 dim=384"), "{}", stdout(&o));
    TextFixture {
        root: dir.path().to_path_buf(),
        _dir: dir,
        store,
    }
}

#[test]
fn ingest_then_ask_echoes_best_chunk() {
    let f = ingested();
    let o = gtr(&["ask", "Cargo builds crates", "--store", p(&f.store), "--llm", "echo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "Cargo builds crates and runs all tests.\n");
}

#[test]
fn ask_trace_lists_k_ids_and_is_reproducible() {
    let f = ingested();
    let t1 = f.root.join("t1.jsonl");
    let t2 = f.root.join("t2.jsonl");
    for t in [&t1, &t2] {
        let o = gtr(&["ask", "async tasks", "--store", p(&f.store), "--k", "3", "--trace", p(t)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(&t1).unwrap();
    assert_eq!(a, fs::read(&t2).unwrap());
    let trace: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(trace["retrieved"].as_array().unwrap().len(), 3);
}

#[test]
fn store_path_from_environment() {
    let f = ingested();
    let o = Command::new(env!("CARGO_BIN_EXE_gtr"))
        .args(["ask", "ownership"])
        .env("GTR_STORE", &f.store)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn ingest_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    let missing = dir.path().join("missing.txt");
    let o = gtr(&["ingest", "--input", p(&missing), "--store", p(&store)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.txt"), "{}", stderr(&o));

    let doc = dir.path().join("d.txt");
    fs::write(&doc, "a b c").unwrap();
    let o = gtr(&["ingest", "--input", p(&doc), "--store", p(&store), "--chunk-size", "512", "--overlap", "512"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("InvalidConfig"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn reingest_needs_replace() {
    let f = ingested();
    let doc = f.root.join("doc.txt");
    let o = gtr(&["ingest", "--input", p(&doc), "--store", p(&f.store), "--chunk-size", "8", "--overlap", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DuplicateId"));
    let before = fs::read(&f.store).unwrap();
    let o = gtr(&[
        "ingest", "--input", p(&doc), "--store", p(&f.store), "--chunk-size", "8", "--overlap", "0", "--replace",
    ]);
    assert!(o.status.success());
    assert_eq!(before, fs::read(&f.store).unwrap());
}

#[test]
fn ask_without_store_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = gtr(&["ask", "q", "--store", p(&dir.path().join("none.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tables_ingest_and_ask() {
    let dir = tempfile::tempdir().unwrap();
    let db = toy_db(dir.path());
    let store = dir.path().join("t.jsonl");
    let o = gtr(&["tables", "ingest", "--db", p(&db), "--store", p(&store)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&store).unwrap().lines().count(), 3);

    let templates = dir.path().join("fixtures.json");
    fs::write(
        &templates,
        r#"{"how many singers?": "SELECT count(*) FROM singer", "drop it": "DELETE FROM singer"}"#,
    )
    .unwrap();
    let llm = format!("template:{}", p(&templates));
    let o = gtr(&["tables", "ask", "how many singers?", "--db", p(&db), "--store", p(&store), "--llm", &llm]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "count(*)\n3\n");
    assert!(stderr(&o).contains("SELECT count(*) FROM singer"));

    let o = gtr(&["tables", "ask", "drop it", "--db", p(&db), "--store", p(&store), "--llm", &llm]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NonReadStatement"), "{}", stderr(&o));
    assert!(stderr(&o).contains("execute_sql"), "{}", stderr(&o));
}

#[test]
fn eval_sql_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let dbs = dir.path().join("dbs");
    fs::create_dir_all(dbs.join("toy")).unwrap();
    let db = toy_db(&dbs.join("toy"));
    assert_eq!(db, dbs.join("toy").join("toy.sqlite"));
    let gold = dir.path().join("g.sql");
    fs::write(
        &gold,
        "SELECT name FROM singer\ttoy\nSELECT count(*) FROM stadium WHERE capacity > 6000\ttoy\n",
    )
    .unwrap();
    let out = dir.path().join("report.jsonl");
    let o = gtr(&["eval", "sql", "--gold", p(&gold), "--pred", p(&gold), "--db-dir", p(&dbs), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let all = table.lines().find(|l| l.starts_with("all")).unwrap();
    assert_eq!(all.split_whitespace().collect::<Vec<_>>(), ["all", "2", "1.000", "1.000"]);
    let report = fs::read_to_string(&out).unwrap();
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn eval_text_summary_and_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let items = dir.path().join("items.jsonl");
    let line = r#"{"question":"q","reference":"the cat sat","candidate":"the cat sat","truthful":1,"response_time_ms":12.5}"#;
    fs::write(&items, format!("{line}\n{line}\n")).unwrap();
    let o = gtr(&["eval", "text", "--items", p(&items)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header: Vec<String> = stdout(&o).lines().next().unwrap().split_whitespace().map(String::from).collect();
    assert_eq!(header[1..], ["truthful_pct", "rouge1_p", "rouge2_p", "rougeL_p", "sas", "resp_ms", "tokens"]);

    fs::write(&items, format!("{line}\n{line}\n{{not json\n")).unwrap();
    let o = gtr(&["eval", "text", "--items", p(&items)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn export_embeddings_csv() {
    let f = ingested();
    let o = gtr(&["export-embeddings", "--store", p(&f.store)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("id,kind,d0,d1,"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn unknown_llm_spec_is_a_config_error() {
    let f = ingested();
    let o = gtr(&["ask", "q", "--store", p(&f.store), "--llm", "gpt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("InvalidConfig"));
    let o = gtr(&["ask", "q", "--store", p(&f.store), "--llm", "http"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("GTR_LLM_URL"));
}
