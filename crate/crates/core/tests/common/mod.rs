#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gtr_core::Value;

/// Three-table concert database used by the SQL suites.
pub const TOY_SCHEMA: &str = "
    CREATE TABLE singer(singer_id INTEGER PRIMARY KEY, name TEXT, country TEXT, age INTEGER);
    CREATE TABLE stadium(stadium_id INTEGER PRIMARY KEY, name TEXT, location TEXT, capacity INTEGER);
    CREATE TABLE concert(concert_id INTEGER PRIMARY KEY, concert_name TEXT, singer_id INTEGER,
                         stadium_id INTEGER, year INTEGER);
    INSERT INTO singer VALUES
        (1, 'Ann', 'US', 31), (2, 'Bo', 'UK', 25), (3, 'Cy', 'US', 40),
        (4, 'Di', 'France', 25), (5, 'Ed', 'UK', 52), (6, 'Flo', 'US', 19);
    INSERT INTO stadium VALUES
        (1, 'North Arena', 'Oslo', 5000), (2, 'South Bowl', 'Lima', 12000), (3, 'East Field', 'Oslo', 8000);
    INSERT INTO concert VALUES
        (1, 'Spring', 1, 1, 2014), (2, 'Summer', 3, 2, 2015), (3, 'Autumn', 1, 3, 2014),
        (4, 'Winter', 5, 2, 2016), (5, 'Encore', 2, 1, 2015);
";

/// Writes the toy database as `<dir>/concerts/concerts.sqlite`.
pub fn toy_db(dir: &Path) -> PathBuf {
    let db_dir = dir.join("concerts");
    std::fs::create_dir_all(&db_dir).unwrap();
    let path = db_dir.join("concerts.sqlite");
    let conn = rusqlite::Connection::open(&path).unwrap();
    conn.execute_batch(TOY_SCHEMA).unwrap();
    path
}

pub fn int(i: i64) -> Value {
    Value::Integer(i)
}

pub fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

pub fn real(f: f64) -> Value {
    Value::Real(f)
}

pub fn file_sha256(path: &Path) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}
