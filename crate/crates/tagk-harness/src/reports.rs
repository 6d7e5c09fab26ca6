//! CSV and JSON output helpers shared by all commands.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Writes rows as a headered CSV file, creating parent directories.
pub fn write_csv<T: Serialize, P: AsRef<Path>>(path: P, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .flush()
        .with_context(|| format!("writing {}", path.display()))
}

/// Reads a headered CSV file back into typed rows.
pub fn read_csv<T: DeserializeOwned, P: AsRef<Path>>(path: P) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes a value as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize, P: AsRef<Path>>(path: P, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run provenance written next to every command's outputs. Contains no
/// wall-clock timestamps so repeated runs produce identical bytes.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub package: String,
    pub version: String,
    /// Echo of the effective configuration.
    pub config: serde_json::Value,
}

impl RunMetadata {
    pub fn new<C: Serialize>(command: &str, seed: u64, workers: usize, config: &C) -> Result<Self> {
        Ok(RunMetadata {
            command: command.to_owned(),
            seed,
            workers,
            package: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: serde_json::to_value(config)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        name: String,
        value: f64,
        maybe: Option<f64>,
    }

    #[test]
    fn csv_roundtrip_preserves_rows_and_empty_optionals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![
            Row {
                name: "a".into(),
                value: 1.5,
                maybe: Some(-2.25),
            },
            Row {
                name: "b".into(),
                value: 0.1,
                maybe: None,
            },
        ];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("name,value,maybe\n"));
        let back: Vec<Row> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn repeated_writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let rows = vec![Row {
            name: "x".into(),
            value: std::f64::consts::PI,
            maybe: Some(1.0 / 3.0),
        }];
        write_csv(&a, &rows).unwrap();
        write_csv(&b, &rows).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn json_metadata_has_no_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let meta = RunMetadata::new("bench", 7, 2, &serde_json::json!({"trials": 10})).unwrap();
        write_json(&path, &meta).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"command\": \"bench\""));
        assert!(text.ends_with('\n'));
        let again = RunMetadata::new("bench", 7, 2, &serde_json::json!({"trials": 10})).unwrap();
        assert_eq!(
            serde_json::to_string(&meta).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
