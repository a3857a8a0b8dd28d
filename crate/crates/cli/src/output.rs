//! Artifact writing. CSV files open with `# schema:` and `# config:` comment
//! lines; JSON files carry `schema_version`, `kind` and `config` fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed 17-significant-digit scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Artifacts {
    dir: PathBuf,
    kind: &'static str,
    config: Value,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, kind: &'static str, config: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            kind,
            config,
            written: Vec::new(),
        })
    }

    pub fn schema(&self) -> String {
        format!("openrates/{}/v{SCHEMA_VERSION}", self.kind)
    }

    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf, CliError> {
        let mut text = format!("# schema: {}\n# config: {}\n{header}\n", self.schema(), self.config);
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write(name, text)
    }

    pub fn json(&mut self, name: &str, result: &impl Serialize) -> Result<PathBuf, CliError> {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    fn write(&mut self, name: &str, text: String) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_digits() {
        assert_eq!(num(0.75), "7.5000000000000000e-1");
        assert_eq!(num(1.0 / 3.0), "3.3333333333333331e-1");
    }

    #[test]
    fn csv_header_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path(), "demo", &json!({"x": 1})).unwrap();
        let p = a.csv("t.csv", "a,b", &["1,2".into()]).unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(text, "# schema: openrates/demo/v1\n# config: {\"x\":1}\na,b\n1,2\n");
    }
}
