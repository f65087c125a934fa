//! Output directory with the resolved config and hash-stamped files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ptbec_core::dynamics::AbsorptionImage;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Output {
    pub dir: PathBuf,
    pub hash: String,
}

/// Fixed-width scientific notation so that reruns give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// File-name friendly form of a state label (`S11'` becomes `S11p`).
pub fn file_label(label: &str) -> String {
    label.replace('\'', "p")
}

impl Output {
    /// Creates `dir` and writes `config.toml` with the hash in its header.
    pub fn create(dir: &Path, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let out = Self {
            dir: dir.to_path_buf(),
            hash: config.hash(),
        };
        let text = format!("# config_hash = \"{}\"\n{}", out.hash, config.to_toml());
        fs::write(out.path("config.toml"), text)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a CSV whose first line is `# config_hash=<hash>`.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut file = fs::File::create(&path)?;
        writeln!(file, "# config_hash={}", self.hash)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Writes pretty JSON with a top-level `config_hash` field.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut v = serde_json::to_value(value)?;
        let body = match v {
            Value::Object(ref mut map) => {
                map.insert("config_hash".into(), Value::String(self.hash.clone()));
                v
            }
            other => serde_json::json!({ "config_hash": self.hash, "data": other }),
        };
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")?;
        Ok(path)
    }

    /// Plain-text matrix, one image row per line, with `#` header comments.
    pub fn image(&self, name: &str, image: &AbsorptionImage, note: &str) -> Result<PathBuf, CliError> {
        let (nu, nv) = image.resolution;
        let [u0, u1, v0, v1] = image.extent;
        let mut text = format!(
            "# config_hash={}\n# {note}\n# line_of_sight={:?} extent=[{u0}, {u1}, {v0}, {v1}] columns(u)={nu} rows(v)={nv}\n",
            self.hash, image.line_of_sight
        );
        for iv in 0..nv {
            let row: Vec<String> = (0..nu).map(|iu| num(image.at(iu, iv))).collect();
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}
