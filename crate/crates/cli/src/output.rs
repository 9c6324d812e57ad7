use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gridlab_core::RNG_ALGORITHM;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

/// `x` with 17 significant digits, enough to recover the exact `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), num)
}

pub fn opt_bool(x: Option<bool>) -> String {
    x.map_or_else(|| "NA".to_string(), |b| b.to_string())
}

/// Output directory that writes each file atomically and remembers what it wrote.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Internal(format!("writing {name}: {e}"));
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.persist(self.dir.join(name)).map_err(|e| io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let err = |e: csv::Error| CliError::Internal(format!("writing {name}: {e}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Internal(format!("writing {name}: {e}")))?;
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C) -> Result<(), CliError> {
        let written = std::mem::take(&mut self.written);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            rng_algorithm: RNG_ALGORITHM,
            outputs: &written,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct Manifest<'a, C> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a C,
    rng_algorithm: &'a str,
    outputs: &'a [String],
    wall_clock_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 8.1716, f64::MAX, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(3.0), "3.0000000000000000e0");
        assert_eq!(opt_num(None), "NA");
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("a.txt", b"x").unwrap();
        out.write_csv("b.csv", &["h"], [vec!["1".to_string()]]).unwrap();
        out.finish("test", &serde_json::json!({"k": 1})).unwrap();
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["outputs"], serde_json::json!(["a.txt", "b.csv"]));
        assert_eq!(m["config"]["k"], 1);
        assert_eq!(fs::read_to_string(dir.path().join("b.csv")).unwrap(), "h\n1\n");
        // no temporaries left behind
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
    }
}
