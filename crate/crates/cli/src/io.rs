use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Failure surfaced to the user; maps to exit code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<rate_lab::Error> for CliError {
    fn from(e: rate_lab::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parse a JSON config; errors name the offending key path.
pub fn parse_config<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<root>".to_string() } else { path };
        CliError(format!("invalid config {origin} at `{key}`: {}", e.inner()))
    })
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// `RATE_LAB_SEED` overrides the configured master seed.
pub fn seed_override(configured: u64) -> CliResult<u64> {
    match std::env::var("RATE_LAB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError(format!("RATE_LAB_SEED must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(configured),
        Err(e) => Err(CliError(format!("RATE_LAB_SEED: {e}"))),
    }
}

/// Output directory, created on demand.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path)
            .map_err(|e| CliError(format!("cannot create output dir {}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut text = to_json(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Header plus string rows; every value is already formatted.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
pub fn emit(text: &str) -> CliResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError(format!("json: {e}")))
}

/// Shortest round-trip decimal; byte-stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rate_lab::ExperimentConfig;

    #[test]
    fn config_errors_name_the_key() {
        let err = parse_config::<ExperimentConfig>(r#"{"model": {"b": "two"}}"#, "inline").unwrap_err();
        assert!(err.0.contains("model.b"), "{}", err.0);
        let err = parse_config::<ExperimentConfig>(r#"{"model": {"b": 2}, "replicates": -1}"#, "inline").unwrap_err();
        assert!(err.0.contains("replicates"), "{}", err.0);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
