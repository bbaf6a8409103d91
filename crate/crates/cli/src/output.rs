use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies the run that produced an output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &'static str, seed: u64, config: &impl Serialize) -> Result<Self> {
        let bytes = serde_json::to_vec(&json!({ "command": command, "config": config }))?;
        let digest = Sha256::digest(&bytes);
        let config_hash = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            command,
            seed,
            config_hash,
        })
    }

    pub fn comment(&self) -> String {
        format!(
            "# mixbasis {VERSION} command={} seed={} config_hash={}",
            self.command, self.seed, self.config_hash
        )
    }

    pub fn fields(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("version".into(), json!(VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("seed".into(), json!(self.seed));
        m.insert("config_hash".into(), json!(self.config_hash));
        m
    }
}

/// Writes a CSV preceded by a provenance comment line.
pub fn write_csv<I, R>(path: &Path, prov: &Provenance, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: std::fmt::Display,
{
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", prov.comment())?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `value` with the provenance fields merged into its top level.
pub fn write_json(path: &Path, prov: &Provenance, value: Value) -> Result<()> {
    let mut obj = prov.fields();
    match value {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(obj))?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
