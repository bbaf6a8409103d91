//! JSON Lines storage for sample sets: one header line, then one line per
//! recorded draw. Component labels are 1-based on disk; slots stay 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::{GibbsState, SampleHeader, SampleSet, SampleSink, Snapshot};
use crate::error::{Error, Result};

fn header_json(header: &SampleHeader, extra: &Map<String, Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("N".into(), json!(header.n_obs));
    obj.insert("M".into(), json!(header.n_items));
    obj.insert("T".into(), json!(header.sizes));
    obj.insert("seed".into(), json!(header.seed));
    obj.insert("burn_in".into(), json!(header.burn_in));
    obj.insert("stride".into(), json!(header.stride));
    obj.insert("prior".into(), json!(header.prior));
    for (key, v) in extra {
        obj.insert(key.clone(), v.clone());
    }
    Value::Object(obj)
}

fn snapshot_json(sweep: u64, k: usize, labels: impl Iterator<Item = usize>, slots: &[u32], m: usize) -> Value {
    let g: Vec<usize> = labels.map(|g| g + 1).collect();
    let h: Vec<&[u32]> = if m == 0 { vec![&[]; g.len()] } else { slots.chunks(m).collect() };
    json!({ "sweep": sweep, "k": k, "g": g, "h": h })
}

/// Streams snapshots to a writer as they are recorded.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &SampleHeader, extra: &Map<String, Value>) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header, extra)
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(mut out: W, header: &SampleHeader, extra: &Map<String, Value>) -> Result<Self> {
        serde_json::to_writer(&mut out, &header_json(header, extra))?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn write_snapshot(&mut self, snap: &Snapshot) -> Result<()> {
        let v = snapshot_json(
            snap.sweep,
            snap.k,
            snap.labels.iter().map(|&g| g as usize),
            &snap.slots,
            snap.n_items,
        );
        serde_json::to_writer(&mut self.out, &v)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> SampleSink for JsonlWriter<W> {
    fn record(&mut self, sweep: u64, state: &GibbsState) -> Result<()> {
        let v = snapshot_json(
            sweep,
            state.k(),
            state.labels().into_iter(),
            state.slots(),
            state.n_items(),
        );
        serde_json::to_writer(&mut self.out, &v)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn write_samples(path: &Path, set: &SampleSet, extra: &Map<String, Value>) -> Result<()> {
    let mut w = JsonlWriter::create(path, &set.header, extra)?;
    for s in &set.samples {
        w.write_snapshot(s)?;
    }
    w.finish()?;
    Ok(())
}

/// Reads snapshots one at a time, so that passes over a large file need not
/// hold it in memory.
pub struct SampleReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    header: SampleHeader,
    extra: Map<String, Value>,
}

impl SampleReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(File::open(path)?).lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| malformed(path, 1, "empty sample file"))?;
        let v: Value = serde_json::from_str(&first).map_err(|e| malformed(path, 1, &e.to_string()))?;
        let (header, extra) = parse_header(&v).map_err(|msg| malformed(path, 1, &msg))?;
        Ok(Self {
            path: path.to_path_buf(),
            lines,
            line_no: 1,
            header,
            extra,
        })
    }

    pub fn header(&self) -> &SampleHeader {
        &self.header
    }

    /// Header fields beyond the fixed ones (version, config hash, ...).
    pub fn extra(&self) -> &Map<String, Value> {
        &self.extra
    }
}

impl Iterator for SampleReader {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Result<Snapshot>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(
                serde_json::from_str::<Value>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(|v| parse_snapshot(&v, &self.header))
                    .map_err(|msg| malformed(&self.path, self.line_no, &msg)),
            );
        }
    }
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let reader = SampleReader::open(path)?;
    let header = reader.header().clone();
    let samples = reader.collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { header, samples })
}

fn malformed(path: &Path, line: usize, msg: &str) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    }
}

fn get_u64(v: &Value, key: &str) -> std::result::Result<u64, String> {
    v.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("missing or non-integer `{key}`"))
}

fn parse_header(v: &Value) -> std::result::Result<(SampleHeader, Map<String, Value>), String> {
    let sizes: Vec<usize> = v
        .get("T")
        .and_then(Value::as_array)
        .ok_or("missing `T`")?
        .iter()
        .map(|t| t.as_u64().map(|t| t as usize).ok_or("non-integer basis size"))
        .collect::<std::result::Result<_, _>>()?;
    let header = SampleHeader {
        n_obs: get_u64(v, "N")? as usize,
        n_items: get_u64(v, "M")? as usize,
        sizes,
        seed: get_u64(v, "seed")?,
        burn_in: get_u64(v, "burn_in")?,
        stride: get_u64(v, "stride")?,
        prior: v.get("prior").and_then(Value::as_str).unwrap_or("uniform").to_string(),
    };
    if header.sizes.len() != header.n_items {
        return Err(format!("{} basis sizes for M = {}", header.sizes.len(), header.n_items));
    }
    let fixed = ["N", "M", "T", "seed", "burn_in", "stride", "prior"];
    let extra = v
        .as_object()
        .ok_or("header is not an object")?
        .iter()
        .filter(|(key, _)| !fixed.contains(&key.as_str()))
        .map(|(key, val)| (key.clone(), val.clone()))
        .collect();
    Ok((header, extra))
}

fn parse_snapshot(v: &Value, header: &SampleHeader) -> std::result::Result<Snapshot, String> {
    let sweep = get_u64(v, "sweep")?;
    let k = get_u64(v, "k")? as usize;
    let g = v.get("g").and_then(Value::as_array).ok_or("missing `g`")?;
    if g.len() != header.n_obs {
        return Err(format!("{} labels for N = {}", g.len(), header.n_obs));
    }
    let mut labels = Vec::with_capacity(g.len());
    let mut used = vec![false; k];
    for x in g {
        let label = x.as_u64().ok_or("non-integer label")? as usize;
        if label == 0 || label > k {
            return Err(format!("label {label} outside 1..={k}"));
        }
        used[label - 1] = true;
        labels.push((label - 1) as u32);
    }
    if used.iter().any(|u| !u) {
        return Err(format!("not every one of the {k} components is occupied"));
    }
    let h = v.get("h").and_then(Value::as_array).ok_or("missing `h`")?;
    if h.len() != header.n_obs {
        return Err(format!("{} slot rows for N = {}", h.len(), header.n_obs));
    }
    let mut slots = Vec::with_capacity(header.n_obs * header.n_items);
    for row in h {
        let row = row.as_array().ok_or("slot row is not an array")?;
        if row.len() != header.n_items {
            return Err(format!("slot row of length {} for M = {}", row.len(), header.n_items));
        }
        for (x, &t) in row.iter().zip(&header.sizes) {
            let s = x.as_u64().ok_or("non-integer slot")?;
            if s as usize >= t {
                return Err(format!("slot {s} outside 0..{t}"));
            }
            slots.push(s as u32);
        }
    }
    Ok(Snapshot {
        sweep,
        k,
        labels,
        slots,
        n_items: header.n_items,
    })
}
