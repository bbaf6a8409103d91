//! Dataset ingestion and per-column preprocessing transforms.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A complete `N x M` table of real observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_obs: usize,
    item_names: Vec<String>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, item_names: Vec<String>) -> Result<Self> {
        let m = item_names.len();
        if m == 0 {
            return Err(Error::Data("dataset has no items".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(m) {
            return Err(Error::Data(format!(
                "{} values do not form a non-empty table of {m} columns",
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "value at row {}, column {} is not finite",
                p / m + 1,
                p % m + 1
            )));
        }
        Ok(Self {
            n_obs: values.len() / m,
            values,
            item_names,
        })
    }

    /// Builds a dataset from columns, naming items `item_1..item_M`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Data("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(n * m);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(values, default_names(m))
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_items(&self) -> usize {
        self.item_names.len()
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_items() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_items();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_obs).map(|i| self.get(i, j)).collect()
    }

    /// Returns a new dataset with each column passed through its transform.
    pub fn transformed(&self, spec: &TransformSpec) -> Result<Self> {
        let m = self.n_items();
        let transforms = spec.resolve(&self.item_names)?;
        let mut columns = Vec::with_capacity(m);
        for (j, tr) in transforms.iter().enumerate() {
            let col = tr
                .apply(&self.column(j))
                .map_err(|e| Error::Data(format!("item `{}`: {e}", self.item_names[j])))?;
            columns.push(col);
        }
        let mut out = Self::from_columns(&columns)?;
        out.item_names = self.item_names.clone();
        Ok(out)
    }
}

fn default_names(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("item_{j}")).collect()
}

/// Reads a rectangular numeric CSV, skipping lines that start with `#`. With
/// `has_header` the first row supplies item names; otherwise items are named
/// `item_1..item_M`.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut names: Option<Vec<String>> = None;
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_data_row = true;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if has_header && idx == 0 {
            names = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    msg: format!("row {line} has {} fields, expected {w}", record.len()),
                })
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: col + 1,
                msg: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    col: col + 1,
                    msg: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
        first_data_row = false;
    }
    if first_data_row {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: "file contains no data rows".into(),
        });
    }
    let m = width.unwrap_or(0);
    let names = names.unwrap_or_else(|| default_names(m));
    Dataset::new(values, names)
}

/// Midrank empirical CDF: value `i` maps to `(rank_i - 0.5) / N`, where tied
/// values share their average rank.
pub fn cdf_transform(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let rank = 0.5 * ((start + 1) + end) as f64;
        let value = (rank - 0.5) / n as f64;
        for &i in &order[start..end] {
            out[i] = value;
        }
        start = end;
    }
    out
}

/// Scales a non-negative column so its mean is one half.
pub fn rescale_mean_half(column: &[f64]) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(Error::Data("empty column".into()));
    }
    let mean = column.iter().sum::<f64>() / column.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Data(format!(
            "mean {mean} is not positive; mean-half rescaling needs non-negative data"
        )));
    }
    let factor = 0.5 / mean;
    Ok(column.iter().map(|v| v * factor).collect())
}

/// Affine map of the column onto `[0, 1]`.
pub fn linear_rescale(column: &[f64]) -> Result<Vec<f64>> {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Data(
            "column is constant; use the cdf or likert transform instead".into(),
        ));
    }
    let span = max - min;
    Ok(column.iter().map(|v| (v - min) / span).collect())
}

/// Maps integer levels `1..=L` to the bin midpoints `(2v - 1) / 2L`.
pub fn likert_map(column: &[f64], levels: u32) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(Error::Config("likert scale needs at least one level".into()));
    }
    column
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() != 0.0 || v < 1.0 || v > levels as f64 {
                Err(Error::Data(format!(
                    "row {}: `{v}` is not a level in 1..={levels}",
                    i + 1
                )))
            } else {
                Ok((2.0 * v - 1.0) / (2.0 * levels as f64))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    LinearRescale,
    Cdf,
    MeanHalf,
    Likert(u32),
}

impl Transform {
    pub fn apply(&self, column: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Transform::Identity => Ok(column.to_vec()),
            Transform::LinearRescale => linear_rescale(column),
            Transform::Cdf => Ok(cdf_transform(column)),
            Transform::MeanHalf => rescale_mean_half(column),
            Transform::Likert(levels) => likert_map(column, levels),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => f.write_str("identity"),
            Transform::LinearRescale => f.write_str("linear_rescale"),
            Transform::Cdf => f.write_str("cdf"),
            Transform::MeanHalf => f.write_str("mean_half"),
            Transform::Likert(l) => write!(f, "likert:{l}"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Transform::Identity),
            "linear_rescale" | "linear" => Ok(Transform::LinearRescale),
            "cdf" => Ok(Transform::Cdf),
            "mean_half" => Ok(Transform::MeanHalf),
            "likert" => Ok(Transform::Likert(5)),
            other => match other.strip_prefix("likert:") {
                Some(l) => l
                    .parse()
                    .map(Transform::Likert)
                    .map_err(|_| Error::Config(format!("bad likert level count `{l}`"))),
                None => Err(Error::Config(format!("unknown transform `{other}`"))),
            },
        }
    }
}

/// Which transform applies to which item: either one transform for every
/// item, or `name=transform` pairs with unnamed items left untouched.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    All(Transform),
    PerItem(Vec<(String, Transform)>),
}

impl TransformSpec {
    /// One transform per item, in item order.
    pub fn resolve(&self, item_names: &[String]) -> Result<Vec<Transform>> {
        match self {
            TransformSpec::All(t) => Ok(vec![*t; item_names.len()]),
            TransformSpec::PerItem(pairs) => {
                let mut out = vec![Transform::Identity; item_names.len()];
                for (name, t) in pairs {
                    let j = item_names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::Config(format!("no item named `{name}`")))?;
                    out[j] = *t;
                }
                Ok(out)
            }
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !s.contains('=') {
            return s.parse().map(TransformSpec::All);
        }
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|pair| {
                let (name, t) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("expected name=transform, got `{pair}`")))?;
                Ok((name.trim().to_owned(), t.parse()?))
            })
            .collect::<Result<Vec<_>>>()
            .map(TransformSpec::PerItem)
    }
}
