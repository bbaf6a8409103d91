//! Fixed, parameter-free basis densities and the precomputed `phi` tensor.
//!
//! Every family is a set of `T` non-negative functions, each normalized to unit
//! integral over the family's domain. A component's density for one item is a
//! convex combination of these functions; only the mixing weights are fitted.
//! Once [`precompute_phi`] has evaluated the basis at every datum, the fitters
//! never look at the raw data or at the basis functions again.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;

/// Density of Bernstein basis function `t` of degree `d` at `x`:
/// `(d+1) * C(d,t) * x^t * (1-x)^(d-t)`, a Beta(t+1, d-t+1) density.
pub fn bernstein_eval(d: usize, t: usize, x: f64) -> Result<f64> {
    if t > d {
        return Err(Error::Domain(format!("bernstein index {t} exceeds degree {d}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("bernstein argument {x} outside [0,1]")));
    }
    Ok(bernstein_unchecked(bernstein_coef(d, t), d, t, x))
}

/// `(d+1) * C(d,t)`, exact while it fits in an f64 mantissa; infinite once
/// it overflows.
fn bernstein_coef(d: usize, t: usize) -> f64 {
    let t = t.min(d - t);
    let mut c = (d + 1) as f64;
    for u in 1..=t {
        c = c * (d - t + u) as f64 / u as f64;
    }
    c
}

fn bernstein_ln_coef(d: usize, t: usize) -> f64 {
    ln_gamma(d as f64 + 2.0) - ln_gamma(t as f64 + 1.0) - ln_gamma((d - t) as f64 + 1.0)
}

#[inline]
fn bernstein_unchecked(coef: f64, d: usize, t: usize, x: f64) -> f64 {
    if coef.is_finite() {
        // powi gives 0^0 = 1 at the endpoints.
        return coef * x.powi(t as i32) * (1.0 - x).powi((d - t) as i32);
    }
    let lx = if t == 0 { 0.0 } else { t as f64 * x.ln() };
    let l1x = if t == d { 0.0 } else { (d - t) as f64 * (1.0 - x).ln() };
    (bernstein_ln_coef(d, t) + lx + l1x).exp()
}

/// Gamma basis function `t` of size `T`: `(xT)^t / t! * T * exp(-xT)`.
pub fn gamma_eval(size: usize, t: usize, x: f64) -> Result<f64> {
    if size == 0 || t >= size {
        return Err(Error::Domain(format!("gamma index {t} out of range for T={size}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma argument {x} must be finite and >= 0")));
    }
    Ok(gamma_unchecked(size, t, x, ln_gamma(t as f64 + 1.0)))
}

#[inline]
fn gamma_unchecked(size: usize, t: usize, x: f64, ln_t_fact: f64) -> f64 {
    let tf = size as f64;
    if x == 0.0 {
        return if t == 0 { tf } else { 0.0 };
    }
    let xt = x * tf;
    (t as f64 * xt.ln() - ln_t_fact - xt).exp() * tf
}

/// Top-hat function `t`: 1 on `[t, t+1)`, 0 elsewhere. The last bin of a
/// size-`T` family is closed so that `x = T` has a home.
pub fn tophat_eval(size: usize, t: usize, x: f64) -> Result<f64> {
    if size == 0 || t >= size {
        return Err(Error::Domain(format!("top-hat index {t} out of range for T={size}")));
    }
    Ok(tophat_unchecked(size, t, x))
}

#[inline]
fn tophat_unchecked(size: usize, t: usize, x: f64) -> f64 {
    let lo = t as f64;
    let hi = lo + 1.0;
    let inside = if t + 1 == size {
        x >= lo && x <= hi
    } else {
        x >= lo && x < hi
    };
    if inside {
        1.0
    } else {
        0.0
    }
}

/// Gaussian basis function with signed index `t` in `-(T-1)/2 ..= (T-1)/2`:
/// mean `t`, variance `|t| + 1`.
pub fn gaussian_eval(size: usize, t: i64, x: f64) -> Result<f64> {
    if size.is_multiple_of(2) {
        return Err(Error::Config(format!("gaussian basis needs odd T, got {size}")));
    }
    let half = (size as i64 - 1) / 2;
    if t.abs() > half {
        return Err(Error::Domain(format!("gaussian index {t} out of range for T={size}")));
    }
    Ok(gaussian_unchecked(t, x))
}

#[inline]
fn gaussian_unchecked(t: i64, x: f64) -> f64 {
    let var = t.unsigned_abs() as f64 + 1.0;
    let dx = x - t as f64;
    (-dx * dx / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Normalizing constant of the trigonometric basis of odd size `T`.
pub fn trig_norm(size: usize) -> f64 {
    let tf = size as f64;
    let half = 0.5 * (tf + 1.0);
    (tf.ln() + (tf - 1.0) * 2f64.ln() + ln_beta(half, half)).exp()
}

/// Trigonometric (circular Bernstein) basis function `t` of odd size `T`,
/// `A cos^(T-1)(pi (x - t/T))`, with `x` taken modulo 1.
pub fn trig_eval(size: usize, t: usize, x: f64) -> Result<f64> {
    if size.is_multiple_of(2) {
        return Err(Error::Config(format!("trigonometric basis needs odd T, got {size}")));
    }
    if t >= size {
        return Err(Error::Domain(format!("trig index {t} out of range for T={size}")));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("trig argument {x} is not finite")));
    }
    Ok(trig_unchecked(trig_norm(size), size, t, x))
}

#[inline]
fn trig_unchecked(norm: f64, size: usize, t: usize, x: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    let c = (PI * (x - t as f64 / size as f64)).cos();
    norm * c.powi(size as i32 - 1)
}

/// Interval on which a basis family lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Bounded { lo: f64, hi: f64 },
    HalfLine,
    RealLine,
    Circle,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match *self {
            Domain::Bounded { lo, hi } => x >= lo && x <= hi,
            Domain::HalfLine => x >= 0.0,
            Domain::RealLine | Domain::Circle => true,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Bounded { lo, hi } => write!(f, "[{lo}, {hi}]"),
            Domain::HalfLine => write!(f, "[0, inf)"),
            Domain::RealLine => write!(f, "(-inf, inf)"),
            Domain::Circle => write!(f, "circle [0, 1)"),
        }
    }
}

/// A user-supplied basis tabulated on a grid and linearly interpolated.
///
/// Each column is rescaled at construction so that its piecewise-linear
/// interpolant integrates to exactly one over the grid range.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedBasis {
    grid: Vec<f64>,
    /// `functions[t][p]` is function `t` at `grid[p]`.
    functions: Vec<Vec<f64>>,
}

impl TabulatedBasis {
    pub fn new(grid: Vec<f64>, functions: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::Config("tabulated basis needs at least two grid points".into()));
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tabulated grid must be finite and strictly ascending".into()));
        }
        if functions.is_empty() {
            return Err(Error::Config("tabulated basis has no functions".into()));
        }
        let mut functions = functions;
        for (t, f) in functions.iter_mut().enumerate() {
            if f.len() != grid.len() {
                return Err(Error::Config(format!(
                    "tabulated function {t} has {} values for {} grid points",
                    f.len(),
                    grid.len()
                )));
            }
            if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(format!(
                    "tabulated function {t} has negative or non-finite values"
                )));
            }
            let area: f64 = grid
                .windows(2)
                .zip(f.windows(2))
                .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
                .sum();
            if area <= 0.0 {
                return Err(Error::Config(format!("tabulated function {t} has zero area")));
            }
            f.iter_mut().for_each(|v| *v /= area);
        }
        Ok(Self { grid, functions })
    }

    /// Reads a CSV whose first column is the grid and each further column one
    /// basis function. A non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut grid = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: row + 1,
                        col: 0,
                        msg: e.to_string(),
                    })
                }
            };
            if values.len() < 2 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    msg: format!("row {} needs a grid value and at least one function", row + 1),
                });
            }
            if columns.is_empty() {
                columns = vec![Vec::new(); values.len() - 1];
            } else if columns.len() != values.len() - 1 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    msg: format!("row {} has {} columns", row + 1, values.len()),
                });
            }
            grid.push(values[0]);
            for (c, v) in columns.iter_mut().zip(&values[1..]) {
                c.push(*v);
            }
        }
        Self::new(grid, columns)
    }

    pub fn size(&self) -> usize {
        self.functions.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    fn eval_unchecked(&self, t: usize, x: f64) -> f64 {
        let f = &self.functions[t];
        let p = self.grid.partition_point(|g| *g <= x);
        if p == 0 {
            return f[0];
        }
        if p >= self.grid.len() {
            return *f.last().unwrap();
        }
        let (g0, g1) = (self.grid[p - 1], self.grid[p]);
        let w = (x - g0) / (g1 - g0);
        f[p - 1] * (1.0 - w) + f[p] * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisFamily {
    Bernstein { degree: usize },
    Gamma { size: usize },
    TopHat { size: usize },
    Gaussian { size: usize },
    Trig { size: usize },
    Tabulated(Arc<TabulatedBasis>),
}

/// One item's basis: a family together with cached evaluation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    family: BasisFamily,
    /// Per-function coefficients (Bernstein), log-factorials (gamma) or the
    /// trig constant.
    consts: Vec<f64>,
}

impl BasisSpec {
    pub fn bernstein(degree: usize) -> Self {
        let consts = (0..=degree).map(|t| bernstein_coef(degree, t)).collect();
        Self {
            family: BasisFamily::Bernstein { degree },
            consts,
        }
    }

    pub fn gamma(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("gamma basis needs T >= 1".into()));
        }
        let consts = (0..size).map(|t| ln_gamma(t as f64 + 1.0)).collect();
        Ok(Self {
            family: BasisFamily::Gamma { size },
            consts,
        })
    }

    pub fn tophat(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("top-hat basis needs T >= 1".into()));
        }
        Ok(Self {
            family: BasisFamily::TopHat { size },
            consts: Vec::new(),
        })
    }

    pub fn gaussian(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::Config(format!("gaussian basis needs odd T, got {size}")));
        }
        Ok(Self {
            family: BasisFamily::Gaussian { size },
            consts: Vec::new(),
        })
    }

    pub fn trig(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::Config(format!("trigonometric basis needs odd T, got {size}")));
        }
        Ok(Self {
            family: BasisFamily::Trig { size },
            consts: vec![trig_norm(size)],
        })
    }

    pub fn tabulated(table: TabulatedBasis) -> Self {
        Self {
            family: BasisFamily::Tabulated(Arc::new(table)),
            consts: Vec::new(),
        }
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    /// Number of functions `T`.
    pub fn size(&self) -> usize {
        match &self.family {
            BasisFamily::Bernstein { degree } => degree + 1,
            BasisFamily::Gamma { size }
            | BasisFamily::TopHat { size }
            | BasisFamily::Gaussian { size }
            | BasisFamily::Trig { size } => *size,
            BasisFamily::Tabulated(tab) => tab.size(),
        }
    }

    pub fn domain(&self) -> Domain {
        match &self.family {
            BasisFamily::Bernstein { .. } => Domain::Bounded { lo: 0.0, hi: 1.0 },
            BasisFamily::Gamma { .. } => Domain::HalfLine,
            BasisFamily::TopHat { size } => Domain::Bounded {
                lo: 0.0,
                hi: *size as f64,
            },
            BasisFamily::Gaussian { .. } => Domain::RealLine,
            BasisFamily::Trig { .. } => Domain::Circle,
            BasisFamily::Tabulated(tab) => {
                let (lo, hi) = tab.range();
                Domain::Bounded { lo, hi }
            }
        }
    }

    /// Evaluates function `t` (stored index `0..T`) at `x`.
    pub fn eval(&self, t: usize, x: f64) -> Result<f64> {
        if t >= self.size() {
            return Err(Error::Domain(format!(
                "basis index {t} out of range for size {}",
                self.size()
            )));
        }
        if !self.domain().contains(x) {
            return Err(Error::Domain(format!("{x} outside basis domain {}", self.domain())));
        }
        Ok(self.eval_unchecked(t, x))
    }

    /// Writes all `T` function values at `x` into `out`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.size() {
            return Err(Error::Dimension(format!(
                "output has {} slots for a basis of size {}",
                out.len(),
                self.size()
            )));
        }
        if !self.domain().contains(x) {
            return Err(Error::Domain(format!("{x} outside basis domain {}", self.domain())));
        }
        for (t, o) in out.iter_mut().enumerate() {
            *o = self.eval_unchecked(t, x);
        }
        Ok(())
    }

    fn eval_unchecked(&self, t: usize, x: f64) -> f64 {
        match &self.family {
            BasisFamily::Bernstein { degree } => bernstein_unchecked(self.consts[t], *degree, t, x),
            BasisFamily::Gamma { size } => gamma_unchecked(*size, t, x, self.consts[t]),
            BasisFamily::TopHat { size } => tophat_unchecked(*size, t, x),
            BasisFamily::Gaussian { size } => {
                gaussian_unchecked(t as i64 - (*size as i64 - 1) / 2, x)
            }
            BasisFamily::Trig { size } => trig_unchecked(self.consts[0], *size, t, x),
            BasisFamily::Tabulated(tab) => tab.eval_unchecked(t, x),
        }
    }

    /// Signed location parameter of function `t` for the Gaussian family
    /// (stored indices are offset by `(T-1)/2`).
    pub fn gaussian_center(&self, t: usize) -> Option<i64> {
        match self.family {
            BasisFamily::Gaussian { size } => Some(t as i64 - (size as i64 - 1) / 2),
            _ => None,
        }
    }

    /// A finite interval that holds essentially all of the basis mass, used
    /// for plotting reconstructed densities.
    pub fn plot_range(&self) -> (f64, f64) {
        match &self.family {
            BasisFamily::Bernstein { .. } | BasisFamily::Trig { .. } => (0.0, 1.0),
            BasisFamily::TopHat { size } => (0.0, *size as f64),
            BasisFamily::Gamma { size } => (0.0, gamma_upper_cutoff(*size, 1e-6)),
            BasisFamily::Gaussian { size } => {
                let c = ((*size - 1) / 2) as f64;
                let w = c + 6.0 * (c + 1.0).sqrt();
                (-w, w)
            }
            BasisFamily::Tabulated(tab) => tab.range(),
        }
    }
}

/// Smallest `x` beyond which every gamma basis function of size `T` carries
/// less than `tail` of its mass.
pub fn gamma_upper_cutoff(size: usize, tail: f64) -> f64 {
    // The last function, Gamma(shape T, rate T), has the heaviest tail.
    let dist = GammaDist::new(size as f64, size as f64).expect("valid gamma parameters");
    dist.inverse_cdf(1.0 - tail)
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            BasisFamily::Bernstein { degree } => write!(f, "bernstein:d={degree}"),
            BasisFamily::Gamma { size } => write!(f, "gamma:T={size}"),
            BasisFamily::TopHat { size } => write!(f, "tophat:T={size}"),
            BasisFamily::Gaussian { size } => write!(f, "gauss:T={size}"),
            BasisFamily::Trig { size } => write!(f, "trig:T={size}"),
            BasisFamily::Tabulated(tab) => write!(f, "tabulated:T={}", tab.size()),
        }
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    /// Parses `bernstein:d=4`, `gamma:T=5`, `tophat:T=10`, `gauss:T=7`,
    /// `trig:T=5` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("basis `{s}` is missing `:`")))?;
        if name == "file" {
            return Ok(Self::tabulated(TabulatedBasis::from_csv(Path::new(rest))?));
        }
        let (key, value) = rest
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("basis `{s}` is missing `=`")))?;
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("basis `{s}`: `{value}` is not a count")))?;
        match (name.trim(), key.trim()) {
            ("bernstein", "d") => Ok(Self::bernstein(n)),
            ("gamma", "T") => Self::gamma(n),
            ("tophat", "T") => Self::tophat(n),
            ("gauss", "T") => Self::gaussian(n),
            ("trig", "T") => Self::trig(n),
            _ => Err(Error::Config(format!("unknown basis `{s}`"))),
        }
    }
}

/// `phi[i][j][t] = Phi_jt(x_ij)`, stored row-major with ragged item blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTensor {
    n_obs: usize,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl PhiTensor {
    /// Builds a tensor from raw values laid out as `N` rows of `sum(T_j)`.
    pub fn from_values(n_obs: usize, sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::Dimension("every item needs at least one basis function".into()));
        }
        let offsets = offsets_of(&sizes);
        let stride = *offsets.last().unwrap();
        if values.len() != n_obs * stride {
            return Err(Error::Dimension(format!(
                "expected {} phi values, got {}",
                n_obs * stride,
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(format!(
                "phi value {} at flat index {p} is negative or not finite",
                values[p]
            )));
        }
        Ok(Self {
            n_obs,
            sizes,
            offsets,
            values,
        })
    }

    /// Evaluates the basis of every item at every datum. `rows` holds `N`
    /// observations of `specs.len()` items each, row-major.
    pub fn evaluate(rows: &[f64], specs: &[BasisSpec]) -> Result<Self> {
        let m = specs.len();
        if m == 0 {
            return Err(Error::Dimension("no bases given".into()));
        }
        if !rows.len().is_multiple_of(m) {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of {m} items",
                rows.len()
            )));
        }
        let n_obs = rows.len() / m;
        let sizes: Vec<usize> = specs.iter().map(BasisSpec::size).collect();
        let offsets = offsets_of(&sizes);
        let stride = *offsets.last().unwrap();
        let mut values = vec![0.0; n_obs * stride];
        par::try_for_each_chunk(&mut values, stride, |i, out| {
            for (j, spec) in specs.iter().enumerate() {
                let x = rows[i * m + j];
                let cell = &mut out[offsets[j]..offsets[j + 1]];
                spec.eval_all(x, cell).map_err(|_| Error::OutsideDomain {
                    i,
                    j,
                    x,
                    domain: spec.domain().to_string(),
                })?;
            }
            Ok::<(), Error>(())
        })?;
        Ok(Self {
            n_obs,
            sizes,
            offsets,
            values,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_items(&self) -> usize {
        self.sizes.len()
    }

    /// `T_j` for every item.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Start of each item's block within a row; the last entry is the row stride.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn stride(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.values[i * s..(i + 1) * s]
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let base = i * self.stride();
        &self.values[base + self.offsets[j]..base + self.offsets[j + 1]]
    }

    /// Copy of the tensor restricted to the given observations, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.stride());
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_obs: rows.len(),
            sizes: self.sizes.clone(),
            offsets: self.offsets.clone(),
            values,
        }
    }
}

pub(crate) fn offsets_of(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for &t in sizes {
        acc += t;
        offsets.push(acc);
    }
    offsets
}

/// Evaluates `specs[j]` at every `x_ij` of the dataset.
pub fn precompute_phi(data: &Dataset, specs: &[BasisSpec]) -> Result<PhiTensor> {
    if specs.len() != data.n_items() {
        return Err(Error::Dimension(format!(
            "{} bases given for {} items",
            specs.len(),
            data.n_items()
        )));
    }
    PhiTensor::evaluate(data.values(), specs)
}
