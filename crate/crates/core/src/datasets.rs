//! Dataset generators, normalisation and CSV I/O.
//!
//! All generators are deterministic and noiseless. The 1D problems are
//!
//! - `tanh`: `y = 0.5 + 0.5 tanh(5x)`, `x ∈ [−1, 1]`
//! - `exp`: `y = 0.1^x`, `x ∈ [−1, 1]`
//!
//! optionally translated in `x`. The 3D motor surrogate is a synthetic
//! stand-in for a proprietary motor map; on raw axes `p1 ∈ [0, 36]`,
//! `p2 ∈ [0, 14]`, `p3 ∈ [0, 1]` with `u = p1/36`, `v = p2/14`:
//!
//! ```text
//! r(u, v) = (1 − e^(−3u)) (1 − e^(−8v))
//! y = (0.05 + r + 0.3 u⁸) · (1 + 0.4 r (p3 − 0.5))
//! ```
//!
//! It varies quickly along `p1`, faster along `p2`, its `p3` spread vanishes
//! on the lower `p1`/`p2` borders, it bends sharply approaching the `p1`
//! maximum, and it is bounded below by `0.05 · 0.8`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::StructuredGrid;
use crate::error::{Error, Result};

/// Smallest target value after [`normalize`].
pub const POSITIVITY_MARGIN: f64 = 1e-3;

/// Default translation for the shifted 1D datasets.
pub const DEFAULT_SHIFT: f64 = 2.0;

pub const MOTOR_SHAPE: [usize; 3] = [19, 15, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Tanh,
    Exp,
    ExpShifted,
    MotorSurrogate,
    Csv,
}

/// Node counts: a single count for 1D datasets, one per axis otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    Count(usize),
    Shape(Vec<usize>),
}

impl Points {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Points::Count(n) => vec![*n],
            Points::Shape(s) => s.clone(),
        }
    }
}

/// `dataset` block of the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Points>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_exponent: Option<f64>,
    /// Keep the raw origin when normalising inputs (`x / Δ` instead of
    /// mapping the first node to 0). Needed to study where the input domain
    /// sits relative to zero.
    #[serde(default)]
    pub keep_offset: bool,
}

impl DatasetSpec {
    pub fn tanh(points: usize) -> Self {
        DatasetSpec::simple(DatasetKind::Tanh, Points::Count(points))
    }

    pub fn exp(points: usize) -> Self {
        DatasetSpec::simple(DatasetKind::Exp, Points::Count(points))
    }

    pub fn motor(shape: [usize; 3]) -> Self {
        DatasetSpec::simple(DatasetKind::MotorSurrogate, Points::Shape(shape.to_vec()))
    }

    fn simple(kind: DatasetKind, points: Points) -> Self {
        DatasetSpec { kind, points: Some(points), shift: None, path: None, power_exponent: None, keep_offset: false }
    }

    fn point_count(&self) -> Result<usize> {
        match &self.points {
            Some(Points::Count(n)) => Ok(*n),
            Some(Points::Shape(s)) if s.len() == 1 => Ok(s[0]),
            _ => Err(Error::Config(format!("{:?} dataset needs a single point count", self.kind))),
        }
    }

    /// Raw (unnormalised) dataset described by this spec.
    pub fn generate(&self) -> Result<RegressionDataset> {
        let raw = match self.kind {
            DatasetKind::Tanh => gen_shifted(&gen_tanh(self.point_count()?)?, self.shift.unwrap_or(0.0)),
            DatasetKind::Exp => gen_shifted(&gen_exp(self.point_count()?)?, self.shift.unwrap_or(0.0)),
            DatasetKind::ExpShifted => {
                gen_shifted(&gen_exp(self.point_count()?)?, self.shift.unwrap_or(DEFAULT_SHIFT))
            }
            DatasetKind::MotorSurrogate => {
                let shape = match &self.points {
                    None => MOTOR_SHAPE,
                    Some(p) => p.shape().try_into().map_err(|_| {
                        Error::Config("motor surrogate needs three per-axis counts".into())
                    })?,
                };
                gen_motor_surrogate(shape)
            }
            DatasetKind::Csv => {
                let path = self.path.as_ref().ok_or_else(|| Error::Config("csv dataset needs a path".into()))?;
                load_csv(path)
            }
        }?;
        Ok(raw)
    }

    /// Generated, optionally power-transformed and normalised dataset.
    pub fn prepare(&self) -> Result<RegressionDataset> {
        let mut data = self.generate()?;
        if let Some(e) = self.power_exponent {
            data = power_transform(&data, e)?;
        }
        let anchor = if self.keep_offset { AxisAnchor::RawZero } else { AxisAnchor::FirstNode };
        normalize_with(&data, anchor)
    }
}

/// Affine input map `x_norm = (x − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    pub offset: f64,
    pub scale: f64,
}

impl AxisMap {
    pub const IDENTITY: AxisMap = AxisMap { offset: 0.0, scale: 1.0 };

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn inverse(&self, x: f64) -> f64 {
        self.offset + x * self.scale
    }

    /// The map equivalent to applying `self` then `next`.
    fn then(&self, next: &AxisMap) -> AxisMap {
        AxisMap { offset: self.offset + next.offset * self.scale, scale: self.scale * next.scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    /// `y ↦ y^exponent`
    Power(f64),
    /// `y ↦ y + shift`
    Offset(f64),
}

/// Everything needed to map normalised values back to the raw scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub inputs: Vec<AxisMap>,
    /// Target transforms in application order.
    pub targets: Vec<TargetTransform>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization { inputs: vec![AxisMap::IDENTITY; dim], targets: Vec::new() }
    }

    pub fn inverse_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.inputs).map(|(&v, m)| m.inverse(v)).collect()
    }

    pub fn forward_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.inputs).map(|(&v, m)| m.forward(v)).collect()
    }

    /// Maps a normalised target (or prediction) back to the raw scale.
    pub fn inverse_target(&self, y: f64) -> f64 {
        self.targets.iter().rev().fold(y, |v, t| match *t {
            TargetTransform::Power(e) => v.powf(1.0 / e),
            TargetTransform::Offset(s) => v - s,
        })
    }
}

/// Training data on a structured grid plus its normalisation record.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub grid: StructuredGrid,
    pub normalization: Normalization,
}

impl RegressionDataset {
    pub fn from_grid(grid: StructuredGrid) -> Self {
        let dim = grid.dim();
        RegressionDataset { grid, normalization: Normalization::identity(dim) }
    }

    /// Node coordinates and targets, in storage order.
    pub fn training_pairs(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.grid.points(), self.grid.values().to_vec())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect()
}

fn gen_1d(n_points: usize, f: impl Fn(f64) -> f64) -> Result<RegressionDataset> {
    if n_points < 2 {
        return Err(Error::InvalidDataset(format!("need at least 2 points, got {n_points}")));
    }
    let x = linspace(-1.0, 1.0, n_points);
    let y = x.iter().map(|&v| f(v)).collect();
    Ok(RegressionDataset::from_grid(StructuredGrid::new(vec![x], y)?))
}

/// `y = 0.5 + 0.5 tanh(5x)` on equally spaced `x ∈ [−1, 1]`.
pub fn gen_tanh(n_points: usize) -> Result<RegressionDataset> {
    gen_1d(n_points, |x| 0.5 + 0.5 * (5.0 * x).tanh())
}

/// `y = 0.1^x` on equally spaced `x ∈ [−1, 1]`.
pub fn gen_exp(n_points: usize) -> Result<RegressionDataset> {
    gen_1d(n_points, |x| 0.1f64.powf(x))
}

/// Translates the inputs of a 1D dataset; targets are untouched.
pub fn gen_shifted(base: &RegressionDataset, shift: f64) -> Result<RegressionDataset> {
    if base.grid.dim() != 1 {
        return Err(Error::InvalidDataset("only 1D datasets can be shifted".into()));
    }
    if shift == 0.0 {
        return Ok(base.clone());
    }
    let x = base.grid.axes()[0].iter().map(|v| v + shift).collect();
    Ok(RegressionDataset::from_grid(StructuredGrid::new(vec![x], base.grid.values().to_vec())?))
}

/// Synthetic 3D motor-map stand-in (see the module docs for the formula).
pub fn gen_motor_surrogate(shape: [usize; 3]) -> Result<RegressionDataset> {
    if shape.iter().any(|&n| n < 3) {
        return Err(Error::InvalidDataset(format!("every motor axis needs >= 3 nodes, got {shape:?}")));
    }
    let axes = vec![linspace(0.0, 36.0, shape[0]), linspace(0.0, 14.0, shape[1]), linspace(0.0, 1.0, shape[2])];
    let mut values = Vec::with_capacity(shape.iter().product());
    for &p1 in &axes[0] {
        for &p2 in &axes[1] {
            for &p3 in &axes[2] {
                values.push(motor_field(p1, p2, p3));
            }
        }
    }
    Ok(RegressionDataset::from_grid(StructuredGrid::new(axes, values)?))
}

fn motor_field(p1: f64, p2: f64, p3: f64) -> f64 {
    let u = p1 / 36.0;
    let v = p2 / 14.0;
    let ramp = (1.0 - (-3.0 * u).exp()) * (1.0 - (-8.0 * v).exp());
    (0.05 + ramp + 0.3 * u.powi(8)) * (1.0 + 0.4 * ramp * (p3 - 0.5))
}

/// Where normalised axes start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisAnchor {
    /// First node at 0, nodes at 0, 1, 2, …
    FirstNode,
    /// Raw zero stays at zero, nodes at `x₀/Δ + k`.
    RawZero,
}

/// Unit spacing on every axis (first node at 0) and targets at least
/// [`POSITIVITY_MARGIN`].
pub fn normalize(dataset: &RegressionDataset) -> Result<RegressionDataset> {
    normalize_with(dataset, AxisAnchor::FirstNode)
}

pub fn normalize_with(dataset: &RegressionDataset, anchor: AxisAnchor) -> Result<RegressionDataset> {
    let grid = &dataset.grid;
    let mut axes = Vec::with_capacity(grid.dim());
    let mut inputs = Vec::with_capacity(grid.dim());
    for (d, axis) in grid.axes().iter().enumerate() {
        let scale = grid.spacing(d);
        let map = match anchor {
            AxisAnchor::FirstNode => AxisMap { offset: axis[0], scale },
            AxisAnchor::RawZero => AxisMap { offset: 0.0, scale },
        };
        let start = map.forward(axis[0]);
        axes.push((0..axis.len()).map(|k| start + k as f64).collect::<Vec<_>>());
        inputs.push(dataset.normalization.inputs[d].then(&map));
    }
    let min = grid.values().iter().copied().fold(f64::INFINITY, f64::min);
    let mut targets = dataset.normalization.targets.clone();
    let mut values = grid.values().to_vec();
    // Tolerance keeps a second pass from re-shifting by a rounding residue.
    if min < POSITIVITY_MARGIN * (1.0 - 1e-9) {
        let shift = POSITIVITY_MARGIN - min;
        values.iter_mut().for_each(|v| *v += shift);
        targets.push(TargetTransform::Offset(shift));
    }
    Ok(RegressionDataset { grid: StructuredGrid::new(axes, values)?, normalization: Normalization { inputs, targets } })
}

/// `ỹ = y^exponent` on strictly positive targets.
pub fn power_transform(dataset: &RegressionDataset, exponent: f64) -> Result<RegressionDataset> {
    if !(exponent.is_finite() && exponent != 0.0) {
        return Err(Error::InvalidDataset(format!("invalid power exponent {exponent}")));
    }
    if let Some(k) = dataset.grid.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive { index: dataset.grid.unravel(k), value: dataset.grid.values()[k] });
    }
    let values = dataset.grid.values().iter().map(|v| v.powf(exponent)).collect();
    let mut normalization = dataset.normalization.clone();
    normalization.targets.push(TargetTransform::Power(exponent));
    Ok(RegressionDataset { grid: dataset.grid.with_values(values)?, normalization })
}

/// Maps predictions made on the normalised scale back to raw targets.
pub fn inverse_power_transform(predictions: &[f64], normalization: &Normalization) -> Vec<f64> {
    predictions.iter().map(|&y| normalization.inverse_target(y)).collect()
}

/// Writes `x1[,x2,…],y` rows in lattice (row-major) order.
pub fn save_csv(dataset: &RegressionDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(&dataset.grid, file)
}

pub fn write_csv<W: std::io::Write>(grid: &StructuredGrid, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=grid.dim()).map(|d| format!("x{d}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (k, y) in grid.values().iter().enumerate() {
        let mut row: Vec<String> = grid.coordinate(&grid.unravel(k)).iter().map(|v| format!("{v:.16e}")).collect();
        row.push(format!("{y:.16e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<RegressionDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

/// Reads a complete lattice from CSV; row order is free.
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<RegressionDataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns = r.headers()?.len();
    if columns < 2 {
        return Err(Error::InvalidDataset("csv needs at least one coordinate column and a target".into()));
    }
    let dim = columns - 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidDataset(format!("line {}: {e}", rows.len() + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("csv has no data rows".into()));
    }
    let mut axes: Vec<Vec<f64>> = (0..dim)
        .map(|d| {
            let mut a: Vec<f64> = rows.iter().map(|r| r[d]).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        })
        .collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let mut values = vec![f64::NAN; total];
    let mut seen = vec![false; total];
    for row in &rows {
        let index: Vec<usize> = (0..dim)
            .map(|d| axes[d].binary_search_by(|v| v.total_cmp(&row[d])).expect("coordinate is on its axis"))
            .collect();
        let flat = index.iter().zip(&shape).fold(0, |acc, (&i, &n)| acc * n + i);
        if seen[flat] {
            return Err(Error::DuplicateNode { index });
        }
        seen[flat] = true;
        values[flat] = row[dim];
    }
    if let Some(flat) = seen.iter().position(|&s| !s) {
        let mut index = vec![0; dim];
        let mut k = flat;
        for d in (0..dim).rev() {
            index[d] = k % shape[d];
            k /= shape[d];
        }
        return Err(Error::MissingNode { index });
    }
    let grid = StructuredGrid::new(std::mem::take(&mut axes), values)?;
    Ok(RegressionDataset::from_grid(grid))
}
