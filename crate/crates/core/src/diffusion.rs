//! Diffusion sensors and the staggered-mesh overfitting metric.
//!
//! The true sensor measures the normalised second difference of the training
//! field at every interior node,
//!
//! ```text
//! ∇y_i = (1/Δ²) |y₊ − 2y₀ + y₋| / (y₊ + 2y₀ + y₋)
//! ```
//!
//! and the test sensor replaces the centre value by the two half-index
//! (cell-centroid) predictions around it,
//!
//! ```text
//! ∇̃y_i = (1/(3(Δ/2)²)) |ŷ₊ − ŷ₊½ − ŷ₋½ + ŷ₋| / (ŷ₊ + ŷ₊½ + ŷ₋½ + ŷ₋)
//! ```
//!
//! On a d-dimensional lattice both stencils run along the 2^(d−1)
//! centre-crossing diagonals of the cells touching a node and are summed.
//! The metric is the mean squared difference of the two sensors over the
//! interior nodes.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::network::Network;

/// Relative tolerance when checking that an axis is uniformly spaced.
const SPACING_RTOL: f64 = 1e-9;

/// Values on a rectilinear, uniformly spaced lattice, stored row-major (last
/// axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl StructuredGrid {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one dimension".into()));
        }
        for (d, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::InvalidGrid(format!("axis {d} has fewer than 2 nodes")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {d} has non-finite coordinates")));
            }
            let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
            if step <= 0.0 {
                return Err(Error::InvalidGrid(format!("axis {d} is not increasing")));
            }
            for (k, w) in axis.windows(2).enumerate() {
                if ((w[1] - w[0]) - step).abs() > SPACING_RTOL * step.max(w[1].abs()) {
                    return Err(Error::InvalidGrid(format!(
                        "axis {d} is not uniformly spaced near node {k}"
                    )));
                }
            }
        }
        let n: usize = axes.iter().map(Vec::len).product();
        if values.len() != n {
            return Err(Error::InvalidGrid(format!("expected {n} values, got {}", values.len())));
        }
        Ok(StructuredGrid { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64
    }

    /// Stencil spacing Δ: the mean axis spacing (exactly 1 on normalised grids).
    pub fn stencil_spacing(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).sum::<f64>() / self.dim() as f64
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dim()];
        for (d, a) in self.axes.iter().enumerate().rev() {
            index[d] = flat % a.len();
            flat /= a.len();
        }
        index
    }

    pub fn coordinate(&self, index: &[usize]) -> Vec<f64> {
        index.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }

    /// Coordinates of every node in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.coordinate(&self.unravel(k))).collect()
    }

    pub fn value(&self, index: &[usize]) -> f64 {
        self.values[self.flat_index(index)]
    }

    /// Same lattice with different node values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        StructuredGrid::new(self.axes.clone(), values)
    }

    fn check_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v > 0.0)) {
            Some(k) => Err(Error::NonPositive { index: self.unravel(k), value: self.values[k] }),
            None => Ok(()),
        }
    }

    fn check_stencil_shape(&self) -> Result<()> {
        if let Some(d) = self.axes.iter().position(|a| a.len() < 3) {
            return Err(Error::InvalidGrid(format!(
                "axis {d} has fewer than 3 nodes, no interior stencil available"
            )));
        }
        Ok(())
    }

    /// Shape of the interior (every axis shrunk by two).
    pub fn interior_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len().saturating_sub(2)).collect()
    }

    /// Interior node indices in row-major order.
    pub fn interior_nodes(&self) -> Vec<Vec<usize>> {
        let inner = self.interior_shape();
        let count: usize = inner.iter().product();
        (0..count)
            .map(|mut k| {
                let mut index = vec![0; inner.len()];
                for d in (0..inner.len()).rev() {
                    index[d] = k % inner[d] + 1;
                    k /= inner[d];
                }
                index
            })
            .collect()
    }
}

/// Anything that maps input points to scalar predictions.
pub trait Predictor {
    fn predict_points(&self, points: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl Predictor for Network {
    fn predict_points(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.predict_batch(points)
    }
}

/// Adapts a plain closure to [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Predictor for FnPredictor<F> {
    fn predict_points(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|p| (self.0)(p)).collect())
    }
}

/// Cell-centroid lattice interleaving a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredMesh {
    /// Cells per dimension (`shape − 1`).
    pub shape: Vec<usize>,
    /// Centroid coordinates, row-major over the cells.
    pub points: Vec<Vec<f64>>,
}

pub fn build_staggered_points(grid: &StructuredGrid) -> Result<StaggeredMesh> {
    let mid: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|a| a.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
        .collect();
    let shape: Vec<usize> = mid.iter().map(Vec::len).collect();
    if shape.iter().any(|&n| n == 0) {
        return Err(Error::InvalidGrid("degenerate dimension".into()));
    }
    let total: usize = shape.iter().product();
    let points = (0..total)
        .map(|mut k| {
            let mut p = vec![0.0; shape.len()];
            for d in (0..shape.len()).rev() {
                p[d] = mid[d][k % shape[d]];
                k /= shape[d];
            }
            p
        })
        .collect();
    Ok(StaggeredMesh { shape, points })
}

/// The 2^(d−1) centre-crossing diagonal directions, one per antipodal pair
/// (first component always +1).
pub fn enumerate_diagonals(dimension: usize) -> Vec<Vec<i64>> {
    assert!(dimension >= 1, "dimension must be >= 1");
    (0..1usize << (dimension - 1))
        .map(|bits| {
            std::iter::once(1)
                .chain((1..dimension).map(|d| if bits >> (d - 1) & 1 == 1 { -1 } else { 1 }))
                .collect()
        })
        .collect()
}

#[inline]
fn true_term(minus: f64, centre: f64, plus: f64, delta: f64) -> f64 {
    (plus - 2.0 * centre + minus).abs() / (plus + 2.0 * centre + minus) / (delta * delta)
}

#[inline]
fn staggered_term(minus: f64, half_minus: f64, half_plus: f64, plus: f64, delta: f64) -> f64 {
    let h = 0.5 * delta;
    (plus - half_plus - half_minus + minus).abs() / (plus + half_plus + half_minus + minus) / (3.0 * h * h)
}

/// Test-sensor values over the interior; flagged nodes carry `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredSensor {
    pub values: Vec<f64>,
    /// True where a stencil prediction was nonpositive.
    pub flagged: Vec<bool>,
}

impl StaggeredSensor {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// True sensor on a 1D grid.
pub fn true_sensor_1d(grid: &StructuredGrid) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid(format!("expected a 1D grid, got {}D", grid.dim())));
    }
    grid.check_stencil_shape()?;
    grid.check_positive()?;
    let delta = grid.spacing(0);
    Ok(grid.values().windows(3).map(|w| true_term(w[0], w[1], w[2], delta)).collect())
}

/// Staggered test sensor on a 1D grid.
pub fn staggered_sensor_1d(grid: &StructuredGrid, predictor: &dyn Predictor) -> Result<StaggeredSensor> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid(format!("expected a 1D grid, got {}D", grid.dim())));
    }
    grid.check_stencil_shape()?;
    let x = &grid.axes()[0];
    let n = x.len();
    // Nodes followed by midpoints.
    let mut points: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    points.extend(x.windows(2).map(|w| vec![0.5 * (w[0] + w[1])]));
    let y = predictor.predict_points(&points)?;
    let (node, mid) = y.split_at(n);
    let delta = grid.spacing(0);
    let mut values = Vec::with_capacity(n - 2);
    let mut flagged = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let stencil = [node[i - 1], mid[i - 1], mid[i], node[i + 1]];
        if stencil.iter().any(|&v| !(v > 0.0)) {
            values.push(f64::NAN);
            flagged.push(true);
        } else {
            values.push(staggered_term(stencil[0], stencil[1], stencil[2], stencil[3], delta));
            flagged.push(false);
        }
    }
    Ok(StaggeredSensor { values, flagged })
}

/// True sensor summed over the centre-crossing diagonals of a d-D grid.
pub fn true_sensor_nd(grid: &StructuredGrid) -> Result<Vec<f64>> {
    grid.check_stencil_shape()?;
    grid.check_positive()?;
    let diagonals = enumerate_diagonals(grid.dim());
    let delta = grid.stencil_spacing();
    let offset = |node: &[usize], dir: &[i64], sign: i64| -> Vec<usize> {
        node.iter().zip(dir).map(|(&i, &s)| (i as i64 + sign * s) as usize).collect()
    };
    Ok(grid
        .interior_nodes()
        .iter()
        .map(|node| {
            let centre = grid.value(node);
            diagonals.iter().fold(0.0, |acc, dir| {
                let plus = grid.value(&offset(node, dir, 1));
                let minus = grid.value(&offset(node, dir, -1));
                acc + true_term(minus, centre, plus, delta)
            })
        })
        .collect())
}

/// Stencil points are addressed with doubled integer indices: even entries
/// are lattice nodes, odd entries are half-index (centroid) positions.
fn half_index_coordinate(grid: &StructuredGrid, key: &[i64]) -> Vec<f64> {
    key.iter()
        .zip(grid.axes())
        .map(|(&k, a)| {
            let i = (k / 2) as usize;
            if k % 2 == 0 {
                a[i]
            } else {
                0.5 * (a[i] + a[i + 1])
            }
        })
        .collect()
}

/// Staggered test sensor summed over the centre-crossing diagonals.
///
/// All stencil points are collected and deduplicated first, so the predictor
/// is called once per distinct point.
pub fn staggered_sensor_nd(grid: &StructuredGrid, predictor: &dyn Predictor) -> Result<StaggeredSensor> {
    grid.check_stencil_shape()?;
    let diagonals = enumerate_diagonals(grid.dim());
    let nodes = grid.interior_nodes();

    let mut slot_of: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut keys: Vec<Vec<i64>> = Vec::new();
    let mut stencils: Vec<[usize; 4]> = Vec::with_capacity(nodes.len() * diagonals.len());
    for node in &nodes {
        for dir in &diagonals {
            let mut stencil = [0usize; 4];
            for (slot, step) in stencil.iter_mut().zip([-2i64, -1, 1, 2]) {
                let key: Vec<i64> = node.iter().zip(dir).map(|(&i, &s)| 2 * i as i64 + step * s).collect();
                *slot = *slot_of.entry(key.clone()).or_insert_with(|| {
                    keys.push(key);
                    keys.len() - 1
                });
            }
            stencils.push(stencil);
        }
    }
    let points: Vec<Vec<f64>> = keys.iter().map(|k| half_index_coordinate(grid, k)).collect();
    let y = predictor.predict_points(&points)?;
    if y.len() != points.len() {
        return Err(Error::ShapeMismatch("predictor returned the wrong number of values".into()));
    }

    let delta = grid.stencil_spacing();
    let mut values = Vec::with_capacity(nodes.len());
    let mut flagged = Vec::with_capacity(nodes.len());
    for per_node in stencils.chunks(diagonals.len()) {
        let bad = per_node.iter().flatten().any(|&k| !(y[k] > 0.0));
        if bad {
            values.push(f64::NAN);
            flagged.push(true);
        } else {
            values.push(per_node.iter().fold(0.0, |acc, s| {
                acc + staggered_term(y[s[0]], y[s[1]], y[s[2]], y[s[3]], delta)
            }));
            flagged.push(false);
        }
    }
    Ok(StaggeredSensor { values, flagged })
}

/// Per-node sensors and the aggregate diffusion MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionReport {
    pub nodes: Vec<Vec<usize>>,
    pub true_sensor: Vec<f64>,
    pub test_sensor: Vec<f64>,
    /// `(∇̃ − ∇)²`, `NaN` for flagged nodes.
    pub squared_error: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Mean squared error over the unflagged interior nodes.
    pub mse: f64,
    pub flagged_nodes: usize,
}

pub fn diffusion_mse(grid: &StructuredGrid, predictor: &dyn Predictor) -> Result<DiffusionReport> {
    let truth = true_sensor_nd(grid)?;
    let test = staggered_sensor_nd(grid, predictor)?;
    let squared_error: Vec<f64> = truth.iter().zip(&test.values).map(|(t, s)| (s - t) * (s - t)).collect();
    let used: Vec<f64> = squared_error
        .iter()
        .zip(&test.flagged)
        .filter(|(_, &f)| !f)
        .map(|(e, _)| *e)
        .collect();
    if used.is_empty() {
        return Err(Error::AllNodesFlagged);
    }
    let mse = used.iter().sum::<f64>() / used.len() as f64;
    Ok(DiffusionReport {
        nodes: grid.interior_nodes(),
        true_sensor: truth,
        flagged_nodes: test.flagged_count(),
        test_sensor: test.values,
        squared_error,
        flagged: test.flagged,
        mse,
    })
}

impl DiffusionReport {
    /// CSV with a `# diffusion_mse=…,flagged_nodes=…` preamble followed by one
    /// row per interior node.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# diffusion_mse={:e},flagged_nodes={}", self.mse, self.flagged_nodes)?;
        let dim = self.nodes.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=dim).map(|d| format!("i{d}")).collect();
        header.extend(["true_sensor", "test_sensor", "squared_error", "flagged"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.nodes.len() {
            let mut row: Vec<String> = self.nodes[k].iter().map(usize::to_string).collect();
            row.push(format!("{:e}", self.true_sensor[k]));
            row.push(format!("{:e}", self.test_sensor[k]));
            row.push(format!("{:e}", self.squared_error[k]));
            row.push(self.flagged[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(values: &[f64]) -> StructuredGrid {
        let axis = (0..values.len()).map(|i| i as f64).collect();
        StructuredGrid::new(vec![axis], values.to_vec()).unwrap()
    }

    fn cube(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> StructuredGrid {
        let axis: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    values.push(f(i, j, k));
                }
            }
        }
        StructuredGrid::new(vec![axis.clone(), axis.clone(), axis], values).unwrap()
    }

    #[test]
    fn true_sensor_1d_examples() {
        assert_eq!(true_sensor_1d(&line(&[1.0, 2.0, 3.0])).unwrap(), vec![0.0]);
        assert!((true_sensor_1d(&line(&[1.0, 2.0, 1.0])).unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((true_sensor_1d(&line(&[2.0, 4.0, 2.0])).unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn true_sensor_errors() {
        assert!(matches!(true_sensor_1d(&line(&[1.0, 2.0])), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            true_sensor_1d(&line(&[1.0, 0.0, 2.0])),
            Err(Error::NonPositive { ref index, .. }) if index == &vec![1]
        ));
    }

    #[test]
    fn staggered_hand_example() {
        let grid = StructuredGrid::new(vec![vec![-1.0, 0.0, 1.0]], vec![1.0, 2.0, 1.0]).unwrap();
        let predictor = FnPredictor(|x: &[f64]| if x[0].abs() > 0.75 { 1.0 } else { 2.0 });
        let s = staggered_sensor_1d(&grid, &predictor).unwrap();
        // (1/0.75) · |1 − 2 − 2 + 1| / 6
        assert!((s.values[0] - 4.0 / 9.0).abs() < 1e-15, "{}", s.values[0]);
    }

    #[test]
    fn staggered_flags_nonpositive_predictions() {
        let grid = line(&[1.0, 2.0, 3.0, 4.0]);
        let predictor = FnPredictor(|x: &[f64]| x[0] - 0.75);
        let s = staggered_sensor_1d(&grid, &predictor).unwrap();
        assert_eq!(s.flagged, vec![true, false]);
        assert!(s.values[0].is_nan());
        let nd = staggered_sensor_nd(&grid, &predictor).unwrap();
        assert_eq!(nd.flagged, s.flagged);
        let report = diffusion_mse(&grid, &predictor).unwrap();
        assert_eq!(report.flagged_nodes, 1);
        assert!(report.mse.is_finite());
    }

    #[test]
    fn all_flagged_is_an_error() {
        let grid = line(&[1.0, 2.0, 3.0]);
        let predictor = FnPredictor(|_: &[f64]| -1.0);
        assert!(matches!(diffusion_mse(&grid, &predictor), Err(Error::AllNodesFlagged)));
    }

    #[test]
    fn staggered_points() {
        let mesh = build_staggered_points(&line(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(mesh.points, vec![vec![0.5], vec![1.5]]);
        let square = StructuredGrid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![1.0; 4]).unwrap();
        assert_eq!(build_staggered_points(&square).unwrap().points, vec![vec![0.5, 0.5]]);
        let axes = [19, 15, 5].map(|n| (0..n).map(|i| i as f64).collect::<Vec<_>>()).to_vec();
        let motor = StructuredGrid::new(axes, vec![1.0; 19 * 15 * 5]).unwrap();
        let mesh = build_staggered_points(&motor).unwrap();
        assert_eq!(mesh.shape, vec![18, 14, 4]);
        assert_eq!(mesh.points.len(), 18 * 14 * 4);
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(StructuredGrid::new(vec![vec![0.0]], vec![1.0]).is_err());
        assert!(StructuredGrid::new(vec![vec![0.0, 1.0, 3.0]], vec![1.0; 3]).is_err());
        assert!(StructuredGrid::new(vec![vec![0.0, 1.0]], vec![1.0; 3]).is_err());
    }

    #[test]
    fn diagonals() {
        assert_eq!(enumerate_diagonals(1), vec![vec![1]]);
        assert_eq!(enumerate_diagonals(2).len(), 2);
        let d3 = enumerate_diagonals(3);
        assert_eq!(d3.len(), 4);
        // Pairwise distinct and not antipodal.
        for (a, da) in d3.iter().enumerate() {
            for db in &d3[a + 1..] {
                assert_ne!(da, db);
                assert_ne!(da, &db.iter().map(|v| -v).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn spike_in_cube() {
        let grid = cube(3, |i, j, k| if (i, j, k) == (1, 1, 1) { 2.0 } else { 1.0 });
        let s = true_sensor_nd(&grid).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn affine_fields_vanish_in_3d() {
        let grid = cube(4, |i, j, k| 1.0 + i as f64 + j as f64 + k as f64);
        assert!(true_sensor_nd(&grid).unwrap().iter().all(|v| v.abs() <= 1e-12));
        let predictor = FnPredictor(|p: &[f64]| 1.0 + p[0] + 2.0 * p[1] + 0.5 * p[2]);
        let report = diffusion_mse(&grid, &predictor).unwrap();
        assert!(report.test_sensor.iter().all(|v| v.abs() <= 1e-12));
        assert!(report.mse <= 1e-24);
        assert_eq!(report.nodes.len(), 8);
    }

    #[test]
    fn nd_matches_1d_bitwise() {
        let grid = line(&[1.0, 3.0, 2.0, 5.0, 4.5, 0.5, 2.0]);
        let predictor = FnPredictor(|x: &[f64]| 2.0 + x[0].sin());
        assert_eq!(true_sensor_1d(&grid).unwrap(), true_sensor_nd(&grid).unwrap());
        let a = staggered_sensor_1d(&grid, &predictor).unwrap();
        let b = staggered_sensor_nd(&grid, &predictor).unwrap();
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn predictor_called_once_per_distinct_point() {
        use std::cell::Cell;
        struct Counting<'a>(&'a Cell<usize>);
        impl Predictor for Counting<'_> {
            fn predict_points(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
                self.0.set(self.0.get() + points.len());
                Ok(vec![1.0; points.len()])
            }
        }
        let calls = Cell::new(0);
        let grid = cube(5, |_, _, _| 1.0);
        staggered_sensor_nd(&grid, &Counting(&calls)).unwrap();
        // Each point is evaluated once; the total is bounded by nodes + centroids.
        assert!(calls.get() <= 125 + 64);
    }

    #[test]
    fn report_csv_layout() {
        let grid = line(&[1.0, 2.0, 1.0, 2.0]);
        let report = diffusion_mse(&grid, &FnPredictor(|_: &[f64]| 1.0)).unwrap();
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# diffusion_mse="));
        assert_eq!(lines[1], "i1,true_sensor,test_sensor,squared_error,flagged");
        assert_eq!(lines.len(), 4);
    }

    proptest! {
        #[test]
        fn scale_invariance(values in prop::collection::vec(0.1f64..10.0, 3..12), c in 0.01f64..100.0) {
            let g = line(&values);
            let scaled = line(&values.iter().map(|v| v * c).collect::<Vec<_>>());
            for (a, b) in true_sensor_1d(&g).unwrap().iter().zip(true_sensor_1d(&scaled).unwrap()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn mse_is_nonnegative(values in prop::collection::vec(0.1f64..10.0, 3..12), a in 0.5f64..2.0) {
            let g = line(&values);
            let r = diffusion_mse(&g, &FnPredictor(|x: &[f64]| 3.0 + (a * x[0]).sin())).unwrap();
            prop_assert!(r.mse >= 0.0);
            prop_assert_eq!(r.true_sensor.len(), values.len() - 2);
        }
    }
}
