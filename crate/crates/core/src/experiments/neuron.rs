//! Single-neuron study: `ŷ(x) = a·φ(w·x + b) + c` on three points.
//!
//! For every `(w, b)` on a uniform grid the output pair `(a, c)` is solved so
//! the two outer points are interpolated exactly; the candidate with the
//! smallest error at the middle point wins. The MSE loss gradient and Hessian
//! with respect to `(w, b, a, c)` are then taken by central differences.

use std::io::Write;

use nalgebra::{Matrix4, SymmetricEigen};
use serde::Serialize;

use crate::activations::{ActivationKind, ActivationSpec};
use crate::datasets::RegressionDataset;
use crate::error::{Error, Result};

/// Inner-parameter search range, shared by `w` and `b`.
pub const SEARCH_RANGE: (f64, f64) = (-10.0, 10.0);
pub const SEARCH_POINTS: usize = 201;
pub const FD_STEP: f64 = 1e-5;
/// Gradient norms below this are reported as vanishing.
pub const VANISHING_THRESHOLD: f64 = 1e-3;
/// Candidates whose 2×2 output system is worse conditioned are skipped.
pub const MAX_SYSTEM_CONDITION: f64 = 1e4;
pub const INTERPOLATION_TOL: f64 = 1e-10;
/// Piecewise-linear activations skip candidates with a pre-activation this
/// close to the kink, where the loss has no derivative to difference.
pub const KINK_CLEARANCE: f64 = 1e-3;

/// `(w, b, a, c)`.
pub type NeuronParams = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuronRecord {
    pub activation: String,
    pub params: NeuronParams,
    /// Fit residuals at the first and last point.
    pub outer_residuals: [f64; 2],
    /// `ŷ(x₂) − y₂`.
    pub middle_error: f64,
    pub loss: f64,
    pub gradient: [f64; 4],
    pub gradient_norm: f64,
    pub vanishing: bool,
    pub hessian: [[f64; 4]; 4],
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: [f64; 4],
    /// `max|λ| / min|λ|`.
    pub condition_number: f64,
    /// Largest gap between the step-`h` derivatives and their Richardson
    /// extrapolation from `h` and `h/2`.
    pub richardson_gap: f64,
    /// Candidates that passed the conditioning and interpolation checks.
    pub candidates: usize,
}

pub fn default_activations() -> Vec<ActivationSpec> {
    vec![
        ActivationSpec::plain(ActivationKind::Lu),
        ActivationSpec::plain(ActivationKind::Relu),
        ActivationSpec::leaky_relu(0.2),
        ActivationSpec::plain(ActivationKind::Elu),
        ActivationSpec::plain(ActivationKind::Silu),
        ActivationSpec::plain(ActivationKind::Softplus),
        ActivationSpec::plain(ActivationKind::Tanh),
        ActivationSpec::lelu(0.4),
    ]
}

fn model(phi: &ActivationSpec, p: &NeuronParams, x: f64) -> f64 {
    p[2] * phi.eval(p[0] * x + p[1]) + p[3]
}

fn mse(phi: &ActivationSpec, p: &NeuronParams, xs: &[f64; 3], ys: &[f64; 3]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (model(phi, p, x) - y).powi(2)).sum::<f64>() / 3.0
}

/// Best outer-interpolating parameters and the number of usable candidates.
pub fn fit_outer_points(phi: &ActivationSpec, xs: &[f64; 3], ys: &[f64; 3]) -> Option<(NeuronParams, usize)> {
    let (lo, hi) = SEARCH_RANGE;
    let step = (hi - lo) / (SEARCH_POINTS - 1) as f64;
    let mut best: Option<(NeuronParams, f64)> = None;
    let mut candidates = 0;
    for i in 0..SEARCH_POINTS {
        let w = lo + i as f64 * step;
        for j in 0..SEARCH_POINTS {
            let b = lo + j as f64 * step;
            if has_kink(phi) && xs.iter().any(|&x| (w * x + b).abs() < KINK_CLEARANCE) {
                continue;
            }
            let h1 = phi.eval(w * xs[0] + b);
            let h3 = phi.eval(w * xs[2] + b);
            let gap = h1 - h3;
            if gap == 0.0 || (h1.abs() + h3.abs() + 2.0) / gap.abs() > MAX_SYSTEM_CONDITION {
                continue;
            }
            let a = (ys[0] - ys[2]) / gap;
            let c = ys[0] - a * h1;
            let p = [w, b, a, c];
            let r1 = model(phi, &p, xs[0]) - ys[0];
            let r3 = model(phi, &p, xs[2]) - ys[2];
            if r1.abs().max(r3.abs()) >= INTERPOLATION_TOL {
                continue;
            }
            candidates += 1;
            let err = (model(phi, &p, xs[1]) - ys[1]).abs();
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((p, err));
            }
        }
    }
    best.map(|(p, _)| (p, candidates))
}

fn has_kink(phi: &ActivationSpec) -> bool {
    matches!(phi.kind, ActivationKind::Relu | ActivationKind::LeakyRelu)
}

fn gradient_fd(f: &dyn Fn(&NeuronParams) -> f64, p: &NeuronParams, h: f64) -> [f64; 4] {
    std::array::from_fn(|i| {
        let (mut up, mut dn) = (*p, *p);
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

fn hessian_fd(f: &dyn Fn(&NeuronParams) -> f64, p: &NeuronParams, h: f64) -> [[f64; 4]; 4] {
    let at = |di: (usize, f64), dj: (usize, f64)| {
        let mut q = *p;
        q[di.0] += di.1;
        q[dj.0] += dj.1;
        f(&q)
    };
    let mut hess = [[0.0; 4]; 4];
    for i in 0..4 {
        hess[i][i] = (at((i, h), (i, 0.0)) - 2.0 * f(p) + at((i, -h), (i, 0.0))) / (h * h);
        for j in 0..i {
            let v = (at((i, h), (j, h)) - at((i, h), (j, -h)) - at((i, -h), (j, h)) + at((i, -h), (j, -h)))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Ascending eigenvalues and `max|λ|/min|λ|` of a symmetric 4×4 matrix.
pub fn spectrum(hessian: &[[f64; 4]; 4]) -> ([f64; 4], f64) {
    let m = Matrix4::from_fn(|i, j| hessian[i][j]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let mut values = [eig[0], eig[1], eig[2], eig[3]];
    values.sort_by(f64::total_cmp);
    let abs = values.map(f64::abs);
    let max = abs.iter().copied().fold(0.0, f64::max);
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    (values, max / min)
}

/// Runs the study for each activation on a 1D dataset of exactly three
/// points (taken in ascending `x`).
pub fn single_neuron_study(data: &RegressionDataset, activations: &[ActivationSpec]) -> Result<Vec<NeuronRecord>> {
    let grid = &data.grid;
    if grid.dim() != 1 || grid.len() != 3 {
        return Err(Error::InvalidDataset(format!(
            "single-neuron study needs 3 points on a line, got shape {:?}",
            grid.shape()
        )));
    }
    let xs: [f64; 3] = std::array::from_fn(|i| grid.axes()[0][i]);
    let ys: [f64; 3] = std::array::from_fn(|i| grid.values()[i]);
    activations.iter().map(|phi| study_one(phi, &xs, &ys)).collect()
}

fn study_one(phi: &ActivationSpec, xs: &[f64; 3], ys: &[f64; 3]) -> Result<NeuronRecord> {
    phi.validate()?;
    let (p, candidates) = fit_outer_points(phi, xs, ys).ok_or_else(|| {
        Error::InvalidDataset(format!("no well-conditioned outer fit for {}", phi.label()))
    })?;
    let loss = |q: &NeuronParams| mse(phi, q, xs, ys);
    let gradient = gradient_fd(&loss, &p, FD_STEP);
    let gradient_half = gradient_fd(&loss, &p, FD_STEP / 2.0);
    let hessian = hessian_fd(&loss, &p, FD_STEP);
    let hessian_half = hessian_fd(&loss, &p, FD_STEP / 2.0);
    // Central differences are O(h²), so the extrapolation is (4·D(h/2) − D(h))/3.
    let mut gap: f64 = 0.0;
    for i in 0..4 {
        gap = gap.max(((4.0 * gradient_half[i] - gradient[i]) / 3.0 - gradient[i]).abs());
        for j in 0..4 {
            gap = gap.max(((4.0 * hessian_half[i][j] - hessian[i][j]) / 3.0 - hessian[i][j]).abs());
        }
    }
    let gradient_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let (eigenvalues, condition_number) = spectrum(&hessian);
    Ok(NeuronRecord {
        activation: phi.label(),
        params: p,
        outer_residuals: [model(phi, &p, xs[0]) - ys[0], model(phi, &p, xs[2]) - ys[2]],
        middle_error: model(phi, &p, xs[1]) - ys[1],
        loss: loss(&p),
        gradient,
        gradient_norm,
        vanishing: gradient_norm < VANISHING_THRESHOLD,
        hessian,
        eigenvalues,
        condition_number,
        richardson_gap: gap,
        candidates,
    })
}

/// One row per activation; the Hessian is flattened row-major as `h11…h44`.
pub fn write_study_csv<W: Write>(records: &[NeuronRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "activation", "w", "b", "a", "c", "residual_first", "residual_last", "middle_error", "loss", "grad_w",
        "grad_b", "grad_a", "grad_c", "gradient_norm", "vanishing",
    ]
    .map(String::from)
    .to_vec();
    for i in 1..=4 {
        header.extend((1..=4).map(|j| format!("h{i}{j}")));
    }
    header.extend(["lambda_1", "lambda_2", "lambda_3", "lambda_4", "condition_number", "richardson_gap", "candidates"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.activation.clone()];
        let nums = r
            .params
            .iter()
            .chain(&r.outer_residuals)
            .chain([&r.middle_error, &r.loss])
            .chain(&r.gradient)
            .chain([&r.gradient_norm]);
        row.extend(nums.map(|v| format!("{v:e}")));
        row.push(r.vanishing.to_string());
        row.extend(r.hessian.iter().flatten().map(|v| format!("{v:e}")));
        row.extend(r.eigenvalues.iter().chain([&r.condition_number, &r.richardson_gap]).map(|v| format!("{v:e}")));
        row.push(r.candidates.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_exp;
    use crate::diffusion::StructuredGrid;

    fn dataset(xs: [f64; 3], ys: [f64; 3]) -> RegressionDataset {
        RegressionDataset::from_grid(StructuredGrid::new(vec![xs.to_vec()], ys.to_vec()).unwrap())
    }

    fn analytic_gradient(phi: &ActivationSpec, p: &NeuronParams, xs: &[f64; 3], ys: &[f64; 3]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let z = p[0] * x + p[1];
            let r = model(phi, p, x) - y;
            let d = p[2] * phi.derivative(z);
            let k = 2.0 * r / 3.0;
            g[0] += k * d * x;
            g[1] += k * d;
            g[2] += k * phi.eval(z);
            g[3] += k;
        }
        g
    }

    #[test]
    fn linear_unit_fits_collinear_points_exactly() {
        let data = dataset([-1.0, 0.0, 1.0], [3.0, 2.0, 1.0]);
        let r = &single_neuron_study(&data, &[ActivationSpec::plain(ActivationKind::Lu)]).unwrap()[0];
        assert!(r.middle_error.abs() < 1e-12);
        assert!(r.gradient_norm < 1e-9);
        assert!(r.vanishing);
    }

    #[test]
    fn outer_points_are_interpolated() {
        let data = gen_exp(3).unwrap();
        for r in single_neuron_study(&data, &default_activations()).unwrap() {
            assert!(r.outer_residuals.iter().all(|v| v.abs() < INTERPOLATION_TOL), "{}", r.activation);
            assert!(r.candidates > 0);
        }
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let data = gen_exp(3).unwrap();
        let xs = [-1.0, 0.0, 1.0];
        let ys: [f64; 3] = std::array::from_fn(|i| data.grid.values()[i]);
        for phi in default_activations() {
            let r = &single_neuron_study(&data, &[phi]).unwrap()[0];
            let exact = analytic_gradient(&phi, &r.params, &xs, &ys);
            for (fd, ex) in r.gradient.iter().zip(exact) {
                assert!((fd - ex).abs() <= 1e-6 * ex.abs().max(1.0), "{}: {fd} vs {ex}", r.activation);
            }
        }
    }

    #[test]
    fn spectrum_of_diagonal_matrix() {
        let h = [[4.0, 0.0, 0.0, 0.0], [0.0, -2.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.5]];
        let (values, cond) = spectrum(&h);
        assert_eq!(values, [-2.0, 0.5, 1.0, 4.0]);
        assert_eq!(cond, 8.0);
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let f = |p: &NeuronParams| p[0] * p[0] + 3.0 * p[0] * p[1] - p[2] * p[3] + 0.5 * p[3] * p[3];
        let h = hessian_fd(&f, &[0.3, -0.2, 1.0, 2.0], 1e-3);
        let expected = [[2.0, 3.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, -1.0, 1.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert!((h[i][j] - expected[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_wrong_point_count() {
        let data = gen_exp(4).unwrap();
        assert!(matches!(single_neuron_study(&data, &default_activations()), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn csv_has_one_row_per_activation() {
        let data = gen_exp(3).unwrap();
        let records = single_neuron_study(&data, &default_activations()).unwrap();
        let mut buf = Vec::new();
        write_study_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), records.len() + 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 15 + 16 + 7);
    }
}
