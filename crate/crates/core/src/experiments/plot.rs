//! Minimal SVG line and scatter plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets;
use crate::error::{Error, Result};

use super::runner::{self, CHECKPOINT_FILE, PREDICTIONS_FILE, TRAINING_FILE};
use super::sweep::{self, ScatterPoint, SUMMARY_FILE};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Samples along the free axis of a slice plot.
const SLICE_SAMPLES: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, style: Style::Line }
    }

    pub fn markers(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, style: Style::Markers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 0.5 };
            (lo, hi) = (lo - pad, hi + pad);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Axis { lo, hi, log }
    }

    /// Position in `[0, 1]`, or `None` for values a log axis cannot show.
    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let t = if self.log { v.log10() } else { v };
        Some((t - self.lo) / (self.hi - self.lo))
    }

    /// Tick values in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let stride = ((b - a) / 6 + 1).max(1);
            return (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect();
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Figure {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let xa = Axis::fit(all().map(|p| p.0), self.log_x);
        let ya = Axis::fit(all().map(|p| p.1), self.log_y);
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let px = |u: f64| LEFT + u * pw;
        let py = |u: f64| TOP + (1.0 - u) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        for t in xa.ticks() {
            let Some(u) = xa.unit(t) else { continue };
            let x = px(u);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, TOP + ph);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 16.0,
                tick_label(t, xa.log)
            );
        }
        for t in ya.ticks() {
            let Some(u) = ya.unit(t) else { continue };
            let y = py(u);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t, ya.log)
            );
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let coords: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter_map(|&(x, y)| Some((px(xa.unit(x)?), py(ya.unit(y)?))))
                .collect();
            let class = match series.style {
                Style::Line => "line",
                Style::Markers => "markers",
            };
            let _ = writeln!(s, r#"<g class="{class}" data-name="{}">"#, escape(&series.name));
            match series.style {
                Style::Line => {
                    let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for (x, y) in &coords {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
                    }
                }
            }
            let _ = writeln!(s, "</g>");
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 14.0;
            match series.style {
                Style::Line => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                        lx + 18.0
                    );
                }
                Style::Markers => {
                    let _ = writeln!(s, r#"<circle cx="{}" cy="{ly}" r="3.5" fill="{color}"/>"#, lx + 9.0);
                }
            }
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn save(figure: &Figure, path: &Path) -> Result<()> {
    std::fs::write(path, figure.to_svg())?;
    Ok(())
}

/// Fixed coordinates of a slice through an n-D run; the one unnamed axis is
/// free. Axes are named `x1`, `x2`, … and values are normalised coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub fixed: Vec<(usize, f64)>,
}

impl std::str::FromStr for SliceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fixed = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (axis, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("slice entry {part:?} is not axis=value")))?;
            let axis = axis
                .trim()
                .strip_prefix('x')
                .and_then(|a| a.parse::<usize>().ok())
                .filter(|&a| a >= 1)
                .ok_or_else(|| Error::Config(format!("bad slice axis {axis:?}, expected x1, x2, …")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad slice value in {part:?}")))?;
            if fixed.iter().any(|(a, _)| *a == axis - 1) {
                return Err(Error::Config(format!("axis x{axis} fixed twice")));
            }
            fixed.push((axis - 1, value));
        }
        fixed.sort_by_key(|p| p.0);
        Ok(SliceSpec { fixed })
    }
}

impl SliceSpec {
    fn free_axis(&self, dim: usize) -> Result<usize> {
        let free: Vec<usize> = (0..dim).filter(|d| !self.fixed.iter().any(|(a, _)| a == d)).collect();
        if free.len() != 1 || self.fixed.iter().any(|(a, _)| *a >= dim) {
            return Err(Error::Config(format!(
                "a slice of a {dim}-D run must fix exactly {} valid axes",
                dim - 1
            )));
        }
        Ok(free[0])
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self.fixed.iter().map(|(a, v)| format!("x{}={v}", a + 1)).collect();
        parts.join(",")
    }
}

/// Renders whatever `run` holds: a sweep directory (two scatter plots), a
/// 1D run (training points plus dense prediction) or an n-D run (one plot per
/// slice, defaulting to `x1` free through the middle node).
pub fn plot_run(run: &Path, slices: &[SliceSpec], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let summary = run.join(SUMMARY_FILE);
    if summary.exists() {
        let points = read_scatter_points(&summary)?;
        return sweep::write_scatter_svgs(&points, out);
    }
    let training = runner::open_artifact(&run.join(TRAINING_FILE))?;
    let data = datasets::read_csv(training)?;
    let grid = &data.grid;
    let training_points = |fixed: &[(usize, f64)], free: usize| -> Vec<(f64, f64)> {
        (0..grid.len())
            .filter_map(|k| {
                let x = grid.coordinate(&grid.unravel(k));
                fixed.iter().all(|&(a, v)| (x[a] - v).abs() < 1e-9).then(|| (x[free], grid.values()[k]))
            })
            .collect()
    };

    if grid.dim() == 1 {
        let mut rdr = csv::Reader::from_reader(runner::open_artifact(&run.join(PREDICTIONS_FILE))?);
        let mut curve = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let parse = |i: usize| -> Result<f64> {
                row.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::InvalidDataset(format!("malformed prediction row {row:?}")))
            };
            curve.push((parse(0)?, parse(1)?));
        }
        let mut fig = Figure::new("Prediction", "x", "y");
        fig.push(Series::line("prediction", curve));
        fig.push(Series::markers("training", training_points(&[], 0)));
        let path = out.join("prediction.svg");
        save(&fig, &path)?;
        return Ok(vec![path]);
    }

    let net = runner::load_checkpoint(run.join(CHECKPOINT_FILE))?;
    let default_slice;
    let slices = if slices.is_empty() {
        let fixed = (1..grid.dim()).map(|d| (d, grid.axes()[d][grid.axes()[d].len() / 2])).collect();
        default_slice = [SliceSpec { fixed }];
        &default_slice[..]
    } else {
        slices
    };
    let mut written = Vec::new();
    for slice in slices {
        let free = slice.free_axis(grid.dim())?;
        let axis = &grid.axes()[free];
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        let xs: Vec<Vec<f64>> = (0..SLICE_SAMPLES)
            .map(|i| {
                let mut p = vec![0.0; grid.dim()];
                for &(a, v) in &slice.fixed {
                    p[a] = v;
                }
                p[free] = lo + (hi - lo) * i as f64 / (SLICE_SAMPLES - 1) as f64;
                p
            })
            .collect();
        let ys = net.predict_batch(&xs)?;
        let curve = xs.iter().zip(&ys).map(|(x, &y)| (x[free], y)).collect();
        let name = slice.name();
        let mut fig = Figure::new(&format!("Slice {name}"), &format!("x{}", free + 1), "y");
        fig.push(Series::line("prediction", curve));
        fig.push(Series::markers("training", training_points(&slice.fixed, free)));
        let path = out.join(format!("slice_{}.svg", super::config::slugify(&name)));
        save(&fig, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn read_scatter_points(summary: &Path) -> Result<Vec<ScatterPoint>> {
    let mut rdr = csv::Reader::from_reader(runner::open_artifact(summary)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidDataset(format!("summary lacks column {name}")))
    };
    let (act, size, status, mae, diff) =
        (col("activation")?, col("size_index")?, col("status")?, col("final_mae")?, col("diffusion_mse")?);
    let mut points = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if &row[status] != "ok" {
            continue;
        }
        points.push(ScatterPoint {
            activation: row[act].to_string(),
            size_index: row[size].parse().unwrap_or(f64::NAN),
            final_mae: row[mae].parse().ok(),
            diffusion_mse: row[diff].parse().ok(),
        });
    }
    Ok(points)
}
