//! Points, data matrices and the spatial (L2) median.
//!
//! The spatial median of `x_1, …, x_n` is any point `y` minimising
//! `f(y) = Σ ‖y − x_i‖`, equivalently a point where the sum of spatial signs
//! `Σ (x_i − y)/‖x_i − y‖` vanishes (or, when `y` coincides with data points,
//! has norm no larger than that multiplicity). It is computed here with the
//! Weiszfeld fixed-point iteration in the modified form of Vardi and Zhang,
//! which steps off a data point only when that point is not already optimal
//! and keeps the objective non-increasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point in `d ≥ 1` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have d >= 1".into()));
        }
        if let Some(column) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, column });
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `n × d` row-major matrix of finite observations, `n ≥ 1`, `d ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptySample)?;
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, rows.len(), d)
    }

    pub fn from_flat(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if d == 0 {
            return Err(Error::InvalidParameter("data must have d >= 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                column: pos % d,
            });
        }
        Ok(DataMatrix { values, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every row, producing a matrix of the same shape.
    pub fn map_rows<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let rows = self.rows().map(f).collect();
        Self::from_rows(rows)
    }

    /// Per-column z-scores (sample standard deviation). Constant columns are
    /// centred but left unscaled.
    pub fn standardized(&self) -> Self {
        let n = self.n as f64;
        let mut values = self.values.clone();
        for j in 0..self.d {
            let mean = self.rows().map(|r| r[j]).sum::<f64>() / n;
            let var = if self.n > 1 {
                self.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let sd = var.sqrt();
            for i in 0..self.n {
                let v = &mut values[i * self.d + j];
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        DataMatrix {
            values,
            n: self.n,
            d: self.d,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        mean_of_rows(self.rows())
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn mean_of_rows<'a, I>(rows: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for r in rows {
        if acc.is_empty() {
            acc = vec![0.0; r.len()];
        }
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        count += 1;
    }
    let c = count.max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= c);
    acc
}

/// Sample median; even `n` takes the midpoint of the two central order
/// statistics.
pub fn univariate_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(column) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, column });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    })
}

/// Unit vector from `anchor` towards `x`, or the zero vector if they coincide.
pub fn spatial_sign(x: &Point, anchor: &Point) -> Result<Point> {
    if x.dim() != anchor.dim() {
        return Err(Error::DimensionMismatch {
            expected: anchor.dim(),
            found: x.dim(),
        });
    }
    let diff: Vec<f64> = x.coords().iter().zip(anchor.coords()).map(|(a, b)| a - b).collect();
    let len = norm(&diff);
    if len == 0.0 {
        return Ok(Point(vec![0.0; diff.len()]));
    }
    Ok(Point(diff.into_iter().map(|v| v / len).collect()))
}

/// Sum of Euclidean distances from `y` to every row.
pub fn objective<'a, I>(rows: I, y: &[f64]) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter().map(|x| euclidean(x, y)).sum()
}

pub fn coordinatewise_median(rows: &[&[f64]]) -> Result<Vec<f64>> {
    let d = rows.first().map(|r| r.len()).ok_or(Error::EmptySample)?;
    let mut column = Vec::with_capacity(rows.len());
    (0..d)
        .map(|j| {
            column.clear();
            column.extend(rows.iter().map(|r| r[j]));
            univariate_median(&column)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeiszfeldOptions {
    /// Stop once `‖y_{t+1} − y_t‖ / (1 + ‖y_t‖)` falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WeiszfeldOptions {
    fn default() -> Self {
        WeiszfeldOptions {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

impl WeiszfeldOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianResult {
    pub median: Point,
    /// Sum of distances from `median` to the inputs.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Distances this close (relative to `1 + ‖y‖`) count as coincident.
const COINCIDENT: f64 = 1e-13;

/// Relative slack allowed for round-off when checking monotone descent.
pub const DESCENT_SLACK: f64 = 1e-11;

pub fn spatial_median(data: &DataMatrix, opts: WeiszfeldOptions) -> Result<MedianResult> {
    let rows: Vec<&[f64]> = data.rows().collect();
    spatial_median_of(&rows, None, opts)
}

/// Spatial median of a set of rows, optionally warm-started from `start`
/// (the coordinate-wise median otherwise).
///
/// Weiszfeld iteration does the work. Its result is then settled onto a data
/// point that provably is the minimizer, or else sharpened by a few Newton
/// steps, since Weiszfeld alone can stall far above `tol` on nearly flat
/// objectives.
pub fn spatial_median_of(
    rows: &[&[f64]],
    start: Option<&[f64]>,
    opts: WeiszfeldOptions,
) -> Result<MedianResult> {
    spatial_median_traced(rows, start, opts, |_| {})
}

/// As [`spatial_median_of`], reporting the objective at each iterate to
/// `observe`, starting with the initial point.
pub fn spatial_median_traced<F>(
    rows: &[&[f64]],
    start: Option<&[f64]>,
    opts: WeiszfeldOptions,
    observe: F,
) -> Result<MedianResult>
where
    F: FnMut(f64),
{
    weiszfeld(rows, start, opts, true, observe)
}

/// Plain Weiszfeld without the final refinement. Cheaper, for inner loops
/// that only need a descent step towards the median.
pub(crate) fn spatial_median_unrefined(
    rows: &[&[f64]],
    start: Option<&[f64]>,
    opts: WeiszfeldOptions,
) -> Result<MedianResult> {
    weiszfeld(rows, start, opts, false, |_| {})
}

fn weiszfeld<F>(
    rows: &[&[f64]],
    start: Option<&[f64]>,
    opts: WeiszfeldOptions,
    refine: bool,
    mut observe: F,
) -> Result<MedianResult>
where
    F: FnMut(f64),
{
    opts.validate()?;
    let d = rows.first().map(|r| r.len()).ok_or(Error::EmptySample)?;
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let mut y = match start {
        Some(s) if s.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.len(),
            })
        }
        Some(s) => s.to_vec(),
        None => coordinatewise_median(rows)?,
    };

    let mut weighted = vec![0.0; d];
    let mut sign_sum = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut iterations = 0;
    let mut converged = false;
    // Set when the optimality condition itself ended the loop.
    let mut exact = false;
    let mut prev_objective = f64::INFINITY;

    loop {
        weighted.fill(0.0);
        sign_sum.fill(0.0);
        let mut weight_total = 0.0;
        let mut multiplicity = 0usize;
        let mut f = 0.0;
        let y_norm = norm(&y);
        let eps = COINCIDENT * (1.0 + y_norm);

        for x in rows {
            let dist = euclidean(x, &y);
            f += dist;
            if dist <= eps {
                multiplicity += 1;
                continue;
            }
            let w = 1.0 / dist;
            weight_total += w;
            for j in 0..d {
                weighted[j] += w * x[j];
                sign_sum[j] += w * (x[j] - y[j]);
            }
        }

        debug_assert!(
            f <= prev_objective + DESCENT_SLACK * prev_objective.abs(),
            "Weiszfeld objective increased: {prev_objective} -> {f}"
        );
        observe(f);
        prev_objective = f;

        // Every point sits on y, or y satisfies the optimality condition
        // ‖Σ sign(x_i − y)‖ ≤ multiplicity(y).
        if weight_total == 0.0 || norm(&sign_sum) <= multiplicity as f64 {
            converged = true;
            exact = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let r = norm(&sign_sum);
        let damping = (multiplicity as f64 / r).min(1.0);
        for j in 0..d {
            let t = weighted[j] / weight_total;
            next[j] = (1.0 - damping) * t + damping * y[j];
        }
        let step = euclidean(&next, &y) / (1.0 + y_norm);
        std::mem::swap(&mut y, &mut next);
        iterations += 1;

        if step < opts.tol {
            converged = true;
            let f = objective(rows.iter().copied(), &y);
            debug_assert!(
                f <= prev_objective + DESCENT_SLACK * prev_objective.abs(),
                "Weiszfeld objective increased: {prev_objective} -> {f}"
            );
            observe(f);
            break;
        }
    }

    // Near a data point that is itself the minimizer, Weiszfeld creeps in
    // sublinearly and the step rule stops short. Settle on that point exactly.
    let refine = refine && !exact;
    if let Some(x) = refine.then(|| strict_minimizer_near(rows, &y)).flatten() {
        // The optimality condition holds exactly there, so this counts as
        // converged even if the iteration budget ran out first.
        let f = objective(rows.iter().copied(), x);
        y.copy_from_slice(x);
        observe(f);
        converged = true;
    } else if refine {
        // Weiszfeld contracts slowly when the objective is nearly flat in
        // some direction, so it can stop short of the optimum or exhaust
        // the budget. A few guarded Newton steps close the gap. Steps are
        // judged by the gradient norm, which stays informative after the
        // objective has flattened to rounding level.
        if let Some((mut delta, mut grad)) = newton_step(rows, &y) {
            let mut accepted = 0;
            let mut tries = 0;
            // Below this the gradient is rounding noise, and on flat minimizer
            // sets (collinear clusters) following it would only drift.
            let floor = 1e-12 * rows.len() as f64;
            while accepted < NEWTON_STEPS && tries < NEWTON_TRIES && grad > floor {
                tries += 1;
                let candidate: Vec<f64> = y.iter().zip(&delta).map(|(a, b)| a - b).collect();
                let next = newton_step(rows, &candidate);
                let f = objective(rows.iter().copied(), &candidate);
                let better = matches!(next, Some((_, g)) if g < grad);
                if !(better && f <= prev_objective + DESCENT_SLACK * prev_objective) {
                    // Overshoot, typically near a data point where curvature
                    // blows up: retry with half the step.
                    delta.iter_mut().for_each(|v| *v *= 0.5);
                    continue;
                }
                if norm(&delta) / (1.0 + norm(&y)) < opts.tol {
                    converged = true;
                }
                y = candidate;
                observe(f);
                prev_objective = prev_objective.min(f);
                (delta, grad) = next.unwrap();
                accepted += 1;
            }
            if grad <= floor {
                converged = true;
            }
        }
    }

    let objective = objective(rows.iter().copied(), &y);
    Ok(MedianResult {
        median: Point(y),
        objective,
        iterations,
        converged,
    })
}

/// The data point closest to `y`, if it passes the strict minimizer test
/// `‖Σ_{x_i ≠ x} sign(x_i − x)‖ < multiplicity(x)`. Strictness rules out the
/// flat case (e.g. two points) where the minimizer is not unique.
fn strict_minimizer_near<'a>(rows: &[&'a [f64]], y: &[f64]) -> Option<&'a [f64]> {
    let nearest = *rows
        .iter()
        .min_by(|a, b| squared_euclidean(a, y).total_cmp(&squared_euclidean(b, y)))?;
    let d = y.len();
    let mut sign_sum = vec![0.0; d];
    let mut multiplicity = 0usize;
    for x in rows {
        let dist = euclidean(x, nearest);
        if dist == 0.0 {
            multiplicity += 1;
            continue;
        }
        for j in 0..d {
            sign_sum[j] += (x[j] - nearest[j]) / dist;
        }
    }
    // The margin keeps rounding from promoting the flat case to strict.
    let margin = 1e-9 * rows.len() as f64;
    (norm(&sign_sum) < multiplicity as f64 - margin).then_some(nearest)
}

const NEWTON_STEPS: usize = 8;
const NEWTON_TRIES: usize = 64;

/// Newton step `H⁻¹∇f` at `y` and `‖∇f‖`, or `None` when `y` touches a data
/// point.
fn newton_step(rows: &[&[f64]], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = y.len();
    let mut grad = vec![0.0; d];
    let mut hess = vec![vec![0.0; d]; d];
    let mut u = vec![0.0; d];
    for x in rows {
        let dist = euclidean(x, y);
        if dist <= COINCIDENT * (1.0 + norm(y)) {
            return None;
        }
        for j in 0..d {
            u[j] = (y[j] - x[j]) / dist;
            grad[j] += u[j];
        }
        for i in 0..d {
            for j in 0..d {
                let identity = if i == j { 1.0 } else { 0.0 };
                hess[i][j] += (identity - u[i] * u[j]) / dist;
            }
        }
    }
    // A tiny ridge keeps the solve well posed when the data span a proper
    // affine subspace; the gradient has no component normal to it.
    let ridge = 1e-12 * (0..d).map(|i| hess[i][i]).sum::<f64>();
    for (i, row) in hess.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let grad_norm = norm(&grad);
    solve(hess, grad).map(|delta| (delta, grad_norm))
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-15 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..d {
            let f = a[row][col] / a[col][col];
            for k in col..d {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let tail: f64 = ((row + 1)..d).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}
