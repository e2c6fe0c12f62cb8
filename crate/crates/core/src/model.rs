//! Linear multi-delay systems `x'(t) = A₀x(t) + Σₖ Aₖ x(t − hₖ)`.
//!
//! This module holds the system type, evaluation of the characteristic
//! matrix `M(s) = −sI + A₀ + Σₖ Aₖ e^{−hₖ s}`, the residual oracle
//! `σ_min(M(iω))`, the discretized heat-rod test system, and the JSON model
//! file format.

use std::f64::consts::PI;
use std::path::Path;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A linear time-invariant DDE with `m ≥ 1` delays and real `n × n`
/// coefficient matrices. Index 0 is the non-delayed term.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeSystem {
    n: usize,
    matrices: Vec<Mat<f64>>,
}

impl DdeSystem {
    /// Builds a system from `A₀..A_m`.
    pub fn new(matrices: Vec<Mat<f64>>) -> Result<Self> {
        if matrices.len() < 2 {
            return Err(Error::input(format!(
                "a delay system needs at least two matrices (A0 and A1), got {}",
                matrices.len()
            )));
        }
        let n = matrices[0].nrows();
        if n == 0 {
            return Err(Error::input("system dimension must be positive"));
        }
        for (k, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::input(format!(
                    "A{k} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            for j in 0..n {
                for i in 0..n {
                    if !a[(i, j)].is_finite() {
                        return Err(Error::input(format!("A{k}[{i},{j}] is not finite")));
                    }
                }
            }
        }
        Ok(Self { n, matrices })
    }

    /// Scalar system with coefficients `a₀..a_m`.
    pub fn scalar(coeffs: &[f64]) -> Result<Self> {
        Self::new(
            coeffs
                .iter()
                .map(|&a| Mat::from_fn(1, 1, |_, _| a))
                .collect(),
        )
    }

    /// Builds a system from row-major nested vectors, one entry per matrix.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut matrices = Vec::with_capacity(rows.len());
        for (k, a) in rows.iter().enumerate() {
            let n = a.len();
            if let Some((i, r)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
                return Err(Error::input(format!(
                    "A{k} row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            matrices.push(Mat::from_fn(n, n, |i, j| a[i][j]));
        }
        Self::new(matrices)
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of delays.
    pub fn m(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn matrix(&self, k: usize) -> MatRef<'_, f64> {
        self.matrices[k].as_ref()
    }

    pub fn matrices(&self) -> &[Mat<f64>] {
        &self.matrices
    }

    /// Row-major copy of every matrix.
    pub fn to_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.matrices
            .iter()
            .map(|a| {
                (0..self.n)
                    .map(|i| (0..self.n).map(|j| a[(i, j)]).collect())
                    .collect()
            })
            .collect()
    }

    /// `maxₖ ‖Aₖ‖₂`.
    pub fn max_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(|a| linalg::spectral_norm(linalg::to_complex(a.as_ref()).as_ref()))
            .fold(0.0, f64::max)
    }

    /// The same system with the delayed matrices relabeled: position `k` of
    /// the result (1-based among delays) takes `A_{order[k-1]}`.
    pub fn permute_delays(&self, order: &[usize]) -> Result<Self> {
        let m = self.m();
        let mut seen = vec![false; m + 1];
        if order.len() != m
            || order
                .iter()
                .any(|&k| k == 0 || k > m || std::mem::replace(&mut seen[k], true))
        {
            return Err(Error::input(format!(
                "{order:?} is not a permutation of 1..={m}"
            )));
        }
        let mut matrices = vec![self.matrices[0].clone()];
        matrices.extend(order.iter().map(|&k| self.matrices[k].clone()));
        Ok(Self {
            n: self.n,
            matrices,
        })
    }
}

/// Value of the characteristic matrix at one point `s` and delay vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CharMatrix(Mat<c64>);

impl CharMatrix {
    pub fn entries(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> Mat<c64> {
        self.0
    }
}

/// `M(s) = −sI + A₀ + Σₖ Aₖ e^{−hₖ s}`.
pub fn eval_char_matrix(sys: &DdeSystem, s: c64, delays: &[f64]) -> Result<CharMatrix> {
    if delays.len() != sys.m() {
        return Err(Error::input(format!(
            "expected {} delays, got {}",
            sys.m(),
            delays.len()
        )));
    }
    if let Some(h) = delays.iter().find(|h| !h.is_finite() || **h < 0.0) {
        return Err(Error::input(format!(
            "delay {h} is not a finite nonnegative number"
        )));
    }
    let n = sys.n();
    let weights: Vec<c64> = std::iter::once(c64::new(1.0, 0.0))
        .chain(delays.iter().map(|&h| (-s * h).exp()))
        .collect();
    let m = Mat::from_fn(n, n, |i, j| {
        let mut acc = if i == j { -s } else { c64::new(0.0, 0.0) };
        for (a, w) in sys.matrices.iter().zip(&weights) {
            acc += *w * a[(i, j)];
        }
        acc
    });
    Ok(CharMatrix(m))
}

/// Smallest singular value of the characteristic matrix. Returns NaN if the
/// SVD fails to converge, which makes every tolerance comparison fail.
pub fn smallest_singular_value(m: &CharMatrix) -> f64 {
    linalg::singular_values(m.entries())
        .map(|s| s.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN)
}

/// Residual oracle `σ_min(M(iω))` at the given delays.
pub fn residual_at(sys: &DdeSystem, omega: f64, delays: &[f64]) -> Result<f64> {
    let m = eval_char_matrix(sys, c64::new(0.0, omega), delays)?;
    Ok(smallest_singular_value(&m))
}

/// Parameters of the heated rod
/// `u_t = u_xx + β(1 + sin 3πx)u − Σ κₖ δ(x − xₖ) u(ξₖ, t − hₖ)` with
/// Neumann ends, where the sensed points are `ξ = (0, x₁, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    pub beta: f64,
    pub kappa: [f64; 3],
    pub positions: [f64; 3],
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            beta: 10.0,
            kappa: [4.0, 10.0, 4.0],
            positions: [1.0 / 3.0, 0.5, 0.75],
        }
    }
}

/// Central-difference discretization of the heated rod on `n` equispaced
/// nodes `xᵢ = i/(n−1)`.
///
/// Neumann conditions use ghost-point mirroring, so the first and last rows
/// of the second-difference stencil read `(−2, 2)/Δx²`. Each delta function
/// becomes `1/Δx` at the nearest node, rounding half away from zero.
pub fn build_heat_system(n: usize, params: &HeatParams) -> Result<DdeSystem> {
    if n < 4 {
        return Err(Error::input(format!(
            "heat discretization needs n >= 4 nodes, got {n}"
        )));
    }
    let dx = 1.0 / (n - 1) as f64;
    let nearest = |x: f64| -> Result<usize> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::input(format!(
                "feedback position {x} is not inside (0, 1)"
            )));
        }
        let node = (x / dx).round() as usize;
        if node == 0 || node == n - 1 {
            return Err(Error::input(format!(
                "feedback position {x} falls on a boundary node with n = {n}; refine the grid"
            )));
        }
        Ok(node)
    };
    let rows = [
        nearest(params.positions[0])?,
        nearest(params.positions[1])?,
        nearest(params.positions[2])?,
    ];
    // sensed states: u(0), u(x₁), u(1)
    let cols = [0, rows[1], n - 1];

    let inv_dx2 = 1.0 / (dx * dx);
    let mut a0 = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let x = i as f64 * dx;
        a0[(i, i)] = -2.0 * inv_dx2 + params.beta * (1.0 + (3.0 * PI * x).sin());
        if i == 0 {
            a0[(0, 1)] = 2.0 * inv_dx2;
        } else if i == n - 1 {
            a0[(n - 1, n - 2)] = 2.0 * inv_dx2;
        } else {
            a0[(i, i - 1)] = inv_dx2;
            a0[(i, i + 1)] = inv_dx2;
        }
    }
    let mut matrices = vec![a0];
    for k in 0..3 {
        let mut a = Mat::<f64>::zeros(n, n);
        a[(rows[k], cols[k])] = -params.kappa[k] / dx;
        matrices.push(a);
    }
    DdeSystem::new(matrices)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
}

/// Parses a model from JSON text. `origin` names the source in error messages.
pub fn parse_system(text: &str, origin: &str) -> Result<DdeSystem> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("{origin}:{}:{}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if file.m < 1 {
        return Err(Error::parse(format!("{origin}: m"), "m must be at least 1"));
    }
    if file.n < 1 {
        return Err(Error::parse(format!("{origin}: n"), "n must be at least 1"));
    }
    if file.a.len() != file.m + 1 {
        return Err(Error::parse(
            format!("{origin}: A"),
            format!(
                "expected m+1 = {} matrices, found {}",
                file.m + 1,
                file.a.len()
            ),
        ));
    }
    for (k, a) in file.a.iter().enumerate() {
        if a.len() != file.n {
            return Err(Error::parse(
                format!("{origin}: A[{k}]"),
                format!("expected {} rows, found {}", file.n, a.len()),
            ));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != file.n {
                return Err(Error::parse(
                    format!("{origin}: A[{k}][{i}]"),
                    format!("expected {} entries, found {}", file.n, row.len()),
                ));
            }
        }
    }
    DdeSystem::from_rows(&file.a).map_err(|e| Error::parse(origin, e.to_string()))
}

/// Serializes a model to JSON text.
pub fn format_system(sys: &DdeSystem) -> String {
    let file = ModelFile {
        n: sys.n(),
        m: sys.m(),
        a: sys.to_rows(),
    };
    let mut s = serde_json::to_string(&file).expect("model serialization cannot fail");
    s.push('\n');
    s
}

pub fn load_system(path: impl AsRef<Path>) -> Result<DdeSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_system(&text, &path.display().to_string())
}

pub fn save_system(sys: &DdeSystem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_system(sys))?;
    Ok(())
}
