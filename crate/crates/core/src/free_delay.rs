//! Critical delays for independent delays.
//!
//! Fixing the phases `φₖ = hₖω` of the first `m − 1` delays turns the
//! critical condition into a quadratic eigenvalue problem in
//! `z = e^{−ih_mω}` of size `n²`:
//!
//! `(z²M₂ + zM₁ + M₀)u = 0`, with `M₂ = I⊗A_m`, `M₀ = A_m⊗I` and
//! `M₁ = Σ_{k<m} (I⊗Aₖe^{−iφₖ} + Aₖ⊗I e^{iφₖ})`.
//!
//! Eigenvalues on the unit circle whose eigenvector reshapes to a Hermitian
//! rank-one matrix `vv*` give a crossing frequency
//! `ω = −i v*(A_m z + Σ_{k<m} Aₖe^{−iφₖ})v` and the delays
//! `hₖ = (φₖ + 2pₖπ)/ω`, `h_m = (−Arg z + 2p_mπ)/ω`. [`sweep`] scans the
//! phases over a grid.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use faer::{c64, Col, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Rejection, Result};
use crate::linalg::{self, CompanionPair, EigenPair, Eigenvalue};
use crate::model::{self, DdeSystem};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Relative distance in `(h̄, ω)` below which two points are merged.
pub const DEDUP_TOL: f64 = 1e-8;

/// Grid, branch and tolerance settings shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Grid step for each free phase.
    pub delta: f64,
    /// Branch indices range over `−p_max..=p_max`.
    pub p_max: u32,
    /// Delays above this are discarded.
    pub h_max: f64,
    /// Accept `z` when `| |z| − 1 | ≤ unit_tol`.
    pub unit_tol: f64,
    /// Accept `ω` when `|Im ω| ≤ omega_tol·max(1, |ω|)`; also the smallest
    /// admissible `|ω|`.
    pub omega_tol: f64,
    /// Bound on `σ_min(M(iω))`. `None` means `1e−6·(1 + maxₖ‖Aₖ‖₂)`.
    pub residual_tol: Option<f64>,
    /// Largest accepted σ₂/σ₁ of the reshaped eigenvector.
    pub rank_tol: f64,
    /// Find unit eigenvalues through the Cayley-transformed pencil.
    pub use_cayley: bool,
    /// Polish eigenvalues near the unit circle by inverse iteration on the
    /// polynomial and take eigenvectors from its null space.
    #[serde(default = "default_refine")]
    pub refine: bool,
}

fn default_refine() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta: TAU / 629.0,
            p_max: 2,
            h_max: 20.0,
            unit_tol: f64::EPSILON.sqrt(),
            omega_tol: 1e-6,
            residual_tol: None,
            rank_tol: linalg::DEFAULT_RANK_TOL,
            use_cayley: false,
            refine: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{name} must be a positive finite number, got {x}"
                )))
            }
        };
        positive("delta", self.delta)?;
        positive("h_max", self.h_max)?;
        positive("unit_tol", self.unit_tol)?;
        positive("omega_tol", self.omega_tol)?;
        positive("rank_tol", self.rank_tol)?;
        if let Some(t) = self.residual_tol {
            positive("residual_tol", t)?;
        }
        if self.delta > TAU {
            return Err(Error::input(format!("delta {} exceeds 2*pi", self.delta)));
        }
        Ok(())
    }

    /// The residual bound in effect for `sys`.
    pub fn residual_tol_for(&self, sys: &DdeSystem) -> f64 {
        self.residual_tol
            .unwrap_or_else(|| 1e-6 * (1.0 + sys.max_norm()))
    }
}

/// Maps an angle into `[−π, π)`. Values already in range are returned
/// unchanged.
pub fn wrap_angle(phi: f64) -> f64 {
    if (-PI..PI).contains(&phi) {
        return phi;
    }
    let r = (phi + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// `φⱼ = −π + jΔ` for all `j` with `φⱼ < π`.
pub fn phi_grid(delta: f64) -> Vec<f64> {
    let count = (TAU / delta - 1e-9).ceil().max(1.0) as usize;
    (0..count)
        .map(|j| -PI + j as f64 * delta)
        .filter(|&p| p < PI)
        .collect()
}

/// Cartesian product of `dims` copies of [`phi_grid`], first coordinate
/// slowest. `dims = 0` gives a single empty point.
pub fn grid_points(dims: usize, delta: f64) -> Vec<Vec<f64>> {
    let axis = phi_grid(delta);
    let mut points = vec![Vec::new()];
    for _ in 0..dims {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

fn phase_weights(phi: &[f64]) -> Vec<c64> {
    std::iter::once(ONE)
        .chain(phi.iter().map(|&p| c64::from_polar(1.0, -p)))
        .collect()
}

/// `v* A v` for a real matrix.
fn quad_form(a: MatRef<'_, f64>, v: &Col<c64>) -> c64 {
    let n = v.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        let mut row = ZERO;
        for j in 0..n {
            row += v[j] * a[(i, j)];
        }
        acc += v[i].conj() * row;
    }
    acc
}

/// Coefficients of `z²M₂ + zM₁ + M₀` at fixed phases.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPencil {
    pub m2: Mat<c64>,
    pub m1: Mat<c64>,
    pub m0: Mat<c64>,
    pub phi: Vec<f64>,
}

impl QuadraticPencil {
    /// `P(z) = z²M₂ + zM₁ + M₀`.
    pub fn eval(&self, z: c64) -> Mat<c64> {
        let d = self.m0.nrows();
        Mat::from_fn(d, d, |i, j| {
            z * z * self.m2[(i, j)] + z * self.m1[(i, j)] + self.m0[(i, j)]
        })
    }
}

/// Builds the vectorized quadratic pencil. Phases outside `[−π, π)` are
/// wrapped.
pub fn build_quadratic_pencil(sys: &DdeSystem, phi: &[f64]) -> Result<QuadraticPencil> {
    let m = sys.m();
    if phi.len() + 1 != m {
        return Err(Error::input(format!(
            "expected {} phases, got {}",
            m - 1,
            phi.len()
        )));
    }
    let phi: Vec<f64> = phi.iter().map(|&p| wrap_angle(p)).collect();
    let n = sys.n();
    let eye = Mat::<c64>::identity(n, n);
    let am = linalg::to_complex(sys.matrix(m));
    let m2 = linalg::kron(eye.as_ref(), am.as_ref());
    let m0 = linalg::kron(am.as_ref(), eye.as_ref());
    let mut m1 = Mat::<c64>::zeros(n * n, n * n);
    for (k, w) in phase_weights(&phi).into_iter().enumerate() {
        let ak = linalg::to_complex(sys.matrix(k));
        let left = linalg::kron(eye.as_ref(), ak.as_ref());
        let right = linalg::kron(ak.as_ref(), eye.as_ref());
        let wc = w.conj();
        for j in 0..n * n {
            for i in 0..n * n {
                m1[(i, j)] += w * left[(i, j)] + wc * right[(i, j)];
            }
        }
    }
    Ok(QuadraticPencil { m2, m1, m0, phi })
}

/// Companion pair `A = [[0, I], [M₀, M₁]]`, `B = [[I, 0], [0, −M₂]]`, so that
/// `Aw = zBw` with `w = (u; zu)` exactly when `(z²M₂ + zM₁ + M₀)u = 0`.
pub fn companion_linearize_quadratic(p: &QuadraticPencil) -> CompanionPair {
    let d = p.m0.nrows();
    let n = (d as f64).sqrt().round() as usize;
    let a = Mat::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
        (true, true) => ZERO,
        (true, false) => {
            if j - d == i {
                ONE
            } else {
                ZERO
            }
        }
        (false, true) => p.m0[(i - d, j)],
        (false, false) => p.m1[(i - d, j - d)],
    });
    let b = Mat::from_fn(2 * d, 2 * d, |i, j| match (i < d, j < d) {
        (true, true) => {
            if i == j {
                ONE
            } else {
                ZERO
            }
        }
        (false, false) => -p.m2[(i - d, j - d)],
        _ => ZERO,
    });
    let leading = Mat::from_fn(n, n, |i, j| p.m2[(i, j)]);
    let coeffs = vec![p.m0.clone(), p.m1.clone(), p.m2.clone()];
    CompanionPair {
        a,
        b,
        block_size: d,
        blocks: 2,
        leading,
        coeffs,
    }
}

/// A unit-circle eigenvalue with the leading block of its eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitEigenpair {
    pub z: c64,
    pub u: Col<c64>,
}

/// Rank-one candidate `u = vec(vv*)` for an infinite eigenvalue, with `v`
/// in the null space of the leading matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteCandidate {
    pub v: Col<c64>,
    pub u: Col<c64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpectrum {
    pub unit: Vec<UnitEigenpair>,
    /// Number of eigenvalues flagged infinite by the solver.
    pub infinite_count: usize,
    /// Hermitian rank-one vectors in the infinite eigenspace, one per null
    /// vector of the leading matrix. Empty when `infinite_count == 0`.
    pub infinite: Vec<InfiniteCandidate>,
}

fn hermitian_outer(v: &Col<c64>) -> Col<c64> {
    linalg::vec((v * v.adjoint()).as_ref())
}

/// All eigenpairs of a companion pair, optionally via the Cayley transform.
pub fn companion_eigenpairs(pair: &CompanionPair, use_cayley: bool) -> Result<Vec<EigenPair>> {
    if use_cayley {
        let (ca, cb) = linalg::cayley_pencil(pair.a.as_ref(), pair.b.as_ref());
        Ok(linalg::solve_generalized_eigen(ca.as_ref(), cb.as_ref())?
            .into_iter()
            .map(|p| EigenPair {
                value: linalg::cayley_z(p.value),
                vector: p.vector,
            })
            .collect())
    } else {
        linalg::solve_generalized_eigen(pair.a.as_ref(), pair.b.as_ref())
    }
}

/// All eigenvalues of a companion pair, optionally via the Cayley transform.
pub fn companion_eigenvalues(pair: &CompanionPair, use_cayley: bool) -> Result<Vec<Eigenvalue>> {
    if use_cayley {
        let (ca, cb) = linalg::cayley_pencil(pair.a.as_ref(), pair.b.as_ref());
        Ok(linalg::generalized_eigenvalues(ca.as_ref(), cb.as_ref())?
            .into_iter()
            .map(linalg::cayley_z)
            .collect())
    } else {
        linalg::generalized_eigenvalues(pair.a.as_ref(), pair.b.as_ref())
    }
}

/// Eigenvalues with `1/R ≤ |z| ≤ R` are refined before the unit filter.
pub const REFINE_ANNULUS: f64 = 2.0;

/// Singular values of `P(z)` up to this multiple of its scale count as zero.
pub const NULL_REL_TOL: f64 = 1e-9;

/// Eigenvalues of the pair within `unit_tol` of the unit circle, plus the
/// infinite eigenvalues.
///
/// With `cfg.refine` each eigenvalue `z` in the [`REFINE_ANNULUS`] and
/// its mirror `1/z̄` are polished on the polynomial, coinciding roots are
/// merged, and every null vector of `P(z)` yields one candidate.
pub fn unit_eigenpairs(pair: &CompanionPair, cfg: &SweepConfig) -> Result<UnitSpectrum> {
    if !cfg.refine {
        return unit_eigenpairs_unrefined(pair, cfg);
    }
    let values = companion_eigenvalues(pair, cfg.use_cayley)?;
    let infinite_count = values.iter().filter(|v| v.is_infinite()).count();
    let mut roots: Vec<c64> = Vec::new();
    // the spectrum is closed under z → 1/z̄, so both images seed a search
    let seeds = values
        .into_iter()
        .filter_map(Eigenvalue::finite)
        .filter(|z| z.norm() >= 1.0 / REFINE_ANNULUS && z.norm() <= REFINE_ANNULUS)
        .flat_map(|z| [z, ONE / z.conj()]);
    for z in seeds {
        let Some(z) = linalg::refine_polynomial_eigenvalue(&pair.coeffs, z)? else {
            continue;
        };
        if (z.norm() - 1.0).abs() > cfg.unit_tol {
            continue;
        }
        if roots.iter().all(|q| (q - z).norm() > DEDUP_TOL) {
            roots.push(z);
        }
    }
    let mut unit = Vec::new();
    for z in roots {
        for u in linalg::polynomial_null_vectors(&pair.coeffs, z, NULL_REL_TOL)? {
            unit.push(UnitEigenpair { z, u });
        }
    }
    Ok(UnitSpectrum {
        unit,
        infinite_count,
        infinite: infinite_candidates(pair, infinite_count)?,
    })
}

fn infinite_candidates(
    pair: &CompanionPair,
    infinite_count: usize,
) -> Result<Vec<InfiniteCandidate>> {
    if infinite_count == 0 {
        return Ok(Vec::new());
    }
    Ok(
        linalg::null_space(pair.leading.as_ref(), linalg::INFINITE_REL_TOL)?
            .into_iter()
            .map(|mut v| {
                linalg::normalize_phase(&mut v);
                let u = hermitian_outer(&v);
                InfiniteCandidate { v, u }
            })
            .collect(),
    )
}

fn unit_eigenpairs_unrefined(pair: &CompanionPair, cfg: &SweepConfig) -> Result<UnitSpectrum> {
    let pairs = companion_eigenpairs(pair, cfg.use_cayley)?;
    let b_norm = linalg::frobenius_norm(pair.b.as_ref());
    let mut unit = Vec::new();
    let mut infinite_count = 0;
    for p in pairs {
        let bw = (&pair.b * &p.vector).norm_l2();
        match p.value {
            Eigenvalue::Finite(z) if bw > linalg::INFINITE_REL_TOL * b_norm && z.is_finite() => {
                if (z.norm() - 1.0).abs() <= cfg.unit_tol {
                    let mut u = pair.block(p.vector.as_ref(), 0);
                    let un = u.norm_l2();
                    if un > 0.0 {
                        for i in 0..u.nrows() {
                            u[i] /= un;
                        }
                    }
                    unit.push(UnitEigenpair { z, u });
                }
            }
            _ => infinite_count += 1,
        }
    }
    Ok(UnitSpectrum {
        unit,
        infinite_count,
        infinite: infinite_candidates(pair, infinite_count)?,
    })
}

/// `ω = −i v*(A_m z + Σ_{k<m} Aₖe^{−iφₖ})v`, rejected unless numerically real.
pub fn omega_from_point(
    sys: &DdeSystem,
    phi: &[f64],
    z: c64,
    v: &Col<c64>,
    omega_tol: f64,
) -> Result<f64> {
    let m = sys.m();
    if phi.len() + 1 != m {
        return Err(Error::input(format!(
            "expected {} phases, got {}",
            m - 1,
            phi.len()
        )));
    }
    if v.nrows() != sys.n() {
        return Err(Error::input(format!(
            "vector has length {}, expected {}",
            v.nrows(),
            sys.n()
        )));
    }
    let mut acc = z * quad_form(sys.matrix(m), v);
    for (k, w) in phase_weights(phi).into_iter().enumerate() {
        acc += w * quad_form(sys.matrix(k), v);
    }
    real_frequency(c64::new(0.0, -1.0) * acc, omega_tol)
}

pub(crate) fn real_frequency(w: c64, omega_tol: f64) -> Result<f64> {
    if !w.is_finite() {
        return Err(Rejection::DegenerateVector.into());
    }
    if w.im.abs() > omega_tol * w.norm().max(1.0) {
        return Err(Rejection::OmegaNotReal { imag: w.im }.into());
    }
    Ok(w.re)
}

/// `(θ + 2pπ)/ω` for every `p ∈ [−p_max, p_max]` landing in `[0, h_max]`.
pub(crate) fn branch_candidates(theta: f64, omega: f64, p_max: u32, h_max: f64) -> Vec<(f64, i32)> {
    let p_max = p_max as i32;
    (-p_max..=p_max)
        .map(|p| ((theta + 2.0 * p as f64 * PI) / omega, p))
        .filter(|&(h, _)| (0.0..=h_max).contains(&h))
        .collect()
}

/// Cartesian product of per-coordinate candidates, lexicographic in the
/// branch indices.
pub(crate) fn branch_product(per_coord: &[Vec<(f64, i32)>]) -> Vec<(Vec<f64>, Vec<i32>)> {
    let mut out = vec![(Vec::new(), Vec::new())];
    for cands in per_coord {
        let mut next = Vec::with_capacity(out.len() * cands.len());
        for (hs, ps) in &out {
            for &(h, p) in cands {
                let mut hs = hs.clone();
                let mut ps = ps.clone();
                hs.push(h);
                ps.push(p);
                next.push((hs, ps));
            }
        }
        out = next;
    }
    out
}

/// All delay vectors `hₖ = (φₖ + 2pₖπ)/ω`, `h_m = (−Arg z + 2p_mπ)/ω` with
/// every component in `[0, h_max]`, tagged with their branch indices.
pub fn delay_branches(
    phi: &[f64],
    z: c64,
    omega: f64,
    cfg: &SweepConfig,
) -> Result<Vec<(Vec<f64>, Vec<i32>)>> {
    if !(omega.abs() >= cfg.omega_tol) {
        return Err(Rejection::ZeroFrequency { omega }.into());
    }
    let per_coord: Vec<_> = phi
        .iter()
        .copied()
        .chain(std::iter::once(-z.arg()))
        .map(|theta| branch_candidates(theta, omega, cfg.p_max, cfg.h_max))
        .collect();
    Ok(branch_product(&per_coord))
}

/// One accepted critical delay vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub phi: Vec<f64>,
    pub z: c64,
    pub omega: f64,
    pub v: Col<c64>,
    /// `σ_min(M(iω))` at `delays`.
    pub residual: f64,
    /// σ₂/σ₁ of the reshaped eigenvector.
    pub gap: f64,
    pub delays: Vec<f64>,
    pub branches: Vec<i32>,
}

/// Rejection counts keyed by [`Rejection::key`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RejectionCounts(BTreeMap<String, usize>);

impl RejectionCounts {
    pub fn add(&mut self, r: &Rejection) {
        *self.0.entry(r.key().to_string()).or_default() += 1;
    }

    pub fn merge(&mut self, other: &RejectionCounts) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_default() += v;
        }
    }

    pub fn get(&self, key: &str) -> usize {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    pub fn as_map(&self) -> &BTreeMap<String, usize> {
        &self.0
    }
}

/// Runs `f`, counting a rejection instead of failing.
pub(crate) fn tally<T>(counts: &mut RejectionCounts, r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(x) => Ok(Some(x)),
        Err(Error::Rejected(rej)) => {
            counts.add(&rej);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Result of processing one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScan {
    pub points: Vec<CriticalPoint>,
    pub rejected: RejectionCounts,
    pub unit_eigenvalues: usize,
    pub infinite_eigenvalues: usize,
}

/// All critical points with the given free phases.
pub fn critical_points_at(sys: &DdeSystem, phi: &[f64], cfg: &SweepConfig) -> Result<PointScan> {
    cfg.validate()?;
    scan_point(sys, phi, cfg, cfg.residual_tol_for(sys))
}

fn scan_point(
    sys: &DdeSystem,
    phi: &[f64],
    cfg: &SweepConfig,
    residual_tol: f64,
) -> Result<PointScan> {
    let pencil = build_quadratic_pencil(sys, phi)?;
    let phi = pencil.phi.clone();
    let pair = companion_linearize_quadratic(&pencil);
    let spectrum = unit_eigenpairs(&pair, cfg)?;
    let mut rejected = RejectionCounts::default();
    let mut points = Vec::new();
    for cand in &spectrum.unit {
        let Some(f) = tally(
            &mut rejected,
            linalg::rank_one_factor(cand.u.as_ref(), cfg.rank_tol),
        )?
        else {
            continue;
        };
        let Some(omega) = tally(
            &mut rejected,
            omega_from_point(sys, &phi, cand.z, &f.v, cfg.omega_tol),
        )?
        else {
            continue;
        };
        let Some(branches) = tally(&mut rejected, delay_branches(&phi, cand.z, omega, cfg))? else {
            continue;
        };
        for (delays, branches) in branches {
            let residual = model::residual_at(sys, omega, &delays)?;
            if !(residual <= residual_tol) {
                rejected.add(&Rejection::Residual { residual });
                continue;
            }
            points.push(CriticalPoint {
                phi: phi.clone(),
                z: cand.z,
                omega,
                v: f.v.clone(),
                residual,
                gap: f.gap,
                delays,
                branches,
            });
        }
    }
    Ok(PointScan {
        points,
        rejected,
        unit_eigenvalues: spectrum.unit.len(),
        infinite_eigenvalues: spectrum.infinite_count,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn near_duplicates(a: &CriticalPoint, b: &CriticalPoint) -> bool {
    let mut d2 = (a.omega - b.omega).powi(2);
    let mut n2 = a.omega.powi(2);
    for (x, y) in a.delays.iter().zip(&b.delays) {
        d2 += (x - y).powi(2);
        n2 += x * x;
    }
    d2.sqrt() <= DEDUP_TOL * n2.sqrt().max(1.0)
}

/// Sorts by `(φ, branches, Arg z)` and merges points of equal `φ` that are
/// within [`DEDUP_TOL`] relative distance in `(h̄, ω)`.
pub fn sort_and_dedup(points: &mut Vec<CriticalPoint>) {
    points.sort_by(|a, b| {
        lex_cmp(&a.phi, &b.phi)
            .then_with(|| a.branches.cmp(&b.branches))
            .then_with(|| a.z.arg().total_cmp(&b.z.arg()))
    });
    let mut kept: Vec<CriticalPoint> = Vec::with_capacity(points.len());
    let mut group_start = 0;
    for p in points.drain(..) {
        if kept.last().is_some_and(|last| last.phi != p.phi) {
            group_start = kept.len();
        }
        if kept[group_start..].iter().any(|q| near_duplicates(q, &p)) {
            continue;
        }
        kept.push(p);
    }
    *points = kept;
}

/// A family of critical delays that does not depend on `h_m`: `A_m v = 0`
/// and the phase condition holds, so `M(iω)v = 0` for every `h_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteMode {
    pub phi: Vec<f64>,
    pub omega: f64,
    pub v: Col<c64>,
    /// `vec(vv*)`.
    pub u: Col<c64>,
    /// `‖Σ_{k<m} (AₖX e^{−iφₖ} + XAₖᵀ e^{iφₖ})‖_F` with `X = vv*`.
    pub condition_residual: f64,
    /// Admissible `(h₁, …, h_{m−1})` with branch indices.
    pub delays: Vec<(Vec<f64>, Vec<i32>)>,
}

/// The phase condition for an infinite-eigenvalue vector `v`.
pub fn infinite_condition_residual(sys: &DdeSystem, phi: &[f64], v: &Col<c64>) -> f64 {
    let n = sys.n();
    let x = v * v.adjoint();
    let mut c = Mat::<c64>::zeros(n, n);
    for (k, w) in phase_weights(phi).into_iter().enumerate() {
        let ak = linalg::to_complex(sys.matrix(k));
        let left = &ak * &x;
        let right = &x * ak.transpose();
        let wc = w.conj();
        for j in 0..n {
            for i in 0..n {
                c[(i, j)] += w * left[(i, j)] + wc * right[(i, j)];
            }
        }
    }
    c.norm_l2()
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Phases where an infinite-eigenvalue vector yields an `h_m`-independent
/// critical family. The phase condition is scanned on the sweep grid, its
/// local minima are refined by golden-section search, and a mode is kept
/// when the refined residual is within tolerance and `ω` is real and
/// nonzero.
pub fn infinite_modes(sys: &DdeSystem, cfg: &SweepConfig) -> Result<Vec<InfiniteMode>> {
    cfg.validate()?;
    find_infinite_modes(sys, cfg, cfg.residual_tol_for(sys))
}

fn find_infinite_modes(
    sys: &DdeSystem,
    cfg: &SweepConfig,
    residual_tol: f64,
) -> Result<Vec<InfiniteMode>> {
    let m = sys.m();
    let dims = m - 1;
    let lead = linalg::to_complex(sys.matrix(m));
    let basis = linalg::null_space(lead.as_ref(), linalg::INFINITE_REL_TOL)?;
    if basis.is_empty() || dims == 0 {
        return Ok(Vec::new());
    }
    let axis = phi_grid(cfg.delta);
    let na = axis.len();
    let slope: f64 = (1..m)
        .map(|k| 2.0 * linalg::spectral_norm(linalg::to_complex(sys.matrix(k)).as_ref()))
        .sum();
    let threshold = residual_tol + cfg.delta * slope * dims as f64;
    let grid = grid_points(dims, cfg.delta);
    let mut modes = Vec::new();
    for mut v in basis {
        linalg::normalize_phase(&mut v);
        let r: Vec<f64> = grid
            .par_iter()
            .map(|phi| infinite_condition_residual(sys, phi, &v))
            .collect();
        let mut found: Vec<InfiniteMode> = Vec::new();
        for (idx, phi) in grid.iter().enumerate() {
            if !(r[idx] <= threshold) {
                continue;
            }
            // local minimum among axis neighbours, with wraparound
            let mut stride = 1;
            let mut is_min = true;
            for _ in 0..dims {
                let coord = (idx / stride) % na;
                for step in [1, na - 1] {
                    let nb = idx - coord * stride + ((coord + step) % na) * stride;
                    if r[nb] < r[idx] {
                        is_min = false;
                    }
                }
                stride *= na;
            }
            if !is_min {
                continue;
            }
            let mut x = phi.clone();
            let mut fx = r[idx];
            for _round in 0..if dims == 1 { 1 } else { 4 } {
                for d in 0..dims {
                    let (best, fb) = golden_min(
                        |t| {
                            let mut y = x.clone();
                            y[d] = t;
                            infinite_condition_residual(sys, &y, &v)
                        },
                        x[d] - cfg.delta,
                        x[d] + cfg.delta,
                    );
                    if fb <= fx {
                        x[d] = best;
                        fx = fb;
                    }
                }
            }
            if !(fx <= residual_tol) {
                continue;
            }
            let x: Vec<f64> = x.into_iter().map(wrap_angle).collect();
            let mut acc = ZERO;
            for (k, w) in phase_weights(&x).into_iter().enumerate() {
                acc += w * quad_form(sys.matrix(k), &v);
            }
            let Ok(omega) = real_frequency(c64::new(0.0, -1.0) * acc, cfg.omega_tol) else {
                continue;
            };
            if omega.abs() < cfg.omega_tol {
                continue;
            }
            let dup = found.iter_mut().find(|mo| {
                mo.phi
                    .iter()
                    .zip(&x)
                    .all(|(a, b)| angle_distance(*a, *b) <= 1e-9)
            });
            if let Some(prev) = dup {
                if fx < prev.condition_residual {
                    prev.phi = x;
                    prev.condition_residual = fx;
                    prev.omega = omega;
                }
                continue;
            }
            found.push(InfiniteMode {
                phi: x,
                omega,
                v: v.clone(),
                u: hermitian_outer(&v),
                condition_residual: fx,
                delays: Vec::new(),
            });
        }
        for mo in &mut found {
            let per: Vec<_> = mo
                .phi
                .iter()
                .map(|&theta| branch_candidates(theta, mo.omega, cfg.p_max, cfg.h_max))
                .collect();
            mo.delays = branch_product(&per);
        }
        found.sort_by(|a, b| lex_cmp(&a.phi, &b.phi));
        modes.extend(found);
    }
    Ok(modes)
}

/// Counters collected during a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepStats {
    pub grid_points: usize,
    pub unit_eigenvalues: usize,
    pub infinite_eigenvalues: usize,
    pub rejected: RejectionCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub points: Vec<CriticalPoint>,
    pub infinite_modes: Vec<InfiniteMode>,
    pub stats: SweepStats,
    /// Some delayed matrix `A_k` (1-based) that is nonsingular while `A_m`
    /// is singular. Moving it to the last position removes the infinite
    /// eigenvalues.
    pub reorder_hint: Option<usize>,
    /// The residual bound that was applied.
    pub residual_tol: f64,
}

/// Index of the first nonsingular delayed matrix, if `A_m` is singular.
pub fn reorder_hint(sys: &DdeSystem) -> Result<Option<usize>> {
    let nonsingular = |k: usize| -> Result<bool> {
        let s = linalg::singular_values(linalg::to_complex(sys.matrix(k)).as_ref())?;
        let max = s.iter().copied().fold(0.0, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(max > 0.0 && min > linalg::INFINITE_REL_TOL * max)
    };
    let m = sys.m();
    if nonsingular(m)? {
        return Ok(None);
    }
    for k in 1..m {
        if nonsingular(k)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Scans `(φ₁, …, φ_{m−1})` over `[−π, π)^{m−1}` and collects every accepted
/// critical point. Grid points are processed in parallel on the current
/// rayon pool; the output order does not depend on the pool size.
pub fn sweep(sys: &DdeSystem, cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    if sys.m() < 2 {
        return Err(Error::input(
            "the free-delay sweep needs at least two delays; use the commensurate or scalar solver for one delay",
        ));
    }
    let residual_tol = cfg.residual_tol_for(sys);
    let grid = grid_points(sys.m() - 1, cfg.delta);
    let scans: Vec<Result<PointScan>> = grid
        .par_iter()
        .map(|phi| scan_point(sys, phi, cfg, residual_tol))
        .collect();
    let mut stats = SweepStats {
        grid_points: grid.len(),
        ..Default::default()
    };
    let mut points = Vec::new();
    for scan in scans {
        let scan = scan?;
        stats.unit_eigenvalues += scan.unit_eigenvalues;
        stats.infinite_eigenvalues += scan.infinite_eigenvalues;
        stats.rejected.merge(&scan.rejected);
        points.extend(scan.points);
    }
    sort_and_dedup(&mut points);
    let infinite_modes = if stats.infinite_eigenvalues > 0 {
        find_infinite_modes(sys, cfg, residual_tol)?
    } else {
        Vec::new()
    };
    Ok(SweepOutcome {
        points,
        infinite_modes,
        stats,
        reorder_hint: reorder_hint(sys)?,
        residual_tol,
    })
}
