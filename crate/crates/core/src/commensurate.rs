//! Critical delays along a ray `h̄ = h·(n₁, …, n_m)` with positive integers
//! `nₖ`.
//!
//! With `z = e^{−ihω}` the critical condition becomes the polynomial
//! eigenvalue problem `Σⱼ Bⱼzʲu = 0` of degree `N = 2n_m`, where
//! `Σₖ (I⊗Aₖ z^{n_m+nₖ} + Aₖ⊗I z^{n_m−nₖ})` is collected by powers of `z`
//! (`n₀ = 0`). Unit eigenvalues with Hermitian rank-one eigenvectors give
//! `iω = v*(Σₖ Aₖz^{nₖ})v` and `h = (−Arg z + 2pπ)/ω`.

use std::f64::consts::PI;

use faer::{c64, Col, Mat};

use crate::error::{Error, Rejection, Result};
use crate::free_delay::{self, tally, RejectionCounts, SweepConfig};
use crate::linalg::{self, CompanionPair};
use crate::model::{self, DdeSystem};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Coefficients `B₀..B_N` of the polynomial pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPencil {
    pub coeffs: Vec<Mat<c64>>,
    /// Direction after gcd reduction and reordering, largest entry last.
    pub direction: Vec<u64>,
    /// `permutation[k]` is the user's (1-based) delay index at internal
    /// position `k + 1`.
    pub permutation: Vec<usize>,
    /// The gcd divided out of the user's direction.
    pub scale: u64,
    /// The system with delayed matrices in internal order.
    system: DdeSystem,
}

impl PolynomialPencil {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// The reordered system the pencil was built from.
    pub fn system(&self) -> &DdeSystem {
        &self.system
    }

    /// `Σⱼ Bⱼzʲ`.
    pub fn eval(&self, z: c64) -> Mat<c64> {
        let d = self.coeffs[0].nrows();
        let mut acc = Mat::<c64>::zeros(d, d);
        let mut pow = ONE;
        for b in &self.coeffs {
            for j in 0..d {
                for i in 0..d {
                    acc[(i, j)] += pow * b[(i, j)];
                }
            }
            pow *= z;
        }
        acc
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Builds the polynomial pencil for the ray `h·direction`. The direction is
/// divided by its gcd, and the delays are relabeled so the largest entry is
/// last.
pub fn build_polynomial_pencil(sys: &DdeSystem, direction: &[i64]) -> Result<PolynomialPencil> {
    let m = sys.m();
    if direction.len() != m {
        return Err(Error::input(format!(
            "direction has {} entries, expected {m}",
            direction.len()
        )));
    }
    if let Some(d) = direction.iter().find(|&&d| d < 1) {
        return Err(Error::input(format!(
            "direction entries must be positive integers, got {d}"
        )));
    }
    let raw: Vec<u64> = direction.iter().map(|&d| d as u64).collect();
    let scale = raw.iter().fold(0, |g, &d| gcd(g, d));
    let reduced: Vec<u64> = raw.iter().map(|d| d / scale).collect();
    let max = *reduced.iter().max().expect("m >= 1");
    let last_max = reduced
        .iter()
        .rposition(|&d| d == max)
        .expect("max is present");
    let mut permutation: Vec<usize> = (1..=m).collect();
    permutation.swap(last_max, m - 1);
    let direction: Vec<u64> = permutation.iter().map(|&k| reduced[k - 1]).collect();
    let system = sys.permute_delays(&permutation)?;

    let n = sys.n();
    let d = n * n;
    let nm = direction[m - 1] as usize;
    let mut coeffs = vec![Mat::<c64>::zeros(d, d); 2 * nm + 1];
    let eye = Mat::<c64>::identity(n, n);
    for k in 0..=m {
        let nk = if k == 0 { 0 } else { direction[k - 1] as usize };
        let ak = linalg::to_complex(system.matrix(k));
        let left = linalg::kron(eye.as_ref(), ak.as_ref());
        let right = linalg::kron(ak.as_ref(), eye.as_ref());
        for j in 0..d {
            for i in 0..d {
                coeffs[nm + nk][(i, j)] += left[(i, j)];
                coeffs[nm - nk][(i, j)] += right[(i, j)];
            }
        }
    }
    Ok(PolynomialPencil {
        coeffs,
        direction,
        permutation,
        scale,
        system,
    })
}

/// Block companion pair: `B = diag(I, …, I, B_N)`, `A` has identity blocks on
/// the first superdiagonal and last block row `(−B₀, …, −B_{N−1})`, so
/// `Aw = zBw` with `w = (u; zu; …; z^{N−1}u)`.
pub fn companion_linearize_poly(p: &PolynomialPencil) -> CompanionPair {
    let big_n = p.degree();
    let d = p.coeffs[0].nrows();
    let size = big_n * d;
    let a = Mat::from_fn(size, size, |i, j| {
        let (bi, bj) = (i / d, j / d);
        if bi + 1 < big_n {
            if bj == bi + 1 && i % d == j % d {
                ONE
            } else {
                ZERO
            }
        } else {
            -p.coeffs[bj][(i % d, j % d)]
        }
    });
    let b = Mat::from_fn(size, size, |i, j| {
        let (bi, bj) = (i / d, j / d);
        if bi != bj {
            ZERO
        } else if bi + 1 < big_n {
            if i == j {
                ONE
            } else {
                ZERO
            }
        } else {
            p.coeffs[big_n][(i % d, j % d)]
        }
    });
    let n = p.system.n();
    let lead = &p.coeffs[big_n];
    let leading = Mat::from_fn(n, n, |i, j| lead[(i, j)]);
    CompanionPair {
        a,
        b,
        block_size: d,
        blocks: big_n,
        leading,
        coeffs: p.coeffs.clone(),
    }
}

/// One critical point on the ray.
#[derive(Debug, Clone, PartialEq)]
pub struct CommensuratePoint {
    /// Base delay in the user's direction scale.
    pub h: f64,
    pub z: c64,
    pub omega: f64,
    pub v: Col<c64>,
    /// `σ_min(M(iω))` at `delays`.
    pub residual: f64,
    pub gap: f64,
    pub p: i32,
    /// `h·direction`, in the user's delay order.
    pub delays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommensurateOutcome {
    pub points: Vec<CommensuratePoint>,
    pub unit_eigenvalues: usize,
    pub infinite_eigenvalues: usize,
    pub rejected: RejectionCounts,
    pub residual_tol: f64,
    pub pencil_degree: usize,
}

/// `ω = −i v*(Σₖ Aₖz^{nₖ})v` on the reordered system.
fn commensurate_omega(p: &PolynomialPencil, z: c64, v: &Col<c64>, omega_tol: f64) -> Result<f64> {
    let sys = &p.system;
    let n = sys.n();
    let mut acc = ZERO;
    for k in 0..=sys.m() {
        let w = if k == 0 {
            ONE
        } else {
            z.powu(p.direction[k - 1] as u32)
        };
        let a = sys.matrix(k);
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += v[j] * a[(i, j)];
            }
            acc += w * v[i].conj() * row;
        }
    }
    free_delay::real_frequency(c64::new(0.0, -1.0) * acc, omega_tol)
}

/// Critical delays `h·direction`, `0 < h ≤ h_max`, sorted by `(h, ω)`. Both
/// signs of `ω` are reported.
pub fn critical_delays_commensurate(
    sys: &DdeSystem,
    direction: &[i64],
    cfg: &SweepConfig,
) -> Result<CommensurateOutcome> {
    cfg.validate()?;
    let pencil = build_polynomial_pencil(sys, direction)?;
    let pair = companion_linearize_poly(&pencil);
    let spectrum = free_delay::unit_eigenpairs(&pair, cfg)?;
    let residual_tol = cfg.residual_tol_for(sys);
    let scale = pencil.scale as f64;
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
            commensurate_omega(&pencil, cand.z, &f.v, cfg.omega_tol),
        )?
        else {
            continue;
        };
        if !(omega.abs() >= cfg.omega_tol) {
            rejected.add(&Rejection::ZeroFrequency { omega });
            continue;
        }
        let p_max = cfg.p_max as i32;
        for p in -p_max..=p_max {
            // base delay of the reduced direction, then back to the user's scale
            let h = (-cand.z.arg() + 2.0 * p as f64 * PI) / omega / scale;
            if !(h > 0.0 && h <= cfg.h_max) {
                continue;
            }
            let delays: Vec<f64> = direction.iter().map(|&d| h * d as f64).collect();
            let residual = model::residual_at(sys, omega, &delays)?;
            if !(residual <= residual_tol) {
                rejected.add(&Rejection::Residual { residual });
                continue;
            }
            points.push(CommensuratePoint {
                h,
                z: cand.z,
                omega,
                v: f.v.clone(),
                residual,
                gap: f.gap,
                p,
                delays,
            });
        }
    }
    points.sort_by(|a, b| {
        a.h.total_cmp(&b.h)
            .then(a.omega.total_cmp(&b.omega))
            .then(a.p.cmp(&b.p))
    });
    let mut kept: Vec<CommensuratePoint> = Vec::with_capacity(points.len());
    for pt in points {
        let dup = kept
            .iter()
            .rev()
            .take_while(|q| pt.h - q.h <= free_delay::DEDUP_TOL * pt.h.max(1.0))
            .any(|q| {
                let d = ((pt.h - q.h).powi(2) + (pt.omega - q.omega).powi(2)).sqrt();
                d <= free_delay::DEDUP_TOL * (pt.h.powi(2) + pt.omega.powi(2)).sqrt().max(1.0)
            });
        if !dup {
            kept.push(pt);
        }
    }
    Ok(CommensurateOutcome {
        points: kept,
        unit_eigenvalues: spectrum.unit.len(),
        infinite_eigenvalues: spectrum.infinite_count,
        rejected,
        residual_tol,
        pencil_degree: pencil.degree(),
    })
}
