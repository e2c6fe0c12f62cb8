//! Dense linear-algebra building blocks: Kronecker products and
//! vectorization, Hermitian rank-one factor extraction, the Cayley transform
//! of a pencil, and the generalized eigensolver.
//!
//! Every factorization runs with sequential parallelism so results do not
//! depend on the thread pool they are called from.

use std::ops::Mul;

use dyn_stack::{MemBuffer, MemStack};
use faer::diag::Diag;
use faer::linalg::evd::ComputeEigenvectors;
use faer::linalg::solvers::Solve;
use faer::linalg::svd::ComputeSvdVectors;
use faer::prelude::default;
use faer::{c64, Col, ColRef, Mat, MatRef, Par};

use crate::error::{Error, Rejection, Result};

/// Relative threshold on `‖Bv‖ / ‖B‖` below which an eigenpair is infinite.
pub const INFINITE_REL_TOL: f64 = 1e-10;

/// Default acceptance bound on σ₂/σ₁ for rank-one extraction.
pub const DEFAULT_RANK_TOL: f64 = 1e-4;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };
const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn to_complex(a: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// Kronecker product; block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron<T>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T>
where
    T: Copy + Mul<Output = T>,
{
    let (p, q) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| {
        a[(i / p, j / q)] * b[(i % p, j % q)]
    })
}

/// Column-stacking vectorization.
pub fn vec<T: Copy>(x: MatRef<'_, T>) -> Col<T> {
    let r = x.nrows();
    Col::from_fn(r * x.ncols(), |k| x[(k % r, k / r)])
}

/// Inverse of [`vec`] for square matrices.
pub fn unvec<T: Copy>(u: ColRef<'_, T>) -> Result<Mat<T>> {
    let n = square_side(u.nrows())?;
    Ok(Mat::from_fn(n, n, |i, j| u[i + n * j]))
}

fn square_side(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len || n == 0 {
        return Err(Error::input(format!(
            "vector length {len} is not a positive perfect square"
        )));
    }
    Ok(n)
}

pub fn frobenius_norm(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

pub fn col_norm(v: ColRef<'_, c64>) -> f64 {
    v.norm_l2()
}

/// Largest singular value. NaN if the SVD does not converge.
pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    match singular_values(a) {
        Ok(s) => s.into_iter().fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

fn svd_error(e: faer::linalg::svd::SvdError) -> Error {
    Error::Solver(format!("singular value decomposition: {e:?}"))
}

/// All `min(rows, cols)` singular values, in no particular order.
pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut s = Diag::<c64>::zeros(k);
    let mut mem = MemBuffer::new(faer::linalg::svd::svd_scratch::<c64>(
        m,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        Par::Seq,
        default(),
    ));
    faer::linalg::svd::svd(
        a,
        s.as_mut(),
        None,
        None,
        Par::Seq,
        MemStack::new(&mut mem),
        default(),
    )
    .map_err(svd_error)?;
    Ok((0..k).map(|i| s[i].re).collect())
}

/// Singular values and the full right singular basis of a square matrix.
fn svd_right(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = a.ncols();
    let mut s = Diag::<c64>::zeros(n);
    let mut v = Mat::<c64>::zeros(n, n);
    let mut mem = MemBuffer::new(faer::linalg::svd::svd_scratch::<c64>(
        n,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::Full,
        Par::Seq,
        default(),
    ));
    faer::linalg::svd::svd(
        a,
        s.as_mut(),
        None,
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        default(),
    )
    .map_err(svd_error)?;
    Ok(((0..n).map(|i| s[i].re).collect(), v))
}

/// Orthonormal basis of the numerical null space of a square matrix: right
/// singular vectors whose singular value is at most `rel_tol · σ_max`.
pub fn null_space(a: MatRef<'_, c64>, rel_tol: f64) -> Result<Vec<Col<c64>>> {
    let n = a.ncols();
    assert_eq!(a.nrows(), n, "null_space expects a square matrix");
    if n == 0 {
        return Ok(Vec::new());
    }
    let (s, v) = svd_right(a)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| s[i] <= rel_tol * smax || smax == 0.0)
        .collect();
    idx.sort_by(|&i, &j| s[i].total_cmp(&s[j]).then(i.cmp(&j)));
    Ok(idx.into_iter().map(|i| v.col(i).to_owned()).collect())
}

/// Right singular vector of the smallest singular value.
fn min_right_singular_vector(a: MatRef<'_, c64>) -> Result<Col<c64>> {
    let (s, v) = svd_right(a)?;
    let mut best = 0;
    for i in 1..s.len() {
        if s[i] < s[best] {
            best = i;
        }
    }
    Ok(v.col(best).to_owned())
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues and unit
/// eigenvectors (columns).
fn hermitian_eigen(h: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = h.nrows();
    let mut s = Diag::<c64>::zeros(n);
    let mut u = Mat::<c64>::zeros(n, n);
    let mut mem = MemBuffer::new(faer::linalg::evd::self_adjoint_evd_scratch::<c64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        default(),
    ));
    faer::linalg::evd::self_adjoint_evd(
        h,
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        default(),
    )
    .map_err(|e| Error::Solver(format!("hermitian eigensolver: {e:?}")))?;
    Ok(((0..n).map(|i| s[i].re).collect(), u))
}

/// Rotates `v` so its largest-magnitude entry is real and nonnegative.
pub fn normalize_phase(v: &mut Col<c64>) {
    let mut best = 0usize;
    for i in 1..v.nrows() {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        for i in 0..v.nrows() {
            v[i] *= rot;
        }
        v[best] = c64::new(v[best].re, 0.0);
    }
}

/// Dominant Hermitian rank-one factor of a reshaped eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFactor {
    /// Unit vector with `vec(vv*)` ∝ the input.
    pub v: Col<c64>,
    /// σ₂/σ₁ of the symmetrized reshaped matrix, in `[0, 1]`.
    pub gap: f64,
}

/// Recovers `v` from `u ≈ c·vec(vv*)`.
///
/// The reshaped matrix `X` is first rotated so that it is Hermitian up to
/// noise (the phase is read off its largest entry, which for a rank-one
/// Hermitian matrix sits on the diagonal), then symmetrized as
/// `(X + X*)/2`. The dominant eigenvector is returned with a deterministic
/// phase, and the candidate is rejected when `gap > tol`.
pub fn rank_one_factor(u: ColRef<'_, c64>, tol: f64) -> Result<RankOneFactor> {
    let x = unvec(u)?;
    let n = x.nrows();
    if !(0..n).all(|j| (0..n).all(|i| x[(i, j)].is_finite())) {
        return Err(Rejection::DegenerateVector.into());
    }
    let (mut bi, mut bj, mut bmag) = (0, 0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let mag = x[(i, j)].norm();
            if mag > bmag {
                (bi, bj, bmag) = (i, j, mag);
            }
        }
    }
    if bmag == 0.0 {
        return Err(Rejection::DegenerateVector.into());
    }
    // For X = c·H with H Hermitian, X_ij·X_ji = c²|H_ij|².
    let c2 = x[(bi, bj)] * x[(bj, bi)];
    let rot = if c2.norm() > 0.0 {
        c64::from_polar(1.0, -0.5 * c2.arg())
    } else {
        c64::from_polar(1.0, -x[(bi, bj)].arg())
    };
    let h = Mat::from_fn(n, n, |i, j| {
        0.5 * (x[(i, j)] * rot + (x[(j, i)] * rot).conj())
    });
    let (vals, vecs) = hermitian_eigen(h.as_ref())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()));
    let lead = vals[order[0]].abs();
    if lead == 0.0 {
        return Err(Rejection::DegenerateVector.into());
    }
    let gap = if n > 1 {
        (vals[order[1]].abs() / lead).min(1.0)
    } else {
        0.0
    };
    if gap > tol {
        return Err(Rejection::NotRankOne { gap }.into());
    }
    let mut v = vecs.col(order[0]).to_owned();
    let norm = v.norm_l2();
    for i in 0..n {
        v[i] /= norm;
    }
    normalize_phase(&mut v);
    Ok(RankOneFactor { v, gap })
}

/// A generalized eigenvalue, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eigenvalue {
    Finite(c64),
    Infinite,
}

impl Eigenvalue {
    pub fn finite(self) -> Option<c64> {
        match self {
            Eigenvalue::Finite(z) => Some(z),
            Eigenvalue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Eigenvalue::Infinite)
    }
}

/// An eigenpair of `Av = λBv` with unit-norm `vector`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Eigenvalue,
    pub vector: Col<c64>,
}

/// First-order pencil `(A, B)` whose eigenvector is a stack of `blocks`
/// copies `(u; zu; …)` of a vector of length `block_size`.
///
/// `leading` is the `n × n` matrix `L` such that the trailing diagonal block
/// of `B` is `±(I⊗L)`; infinite eigenvalues occur exactly when `L` is
/// singular. `coeffs` holds the linearized polynomial `P(z) = Σ zᵏ Cₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionPair {
    pub a: Mat<c64>,
    pub b: Mat<c64>,
    pub block_size: usize,
    pub blocks: usize,
    pub leading: Mat<c64>,
    pub coeffs: Vec<Mat<c64>>,
}

impl CompanionPair {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Block `k` of a stacked eigenvector.
    pub fn block(&self, w: ColRef<'_, c64>, k: usize) -> Col<c64> {
        let s = self.block_size;
        Col::from_fn(s, |i| w[k * s + i])
    }

    /// The block with the largest norm, normalized. For `w = (u; zu; …)` this
    /// is `u` up to scaling, and it stays well defined for infinite
    /// eigenvalues, where only the trailing block is nonzero.
    pub fn dominant_block(&self, w: ColRef<'_, c64>) -> Col<c64> {
        let mut best = self.block(w, 0);
        let mut best_norm = best.norm_l2();
        for k in 1..self.blocks {
            let b = self.block(w, k);
            let nb = b.norm_l2();
            if nb > best_norm {
                best = b;
                best_norm = nb;
            }
        }
        if best_norm > 0.0 {
            for i in 0..best.nrows() {
                best[i] /= best_norm;
            }
        }
        best
    }
}

/// All eigenpairs of `Av = λBv`, through the same shift-and-invert as
/// [`generalized_eigenvalues`]. Eigenvectors of `(A − τB)⁻¹B` are those of
/// the pencil. Singular pencils, where no shift works, go to plain QZ, whose
/// eigenvalues are then only indicative.
///
/// A pair is flagged infinite when `|λ| > 1/INFINITE_REL_TOL` or
/// `‖Bv‖ ≤ 1e−10·‖B‖_F`. Eigenvectors of a defective infinite eigenvalue can
/// come back poorly resolved; those are replaced with vectors from the
/// numerical null space of `B`, which are eigenvectors by definition.
pub fn solve_generalized_eigen(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    let (lambdas, vecs) = match shift_for(a, b)? {
        Some((tau, shifted)) => {
            let evd = shifted
                .partial_piv_lu()
                .solve(b)
                .eigen()
                .map_err(|e| Error::Solver(format!("Schur iteration: {e:?}")))?;
            let mu = evd.S();
            let lambdas: Vec<c64> = (0..n)
                .map(|k| {
                    if mu[k] == ZERO {
                        c64::new(f64::INFINITY, 0.0)
                    } else {
                        tau + ONE / mu[k]
                    }
                })
                .collect();
            (lambdas, evd.U().to_owned())
        }
        None => {
            let (ab, vecs) = qz(a, b)?;
            (ab.into_iter().map(|(al, be)| al / be).collect(), vecs)
        }
    };
    let b_norm = frobenius_norm(b);
    let mut null_b: Option<Vec<Col<c64>>> = None;
    let mut next_null = 0usize;
    let mut pairs = Vec::with_capacity(n);
    for (k, &ratio) in lambdas.iter().enumerate() {
        let mut v = vecs.col(k).to_owned();
        let vn = v.norm_l2();
        let usable = vn.is_finite() && vn > 0.0;
        if usable {
            for i in 0..n {
                v[i] /= vn;
            }
        }
        let bv = if usable { (b * &v).norm_l2() } else { f64::NAN };
        let infinite = !ratio.is_finite()
            || ratio.norm() > 1.0 / INFINITE_REL_TOL
            || (usable && bv <= INFINITE_REL_TOL * b_norm);
        if infinite {
            if !(usable && bv <= INFINITE_REL_TOL * b_norm) {
                let basis = match &null_b {
                    Some(basis) => basis,
                    None => null_b.insert(null_space(b, INFINITE_REL_TOL)?),
                };
                if basis.is_empty() {
                    return Err(Error::Solver(format!(
                        "eigenvalue {k} reported infinite but B has no numerical null space"
                    )));
                }
                v = basis[next_null % basis.len()].clone();
                next_null += 1;
            }
            pairs.push(EigenPair {
                value: Eigenvalue::Infinite,
                vector: v,
            });
        } else {
            if !usable {
                // recover a missing eigenvector from the null vector of A − λB
                let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - ratio * b[(i, j)]);
                v = min_right_singular_vector(shifted.as_ref())?;
                if !v.norm_l2().is_finite() {
                    return Err(Error::Solver(format!("eigenvector {k} is not finite")));
                }
            }
            pairs.push(EigenPair {
                value: Eigenvalue::Finite(ratio),
                vector: v,
            });
        }
    }
    Ok(pairs)
}

/// Shifts tried, in order, for the shift-and-invert step of
/// [`generalized_eigenvalues`]. Away from the unit circle and from the real
/// and imaginary axes, where structured spectra tend to sit.
const SHIFTS: [c64; 3] = [
    c64 {
        re: -1.37,
        im: 0.61,
    },
    c64 {
        re: 0.83,
        im: -1.91,
    },
    c64 { re: 2.29, im: 1.13 },
];

/// Eigenvalues of `Av = λBv` without eigenvectors. `λ` is infinite when
/// `|λ| > 1/INFINITE_REL_TOL`.
///
/// The backend's QZ loses accuracy on pencils with a large singular part in
/// `B`, so the pencil is shifted and inverted into the standard problem
/// `(A − τB)⁻¹Bv = μv` with `λ = τ + 1/μ`, for a `τ` that keeps `A − τB`
/// well conditioned.
pub fn generalized_eigenvalues(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Vec<Eigenvalue>> {
    let lambdas: Vec<c64> = match shift_for(a, b)? {
        Some((tau, shifted)) => shifted
            .partial_piv_lu()
            .solve(b)
            .eigenvalues()
            .map_err(|e| Error::Solver(format!("Schur iteration: {e:?}")))?
            .into_iter()
            .map(|mu| tau + ONE / mu)
            .collect(),
        // the eigenvalue-only path of the backend is unreliable on strongly
        // singular pencils, so right vectors are computed and dropped
        None => qz(a, b)?.0.into_iter().map(|(al, be)| al / be).collect(),
    };
    Ok(lambdas
        .into_iter()
        .map(|l| {
            if !l.is_finite() || l.norm() > 1.0 / INFINITE_REL_TOL {
                Eigenvalue::Infinite
            } else {
                Eigenvalue::Finite(l)
            }
        })
        .collect())
}

/// Validates a pencil and picks a shift from [`SHIFTS`] with `A − τB` well
/// conditioned. `None` when every shift fails.
fn shift_for(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Option<(c64, Mat<c64>)>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::input(format!(
            "pencil must be two square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !(0..n).all(|j| (0..n).all(|i| a[(i, j)].is_finite() && b[(i, j)].is_finite())) {
        return Err(Error::input("pencil has non-finite entries"));
    }
    for tau in SHIFTS {
        let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - tau * b[(i, j)]);
        if pivot_ratio(shifted.clone()) > 1e-10 {
            return Ok(Some((tau, shifted)));
        }
    }
    Ok(None)
}

type QzOutput = (Vec<(c64, c64)>, Mat<c64>);

/// Raw `(α, β)` and right eigenvectors of a dense complex QZ of `(A, B)`.
fn qz(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<QzOutput> {
    let n = a.nrows();
    let mut aw = a.to_owned();
    let mut bw = b.to_owned();
    let mut alpha = Diag::<c64>::zeros(n);
    let mut beta = Diag::<c64>::zeros(n);
    let mut vecs = Mat::<c64>::zeros(n, n);
    let mut mem = MemBuffer::new(faer::linalg::gevd::gevd_scratch::<c64>(
        n,
        ComputeEigenvectors::No,
        ComputeEigenvectors::Yes,
        Par::Seq,
        default(),
    ));
    faer::linalg::gevd::gevd_cplx(
        aw.as_mut(),
        bw.as_mut(),
        alpha.as_mut(),
        beta.as_mut(),
        None,
        Some(vecs.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        default(),
    )
    .map_err(|e| Error::Solver(format!("QZ iteration: {e:?}")))?;
    Ok(((0..n).map(|k| (alpha[k], beta[k])).collect(), vecs))
}

/// `min |uᵢᵢ| / max |uᵢᵢ|` of a partially pivoted LU, a cheap singularity test.
fn pivot_ratio(mut m: Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(
        faer::linalg::lu::partial_pivoting::factor::lu_in_place_scratch::<usize, c64>(
            n,
            n,
            Par::Seq,
            default(),
        ),
    );
    faer::linalg::lu::partial_pivoting::factor::lu_in_place(
        m.as_mut(),
        &mut perm,
        &mut perm_inv,
        Par::Seq,
        MemStack::new(&mut mem),
        default(),
    );
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].norm()).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        0.0
    } else {
        d.iter().copied().fold(f64::INFINITY, f64::min) / max
    }
}

/// `P(z) = Σ zᵏ Cₖ` by Horner's rule.
pub fn poly_eval(coeffs: &[Mat<c64>], z: c64) -> Mat<c64> {
    poly_eval_with_derivative(coeffs, z).0
}

fn poly_eval_with_derivative(coeffs: &[Mat<c64>], z: c64) -> (Mat<c64>, Mat<c64>) {
    let (r, c) = coeffs[0].shape();
    let mut p = Mat::<c64>::zeros(r, c);
    let mut dp = Mat::<c64>::zeros(r, c);
    for ck in coeffs.iter().rev() {
        for j in 0..c {
            for i in 0..r {
                dp[(i, j)] = dp[(i, j)] * z + p[(i, j)];
                p[(i, j)] = p[(i, j)] * z + ck[(i, j)];
            }
        }
    }
    (p, dp)
}

/// `Σ |z|ᵏ ‖Cₖ‖_F`, the scale against which `P(z)` is judged singular.
pub fn poly_scale(coeffs: &[Mat<c64>], z: c64) -> f64 {
    let r = z.norm();
    coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, ck| acc * r + frobenius_norm(ck.as_ref()))
}

/// Polishes an approximate eigenvalue `z0` of `P(z) = Σ zᵏ Cₖ` by nonlinear
/// inverse iteration: with `c` the smallest right singular vector of
/// `P(z0)`, repeat `y = P(z)⁻¹P′(z)u`, `z ← z − (c*u)/(c*y)`, `u ← y/(c*y)`.
///
/// Eigenvalues of a linearization are only as accurate as its conditioning
/// allows, which can be far worse than that of the polynomial. The iteration
/// is local to one eigenvector, so high-order roots at zero or infinity do
/// not pull it away, and it converges quadratically to simple eigenvalues. Returns `None`
/// when it does not settle within the step budget.
pub fn refine_polynomial_eigenvalue(coeffs: &[Mat<c64>], z0: c64) -> Result<Option<c64>> {
    const MAX_STEPS: usize = 60;
    let n = coeffs[0].nrows();
    let c = min_right_singular_vector(poly_eval(coeffs, z0).as_ref())?;
    let mut u = Mat::from_fn(n, 1, |i, _| c[i]);
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(
        faer::linalg::lu::partial_pivoting::factor::lu_in_place_scratch::<usize, c64>(
            n,
            n,
            Par::Seq,
            default(),
        )
        .or(
            faer::linalg::lu::partial_pivoting::solve::solve_in_place_scratch::<usize, c64>(
                n,
                1,
                Par::Seq,
            ),
        ),
    );
    let dot =
        |c: &Mat<c64>, x: &Mat<c64>| (0..n).fold(ZERO, |acc, i| acc + c[(i, 0)].conj() * x[(i, 0)]);
    const STALL_TOL: f64 = 1e-10;
    let mut z = z0;
    let mut last = f64::INFINITY;
    for _ in 0..MAX_STEPS {
        if !z.is_finite() || z.norm() > 1.0 / INFINITE_REL_TOL {
            return Ok(None);
        }
        let (mut p, dp) = poly_eval_with_derivative(coeffs, z);
        let mut y = &dp * &u;
        let (_, row_perm) = faer::linalg::lu::partial_pivoting::factor::lu_in_place(
            p.as_mut(),
            &mut perm,
            &mut perm_inv,
            Par::Seq,
            MemStack::new(&mut mem),
            default(),
        );
        faer::linalg::lu::partial_pivoting::solve::solve_in_place(
            p.as_ref(),
            p.as_ref(),
            row_perm,
            y.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        // normalize against the current iterate, u*u = 1
        let cy = dot(&u, &y);
        if !cy.is_finite() {
            // P(z) is exactly singular
            return Ok(Some(z));
        }
        if cy == ZERO {
            return Ok(None);
        }
        let step = ONE / cy;
        z -= step;
        let ny = y.norm_l2();
        u = Mat::from_fn(n, 1, |i, _| y[(i, 0)] / ny);
        let rel = step.norm() / z.norm().max(1.0);
        // done at full accuracy, or once the steps stall at the rounding floor
        if rel <= 4.0 * f64::EPSILON || (rel <= STALL_TOL && rel >= 0.5 * last) {
            return Ok(Some(z));
        }
        last = rel;
    }
    Ok(None)
}

/// Unit right singular vectors of `P(z)` whose singular value is at most
/// `rel_tol · Σ|z|ᵏ‖Cₖ‖_F`, smallest first.
pub fn polynomial_null_vectors(coeffs: &[Mat<c64>], z: c64, rel_tol: f64) -> Result<Vec<Col<c64>>> {
    let p = poly_eval(coeffs, z);
    let (s, v) = svd_right(p.as_ref())?;
    let bound = rel_tol * poly_scale(coeffs, z);
    let mut idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= bound).collect();
    idx.sort_by(|&i, &j| s[i].total_cmp(&s[j]).then(i.cmp(&j)));
    Ok(idx.into_iter().map(|i| v.col(i).to_owned()).collect())
}

/// Cayley transform of a pencil: `(A − B, i(A + B))`. If `Av = zBv` with
/// `|z| = 1` then `(A − B)v = σ·i(A + B)v` with real `σ`, related through
/// `z = (1 + iσ)/(1 − iσ)`.
pub fn cayley_pencil(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> (Mat<c64>, Mat<c64>) {
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    let sum = Mat::from_fn(a.nrows(), a.ncols(), |i, j| I * (a[(i, j)] + b[(i, j)]));
    (diff, sum)
}

/// `σ = (z − 1)/(i(z + 1))`; `z = −1` maps to an infinite σ.
pub fn cayley_sigma(z: Eigenvalue) -> Eigenvalue {
    match z {
        Eigenvalue::Infinite => Eigenvalue::Finite(-I),
        Eigenvalue::Finite(z) => {
            let den = I * (z + ONE);
            if den == ZERO {
                Eigenvalue::Infinite
            } else {
                Eigenvalue::Finite((z - ONE) / den)
            }
        }
    }
}

/// `z = (1 + iσ)/(1 − iσ)`; an infinite σ maps to `z = −1`.
pub fn cayley_z(sigma: Eigenvalue) -> Eigenvalue {
    match sigma {
        Eigenvalue::Infinite => Eigenvalue::Finite(-ONE),
        Eigenvalue::Finite(s) => {
            let den = ONE - I * s;
            if den == ZERO {
                Eigenvalue::Infinite
            } else {
                Eigenvalue::Finite((ONE + I * s) / den)
            }
        }
    }
}
