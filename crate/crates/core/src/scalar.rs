//! Closed-form critical delays for scalar systems `x' = a₀x + Σₖ aₖx(t − hₖ)`.
//!
//! With `c = Σ_{k<m} aₖcos φₖ` and `s = Σ_{k<m} aₖsin φₖ` (`φ₀ = 0`), the
//! unit root is `z = (−c + iσ√(a_m² − c²))/a_m` for `σ = ±1`, the frequency
//! is `ω = −s + σ√(a_m² − c²)` and
//! `h_m = (−σ·sign(a_m)·acos(−c/a_m) + 2p_mπ)/ω`.

use std::f64::consts::PI;

use faer::{c64, Col};

use crate::error::{Error, Rejection, Result};
use crate::free_delay::{self, CriticalPoint, SweepConfig};
use crate::model::{self, DdeSystem};

/// Coefficients `a₀..a_m` of a scalar delay equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSystem {
    a: Vec<f64>,
}

impl ScalarSystem {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::input(format!(
                "need at least a0 and a1, got {} coefficients",
                a.len()
            )));
        }
        if let Some(x) = a.iter().find(|x| !x.is_finite()) {
            return Err(Error::input(format!("coefficient {x} is not finite")));
        }
        Ok(Self { a })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.a
    }

    /// Number of delays.
    pub fn m(&self) -> usize {
        self.a.len() - 1
    }

    pub fn to_system(&self) -> DdeSystem {
        DdeSystem::scalar(&self.a).expect("coefficients validated on construction")
    }
}

/// Which of the two roots of the scalar quadratic is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// One closed-form crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCrossing {
    pub delays: Vec<f64>,
    pub omega: f64,
    /// `e^{−ih_mω}`.
    pub z: c64,
}

fn zero_frequency_floor(a: &[f64]) -> f64 {
    1e-12 * (1.0 + a.iter().map(|x| x.abs()).sum::<f64>())
}

/// Critical delays for fixed phases, root choice and branch indices.
pub fn scalar_critical_delays(
    sys: &ScalarSystem,
    phi: &[f64],
    sign: Sign,
    branches: &[i32],
) -> Result<ScalarCrossing> {
    let a = &sys.a;
    let m = sys.m();
    if phi.len() + 1 != m {
        return Err(Error::input(format!(
            "expected {} phases, got {}",
            m - 1,
            phi.len()
        )));
    }
    if branches.len() != m {
        return Err(Error::input(format!(
            "expected {m} branch indices, got {}",
            branches.len()
        )));
    }
    let am = a[m];
    if am == 0.0 {
        return Err(Error::input(
            "the last coefficient is zero; move a nonzero delayed coefficient last",
        ));
    }
    let (mut c, mut s) = (a[0], 0.0);
    for (k, &p) in phi.iter().enumerate() {
        c += a[k + 1] * p.cos();
        s += a[k + 1] * p.sin();
    }
    let rad = am * am - c * c;
    if rad < 0.0 {
        return Err(Rejection::NoCrossing.into());
    }
    let sg = sign.value();
    let root = rad.sqrt();
    let omega = -s + sg * root;
    if omega.abs() < zero_frequency_floor(a) {
        return Err(Rejection::ZeroFrequency { omega }.into());
    }
    let arg_z = sg * am.signum() * (-c / am).clamp(-1.0, 1.0).acos();
    let mut delays: Vec<f64> = phi
        .iter()
        .zip(branches)
        .map(|(&p, &b)| (p + 2.0 * b as f64 * PI) / omega)
        .collect();
    delays.push((-arg_z + 2.0 * branches[m - 1] as f64 * PI) / omega);
    let z = c64::new(-c, sg * root) / am;
    Ok(ScalarCrossing { delays, omega, z })
}

/// The two-delay parameterization `h̄(φ)`: `h₁ = (φ + 2pπ)/ω`,
/// `h₂ = (−Arg z + 2qπ)/ω` with the root `z` and `ω` taken directly from the
/// quadratic `a₂z² + 2z(a₀ + a₁cos φ) + a₂ = 0`.
pub fn two_delay_parametrization(
    a0: f64,
    a1: f64,
    a2: f64,
    phi: f64,
    sign: Sign,
    p: i32,
    q: i32,
) -> Result<(f64, f64, f64)> {
    if a2 == 0.0 {
        return Err(Error::input("a2 must be nonzero"));
    }
    let b = a0 + a1 * phi.cos();
    let disc = a2 * a2 - b * b;
    if disc < 0.0 {
        return Err(Rejection::NoCrossing.into());
    }
    let sg = sign.value();
    let z = c64::new(-b, sg * disc.sqrt()) / a2;
    let omega = -a1 * phi.sin() + sg * disc.sqrt();
    if omega.abs() < zero_frequency_floor(&[a0, a1, a2]) {
        return Err(Rejection::ZeroFrequency { omega }.into());
    }
    let theta = z.im.atan2(z.re);
    Ok((
        (phi + 2.0 * p as f64 * PI) / omega,
        (-theta + 2.0 * q as f64 * PI) / omega,
        omega,
    ))
}

/// The frequency-parameterized form for `a₀ = a₁ = −1`, `a₂ = −½`, written
/// as `1 + e^{−h₁s}/(1+s) + e^{−h₂s}/(2(1+s)) = 0`.
pub fn gu_example_parameterization(omega: f64, sign: Sign, p: i32, q: i32) -> Result<(f64, f64)> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::input(format!("omega must be positive, got {omega}")));
    }
    let r = (1.0 + omega * omega).sqrt();
    let c1 = 0.5 * r + 3.0 / (8.0 * r);
    let c2 = r - 3.0 / (4.0 * r);
    if !(-1.0..=1.0).contains(&c1) || !(-1.0..=1.0).contains(&c2) {
        return Err(Rejection::NoCrossing.into());
    }
    let (t1, t2) = (c1.acos(), c2.acos());
    let sg = sign.value();
    let base = -omega.atan();
    let h1 = (base + sg * t1 + (2 * p - 1) as f64 * PI) / omega;
    let h2 = (base - sg * t2 + (2 * q - 1) as f64 * PI) / omega;
    Ok((h1, h2))
}

/// Outcome of the single-delay formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingleDelay {
    /// Smallest positive critical delay and its frequency.
    Crossing { h: f64, omega: f64 },
    /// `a₁² ≤ a₀²`: the delay never moves a root across the imaginary axis.
    NoDelayInducedCrossing,
}

/// `h = (−sign(a₁)acos(−a₀/a₁) + 2pπ)/√(a₁² − a₀²)` at the smallest `p`
/// giving `h > 0`.
pub fn single_delay_scalar(a0: f64, a1: f64) -> SingleDelay {
    let rad = a1 * a1 - a0 * a0;
    if !(rad > 0.0) || !a0.is_finite() || !a1.is_finite() {
        return SingleDelay::NoDelayInducedCrossing;
    }
    let omega = rad.sqrt();
    let base = -a1.signum() * (-a0 / a1).clamp(-1.0, 1.0).acos();
    let theta = if base > 0.0 { base } else { base + 2.0 * PI };
    SingleDelay::Crossing {
        h: theta / omega,
        omega,
    }
}

/// Grid sweep over the closed form, producing the same records as
/// [`free_delay::sweep`] (with `v = 1`, `gap = 0`). Works for `m = 1` too,
/// where the grid is a single empty point.
pub fn scalar_sweep(sys: &ScalarSystem, cfg: &SweepConfig) -> Result<Vec<CriticalPoint>> {
    cfg.validate()?;
    let dde = sys.to_system();
    let residual_tol = cfg.residual_tol_for(&dde);
    let m = sys.m();
    let p_max = cfg.p_max as i32;
    let combos: Vec<Vec<i32>> = (0..m).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|b| {
                (-p_max..=p_max).map(move |p| {
                    let mut b = b.clone();
                    b.push(p);
                    b
                })
            })
            .collect()
    });
    let one = Col::from_fn(1, |_| c64::new(1.0, 0.0));
    let mut points = Vec::new();
    for phi in free_delay::grid_points(m - 1, cfg.delta) {
        for sign in [Sign::Plus, Sign::Minus] {
            for branches in &combos {
                let x = match scalar_critical_delays(sys, &phi, sign, branches) {
                    Ok(x) => x,
                    Err(Error::Rejected(_)) => break,
                    Err(e) => return Err(e),
                };
                if x.omega.abs() < cfg.omega_tol
                    || !x.delays.iter().all(|h| (0.0..=cfg.h_max).contains(h))
                {
                    continue;
                }
                let residual = model::residual_at(&dde, x.omega, &x.delays)?;
                if !(residual <= residual_tol) {
                    continue;
                }
                points.push(CriticalPoint {
                    phi: phi.clone(),
                    z: x.z,
                    omega: x.omega,
                    v: one.clone(),
                    residual,
                    gap: 0.0,
                    delays: x.delays,
                    branches: branches.clone(),
                });
            }
        }
    }
    free_delay::sort_and_dedup(&mut points);
    Ok(points)
}
