// Perturbation harness for the rank-one recovery bound.
//
// A random matrix polynomial is adjusted so that `x = vec(vv*)` is an exact
// eigenvector for a unit `z`, `x` is perturbed by `y`, the factor `u` is
// recovered, and `|sin∠(u, v)|` is compared with
// `sqrt(‖y‖·(1 + Σ‖Cₖ‖) + ‖q‖)`, where `q = x + y − vec(uu*)`. In the
// quadratic case the `1 + ‖C₂‖` term is taken as `‖C₂ + I‖`.

#![allow(dead_code)]

use critdelay::commensurate::build_polynomial_pencil;
use critdelay::faer::{Col, Mat};
use critdelay::free_delay::build_quadratic_pencil;
use critdelay::{c64, linalg, DdeSystem};
use rand::Rng;

pub struct Trial {
    pub sin: f64,
    pub bound: f64,
    pub delta: f64,
}

pub fn random_system(rng: &mut impl Rng, n: usize, m: usize) -> DdeSystem {
    DdeSystem::new(
        (0..=m)
            .map(|_| Mat::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0)))
            .collect(),
    )
    .unwrap()
}

fn random_unit(rng: &mut impl Rng, len: usize) -> Col<c64> {
    let v = Col::from_fn(len, |_| {
        c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let nv = v.norm_l2();
    Col::from_fn(len, |i| v[i] / nv)
}

fn outer_vec(v: &Col<c64>) -> Col<c64> {
    linalg::vec((v * v.adjoint()).as_ref())
}

/// Replaces `C₀` by `C₀ − P(z)xx*` so that `P(z)x = 0` for unit `x`.
fn force_eigenpair(coeffs: &mut [Mat<c64>], z: c64, x: &Col<c64>) {
    let r = linalg::poly_eval(coeffs, z) * x;
    coeffs[0] = &coeffs[0] - &r * x.adjoint();
}

fn run(rng: &mut impl Rng, mut coeffs: Vec<Mat<c64>>, quadratic: bool) -> Trial {
    let d = coeffs[0].nrows();
    let n = (d as f64).sqrt().round() as usize;
    let z = c64::cis(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
    let v = random_unit(rng, n);
    let x = outer_vec(&v);
    force_eigenpair(&mut coeffs, z, &x);

    let delta = 10f64.powf(rng.gen_range(-12.0..-4.0));
    let dir = random_unit(rng, d);
    let y = Col::from_fn(d, |i| dir[i] * delta);
    let xt = &x + &y;
    let xt_unit = Col::from_fn(d, |i| xt[i] / xt.norm_l2());
    let u = linalg::rank_one_factor(xt_unit.as_ref(), 1.0).unwrap().v;
    let q = &xt - &outer_vec(&u);

    let cos2 = (u.adjoint() * &v).norm().powi(2).min(1.0);
    let sin = (1.0 - cos2).sqrt();
    let top = coeffs.len() - 1;
    let norms: f64 = if quadratic {
        let mut shifted = coeffs[top].clone();
        for i in 0..d {
            shifted[(i, i)] += c64::new(1.0, 0.0);
        }
        linalg::spectral_norm(shifted.as_ref())
            + (0..top)
                .map(|k| linalg::spectral_norm(coeffs[k].as_ref()))
                .sum::<f64>()
    } else {
        1.0 + coeffs
            .iter()
            .map(|c| linalg::spectral_norm(c.as_ref()))
            .sum::<f64>()
    };
    let bound = (delta * norms + q.norm_l2()).sqrt();
    Trial { sin, bound, delta }
}

/// One trial on the quadratic pencil of a random system at a random phase.
pub fn quadratic_trial(rng: &mut impl Rng) -> Trial {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=3);
    let sys = random_system(rng, n, m);
    let phi: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let p = build_quadratic_pencil(&sys, &phi).unwrap();
    run(rng, vec![p.m0, p.m1, p.m2], true)
}

/// One trial on the polynomial pencil of a random system and direction.
pub fn polynomial_trial(rng: &mut impl Rng) -> Trial {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=3);
    let sys = random_system(rng, n, m);
    let direction: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=3)).collect();
    let p = build_polynomial_pencil(&sys, &direction).unwrap();
    run(rng, p.coeffs, false)
}
