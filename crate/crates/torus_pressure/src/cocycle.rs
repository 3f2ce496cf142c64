//! Invariant splitting along orbit histories by iterating the derivative
//! cocycle, and the center observable `log‖Df|E^c‖`.
//!
//! Directions: the unstable line is pushed forward from the deepest state of a
//! history, the stable line is pulled back from the end of a forward orbit.
//! The center line is the intersection of the center-unstable plane (forward
//! iteration of plane normals by `Df^{-T}`) with the center-stable plane
//! (backward iteration of normals by `Df^T`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inverse_limit::{shift, OrbitHistory};
use crate::linalg::{self, canonical_sign, line_angle, Mat, Vec3};
use crate::systems::{SystemSpec, TorusPoint};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-4;
pub const DEFAULT_LOOKAHEAD: usize = 40;
/// Planes closer than this (sine of the angle between normals) do not meet cleanly.
pub const INTERSECTION_TOL: f64 = 1e-8;
const START_SEED: u64 = 0xc0c7_c1e5;
const CHECK_SEED: u64 = 0xc0c7_c1e6;

/// Fixed pseudo-random unit vector used to start power iterations.
pub fn generic_vector(dim: usize, seed: u64) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut v = [0.0; 3];
        for vi in v.iter_mut().take(dim) {
            *vi = 2.0 * rng.gen::<f64>() - 1.0;
        }
        if let Some((u, n)) = linalg::normalize(&v) {
            if n > 0.2 {
                return u;
            }
        }
    }
}

fn push_forward(system: &SystemSpec, h: &OrbitHistory, start: Vec3) -> Result<Vec3> {
    let mut v = start;
    for k in (1..=h.depth()).rev() {
        let w = system.jacobian(&h.back(k)).mul_vec(&v);
        v = linalg::normalize(&w).ok_or(Error::SingularJacobian)?.0;
    }
    Ok(v)
}

/// Unstable direction at `x_0` with its convergence residual (angle between
/// two pushes from independent generic starts).
pub fn unstable_direction_with_residual(system: &SystemSpec, h: &OrbitHistory) -> Result<(Vec3, f64)> {
    let d = system.dim();
    let a = push_forward(system, h, generic_vector(d, START_SEED))?;
    let b = push_forward(system, h, generic_vector(d, CHECK_SEED))?;
    Ok((canonical_sign(&a), line_angle(&a, &b)))
}

/// Unstable direction `E^u(x̃)` by forward power iteration along the history.
pub fn estimate_unstable_direction(system: &SystemSpec, h: &OrbitHistory) -> Result<Vec3> {
    let (v, residual) = unstable_direction_with_residual(system, h)?;
    if residual > DEFAULT_RESIDUAL_TOL {
        return Err(Error::DepthTooSmall { residual, tolerance: DEFAULT_RESIDUAL_TOL });
    }
    Ok(v)
}

fn pull_back(system: &SystemSpec, orbit: &[TorusPoint], start: Vec3) -> Result<(Vec3, f64)> {
    let mut v = start;
    let mut log_growth = 0.0;
    for x in orbit[..orbit.len() - 1].iter().rev() {
        let inv = system.jacobian(x).inverse().ok_or(Error::SingularJacobian)?;
        let (u, n) = linalg::normalize(&inv.mul_vec(&v)).ok_or(Error::SingularJacobian)?;
        v = u;
        log_growth += n.ln();
    }
    Ok((v, log_growth))
}

/// Stable direction with its residual; depends only on the forward orbit of `x`.
pub fn stable_direction_with_residual(system: &SystemSpec, x: &TorusPoint, lookahead: usize) -> Result<(Vec3, f64)> {
    let d = system.dim();
    let orbit = system.orbit(x, lookahead + 1);
    let (a, growth) = pull_back(system, &orbit, generic_vector(d, START_SEED))?;
    if lookahead == 0 || growth <= 0.0 {
        return Err(Error::NoStableDirection);
    }
    let (b, _) = pull_back(system, &orbit, generic_vector(d, CHECK_SEED))?;
    Ok((canonical_sign(&a), line_angle(&a, &b)))
}

/// Stable direction `E^s(x)` by backward iteration with inverse Jacobians.
pub fn estimate_stable_direction(system: &SystemSpec, x: &TorusPoint, lookahead: usize) -> Result<Vec3> {
    let (v, residual) = stable_direction_with_residual(system, x, lookahead)?;
    if residual > DEFAULT_RESIDUAL_TOL {
        return Err(Error::DepthTooSmall { residual, tolerance: DEFAULT_RESIDUAL_TOL });
    }
    Ok(v)
}

fn cu_normal(system: &SystemSpec, h: &OrbitHistory, start: Vec3) -> Result<Vec3> {
    let mut n = start;
    for k in (1..=h.depth()).rev() {
        let inv_t = system.jacobian(&h.back(k)).inverse().ok_or(Error::SingularJacobian)?.transpose();
        n = linalg::normalize(&inv_t.mul_vec(&n)).ok_or(Error::SingularJacobian)?.0;
    }
    Ok(n)
}

/// Center-stable plane normals along `orbit`, index-aligned with it.
fn cs_normals(system: &SystemSpec, orbit: &[TorusPoint], start: Vec3) -> Result<Vec<Vec3>> {
    let mut out = vec![[0.0; 3]; orbit.len()];
    let mut n = start;
    out[orbit.len() - 1] = n;
    for i in (0..orbit.len() - 1).rev() {
        let jt: Mat = system.jacobian(&orbit[i]).transpose();
        n = linalg::normalize(&jt.mul_vec(&n)).ok_or(Error::SingularJacobian)?.0;
        out[i] = n;
    }
    Ok(out)
}

fn intersect(n_cu: &Vec3, n_cs: &Vec3) -> Result<Vec3> {
    let c = linalg::cross(n_cu, n_cs);
    let (v, sine) = linalg::normalize(&c).ok_or(Error::IllConditionedIntersection(0.0))?;
    if sine < INTERSECTION_TOL {
        return Err(Error::IllConditionedIntersection(sine));
    }
    Ok(canonical_sign(&v))
}

/// Center direction at each of `x_0, …, x_{n-1}` along the forward orbit of `h`.
pub fn center_directions(system: &SystemSpec, h: &OrbitHistory, n: usize, lookahead: usize) -> Result<Vec<Vec3>> {
    if system.dim() != 3 {
        return Err(Error::NoCenterDirection);
    }
    let orbit = system.orbit(&h.head(), n + lookahead);
    let cs = cs_normals(system, &orbit, generic_vector(3, START_SEED))?;
    let mut ncu = cu_normal(system, h, generic_vector(3, START_SEED))?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(intersect(&ncu, &cs[k])?);
        if k + 1 < n {
            let inv_t = system.jacobian(&orbit[k]).inverse().ok_or(Error::SingularJacobian)?.transpose();
            ncu = linalg::normalize(&inv_t.mul_vec(&ncu)).ok_or(Error::SingularJacobian)?.0;
        }
    }
    Ok(out)
}

/// Center direction `E^c(x̃)`: the line where the center-unstable and
/// center-stable planes meet.
pub fn estimate_center_direction(system: &SystemSpec, h: &OrbitHistory, lookahead: usize) -> Result<Vec3> {
    Ok(center_directions(system, h, 1, lookahead)?[0])
}

/// `φ̃ᶜ(τ^k x̃) = log‖Df(x_k) e_c(τ^k x̃)‖` for `k = 0, …, n-1`.
pub fn center_profile(system: &SystemSpec, h: &OrbitHistory, n: usize, lookahead: usize) -> Result<Vec<f64>> {
    let dirs = center_directions(system, h, n, lookahead)?;
    let mut x = h.head();
    let mut out = Vec::with_capacity(n);
    for e in dirs {
        out.push(linalg::norm(&system.jacobian(&x).mul_vec(&e)).ln());
        x = system.apply(&x);
    }
    Ok(out)
}

/// The center observable `φ̃ᶜ(x̃)`.
pub fn phi_c(system: &SystemSpec, h: &OrbitHistory) -> Result<f64> {
    Ok(center_profile(system, h, 1, DEFAULT_LOOKAHEAD)?[0])
}

/// Birkhoff average `(1/n) Σ_{k<n} φ̃ᶜ(τ^k x̃)`.
pub fn central_exponent(system: &SystemSpec, h: &OrbitHistory, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let p = center_profile(system, h, n, DEFAULT_LOOKAHEAD)?;
    Ok(p.iter().sum::<f64>() / n as f64)
}

/// Unit directions of the splitting at a history, with convergence residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingFrame {
    pub e_u: Vec3,
    pub e_c: Option<Vec3>,
    pub e_s: Option<Vec3>,
    /// Residuals of `(e_u, e_c, e_s)`; zero for absent directions.
    pub residuals: [f64; 3],
}

/// Frame at `h`; the center is present on T^3, the stable line whenever the
/// map contracts some direction.
pub fn estimate_frame(system: &SystemSpec, h: &OrbitHistory, lookahead: usize) -> Result<SplittingFrame> {
    let (e_u, ru) = unstable_direction_with_residual(system, h)?;
    let (e_s, rs) = match stable_direction_with_residual(system, &h.head(), lookahead) {
        Ok((v, r)) => (Some(v), r),
        Err(Error::NoStableDirection) => (None, 0.0),
        Err(e) => return Err(e),
    };
    let (e_c, rc) = if system.dim() == 3 {
        let a = estimate_center_direction(system, h, lookahead)?;
        let orbit = system.orbit(&h.head(), lookahead + 1);
        let cs = cs_normals(system, &orbit, generic_vector(3, CHECK_SEED))?;
        let b = intersect(&cu_normal(system, h, generic_vector(3, CHECK_SEED))?, &cs[0])?;
        (Some(a), line_angle(&a, &b))
    } else {
        (None, 0.0)
    };
    Ok(SplittingFrame { e_u, e_c, e_s, residuals: [ru, rc, rs] })
}

/// Angles between `Df(x_0)·e` and `e` recomputed at `τx̃`, for `(e_u, e_c, e_s)`.
pub fn equivariance_residuals(system: &SystemSpec, h: &OrbitHistory, lookahead: usize) -> Result<[f64; 3]> {
    let here = estimate_frame(system, h, lookahead)?;
    let next = estimate_frame(system, &shift(system, h, 1)?, lookahead)?;
    let j = system.jacobian(&h.head());
    let ang = |a: Option<Vec3>, b: Option<Vec3>| match (a, b) {
        (Some(a), Some(b)) => line_angle(&j.mul_vec(&a), &b),
        _ => 0.0,
    };
    Ok([
        ang(Some(here.e_u), Some(next.e_u)),
        ang(here.e_c, next.e_c),
        ang(here.e_s, next.e_s),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse_limit::random_history;
    use crate::systems::bundled::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn eig(system: &SystemSpec, i: usize) -> Vec3 {
        system.linear_part().eigendata[i].vector
    }

    #[test]
    fn endomorphism_directions_match_eigenvectors() {
        let f = anosov_endomorphism();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_history(&f, 30, &mut rng).unwrap();
        let u = estimate_unstable_direction(&f, &h).unwrap();
        assert!(line_angle(&u, &eig(&f, 0)) < 1e-8);
        let s = estimate_stable_direction(&f, &h.head(), 40).unwrap();
        assert!(line_angle(&s, &eig(&f, 1)) < 1e-8);
    }

    #[test]
    fn center_example_frame() {
        let f = center_linear();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_history(&f, 6, &mut rng).unwrap();
        let (u, r) = unstable_direction_with_residual(&f, &h).unwrap();
        assert!(r < 1e-10, "{r}");
        assert!(line_angle(&u, &eig(&f, 0)) < 1e-8);
        let c = estimate_center_direction(&f, &h, 40).unwrap();
        assert!(line_angle(&c, &eig(&f, 1)) < 1e-8);
        let s = estimate_stable_direction(&f, &h.head(), 40).unwrap();
        assert!(line_angle(&s, &eig(&f, 2)) < 1e-8);
        let lc = f.linear_part().eigendata[1].value.ln();
        let deep = random_history(&f, 30, &mut rng).unwrap();
        assert!((phi_c(&f, &deep).unwrap() - lc).abs() < 1e-12);
    }

    #[test]
    fn product_center_is_rotation_axis() {
        let f = product_with_rotation();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_history(&f, 40, &mut rng).unwrap();
        let c = estimate_center_direction(&f, &h, 40).unwrap();
        assert!(line_angle(&c, &[0.0, 0.0, 1.0]) < 1e-8);
        assert!(phi_c(&f, &h).unwrap().abs() < 1e-12);
        assert!(central_exponent(&f, &h, 25).unwrap().abs() < 1e-12);
        let s = estimate_stable_direction(&f, &h.head(), 40).unwrap();
        assert!(s[2].abs() < 1e-8);
    }

    #[test]
    fn doubling_has_no_stable_direction() {
        let f = doubling();
        assert_eq!(
            estimate_stable_direction(&f, &TorusPoint::new(&[0.3]), 20),
            Err(Error::NoStableDirection)
        );
        let h = OrbitHistory::constant(TorusPoint::new(&[0.0]), 3);
        assert!(matches!(center_profile(&f, &h, 1, 10), Err(Error::NoCenterDirection)));
    }

    #[test]
    fn mane_center_at_fixed_point() {
        let f = mane(DEFAULT_STRENGTH).unwrap();
        let q = TorusPoint::origin(3);
        let h = OrbitHistory::constant(q, 40);
        let c = estimate_center_direction(&f, &h, 40).unwrap();
        // Eigen oracle on the perturbed Jacobian at q.
        let jq = f.jacobian(&q).to_dmatrix();
        let ev = jq.clone().complex_eigenvalues();
        let mut vals: Vec<f64> = ev.iter().map(|z| z.re).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let mid = vals[1];
        let shifted = jq - nalgebra::DMatrix::identity(3, 3) * mid;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.unwrap();
        let k = (0..3).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
        let v = [vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]];
        assert!(line_angle(&c, &v) < 1e-8);
        assert!(phi_c(&f, &h).unwrap() > 0.0);
        assert!((phi_c(&f, &h).unwrap() - mid.ln()).abs() < 1e-10);
    }

    #[test]
    fn mane_orbit_trapped_at_q_has_positive_exponent() {
        let f = mane(DEFAULT_STRENGTH).unwrap();
        let h = OrbitHistory::constant(TorusPoint::origin(3), 40);
        assert!(central_exponent(&f, &h, 10).unwrap() > 0.0);
    }

    #[test]
    fn volume_identity_on_linear_systems() {
        let f = center_linear();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_history(&f, 20, &mut rng).unwrap();
        let fr = estimate_frame(&f, &h, 40).unwrap();
        let j = f.jacobian(&h.head());
        let total: f64 = [fr.e_u, fr.e_c.unwrap(), fr.e_s.unwrap()]
            .iter()
            .map(|e| linalg::norm(&j.mul_vec(e)).ln())
            .sum();
        assert!((total - 3f64.ln()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn equivariance_on_linear_systems(seed in 0u64..500, which in 0usize..2) {
            let f = if which == 0 { center_linear() } else { product_with_rotation() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_history(&f, 40, &mut rng).unwrap();
            let r = equivariance_residuals(&f, &h, 40).unwrap();
            for x in r {
                prop_assert!(x < 1e-6);
            }
        }

        #[test]
        fn exponent_independent_of_branches(seed in 0u64..500) {
            let f = center_linear();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h1 = random_history(&f, 20, &mut rng).unwrap();
            let h2 = crate::inverse_limit::random_history_from(&f, h1.head(), 20, &mut rng).unwrap();
            let a = central_exponent(&f, &h1, 15).unwrap();
            let b = central_exponent(&f, &h2, 15).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn phi_c_continuous_on_mane(seed in 0u64..200) {
            let f = mane(DEFAULT_STRENGTH).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.06..0.06)).collect();
            let x = TorusPoint::new(&c);
            let hx = crate::inverse_limit::random_history_from(&f, x, 30, &mut rng).unwrap();
            let hy = crate::inverse_limit::lift_near(&f, x.translate(&[1e-6, 0.0, 0.0]), &hx).unwrap();
            let a = phi_c(&f, &hx).unwrap();
            let b = phi_c(&f, &hy).unwrap();
            prop_assert!((a - b).abs() < 1e-3, "{} {}", a, b);
        }
    }
}
