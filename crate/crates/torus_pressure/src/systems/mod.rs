//! Torus endomorphisms: linear toral maps, products with a circle rotation,
//! and pitchfork perturbations of a linear map near a fixed point.

pub mod config;
pub mod eigen;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use eigen::{dual_basis, toral_eigendata, EigenPair, IntMatrix};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vec3, MAX_DIM};

/// Seed of the sample used to measure the preimage separation radius.
const SEPARATION_SEED: u64 = 0x5e9a_7a11;
const SEPARATION_SAMPLES: usize = 1000;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Reduces a real number to `[0, 1)`.
#[inline]
pub fn reduce(c: f64) -> f64 {
    let r = c - c.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `c` modulo 1 in `(-1/2, 1/2]`.
#[inline]
pub fn centered(c: f64) -> f64 {
    c - (c - 0.5).ceil()
}

/// A point of the d-torus, each coordinate in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint {
    c: Vec3,
    d: u8,
}

impl TorusPoint {
    /// Builds a point from arbitrary real coordinates, reducing each mod 1.
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "torus dimension must be 1..=3"
        );
        let mut c = [0.0; MAX_DIM];
        for (ci, &x) in c.iter_mut().zip(coords) {
            *ci = reduce(x);
        }
        TorusPoint { c, d: coords.len() as u8 }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(&vec![0.0; dim])
    }

    /// Reduces a padded lifted vector.
    pub fn from_lift(v: &Vec3, dim: usize) -> Self {
        TorusPoint::new(&v[..dim])
    }

    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.d as usize]
    }

    /// Coordinates padded with zeros to length three.
    pub fn padded(&self) -> Vec3 {
        self.c
    }

    /// `self + v` reduced to the torus.
    pub fn translate(&self, v: &Vec3) -> Self {
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            c[i] = reduce(self.c[i] + v[i]);
        }
        TorusPoint { c, d: self.d }
    }

    /// Shortest lifted displacement from `other` to `self`.
    pub fn lift_diff(&self, other: &TorusPoint) -> Vec3 {
        let mut v = [0.0; MAX_DIM];
        for (i, vi) in v.iter_mut().enumerate().take(self.dim()) {
            *vi = centered(self.c[i] - other.c[i]);
        }
        v
    }

    /// Flat torus distance.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        linalg::norm(&self.lift_diff(other))
    }

    /// Lexicographic order on coordinates.
    pub fn lex_cmp(&self, other: &TorusPoint) -> std::cmp::Ordering {
        for i in 0..self.dim() {
            match self.c[i].total_cmp(&other.c[i]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// Diameter of the flat d-torus.
pub fn torus_diameter(dim: usize) -> f64 {
    (dim as f64).sqrt() / 2.0
}

/// A linear toral endomorphism with its spectral data.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearToralSpec {
    pub matrix: IntMatrix,
    pub degree: u64,
    pub eigendata: Vec<EigenPair>,
}

impl LinearToralSpec {
    pub fn new(matrix: IntMatrix) -> Result<Self> {
        let det = matrix.det();
        if det == 0 {
            return Err(Error::SingularMatrix);
        }
        let eigendata = toral_eigendata(&matrix)?;
        Ok(LinearToralSpec { matrix, degree: det.unsigned_abs() as u64, eigendata })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Pitchfork perturbation data around a fixed point of a linear map on T^3.
#[derive(Clone, Debug, PartialEq)]
pub struct ManeSpec {
    pub base: LinearToralSpec,
    pub q: TorusPoint,
    pub rho: f64,
    pub rho_inner: f64,
    pub strength: f64,
    /// Center eigenvector of the base matrix.
    pub center: Vec3,
    /// Dual row extracting the center coordinate.
    pub center_dual: Vec3,
}

impl ManeSpec {
    /// Strength above which the center eigenvalue at `q` exceeds 1.
    pub fn pitchfork_threshold(&self) -> f64 {
        1.0 - self.base.eigendata[1].value
    }

    fn bump(&self, u: f64) -> (f64, f64) {
        let a = self.rho_inner / self.rho;
        if u <= a {
            (1.0, 0.0)
        } else if u >= 1.0 {
            (0.0, 0.0)
        } else {
            let w = (u - a) / (1.0 - a);
            let s = w * w * w * (10.0 - 15.0 * w + 6.0 * w * w);
            let ds = 30.0 * w * w * (1.0 - w) * (1.0 - w);
            (1.0 - s, -ds / (1.0 - a))
        }
    }

    /// Center-direction displacement added to the linear image, and its gradient.
    fn displacement(&self, x: &TorusPoint) -> Option<(f64, Vec3)> {
        let dq = x.lift_diff(&self.q);
        let r = linalg::norm(&dq);
        if r >= self.rho {
            return None;
        }
        let u = r / self.rho;
        let (b, db) = self.bump(u);
        let t = linalg::dot(&self.center_dual, &dq) / self.rho;
        let p = self.rho * (t - t * t * t);
        let dp = 1.0 - 3.0 * t * t;
        let mut grad = linalg::scale(&self.center_dual, self.strength * b * dp);
        if db != 0.0 && r > 0.0 {
            grad = linalg::axpy(&grad, self.strength * db * p / (self.rho * r), &dq);
        }
        Some((self.strength * b * p, grad))
    }
}

/// Rates asserted for a partially hyperbolic system (metadata only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhConstants {
    pub lambda_s: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub lambda_u: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Linear,
    ProductRotation,
    Mane,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Linear => "linear",
            SystemKind::ProductRotation => "product-rotation",
            SystemKind::Mane => "mane",
        }
    }
}

/// A torus endomorphism with evaluation, derivative and preimage solver.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    kind: SystemKind,
    dim: usize,
    /// Linear part of the map (block-diagonal for the product kind).
    linear: LinearToralSpec,
    linear_mat: Mat,
    linear_inv: Mat,
    translation: Vec3,
    rotation: Option<(LinearToralSpec, f64)>,
    branch_offsets: Vec<Vec3>,
    mane: Option<ManeSpec>,
    separation_exponent: f64,
    ph_constants: Option<PhConstants>,
}

fn coset_offsets(linear: &LinearToralSpec, inv: &Mat) -> Vec<Vec3> {
    let d = linear.dim();
    let deg = linear.degree as i64;
    let mut found: Vec<Vec3> = Vec::new();
    let total = (deg as usize).pow(d as u32);
    for idx in 0..total {
        let mut k = [0.0; MAX_DIM];
        let mut rem = idx;
        for ki in k.iter_mut().take(d) {
            *ki = (rem % deg as usize) as f64;
            rem /= deg as usize;
        }
        let o = TorusPoint::from_lift(&inv.mul_vec(&k), d);
        let dup = found.iter().any(|f| TorusPoint::from_lift(f, d).distance(&o) < 1e-9);
        if !dup {
            found.push(o.padded());
            if found.len() == deg as usize {
                break;
            }
        }
    }
    found.sort_by(|a, b| {
        TorusPoint::from_lift(a, d).lex_cmp(&TorusPoint::from_lift(b, d))
    });
    found
}

fn linear_ph_constants(linear: &LinearToralSpec) -> Option<PhConstants> {
    if linear.dim() != 3 {
        return None;
    }
    let e = &linear.eigendata;
    let (u, c, s) = (e[0].value.abs(), e[1].value.abs(), e[2].value.abs());
    if !(s < 1.0 && u > 1.0) {
        return None;
    }
    Some(PhConstants { lambda_s: s, lambda_1: c, lambda_2: c, lambda_u: u, c: 1.0 })
}

impl SystemSpec {
    fn assemble(
        kind: SystemKind,
        linear: LinearToralSpec,
        translation: Vec3,
        rotation: Option<(LinearToralSpec, f64)>,
        mane: Option<ManeSpec>,
        ph_constants: Option<PhConstants>,
    ) -> Result<Self> {
        let linear_mat = linear.matrix.to_mat();
        let linear_inv = linear_mat.inverse().ok_or(Error::SingularMatrix)?;
        let branch_offsets = coset_offsets(&linear, &linear_inv);
        let mut sys = SystemSpec {
            kind,
            dim: linear.dim(),
            linear,
            linear_mat,
            linear_inv,
            translation,
            rotation,
            branch_offsets,
            mane,
            separation_exponent: f64::INFINITY,
            ph_constants,
        };
        sys.separation_exponent = sys.measure_separation()?;
        Ok(sys)
    }

    /// The linear toral map induced by an integer matrix.
    pub fn linear(matrix: IntMatrix) -> Result<Self> {
        let linear = LinearToralSpec::new(matrix)?;
        let ph = linear_ph_constants(&linear);
        SystemSpec::assemble(SystemKind::Linear, linear, [0.0; MAX_DIM], None, None, ph)
    }

    /// `(x, z) ↦ (A x, z + angle)` on T^{d+1}.
    pub fn product_rotation(matrix: IntMatrix, angle: f64) -> Result<Self> {
        let base = LinearToralSpec::new(matrix)?;
        let d = base.dim();
        let block = matrix.with_identity_block()?;
        let mut eigendata = base.eigendata.clone();
        let mut axis = [0.0; MAX_DIM];
        axis[d] = 1.0;
        let pos = eigendata.iter().position(|e| e.value.abs() < 1.0).unwrap_or(eigendata.len());
        eigendata.insert(pos, EigenPair { value: 1.0, vector: axis });
        let linear = LinearToralSpec { matrix: block, degree: base.degree, eigendata };
        let mut translation = [0.0; MAX_DIM];
        translation[d] = reduce(angle);
        let ph = if d == 2 {
            let u = base.eigendata[0].value.abs();
            let s = base.eigendata[1].value.abs();
            (s < 1.0 && u > 1.0).then_some(PhConstants {
                lambda_s: s,
                lambda_1: 1.0,
                lambda_2: 1.0,
                lambda_u: u,
                c: 1.0,
            })
        } else {
            None
        };
        SystemSpec::assemble(
            SystemKind::ProductRotation,
            linear,
            translation,
            Some((base, angle)),
            None,
            ph,
        )
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of preimages of every point.
    pub fn degree(&self) -> usize {
        self.linear.degree as usize
    }

    /// Linear part of the map (the base matrix for perturbed systems).
    pub fn linear_part(&self) -> &LinearToralSpec {
        &self.linear
    }

    pub fn linear_matrix(&self) -> &Mat {
        &self.linear_mat
    }

    /// Factor matrix and angle of a product with a rotation.
    pub fn rotation(&self) -> Option<(&LinearToralSpec, f64)> {
        self.rotation.as_ref().map(|(l, a)| (l, *a))
    }

    pub fn mane(&self) -> Option<&ManeSpec> {
        self.mane.as_ref()
    }

    /// Radius below which distinct points never share an image.
    pub fn separation_exponent(&self) -> f64 {
        self.separation_exponent
    }

    pub fn ph_constants(&self) -> Option<PhConstants> {
        self.ph_constants
    }

    /// True when the map is affine (no pitchfork perturbation).
    pub fn is_affine(&self) -> bool {
        self.mane.as_ref().is_none_or(|m| m.strength == 0.0)
    }

    /// Largest eigenvalue modulus of the linear part.
    pub fn unstable_rate(&self) -> f64 {
        self.linear.eigendata[0].value.abs()
    }

    fn linear_image(&self, x: &Vec3) -> Vec3 {
        linalg::add(&self.linear_mat.mul_vec(x), &self.translation)
    }

    /// `f(x)`.
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        let lin = TorusPoint::from_lift(&self.linear_image(&x.padded()), self.dim);
        match &self.mane {
            Some(m) if m.strength != 0.0 => match m.displacement(x) {
                Some((amp, _)) => lin.translate(&linalg::scale(&m.center, amp)),
                None => lin,
            },
            _ => lin,
        }
    }

    /// Lifted map on R^d, consistent with [`apply`](Self::apply) modulo Z^d.
    pub fn lift_apply(&self, x: &Vec3) -> Vec3 {
        let lin = self.linear_image(x);
        match &self.mane {
            Some(m) if m.strength != 0.0 => {
                match m.displacement(&TorusPoint::from_lift(x, self.dim)) {
                    Some((amp, _)) => linalg::axpy(&lin, amp, &m.center),
                    None => lin,
                }
            }
            _ => lin,
        }
    }

    /// `f(x + v) − f(x)` in lifted coordinates, computed without forming the
    /// large lifted images, so small offsets keep full relative precision.
    pub fn lift_increment(&self, x: &TorusPoint, v: &Vec3) -> Vec3 {
        let lin = self.linear_mat.mul_vec(v);
        match &self.mane {
            Some(m) if m.strength != 0.0 => {
                let amp = |p: &TorusPoint| m.displacement(p).map_or(0.0, |(a, _)| a);
                let da = amp(&x.translate(v)) - amp(x);
                linalg::axpy(&lin, da, &m.center)
            }
            _ => lin,
        }
    }

    /// `f^k(x)`.
    pub fn iterate(&self, x: &TorusPoint, k: usize) -> TorusPoint {
        let mut y = *x;
        for _ in 0..k {
            y = self.apply(&y);
        }
        y
    }

    /// `(x, f(x), …, f^{n-1}(x))`.
    pub fn orbit(&self, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n);
        let mut y = *x;
        for i in 0..n {
            out.push(y);
            if i + 1 < n {
                y = self.apply(&y);
            }
        }
        out
    }

    /// `D_x f`.
    pub fn jacobian(&self, x: &TorusPoint) -> Mat {
        match &self.mane {
            Some(m) if m.strength != 0.0 => match m.displacement(x) {
                Some((_, grad)) => {
                    let mut j = self.linear_mat;
                    for i in 0..3 {
                        for k in 0..3 {
                            j.m[i][k] += m.center[i] * grad[k];
                        }
                    }
                    j
                }
                None => self.linear_mat,
            },
            _ => self.linear_mat,
        }
    }

    /// Linear-branch preimages of `y`, in branch order.
    fn linear_preimages(&self, y: &TorusPoint) -> Vec<TorusPoint> {
        let base = self.linear_inv.mul_vec(&linalg::sub(&y.padded(), &self.translation));
        self.branch_offsets
            .iter()
            .map(|o| TorusPoint::from_lift(&linalg::add(&base, o), self.dim))
            .collect()
    }

    fn residual(&self, x: &TorusPoint, y: &TorusPoint) -> Vec3 {
        self.apply(x).lift_diff(y)
    }

    fn newton_branch(&self, start: TorusPoint, y: &TorusPoint, branch: usize) -> Result<TorusPoint> {
        let mut x = start;
        let mut r = self.residual(&x, y);
        let mut nr = linalg::norm(&r);
        for _ in 0..NEWTON_MAX_ITER {
            if nr < NEWTON_TOL {
                return Ok(x);
            }
            let step = self.jacobian(&x).solve(&r).ok_or(Error::SingularJacobian)?;
            let mut lam = 1.0;
            loop {
                let cand = x.translate(&linalg::scale(&step, -lam));
                let rc = self.residual(&cand, y);
                let nc = linalg::norm(&rc);
                if nc < nr || lam < 1e-4 {
                    x = cand;
                    r = rc;
                    nr = nc;
                    break;
                }
                lam *= 0.5;
            }
        }
        if nr < NEWTON_TOL {
            Ok(x)
        } else {
            Err(Error::RootNotConverged { branch, residual: nr })
        }
    }

    /// All `x` with `f(x) = y`, in branch order.
    pub fn preimages(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>> {
        let lin = self.linear_preimages(y);
        if self.is_affine() {
            return Ok(lin);
        }
        let mut out = Vec::with_capacity(lin.len());
        for (b, x0) in lin.into_iter().enumerate() {
            // Linear preimages outside the perturbation ball are already exact.
            if linalg::norm(&self.residual(&x0, y)) < NEWTON_TOL {
                out.push(x0);
            } else {
                out.push(self.newton_branch(x0, y, b)?);
            }
        }
        for i in 0..out.len() {
            for j in 0..i {
                if out[i].distance(&out[j]) < 1e-9 {
                    return Err(Error::RootNotConverged { branch: i, residual: 0.0 });
                }
            }
        }
        Ok(out)
    }

    /// Preimage of `y` on the branch through `(pre, img)`, where `f(pre) = img`
    /// and `y` is close to `img`.
    ///
    /// Uses the local inverse `pre + Df(pre)^{-1}(y − img)` (exact for affine
    /// maps, a Newton warm start otherwise) and falls back to the nearest
    /// preimage when the offset is not small against the separation radius.
    pub fn local_preimage(&self, y: &TorusPoint, pre: &TorusPoint, img: &TorusPoint) -> Result<TorusPoint> {
        let diff = y.lift_diff(img);
        let inv = if self.is_affine() {
            self.linear_inv
        } else {
            self.jacobian(pre).inverse().ok_or(Error::SingularJacobian)?
        };
        let step = inv.mul_vec(&diff);
        if linalg::norm(&step) < 0.5 * self.separation_exponent {
            let start = pre.translate(&step);
            if self.is_affine() {
                return Ok(start);
            }
            if let Ok(x) = self.newton_branch(start, y, 0) {
                if x.distance(pre) < self.separation_exponent {
                    return Ok(x);
                }
            }
        }
        self.nearest_preimage(y, pre)
    }

    /// Preimage of `y` closest to `reference`, ties broken by branch index.
    pub fn nearest_preimage(&self, y: &TorusPoint, reference: &TorusPoint) -> Result<TorusPoint> {
        let pre = self.preimages(y)?;
        let mut best = pre[0];
        let mut bd = best.distance(reference);
        for p in pre.into_iter().skip(1) {
            let d = p.distance(reference);
            if d < bd {
                best = p;
                bd = d;
            }
        }
        Ok(best)
    }

    fn measure_separation(&self) -> Result<f64> {
        if self.degree() == 1 {
            return Ok(torus_diameter(self.dim) / 2.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SEPARATION_SEED);
        let mut min_gap = f64::INFINITY;
        for _ in 0..SEPARATION_SAMPLES {
            let c: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>()).collect();
            let pre = self.preimages(&TorusPoint::new(&c))?;
            for i in 0..pre.len() {
                for j in 0..i {
                    min_gap = min_gap.min(pre[i].distance(&pre[j]));
                }
            }
        }
        Ok(min_gap / 2.0)
    }
}

/// Checks the spectral shape `λ_u > 1 > λ_c > λ_s > 0` of a 3×3 base matrix.
pub fn check_center_spectrum(base: &LinearToralSpec) -> Result<()> {
    let e = &base.eigendata;
    if e.len() != 3 {
        return Err(Error::SpectrumViolation(format!("dimension {} is not 3", e.len())));
    }
    if e.iter().any(|p| p.value <= 0.0) {
        return Err(Error::SpectrumViolation("negative eigenvalue".into()));
    }
    let outside = e.iter().filter(|p| p.value.abs() > 1.0).count();
    if outside != 1 {
        return Err(Error::SpectrumViolation(format!(
            "{outside} eigenvalues outside the unit circle"
        )));
    }
    if !(e[0].value > 1.0 && 1.0 > e[1].value && e[1].value > e[2].value) {
        return Err(Error::SpectrumViolation("rates not ordered".into()));
    }
    Ok(())
}

/// Pitchfork perturbation of `base` around its fixed point `q`.
///
/// The map is `f_A(x) + s·b(|x−q|/ρ)·ρ·P(ξ/ρ)·v_c` with `b` a C² bump equal
/// to 1 on `[0, ρ'/ρ]`, `P(t) = t − t³`, `ξ` the center coordinate of `x − q`
/// and `v_c` the center eigenvector.
pub fn build_mane_example(
    base: &LinearToralSpec,
    q: TorusPoint,
    rho: f64,
    rho_inner: f64,
    strength: f64,
) -> Result<SystemSpec> {
    if base.dim() != 3 || q.dim() != 3 {
        return Err(Error::InvalidInput("the pitchfork construction lives on T^3".into()));
    }
    if !(rho_inner > 0.0 && rho_inner < rho && rho < 0.5) {
        return Err(Error::InvalidInput(format!(
            "radii must satisfy 0 < rho_inner < rho < 1/2 (got {rho_inner}, {rho})"
        )));
    }
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::InvalidInput(format!("strength {strength} must be nonnegative")));
    }
    let a = base.matrix.to_mat();
    let image = TorusPoint::from_lift(&a.mul_vec(&q.padded()), 3);
    let disp = image.distance(&q);
    if disp > 1e-12 {
        return Err(Error::NotAFixedPoint(disp));
    }
    check_center_spectrum(base)?;
    let duals = dual_basis(&base.eigendata)?;
    let mane = ManeSpec {
        base: base.clone(),
        q,
        rho,
        rho_inner,
        strength,
        center: base.eigendata[1].vector,
        center_dual: duals[1],
    };
    let e = &base.eigendata;
    let lc = e[1].value;
    let ph = Some(PhConstants {
        lambda_s: e[2].value,
        lambda_1: lc - 2.0 * strength,
        lambda_2: lc + strength,
        lambda_u: e[0].value,
        c: 1.0,
    });
    SystemSpec::assemble(SystemKind::Mane, base.clone(), [0.0; MAX_DIM], None, Some(mane), ph)
}

/// Systems used throughout the examples and tests.
pub mod bundled {
    use super::*;

    /// Default rotation angle of the product system (small, so that finite
    /// segments see a slowly drifting center coordinate).
    pub const DEFAULT_ROTATION: f64 = std::f64::consts::SQRT_2 * 1e-3;
    pub const DEFAULT_RHO: f64 = 0.05;
    pub const DEFAULT_RHO_INNER: f64 = 0.025;
    pub const DEFAULT_STRENGTH: f64 = 0.1;

    fn mat(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .expect("static matrix")
    }

    pub fn doubling_matrix() -> IntMatrix {
        mat(&[&[2]])
    }

    pub fn cat_matrix() -> IntMatrix {
        mat(&[&[2, 1], &[1, 1]])
    }

    pub fn endomorphism_matrix() -> IntMatrix {
        mat(&[&[3, 1], &[1, 1]])
    }

    /// Matrix with one expanding, one weakly contracting and one strongly
    /// contracting direction.
    pub fn center_matrix() -> IntMatrix {
        mat(&[&[100, 1, 0], &[-100, 0, 1], &[3, 0, 0]])
    }

    pub fn doubling() -> SystemSpec {
        SystemSpec::linear(doubling_matrix()).expect("doubling map")
    }

    pub fn cat_map() -> SystemSpec {
        SystemSpec::linear(cat_matrix()).expect("cat map")
    }

    pub fn anosov_endomorphism() -> SystemSpec {
        SystemSpec::linear(endomorphism_matrix()).expect("endomorphism")
    }

    pub fn product_with_rotation() -> SystemSpec {
        SystemSpec::product_rotation(endomorphism_matrix(), DEFAULT_ROTATION).expect("product")
    }

    pub fn center_linear() -> SystemSpec {
        SystemSpec::linear(center_matrix()).expect("center example")
    }

    pub fn mane(strength: f64) -> Result<SystemSpec> {
        let base = LinearToralSpec::new(center_matrix())?;
        build_mane_example(&base, TorusPoint::origin(3), DEFAULT_RHO, DEFAULT_RHO_INNER, strength)
    }
}

#[cfg(test)]
mod tests {
    use super::bundled::*;
    use super::*;

    #[test]
    fn reduce_and_center() {
        assert_eq!(reduce(1.25), 0.25);
        assert_eq!(reduce(-0.25), 0.75);
        assert_eq!(reduce(-1e-20), 0.0);
        assert_eq!(centered(0.5), 0.5);
        assert_eq!(centered(-0.5), 0.5);
        assert!((centered(0.7) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn doubling_examples() {
        let f = doubling();
        let y = f.apply(&TorusPoint::new(&[0.3]));
        assert!((y.coords()[0] - 0.6).abs() < 1e-15);
        let pre = f.preimages(&TorusPoint::new(&[0.4])).unwrap();
        let mut c: Vec<f64> = pre.iter().map(|p| p.coords()[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.2).abs() < 1e-15 && (c[1] - 0.7).abs() < 1e-15);
        assert!((f.separation_exponent() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn endomorphism_examples() {
        let f = anosov_endomorphism();
        assert_eq!(f.apply(&TorusPoint::new(&[0.0, 0.0])), TorusPoint::new(&[0.0, 0.0]));
        assert_eq!(f.apply(&TorusPoint::new(&[0.5, 0.5])), TorusPoint::new(&[0.0, 0.0]));
        let y = TorusPoint::new(&[0.123, 0.77]);
        let pre = f.preimages(&y).unwrap();
        assert_eq!(pre.len(), 2);
        for p in &pre {
            assert!(f.apply(p).distance(&y) < 1e-12);
        }
    }

    #[test]
    fn center_example_has_three_branches() {
        let f = center_linear();
        assert_eq!(f.degree(), 3);
        let y = TorusPoint::new(&[0.3, 0.6, 0.9]);
        let pre = f.preimages(&y).unwrap();
        assert_eq!(pre.len(), 3);
        for p in &pre {
            assert!(f.apply(p).distance(&y) < 1e-9);
        }
        assert!((f.separation_exponent() - 0.5 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_strength_is_bit_identical() {
        let lin = center_linear();
        let m = mane(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = TorusPoint::new(&[rng.gen(), rng.gen(), rng.gen()]);
            assert_eq!(lin.apply(&x), m.apply(&x));
            assert_eq!(lin.jacobian(&x), m.jacobian(&x));
        }
    }

    #[test]
    fn mane_matches_linear_outside_ball() {
        let lin = center_linear();
        let m = mane(DEFAULT_STRENGTH).unwrap();
        let q = TorusPoint::origin(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut tested = 0;
        while tested < 500 {
            let x = TorusPoint::new(&[rng.gen(), rng.gen(), rng.gen()]);
            if x.distance(&q) <= DEFAULT_RHO {
                continue;
            }
            assert_eq!(lin.apply(&x), m.apply(&x));
            assert_eq!(lin.jacobian(&x), m.jacobian(&x));
            tested += 1;
        }
    }

    #[test]
    fn mane_keeps_q_fixed_and_expands_center() {
        let m = mane(DEFAULT_STRENGTH).unwrap();
        let q = TorusPoint::origin(3);
        assert_eq!(m.apply(&q), q);
        let spec = m.mane().unwrap();
        let jq = m.jacobian(&q);
        let v = jq.mul_vec(&spec.center);
        let lam = crate::linalg::dot(&v, &spec.center);
        assert!(lam > 1.0, "center eigenvalue {lam}");
        assert!((lam - (spec.base.eigendata[1].value + DEFAULT_STRENGTH)).abs() < 1e-9);
        assert!(spec.pitchfork_threshold() < DEFAULT_STRENGTH);
    }

    #[test]
    fn mane_displacement_is_along_center() {
        let m = mane(DEFAULT_STRENGTH).unwrap();
        let lin = center_linear();
        let spec = m.mane().unwrap().clone();
        let x = TorusPoint::new(&[0.01, -0.005, 0.012]);
        let d = m.apply(&x).lift_diff(&lin.apply(&x));
        let along = crate::linalg::cross(&d, &spec.center);
        assert!(crate::linalg::norm(&along) < 1e-14);
        assert!(crate::linalg::norm(&d) > 0.0);
    }

    #[test]
    fn mane_preimages_invert_the_map() {
        let m = mane(DEFAULT_STRENGTH).unwrap();
        let q = TorusPoint::origin(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..300 {
            let y = if i % 3 == 0 {
                q.translate(&[rng.gen_range(-0.04..0.04), rng.gen_range(-0.04..0.04), 0.0])
            } else {
                TorusPoint::new(&[rng.gen(), rng.gen(), rng.gen()])
            };
            let pre = m.preimages(&y).unwrap();
            assert_eq!(pre.len(), 3);
            for p in &pre {
                assert!(m.apply(p).distance(&y) < 1e-11);
            }
        }
    }

    #[test]
    fn mane_rejects_bad_inputs() {
        let base = LinearToralSpec::new(center_matrix()).unwrap();
        let off = TorusPoint::new(&[0.1, 0.2, 0.3]);
        assert!(matches!(
            build_mane_example(&base, off, 0.05, 0.02, 0.1),
            Err(Error::NotAFixedPoint(_))
        ));
        let hyper = LinearToralSpec::new(
            IntMatrix::from_rows(&[vec![2, 1, 0], vec![1, 1, 0], vec![0, 0, 3]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            build_mane_example(&hyper, TorusPoint::origin(3), 0.05, 0.02, 0.1),
            Err(Error::SpectrumViolation(_))
        ));
    }

    #[test]
    fn product_structure() {
        let f = product_with_rotation();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.degree(), 2);
        let x = TorusPoint::new(&[0.2, 0.3, 0.4]);
        let y = f.apply(&x);
        assert!((y.coords()[2] - (0.4 + DEFAULT_ROTATION)).abs() < 1e-15);
        let e = &f.linear_part().eigendata;
        assert_eq!(e[1].value, 1.0);
        assert_eq!(e[1].vector, [0.0, 0.0, 1.0]);
        let pre = f.preimages(&y).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(pre.iter().any(|p| p.distance(&x) < 1e-12));
    }
}
