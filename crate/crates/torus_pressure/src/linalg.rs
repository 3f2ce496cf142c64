//! Small dense linear algebra on vectors and matrices of dimension at most three.
//!
//! Hot loops (orbit iteration, cocycle products) run on these stack types;
//! eigen and singular value work is delegated to `nalgebra`.

use nalgebra::DMatrix;

/// Largest torus dimension supported by the stack types.
pub const MAX_DIM: usize = 3;

/// A vector in R^d padded with zeros to length three.
pub type Vec3 = [f64; MAX_DIM];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s * b`.
pub fn axpy(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Returns `a / |a|` and the norm, or `None` for a zero vector.
pub fn normalize(a: &Vec3) -> Option<(Vec3, f64)> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some((scale(a, 1.0 / n), n))
    } else {
        None
    }
}

/// Flips the sign of a direction so that its largest-magnitude entry is positive.
pub fn canonical_sign(a: &Vec3) -> Vec3 {
    let mut k = 0;
    for i in 1..MAX_DIM {
        if a[i].abs() > a[k].abs() + 1e-12 {
            k = i;
        }
    }
    if a[k] < 0.0 {
        scale(a, -1.0)
    } else {
        *a
    }
}

/// Angle between two lines (directions up to sign), in radians.
pub fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let s = norm(&cross(a, b)) / (na * nb);
    let c = dot(a, b).abs() / (na * nb);
    s.atan2(c)
}

/// A d×d real matrix stored in the top-left block of a 3×3 array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    pub d: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        Mat { d, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(d: usize) -> Self {
        let mut out = Mat::zeros(d);
        for i in 0..d {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.d) {
            let row = &self.m[i];
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                let mut s = 0.0;
                for k in 0..self.d {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.d {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let mut out = Mat::zeros(self.d);
        match self.d {
            1 => out.m[0][0] = 1.0 / m[0][0],
            2 => {
                out.m[0][0] = m[1][1] / det;
                out.m[0][1] = -m[0][1] / det;
                out.m[1][0] = -m[1][0] / det;
                out.m[1][1] = m[0][0] / det;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        out.m[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
                    }
                }
            }
        }
        Some(out)
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &Vec3) -> Option<Vec3> {
        self.inverse().map(|inv| inv.mul_vec(b))
    }

    /// Operator 2-norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.to_dmatrix().singular_values().max()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.m[i][j])
    }

    /// Unit right singular vector of the largest singular value, with that value.
    pub fn top_singular(&self) -> (Vec3, f64) {
        let svd = self.to_dmatrix().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let (k, s) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let mut v = [0.0; MAX_DIM];
        for (j, vj) in v.iter_mut().enumerate().take(self.d) {
            *vj = v_t[(k, j)];
        }
        (canonical_sign(&v), s)
    }
}
