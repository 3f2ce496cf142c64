//! Integer matrices and their real spectral data.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, normalize, Mat, Vec3, MAX_DIM};

/// A d×d integer matrix, d ≤ 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    d: usize,
    m: [[i64; MAX_DIM]; MAX_DIM],
}

impl IntMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidInput(format!("matrix dimension {d} outside 1..=3")));
        }
        let mut m = [[0i64; MAX_DIM]; MAX_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            m[i][..d].copy_from_slice(row);
        }
        Ok(IntMatrix { d, m })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.m[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.d).map(|i| self.m[i][..self.d].to_vec()).collect()
    }

    /// Exact determinant by cofactor expansion.
    pub fn det(&self) -> i128 {
        let m = |i: usize, j: usize| self.m[i][j] as i128;
        match self.d {
            1 => m(0, 0),
            2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
            _ => {
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
        }
    }

    pub fn to_mat(&self) -> Mat {
        let mut out = Mat::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                out.m[i][j] = self.m[i][j] as f64;
            }
        }
        out
    }

    /// Block-diagonal extension by a trailing 1×1 identity block.
    pub fn with_identity_block(&self) -> Result<IntMatrix> {
        if self.d + 1 > MAX_DIM {
            return Err(Error::InvalidInput("product would exceed dimension 3".into()));
        }
        let mut out = IntMatrix { d: self.d + 1, m: [[0; MAX_DIM]; MAX_DIM] };
        for i in 0..self.d {
            out.m[i][..self.d].copy_from_slice(&self.m[i][..self.d]);
        }
        out.m[self.d][self.d] = 1;
        Ok(out)
    }

    /// Characteristic polynomial coefficients `c[0] + c[1] x + … + c[d] x^d`
    /// (monic), computed exactly by the Faddeev–LeVerrier recursion.
    pub fn charpoly(&self) -> Vec<i128> {
        let d = self.d;
        let a = |i: usize, j: usize| self.m[i][j] as i128;
        let mut c = vec![0i128; d + 1];
        c[d] = 1;
        let mut mk = [[0i128; MAX_DIM]; MAX_DIM];
        for k in 1..=d {
            // M_k = A M_{k-1} + c_{d-k+1} I
            let mut next = [[0i128; MAX_DIM]; MAX_DIM];
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0;
                    for l in 0..d {
                        s += a(i, l) * mk[l][j];
                    }
                    next[i][j] = s + if i == j { c[d - k + 1] } else { 0 };
                }
            }
            mk = next;
            let mut tr = 0;
            for i in 0..d {
                for l in 0..d {
                    tr += a(i, l) * mk[l][i];
                }
            }
            c[d - k] = -tr / k as i128;
        }
        c
    }
}

/// An eigenvalue with a unit eigenvector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec3,
}

fn horner(c: &[i128], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ck in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + ck as f64;
    }
    (p, dp)
}

/// Real eigenvalues sorted by decreasing modulus with unit eigenvectors.
///
/// Complex conjugate pairs share a modulus and are reported as
/// [`Error::NonSimpleSpectrum`].
pub fn toral_eigendata(matrix: &IntMatrix) -> Result<Vec<EigenPair>> {
    let d = matrix.dim();
    if matrix.det() == 0 {
        return Err(Error::SingularMatrix);
    }
    let c = matrix.charpoly();
    let roots = if d == 1 {
        vec![(-c[0]) as f64]
    } else {
        // Companion matrix of the monic characteristic polynomial.
        let comp = DMatrix::from_fn(d, d, |i, j| {
            if i == 0 {
                -(c[d - 1 - j] as f64)
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let ev = comp.complex_eigenvalues();
        let mut out = Vec::with_capacity(d);
        for z in ev.iter() {
            if z.im.abs() > 1e-9 * z.norm().max(1.0) {
                return Err(Error::NonSimpleSpectrum(format!(
                    "complex pair {:.6}±{:.6}i",
                    z.re,
                    z.im.abs()
                )));
            }
            let mut x = z.re;
            for _ in 0..8 {
                let (p, dp) = horner(&c, x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                x -= step;
                if step.abs() <= 1e-16 * x.abs() {
                    break;
                }
            }
            out.push(x);
        }
        out
    };
    let mut roots = roots;
    roots.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    for w in roots.windows(2) {
        if (w[0].abs() - w[1].abs()).abs() <= 1e-9 {
            return Err(Error::NonSimpleSpectrum(format!("|{}| ≈ |{}|", w[0], w[1])));
        }
    }
    let a = matrix.to_mat();
    roots
        .into_iter()
        .map(|value| {
            let mut shifted = a;
            for i in 0..d {
                shifted.m[i][i] -= value;
            }
            let svd = shifted.to_dmatrix().svd(false, true);
            let v_t = svd.v_t.expect("requested right singular vectors");
            let k = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc })
                .0;
            let mut v = [0.0; MAX_DIM];
            for (j, vj) in v.iter_mut().enumerate().take(d) {
                *vj = v_t[(k, j)];
            }
            let (v, _) = normalize(&v).ok_or(Error::SingularMatrix)?;
            Ok(EigenPair { value, vector: canonical_sign(&v) })
        })
        .collect()
}

/// Dual basis rows: `duals[i] · vectors[j] = δ_ij`.
pub fn dual_basis(pairs: &[EigenPair]) -> Result<Vec<Vec3>> {
    let d = pairs.len();
    let mut p = Mat::zeros(d);
    for (j, pair) in pairs.iter().enumerate() {
        for i in 0..d {
            p.m[i][j] = pair.vector[i];
        }
    }
    let inv = p.inverse().ok_or(Error::SingularMatrix)?;
    Ok((0..d)
        .map(|i| {
            let mut row = [0.0; MAX_DIM];
            row[..d].copy_from_slice(&inv.m[i][..d]);
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn doubling_spectrum() {
        let e = toral_eigendata(&m(&[&[2]])).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].value, 2.0);
        assert_eq!(e[0].vector[0], 1.0);
    }

    #[test]
    fn charpoly_of_center_example() {
        let a = m(&[&[100, 1, 0], &[-100, 0, 1], &[3, 0, 0]]);
        assert_eq!(a.charpoly(), vec![-3, 100, -100, 1]);
        assert_eq!(a.det(), 3);
    }

    #[test]
    fn endomorphism_spectrum() {
        let e = toral_eigendata(&m(&[&[3, 1], &[1, 1]])).unwrap();
        let s2 = 2f64.sqrt();
        assert!((e[0].value - (2.0 + s2)).abs() < 1e-14);
        assert!((e[1].value - (2.0 - s2)).abs() < 1e-14);
    }

    #[test]
    fn rotation_like_matrix_is_rejected() {
        let r = toral_eigendata(&m(&[&[0, -1], &[1, 0]]));
        assert!(matches!(r, Err(Error::NonSimpleSpectrum(_))));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert_eq!(toral_eigendata(&m(&[&[1, 2], &[2, 4]])), Err(Error::SingularMatrix));
    }

    #[test]
    fn dual_basis_is_biorthogonal() {
        let e = toral_eigendata(&m(&[&[100, 1, 0], &[-100, 0, 1], &[3, 0, 0]])).unwrap();
        let w = dual_basis(&e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = crate::linalg::dot(&w[i], &e[j].vector);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "{i} {j} {d}");
            }
        }
    }
}
