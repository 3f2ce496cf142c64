//! Closed-form entropies of linear maps from their spectrum.
//!
//! For a linear toral map with splitting unstable ⊕ center ⊕ stable the
//! unstable entropy is the sum of the logarithms of the unstable moduli and
//! the stable entropy is `log deg` minus the sum of the logarithms of the
//! stable moduli. Their difference is minus the sum over center moduli.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::systems::SystemSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenEntropies {
    /// Eigenvalue moduli in decreasing order.
    pub moduli: Vec<f64>,
    pub log_degree: f64,
    /// `Σ log` over moduli above one.
    pub topological: f64,
    pub unstable: f64,
    pub stable: f64,
    /// `unstable − stable`, evaluated as `−Σ log` over the center moduli.
    pub gap: f64,
}

/// Splits sorted moduli into unstable, center and stable roles: the largest
/// is unstable and, in dimension at least two, the smallest is stable.
pub fn entropies_from_moduli(moduli: &[f64], log_degree: f64) -> Result<EigenEntropies> {
    let d = moduli.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    if moduli.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("moduli must be sorted in decreasing order".into()));
    }
    if moduli[0] <= 1.0 {
        return Err(Error::SpectrumViolation(format!("largest modulus {} is not expanding", moduli[0])));
    }
    if d >= 2 && moduli[d - 1] >= 1.0 {
        return Err(Error::SpectrumViolation(format!("smallest modulus {} is not contracting", moduli[d - 1])));
    }
    let center = if d >= 3 { &moduli[1..d - 1] } else { &moduli[..0] };
    let unstable = moduli[0].ln();
    let stable = if d >= 2 { log_degree - moduli[d - 1].ln() } else { log_degree };
    // Adding zero turns the -0 of an empty or unit center into +0.
    let gap = if d >= 2 { -center.iter().map(|m| m.ln()).sum::<f64>() + 0.0 } else { unstable - stable };
    let topological = moduli.iter().filter(|&&m| m > 1.0).map(|m| m.ln()).sum();
    Ok(EigenEntropies { moduli: moduli.to_vec(), log_degree, topological, unstable, stable, gap })
}

/// Entropies of the linear part of `system`.
pub fn eigen_entropies(system: &SystemSpec) -> Result<EigenEntropies> {
    let lin = system.linear_part();
    let moduli: Vec<f64> = lin.eigendata.iter().map(|p| p.value.abs()).collect();
    entropies_from_moduli(&moduli, (lin.degree as f64).ln())
}

/// Moduli of a real matrix, sorted decreasingly; complex pairs and repeated
/// moduli are rejected.
pub fn real_moduli(m: &Mat) -> Result<Vec<f64>> {
    let ev = m.to_dmatrix().complex_eigenvalues();
    let mut out = Vec::with_capacity(m.d);
    for z in ev.iter() {
        if z.im.abs() > 1e-9 * z.norm().max(1.0) {
            return Err(Error::NonSimpleSpectrum(format!("complex pair {:.6}±{:.6}i", z.re, z.im.abs())));
        }
        out.push(z.re.abs());
    }
    out.sort_by(|a, b| b.total_cmp(a));
    if out.windows(2).any(|w| w[0] - w[1] <= 1e-9) {
        return Err(Error::NonSimpleSpectrum("repeated modulus".into()));
    }
    Ok(out)
}

/// Entropies of a real matrix, with `log |det|` standing in for `log deg`.
pub fn matrix_entropies(m: &Mat) -> Result<EigenEntropies> {
    let det = m.det();
    if det == 0.0 {
        return Err(Error::SingularMatrix);
    }
    entropies_from_moduli(&real_moduli(m)?, det.abs().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bundled::*;

    #[test]
    fn center_linear_values() {
        let e = eigen_entropies(&center_linear()).unwrap();
        assert!((e.unstable - 4.595019887205262).abs() < 1e-12);
        assert!((e.stable - 4.5737326406167735).abs() < 1e-12);
        assert!((e.gap - 0.021287246588487532).abs() < 1e-12);
        assert!((e.unstable - e.stable - e.gap).abs() < 1e-12);
        assert_eq!(e.topological, e.unstable);
    }

    #[test]
    fn product_gap_is_exactly_zero() {
        let e = eigen_entropies(&product_with_rotation()).unwrap();
        assert_eq!(e.gap, 0.0);
        assert!((e.unstable - 1.2279471772995156).abs() < 1e-12);
        assert!((e.stable - e.unstable).abs() < 1e-12);
    }

    #[test]
    fn two_and_one_dimensional_cases() {
        let e = eigen_entropies(&cat_map()).unwrap();
        assert!((e.unstable - 0.9624236501192069).abs() < 1e-12);
        assert_eq!(e.gap, 0.0);
        let e = eigen_entropies(&doubling()).unwrap();
        assert!((e.unstable - 2f64.ln()).abs() < 1e-15);
        assert!(e.gap.abs() < 1e-15);
    }

    #[test]
    fn real_matrix_matches_integer_spectrum() {
        let f = center_linear();
        let a = matrix_entropies(f.linear_matrix()).unwrap();
        let b = eigen_entropies(&f).unwrap();
        assert!((a.gap - b.gap).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_hyperbolic_shapes() {
        assert!(entropies_from_moduli(&[0.9, 0.5], 0.0).is_err());
        assert!(entropies_from_moduli(&[2.0, 1.5], 0.0).is_err());
        assert!(entropies_from_moduli(&[0.5, 2.0], 0.0).is_err());
        let rot = Mat { d: 2, m: [[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0; 3]] };
        assert!(matches!(real_moduli(&rot), Err(Error::NonSimpleSpectrum(_))));
    }
}
