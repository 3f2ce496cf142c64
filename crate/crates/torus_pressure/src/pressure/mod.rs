//! Potentials, separated sets and slope estimates of topological, unstable
//! and stable pressure. Entropy is the case of the zero potential.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::systems::{SystemSpec, TorusPoint};

mod leaf;
pub mod oracle;
mod separated;

pub use leaf::{
    grow_unstable_disk, stable_pressure_estimate, unstable_pressure_estimate, LeafOptions, UnstableDisk,
};
pub use oracle::{eigen_entropies, matrix_entropies, EigenEntropies};
pub use separated::{
    grid_pressure_pass, log_partition_function, max_separated_set, partition_function, pressure_estimate,
    GridOptions, GridPass,
};

pub type PotentialFn = dyn Fn(&TorusPoint) -> f64 + Send + Sync;

/// A Hölder potential `φ(x) = c + Σ a_k cos(2π x_{i_k}) + g(x)`.
///
/// The constant is kept separate so that shifted potentials share every
/// other term bit for bit.
#[derive(Clone)]
pub struct Potential {
    name: String,
    constant: f64,
    cosines: Vec<(usize, f64)>,
    custom: Option<Arc<PotentialFn>>,
    pub holder_exponent: f64,
    pub holder_constant: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("constant", &self.constant)
            .field("cosines", &self.cosines)
            .field("custom", &self.custom.is_some())
            .field("holder_exponent", &self.holder_exponent)
            .field("holder_constant", &self.holder_constant)
            .finish()
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            name: "zero".into(),
            constant: 0.0,
            cosines: Vec::new(),
            custom: None,
            holder_exponent: 1.0,
            holder_constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Potential { name: "constant".into(), constant: c, ..Potential::zero() }
    }

    /// `cos(2π x_coord)`, Lipschitz with constant 2π.
    pub fn cosine(coord: usize) -> Self {
        Potential::zero().plus_cosine(coord, 1.0).renamed(&format!("cos(2pi x{})", coord + 1))
    }

    /// An arbitrary evaluator with a declared Hölder bound.
    pub fn custom(name: &str, f: Arc<PotentialFn>, holder_constant: f64, holder_exponent: f64) -> Self {
        Potential {
            name: name.into(),
            custom: Some(f),
            holder_constant,
            holder_exponent,
            ..Potential::zero()
        }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    /// `φ + a·cos(2π x_coord)`.
    pub fn plus_cosine(&self, coord: usize, amplitude: f64) -> Self {
        let mut out = self.clone();
        out.cosines.push((coord, amplitude));
        if out.custom.is_none() {
            out.holder_exponent = 1.0;
        }
        out.holder_constant += 2.0 * std::f64::consts::PI * amplitude.abs();
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let mut v = 0.0;
        for &(i, a) in &self.cosines {
            v += a * (2.0 * std::f64::consts::PI * x.coords()[i]).cos();
        }
        if let Some(g) = &self.custom {
            v += g(x);
        }
        v + self.constant
    }

    /// `Some(c)` when the potential is the constant `c`.
    pub fn constant_value(&self) -> Option<f64> {
        (self.custom.is_none() && self.cosines.iter().all(|&(_, a)| a == 0.0)).then_some(self.constant)
    }

    /// Largest coordinate index used, for dimension checks.
    pub fn max_coord(&self) -> Option<usize> {
        self.cosines.iter().map(|&(i, _)| i).max()
    }

    /// `‖φ‖_∞` when it is known in closed form.
    pub fn sup_norm_bound(&self) -> Option<f64> {
        if self.custom.is_some() {
            return None;
        }
        Some(self.constant.abs() + self.cosines.iter().map(|&(_, a)| a.abs()).sum::<f64>())
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.max_coord() {
            Some(i) if i >= dim => Err(Error::InvalidInput(format!(
                "potential uses coordinate {} on a {dim}-torus",
                i + 1
            ))),
            _ => Ok(()),
        }
    }
}

/// `Φ_0(x, n) = Σ_{i<n} φ(f^i x)`.
pub fn birkhoff_sum(system: &SystemSpec, phi: &Potential, x: &TorusPoint, n: usize) -> f64 {
    let mut y = *x;
    let mut s = 0.0;
    for i in 0..n {
        s += phi.eval(&y);
        if i + 1 < n {
            y = system.apply(&y);
        }
    }
    s
}

/// Which estimator produced a [`PressureEstimate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Grid,
    UnstableDisk,
    StableBranches,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::UnstableDisk => "unstable-disk",
            Method::StableBranches => "stable-branches",
        }
    }
}

/// One row of the per-n table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerN {
    pub n: usize,
    pub count: u64,
    pub log_lambda: f64,
    /// Slope over the upper half of the rows up to this one; `log Λ / n` on the first row.
    pub slope_so_far: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureEstimate {
    pub value: f64,
    pub delta: f64,
    pub eps: f64,
    pub n_range: (usize, usize),
    pub per_n: Vec<PerN>,
    /// Points whose Birkhoff sums entered the estimate, summed over n.
    pub sample_size: u64,
    pub method: Method,
    pub seed: u64,
    /// Whether the separated counts are nondecreasing in n.
    pub counts_monotone: bool,
    /// Number of leaf components per n (stable estimator only).
    pub branch_components: Vec<u64>,
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Slope over the upper half (at least two rows) of a per-n sequence.
pub fn upper_half_slope(rows: &[(usize, f64)]) -> f64 {
    if rows.len() == 1 {
        return rows[0].1 / rows[0].0 as f64;
    }
    let keep = rows.len().div_ceil(2).max(2);
    let pts: Vec<(f64, f64)> = rows[rows.len() - keep..].iter().map(|&(n, y)| (n as f64, y)).collect();
    least_squares_slope(&pts)
}

pub(crate) fn check_range(n_range: (usize, usize)) -> Result<()> {
    if n_range.0 == 0 || n_range.1 <= n_range.0 {
        return Err(Error::InvalidInput(format!(
            "n range {}..={} must start at 1 or later and contain two values",
            n_range.0, n_range.1
        )));
    }
    Ok(())
}

pub(crate) fn check_scale(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Fills slopes from raw `(n, count, log Λ)` rows.
pub(crate) fn assemble(
    rows: Vec<(usize, u64, f64)>,
    meta: (f64, f64, Method, u64),
    sample_size: u64,
    branch_components: Vec<u64>,
) -> PressureEstimate {
    let (delta, eps, method, seed) = meta;
    let mut per_n = Vec::with_capacity(rows.len());
    let mut seq = Vec::with_capacity(rows.len());
    for &(n, count, log_lambda) in &rows {
        seq.push((n, log_lambda));
        per_n.push(PerN { n, count, log_lambda, slope_so_far: upper_half_slope(&seq) });
    }
    let counts_monotone = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    PressureEstimate {
        value: upper_half_slope(&seq),
        delta,
        eps,
        n_range: (rows[0].0, rows[rows.len() - 1].0),
        per_n,
        sample_size,
        method,
        seed,
        counts_monotone,
        branch_components,
    }
}

/// Per-n maximum of `log Λ` over estimates at several base points, the
/// sampled stand-in for the supremum over base points.
pub fn combine_max(estimates: &[PressureEstimate]) -> Result<PressureEstimate> {
    let first = estimates.first().ok_or_else(|| Error::InvalidInput("no estimates to combine".into()))?;
    if estimates.iter().any(|e| e.per_n.len() != first.per_n.len() || e.method != first.method) {
        return Err(Error::InvalidInput("estimates do not share n range and method".into()));
    }
    let rows = (0..first.per_n.len())
        .map(|k| {
            let best = estimates
                .iter()
                .map(|e| e.per_n[k])
                .fold(first.per_n[k], |a, b| if b.log_lambda > a.log_lambda { b } else { a });
            (best.n, best.count, best.log_lambda)
        })
        .collect();
    let samples = estimates.iter().map(|e| e.sample_size).sum();
    Ok(assemble(
        rows,
        (first.delta, first.eps, first.method, first.seed),
        samples,
        first.branch_components.clone(),
    ))
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    pub(crate) fn add(&mut self, v: f64) {
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `log Σ e^{v_i}`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bundled::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn birkhoff_examples() {
        let f = doubling();
        let x = TorusPoint::new(&[0.0]);
        assert_eq!(birkhoff_sum(&f, &Potential::cosine(0), &x, 3), 3.0);
        assert_eq!(birkhoff_sum(&f, &Potential::constant(0.5), &TorusPoint::new(&[0.3]), 4), 2.0);
        let y = TorusPoint::new(&[0.2]);
        assert_eq!(birkhoff_sum(&f, &Potential::cosine(0), &y, 1), Potential::cosine(0).eval(&y));
    }

    #[test]
    fn slope_of_exact_line() {
        let rows: Vec<(usize, f64)> = (3..=9).map(|n| (n, 0.7 * n as f64 + 2.0)).collect();
        assert!((upper_half_slope(&rows) - 0.7).abs() < 1e-13);
        assert_eq!(upper_half_slope(&rows[..1]), rows[0].1 / 3.0);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 2f64.ln()]) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Potential::constant(2.0).shifted(1.0).constant_value(), Some(3.0));
        assert_eq!(Potential::cosine(0).constant_value(), None);
        assert!(Potential::cosine(2).check_dim(2).is_err());
    }

    proptest! {
        #[test]
        fn holder_bound_holds(seed in 0u64..50, amp in -2.0f64..2.0) {
            let phi = Potential::cosine(0).plus_cosine(1, amp).shifted(0.3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let x = TorusPoint::new(&[rng.gen(), rng.gen()]);
                let y = TorusPoint::new(&[rng.gen(), rng.gen()]);
                let lhs = (phi.eval(&x) - phi.eval(&y)).abs();
                let rhs = phi.holder_constant * x.distance(&y).powf(phi.holder_exponent);
                prop_assert!(lhs <= rhs + 1e-12);
            }
        }

        #[test]
        fn shift_adds_n_c(seed in 0u64..100, c in -3.0f64..3.0, n in 1usize..12) {
            let f = anosov_endomorphism();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = TorusPoint::new(&[rng.gen(), rng.gen()]);
            let phi = Potential::cosine(1);
            let a = birkhoff_sum(&f, &phi.shifted(c), &x, n);
            let b = birkhoff_sum(&f, &phi, &x, n) + n as f64 * c;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
