//! Splitting orbit segments into a bad prefix, on which the central sums stay
//! above `-r` per step, and a good suffix, on which every partial central sum
//! contracts at rate `r`. Also weighted empirical measures and the pressure
//! of the bad collection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cocycle::{center_profile, DEFAULT_LOOKAHEAD};
use crate::error::{Error, Result};
use crate::inverse_limit::{random_history, shift, OrbitHistory};
use crate::pressure::{
    birkhoff_sum, grid_pressure_pass, log_sum_exp, upper_half_slope, GridOptions, Potential,
};
use crate::systems::{SystemSpec, TorusPoint};

/// Depth of the fixed-branch histories attached to grid candidates.
pub const CANDIDATE_DEPTH: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionParams {
    /// Contraction threshold, positive.
    pub r: f64,
}

impl DecompositionParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("r must be positive, got {r}")));
        }
        Ok(DecompositionParams { r })
    }
}

/// `n = p + g + s` with `s = 0`, and the prefix sums `S_1, …, S_n` of the
/// central observable.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentClass {
    pub p: usize,
    pub g: usize,
    pub s: usize,
    pub prefix_sums: Vec<f64>,
}

/// Decomposes from prefix sums alone. `p` is the largest index with
/// `S_p ≥ -r p` (ties go to the bad prefix), and the suffix condition
/// `S_{p+j} - S_p < -r j` is verified explicitly.
pub fn classify_prefix_sums(prefix_sums: &[f64], r: f64) -> Result<SegmentClass> {
    let n = prefix_sums.len();
    let mut p = 0;
    for (j, &s) in prefix_sums.iter().enumerate().rev() {
        if s >= -r * (j + 1) as f64 {
            p = j + 1;
            break;
        }
    }
    let base = if p == 0 { 0.0 } else { prefix_sums[p - 1] };
    for j in 1..=n - p {
        if prefix_sums[p + j - 1] - base >= -r * j as f64 {
            return Err(Error::ConsistencyViolation(p + j));
        }
    }
    Ok(SegmentClass { p, g: n - p, s: 0, prefix_sums: prefix_sums.to_vec() })
}

fn prefix(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Decomposition of the segment `(x̃, n)`.
pub fn classify_segment(
    system: &SystemSpec,
    h: &OrbitHistory,
    n: usize,
    params: &DecompositionParams,
) -> Result<SegmentClass> {
    if n == 0 {
        return Err(Error::InvalidInput("segments have length at least 1".into()));
    }
    let profile = center_profile(system, h, n, DEFAULT_LOOKAHEAD)?;
    classify_prefix_sums(&prefix(&profile), params.r)
}

/// True iff every partial sum satisfies `S_j < -r j`.
pub fn is_good_sums(prefix_sums: &[f64], r: f64) -> bool {
    prefix_sums.iter().enumerate().all(|(j, &s)| s < -r * (j + 1) as f64)
}

pub fn is_good(system: &SystemSpec, h: &OrbitHistory, n: usize, params: &DecompositionParams) -> Result<bool> {
    let profile = center_profile(system, h, n, DEFAULT_LOOKAHEAD)?;
    Ok(is_good_sums(&prefix(&profile), params.r))
}

/// Finitely supported probability measure on histories.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(OrbitHistory, f64)>,
}

impl EmpiricalMeasure {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `∫ φ∘π`, evaluating the potential at the present state of each atom.
    pub fn integrate(&self, phi: &Potential) -> f64 {
        self.atoms.iter().map(|(h, w)| w * phi.eval(&h.head())).sum()
    }

    /// `∫ g` for an arbitrary function of histories.
    pub fn integrate_with(&self, g: impl Fn(&OrbitHistory) -> f64) -> f64 {
        self.atoms.iter().map(|(h, w)| w * g(h)).sum()
    }
}

/// `σ_n`, with weights proportional to `e^{Φ_0(x_0, n)}`, and its orbit
/// average `μ_n = (1/n) Σ_{i<n} σ_n ∘ τ^{-i}`.
pub fn weighted_empirical_measure(
    system: &SystemSpec,
    phi: &Potential,
    histories: &[OrbitHistory],
    n: usize,
) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
    if histories.is_empty() {
        return Err(Error::EmptyCollection(n));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let sums: Vec<f64> = histories.iter().map(|h| birkhoff_sum(system, phi, &h.head(), n)).collect();
    let norm = log_sum_exp(&sums);
    let sigma: Vec<(OrbitHistory, f64)> =
        histories.iter().zip(&sums).map(|(h, s)| (h.clone(), (s - norm).exp())).collect();
    let mut mu = Vec::with_capacity(histories.len() * n);
    for (h, w) in &sigma {
        for i in 0..n {
            mu.push((shift(system, h, i as isize)?, w / n as f64));
        }
    }
    Ok((EmpiricalMeasure { atoms: sigma }, EmpiricalMeasure { atoms: mu }))
}

/// History of `x` through the first preimage branch at every step.
pub fn fixed_branch_history(system: &SystemSpec, x: TorusPoint, depth: usize) -> Result<OrbitHistory> {
    let mut states = Vec::with_capacity(depth + 1);
    states.push(x);
    for k in 0..depth {
        let pre = system.preimages(&states[k])?;
        states.push(pre[0]);
    }
    Ok(OrbitHistory::new(states))
}

/// Whether the segment `(x̃, n)` of the fixed-branch history of `x` is
/// entirely bad: `S_n φ̃ᶜ ≥ -r n`.
pub fn is_fully_bad(system: &SystemSpec, x: &TorusPoint, n: usize, r: f64) -> Result<bool> {
    let h = fixed_branch_history(system, *x, CANDIDATE_DEPTH)?;
    let profile = center_profile(system, &h, n, DEFAULT_LOOKAHEAD)?;
    Ok(profile.iter().sum::<f64>() >= -r * n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BadPressureRow {
    pub n: usize,
    pub bad_count: u64,
    pub bad_log_lambda: f64,
    pub full_count: u64,
    pub full_log_lambda: f64,
}

/// Pressure of the bad collection next to the full pressure at matched scales.
#[derive(Clone, Debug, PartialEq)]
pub struct BadPressureReport {
    pub r: f64,
    pub delta: f64,
    pub rows: Vec<BadPressureRow>,
    /// `-∞` when some n has no bad candidate.
    pub bad_pressure: f64,
    pub full_pressure: f64,
    /// `full - bad`; `+∞` when the bad collection is empty at some n.
    pub gap: f64,
    /// Values of n at which no candidate was bad.
    pub empty_at: Vec<usize>,
}

impl BadPressureReport {
    /// The report as a value, or `EmptyCollection` at the first empty n.
    pub fn require_nonempty(&self) -> Result<&Self> {
        match self.empty_at.first() {
            Some(&n) => Err(Error::EmptyCollection(n)),
            None => Ok(self),
        }
    }
}

/// Greedy separated sets over the grid candidates whose fixed-branch
/// segment is fully bad. The full collection is the unfiltered run; since
/// greedy selection is not monotone under restriction of the candidates,
/// the full partition sum at each n is taken as the larger of the two, so
/// the bad collection never exceeds it.
pub fn bad_pressure_estimate(
    system: &SystemSpec,
    phi: &Potential,
    params: &DecompositionParams,
    delta: f64,
    n_range: (usize, usize),
    opts: &GridOptions,
) -> Result<BadPressureReport> {
    if system.dim() != 3 {
        return Err(Error::NoCenterDirection);
    }
    if n_range.0 == 0 || n_range.1 <= n_range.0 {
        return Err(Error::InvalidInput("n range must start at 1 and hold two values".into()));
    }
    let r = params.r;
    let mut rows = Vec::new();
    let mut empty_at = Vec::new();
    for n in n_range.0..=n_range.1 {
        let full = grid_pressure_pass(system, phi, delta, n, opts, None)?;
        let filter = |x: &TorusPoint| is_fully_bad(system, x, n, r).unwrap_or(true);
        let bad = grid_pressure_pass(system, phi, delta, n, opts, Some(&filter))?;
        if bad.count == 0 {
            empty_at.push(n);
        }
        let (full_count, full_ll) = if bad.log_lambda > full.log_lambda {
            (bad.count, bad.log_lambda)
        } else {
            (full.count, full.log_lambda)
        };
        rows.push(BadPressureRow {
            n,
            bad_count: bad.count,
            bad_log_lambda: bad.log_lambda,
            full_count,
            full_log_lambda: full_ll,
        });
    }
    let full_seq: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.full_log_lambda)).collect();
    let full_pressure = upper_half_slope(&full_seq);
    let (bad_pressure, gap) = if empty_at.is_empty() {
        let bad_seq: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.bad_log_lambda)).collect();
        let b = upper_half_slope(&bad_seq);
        (b, full_pressure - b)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Ok(BadPressureReport { r, delta, rows, bad_pressure, full_pressure, gap, empty_at })
}

/// Segment sampling for [`r_scan`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScanOptions {
    pub segments: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub depth: usize,
    pub seed: u64,
    /// Bin edges of the central-exponent histogram.
    pub histogram_edges: Vec<f64>,
    /// Scales for the bad-pressure column; `None` skips it.
    pub pressure: Option<(f64, (usize, usize), GridOptions)>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            segments: 200,
            min_length: 4,
            max_length: 64,
            depth: 40,
            seed: 0,
            histogram_edges: (0..=10).map(|i| -0.1 + 0.02 * i as f64).collect(),
            pressure: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RScanRow {
    pub r: f64,
    pub fraction_good: f64,
    /// Central exponents `S_n/n` of the sampled segments, binned.
    pub exponent_histogram: Vec<u64>,
    pub bad_pressure: f64,
    pub full_pressure: f64,
    pub gap: f64,
}

/// Log-spaced lengths between `min` and `max`.
fn sample_lengths(k: usize, min: usize, max: usize) -> Vec<usize> {
    let (a, b) = ((min.max(1)) as f64, (max.max(min.max(1))) as f64);
    (0..k)
        .map(|i| {
            let t = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            (a * (b / a).powf(t)).round() as usize
        })
        .collect()
}

/// Sampled prefix sums of the central observable on random segments.
pub fn sample_segments(system: &SystemSpec, opts: &ScanOptions) -> Result<Vec<Vec<f64>>> {
    let lengths = sample_lengths(opts.segments, opts.min_length, opts.max_length);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..opts.segments).map(|_| rng.gen()).collect();
    seeds
        .par_iter()
        .zip(lengths.par_iter())
        .map(|(&s, &n)| {
            let h = random_history(system, opts.depth, &mut ChaCha8Rng::seed_from_u64(s))?;
            Ok(prefix(&center_profile(system, &h, n, DEFAULT_LOOKAHEAD)?))
        })
        .collect()
}

fn histogram(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; edges.len() + 1];
    for &v in values {
        out[edges.partition_point(|&e| e <= v)] += 1;
    }
    out
}

/// For each candidate `r`: fraction of sampled segments that are good, the
/// histogram of sampled central exponents, and optionally the bad-pressure
/// gap.
pub fn r_scan(
    system: &SystemSpec,
    phi: &Potential,
    r_candidates: &[f64],
    opts: &ScanOptions,
) -> Result<Vec<RScanRow>> {
    let sums = sample_segments(system, opts)?;
    let exponents: Vec<f64> = sums.iter().map(|s| s[s.len() - 1] / s.len() as f64).collect();
    let hist = histogram(&exponents, &opts.histogram_edges);
    r_candidates
        .iter()
        .map(|&r| {
            DecompositionParams::new(r)?;
            let good = sums.iter().filter(|s| is_good_sums(s, r)).count();
            let (bad_pressure, full_pressure, gap) = match &opts.pressure {
                Some((delta, range, grid)) => {
                    let rep =
                        bad_pressure_estimate(system, phi, &DecompositionParams { r }, *delta, *range, grid)?;
                    (rep.bad_pressure, rep.full_pressure, rep.gap)
                }
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            Ok(RScanRow {
                r,
                fraction_good: good as f64 / sums.len().max(1) as f64,
                exponent_histogram: hist.clone(),
                bad_pressure,
                full_pressure,
                gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bundled::*;
    use proptest::prelude::*;

    fn lc() -> f64 {
        center_linear().linear_part().eigendata[1].value.ln()
    }

    #[test]
    fn constant_cocycle_examples() {
        let r = 0.1;
        let sums = prefix(&vec![-2.0 * r; 7]);
        let c = classify_prefix_sums(&sums, r).unwrap();
        assert_eq!((c.p, c.g, c.s), (0, 7, 0));
        let c = classify_prefix_sums(&prefix(&[0.0; 5]), r).unwrap();
        assert_eq!((c.p, c.g), (5, 0));
    }

    #[test]
    fn crossover_index_matches_direct_oracle() {
        // Expansion for three steps, then steady contraction.
        let values = [0.3, 0.2, 0.1, -0.5, -0.5, -0.5, -0.5, -0.5];
        let sums = prefix(&values);
        let r = 0.05;
        let oracle = (1..=sums.len()).filter(|&p| sums[p - 1] >= -r * p as f64).max().unwrap_or(0);
        assert_eq!(classify_prefix_sums(&sums, r).unwrap().p, oracle);
        assert_eq!(oracle, 4);
    }

    #[test]
    fn linear_goodness_switches_at_center_rate() {
        let f = center_linear();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_history(&f, 40, &mut rng).unwrap();
        let t = -lc();
        assert!(is_good(&f, &h, 12, &DecompositionParams::new(t * 0.9).unwrap()).unwrap());
        assert!(!is_good(&f, &h, 12, &DecompositionParams::new(t * 1.1).unwrap()).unwrap());
        let p = product_with_rotation();
        let hp = random_history(&p, 40, &mut rng).unwrap();
        let c = classify_segment(&p, &hp, 9, &DecompositionParams::new(0.01).unwrap()).unwrap();
        assert_eq!((c.p, c.g), (9, 0));
    }

    #[test]
    fn mane_segment_through_ball_matches_prefix_oracle() {
        let f = mane(DEFAULT_STRENGTH).unwrap();
        let q = TorusPoint::origin(3);
        // Start near the fixed point, slightly off the center axis so the orbit escapes.
        let e_u = f.linear_part().eigendata[0].vector;
        let x = q.translate(&crate::linalg::scale(&e_u, 1e-6));
        let h = crate::inverse_limit::lift_near(&f, x, &OrbitHistory::constant(q, 40)).unwrap();
        let n = 10;
        let profile = center_profile(&f, &h, n, DEFAULT_LOOKAHEAD).unwrap();
        let sums = prefix(&profile);
        let r = 0.01;
        let oracle = (1..=n).filter(|&p| sums[p - 1] >= -r * p as f64).max().unwrap_or(0);
        let c = classify_segment(&f, &h, n, &DecompositionParams::new(r).unwrap()).unwrap();
        assert_eq!(c.p, oracle);
        assert!(profile[0] > 0.0);
    }

    #[test]
    fn empirical_measure_examples() {
        let f = cat_map();
        let h = OrbitHistory::constant(TorusPoint::new(&[0.2, 0.3]), 3);
        let (sigma, mu) = weighted_empirical_measure(&f, &Potential::cosine(0), &[h.clone()], 4).unwrap();
        assert_eq!(sigma.atoms.len(), 1);
        assert!((sigma.atoms[0].1 - 1.0).abs() < 1e-15);
        assert_eq!(mu.atoms.len(), 4);
        assert!(mu.atoms.iter().all(|a| (a.1 - 0.25).abs() < 1e-15));
        let h2 = OrbitHistory::constant(TorusPoint::new(&[0.7, 0.1]), 3);
        let phi = Potential::cosine(1);
        let (sigma, _) = weighted_empirical_measure(&f, &phi, &[h.clone(), h2.clone()], 3).unwrap();
        let d = birkhoff_sum(&f, &phi, &h.head(), 3) - birkhoff_sum(&f, &phi, &h2.head(), 3);
        assert!((sigma.atoms[0].1 / sigma.atoms[1].1 - d.exp()).abs() < 1e-12 * d.exp().max(1.0));
        let (sigma, _) = weighted_empirical_measure(&f, &Potential::zero(), &[h, h2], 3).unwrap();
        assert!((sigma.atoms[0].1 - 0.5).abs() < 1e-15);
        assert_eq!(weighted_empirical_measure(&f, &phi, &[], 3), Err(Error::EmptyCollection(3)));
    }

    #[test]
    fn mu_is_shift_balanced() {
        let f = anosov_endomorphism();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hs: Vec<OrbitHistory> = (0..5).map(|_| random_history(&f, 5, &mut rng).unwrap()).collect();
        let phi = Potential::cosine(0).shifted(0.2);
        let n = 6;
        let (sigma, mu) = weighted_empirical_measure(&f, &phi, &hs, n).unwrap();
        let direct: f64 = sigma
            .atoms
            .iter()
            .map(|(h, w)| w * birkhoff_sum(&f, &phi, &h.head(), n) / n as f64)
            .sum();
        assert!((mu.integrate(&phi) - direct).abs() < 1e-12);
        assert!((mu.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_collection_of_linear_and_product() {
        let opts = GridOptions { orbit_samples: 16, orbit_sample_length: 4, ..GridOptions::default() };
        let f = center_linear();
        let rep = bad_pressure_estimate(&f, &Potential::zero(), &DecompositionParams::new(0.01).unwrap(), 0.5, (1, 2), &opts)
            .unwrap();
        assert_eq!(rep.gap, f64::INFINITY);
        assert_eq!(rep.empty_at, vec![1, 2]);
        assert_eq!(rep.require_nonempty().unwrap_err(), Error::EmptyCollection(1));
        let p = product_with_rotation();
        let rep = bad_pressure_estimate(&p, &Potential::zero(), &DecompositionParams::new(0.01).unwrap(), 0.25, (1, 3), &opts)
            .unwrap();
        assert_eq!(rep.gap, 0.0);
        for row in &rep.rows {
            assert_eq!(row.bad_count, row.full_count);
        }
    }

    #[test]
    fn r_scan_examples() {
        let opts = ScanOptions { segments: 40, max_length: 20, ..ScanOptions::default() };
        let t = -lc();
        let rows = r_scan(&center_linear(), &Potential::zero(), &[t * 0.9, t * 1.1], &opts).unwrap();
        assert_eq!(rows[0].fraction_good, 1.0);
        assert_eq!(rows[1].fraction_good, 0.0);
        let rows = r_scan(&product_with_rotation(), &Potential::zero(), &[0.001, 0.1], &opts).unwrap();
        assert!(rows.iter().all(|r| r.fraction_good == 0.0));
        let rs: Vec<f64> = (1..8).map(|i| 0.005 * i as f64).collect();
        let rows = r_scan(&mane(DEFAULT_STRENGTH).unwrap(), &Potential::zero(), &rs, &opts).unwrap();
        assert!(rows.windows(2).all(|w| w[1].fraction_good <= w[0].fraction_good));
        assert_eq!(rows[0].exponent_histogram.iter().sum::<u64>(), 40);
    }

    proptest! {
        #[test]
        fn decomposition_property(values in proptest::collection::vec(-0.3f64..0.3, 1..40), r in 0.001f64..0.2) {
            let sums = prefix(&values);
            let c = classify_prefix_sums(&sums, r).unwrap();
            prop_assert_eq!(c.p + c.g, values.len());
            prop_assert_eq!(c.s, 0);
            if c.p >= 1 {
                prop_assert!(sums[c.p - 1] >= -r * c.p as f64);
            }
            if c.p < values.len() {
                prop_assert!(sums[c.p] < -r * (c.p + 1) as f64);
            }
            prop_assert_eq!(c.p == 0, is_good_sums(&sums, r));
        }

        #[test]
        fn goodness_monotone_in_r(values in proptest::collection::vec(-0.3f64..0.3, 1..40), r1 in 0.001f64..0.2, r2 in 0.001f64..0.2) {
            let sums = prefix(&values);
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            if is_good_sums(&sums, hi) {
                prop_assert!(is_good_sums(&sums, lo));
            }
        }
    }
}
