//! Truncated backward orbits standing in for points of the natural extension,
//! with the weighted history metric, the shift, Bowen distances and a sampled
//! estimate of the two-sided ε-shadowing set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::systems::{torus_diameter, SystemSpec, TorusPoint};

pub const DEFAULT_DEPTH: usize = 40;
pub const DEFAULT_BRANCH_CAP: usize = 1_000_000;
/// Consistency tolerance for `f(x_{-k-1}) = x_{-k}`.
pub const CONSISTENCY_TOL: f64 = 1e-9;
const GAMMA_SEED: u64 = 0x6a33_a001;

/// `(x_0, x_{-1}, …, x_{-m})`, a point of the natural extension cut at depth m.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitHistory {
    states: Vec<TorusPoint>,
}

impl OrbitHistory {
    /// Wraps states ordered from `x_0` backwards. Panics on an empty list.
    pub fn new(states: Vec<TorusPoint>) -> Self {
        assert!(!states.is_empty(), "a history holds at least x_0");
        OrbitHistory { states }
    }

    /// The history `(x, …, x)` of a fixed point.
    pub fn constant(x: TorusPoint, depth: usize) -> Self {
        OrbitHistory { states: vec![x; depth + 1] }
    }

    pub fn depth(&self) -> usize {
        self.states.len() - 1
    }

    /// `x_0`, the projection to the torus.
    pub fn head(&self) -> TorusPoint {
        self.states[0]
    }

    /// `x_{-k}`.
    pub fn back(&self, k: usize) -> TorusPoint {
        self.states[k]
    }

    pub fn states(&self) -> &[TorusPoint] {
        &self.states
    }

    /// Index of the first `k` with `d(f(x_{-k-1}), x_{-k}) > tol`, if any.
    pub fn first_inconsistency(&self, system: &SystemSpec, tol: f64) -> Option<usize> {
        (0..self.depth()).find(|&k| system.apply(&self.states[k + 1]).distance(&self.states[k]) > tol)
    }

    pub fn is_consistent(&self, system: &SystemSpec) -> bool {
        self.first_inconsistency(system, CONSISTENCY_TOL).is_none()
    }

    /// Columnar text: a `depth` and `dim` header, then one state per line from `x_0`.
    pub fn to_columnar(&self) -> String {
        let dim = self.head().dim();
        let mut s = format!("depth {}\ndim {}\n", self.depth(), dim);
        for x in &self.states {
            let row: Vec<String> = x.coords().iter().map(|c| format!("{c:?}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_columnar(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |name: &str| -> Result<usize> {
            let line = lines.next().ok_or_else(|| Error::Config(format!("missing {name} header")))?;
            let (k, v) = line
                .trim()
                .split_once(' ')
                .ok_or_else(|| Error::Config(format!("bad header line {line}")))?;
            if k != name {
                return Err(Error::Config(format!("expected {name}, found {k}")));
            }
            v.trim().parse().map_err(|_| Error::Config(format!("bad {name} value {v}")))
        };
        let depth = header("depth")?;
        let dim = header("dim")?;
        if dim == 0 || dim > 3 {
            return Err(Error::Config(format!("dimension {dim} outside 1..=3")));
        }
        let mut states = Vec::with_capacity(depth + 1);
        for line in lines {
            let c: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad coordinate {t}"))))
                .collect::<Result<_>>()?;
            if c.len() != dim {
                return Err(Error::Config(format!("state has {} coordinates, expected {dim}", c.len())));
            }
            states.push(TorusPoint::new(&c));
        }
        if states.len() != depth + 1 {
            return Err(Error::Config(format!("expected {} states, found {}", depth + 1, states.len())));
        }
        Ok(OrbitHistory { states })
    }
}

/// A finite orbit segment `(x̃, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSegment {
    pub history: OrbitHistory,
    pub length: usize,
}

impl OrbitSegment {
    pub fn new(history: OrbitHistory, length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidInput("segment length must be at least 1".into()));
        }
        Ok(OrbitSegment { history, length })
    }
}

/// How to choose preimages when extending a point backwards.
#[derive(Clone, Debug, PartialEq)]
pub enum BranchPolicy {
    EnumerateAll { cap: usize },
    Random { seed: u64 },
    /// Branch index per step, cycled when shorter than the depth.
    Fixed(Vec<usize>),
}

/// Backward histories of `x` of depth `m`.
///
/// Enumeration returns `degree^m` histories in branch-index order.
pub fn extend_history(
    system: &SystemSpec,
    x: TorusPoint,
    m: usize,
    policy: &BranchPolicy,
) -> Result<Vec<OrbitHistory>> {
    match policy {
        BranchPolicy::EnumerateAll { cap } => {
            let count = (system.degree() as f64).powi(m as i32);
            if count > *cap as f64 {
                return Err(Error::BranchExplosion { requested: count, cap: *cap });
            }
            let mut layer = vec![vec![x]];
            for _ in 0..m {
                let mut next = Vec::with_capacity(layer.len() * system.degree());
                for states in layer {
                    let last = *states.last().expect("nonempty");
                    for p in system.preimages(&last)? {
                        let mut s = states.clone();
                        s.push(p);
                        next.push(s);
                    }
                }
                layer = next;
            }
            Ok(layer.into_iter().map(OrbitHistory::new).collect())
        }
        BranchPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(vec![random_history_from(system, x, m, &mut rng)?])
        }
        BranchPolicy::Fixed(indices) => {
            if indices.is_empty() {
                return Err(Error::InvalidInput("empty branch index list".into()));
            }
            let mut states = vec![x];
            for k in 0..m {
                let pre = system.preimages(states.last().expect("nonempty"))?;
                states.push(pre[indices[k % indices.len()] % pre.len()]);
            }
            Ok(vec![OrbitHistory::new(states)])
        }
    }
}

/// A history of `x` with uniformly random branch choices drawn from `rng`.
pub fn random_history_from<R: Rng>(
    system: &SystemSpec,
    x: TorusPoint,
    m: usize,
    rng: &mut R,
) -> Result<OrbitHistory> {
    let mut states = vec![x];
    for _ in 0..m {
        let pre = system.preimages(states.last().expect("nonempty"))?;
        states.push(pre[rng.gen_range(0..pre.len())]);
    }
    Ok(OrbitHistory::new(states))
}

/// A uniformly random point of the torus.
pub fn random_point<R: Rng>(dim: usize, rng: &mut R) -> TorusPoint {
    let c: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    TorusPoint::new(&c)
}

/// A random point with a random backward history of depth `m`.
pub fn random_history<R: Rng>(system: &SystemSpec, m: usize, rng: &mut R) -> Result<OrbitHistory> {
    let x = random_point(system.dim(), rng);
    random_history_from(system, x, m, rng)
}

/// History of `y` obtained by following, at each step, the preimage branch
/// closest to the corresponding state of `reference`.
pub fn lift_near(system: &SystemSpec, y: TorusPoint, reference: &OrbitHistory) -> Result<OrbitHistory> {
    let mut states = Vec::with_capacity(reference.depth() + 1);
    states.push(y);
    for k in 0..reference.depth() {
        let cur = states[k];
        let p = system.local_preimage(&cur, &reference.back(k + 1), &reference.back(k))?;
        states.push(p);
    }
    Ok(OrbitHistory::new(states))
}

/// `Σ_{n=-m}^{F} 2^{-|n|} d(x_n, y_n)` with forward terms computed by iteration.
pub fn history_metric(
    h1: &OrbitHistory,
    h2: &OrbitHistory,
    forward_window: usize,
    system: &SystemSpec,
) -> Result<f64> {
    if h1.depth() != h2.depth() {
        return Err(Error::DepthMismatch(h1.depth(), h2.depth()));
    }
    let mut total = 0.0;
    let mut w = 1.0;
    for k in 0..=h1.depth() {
        total += w * h1.back(k).distance(&h2.back(k));
        w *= 0.5;
    }
    let (mut x, mut y) = (h1.head(), h2.head());
    let mut w = 0.5;
    for _ in 0..forward_window {
        x = system.apply(&x);
        y = system.apply(&y);
        total += w * x.distance(&y);
        w *= 0.5;
    }
    Ok(total)
}

/// `τ^k x̃` truncated to the available depth.
///
/// Forward shifts keep the depth and drop the oldest states; backward shifts
/// drop the newest `|k|` states.
pub fn shift(system: &SystemSpec, h: &OrbitHistory, k: isize) -> Result<OrbitHistory> {
    let m = h.depth();
    if k >= 0 {
        let k = k as usize;
        let mut fwd = Vec::with_capacity(k);
        let mut x = h.head();
        for _ in 0..k {
            x = system.apply(&x);
            fwd.push(x);
        }
        let mut states: Vec<TorusPoint> = fwd.into_iter().rev().collect();
        states.extend_from_slice(&h.states);
        states.truncate(m + 1);
        Ok(OrbitHistory::new(states))
    } else {
        let back = k.unsigned_abs();
        if back > m {
            return Err(Error::InsufficientDepth { requested: back, depth: m });
        }
        Ok(OrbitHistory::new(h.states[back..].to_vec()))
    }
}

/// `max_{0≤i<n} d(f^i x, f^i y)`.
pub fn bowen_distance(system: &SystemSpec, x: &TorusPoint, y: &TorusPoint, n: usize) -> f64 {
    let (mut a, mut b) = (*x, *y);
    let mut best = a.distance(&b);
    for _ in 1..n {
        a = system.apply(&a);
        b = system.apply(&b);
        best = best.max(a.distance(&b));
    }
    best
}

/// Candidate offsets for the shadowing-set sampler: segments along the
/// coordinate axes plus random points of the ε-ball. Independent of the window.
fn gamma_offsets(dim: usize, eps: f64, budget: usize) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]];
    let per_axis = (budget / (2 * dim)).max(2);
    for axis in 0..dim {
        for j in 0..per_axis {
            let t = eps * (1.0 - 1e-9) * (2.0 * (j as f64 + 0.5) / per_axis as f64 - 1.0);
            let mut v = [0.0; 3];
            v[axis] = t;
            out.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(GAMMA_SEED);
    let target = budget.max(out.len() + 1);
    while out.len() < target {
        let mut v = [0.0; 3];
        for vi in v.iter_mut().take(dim) {
            *vi = eps * (2.0 * rng.gen::<f64>() - 1.0);
        }
        if crate::linalg::norm(&v) < eps {
            out.push(v);
        }
    }
    out
}

/// Diameter of a sampled approximation of `Γ_ε(x̃)`: points `y_0` near `x_0`
/// whose forward orbit and nearest-branch backward orbit stay ε-close to the
/// reference for `-m ≤ n ≤ m`.
///
/// The candidate sample does not depend on `m`, so the result is
/// nonincreasing in the window.
pub fn gamma_diameter(system: &SystemSpec, h: &OrbitHistory, eps: f64, m: usize, sample_budget: usize) -> f64 {
    if eps <= 0.0 || h.depth() < m {
        return 0.0;
    }
    let x0 = h.head();
    let forward = system.orbit(&x0, m + 1);
    let mut survivors: Vec<TorusPoint> = Vec::new();
    'cand: for v in gamma_offsets(system.dim(), eps, sample_budget) {
        let y0 = x0.translate(&v);
        if y0.distance(&x0) >= eps {
            continue;
        }
        let mut y = y0;
        for xf in forward.iter().skip(1) {
            y = system.apply(&y);
            if y.distance(xf) >= eps {
                continue 'cand;
            }
        }
        let mut y = y0;
        for k in 0..m {
            y = match system.local_preimage(&y, &h.back(k + 1), &h.back(k)) {
                Ok(p) => p,
                Err(_) => continue 'cand,
            };
            if y.distance(&h.back(k + 1)) >= eps {
                continue 'cand;
            }
        }
        survivors.push(y0);
    }
    let mut diam: f64 = 0.0;
    for i in 0..survivors.len() {
        for j in 0..i {
            diam = diam.max(survivors[i].distance(&survivors[j]));
        }
    }
    diam
}

/// Empirical window for the natural-extension metric: histories whose states
/// stay within `delta` for `|n| ≤ j` are within `eps` in the history metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowCalibration {
    pub delta: f64,
    pub j: usize,
    /// Largest history distance seen over the sampled close pairs.
    pub max_observed: f64,
    pub samples: usize,
}

/// Picks `(δ, J)` from the geometric tail bound and checks it on sampled pairs.
pub fn calibrate_window(system: &SystemSpec, eps: f64, samples: usize, seed: u64) -> Result<WindowCalibration> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let diam = torus_diameter(system.dim());
    let j = ((4.0 * diam / eps).log2().ceil().max(0.0)) as usize;
    let delta = eps / 6.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_observed: f64 = 0.0;
    let mut used = 0;
    for _ in 0..samples {
        let hx = random_history(system, j, &mut rng)?;
        let mut v = [0.0; 3];
        for vi in v.iter_mut().take(system.dim()) {
            *vi = (2.0 * rng.gen::<f64>() - 1.0) / (system.dim() as f64).sqrt();
        }
        // Largest dyadic scale along v that keeps the pair δ-close on the window.
        let mut scale = delta;
        for _ in 0..64 {
            let y0 = hx.head().translate(&crate::linalg::scale(&v, scale));
            let hy = lift_near(system, y0, &hx)?;
            let close_back = (0..=j).all(|k| hx.back(k).distance(&hy.back(k)) < delta);
            let close_fwd = bowen_distance(system, &hx.head(), &hy.head(), j + 1) < delta;
            if close_back && close_fwd {
                used += 1;
                max_observed = max_observed.max(history_metric(&hx, &hy, j, system)?);
                break;
            }
            scale *= 0.5;
        }
    }
    Ok(WindowCalibration { delta, j, max_observed, samples: used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bundled::*;
    use proptest::prelude::*;

    #[test]
    fn enumerate_counts() {
        let f = doubling();
        let hs = extend_history(&f, TorusPoint::new(&[0.0]), 2, &BranchPolicy::EnumerateAll { cap: 100 }).unwrap();
        assert_eq!(hs.len(), 4);
        assert!(hs.iter().all(|h| h.is_consistent(&f)));
        let g = center_linear();
        let hs = extend_history(&g, TorusPoint::new(&[0.1, 0.2, 0.3]), 4, &BranchPolicy::EnumerateAll { cap: 100 })
            .unwrap();
        assert_eq!(hs.len(), 81);
        assert!(hs.iter().all(|h| h.is_consistent(&g)));
        let err = extend_history(&g, TorusPoint::origin(3), 20, &BranchPolicy::EnumerateAll { cap: DEFAULT_BRANCH_CAP });
        assert!(matches!(err, Err(Error::BranchExplosion { .. })));
    }

    #[test]
    fn fixed_point_history_is_constant() {
        let f = anosov_endomorphism();
        let q = TorusPoint::origin(2);
        let h = extend_history(&f, q, 5, &BranchPolicy::Fixed(vec![0])).unwrap().remove(0);
        assert!(h.states().iter().all(|s| *s == q));
        assert_eq!(shift(&f, &h, 3).unwrap(), h);
    }

    #[test]
    fn metric_examples() {
        let f = doubling();
        let a = OrbitHistory::constant(TorusPoint::new(&[0.0]), 0);
        let b = OrbitHistory::constant(TorusPoint::new(&[0.2]), 0);
        assert!((history_metric(&a, &b, 0, &f).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(history_metric(&a, &a, 5, &f).unwrap(), 0.0);
        let rot = product_with_rotation();
        // Rotation-only offsets keep a constant distance along the whole orbit.
        let x = TorusPoint::origin(3);
        let y = TorusPoint::new(&[0.0, 0.0, 0.1]);
        let hx = OrbitHistory::new(vec![x, rot.local_preimage(&x, &x, &rot.apply(&x)).unwrap()]);
        let hy = lift_near(&rot, y, &hx).unwrap();
        let got = history_metric(&hx, &hy, 1, &rot).unwrap();
        assert!((got - 0.1 * (1.0 + 0.5 + 0.5)).abs() < 1e-12, "{got}");
    }

    #[test]
    fn shift_examples() {
        let f = anosov_endomorphism();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_history(&f, 6, &mut rng).unwrap();
        assert_eq!(shift(&f, &h, 0).unwrap(), h);
        let s = shift(&f, &h, 1).unwrap();
        assert_eq!(s.head(), f.apply(&h.head()));
        assert_eq!(s.depth(), 6);
        let back = shift(&f, &s, -1).unwrap();
        assert_eq!(back.states(), &h.states()[..6]);
        assert!(matches!(shift(&f, &h, -7), Err(Error::InsufficientDepth { .. })));
    }

    #[test]
    fn bowen_distance_doubling() {
        let f = doubling();
        let x = TorusPoint::new(&[0.0]);
        assert_eq!(bowen_distance(&f, &x, &x, 5), 0.0);
        for n in 1..10 {
            let y = TorusPoint::new(&[1.0 / 2f64.powi(n as i32 + 2)]);
            assert_eq!(bowen_distance(&f, &x, &y, n), 0.125);
        }
        let y = TorusPoint::new(&[0.3]);
        assert!((bowen_distance(&f, &x, &y, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn columnar_round_trip() {
        let f = center_linear();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_history(&f, 5, &mut rng).unwrap();
        let back = OrbitHistory::from_columnar(&h.to_columnar()).unwrap();
        assert_eq!(back, h);
        assert!(OrbitHistory::from_columnar("depth 1\ndim 1\n0.5\n").is_err());
    }

    #[test]
    fn gamma_doubling_collapses() {
        let f = doubling();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_history(&f, 20, &mut rng).unwrap();
        let eps = 0.1;
        let d = gamma_diameter(&f, &h, eps, 20, 200);
        assert!(d <= 2.0 * eps * 2f64.powi(-20), "{d}");
    }

    #[test]
    fn gamma_center_linear_shrinks() {
        let f = center_linear();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_history(&f, 30, &mut rng).unwrap();
        let d0 = gamma_diameter(&f, &h, 1e-3, 0, 200);
        let d30 = gamma_diameter(&f, &h, 1e-3, 30, 200);
        assert!(d0 >= 10.0 * d30, "{d0} {d30}");
    }

    #[test]
    fn gamma_product_plateau() {
        let f = product_with_rotation();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_history(&f, 30, &mut rng).unwrap();
        let eps = 1e-2;
        let d = gamma_diameter(&f, &h, eps, 30, 200);
        assert!(d > 1.9 * eps && d < 2.0 * eps, "{d}");
    }

    #[test]
    fn calibration_bound_holds() {
        let f = center_linear();
        let c = calibrate_window(&f, 0.05, 50, 3).unwrap();
        assert!(c.samples > 0);
        assert!(c.max_observed < 0.05);
    }

    fn arb_history(seed: u64) -> OrbitHistory {
        let f = anosov_endomorphism();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_history(&f, 6, &mut rng).unwrap()
    }

    proptest! {
        #[test]
        fn metric_axioms(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, fw in 0usize..4) {
            let f = anosov_endomorphism();
            let (x, y, z) = (arb_history(a), arb_history(b), arb_history(c));
            let dxy = history_metric(&x, &y, fw, &f).unwrap();
            let dyx = history_metric(&y, &x, fw, &f).unwrap();
            let dxz = history_metric(&x, &z, fw, &f).unwrap();
            let dyz = history_metric(&y, &z, fw, &f).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(history_metric(&x, &x, fw, &f).unwrap(), 0.0);
            prop_assert!(dxz <= dxy + dyz + 1e-12);
            prop_assert!(dxy <= 3.0 * torus_diameter(2));
        }

        #[test]
        fn metric_monotone_in_window(a in 0u64..1000, b in 0u64..1000) {
            let f = anosov_endomorphism();
            let (x, y) = (arb_history(a), arb_history(b));
            let mut prev = 0.0;
            for fw in 0..6 {
                let d = history_metric(&x, &y, fw, &f).unwrap();
                prop_assert!(d >= prev);
                prev = d;
            }
        }

        #[test]
        fn shift_conjugacy(seed in 0u64..1000, k in 1isize..5) {
            let f = center_linear();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_history(&f, 8, &mut rng).unwrap();
            let s1 = shift(&f, &h, 1).unwrap();
            prop_assert_eq!(s1.head(), f.apply(&h.head()));
            let sk = shift(&f, &h, k).unwrap();
            prop_assert!(sk.is_consistent(&f));
        }

        #[test]
        fn gamma_monotone_in_window(seed in 0u64..200) {
            let f = product_with_rotation();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_history(&f, 12, &mut rng).unwrap();
            let mut prev = f64::INFINITY;
            for m in [0, 2, 4, 8, 12] {
                let d = gamma_diameter(&f, &h, 0.02, m, 60);
                prop_assert!(d <= prev);
                prev = d;
            }
        }
    }
}
