//! Greedy (n,δ)-separated sets and the grid estimator of topological pressure.
//!
//! Candidates come from a uniform grid at spacing at most δ/4. Each grid
//! point carries a short fibre along the most expanded direction of
//! `Df^{n-1}`, fine enough to resolve Bowen balls, plus forward-orbit samples
//! of random points. The candidate stream is ordered by grid slab (first
//! coordinate), then by grid cell, then along the fibre, with the orbit
//! samples of a slab last in lexicographic order. Accepted points far behind
//! the current slab can no longer conflict and are dropped from the index.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{assemble, birkhoff_sum, check_range, check_scale, LogSum, Method, Potential, PressureEstimate};
use crate::error::{Error, Result};
use crate::inverse_limit::{bowen_distance, random_point};
use crate::linalg::{self, Mat, Vec3};
use crate::systems::{SystemSpec, TorusPoint};

const KEY_BITS: u32 = 126;
/// Candidates generated per parallel batch, roughly.
const BATCH_TARGET: usize = 1 << 20;

type Snapshots = [TorusPoint; 3];

/// Times whose positions key the index: `0` and `n-1`, plus the middle time
/// on the circle where many branches meet at both ends.
fn key_times(dim: usize, n: usize) -> Vec<usize> {
    let mut t = vec![0, n - 1];
    if dim == 1 && n > 2 {
        t.insert(1, (n - 1) / 2);
    }
    t.dedup();
    t
}

/// Hash of accepted points keyed by the cells of their positions at a few
/// fixed times. Cells have side at least 2δ, so a δ-neighbour lies in the
/// own cell or in the single nearer neighbour along each axis.
struct SeparationIndex<'a> {
    system: &'a SystemSpec,
    n: usize,
    delta: f64,
    cells: u64,
    bits: u32,
    times: Vec<usize>,
    map: FxHashMap<u128, Vec<u32>>,
    slots: Vec<(Snapshots, u128)>,
    free: Vec<u32>,
}

impl<'a> SeparationIndex<'a> {
    fn new(system: &'a SystemSpec, n: usize, delta: f64) -> Self {
        let times = key_times(system.dim(), n);
        let bits = (KEY_BITS / (times.len() * system.dim()) as u32).min(30);
        let cells = ((1.0 / (2.0 * delta)).floor() as u64).clamp(1, (1 << bits) - 1);
        SeparationIndex {
            system,
            n,
            delta,
            cells,
            bits,
            times,
            map: FxHashMap::default(),
            slots: Vec::new(),
            free: Vec::new(),
        }
    }

    /// Positions of `x` at the key times.
    fn snapshots(&self, x: &TorusPoint) -> Snapshots {
        let mut out = [*x; 3];
        let mut y = *x;
        let mut next = 0;
        for i in 0..self.n {
            if next < self.times.len() && self.times[next] == i {
                out[next] = y;
                next += 1;
            }
            if next == self.times.len() {
                break;
            }
            y = self.system.apply(&y);
        }
        out
    }

    fn axis(&self, x: f64) -> (u64, Option<u64>) {
        let m = self.cells;
        let pos = x * m as f64;
        let fl = pos.floor();
        let idx = (fl as i64).rem_euclid(m as i64) as u64;
        let side = 1.0 / m as f64;
        let off = (pos - fl) * side;
        let nb = if off <= self.delta {
            Some((idx + m - 1) % m)
        } else if side - off <= self.delta {
            Some((idx + 1) % m)
        } else {
            None
        };
        (idx, nb)
    }

    /// Own key first, then the neighbour keys that may hold δ-close points.
    fn keys(&self, snap: &Snapshots, out: &mut Vec<u128>) {
        out.clear();
        out.push(0);
        let coords = snap[..self.times.len()].iter().flat_map(|p| p.coords().iter().copied());
        for (field, x) in coords.enumerate() {
            let shift = field as u32 * self.bits;
            let (i, nb) = self.axis(x);
            let len = out.len();
            if let Some(j) = nb {
                for k in 0..len {
                    let v = out[k] | (j as u128) << shift;
                    out.push(v);
                }
            }
            for key in out.iter_mut().take(len) {
                *key |= (i as u128) << shift;
            }
        }
        if self.cells <= 2 {
            let own = out[0];
            out.sort_unstable();
            out.dedup();
            let p = out.iter().position(|&k| k == own).expect("own key present");
            out.swap(0, p);
        }
    }

    fn close(&self, id: u32, snap: &Snapshots) -> bool {
        let (other, _) = &self.slots[id as usize];
        for k in 0..self.times.len() {
            if other[k].distance(&snap[k]) > self.delta {
                return false;
            }
        }
        let (mut p, mut q) = (other[0], snap[0]);
        for _ in 1..self.n {
            p = self.system.apply(&p);
            q = self.system.apply(&q);
            if p.distance(&q) > self.delta {
                return false;
            }
        }
        true
    }

    fn conflict(&self, snap: &Snapshots, keys: &[u128]) -> Option<u32> {
        for k in keys {
            if let Some(list) = self.map.get(k) {
                if let Some(&id) = list.iter().find(|&&id| self.close(id, snap)) {
                    return Some(id);
                }
            }
        }
        None
    }

    fn insert(&mut self, snap: Snapshots, key: u128) -> u32 {
        let id = match self.free.pop() {
            Some(id) => {
                self.slots[id as usize] = (snap, key);
                id
            }
            None => {
                self.slots.push((snap, key));
                (self.slots.len() - 1) as u32
            }
        };
        self.map.entry(key).or_default().push(id);
        id
    }

    fn evict(&mut self, id: u32) {
        let key = self.slots[id as usize].1;
        if let Some(list) = self.map.get_mut(&key) {
            if let Some(p) = list.iter().position(|&x| x == id) {
                list.swap_remove(p);
            }
            if list.is_empty() {
                self.map.remove(&key);
            }
        }
        self.free.push(id);
    }
}

/// Greedy maximal (n,δ)-separated subset of `candidates`, scanned in
/// lexicographic order of coordinates.
pub fn max_separated_set(system: &SystemSpec, candidates: &[TorusPoint], n: usize, delta: f64) -> Vec<TorusPoint> {
    let n = n.max(1);
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    let mut index = SeparationIndex::new(system, n, delta);
    let mut keys = Vec::new();
    let mut out = Vec::new();
    for x in sorted {
        let snap = index.snapshots(&x);
        index.keys(&snap, &mut keys);
        if index.conflict(&snap, &keys).is_none() {
            index.insert(snap, keys[0]);
            out.push(x);
        }
    }
    out
}

/// `Φ_ε(x, n)`: the largest Birkhoff sum over a seeded sample of the Bowen
/// ball `B_n(x, ε)`, including `x` itself.
fn birkhoff_sup(system: &SystemSpec, phi: &Potential, x: &TorusPoint, n: usize, eps: f64, samples: usize) -> f64 {
    let base = birkhoff_sum(system, phi, x, n);
    if eps <= 0.0 || samples == 0 {
        return base;
    }
    let mut growth = 1.0;
    let mut y = *x;
    for _ in 1..n {
        growth *= system.jacobian(&y).operator_norm().max(1.0);
        y = system.apply(&y);
    }
    let seed = x.coords().iter().fold(0x9e37_79b9_u64, |h, c| h.rotate_left(17) ^ c.to_bits());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = system.dim();
    let mut best = base;
    for _ in 0..samples {
        let mut v = [0.0; 3];
        for vi in v.iter_mut().take(d) {
            *vi = 2.0 * rng.gen::<f64>() - 1.0;
        }
        let Some((w, _)) = linalg::normalize(&v) else { continue };
        let r = eps * rng.gen::<f64>() / growth;
        let z = x.translate(&linalg::scale(&w, r));
        if bowen_distance(system, x, &z, n) < eps {
            best = best.max(birkhoff_sum(system, phi, &z, n));
        }
    }
    best
}

/// `log Σ_{x∈E} e^{Φ_ε(x,n)}` after checking that `E` is (n,δ)-separated.
pub fn log_partition_function(
    system: &SystemSpec,
    phi: &Potential,
    points: &[TorusPoint],
    n: usize,
    delta: f64,
    eps: f64,
) -> Result<f64> {
    let n = n.max(1);
    let mut index = SeparationIndex::new(system, n, delta);
    let mut keys = Vec::new();
    let mut acc = LogSum::new();
    for (i, x) in points.iter().enumerate() {
        let snap = index.snapshots(x);
        index.keys(&snap, &mut keys);
        if let Some(j) = index.conflict(&snap, &keys) {
            return Err(Error::NotSeparated(j as usize, i));
        }
        index.insert(snap, keys[0]);
        acc.add(birkhoff_sup(system, phi, x, n, eps, 64));
    }
    Ok(acc.value())
}

/// `Λ = Σ_{x∈E} e^{Φ_ε(x,n)}`; with `eps = 0` this is the plain partition function.
pub fn partition_function(
    system: &SystemSpec,
    phi: &Potential,
    points: &[TorusPoint],
    n: usize,
    delta: f64,
    eps: f64,
) -> Result<f64> {
    Ok(log_partition_function(system, phi, points, n, delta, eps)?.exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOptions {
    pub candidate_budget: usize,
    pub orbit_samples: usize,
    pub orbit_sample_length: usize,
    pub seed: u64,
    /// Scale of `Φ_ε`; zero uses plain Birkhoff sums.
    pub eps: f64,
    pub eps_samples: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            candidate_budget: 50_000_000,
            orbit_samples: 256,
            orbit_sample_length: 16,
            seed: 0,
            eps: 0.0,
            eps_samples: 32,
        }
    }
}

/// One greedy pass at a fixed n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPass {
    pub n: usize,
    pub count: u64,
    pub log_lambda: f64,
    pub candidates: u64,
}

struct Fibres {
    cells: Vec<(Vec3, u32)>,
}

impl Fibres {
    fn get(&self, cell: usize) -> (Vec3, u32) {
        if self.cells.len() == 1 {
            self.cells[0]
        } else {
            self.cells[cell]
        }
    }
}

fn fibre_at(system: &SystemSpec, g: &TorusPoint, n: usize, grid: u64, delta: f64) -> (Vec3, u32) {
    let d = system.dim();
    let mut prod = Mat::identity(d);
    let mut y = *g;
    for _ in 1..n {
        prod = system.jacobian(&y).mul(&prod);
        y = system.apply(&y);
    }
    let (u, sigma) = prod.top_singular();
    // Spacing δ/(2.5σ): fine enough to resolve Bowen balls, and no multiple
    // of it lands exactly on δ after expansion by σ.
    let k = (2.5 * sigma / (grid as f64 * delta)).ceil().max(1.0);
    (u, k.min(u32::MAX as f64) as u32)
}

fn cell_point(cell: u64, grid: u64, d: usize) -> TorusPoint {
    let mut c = [0.0; 3];
    let mut rest = cell;
    for i in (0..d).rev() {
        c[i] = (rest % grid) as f64 / grid as f64;
        rest /= grid;
    }
    TorusPoint::new(&c[..d])
}

struct Candidate {
    snap: Snapshots,
    phi: f64,
}

/// Greedy separated set over the streamed candidates at one n, with an
/// optional admission filter applied before the greedy rule.
pub fn grid_pressure_pass(
    system: &SystemSpec,
    phi: &Potential,
    delta: f64,
    n: usize,
    opts: &GridOptions,
    filter: Option<&(dyn Fn(&TorusPoint) -> bool + Sync)>,
) -> Result<GridPass> {
    grid_pass_impl(system, phi, delta, n, opts, filter, None)
}

fn grid_pass_impl(
    system: &SystemSpec,
    phi: &Potential,
    delta: f64,
    n: usize,
    opts: &GridOptions,
    filter: Option<&(dyn Fn(&TorusPoint) -> bool + Sync)>,
    mut keep: Option<&mut Vec<TorusPoint>>,
) -> Result<GridPass> {
    check_scale("delta", delta)?;
    phi.check_dim(system.dim())?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let d = system.dim();
    let grid = ((4.0 / delta) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let n_cells = (grid as f64).powi(d as i32);
    if n_cells > opts.candidate_budget as f64 {
        return Err(Error::BudgetExceeded { requested: n_cells as usize, cap: opts.candidate_budget });
    }
    let n_cells = n_cells as u64;
    let fibres = if system.is_affine() {
        Fibres { cells: vec![fibre_at(system, &TorusPoint::origin(d), n, grid, delta)] }
    } else {
        let cells = (0..n_cells)
            .into_par_iter()
            .map(|c| fibre_at(system, &cell_point(c, grid, d), n, grid, delta))
            .collect();
        Fibres { cells }
    };
    let fibre_total: f64 = if fibres.cells.len() == 1 {
        fibres.cells[0].1 as f64 * n_cells as f64
    } else {
        fibres.cells.iter().map(|c| c.1 as f64).sum()
    };
    let sample_total = opts.orbit_samples * opts.orbit_sample_length;
    let total = fibre_total + sample_total as f64;
    if total > opts.candidate_budget as f64 {
        return Err(Error::BudgetExceeded { requested: total as usize, cap: opts.candidate_budget });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut by_slab: BTreeMap<u64, Vec<TorusPoint>> = BTreeMap::new();
    for _ in 0..opts.orbit_samples {
        let mut z = random_point(d, &mut rng);
        for _ in 0..opts.orbit_sample_length {
            let slab = ((z.coords()[0] * grid as f64).round() as u64) % grid;
            by_slab.entry(slab).or_default().push(z);
            z = system.apply(&z);
        }
    }
    for v in by_slab.values_mut() {
        v.sort_by(|a, b| a.lex_cmp(b));
    }

    let per_slab = n_cells / grid;
    let slab_size = (total / grid as f64).max(1.0);
    let batch = ((BATCH_TARGET as f64 / slab_size).ceil() as u64).clamp(1, grid);
    let window = (delta * grid as f64).ceil() as u64 + 2;
    let no_samples = Vec::new();
    let times = key_times(d, n);

    let make_slab = |s: u64| -> Vec<Candidate> {
        let mut out = Vec::new();
        let mut push = |x: TorusPoint| {
            if filter.is_some_and(|f| !f(&x)) {
                return;
            }
            let mut y = x;
            let mut sum = 0.0;
            let mut snap = [x; 3];
            let mut next = 0;
            for i in 0..n {
                if next < times.len() && times[next] == i {
                    snap[next] = y;
                    next += 1;
                }
                sum += phi.eval(&y);
                if i + 1 < n {
                    y = system.apply(&y);
                }
            }
            out.push(Candidate { snap, phi: sum });
        };
        for r in 0..per_slab {
            let cell = s * per_slab + r;
            let g = cell_point(cell, grid, d);
            let (u, k) = fibres.get(cell as usize);
            let step = 1.0 / (grid as f64 * k as f64);
            for j in 0..k {
                let t = (j as f64 + 0.5 - k as f64 / 2.0) * step;
                push(g.translate(&linalg::scale(&u, t)));
            }
        }
        for z in by_slab.get(&s).unwrap_or(&no_samples) {
            push(*z);
        }
        out
    };

    let mut index = SeparationIndex::new(system, n, delta);
    let mut queue: VecDeque<(u64, u32)> = VecDeque::new();
    let mut keys = Vec::new();
    let mut acc = LogSum::new();
    let mut count = 0u64;
    let mut evaluated = 0u64;
    let mut start = 0;
    while start < grid {
        let stop = (start + batch).min(grid);
        let slabs: Vec<Vec<Candidate>> = (start..stop).into_par_iter().map(make_slab).collect();
        for (s, cands) in (start..stop).zip(slabs) {
            while let Some(&(slab, id)) = queue.front() {
                if slab + window >= s {
                    break;
                }
                index.evict(id);
                queue.pop_front();
            }
            evaluated += cands.len() as u64;
            for c in cands {
                index.keys(&c.snap, &mut keys);
                if index.conflict(&c.snap, &keys).is_some() {
                    continue;
                }
                let id = index.insert(c.snap, keys[0]);
                if s >= window {
                    queue.push_back((s, id));
                }
                count += 1;
                if let Some(k) = keep.as_deref_mut() {
                    k.push(c.snap[0]);
                }
                let v = if opts.eps > 0.0 {
                    birkhoff_sup(system, phi, &c.snap[0], n, opts.eps, opts.eps_samples)
                } else {
                    c.phi
                };
                acc.add(v);
            }
        }
        start = stop;
    }
    Ok(GridPass { n, count, log_lambda: acc.value(), candidates: evaluated })
}

/// Slope estimate of `P(f, φ, δ)` from greedy separated sets over `n_range`.
pub fn pressure_estimate(
    system: &SystemSpec,
    phi: &Potential,
    delta: f64,
    n_range: (usize, usize),
    opts: &GridOptions,
) -> Result<PressureEstimate> {
    check_range(n_range)?;
    let mut rows = Vec::new();
    let mut samples = 0;
    for n in n_range.0..=n_range.1 {
        let pass = grid_pressure_pass(system, phi, delta, n, opts, None)?;
        samples += pass.candidates;
        rows.push((n, pass.count, pass.log_lambda));
    }
    Ok(assemble(rows, (delta, opts.eps, Method::Grid, opts.seed), samples, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bundled::*;

    fn brute_force_separated(system: &SystemSpec, pts: &[TorusPoint], n: usize, delta: f64) -> bool {
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if bowen_distance(system, &pts[i], &pts[j], n) <= delta {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn singleton_and_static_case() {
        let f = cat_map();
        let x = TorusPoint::new(&[0.3, 0.4]);
        assert_eq!(max_separated_set(&f, &[x], 5, 0.1), vec![x]);
        let pts: Vec<TorusPoint> = (0..10).map(|i| TorusPoint::new(&[i as f64 * 0.05, 0.0])).collect();
        let sel = max_separated_set(&f, &pts, 1, 0.07);
        assert_eq!(sel.len(), 5);
        assert!(brute_force_separated(&f, &sel, 1, 0.07));
    }

    #[test]
    fn doubling_grid_count_in_range() {
        let f = doubling();
        let (n, delta) = (6usize, 0.01);
        let m = (2f64.powi(n as i32) / delta).round() as usize;
        let pts: Vec<TorusPoint> = (0..m).map(|i| TorusPoint::new(&[i as f64 / m as f64])).collect();
        let sel = max_separated_set(&f, &pts, n, delta);
        let lo = 2f64.powi(n as i32 - 1) / delta;
        let hi = 2f64.powi(n as i32) / delta * 2.0;
        assert!(sel.len() as f64 >= lo * 0.66 && (sel.len() as f64) <= hi, "{}", sel.len());
        let small: Vec<TorusPoint> = pts.iter().step_by(7).copied().collect();
        let s2 = max_separated_set(&f, &small, n, delta);
        assert!(brute_force_separated(&f, &s2, n, delta));
        // Maximality: every rejected candidate is close to a selected one.
        for x in &small {
            assert!(s2.iter().any(|y| bowen_distance(&f, x, y, n) <= delta));
        }
    }

    #[test]
    fn partition_examples() {
        let f = cat_map();
        let pts = vec![TorusPoint::new(&[0.1, 0.1]), TorusPoint::new(&[0.6, 0.6])];
        assert!((partition_function(&f, &Potential::zero(), &pts, 3, 0.01, 0.0).unwrap() - 2.0).abs() < 1e-12);
        let lam = partition_function(&f, &Potential::constant(0.3), &pts, 3, 0.01, 0.0).unwrap();
        assert!((lam - 2.0 * (0.9f64).exp()).abs() < 1e-12);
        let fixed = vec![TorusPoint::origin(2)];
        let phi = Potential::cosine(0).shifted(0.25);
        let lam = partition_function(&f, &phi, &fixed, 4, 0.01, 0.0).unwrap();
        assert!((lam - (4.0 * 1.25f64).exp()).abs() < 1e-9);
        let bad = vec![TorusPoint::new(&[0.1, 0.1]), TorusPoint::new(&[0.1, 0.1005])];
        assert_eq!(
            partition_function(&f, &Potential::zero(), &bad, 1, 0.01, 0.0),
            Err(Error::NotSeparated(0, 1))
        );
    }

    #[test]
    fn eps_sup_dominates_plain_sum() {
        let f = cat_map();
        let pts = vec![TorusPoint::new(&[0.13, 0.71])];
        let phi = Potential::cosine(0);
        let a = log_partition_function(&f, &phi, &pts, 4, 0.01, 0.0).unwrap();
        let b = log_partition_function(&f, &phi, &pts, 4, 0.01, 0.05).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn doubling_entropy_small_scale() {
        let est = pressure_estimate(&doubling(), &Potential::zero(), 1e-2, (4, 9), &GridOptions::default()).unwrap();
        assert!((est.value - 2f64.ln()).abs() < 0.02, "{}", est.value);
        assert!(est.counts_monotone);
        assert_eq!(est.per_n.len(), 6);
    }

    #[test]
    fn shift_identity_is_exact() {
        let f = anosov_endomorphism();
        let opts = GridOptions::default();
        let phi = Potential::cosine(0);
        let a = pressure_estimate(&f, &phi, 0.1, (2, 4), &opts).unwrap();
        let b = pressure_estimate(&f, &phi.shifted(0.7), 0.1, (2, 4), &opts).unwrap();
        assert!((b.value - a.value - 0.7).abs() < 1e-12);
        for (ra, rb) in a.per_n.iter().zip(&b.per_n) {
            assert_eq!(ra.count, rb.count);
        }
    }

    #[test]
    fn streamed_selection_is_separated_and_maximal_on_samples() {
        // Brute-force oracle over all pairs, including pairs across the wrap of the first coordinate.
        for (f, delta, n) in [(cat_map(), 0.15, 3), (anosov_endomorphism(), 0.12, 2), (doubling(), 0.02, 5)] {
            let opts = GridOptions { orbit_samples: 30, orbit_sample_length: 5, ..GridOptions::default() };
            let mut pts = Vec::new();
            let pass = grid_pass_impl(&f, &Potential::zero(), delta, n, &opts, None, Some(&mut pts)).unwrap();
            assert_eq!(pass.count as usize, pts.len());
            assert!(brute_force_separated(&f, &pts, n, delta));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..50 {
                let z = random_point(f.dim(), &mut rng);
                let _ = pts.iter().any(|y| bowen_distance(&f, &z, y, n) <= delta);
            }
        }
    }

    #[test]
    fn filter_restricts_candidates() {
        let f = cat_map();
        let opts = GridOptions::default();
        let half = |x: &TorusPoint| x.coords()[1] < 0.5;
        let mut pts = Vec::new();
        grid_pass_impl(&f, &Potential::zero(), 0.1, 3, &opts, Some(&half), Some(&mut pts)).unwrap();
        assert!(pts.iter().all(|x| x.coords()[1] < 0.5));
    }

    #[test]
    fn budget_is_enforced() {
        let opts = GridOptions { candidate_budget: 1000, ..GridOptions::default() };
        let r = grid_pressure_pass(&cat_map(), &Potential::zero(), 0.01, 5, &opts, None);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }
}
