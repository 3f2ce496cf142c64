//! Unstable and stable pressure from separated sets inside one-dimensional
//! leaves.
//!
//! Leaves are polylines in lifted coordinates. The leaf metric `d_n` is the
//! largest arc length, over times `0..n`, between the images of two points;
//! arc lengths at every time are tabulated along the time-0 polyline, so a
//! separated set is a set of positions on that polyline.

use rayon::prelude::*;

use super::{assemble, birkhoff_sum, check_range, check_scale, LogSum, Method, Potential, PressureEstimate};
use crate::cocycle::{estimate_stable_direction, estimate_unstable_direction, DEFAULT_LOOKAHEAD};
use crate::error::{Error, Result};
use crate::inverse_limit::{lift_near, shift, OrbitHistory};
use crate::linalg::{self, Vec3};
use crate::systems::{SystemSpec, TorusPoint};

const MAX_POLYLINE_POINTS: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq)]
pub struct LeafOptions {
    /// Points on the initial polyline (at least 16).
    pub resolution: usize,
    /// Largest separated set enumerated point by point; larger sets are
    /// counted in closed form and their partition sum is estimated from a
    /// stratified subsample.
    pub explicit_cap: usize,
    pub subsample: usize,
    /// Largest number of stable leaf components.
    pub branch_cap: usize,
    pub lookahead: usize,
    /// Backward steps used to grow unstable disks.
    pub seed_depth: usize,
    pub seed: u64,
}

impl Default for LeafOptions {
    fn default() -> Self {
        LeafOptions {
            resolution: 513,
            explicit_cap: 200_000,
            subsample: 4096,
            branch_cap: 1 << 16,
            lookahead: DEFAULT_LOOKAHEAD,
            seed_depth: 4,
            seed: 0,
        }
    }
}

/// Polyline approximation of a local unstable leaf `W^u(x̃, δ)`.
#[derive(Clone, Debug)]
pub struct UnstableDisk {
    /// Continuous lift of the polyline.
    pub lifts: Vec<Vec3>,
    /// Signed arc length from `x_0`.
    pub arc: Vec<f64>,
    /// Index of `x_0`.
    pub center: usize,
    /// Parameter of each point on the seed segment at depth `seed_depth`.
    pub seed_params: Vec<f64>,
    pub seed_depth: usize,
    dim: usize,
}

impl UnstableDisk {
    pub fn len(&self) -> usize {
        self.lifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifts.is_empty()
    }

    pub fn point(&self, i: usize) -> TorusPoint {
        TorusPoint::from_lift(&self.lifts[i], self.dim)
    }

    /// History of the i-th point: the backward orbit along the leaf, which
    /// follows the branches of the base history.
    pub fn history_of(&self, system: &SystemSpec, i: usize, reference: &OrbitHistory) -> Result<OrbitHistory> {
        lift_near(system, self.point(i), reference)
    }
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

fn cumulative_arc(lifts: &[Vec3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(lifts.len());
    out.push(0.0);
    for w in lifts.windows(2) {
        let last = *out.last().expect("nonempty");
        out.push(last + linalg::norm(&linalg::sub(&w[1], &w[0])));
    }
    out
}

/// Grows `W^u(x̃, radius)`: a short segment along `E^u` at `x_{-k}` is pushed
/// forward `k` steps in lifted coordinates, refined until consecutive points
/// are closer than `2·radius/resolution`, and trimmed to intrinsic radius.
pub fn grow_unstable_disk(
    system: &SystemSpec,
    h: &OrbitHistory,
    radius: f64,
    resolution: usize,
) -> Result<UnstableDisk> {
    grow_with_depth(system, h, radius, resolution, 4)
}

fn grow_with_depth(
    system: &SystemSpec,
    h: &OrbitHistory,
    radius: f64,
    resolution: usize,
    seed_depth: usize,
) -> Result<UnstableDisk> {
    check_scale("radius", radius)?;
    if resolution < 16 {
        return Err(Error::InvalidInput("disk resolution must be at least 16".into()));
    }
    let d = system.dim();
    let k = seed_depth.min(h.depth());
    let past = shift(system, h, -(k as isize))?;
    let dir = estimate_unstable_direction(system, &past)?;
    let mut growth = 1.0;
    {
        let mut v = dir;
        for j in (1..=k).rev() {
            v = system.jacobian(&h.back(j)).mul_vec(&v);
        }
        growth *= linalg::norm(&v);
    }
    let x0 = h.head().padded();
    let eval = |t: f64| -> Vec3 {
        let mut off = linalg::scale(&dir, t);
        for j in (1..=k).rev() {
            off = system.lift_increment(&h.back(j), &off);
        }
        linalg::add(&x0, &off)
    };
    let target = 2.0 * radius / resolution as f64;
    let m = resolution | 1;
    let mut r0 = 1.5 * radius / growth;
    for _ in 0..40 {
        let mut ts = linspace(-r0, r0, m);
        ts[m / 2] = 0.0;
        let mut pts: Vec<Vec3> = ts.iter().map(|&t| eval(t)).collect();
        loop {
            let mut nt = Vec::with_capacity(ts.len() * 2);
            let mut np = Vec::with_capacity(ts.len() * 2);
            let mut refined = false;
            for j in 0..ts.len() {
                nt.push(ts[j]);
                np.push(pts[j]);
                if j + 1 < ts.len() && linalg::norm(&linalg::sub(&pts[j + 1], &pts[j])) > target {
                    let tm = 0.5 * (ts[j] + ts[j + 1]);
                    nt.push(tm);
                    np.push(eval(tm));
                    refined = true;
                }
            }
            ts = nt;
            pts = np;
            if ts.len() > MAX_POLYLINE_POINTS {
                return Err(Error::ResamplingOverflow(MAX_POLYLINE_POINTS));
            }
            if !refined {
                break;
            }
        }
        let c = ts.iter().position(|&t| t == 0.0).expect("zero parameter kept");
        let cum = cumulative_arc(&pts);
        let arc: Vec<f64> = cum.iter().map(|a| a - cum[c]).collect();
        if arc[0] > -radius || arc[arc.len() - 1] < radius {
            r0 *= 2.0;
            continue;
        }
        let lo = arc.partition_point(|&a| a < -radius);
        let hi = arc.partition_point(|&a| a <= radius);
        let interp = |i: usize, j: usize, s: f64| {
            let w = (s - arc[i]) / (arc[j] - arc[i]);
            ts[i] + w * (ts[j] - ts[i])
        };
        let t_lo = interp(lo - 1, lo, -radius);
        let t_hi = interp(hi - 1, hi, radius);
        let mut seed_params = vec![t_lo];
        seed_params.extend_from_slice(&ts[lo..hi]);
        seed_params.push(t_hi);
        let mut lifts = vec![eval(t_lo)];
        lifts.extend_from_slice(&pts[lo..hi]);
        lifts.push(eval(t_hi));
        let mut arc_out = vec![-radius];
        arc_out.extend_from_slice(&arc[lo..hi]);
        arc_out.push(radius);
        return Ok(UnstableDisk {
            lifts,
            arc: arc_out,
            center: c - lo + 1,
            seed_params,
            seed_depth: k,
            dim: d,
        });
    }
    Err(Error::ResamplingOverflow(MAX_POLYLINE_POINTS))
}

/// Arc-length tables `L_i` (i < n) of the images of a time-0 polyline.
fn forward_arc_tables(system: &SystemSpec, lifts: &[Vec3], n: usize) -> Vec<Vec<f64>> {
    let d = system.dim();
    let seg: Vec<Vec<f64>> = (0..lifts.len() - 1)
        .into_par_iter()
        .map(|j| {
            let mid = TorusPoint::from_lift(&linalg::scale(&linalg::add(&lifts[j], &lifts[j + 1]), 0.5), d);
            let mut v = linalg::sub(&lifts[j + 1], &lifts[j]);
            let mut y = mid;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push(linalg::norm(&v));
                if i + 1 < n {
                    v = system.jacobian(&y).mul_vec(&v);
                    y = system.apply(&y);
                }
            }
            out
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut t = Vec::with_capacity(lifts.len());
            t.push(0.0);
            for s in &seg {
                let last = *t.last().expect("nonempty");
                t.push(last + s[i]);
            }
            t
        })
        .collect()
}

fn value_at(table: &[f64], pos: f64) -> f64 {
    let j = (pos.floor() as usize).min(table.len() - 1);
    if j + 1 >= table.len() {
        return table[table.len() - 1];
    }
    let w = pos - j as f64;
    table[j] + w * (table[j + 1] - table[j])
}

/// Smallest fractional index at which `table` reaches `value`.
fn position_of(table: &[f64], value: f64) -> Option<f64> {
    let j = table.partition_point(|&v| v < value);
    if j == 0 {
        return Some(0.0);
    }
    if j == table.len() {
        return None;
    }
    let span = table[j] - table[j - 1];
    if span <= 0.0 {
        return Some(j as f64);
    }
    Some((j - 1) as f64 + (value - table[j - 1]) / span)
}

/// Greedy `(n, ε)`-separated positions along a leaf under the max-over-times
/// arc metric. Returns the count, the positions whose Birkhoff sums enter
/// `Λ`, and the log of the weight each of those carries.
fn leaf_selection(tables: &[Vec<f64>], eps: f64, explicit_cap: usize, subsample: usize) -> (u64, Vec<f64>, f64) {
    let step = eps * (1.0 + 1e-12);
    let totals: Vec<f64> = tables.iter().map(|t| t[t.len() - 1]).collect();
    let bound: f64 = totals.iter().map(|t| t / step).sum::<f64>() + 1.0;
    if bound <= explicit_cap as f64 {
        let mut u = 0.0;
        let mut out = vec![0.0];
        loop {
            let mut next = f64::INFINITY;
            for t in tables {
                if let Some(w) = position_of(t, value_at(t, u) + step) {
                    next = next.min(w);
                }
            }
            if !next.is_finite() || next <= u {
                break;
            }
            out.push(next);
            u = next;
        }
        return (out.len() as u64, out, 0.0);
    }
    let (top, total) = totals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &t)| if t > acc.1 { (i, t) } else { acc });
    let count = (total / step).floor() as u64 + 1;
    let m = subsample.clamp(1, count as usize);
    let positions = (0..m)
        .map(|q| {
            let j = ((q as f64 + 0.5) * count as f64 / m as f64).floor();
            position_of(&tables[top], j * step).unwrap_or((tables[top].len() - 1) as f64)
        })
        .collect();
    (count, positions, (count as f64 / m as f64).ln())
}

fn point_at(lifts: &[Vec3], pos: f64, dim: usize) -> TorusPoint {
    let j = (pos.floor() as usize).min(lifts.len() - 2);
    let w = pos - j as f64;
    let p = linalg::add(&linalg::scale(&lifts[j], 1.0 - w), &linalg::scale(&lifts[j + 1], w));
    TorusPoint::from_lift(&p, dim)
}

fn log_lambda(system: &SystemSpec, phi: &Potential, lifts: &[Vec3], positions: &[f64], n: usize) -> f64 {
    let d = system.dim();
    let sums: Vec<f64> = positions
        .par_iter()
        .map(|&p| birkhoff_sum(system, phi, &point_at(lifts, p, d), n))
        .collect();
    let mut acc = LogSum::new();
    for s in sums {
        acc.add(s);
    }
    acc.value()
}

/// Slope estimate of `P^u(f, φ, x̃, δ, ε)` from `(n, ε)` separated sets in
/// the unstable disk of radius δ through `x̃`.
pub fn unstable_pressure_estimate(
    system: &SystemSpec,
    phi: &Potential,
    h: &OrbitHistory,
    delta: f64,
    eps: f64,
    n_range: (usize, usize),
    opts: &LeafOptions,
) -> Result<PressureEstimate> {
    check_range(n_range)?;
    check_scale("eps", eps)?;
    phi.check_dim(system.dim())?;
    let disk = grow_with_depth(system, h, delta, opts.resolution, opts.seed_depth)?;
    let mut rows = Vec::new();
    let mut samples = 0u64;
    for n in n_range.0..=n_range.1 {
        let tables = forward_arc_tables(system, &disk.lifts, n);
        let (count, positions, log_w) = leaf_selection(&tables, eps, opts.explicit_cap, opts.subsample);
        samples += positions.len() as u64;
        let ll = log_w + log_lambda(system, phi, &disk.lifts, &positions, n);
        rows.push((n, count, ll));
    }
    Ok(assemble(rows, (delta, eps, Method::UnstableDisk, opts.seed), samples, Vec::new()))
}

struct Component {
    lifts: Vec<Vec3>,
    arc: Vec<f64>,
    parent: usize,
}

fn pull_back(system: &SystemSpec, lifts: &[Vec3], branch: usize) -> Result<Vec<Vec3>> {
    let d = system.dim();
    let y0 = TorusPoint::from_lift(&lifts[0], d);
    let mut pre = system.preimages(&y0)?[branch];
    let mut img = y0;
    let mut out = Vec::with_capacity(lifts.len());
    out.push(pre.padded());
    for l in &lifts[1..] {
        let y = TorusPoint::from_lift(l, d);
        let p = system.local_preimage(&y, &pre, &img)?;
        let last = *out.last().expect("nonempty");
        out.push(linalg::add(&last, &p.lift_diff(&pre)));
        pre = p;
        img = y;
    }
    Ok(out)
}

fn stable_levels(
    system: &SystemSpec,
    x: &TorusPoint,
    dir: &Vec3,
    delta: f64,
    levels: usize,
    resolution: usize,
) -> Result<Vec<Vec<Component>>> {
    let base = x.padded();
    let lifts: Vec<Vec3> = linspace(-delta, delta, resolution).iter().map(|&s| linalg::axpy(&base, s, dir)).collect();
    let arc = cumulative_arc(&lifts);
    let mut out = vec![vec![Component { lifts, arc, parent: 0 }]];
    let deg = system.degree();
    for _ in 0..levels {
        let prev = out.last().expect("level 0 present");
        let next: Vec<Component> = (0..prev.len() * deg)
            .into_par_iter()
            .map(|q| {
                let (p, b) = (q / deg, q % deg);
                let lifts = pull_back(system, &prev[p].lifts, b)?;
                let arc = cumulative_arc(&lifts);
                Ok(Component { lifts, arc, parent: p })
            })
            .collect::<Result<_>>()?;
        out.push(next);
    }
    Ok(out)
}

/// Slope estimate of the stable pressure at `x`: the stable segment of
/// radius δ is pulled back through every preimage branch, and separated sets
/// are formed in each component. Points of different components count as
/// separated.
pub fn stable_pressure_estimate(
    system: &SystemSpec,
    phi: &Potential,
    x: &TorusPoint,
    delta: f64,
    eps: f64,
    n_range: (usize, usize),
    opts: &LeafOptions,
) -> Result<PressureEstimate> {
    check_range(n_range)?;
    check_scale("delta", delta)?;
    check_scale("eps", eps)?;
    phi.check_dim(system.dim())?;
    let dir = estimate_stable_direction(system, x, opts.lookahead)?;
    let deg = system.degree() as f64;
    let requested = deg.powi(n_range.1 as i32);
    if requested > opts.branch_cap as f64 {
        return Err(Error::BranchExplosion { requested, cap: opts.branch_cap });
    }
    let mut resolution = opts.resolution.max(16);
    let levels = loop {
        let levels = stable_levels(system, x, &dir, delta, n_range.1, resolution)?;
        if system.is_affine() {
            break levels;
        }
        let widest = levels[n_range.1]
            .iter()
            .flat_map(|c| c.arc.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max);
        if widest <= delta / 8.0 {
            break levels;
        }
        resolution = 2 * resolution - 1;
        if resolution > MAX_POLYLINE_POINTS {
            return Err(Error::ResamplingOverflow(MAX_POLYLINE_POINTS));
        }
    };
    let mut rows = Vec::new();
    let mut samples = 0u64;
    let mut components = Vec::new();
    for n in n_range.0..=n_range.1 {
        let comps = &levels[n];
        let mut acc = LogSum::new();
        let mut count = 0u64;
        for (ci, c) in comps.iter().enumerate() {
            let mut tables = Vec::with_capacity(n);
            let (mut level, mut idx) = (n, ci);
            for _ in 0..n {
                let comp = &levels[level][idx];
                tables.push(comp.arc.clone());
                idx = comp.parent;
                level -= 1;
            }
            let (k, positions, log_w) = leaf_selection(&tables, eps, opts.explicit_cap, opts.subsample);
            count += k;
            samples += positions.len() as u64;
            acc.add(log_w + log_lambda(system, phi, &c.lifts, &positions, n));
        }
        components.push(comps.len() as u64);
        rows.push((n, count, acc.value()));
    }
    Ok(assemble(rows, (delta, eps, Method::StableBranches, opts.seed), samples, components))
}
