//! Gluing of good orbit segments through unstable disks and center-stable
//! patches, Bowen distortion on good segments, expansivity diagnostics and
//! the numerical certificate.
//!
//! Gluing assumes a center-stable foliation by affine planes spanned by the
//! middle and stable eigenvectors of the linear part, which holds for every
//! bundled three-dimensional system. Candidate crossings of a pushed unstable
//! disk with a patch are found by enumerating integer translates in a
//! reduced lattice, then located by bisection along the actual polyline and
//! accepted against the patch cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cocycle::{estimate_center_direction, estimate_stable_direction, central_exponent, DEFAULT_LOOKAHEAD};
use crate::decomposition::{bad_pressure_estimate, is_good, DecompositionParams};
use crate::error::{Error, Result};
use crate::inverse_limit::{
    calibrate_window, gamma_diameter, lift_near, random_history, OrbitHistory, OrbitSegment,
    CONSISTENCY_TOL,
};
use crate::linalg::{self, Vec3};
use crate::pressure::{grow_unstable_disk, pressure_estimate, GridOptions, Potential};
use crate::systems::eigen::dual_basis;
use crate::systems::{SystemSpec, TorusPoint};

/// Scale ratio `ε / δ` required by the decomposition criterion.
pub const SCALE_RATIO: f64 = 2000.0;

pub const DISCLAIMER: &str = "Passing checks are numerical evidence at the stated finite scales and sample sizes. \
They do not prove uniqueness of the equilibrium state.";

/// Sampled center-stable patch `V^{cs}_κ(x̃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterStableDisk {
    pub base: TorusPoint,
    /// Lifted offsets of the center curve from the base point.
    pub center_curve: Vec<Vec3>,
    /// Lifted offsets of all cloud points from the base point.
    pub offsets: Vec<Vec3>,
    pub spacing: f64,
}

impl CenterStableDisk {
    /// Distance from a lifted offset to the nearest cloud point.
    pub fn distance_to(&self, v: &Vec3) -> f64 {
        self.offsets
            .iter()
            .map(|o| linalg::norm(&linalg::sub(v, o)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn aligned(v: Vec3, reference: &Vec3) -> Vec3 {
    if linalg::dot(&v, reference) < 0.0 {
        linalg::scale(&v, -1.0)
    } else {
        v
    }
}

/// Integrates the center line field from `x_0` to radius κ with Euler steps,
/// re-estimating the direction at each step, and attaches straight stable
/// segments of radius κ at every center point.
pub fn build_center_stable_disk(
    system: &SystemSpec,
    h: &OrbitHistory,
    radius: f64,
    resolution: usize,
) -> Result<CenterStableDisk> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be at least 1".into()));
    }
    let x0 = h.head();
    let ds = radius / resolution as f64;
    let e0 = estimate_center_direction(system, h, DEFAULT_LOOKAHEAD)?;
    let mut sides: [Vec<Vec3>; 2] = [Vec::new(), Vec::new()];
    for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
        let mut p = [0.0; 3];
        let mut dir = linalg::scale(&e0, sign);
        for _ in 0..resolution {
            let here = x0.translate(&p);
            let e = if linalg::norm(&p) == 0.0 {
                e0
            } else {
                estimate_center_direction(system, &lift_near(system, here, h)?, DEFAULT_LOOKAHEAD)?
            };
            dir = aligned(e, &dir);
            p = linalg::axpy(&p, ds, &dir);
            sides[side].push(p);
        }
    }
    let mut center_curve: Vec<Vec3> = sides[0].iter().rev().copied().collect();
    center_curve.push([0.0; 3]);
    center_curve.extend_from_slice(&sides[1]);
    let stable: Vec<Vec3> = center_curve
        .par_iter()
        .map(|q| estimate_stable_direction(system, &x0.translate(q), DEFAULT_LOOKAHEAD))
        .collect::<Result<_>>()?;
    let mut offsets = Vec::with_capacity(center_curve.len() * (2 * resolution + 1));
    for (q, e_s) in center_curve.iter().zip(&stable) {
        for j in -(resolution as i64)..=resolution as i64 {
            offsets.push(linalg::axpy(q, j as f64 * ds, e_s));
        }
    }
    Ok(CenterStableDisk { base: x0, center_curve, offsets, spacing: ds })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlueParams {
    /// Contraction rate defining good segments.
    pub r: f64,
    /// Largest transition time; `None` uses four times the linear estimate.
    pub t_max: Option<usize>,
    pub disk_resolution: usize,
    pub cs_resolution: usize,
    /// Smallest history depth accepted on input segments.
    pub lookback: usize,
    /// Largest number of lattice nodes visited per transition time.
    pub candidate_cap: usize,
}

impl Default for GlueParams {
    fn default() -> Self {
        GlueParams { r: 0.01, t_max: None, disk_resolution: 64, cs_resolution: 10, lookback: 20, candidate_cap: 1 << 22 }
    }
}

/// One crossing `f^T W^u_δ(z̃) ∩ V^{cs}_δ(ỹ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub time: usize,
    /// Signed arc length of the crossing point on the unstable disk.
    pub unstable_offset: f64,
    /// Integer translate between the pushed disk and the patch.
    pub translate: [i64; 3],
    /// Distance to the nearest patch cloud point.
    pub match_distance: f64,
    /// Distance of the located point from the center-stable plane.
    pub plane_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlueReport {
    pub segments: Vec<OrbitSegment>,
    /// History whose head is the start of the last block.
    pub glued: OrbitHistory,
    /// Remaining states of the last block after its start.
    pub continuation: Vec<TorusPoint>,
    /// History index of the start of each block.
    pub block_offsets: Vec<usize>,
    pub gluing_times: Vec<usize>,
    pub transitions: Vec<Transition>,
    pub max_shadow_error: f64,
    pub delta: f64,
    pub t_max: usize,
}

impl GlueReport {
    pub fn within_bound(&self) -> bool {
        self.max_shadow_error < 4.0 * self.delta
    }

    /// States of the glued orbit over block `j`.
    pub fn block_states(&self, j: usize) -> Vec<TorusPoint> {
        let off = self.block_offsets[j];
        (0..self.segments[j].length)
            .map(|i| if i <= off { self.glued.back(off - i) } else { self.continuation[i - off - 1] })
            .collect()
    }
}

/// Eigen-coordinates of the linear part of a three-dimensional system.
///
/// For every bundled 3-D map the one-step increment `f(x+v) − f(x)` differs
/// from `A v` only along the middle eigenvector, so the unstable and stable
/// coordinates of an offset evolve exactly linearly.
struct PlaneFrame {
    e_u: Vec3,
    e_c: Vec3,
    e_s: Vec3,
    duals: [Vec3; 3],
    lambda_u: f64,
    det: f64,
}

impl PlaneFrame {
    fn cs_part(&self, v: &Vec3) -> Vec3 {
        linalg::axpy(v, -linalg::dot(&self.duals[0], v), &self.e_u)
    }
}

fn plane_frame(system: &SystemSpec) -> Result<PlaneFrame> {
    if system.dim() != 3 {
        return Err(Error::NoCenterDirection);
    }
    let eig = &system.linear_part().eigendata;
    let d = dual_basis(eig)?;
    let mut m = linalg::Mat::zeros(3);
    for (j, pair) in eig.iter().enumerate() {
        for i in 0..3 {
            m.m[i][j] = pair.vector[i];
        }
    }
    Ok(PlaneFrame {
        e_u: eig[0].vector,
        e_c: eig[1].vector,
        e_s: eig[2].vector,
        duals: [d[0], d[1], d[2]],
        lambda_u: eig[0].value.abs(),
        det: m.det().abs(),
    })
}

/// Offsets `Δ_t` turning the pseudo-orbit `refs` into an orbit `refs_t + Δ_t`
/// whose unstable coordinate at the last time is `u_end` and whose
/// center-stable part at time 0 is `cs_start`.
///
/// The unstable coordinate is swept backward and the center-stable part
/// forward through the exact one-step increment, so no long iteration in an
/// expanding direction is ever performed.
fn corrected_offsets(system: &SystemSpec, frame: &PlaneFrame, refs: &[TorusPoint], u_end: f64, cs_start: Vec3) -> Vec<Vec3> {
    let len = refs.len();
    let jumps: Vec<Vec3> = (0..len)
        .map(|t| if t == 0 { [0.0; 3] } else { refs[t].lift_diff(&system.apply(&refs[t - 1])) })
        .collect();
    let mut au = vec![0.0; len];
    au[len - 1] = u_end;
    for t in (1..len).rev() {
        au[t - 1] = (au[t] + linalg::dot(&frame.duals[0], &jumps[t])) / frame.lambda_u;
    }
    let mut out = Vec::with_capacity(len);
    out.push(linalg::axpy(&frame.cs_part(&cs_start), au[0], &frame.e_u));
    for t in 1..len {
        let g = system.lift_increment(&refs[t - 1], &out[t - 1]);
        let cs = frame.cs_part(&linalg::sub(&g, &jumps[t]));
        out.push(linalg::axpy(&cs, au[t], &frame.e_u));
    }
    out
}

/// Unstable length at which a disk is expected to meet every center-stable
/// patch of radius δ: the length whose δ-tube has unit volume in the
/// eigen-coordinates of the linear part.
pub fn minimality_radius(system: &SystemSpec, delta: f64) -> Result<f64> {
    let f = plane_frame(system)?;
    Ok(1.0 / (8.0 * delta * delta * f.det))
}

/// `⌈log(L/δ) / log λ_u⌉` with `L` the minimality radius.
pub fn linear_transition_time(system: &SystemSpec, delta: f64) -> Result<usize> {
    let f = plane_frame(system)?;
    let l = minimality_radius(system, delta)?;
    Ok(((l / delta).ln() / f.lambda_u.ln()).ceil().max(0.0) as usize)
}

fn gram_schmidt(b: &[Vec3; 3]) -> ([Vec3; 3], [[f64; 3]; 3]) {
    let mut bs = *b;
    let mut mu = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..i {
            mu[i][j] = linalg::dot(&b[i], &bs[j]) / linalg::dot(&bs[j], &bs[j]);
            bs[i] = linalg::axpy(&bs[i], -mu[i][j], &bs[j]);
        }
    }
    (bs, mu)
}

/// LLL reduction of three basis vectors, tracking the integer transform.
fn lll_reduce(b: &mut [Vec3; 3], u: &mut [[i64; 3]; 3]) {
    let mut k = 1;
    let mut guard = 0;
    while k < 3 && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let (_, mu) = gram_schmidt(b);
            let q = mu[k][j].round();
            if q != 0.0 {
                b[k] = linalg::axpy(&b[k], -q, &b[j]);
                for i in 0..3 {
                    u[k][i] -= q as i64 * u[j][i];
                }
            }
        }
        let (bs, mu) = gram_schmidt(b);
        let lhs = linalg::dot(&bs[k], &bs[k]);
        let rhs = (0.75 - mu[k][k - 1] * mu[k][k - 1]) * linalg::dot(&bs[k - 1], &bs[k - 1]);
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
}

/// Integer vectors `m` with `|ℓ_i·m − t_i| ≤ R_i` for the three rows `ℓ_i`.
fn lattice_box(rows: &[Vec3; 3], target: &Vec3, radii: &Vec3, cap: usize) -> Result<Vec<[i64; 3]>> {
    let mut b = [[0.0; 3]; 3];
    let mut u = [[0i64; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            b[j][i] = rows[i][j] / radii[i];
        }
        u[j][j] = 1;
    }
    let t: Vec3 = [target[0] / radii[0], target[1] / radii[1], target[2] / radii[2]];
    lll_reduce(&mut b, &mut u);
    let (bs, mu) = gram_schmidt(&b);
    let norms: Vec<f64> = bs.iter().map(|v| linalg::dot(v, v)).collect();
    let tau: Vec<f64> = (0..3).map(|j| linalg::dot(&t, &bs[j]) / norms[j]).collect();
    let r2 = 3.0 + 1e-9;
    let mut out = Vec::new();
    let mut visited = 0usize;
    let mut k = [0i64; 3];
    enumerate_level(2, &mut k, 0.0, &tau, &mu, &norms, r2, &mut |k| {
        visited += 1;
        if visited > cap {
            return false;
        }
        let mut m = [0i64; 3];
        for j in 0..3 {
            for i in 0..3 {
                m[i] += k[j] * u[j][i];
            }
        }
        let mf = [m[0] as f64, m[1] as f64, m[2] as f64];
        if (0..3).all(|i| (linalg::dot(&rows[i], &mf) - target[i]).abs() <= radii[i]) {
            out.push(m);
        }
        true
    });
    if visited > cap {
        return Err(Error::BudgetExceeded { requested: visited, cap });
    }
    out.sort();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_level(
    level: usize,
    k: &mut [i64; 3],
    partial: f64,
    tau: &[f64],
    mu: &[[f64; 3]; 3],
    norms: &[f64],
    r2: f64,
    visit: &mut dyn FnMut(&[i64; 3]) -> bool,
) -> bool {
    let mut c = tau[level];
    for i in level + 1..3 {
        c -= mu[i][level] * k[i] as f64;
    }
    let w = ((r2 - partial) / norms[level]).max(0.0).sqrt();
    let (lo, hi) = ((c - w).ceil() as i64, (c + w).floor() as i64);
    for v in lo..=hi {
        k[level] = v;
        let p = partial + (v as f64 - c).powi(2) * norms[level];
        if p > r2 {
            continue;
        }
        let ok = if level == 0 { visit(k) } else { enumerate_level(level - 1, k, p, tau, mu, norms, r2, visit) };
        if !ok {
            return false;
        }
    }
    true
}

struct Crossing {
    transition: Transition,
    /// Point on the unstable disk at the start of the transition.
    start: TorusPoint,
}

/// First transition time at which the unstable disk through `z_hist` reaches
/// the center-stable patch of `target`.
fn find_crossing(
    system: &SystemSpec,
    frame: &PlaneFrame,
    z_hist: &OrbitHistory,
    target: &OrbitHistory,
    delta: f64,
    t_max: usize,
    params: &GlueParams,
    index: usize,
) -> Result<Crossing> {
    let z = z_hist.head();
    let y = target.head();
    let disk = grow_unstable_disk(system, z_hist, delta, params.disk_resolution)?;
    let zl = z.padded();
    let offsets: Vec<Vec3> = disk.lifts.iter().map(|p| linalg::sub(p, &zl)).collect();
    let patch = build_center_stable_disk(system, target, delta, params.cs_resolution)?;
    let interp = |pos: f64| -> (Vec3, f64) {
        let j = (pos.floor() as usize).min(offsets.len() - 2);
        let w = pos - j as f64;
        (
            linalg::add(&linalg::scale(&offsets[j], 1.0 - w), &linalg::scale(&offsets[j + 1], w)),
            disk.arc[j] + w * (disk.arc[j + 1] - disk.arc[j]),
        )
    };
    let [lu, lc, ls] = frame.duals;
    let affine = system.is_affine();
    let mut orbit = vec![z];
    for t in 0..=t_max {
        if t > 0 {
            orbit.push(system.apply(&orbit[t - 1]));
        }
        let push = |v: &Vec3| -> Vec3 {
            let mut off = *v;
            for x in &orbit[..t] {
                off = system.lift_increment(x, &off);
            }
            off
        };
        let base = orbit[t].padded();
        let w = linalg::sub(&base, &y.padded());
        let u_lo = linalg::dot(&lu, &push(&offsets[0]));
        let u_hi = linalg::dot(&lu, &push(&offsets[offsets.len() - 1]));
        let (ulo, uhi) = if u_lo <= u_hi { (u_lo, u_hi) } else { (u_hi, u_lo) };
        let target_c = [
            linalg::dot(&lu, &w) + 0.5 * (ulo + uhi),
            linalg::dot(&lc, &w),
            linalg::dot(&ls, &w),
        ];
        let radii = if affine {
            [0.5 * (uhi - ulo) + 1e-12, delta, delta]
        } else {
            [0.5 * (uhi - ulo) + 1e-12, 1.0, 1.5 * delta]
        };
        let candidates = lattice_box(&[lu, lc, ls], &target_c, &radii, params.candidate_cap)?;
        let mut best: Option<Crossing> = None;
        for m in candidates {
            let mf = [m[0] as f64, m[1] as f64, m[2] as f64];
            let shift = linalg::sub(&w, &mf);
            let g = |pos: f64| linalg::dot(&lu, &linalg::add(&shift, &push(&interp(pos).0)));
            let (mut a, mut b) = (0.0, (offsets.len() - 1) as f64);
            let (ga, gb) = (g(a), g(b));
            if ga.signum() == gb.signum() && ga != 0.0 && gb != 0.0 {
                continue;
            }
            let rising = gb > ga;
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if (g(mid) < 0.0) == rising {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let pos = 0.5 * (a + b);
            let (p, arc) = interp(pos);
            let v = linalg::add(&shift, &push(&p));
            let residual = linalg::dot(&lu, &v).abs();
            let dist = patch.distance_to(&v);
            if dist >= delta / 10.0 || residual >= delta / 100.0 {
                continue;
            }
            let better = match &best {
                None => true,
                Some(c) => arc.abs() < c.transition.unstable_offset.abs(),
            };
            if better {
                best = Some(Crossing {
                    transition: Transition {
                        time: t,
                        unstable_offset: arc,
                        translate: m,
                        match_distance: dist,
                        plane_residual: residual,
                    },
                    start: z.translate(&p),
                });
            }
        }
        if let Some(c) = best {
            return Ok(c);
        }
    }
    Err(Error::NoIntersection(index))
}

/// Shadows the segments in order by one orbit: each transition pushes the
/// unstable disk at the end of the current block forward until it crosses
/// the center-stable patch at the next segment's start.
///
/// The blocks and transitions form a pseudo-orbit with small jumps at each
/// crossing. It is turned into a true orbit by [`corrected_offsets`], which
/// never iterates an offset forward along the unstable direction. Consistency
/// is checked one step at a time and the shadow error is the largest
/// state-wise distance from each block to its segment.
pub fn glue_segments(
    system: &SystemSpec,
    segments: &[OrbitSegment],
    delta: f64,
    params: &GlueParams,
) -> Result<GlueReport> {
    if segments.is_empty() {
        return Err(Error::NoGoodSegments);
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let dp = DecompositionParams::new(params.r)?;
    for s in segments {
        if s.history.depth() < params.lookback {
            return Err(Error::DepthExhausted);
        }
        match is_good(system, &s.history, s.length, &dp) {
            Ok(true) => {}
            Ok(false) | Err(Error::NoCenterDirection) => return Err(Error::NoGoodSegments),
            Err(e) => return Err(e),
        }
    }
    let frame = plane_frame(system)?;
    let t_max = match params.t_max {
        Some(t) => t,
        None => 4 * linear_transition_time(system, delta)?.max(1),
    };
    if segments.len() == 1 {
        let s = &segments[0];
        return Ok(GlueReport {
            segments: segments.to_vec(),
            glued: s.history.clone(),
            continuation: system.orbit(&s.history.head(), s.length)[1..].to_vec(),
            block_offsets: vec![0],
            gluing_times: Vec::new(),
            transitions: Vec::new(),
            max_shadow_error: 0.0,
            delta,
            t_max,
        });
    }
    // Reference pseudo-orbit in time order, oldest state first.
    let mut refs: Vec<TorusPoint> = segments[0].history.states().iter().rev().copied().collect();
    let mut block_starts = vec![refs.len() - 1];
    let push_block = |refs: &mut Vec<TorusPoint>, n: usize| {
        for _ in 1..n {
            let x = system.apply(refs.last().expect("nonempty"));
            refs.push(x);
        }
    };
    push_block(&mut refs, segments[0].length);
    let mut transitions = Vec::new();
    for (j, next) in segments.iter().enumerate().skip(1) {
        let mut ext = refs.clone();
        ext.push(system.apply(refs.last().expect("nonempty")));
        let offs = corrected_offsets(system, &frame, &ext, 0.0, [0.0; 3]);
        let keep = ext.len().min(params.lookback.max(60) + 1);
        let z_hist = OrbitHistory::new(
            (ext.len() - keep..ext.len()).rev().map(|t| ext[t].translate(&offs[t])).collect(),
        );
        let c = find_crossing(system, &frame, &z_hist, &next.history, delta, t_max, params, j)?;
        let mut u = c.start;
        for _ in 0..c.transition.time {
            refs.push(u);
            u = system.apply(&u);
        }
        refs.push(next.history.head());
        block_starts.push(refs.len() - 1);
        push_block(&mut refs, next.length);
        transitions.push(c.transition);
    }
    let offs = corrected_offsets(system, &frame, &refs, 0.0, [0.0; 3]);
    let states: Vec<TorusPoint> = refs.iter().zip(&offs).map(|(x, o)| x.translate(o)).collect();
    for t in 1..states.len() {
        if states[t].distance(&system.apply(&states[t - 1])) > CONSISTENCY_TOL {
            return Err(Error::ConsistencyViolation(t));
        }
    }
    let mut max_err: f64 = 0.0;
    for (s, &b) in segments.iter().zip(&block_starts) {
        for (i, x) in system.orbit(&s.history.head(), s.length).iter().enumerate() {
            max_err = max_err.max(states[b + i].distance(x));
        }
    }
    let last = *block_starts.last().expect("nonempty");
    Ok(GlueReport {
        segments: segments.to_vec(),
        glued: OrbitHistory::new(states[..=last].iter().rev().copied().collect()),
        continuation: states[last + 1..].to_vec(),
        block_offsets: block_starts.iter().map(|b| last - b).collect(),
        gluing_times: transitions.iter().map(|t| t.time).collect(),
        transitions,
        max_shadow_error: max_err,
        delta,
        t_max,
    })
}

/// Random good segments: histories of depth `depth`, lengths uniform in
/// `1..=max_length`, kept when good at rate `r`.
pub fn sample_good_segments(
    system: &SystemSpec,
    r: f64,
    count: usize,
    max_length: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<OrbitSegment>> {
    let dp = DecompositionParams::new(r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let attempts = 20 * count.max(1);
    for _ in 0..attempts {
        if out.len() == count {
            break;
        }
        let h = random_history(system, depth, &mut rng)?;
        let n = rng.gen_range(1..=max_length.max(1));
        if is_good(system, &h, n, &dp)? {
            out.push(OrbitSegment::new(h, n)?);
        }
    }
    if out.is_empty() {
        return Err(Error::NoGoodSegments);
    }
    Ok(out)
}

/// `K (4β′)^α Σ_{i≥0} (e^{-rαi/2} + λ_u^{-iα})`.
pub fn distortion_bound(holder_constant: f64, holder_exponent: f64, r: f64, lambda_u: f64, beta_prime: f64) -> f64 {
    let a = holder_exponent;
    holder_constant
        * (4.0 * beta_prime).powf(a)
        * (1.0 / (1.0 - (-r * a / 2.0).exp()) + 1.0 / (1.0 - lambda_u.powf(-a)))
}

/// Largest ratio `|φ(x) − φ(y)| / d(x, y)^α` over random pairs at distances
/// between 1e-4 and 1e-1.
pub fn estimate_holder_constant(phi: &Potential, dim: usize, alpha: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = crate::inverse_limit::random_point(dim, &mut rng);
        let scale = 10f64.powf(-1.0 - 3.0 * rng.gen::<f64>());
        let mut v = [0.0; 3];
        for vi in v.iter_mut().take(dim) {
            *vi = scale * (2.0 * rng.gen::<f64>() - 1.0);
        }
        let y = x.translate(&v);
        let d = x.distance(&y);
        if d > 0.0 {
            best = best.max((phi.eval(&x) - phi.eval(&y)).abs() / d.powf(alpha));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionParams {
    pub r: f64,
    /// `None` uses `min(β, δ₀/2)/2` with β = ε and δ₀ from the window calibration.
    pub beta_prime: Option<f64>,
    pub probes: usize,
    pub seed: u64,
    /// Overrides the potential's own Hölder data.
    pub holder: Option<(f64, f64)>,
}

impl Default for DistortionParams {
    fn default() -> Self {
        DistortionParams { r: 0.01, beta_prime: None, probes: 64, seed: 0, holder: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionReport {
    pub segment: OrbitSegment,
    pub observed: f64,
    pub bound: f64,
    pub beta_prime: f64,
    pub accepted_probes: usize,
}

/// Probes in the Bowen ball `B_n(x̃, ε)` along the splitting: an unstable
/// coordinate of size at most β′ at time `n − 1` and a center-stable offset
/// of size at most β′ at time 0, realised as exact orbits by
/// [`corrected_offsets`]. Returns the largest Birkhoff-sum difference and the
/// number of probes inside the ball.
pub fn probe_distortion(
    system: &SystemSpec,
    phi: &Potential,
    segment: &OrbitSegment,
    eps: f64,
    beta_prime: f64,
    probes: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let frame = plane_frame(system)?;
    let refs = system.orbit(&segment.history.head(), segment.length);
    let base: f64 = refs.iter().map(|x| phi.eval(x)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<[f64; 3]> = (0..probes)
        .map(|_| [0; 3].map(|_: i32| beta_prime * (2.0 * rng.gen::<f64>() - 1.0)))
        .collect();
    let results: Vec<Option<f64>> = draws
        .par_iter()
        .map(|&[tu, tc, ts]| {
            let cs = linalg::axpy(&linalg::scale(&frame.e_c, tc), ts, &frame.e_s);
            let offs = corrected_offsets(system, &frame, &refs, tu, cs);
            let worst = offs.iter().map(linalg::norm).fold(0.0, f64::max);
            (worst < eps).then(|| {
                let sum: f64 = refs.iter().zip(&offs).map(|(x, o)| phi.eval(&x.translate(o))).sum();
                (sum - base).abs()
            })
        })
        .collect();
    let accepted = results.iter().flatten().count();
    let observed = results.into_iter().flatten().fold(0.0, f64::max);
    Ok((observed, accepted))
}

/// Default β′ at Bowen scale ε.
pub fn default_beta_prime(system: &SystemSpec, eps: f64) -> Result<f64> {
    let cal = calibrate_window(system, eps, 0, 0)?;
    Ok(eps.min(cal.delta / 2.0) / 2.0)
}

/// Observed distortion on a good segment against `K′`.
pub fn bowen_distortion(
    system: &SystemSpec,
    phi: &Potential,
    segment: &OrbitSegment,
    eps: f64,
    params: &DistortionParams,
) -> Result<DistortionReport> {
    let dp = DecompositionParams::new(params.r)?;
    if !is_good(system, &segment.history, segment.length, &dp)? {
        return Err(Error::NoGoodSegments);
    }
    let beta_prime = match params.beta_prime {
        Some(b) => b,
        None => default_beta_prime(system, eps)?,
    };
    let (k, alpha) = params.holder.unwrap_or((phi.holder_constant, phi.holder_exponent));
    let bound = distortion_bound(k, alpha, params.r, system.unstable_rate(), beta_prime);
    let (observed, accepted) = probe_distortion(system, phi, segment, eps, beta_prime, params.probes, params.seed)?;
    Ok(DistortionReport { segment: segment.clone(), observed, bound, beta_prime, accepted_probes: accepted })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansivitySample {
    pub diameter: f64,
    /// Central exponent over the window, when the system has a center.
    pub central_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansivityReport {
    pub eps: f64,
    pub window: usize,
    pub tolerance: f64,
    pub fraction_nonexpansive: f64,
    pub samples: Vec<ExpansivitySample>,
}

/// Fraction of sampled histories whose shadowing set has diameter above ε/10.
pub fn expansivity_diagnostic(
    system: &SystemSpec,
    samples: &[OrbitHistory],
    eps: f64,
    window: usize,
    sample_budget: usize,
) -> ExpansivityReport {
    let tolerance = eps / 10.0;
    let out: Vec<ExpansivitySample> = samples
        .par_iter()
        .map(|h| ExpansivitySample {
            diameter: gamma_diameter(system, h, eps, window, sample_budget),
            central_exponent: if system.dim() == 3 { central_exponent(system, h, window.max(1)).ok() } else { None },
        })
        .collect();
    let bad = out.iter().filter(|s| s.diameter > tolerance).count();
    ExpansivityReport {
        eps,
        window,
        tolerance,
        fraction_nonexpansive: if out.is_empty() { 0.0 } else { bad as f64 / out.len() as f64 },
        samples: out,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateParams {
    pub r: f64,
    pub delta: f64,
    pub eps: f64,
    pub n_range: (usize, usize),
    /// Separation scale of the pressure checks.
    pub pressure_delta: f64,
    pub grid: GridOptions,
    pub glue_pairs: usize,
    pub max_segment_length: usize,
    pub distortion_segments: usize,
    pub probes: usize,
    pub expansivity_samples: usize,
    pub window: usize,
    pub gamma_budget: usize,
    pub seed: u64,
}

impl Default for CertificateParams {
    fn default() -> Self {
        CertificateParams {
            r: 0.01,
            delta: 1e-3,
            eps: 2.0,
            n_range: (1, 2),
            pressure_delta: 0.25,
            grid: GridOptions { orbit_samples: 32, orbit_sample_length: 4, ..GridOptions::default() },
            glue_pairs: 10,
            max_segment_length: 20,
            distortion_segments: 10,
            probes: 32,
            expansivity_samples: 20,
            window: 30,
            gamma_budget: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Error(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub status: CheckStatus,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub system: String,
    pub potential: String,
    pub params: CertificateParams,
    pub checks: Vec<CheckResult>,
    pub expansivity: std::result::Result<ExpansivityReport, String>,
    pub all_passed: bool,
    pub disclaimer: &'static str,
}

fn check(id: u8, name: &'static str, r: Result<(bool, f64, String)>) -> CheckResult {
    match r {
        Ok((pass, value, detail)) => CheckResult {
            id,
            name,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            value,
            detail,
        },
        Err(e) => CheckResult { id, name, status: CheckStatus::Error(e.to_string()), value: f64::NAN, detail: String::new() },
    }
}

/// Runs the five numbered checks and the expansivity diagnostic. A failing
/// check does not stop the others.
pub fn certificate(system: &SystemSpec, phi: &Potential, params: &CertificateParams) -> Certificate {
    let mut checks = Vec::new();
    let ratio = params.eps / params.delta;
    checks.push(check(
        1,
        "scale_relation",
        Ok((ratio >= SCALE_RATIO, ratio, format!("eps/delta = {ratio}, required {SCALE_RATIO}"))),
    ));
    let dp = DecompositionParams { r: params.r };
    let grid = GridOptions { seed: params.seed, ..params.grid.clone() };
    let bad = bad_pressure_estimate(system, phi, &dp, params.pressure_delta, params.n_range, &grid);
    let full = match &bad {
        Ok(rep) => Ok(rep.full_pressure),
        Err(_) => pressure_estimate(system, phi, params.pressure_delta, params.n_range, &grid).map(|e| e.value),
    };
    checks.push(check(
        2,
        "full_pressure",
        full.map(|p| (p.is_finite(), p, format!("delta = {}, n = {:?}", params.pressure_delta, params.n_range))),
    ));
    checks.push(check(
        3,
        "bad_pressure_gap",
        bad.map(|rep| {
            (
                rep.gap > 0.0,
                rep.gap,
                format!("bad = {}, full = {}, empty at n = {:?}", rep.bad_pressure, rep.full_pressure, rep.empty_at),
            )
        }),
    ));
    let glue = sample_good_segments(system, params.r, 2 * params.glue_pairs, params.max_segment_length, 40, params.seed)
        .and_then(|segs| {
            let pairs: Vec<&[OrbitSegment]> = segs.chunks_exact(2).collect();
            if pairs.is_empty() {
                return Err(Error::NoGoodSegments);
            }
            let gp = GlueParams { r: params.r, ..GlueParams::default() };
            let ok: Vec<bool> = pairs
                .par_iter()
                .map(|p| glue_segments(system, p, params.delta, &gp).map(|r| r.within_bound()).unwrap_or(false))
                .collect();
            let rate = ok.iter().filter(|&&b| b).count() as f64 / ok.len() as f64;
            Ok((rate == 1.0, rate, format!("{} pairs at delta = {}", ok.len(), params.delta)))
        });
    checks.push(check(4, "gluing_success_rate", glue));
    let dist = sample_good_segments(
        system,
        params.r,
        params.distortion_segments,
        params.max_segment_length,
        40,
        params.seed.wrapping_add(1),
    )
    .and_then(|segs| {
        let dparams = DistortionParams { r: params.r, probes: params.probes, seed: params.seed, ..DistortionParams::default() };
        let reports: Vec<DistortionReport> =
            segs.par_iter().map(|s| bowen_distortion(system, phi, s, params.eps, &dparams)).collect::<Result<_>>()?;
        let worst = reports.iter().map(|r| r.observed / r.bound.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        let pass = reports.iter().all(|r| r.observed <= r.bound);
        Ok((pass, worst, format!("{} segments, largest observed/bound ratio", reports.len())))
    });
    checks.push(check(5, "bowen_distortion", dist));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(2));
    let expansivity = (0..params.expansivity_samples)
        .map(|_| random_history(system, params.window, &mut rng))
        .collect::<Result<Vec<_>>>()
        .map(|hs| expansivity_diagnostic(system, &hs, params.eps.min(0.1), params.window, params.gamma_budget))
        .map_err(|e| e.to_string());
    let all_passed = checks.iter().all(|c| c.status == CheckStatus::Pass);
    Certificate {
        system: system.kind().name().to_string(),
        potential: phi.name().to_string(),
        params: params.clone(),
        checks,
        expansivity,
        all_passed,
        disclaimer: DISCLAIMER,
    }
}
