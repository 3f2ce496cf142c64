//! One function per subcommand. Each reads its scales from the run
//! configuration, calls the library and writes its artifacts.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use torus_pressure::decomposition::{r_scan, ScanOptions};
use torus_pressure::inverse_limit::{gamma_diameter, random_history, random_point};
use torus_pressure::linalg::Mat;
use torus_pressure::pressure::{
    combine_max, eigen_entropies, matrix_entropies, pressure_estimate, stable_pressure_estimate,
    unstable_pressure_estimate, GridOptions, LeafOptions, Potential, PressureEstimate,
};
use torus_pressure::specification::{
    certificate, expansivity_diagnostic, glue_segments, sample_good_segments, CertificateParams, CheckStatus,
    GlueParams,
};
use torus_pressure::systems::config::SystemConfig;
use torus_pressure::SystemSpec;

use crate::config::{config_error, Mode, RunConfig};
use crate::report::{
    csv, estimate_json, fmt_f64, num, nums, per_n_csv, point, record, write_json, write_text,
};

pub struct Ctx {
    pub cfg: RunConfig,
    pub system: SystemSpec,
    pub phi: Potential,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let system = cfg.build_system()?;
        let phi = cfg.potential()?;
        phi.check_dim(system.dim()).map_err(|e| config_error(e.to_string()))?;
        Ok(Ctx { cfg, system, phi })
    }

    fn header(&self, command: &str) -> Map<String, Value> {
        let mut m = record(command);
        m.insert("command".into(), Value::from(command));
        m.insert("system".into(), Value::from(self.cfg.system_label.clone()));
        m.insert("system_config".into(), Value::from(self.cfg.system.to_text()));
        m.insert("potential".into(), Value::from(self.phi.name()));
        m.insert("seed".into(), Value::from(self.cfg.seed));
        m.insert("mode".into(), Value::from(self.cfg.mode.name()));
        m
    }

    fn finish(&self, mut m: Map<String, Value>, name: &str) -> Result<()> {
        m.insert("warnings".into(), Value::from(self.cfg.warnings.clone()));
        write_json(&self.cfg.out, name, &Value::Object(m))
    }

    fn grid(&self) -> Result<GridOptions> {
        let d = GridOptions::default();
        Ok(GridOptions {
            candidate_budget: self.cfg.usize_or("candidate_budget", d.candidate_budget)?,
            orbit_samples: self.cfg.usize_or("orbit_samples", d.orbit_samples)?,
            orbit_sample_length: self.cfg.usize_or("orbit_sample_length", d.orbit_sample_length)?,
            seed: self.cfg.seed,
            ..d
        })
    }

    fn leaf(&self) -> Result<LeafOptions> {
        let d = LeafOptions::default();
        Ok(LeafOptions {
            resolution: self.cfg.usize_or("resolution", d.resolution)?,
            explicit_cap: self.cfg.usize_or("explicit_cap", d.explicit_cap)?,
            branch_cap: self.cfg.usize_or("branch_cap", d.branch_cap)?,
            seed: self.cfg.seed,
            ..d
        })
    }

    fn constant_potential(&self) -> Result<f64> {
        self.phi
            .constant_value()
            .ok_or_else(|| config_error("eigen-oracle mode takes only constant potentials"))
    }

    fn eigen_ready(&self) -> Result<()> {
        if self.system.mane().is_some() {
            return Err(config_error("eigen-oracle mode needs a linear or product system"));
        }
        Ok(())
    }
}

/// Separated-set defaults by dimension: scale δ and n range.
fn grid_defaults(dim: usize) -> (f64, (usize, usize)) {
    match dim {
        1 => (1e-3, (8, 14)),
        2 => (0.05, (3, 7)),
        _ => (0.25, (1, 2)),
    }
}

fn oracle_json(value: f64, what: &str, ctx: &Ctx) -> Result<Value> {
    let e = eigen_entropies(&ctx.system)?;
    Ok(json!({
        "value": num(value),
        "method": "eigen-oracle",
        "quantity": what,
        "moduli": nums(&e.moduli),
        "log_degree": num(e.log_degree),
    }))
}

/// `entropy` (zero potential) and `pressure`.
pub fn topological(ctx: &mut Ctx, command: &str) -> Result<()> {
    let phi = if command == "entropy" { Potential::zero() } else { ctx.phi.clone() };
    let mut m = ctx.header(command);
    if command == "entropy" {
        m.insert("potential".into(), Value::from("zero"));
    }
    match ctx.cfg.mode {
        Mode::EigenOracle => {
            ctx.eigen_ready()?;
            let c = if command == "entropy" { 0.0 } else { ctx.constant_potential()? };
            let e = eigen_entropies(&ctx.system)?;
            m.insert("estimate".into(), oracle_json(e.topological + c, "topological", ctx)?);
        }
        Mode::Sets => {
            let (d0, n0) = grid_defaults(ctx.system.dim());
            let delta = ctx.cfg.f64_or("delta", d0)?;
            let n_range = ctx.cfg.n_range(n0)?;
            let grid = GridOptions { eps: ctx.cfg.f64_or("eps", 0.0)?, ..ctx.grid()? };
            let est = pressure_estimate(&ctx.system, &phi, delta, n_range, &grid)?;
            write_text(&ctx.cfg.out, &format!("{command}_per_n.csv"), &per_n_csv(&est))?;
            m.insert("estimate".into(), estimate_json(&est));
        }
    }
    ctx.finish(m, &format!("{command}.json"))
}

fn unstable_sets(ctx: &Ctx, phi: &Potential, n_range: (usize, usize), rng: &mut ChaCha8Rng) -> Result<PressureEstimate> {
    let delta = ctx.cfg.f64_or("delta", 1e-2)?;
    let eps = ctx.cfg.f64_or("eps", 1e-3)?;
    let depth = ctx.cfg.usize_or("depth", 20)?;
    let opts = ctx.leaf()?;
    let ests = (0..ctx.cfg.usize_or("base_points", 1)?.max(1))
        .map(|_| {
            let h = random_history(&ctx.system, depth, rng)?;
            unstable_pressure_estimate(&ctx.system, phi, &h, delta, eps, n_range, &opts)
        })
        .collect::<torus_pressure::Result<Vec<_>>>()?;
    Ok(combine_max(&ests)?)
}

fn stable_sets(ctx: &Ctx, phi: &Potential, n_range: (usize, usize), rng: &mut ChaCha8Rng) -> Result<PressureEstimate> {
    let delta = ctx.cfg.f64_or("delta", 1e-2)?;
    let eps = ctx.cfg.f64_or("eps", 1e-3)?;
    let opts = ctx.leaf()?;
    let ests = (0..ctx.cfg.usize_or("base_points", 1)?.max(1))
        .map(|_| {
            let x = random_point(ctx.system.dim(), rng);
            stable_pressure_estimate(&ctx.system, phi, &x, delta, eps, n_range, &opts)
        })
        .collect::<torus_pressure::Result<Vec<_>>>()?;
    Ok(combine_max(&ests)?)
}

/// `u-pressure` and `s-pressure`.
pub fn leaf_pressure(ctx: &mut Ctx, command: &str) -> Result<()> {
    let unstable = command == "u-pressure";
    let mut m = ctx.header(command);
    match ctx.cfg.mode {
        Mode::EigenOracle => {
            ctx.eigen_ready()?;
            let c = ctx.constant_potential()?;
            let e = eigen_entropies(&ctx.system)?;
            let (v, what) = if unstable { (e.unstable, "unstable") } else { (e.stable, "stable") };
            m.insert("estimate".into(), oracle_json(v + c, what, ctx)?);
        }
        Mode::Sets => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
            let est = if unstable {
                let n = ctx.cfg.n_range((3, 7))?;
                unstable_sets(ctx, &ctx.phi, n, &mut rng)?
            } else {
                let n = ctx.cfg.n_range((4, 8))?;
                stable_sets(ctx, &ctx.phi, n, &mut rng)?
            };
            write_text(&ctx.cfg.out, &format!("{command}_per_n.csv"), &per_n_csv(&est))?;
            m.insert("estimate".into(), estimate_json(&est));
        }
    }
    ctx.finish(m, &format!("{command}.json"))
}

struct GapValue {
    unstable: f64,
    stable: f64,
    detail: Value,
}

fn sets_gap(ctx: &Ctx, system: &SystemSpec, phi: &Potential, seed: u64) -> Result<(GapValue, [PressureEstimate; 2])> {
    let n = ctx.cfg.n_range((4, 8))?;
    let inner = Ctx { cfg: RunConfig { seed, ..ctx.cfg.clone() }, system: system.clone(), phi: phi.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = unstable_sets(&inner, phi, n, &mut rng)?;
    let s = stable_sets(&inner, phi, n, &mut rng)?;
    let detail = json!({ "unstable": estimate_json(&u), "stable": estimate_json(&s) });
    Ok((GapValue { unstable: u.value, stable: s.value, detail }, [u, s]))
}

pub fn gap(ctx: &mut Ctx) -> Result<()> {
    let mut m = ctx.header("gap");
    let g = match ctx.cfg.mode {
        Mode::EigenOracle => {
            ctx.eigen_ready()?;
            let c = ctx.constant_potential()?;
            let e = eigen_entropies(&ctx.system)?;
            m.insert("moduli".into(), nums(&e.moduli));
            m.insert("log_degree".into(), num(e.log_degree));
            // The closed-form difference is evaluated from the center moduli.
            m.insert("gap".into(), num(e.gap));
            GapValue { unstable: e.unstable + c, stable: e.stable + c, detail: Value::Null }
        }
        Mode::Sets => {
            let (g, [u, s]) = sets_gap(ctx, &ctx.system, &ctx.phi, ctx.cfg.seed)?;
            write_text(&ctx.cfg.out, "gap_unstable_per_n.csv", &per_n_csv(&u))?;
            write_text(&ctx.cfg.out, "gap_stable_per_n.csv", &per_n_csv(&s))?;
            m.insert("gap".into(), num(g.unstable - g.stable));
            g
        }
    };
    m.insert("unstable_pressure".into(), num(g.unstable));
    m.insert("stable_pressure".into(), num(g.stable));
    m.insert("estimates".into(), g.detail);
    ctx.finish(m, "gap.json")
}

pub fn decompose(ctx: &mut Ctx) -> Result<()> {
    let d = ScanOptions::default();
    let with_pressure = ctx.system.dim() == 3;
    let opts = ScanOptions {
        segments: ctx.cfg.usize_or("segments", d.segments)?,
        min_length: ctx.cfg.usize_or("min_length", d.min_length)?,
        max_length: ctx.cfg.usize_or("max_length", d.max_length)?,
        depth: ctx.cfg.usize_or("depth", d.depth)?,
        seed: ctx.cfg.seed,
        pressure: if with_pressure {
            Some((ctx.cfg.f64_or("pressure_delta", 0.25)?, ctx.cfg.n_range((1, 2))?, ctx.grid()?))
        } else {
            None
        },
        ..d
    };
    let rs = ctx.cfg.list_or("r_values", &[0.001, 0.005, 0.01, 0.02, 0.05])?;
    if rs.iter().any(|&r| !(r > 0.0)) {
        return Err(config_error("r_values must be positive"));
    }
    let rows = r_scan(&ctx.system, &ctx.phi, &rs, &opts)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![fmt_f64(r.r), fmt_f64(r.fraction_good), fmt_f64(r.bad_pressure), fmt_f64(r.full_pressure), fmt_f64(r.gap)]
        })
        .collect();
    write_text(&ctx.cfg.out, "r_scan.csv", &csv(&["r", "fraction_good", "bad_pressure", "full_pressure", "gap"], &table))?;
    let mut m = ctx.header("decompose");
    m.insert("segments".into(), Value::from(opts.segments));
    m.insert("histogram_edges".into(), nums(&opts.histogram_edges));
    let json_rows = rows
        .iter()
        .map(|r| {
            json!({
                "r": num(r.r),
                "fraction_good": num(r.fraction_good),
                "exponent_histogram": r.exponent_histogram,
                "bad_pressure": num(r.bad_pressure),
                "full_pressure": num(r.full_pressure),
                "gap": num(r.gap),
            })
        })
        .collect();
    m.insert("rows".into(), Value::Array(json_rows));
    ctx.finish(m, "decompose.json")
}

pub fn glue(ctx: &mut Ctx) -> Result<()> {
    let delta = ctx.cfg.f64_or("delta", 1e-3)?;
    let r = ctx.cfg.f64_or("r", 0.01)?;
    let k = ctx.cfg.usize_or("segments", 2)?;
    let segs = sample_good_segments(
        &ctx.system,
        r,
        k,
        ctx.cfg.usize_or("max_length", 20)?,
        ctx.cfg.usize_or("depth", 40)?,
        ctx.cfg.seed,
    )?;
    let rep = glue_segments(&ctx.system, &segs, delta, &GlueParams { r, ..GlueParams::default() })?;
    if ctx.cfg.flag("trace")? {
        write_text(&ctx.cfg.out, "glue_trace.txt", &rep.glued.to_columnar())?;
    }
    let mut m = ctx.header("glue");
    m.insert("delta".into(), num(delta));
    m.insert("r".into(), num(r));
    m.insert("t_max".into(), Value::from(rep.t_max));
    m.insert(
        "segments".into(),
        Value::Array(
            rep.segments.iter().map(|s| json!({ "length": s.length, "start": point(&s.history.head()) })).collect(),
        ),
    );
    m.insert("gluing_times".into(), Value::from(rep.gluing_times.clone()));
    m.insert("block_offsets".into(), Value::from(rep.block_offsets.clone()));
    m.insert(
        "transitions".into(),
        Value::Array(
            rep.transitions
                .iter()
                .map(|t| {
                    json!({
                        "time": t.time,
                        "unstable_offset": num(t.unstable_offset),
                        "translate": t.translate.to_vec(),
                        "match_distance": num(t.match_distance),
                        "plane_residual": num(t.plane_residual),
                    })
                })
                .collect(),
        ),
    );
    m.insert("glued_head".into(), point(&rep.glued.head()));
    m.insert("max_shadow_error".into(), num(rep.max_shadow_error));
    m.insert("within_bound".into(), Value::from(rep.within_bound()));
    ctx.finish(m, "glue.json")
}

pub fn gamma(ctx: &mut Ctx) -> Result<()> {
    let eps = ctx.cfg.f64_or("eps", 1e-2)?;
    let window = ctx.cfg.usize_or("window", 30)?;
    let budget = ctx.cfg.usize_or("gamma_budget", 512)?;
    let windows: Vec<usize> = ctx
        .cfg
        .list_or("windows", &[5.0, 10.0, 20.0, window as f64])?
        .into_iter()
        .map(|w| w as usize)
        .collect();
    if windows.windows(2).any(|w| w[0] > w[1]) {
        return Err(config_error("windows must be nondecreasing"));
    }
    let depth = windows.iter().copied().chain([window]).max().unwrap_or(window);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let hs = (0..ctx.cfg.usize_or("samples", 20)?)
        .map(|_| random_history(&ctx.system, depth, &mut rng))
        .collect::<torus_pressure::Result<Vec<_>>>()?;
    let rep = expansivity_diagnostic(&ctx.system, &hs, eps, window, budget);
    let profiles: Vec<Vec<f64>> =
        hs.iter().map(|h| windows.iter().map(|&w| gamma_diameter(&ctx.system, h, eps, w, budget)).collect()).collect();
    let monotone = profiles.iter().all(|p| p.windows(2).all(|w| w[1] <= w[0]));
    let mut m = ctx.header("gamma");
    m.insert("eps".into(), num(rep.eps));
    m.insert("window".into(), Value::from(rep.window));
    m.insert("tolerance".into(), num(rep.tolerance));
    m.insert("fraction_nonexpansive".into(), num(rep.fraction_nonexpansive));
    m.insert("windows".into(), Value::from(windows));
    m.insert("monotone_in_window".into(), Value::from(monotone));
    let samples = rep
        .samples
        .iter()
        .zip(&profiles)
        .map(|(s, p)| {
            json!({
                "diameter": num(s.diameter),
                "central_exponent": s.central_exponent.map(num),
                "diameter_by_window": nums(p),
            })
        })
        .collect();
    m.insert("samples".into(), Value::Array(samples));
    ctx.finish(m, "gamma.json")
}

pub fn certify(ctx: &mut Ctx) -> Result<()> {
    let d = CertificateParams::default();
    let params = CertificateParams {
        r: ctx.cfg.f64_or("r", d.r)?,
        delta: ctx.cfg.f64_or("delta", d.delta)?,
        eps: ctx.cfg.f64_or("eps", d.eps)?,
        n_range: ctx.cfg.n_range(d.n_range)?,
        pressure_delta: ctx.cfg.f64_or("pressure_delta", d.pressure_delta)?,
        grid: GridOptions {
            candidate_budget: ctx.cfg.usize_or("candidate_budget", d.grid.candidate_budget)?,
            orbit_samples: ctx.cfg.usize_or("orbit_samples", d.grid.orbit_samples)?,
            orbit_sample_length: ctx.cfg.usize_or("orbit_sample_length", d.grid.orbit_sample_length)?,
            ..d.grid.clone()
        },
        glue_pairs: ctx.cfg.usize_or("segments", d.glue_pairs)?,
        max_segment_length: ctx.cfg.usize_or("max_length", d.max_segment_length)?,
        distortion_segments: ctx.cfg.usize_or("segments", d.distortion_segments)?,
        probes: ctx.cfg.usize_or("probes", d.probes)?,
        expansivity_samples: ctx.cfg.usize_or("samples", d.expansivity_samples)?,
        window: ctx.cfg.usize_or("window", d.window)?,
        gamma_budget: ctx.cfg.usize_or("gamma_budget", d.gamma_budget)?,
        seed: ctx.cfg.seed,
    };
    ctx.cfg.check_scale_relation(params.delta, params.eps);
    let c = certificate(&ctx.system, &ctx.phi, &params);
    let mut m = ctx.header("certificate");
    m.insert(
        "scales".into(),
        json!({
            "r": num(params.r),
            "delta": num(params.delta),
            "eps": num(params.eps),
            "n_min": params.n_range.0,
            "n_max": params.n_range.1,
            "pressure_delta": num(params.pressure_delta),
            "glue_pairs": params.glue_pairs,
            "distortion_segments": params.distortion_segments,
            "probes": params.probes,
            "expansivity_samples": params.expansivity_samples,
            "window": params.window,
        }),
    );
    let checks = c
        .checks
        .iter()
        .map(|k| {
            let (status, error) = match &k.status {
                CheckStatus::Pass => ("pass", Value::Null),
                CheckStatus::Fail => ("fail", Value::Null),
                CheckStatus::Error(e) => ("error", Value::from(e.clone())),
            };
            json!({ "id": k.id, "name": k.name, "status": status, "error": error, "value": num(k.value), "detail": k.detail })
        })
        .collect();
    m.insert("checks".into(), Value::Array(checks));
    m.insert(
        "expansivity".into(),
        match &c.expansivity {
            Ok(e) => json!({
                "eps": num(e.eps),
                "window": e.window,
                "tolerance": num(e.tolerance),
                "fraction_nonexpansive": num(e.fraction_nonexpansive),
            }),
            Err(msg) => json!({ "error": msg }),
        },
    );
    m.insert("all_passed".into(), Value::from(c.all_passed));
    m.insert("disclaimer".into(), Value::from(c.disclaimer));
    ctx.finish(m, "certificate.json")
}

/// Gap of a real matrix in closed form, or `None` when the spectral shape
/// breaks.
fn jittered_gap(base: &Mat, jitter: f64, rng: &mut ChaCha8Rng) -> (Mat, Option<f64>) {
    let mut m = *base;
    for row in m.m.iter_mut().take(base.d) {
        for v in row.iter_mut().take(base.d) {
            *v += jitter * (2.0 * rng.gen::<f64>() - 1.0);
        }
    }
    let g = matrix_entropies(&m).ok().map(|e| e.gap);
    (m, g)
}

pub fn scan(ctx: &mut Ctx) -> Result<()> {
    let draws = ctx.cfg.usize_or("draws", 100)?;
    let matrix_jitter = ctx.cfg.f64_or("matrix_jitter", 1e-3)?;
    let strength_jitter = ctx.cfg.f64_or("strength_jitter", 1e-2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let base_gap = match ctx.cfg.mode {
        Mode::EigenOracle => {
            ctx.eigen_ready()?;
            eigen_entropies(&ctx.system)?.gap
        }
        Mode::Sets => {
            let (g, _) = sets_gap(ctx, &ctx.system, &ctx.phi, ctx.cfg.seed)?;
            g.unstable - g.stable
        }
    };
    let a = match ctx.cfg.opt_f64("potential_jitter")? {
        Some(a) => a.abs(),
        None => (base_gap.abs() / 4.0).min(1.0),
    };
    if a >= base_gap.abs() / 2.0 {
        let w = format!("potential jitter {a} is not below half the base gap {}", base_gap.abs() / 2.0);
        eprintln!("warning: {w}");
        ctx.cfg.warnings.push(w);
    }
    let dim = ctx.system.dim();
    let mut rows = Vec::with_capacity(draws);
    let mut flips = 0usize;
    let mut intact = 0usize;
    for i in 0..draws {
        let amp = a * (2.0 * rng.gen::<f64>() - 1.0);
        let coord = rng.gen_range(0..dim);
        let strength = ctx.cfg.system.strength.map(|s| (s + strength_jitter * (2.0 * rng.gen::<f64>() - 1.0)).max(0.0));
        let (gap, lower, upper, entry_jitter) = match ctx.cfg.mode {
            Mode::EigenOracle => {
                let (m, g) = jittered_gap(ctx.system.linear_matrix(), matrix_jitter, &mut rng);
                let base = ctx.system.linear_matrix();
                let dev = (0..base.d)
                    .flat_map(|r| (0..base.d).map(move |c| (r, c)))
                    .map(|(r, c)| (m.m[r][c] - base.m[r][c]).abs())
                    .fold(0.0, f64::max);
                match g {
                    // Each pressure moves by at most the sup norm of the jitter.
                    Some(g) => (g, g - 2.0 * amp.abs(), g + 2.0 * amp.abs(), dev),
                    None => (f64::NAN, f64::NAN, f64::NAN, dev),
                }
            }
            Mode::Sets => {
                let system = match strength {
                    Some(s) => SystemConfig { strength: Some(s), ..ctx.cfg.system.clone() }.build()?,
                    None => ctx.system.clone(),
                };
                let psi = ctx.phi.plus_cosine(coord, amp);
                let (g, _) = sets_gap(ctx, &system, &psi, ctx.cfg.seed.wrapping_add(i as u64 + 1))?;
                let v = g.unstable - g.stable;
                (v, v, v, 0.0)
            }
        };
        let shape_ok = gap.is_finite();
        let preserved = shape_ok && if base_gap > 0.0 { lower > 0.0 } else if base_gap < 0.0 { upper < 0.0 } else { true };
        if shape_ok {
            intact += 1;
            if !preserved {
                flips += 1;
            }
        }
        rows.push((i, strength, entry_jitter, coord, amp, gap, lower, upper, shape_ok, preserved));
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|&(i, s, j, c, amp, g, lo, hi, ok, keep)| {
            vec![
                i.to_string(),
                s.map(fmt_f64).unwrap_or_default(),
                fmt_f64(j),
                (c + 1).to_string(),
                fmt_f64(amp),
                fmt_f64(g),
                fmt_f64(lo),
                fmt_f64(hi),
                ok.to_string(),
                keep.to_string(),
            ]
        })
        .collect();
    write_text(
        &ctx.cfg.out,
        "scan.csv",
        &csv(
            &[
                "draw",
                "strength",
                "matrix_jitter",
                "potential_coord",
                "potential_amplitude",
                "gap",
                "gap_lower",
                "gap_upper",
                "shape_intact",
                "sign_preserved",
            ],
            &table,
        ),
    )?;
    let mut m = ctx.header("scan");
    m.insert("base_gap".into(), num(base_gap));
    m.insert("draws".into(), Value::from(draws));
    m.insert("matrix_jitter".into(), num(if ctx.cfg.mode == Mode::EigenOracle { matrix_jitter } else { 0.0 }));
    m.insert("strength_jitter".into(), num(strength_jitter));
    m.insert("potential_jitter".into(), num(a));
    m.insert("shape_intact".into(), Value::from(intact));
    m.insert("sign_flips".into(), Value::from(flips));
    ctx.finish(m, "scan.json")
}

pub fn example_mane(out: &std::path::Path, strength: f64) -> Result<()> {
    let cfg = SystemConfig::mane_example(strength);
    cfg.build().map_err(|e| config_error(format!("strength {strength}: {e}")))?;
    write_text(out, "mane.conf", &cfg.to_text())
}
