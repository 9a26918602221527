//! Experiment orchestration: seeded reproducible runs, JSON/CSV emission,
//! and the bundled verification suites.
//!
//! Every pipeline is a pure function of its configuration and seed; rerunning
//! with identical inputs produces byte-identical output regardless of the
//! worker count (`PPDE_WORKERS` only sets the rayon pool size).

use serde::Serialize;
use serde_json::json;

use crate::cascade::{
    cascade_solve, theta_base_lower, theta_base_upper, BaseFamily, CascadeConfig, Side,
};
use crate::cone::{
    make_lower_bounding, make_upper_bounding, mc_bounding_value, solve_cone, ConeGrid, Generator,
    McBoundingOptions,
};
use crate::config::{CascadeProblemConfig, IsaacsGameConfig, ShjbProblemConfig};
use crate::hitting::{hitting_sequence, hitting_time, hitting_variants, markov_restart_check, ConeSpec, Partition};
use crate::isaacs::{
    game_value_lower, game_value_upper, isaacs_condition_check, random_hamiltonian_points, GameOptions,
};
use crate::nonlin::{
    default_catalog, simulate_controlled, upper_expectation, wiener_law, MeasureFamilySpec,
};
use crate::path::SampledPath;
use crate::shjb::{shjb_cascade_value, simulate_value_direct, ShjbRunOptions};
use crate::util::{mean_stderr, stream_rng};
use crate::{Error, Result};

/// One verification check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// `hitting-stats`: tail frequencies of the recursive hitting sequence under
/// the Wiener measure plus variant-ordering columns. Returns `(json, csv)`.
pub fn run_hitting_stats(
    epsilon: f64,
    l: f64,
    samples: usize,
    seed: u64,
    step: f64,
    horizon: f64,
    n_max: usize,
) -> Result<(String, String)> {
    let slope = l + 1.0;
    let spec = MeasureFamilySpec::new(l.max(0.5), 1, 0.0, horizon, step)?;
    let wiener = wiener_law(&spec)?;
    let paths = simulate_controlled(&wiener, &spec, seed, samples)?;
    let mut counts = vec![0usize; n_max + 1];
    let mut all_terminal = true;
    let mut ord_hhat_le_h = 0usize;
    let mut ord_h_le_hhat = 0usize;
    for p in &paths {
        let pi = hitting_sequence(p, epsilon, slope)?;
        all_terminal &= pi.terminal_time >= horizon - 1e-12;
        for n in 1..=n_max {
            if pi.len() >= n {
                counts[n] += 1;
            }
        }
        let cone = ConeSpec::new(0.0, epsilon, slope, horizon)?;
        let h = hitting_time(p, 0.0, &[0.0], &cone)?.time;
        let (h_hat, _h_star) = hitting_variants(p, 0.0, epsilon)?;
        let eps1 = epsilon * (1.0f64).min(1.0 / slope) / 2.0;
        let (h_hat1, _) = hitting_variants(p, 0.0, eps1)?;
        if h_hat1 <= h + 1e-12 {
            ord_hhat_le_h += 1;
        }
        if h <= h_hat + 1e-12 {
            ord_h_le_hhat += 1;
        }
    }
    let frac1 = ord_hhat_le_h as f64 / samples as f64;
    let frac2 = ord_h_le_hhat as f64 / samples as f64;
    let mut csv = String::from("n,p_hit_before_horizon,frac_hhat_eps1_le_h,frac_h_le_hhat_eps\n");
    for n in 1..=n_max {
        let p_hat = counts[n] as f64 / samples as f64;
        csv.push_str(&format!("{n},{p_hat},{frac1},{frac2}\n"));
    }
    let summary = json!({
        "epsilon": epsilon,
        "L": l,
        "slope": slope,
        "samples": samples,
        "horizon": horizon,
        "all_paths_terminal": all_terminal,
        "p_first_exit": counts[1] as f64 / samples as f64,
    });
    Ok((serde_json::to_string(&summary).unwrap(), csv))
}

/// `nonlin-exp`: one sublinear-expectation estimate from the functional
/// registry.
pub fn run_nonlin_exp(
    functional: &str,
    l: f64,
    horizon: f64,
    dim: usize,
    samples: usize,
    seed: u64,
    feedback: bool,
) -> Result<String> {
    let spec = MeasureFamilySpec::new(l, dim, 0.0, horizon, 1e-3 * horizon)?;
    let family = if feedback { crate::nonlin::catalog_with_feedback(&spec) } else { default_catalog(&spec) };
    let func: Box<dyn Fn(&SampledPath) -> f64 + Sync> = match functional {
        "terminal" => Box::new(|p: &SampledPath| p.knot_value(p.n_knots() - 1)[0]),
        "terminal-sq" => Box::new(|p: &SampledPath| {
            let v = p.knot_value(p.n_knots() - 1)[0];
            v * v
        }),
        "sup-abs" => Box::new(|p: &SampledPath| p.sup_norm(p.t_end()).unwrap_or(0.0)),
        "const" => Box::new(|_p: &SampledPath| 1.0),
        other => return Err(Error::Config(format!("unknown functional {other:?}"))),
    };
    let est = upper_expectation(&|p: &SampledPath| func(p), &spec, &family, samples, seed)?;
    Ok(serde_json::to_string(&est).unwrap())
}

/// `solve-cone`: apex value of one cone solve, optionally with the full
/// field as CSV. `generator = custom-config` takes the generator section of
/// a problem file (frozen at the zero history).
#[allow(clippy::too_many_arguments)]
pub fn run_solve_cone(
    generator: &str,
    epsilon: f64,
    l1: f64,
    dx: f64,
    dt: f64,
    l: f64,
    c0: f64,
    horizon: f64,
    boundary: &str,
    boundary_value: f64,
    dump_field: bool,
    config_text: Option<&str>,
) -> Result<(String, Option<String>)> {
    let g = match generator {
        "zero" => Generator::zero(),
        "heat" => Generator::heat(),
        "upper" => make_upper_bounding(l, c0),
        "lower" => make_lower_bounding(l, c0),
        "custom-config" => {
            let text = config_text
                .ok_or_else(|| Error::Config("custom-config needs a problem file (--config)".into()))?;
            let cfg = CascadeProblemConfig::parse(text)?;
            let factory = cfg.generator.build(cfg.l, cfg.c0);
            factory(&SampledPath::zero(cfg.dim, 0.0, horizon))
        }
        other => return Err(Error::Config(format!("unknown generator {other:?}"))),
    };
    let spec = ConeSpec::new(0.0, epsilon, l1, horizon)?;
    let grid = ConeGrid::new(spec, 1, dx, dt)?;
    let b: Box<dyn Fn(f64, &[f64]) -> f64 + Sync> = match boundary {
        "exit-time" => Box::new(|s, _x: &[f64]| s),
        "abs" => Box::new(|_s, x: &[f64]| x[0].abs()),
        "const" => Box::new(move |_s, _x: &[f64]| boundary_value),
        other => return Err(Error::Config(format!("unknown boundary {other:?}"))),
    };
    let field = solve_cone(&g, &grid, |s, x| b(s, x))?;
    let summary = json!({
        "generator": generator,
        "epsilon": epsilon,
        "L1": l1,
        "dx": grid.dx,
        "dt": grid.dt,
        "apex": field.apex_value(),
    });
    let csv = if dump_field { Some(field.to_csv()) } else { None };
    Ok((serde_json::to_string(&summary).unwrap(), csv))
}

fn family_from_name(name: &str) -> Result<BaseFamily> {
    Ok(match name {
        "wiener" => BaseFamily::WienerOnly,
        "default" => BaseFamily::Default,
        "feedback" => BaseFamily::WithFeedback,
        other => return Err(Error::Config(format!("unknown family {other:?}"))),
    })
}

/// `cascade`: root sandwich values of a configured problem.
#[allow(clippy::too_many_arguments)]
pub fn run_cascade(
    problem_text: &str,
    epsilon: f64,
    levels: usize,
    dx: Option<f64>,
    dt: Option<f64>,
    samples: usize,
    seed: u64,
    family: &str,
    zero_discount: bool,
) -> Result<String> {
    let cfg = CascadeProblemConfig::parse(problem_text)?;
    let problem = cfg.build()?;
    let mut config = CascadeConfig::for_problem(&problem, epsilon, levels, seed);
    if let Some(dx) = dx {
        config.dx = dx;
        config.quantum = dx / 2.0;
    }
    if let Some(dt) = dt {
        config.dt = dt;
    }
    config.base_samples = samples;
    config.family = family_from_name(family)?;
    if zero_discount {
        config.discount_catalog = vec![0.0];
    }
    let sol = cascade_solve(&problem, &config)?;
    let summary = json!({
        "problem": problem.label,
        "epsilon": epsilon,
        "levels": levels,
        "upper_root": sol.root_upper,
        "lower_root": sol.root_lower,
        "gap": sol.root_gap(),
        "per_level_stats": sol.per_level,
    });
    Ok(serde_json::to_string(&summary).unwrap())
}

/// `shjb`: direct versus path-frozen value of a configured control problem.
pub fn run_shjb(problem_text: &str, t: f64, x: f64, epsilon: f64, samples: usize, seed: u64) -> Result<String> {
    let cfg = ShjbProblemConfig::parse(problem_text)?;
    let problem = cfg.build()?;
    let opts = ShjbRunOptions::defaults(&problem);
    let omega = SampledPath::zero(1, 0.0, problem.horizon);
    let direct = simulate_value_direct(&problem, t, &omega, &[x], samples, seed, &opts)?;
    let pi = Partition::empty(epsilon, problem.slope(), problem.horizon);
    let frozen = shjb_cascade_value(&problem, &pi, t, &[0.0], &[x], epsilon, samples, seed, &opts)?;
    let summary = json!({
        "problem": problem.label,
        "t": t,
        "x": x,
        "epsilon": epsilon,
        "direct": direct.value,
        "direct_stderr": direct.stderr,
        "cascade": frozen.value,
        "gap": direct.value - frozen.value,
        "argmax_control": direct.argmax_control,
    });
    Ok(serde_json::to_string(&summary).unwrap())
}

/// `isaacs`: upper/lower game values with the Hamiltonian gap.
pub fn run_isaacs(game_text: &str, depth: usize, epsilon: f64, samples: usize, seed: u64) -> Result<String> {
    let cfg = IsaacsGameConfig::parse(game_text)?;
    let spec = cfg.build()?;
    let opts = GameOptions { leaf_samples: samples, ..GameOptions::defaults(epsilon, depth, seed) };
    let omega = SampledPath::zero(1, 0.0, spec.horizon);
    let up = game_value_upper(&spec, 0.0, &omega, &opts)?;
    let lo = game_value_lower(&spec, 0.0, &omega, &opts)?;
    let isaacs = isaacs_condition_check(&spec, &random_hamiltonian_points(&spec, 50, seed ^ 0x51), 1e-9);
    let summary = json!({
        "game": spec.label,
        "depth": depth,
        "epsilon": epsilon,
        "upper": up.value,
        "lower": lo.value,
        "value_gap": up.value - lo.value,
        "isaacs_gap": isaacs.max_gap,
        "freezing_max": up.freezing_max.max(lo.freezing_max),
        "freezing_violations": up.freezing_violations + lo.freezing_violations,
    });
    Ok(serde_json::to_string(&summary).unwrap())
}

/// Named verification suites; exit status of the CLI is nonzero iff any
/// gated check fails.
pub fn run_verify(suite: &str, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    match suite {
        "hitting" => suite_hitting(seed, &mut out)?,
        "nonlin" => suite_nonlin(seed, &mut out)?,
        "cone" => suite_cone(seed, &mut out)?,
        "cascade" => suite_cascade(seed, &mut out)?,
        "shjb" => suite_shjb(seed, &mut out)?,
        "isaacs" => suite_isaacs(seed, &mut out)?,
        "all" => {
            suite_hitting(seed, &mut out)?;
            suite_nonlin(seed, &mut out)?;
            suite_cone(seed, &mut out)?;
            suite_cascade(seed, &mut out)?;
            suite_shjb(seed, &mut out)?;
            suite_isaacs(seed, &mut out)?;
        }
        other => return Err(Error::Config(format!("unknown suite {other:?}"))),
    }
    Ok(out)
}

fn random_walk_path(rng: &mut impl rand::Rng, n: usize, horizon: f64, scale: f64) -> SampledPath {
    let mut vals = vec![0.0];
    for _ in 0..n {
        vals.push(vals.last().unwrap() + rng.gen_range(-scale..scale));
    }
    SampledPath::from_uniform_grid(0.0, horizon / n as f64, 1, vals, horizon).unwrap()
}

fn suite_hitting(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 1);
    // Exact restart identity.
    let mut restart_ok = 0;
    let cases = 200;
    for _ in 0..cases {
        let p = random_walk_path(&mut rng, 30, 1.0, 0.2);
        let r = rng.gen_range(0.2..0.6);
        let l1 = rng.gen_range(1.0..2.5);
        let x = [rng.gen_range(-0.5..0.5) * r * 0.9];
        let spec = ConeSpec::new(0.0, r, l1, 1.0)?;
        let hit = hitting_time(&p, 0.0, &x, &spec)?;
        let tau = rng.gen_range(0.0..0.999) * hit.time;
        if markov_restart_check(&p, 0.0, &x, &spec, tau)? {
            restart_ok += 1;
        }
    }
    out.push(CheckResult::new("hitting.restart_exact", restart_ok == cases, format!("{restart_ok}/{cases}")));

    // Variant bracket ordering.
    let mut bracket_ok = 0;
    let samples = 100;
    let eps = 0.4;
    let l1 = 1.5;
    for _ in 0..samples {
        let p = random_walk_path(&mut rng, 400, 1.0, 0.08);
        let spec = ConeSpec::new(0.0, eps, l1, 1.0)?;
        let h = hitting_time(&p, 0.0, &[0.0], &spec)?.time;
        let (h_hat, _) = hitting_variants(&p, 0.0, eps)?;
        let (h_hat1, _) = hitting_variants(&p, 0.0, eps / (2.0 * l1))?;
        if h_hat1 <= h + 1e-12 && h <= h_hat + 1e-12 {
            bracket_ok += 1;
        }
    }
    out.push(CheckResult::new("hitting.variant_bracket", bracket_ok == samples, format!("{bracket_ok}/{samples}")));

    // Lateral identity along partitions.
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_walk_path(&mut rng, 300, 1.0, 0.1);
        let pi = hitting_sequence(&p, 0.3, 1.2)?;
        let mut prev = 0.0;
        for pt in &pi.points {
            let lhs = pt.increment[0].abs() + 1.2 * (pt.time - prev);
            worst = worst.max((lhs - 0.3).abs());
            prev = pt.time;
        }
    }
    out.push(CheckResult::new("hitting.lateral_identity", worst < 1e-8, format!("worst |dev| = {worst:.2e}")));

    // Small-time bound: frequencies of early exits are dominated by the
    // linear fit at the largest window.
    let spec = MeasureFamilySpec::new(0.5, 1, 0.0, 0.2, 2e-4)?;
    let wiener = wiener_law(&spec)?;
    let paths = simulate_controlled(&wiener, &spec, seed ^ 0xD, 4000)?;
    // Windows chosen inside the superlinear-decay regime, well before the
    // exit distribution saturates: the ratio P(H<δ)/δ is increasing there,
    // so the largest-δ fit dominates the smaller windows.
    let rr = 0.35;
    let cone = ConeSpec::new(0.0, rr, 1.5, 0.2)?;
    let deltas = [0.005, 0.01, 0.02, 0.04];
    let freq = |d: f64| -> f64 {
        let c = paths.iter().filter(|p| hitting_time(p, 0.0, &[0.0], &cone).unwrap().time < d).count();
        c as f64 / paths.len() as f64
    };
    let cmax = freq(*deltas.last().unwrap()) / deltas.last().unwrap();
    let mut small_time_ok = true;
    let mut detail = String::new();
    for &d in &deltas[..deltas.len() - 1] {
        let f = freq(d);
        let noise = 3.0 * (f.max(1e-4) / paths.len() as f64).sqrt();
        small_time_ok &= f <= cmax * d + noise;
        detail.push_str(&format!("P(H<{d})={f:.4} vs {:.4}; ", cmax * d));
    }
    out.push(CheckResult::new("hitting.small_time_bound", small_time_ok, detail));
    Ok(())
}

fn suite_nonlin(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let spec = MeasureFamilySpec::new(0.5, 1, 0.0, 1.0, 1e-3)?;
    let fam = default_catalog(&spec);
    let c = upper_expectation(&|_p: &SampledPath| 3.5, &spec, &fam, 64, seed)?;
    out.push(CheckResult::new("nonlin.constant_preserved", c.value == 3.5, format!("{}", c.value)));

    let f1 = |p: &SampledPath| p.knot_value(p.n_knots() - 1)[0].tanh();
    let f2 = move |p: &SampledPath| f1(p) + 0.2;
    let lo = upper_expectation(&f1, &spec, &fam, 800, seed)?;
    let hi = upper_expectation(&f2, &spec, &fam, 800, seed)?;
    out.push(CheckResult::new("nonlin.monotone", lo.value <= hi.value, format!("{} ≤ {}", lo.value, hi.value)));

    let g = |p: &SampledPath| p.sup_norm(1.0).unwrap().min(2.0);
    let fg = move |p: &SampledPath| f1(p) + g(p);
    let ef = upper_expectation(&f1, &spec, &fam, 800, seed)?;
    let eg = upper_expectation(&g, &spec, &fam, 800, seed)?;
    let efg = upper_expectation(&fg, &spec, &fam, 800, seed)?;
    let sub_ok = efg.value <= ef.value + eg.value + 6.0 * (ef.stderr + eg.stderr + efg.stderr);
    out.push(CheckResult::new("nonlin.subadditive", sub_ok, format!("{} vs {}", efg.value, ef.value + eg.value)));

    let wiener = wiener_law(&spec)?;
    let xs: Vec<f64> = simulate_controlled(&wiener, &spec, seed, 2000)?.iter().map(|p| g(p)).collect();
    let (wm, wse) = mean_stderr(&xs);
    let dom = upper_expectation(&g, &spec, &fam, 2000, seed)?;
    out.push(CheckResult::new(
        "nonlin.wiener_dominated",
        dom.value >= wm - 3.0 * (wse + dom.stderr),
        format!("{} ≥ {}", dom.value, wm),
    ));
    Ok(())
}

fn suite_cone(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let eps = 0.5;
    let spec = ConeSpec::new(0.0, eps, 1.0, 1.0)?;
    let dx = eps / 25.0;
    let grid = ConeGrid::new(spec, 1, dx, dx / 2.0)?;
    let field = solve_cone(&Generator::zero(), &grid, |s, _| s)?;
    let mut worst = 0.0f64;
    for idx in 0..grid.n_nodes() {
        let x = grid.position(&grid.unpack(idx));
        if x[0].abs() < eps {
            worst = worst.max((field.slice(0)[idx] - (eps - x[0].abs())).abs());
        }
    }
    out.push(CheckResult::new("cone.exit_time_profile", worst <= 2.0 * dx, format!("worst {worst:.4} vs {:.4}", 2.0 * dx)));

    let g = make_upper_bounding(1.0, 0.0);
    let grid2 = ConeGrid::new(ConeSpec::new(0.0, 0.4, 1.5, 1.0)?, 1, 0.02, 1e-4)?;
    let fa = solve_cone(&g, &grid2, |s, x: &[f64]| (s + x[0]).sin())?;
    let fb = solve_cone(&g, &grid2, |s, x: &[f64]| (s + x[0]).sin() + 0.3)?;
    let mut ordered = true;
    for j in 0..fa.times().len() {
        for (a, b) in fa.slice(j).iter().zip(fb.slice(j)) {
            ordered &= a <= &(b + 1e-10);
        }
    }
    out.push(CheckResult::new("cone.discrete_comparison", ordered, "ordered boundaries give ordered fields"));

    let opts = McBoundingOptions::defaults(0.5, &ConeSpec::new(0.0, eps, 1.5, 1.0)?);
    let mc = mc_bounding_value(|s, _| s, &ConeSpec::new(0.0, eps, 1.5, 1.0)?, 1, 0.5, 0.0, 4000, seed, &opts)?;
    let gup = make_upper_bounding(0.5, 0.0);
    let dxb = eps / 40.0;
    let dtb = 0.9 / (2.0 * gup.lip_gamma / (dxb * dxb) + gup.lip_z / dxb + gup.lip_y);
    let gridb = ConeGrid::new(ConeSpec::new(0.0, eps, 1.5, 1.0)?, 1, dxb, dtb)?;
    let fd = solve_cone(&gup, &gridb, |s, _| s)?.apex_value();
    out.push(CheckResult::new(
        "cone.mc_fd_cross_oracle",
        (fd - mc.value).abs() <= 5e-2,
        format!("fd {fd:.4} vs mc {:.4}", mc.value),
    ));
    Ok(())
}

fn suite_cascade(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let problem = crate::cascade::FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh())?;
    let mut cfg = CascadeConfig::for_problem(&problem, 0.5, 1, seed);
    cfg.dx = 0.5 / 12.0;
    cfg.quantum = cfg.dx / 2.0;
    cfg.dt = cfg.dx / 2.0;
    cfg.boundary_samples = 8;
    cfg.base_samples = 300;
    cfg.base_step = 5e-3;
    let c = 1.25f64;
    let pc = problem.with_terminal(move |_| c);
    let mut cfg0 = cfg.clone();
    cfg0.discount_catalog = vec![0.0];
    let sol = cascade_solve(&pc, &cfg0)?;
    out.push(CheckResult::new(
        "cascade.constant_exact",
        (sol.root_upper - c).abs() < 1e-9 && (sol.root_lower - c).abs() < 1e-9,
        format!("root {} / {}", sol.root_upper, sol.root_lower),
    ));

    let pi = Partition::empty(0.5, problem.slope(), 1.0);
    let up = theta_base_upper(&problem, &cfg, &pi, 0.0, &[0.0])?;
    let lo = theta_base_lower(&problem, &cfg, &pi, 0.0, &[0.0])?;
    out.push(CheckResult::new("cascade.base_sandwich", lo <= up, format!("{lo} ≤ {up}")));

    let heat = crate::cascade::FrozenProblem::heat_terminal(1, 1.0, |v| v[0] * v[0])?;
    let mut hcfg = CascadeConfig::for_problem(&heat, 0.4, 2, seed);
    hcfg.dx = 0.4 / 12.0;
    hcfg.quantum = hcfg.dx / 2.0;
    hcfg.dt = 0.9 / (2.0 * 0.5 / (hcfg.dx * hcfg.dx));
    hcfg.boundary_samples = 8;
    hcfg.base_samples = 400;
    hcfg.base_step = 5e-3;
    hcfg.family = BaseFamily::WienerOnly;
    hcfg.discount_catalog = vec![0.0];
    let hsol = cascade_solve(&heat, &hcfg)?;
    let res = hsol.compatibility_residuals(Side::Upper, 15, seed ^ 0x7)?;
    let tol = 4.0 * hcfg.dx;
    let comp_ok = res.iter().all(|r| *r <= tol);
    out.push(CheckResult::new("cascade.compatibility", comp_ok, format!("residuals {res:?} vs {tol:.4}")));
    Ok(())
}

fn suite_shjb(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let text = r#"
        label = "drift"
        horizon = 1.0
        L = 1.0
        controls = [[-1.0], [1.0]]
        [b]
        type = "control"
        [sigma]
        type = "zero"
        [f0]
        type = "zero"
        [g]
        type = "linear-state"
    "#;
    let p = ShjbProblemConfig::parse(text)?.build()?;
    let opts = ShjbRunOptions::defaults(&p);
    let omega = SampledPath::zero(1, 0.0, 1.0);
    let est = simulate_value_direct(&p, 0.0, &omega, &[0.25], 16, seed, &opts)?;
    out.push(CheckResult::new(
        "shjb.drift_closed_form",
        (est.value - 1.25).abs() <= 3.0 * est.stderr + 1e-9,
        format!("{} vs 1.25", est.value),
    ));

    let pi = Partition::empty(0.3, p.slope(), 1.0);
    let frozen = shjb_cascade_value(&p, &pi, 0.0, &[0.0], &[0.25], 0.3, 16, seed, &opts)?;
    out.push(CheckResult::new(
        "shjb.freezing_noop",
        est.value.to_bits() == frozen.value.to_bits(),
        format!("{} vs {}", est.value, frozen.value),
    ));
    Ok(())
}

fn suite_isaacs(seed: u64, out: &mut Vec<CheckResult>) -> Result<()> {
    let saddle = crate::isaacs::GameSpec::matrix_game(vec![vec![1.0, 2.0], vec![0.0, 3.0]], 1.0, 1.0, 1.0)?;
    let opts = GameOptions::defaults(0.4, 2, seed);
    let omega = SampledPath::zero(1, 0.0, 1.0);
    let up = game_value_upper(&saddle, 0.0, &omega, &opts)?;
    let lo = game_value_lower(&saddle, 0.0, &omega, &opts)?;
    out.push(CheckResult::new(
        "isaacs.saddle_value",
        (up.value - 1.0).abs() < 1e-6 && (lo.value - 1.0).abs() < 1e-6,
        format!("upper {} lower {}", up.value, lo.value),
    ));
    out.push(CheckResult::new("isaacs.ordering", up.value >= lo.value - 1e-12, "upper ≥ lower"));
    out.push(CheckResult::new(
        "isaacs.freezing",
        up.freezing_violations == 0 && up.freezing_max <= opts.epsilon + 1e-9,
        format!("max {} over {} samples", up.freezing_max, up.samples_checked),
    ));

    let pennies = crate::isaacs::GameSpec::matrix_game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], 1.0, 1.0, 1.0)?;
    let rep = isaacs_condition_check(&pennies, &random_hamiltonian_points(&pennies, 20, seed), 1e-9);
    out.push(CheckResult::new("isaacs.pennies_gap", rep.max_gap == 2.0, format!("gap {}", rep.max_gap)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_suites_pass_and_are_deterministic() {
        for suite in ["hitting", "nonlin", "shjb", "isaacs"] {
            let a = run_verify(suite, 7).unwrap();
            let b = run_verify(suite, 7).unwrap();
            assert!(!a.is_empty());
            for (x, y) in a.iter().zip(&b) {
                assert!(x.pass, "{suite}/{}: {}", x.name, x.detail);
                assert_eq!(x.detail, y.detail);
            }
        }
    }

    #[test]
    fn hitting_stats_emits_monotone_tail_frequencies() {
        let (_json, csv) = run_hitting_stats(0.4, 0.5, 400, 11, 5e-4, 0.3, 10).unwrap();
        let mut prev = f64::INFINITY;
        for line in csv.lines().skip(1) {
            let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn pipelines_emit_identical_json_on_identical_seeds() {
        let a = run_nonlin_exp("terminal", 1.0, 1.0, 1, 500, 42, false).unwrap();
        let b = run_nonlin_exp("terminal", 1.0, 1.0, 1, 500, 42, false).unwrap();
        assert_eq!(a, b);
        let c = run_nonlin_exp("terminal", 1.0, 1.0, 1, 500, 43, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn solve_cone_runner_reports_the_apex() {
        let (json, csv) = run_solve_cone("zero", 0.5, 1.0, 0.02, 0.01, 1.0, 0.0, 1.0, "exit-time", 0.0, true, None).unwrap();
        assert!(json.contains("\"apex\""));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let apex = v["apex"].as_f64().unwrap();
        assert!((apex - 0.5).abs() < 0.05, "apex {apex}");
        assert!(csv.unwrap().starts_with("s,x1,v\n"));
    }
}
