//! Stochastic HJB values with random coefficients.
//!
//! The controlled decoupled forward-backward system
//!
//! ```text
//! X_s = x + ∫ b(r, ω, X_r, α_r) dr + ∫ σ(r, ω, X_r, α_r) dB_r,
//! Y_s = g(ω, X_T) + ∫_s^T f(r, ω, X_r, Y_r, Z_r, α_r) dr − ∫ Z dB,
//! ```
//!
//! defines the value `u⁰(t, ω, x) = sup_α Y_t` over a finite open-loop
//! control catalog. The pseudo-Markovian variant replaces the path argument
//! of the coefficients by the hitting skeleton of the driving noise, frozen
//! at the last hitting time: on `[H_m, H_{m+1})` coefficients see
//! `B̂_{·∧H_m}`, and the terminal `g` sees the full skeleton. Both pipelines
//! run through one engine, so path-independent coefficients make the frozen
//! value equal the direct value bit for bit under matched seeds.
//!
//! Backward solutions are computed by the exact discount reduction when the
//! driver is affine in `y` (`f = f₀ + f_y·y`, the default class for every
//! closed-form test), and by depth-limited Picard iteration with nested
//! Monte Carlo otherwise.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hitting::{hitting_sequence_from, hitting_time, ConeSpec, HitKind, Partition};
use crate::nonlin::MCEstimate;
use crate::path::{concatenate, SampledPath};
use crate::util::{mean_stderr, mix_stream, stream_rng};
use crate::{Error, Result};

type CoefVec = dyn Fn(f64, &SampledPath, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
type CoefScalar = dyn Fn(f64, &SampledPath, &[f64], &[f64]) -> f64 + Send + Sync;
type TerminalG = dyn Fn(&SampledPath, &[f64]) -> f64 + Send + Sync;
type GeneralDriver = dyn Fn(f64, &SampledPath, &[f64], f64, &[f64], &[f64]) -> f64 + Send + Sync;

/// Backward-equation solution strategy, keyed by the declared driver class.
#[derive(Clone)]
pub enum DriverClass {
    /// `f = f₀(t, ω, x, α) + f_y · y`: exact discount-integral reduction.
    Affine { fy: f64 },
    /// General `f(t, ω, x, y, z, α)`: depth-limited Picard with nested
    /// Monte Carlo (`z` is reported as zero to the driver).
    General { f: Arc<GeneralDriver>, depth: usize },
}

/// A stochastic control problem with possibly path-dependent coefficients.
#[derive(Clone)]
pub struct ShjbProblem {
    pub label: String,
    /// Driving-noise (path) dimension `d`.
    pub dim_path: usize,
    /// Controlled-state dimension `d'`.
    pub dim_state: usize,
    pub horizon: f64,
    /// Admissibility bound: `|f_y| ≤ L`, and the hitting slope is `L + 1`.
    pub bound_l: f64,
    /// Finite control catalog; each entry is one control parameter vector.
    pub controls: Vec<Vec<f64>>,
    /// Declared bounds for diagnostics (`|g| ≤ g_bound`, `|f₀| ≤ f0_bound`).
    pub g_bound: f64,
    pub f0_bound: f64,
    b: Arc<CoefVec>,
    /// Returns the `d' × d` diffusion matrix row-major.
    sigma: Arc<CoefVec>,
    f0: Arc<CoefScalar>,
    pub driver: DriverClass,
    g: Arc<TerminalG>,
}

impl std::fmt::Debug for ShjbProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ShjbProblem({}, d={}, d'={}, |U|={})", self.label, self.dim_path, self.dim_state, self.controls.len())
    }
}

impl ShjbProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        dim_path: usize,
        dim_state: usize,
        horizon: f64,
        bound_l: f64,
        controls: Vec<Vec<f64>>,
        b: impl Fn(f64, &SampledPath, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        sigma: impl Fn(f64, &SampledPath, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        f0: impl Fn(f64, &SampledPath, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        driver: DriverClass,
        g: impl Fn(&SampledPath, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::Config("empty control catalog".into()));
        }
        if dim_path == 0 || dim_state == 0 || !(horizon > 0.0) || !(bound_l > 0.0) {
            return Err(Error::Config("bad problem dimensions".into()));
        }
        if let DriverClass::Affine { fy } = driver {
            if fy.abs() > bound_l * (1.0 + 1e-12) {
                return Err(Error::Bound(format!("|f_y| = {} exceeds L = {bound_l}", fy.abs())));
            }
        }
        Ok(Self {
            label: label.into(),
            dim_path,
            dim_state,
            horizon,
            bound_l,
            controls,
            g_bound: f64::INFINITY,
            f0_bound: f64::INFINITY,
            b: Arc::new(b),
            sigma: Arc::new(sigma),
            f0: Arc::new(f0),
            driver,
            g: Arc::new(g),
        })
    }

    pub fn with_bounds(mut self, g_bound: f64, f0_bound: f64) -> Self {
        self.g_bound = g_bound;
        self.f0_bound = f0_bound;
        self
    }

    pub fn slope(&self) -> f64 {
        self.bound_l + 1.0
    }
}

/// An open-loop control: piecewise-constant catalog indices on a uniform
/// mesh over the value window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenLoopControl {
    pub label: String,
    pub mesh: Vec<usize>,
}

impl OpenLoopControl {
    pub fn constant(idx: usize) -> Self {
        Self { label: format!("const{idx}"), mesh: vec![idx] }
    }

    fn index_at(&self, frac: f64) -> usize {
        let k = ((frac * self.mesh.len() as f64).floor() as usize).min(self.mesh.len() - 1);
        self.mesh[k]
    }
}

/// All constant open-loop controls of a problem.
pub fn constant_controls(problem: &ShjbProblem) -> Vec<OpenLoopControl> {
    (0..problem.controls.len()).map(OpenLoopControl::constant).collect()
}

/// Run options shared by the direct and frozen pipelines.
#[derive(Debug, Clone)]
pub struct ShjbRunOptions {
    pub step: f64,
    pub controls: Vec<OpenLoopControl>,
}

impl ShjbRunOptions {
    pub fn defaults(problem: &ShjbProblem) -> Self {
        Self { step: 1e-3 * problem.horizon, controls: constant_controls(problem) }
    }
}

/// The coefficient path argument of one pipeline mode.
enum PathMode<'a> {
    Direct { omega: &'a SampledPath, t: f64 },
    Frozen { prefix: Vec<(f64, Vec<f64>)>, epsilon: f64, anchor_t: f64, xbar: Vec<f64>, t: f64 },
}

/// Per-sample coefficient paths: a stack of snapshots (frozen mode) or one
/// concatenated path (direct mode), plus the terminal-argument path.
struct SamplePaths {
    /// `(time from which the snapshot is active, path)` in increasing time.
    snapshots: Vec<(f64, SampledPath)>,
    terminal_path: SampledPath,
}

fn brownian_path(t: f64, horizon: f64, dim: usize, step: f64, rng: &mut impl Rng) -> SampledPath {
    let span = horizon - t;
    let n = (span / step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let sqh = h.sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity((n + 1) * dim);
    let mut x = vec![0.0f64; dim];
    times.push(t);
    values.extend_from_slice(&x);
    for k in 0..n {
        for xi in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *xi += sqh * z;
        }
        times.push(if k + 1 == n { horizon } else { t + (k + 1) as f64 * h });
        values.extend_from_slice(&x);
    }
    SampledPath::from_series(t, horizon, dim, times, values).expect("brownian grid is increasing")
}

fn build_sample_paths(mode: &PathMode, noise: &SampledPath, horizon: f64, slope: f64) -> Result<SamplePaths> {
    // Nested Picard restarts spawn noise from later times; the coefficient
    // path is always assembled from the noise's own start.
    let t0 = noise.t_start();
    match mode {
        PathMode::Direct { omega, .. } => {
            let prefix = omega.truncate(t0)?;
            let full = concatenate(&prefix, t0, noise)?;
            Ok(SamplePaths { snapshots: vec![(t0, full.clone())], terminal_path: full })
        }
        PathMode::Frozen { prefix, epsilon, anchor_t, xbar, .. } => {
            let dim = noise.dim();
            let zero = vec![0.0; dim];
            let cum = prefix.last().map(|(_, v)| v.clone()).unwrap_or_else(|| zero.clone());
            let base_knots: Vec<(f64, Vec<f64>)> = {
                let mut ks = vec![(0.0, zero.clone())];
                for (kt, kv) in prefix {
                    if *kt > 0.0 {
                        ks.push((*kt, kv.clone()));
                    }
                }
                ks
            };
            let make_path = |knots: &[(f64, Vec<f64>)]| -> SampledPath {
                SampledPath::new(0.0, horizon, knots.to_vec()).expect("frozen knots ordered")
            };
            // Hitting chain of the driving noise, then one snapshot per
            // freeze window.
            let mut hit_times: Vec<f64> = Vec::new();
            if t0 < horizon {
                let anchor = anchor_t.min(t0);
                let spec = ConeSpec::new(anchor, *epsilon, slope, horizon)?;
                let first = hitting_time(noise, t0, xbar, &spec)?;
                hit_times.push(first.time);
                if first.kind == HitKind::Lateral && first.time < horizon {
                    let seq = hitting_sequence_from(noise, first.time, *epsilon, slope)?;
                    for p in &seq.points {
                        hit_times.push(p.time);
                    }
                    hit_times.push(horizon);
                }
            }
            let noise_at_t = noise.eval(t0)?;
            let mut snapshots = Vec::with_capacity(hit_times.len() + 1);
            let mut knots = base_knots.clone();
            snapshots.push((t0, make_path(&knots)));
            for &h in &hit_times {
                let nv = noise.eval(h)?;
                let v: Vec<f64> = cum
                    .iter()
                    .zip(xbar.iter())
                    .zip(nv.iter().zip(&noise_at_t))
                    .map(|((c, xb), (n1, n0))| c + xb + n1 - n0)
                    .collect();
                if h > knots.last().unwrap().0 {
                    knots.push((h, v));
                }
                snapshots.push((h, make_path(&knots)));
            }
            let terminal_path = make_path(&knots);
            Ok(SamplePaths { snapshots, terminal_path })
        }
    }
}

impl SamplePaths {
    /// The coefficient path governing time `r`: the last snapshot activated
    /// at or before `r`.
    fn at(&self, r: f64) -> &SampledPath {
        let mut idx = 0;
        for (k, (h, _)) in self.snapshots.iter().enumerate() {
            if *h <= r {
                idx = k;
            } else {
                break;
            }
        }
        &self.snapshots[idx].1
    }
}

struct EulerRun {
    /// State trajectory, one row per grid time.
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    paths: SamplePaths,
}

/// Forward Euler for `X` under one control along one noise sample.
fn euler_forward(
    problem: &ShjbProblem,
    mode: &PathMode,
    control: &OpenLoopControl,
    t: f64,
    x0: &[f64],
    noise: &SampledPath,
) -> Result<EulerRun> {
    let horizon = problem.horizon;
    let paths = build_sample_paths(mode, noise, horizon, problem.slope())?;
    let grid = noise.knot_times().to_vec();
    let d = problem.dim_path;
    let dp = problem.dim_state;
    let mut states = Vec::with_capacity(grid.len());
    let mut x = x0.to_vec();
    states.push(x.clone());
    for k in 0..grid.len() - 1 {
        let r = grid[k];
        let h = grid[k + 1] - grid[k];
        let frac = (r - t) / (horizon - t).max(1e-300);
        let alpha = &problem.controls[control.index_at(frac)];
        let cp = paths.at(r);
        let bv = (problem.b)(r, cp, &x, alpha);
        let sv = (problem.sigma)(r, cp, &x, alpha);
        let w0 = noise.knot_value(k);
        let w1 = noise.knot_value(k + 1);
        let mut xn = x.clone();
        for i in 0..dp {
            let mut dx = bv[i] * h;
            for j in 0..d {
                dx += sv[i * d + j] * (w1[j] - w0[j]);
            }
            xn[i] += dx;
        }
        x = xn;
        states.push(x.clone());
    }
    Ok(EulerRun { times: grid, states, paths })
}

/// One-sample affine backward value.
fn affine_sample_value(
    problem: &ShjbProblem,
    run: &EulerRun,
    control: &OpenLoopControl,
    t: f64,
    fy: f64,
) -> f64 {
    let horizon = problem.horizon;
    let mut acc = 0.0;
    for k in 0..run.times.len() - 1 {
        let r = run.times[k];
        let h = run.times[k + 1] - run.times[k];
        let frac = (r - t) / (horizon - t).max(1e-300);
        let alpha = &problem.controls[control.index_at(frac)];
        let cp = run.paths.at(r);
        acc += (fy * (r - t)).exp() * (problem.f0)(r, cp, &run.states[k], alpha) * h;
    }
    let g = (problem.g)(&run.paths.terminal_path, run.states.last().unwrap());
    (fy * (horizon - t)).exp() * g + acc
}

/// Nested-Monte-Carlo Picard for general drivers. `y`-values feeding the
/// driver come from the previous Picard depth, memoized on a coarse
/// checkpoint/state lattice; `z` is reported as zero.
#[allow(clippy::too_many_arguments)]
fn picard_value(
    problem: &ShjbProblem,
    mode: &PathMode,
    control: &OpenLoopControl,
    t: f64,
    x0: &[f64],
    n: usize,
    seed: u64,
    step: f64,
    depth: usize,
    f: &Arc<GeneralDriver>,
) -> Result<f64> {
    let horizon = problem.horizon;
    let checkpoints: Vec<f64> = (0..=6).map(|k| t + (horizon - t) * k as f64 / 6.0).collect();
    let qx = 0.05 * (1.0 + x0.iter().map(|v| v.abs()).fold(0.0, f64::max));
    type Memo = HashMap<(usize, usize, Vec<i64>), f64>;
    let mut memo: Memo = HashMap::new();

    #[allow(clippy::too_many_arguments)]
    fn value_at(
        problem: &ShjbProblem,
        mode: &PathMode,
        control: &OpenLoopControl,
        s: f64,
        x: &[f64],
        n: usize,
        seed: u64,
        step: f64,
        depth: usize,
        f: &Arc<GeneralDriver>,
        checkpoints: &[f64],
        qx: f64,
        memo: &mut Memo,
        salt: u64,
    ) -> Result<f64> {
        let horizon = problem.horizon;
        if s >= horizon - 1e-14 {
            let noise = SampledPath::zero(problem.dim_path, (horizon - 1e-9).max(0.0), horizon);
            let paths = build_sample_paths(mode, &noise, horizon, problem.slope())?;
            return Ok((problem.g)(&paths.terminal_path, x));
        }
        let t0 = s;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let mut rng = stream_rng(seed, mix_stream(&[salt, depth as u64, i]));
            let noise = brownian_path(t0, horizon, problem.dim_path, step, &mut rng);
            let run = euler_forward(problem, mode, control, t0, x, &noise)?;
            let mut acc = (problem.g)(&run.paths.terminal_path, run.states.last().unwrap());
            for k in 0..run.times.len() - 1 {
                let r = run.times[k];
                let h = run.times[k + 1] - run.times[k];
                let frac = (r - t0) / (horizon - t0).max(1e-300);
                let alpha = &problem.controls[control.index_at(frac)];
                let cp = run.paths.at(r);
                let y = if depth == 0 {
                    0.0
                } else {
                    // Nearest checkpoint at or after r, quantized state.
                    let cpt = checkpoints.iter().position(|&c| c >= r).unwrap_or(checkpoints.len() - 1);
                    let key: Vec<i64> = run.states[k].iter().map(|v| (v / qx).round() as i64).collect();
                    match memo.get(&(depth - 1, cpt, key.clone())) {
                        Some(v) => *v,
                        None => {
                            let xs: Vec<f64> = key.iter().map(|&k| k as f64 * qx).collect();
                            let inner_n = (n / 4).max(8);
                            let inner_step = step * 2.0;
                            let v = value_at(
                                problem,
                                mode,
                                control,
                                checkpoints[cpt],
                                &xs,
                                inner_n,
                                seed,
                                inner_step,
                                depth - 1,
                                f,
                                checkpoints,
                                qx,
                                memo,
                                mix_stream(&[salt, 0x9e, cpt as u64]),
                            )?;
                            memo.insert((depth - 1, cpt, key), v);
                            v
                        }
                    }
                };
                let z = vec![0.0; problem.dim_path];
                acc += f(r, cp, &run.states[k], y, &z, alpha) * h;
            }
            samples.push(acc);
        }
        Ok(crate::util::chunked_mean(&samples))
    }

    // Successive Picard depths must contract; otherwise report divergence.
    let mut prev_gap = f64::INFINITY;
    let mut last = 0.0;
    let mut prev = 0.0;
    for d in 0..=depth {
        let v = value_at(
            problem, mode, control, t, x0, n, seed, step, d, f, &checkpoints, qx, &mut memo, 0x51,
        )?;
        if d >= 1 {
            let gap = (v - prev).abs();
            if d >= 2 && gap > prev_gap * 1.5 + 1e-9 {
                return Err(Error::Convergence(format!(
                    "Picard iterates diverge: |Δ| grew from {prev_gap} to {gap} at depth {d}"
                )));
            }
            prev_gap = gap;
        }
        prev = v;
        last = v;
    }
    Ok(last)
}

/// Value of one pipeline mode: sup over the open-loop catalog of the Monte
/// Carlo mean of `Y_t`.
fn run_value(
    problem: &ShjbProblem,
    mode: &PathMode,
    x0: &[f64],
    n: usize,
    seed: u64,
    opts: &ShjbRunOptions,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    if x0.len() != problem.dim_state {
        return Err(Error::Dimension("state dimension mismatch".into()));
    }
    let t = match mode {
        PathMode::Direct { t, .. } => *t,
        PathMode::Frozen { t, .. } => *t,
    };
    let mut best: Option<(f64, f64, &OpenLoopControl)> = None;
    for control in &opts.controls {
        let (m, se) = match &problem.driver {
            DriverClass::Affine { fy } => {
                let vals: Vec<f64> = (0..n as u64)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = stream_rng(seed, mix_stream(&[0xA11, i]));
                        let noise = brownian_path(t, problem.horizon, problem.dim_path, opts.step, &mut rng);
                        let run = euler_forward(problem, mode, control, t, x0, &noise)
                            .expect("euler run on simulated noise");
                        affine_sample_value(problem, &run, control, t, *fy)
                    })
                    .collect();
                mean_stderr(&vals)
            }
            DriverClass::General { f, depth } => {
                let v = picard_value(problem, mode, control, t, x0, n, seed, opts.step, *depth, f)?;
                (v, 0.0)
            }
        };
        if best.as_ref().map_or(true, |(bm, _, _)| m > *bm) {
            best = Some((m, se, control));
        }
    }
    let (value, stderr, control) = best.unwrap();
    Ok(MCEstimate { value, stderr, n_samples: n, argmax_control: control.label.clone() })
}

/// Direct value `u⁰(t, ω, x)`: coefficients see the true concatenated path.
pub fn simulate_value_direct(
    problem: &ShjbProblem,
    t: f64,
    omega: &SampledPath,
    x: &[f64],
    n: usize,
    seed: u64,
    opts: &ShjbRunOptions,
) -> Result<MCEstimate> {
    if omega.dim() != problem.dim_path {
        return Err(Error::Dimension("path dimension mismatch".into()));
    }
    if t < omega.t_start() || t > omega.t_end() {
        return Err(Error::Domain(format!("time {t} outside the path domain")));
    }
    let mode = PathMode::Direct { omega, t };
    run_value(problem, &mode, x, n, seed, opts)
}

/// Pseudo-Markovian value `θ_n(π; t, x̄, x)`: coefficients see the frozen
/// hitting skeleton of the driving noise.
#[allow(clippy::too_many_arguments)]
pub fn shjb_cascade_value(
    problem: &ShjbProblem,
    pi: &Partition,
    t: f64,
    xbar: &[f64],
    x: &[f64],
    epsilon: f64,
    n: usize,
    seed: u64,
    opts: &ShjbRunOptions,
) -> Result<MCEstimate> {
    if xbar.len() != problem.dim_path {
        return Err(Error::Dimension("path-increment dimension mismatch".into()));
    }
    let mut prefix: Vec<(f64, Vec<f64>)> = Vec::with_capacity(pi.len());
    let mut cum = vec![0.0; problem.dim_path];
    for p in &pi.points {
        for i in 0..problem.dim_path {
            cum[i] += p.increment[i];
        }
        prefix.push((p.time, cum.clone()));
    }
    let anchor_t = pi.last_time(0.0);
    if t < anchor_t || t > problem.horizon {
        return Err(Error::Domain(format!("time {t} outside [t_n, T]")));
    }
    let mode = PathMode::Frozen { prefix, epsilon, anchor_t, xbar: xbar.to_vec(), t };
    run_value(problem, &mode, x, n, seed, opts)
}

/// A 3×3×3 stencil of values around a point of the lifted state space
/// `(t, x̄, x)` (one path dimension, one state dimension).
#[derive(Debug, Clone)]
pub struct ResidualStencil {
    pub t: f64,
    pub xbar: f64,
    pub x: f64,
    pub dt: f64,
    pub dxbar: f64,
    pub dx: f64,
    /// `values[i][j][k]` at `(t + (i−1)dt, x̄ + (j−1)dx̄, x + (k−1)dx)`.
    pub values: [[[f64; 3]; 3]; 3],
}

/// Discrete residual of the lifted PDE
///
/// ```text
/// ∂_t u + ½ ∂²_x̄x̄ u + sup_α [ ½ σ² ∂²_xx u + σ ∂²_xx̄ u + b ∂_x u + f ]
/// ```
///
/// at the stencil center, the path argument frozen at the supplied path.
/// Smooth test fields should produce residuals of the order of the stencil
/// spacing.
pub fn shjb_ppde_residual(problem: &ShjbProblem, frozen: &SampledPath, st: &ResidualStencil) -> Result<f64> {
    if problem.dim_path != 1 || problem.dim_state != 1 {
        return Err(Error::Stencil("residual stencil supports d = d' = 1".into()));
    }
    if !(st.dt > 0.0 && st.dxbar > 0.0 && st.dx > 0.0) {
        return Err(Error::Stencil("stencil spacings must be positive".into()));
    }
    for plane in &st.values {
        for row in plane {
            for v in row {
                if !v.is_finite() {
                    return Err(Error::Stencil("non-finite stencil value".into()));
                }
            }
        }
    }
    let v = &st.values;
    let c = v[1][1][1];
    let v_t = (v[2][1][1] - v[0][1][1]) / (2.0 * st.dt);
    let v_bb = (v[1][2][1] - 2.0 * c + v[1][0][1]) / (st.dxbar * st.dxbar);
    let v_xx = (v[1][1][2] - 2.0 * c + v[1][1][0]) / (st.dx * st.dx);
    let v_x = (v[1][1][2] - v[1][1][0]) / (2.0 * st.dx);
    let v_b = (v[1][2][1] - v[1][0][1]) / (2.0 * st.dxbar);
    let v_xb = (v[1][2][2] - v[1][2][0] - v[1][0][2] + v[1][0][0]) / (4.0 * st.dx * st.dxbar);
    let xs = [st.x];
    let mut best = f64::NEG_INFINITY;
    for alpha in &problem.controls {
        let s = (problem.sigma)(st.t, frozen, &xs, alpha)[0];
        let b = (problem.b)(st.t, frozen, &xs, alpha)[0];
        let fval = match &problem.driver {
            DriverClass::Affine { fy } => (problem.f0)(st.t, frozen, &xs, alpha) + fy * c,
            DriverClass::General { f, .. } => {
                let z = [v_b + s * v_x];
                f(st.t, frozen, &xs, c, &z, alpha)
            }
        };
        best = best.max(0.5 * s * s * v_xx + s * v_xb + b * v_x + fval);
    }
    Ok(v_t + 0.5 * v_bb + best)
}
