//! The pseudo-Markovian cascade engine.
//!
//! A path-dependent value `u(t, ω)` is approximated by a family of
//! deterministic functions `v_n(π_n; t, x)` indexed by hitting partitions
//! `π_n = (H_i, ω_{H_i} − ω_{H_{i−1}})`, glued by the compatibility rule
//!
//! ```text
//! v_n(π_n; t, x̄) = v_{n+1}(π_n ⊕ (t, x̄); t, 0)   on the lateral surface.
//! ```
//!
//! The truncated backward construction runs `m` levels of path-frozen cone
//! solves on top of a Monte Carlo base layer with the discounted
//! representation
//!
//! ```text
//! θ̄ = sup_{P, b} E[ e^{∫b} ξ(B^skeleton) + C₀ ∫ e^{∫b} ],
//! θ̲ = inf_{P, b} E[ e^{∫b} ξ(B^skeleton) − C₀ ∫ e^{∫b} ],
//! ```
//!
//! where the skeleton is the linear interpolation of the partition knots and
//! the simulated path sampled at its own hitting sequence. Upper and lower
//! evaluators sandwich each other by construction; the measured root gap is
//! the engine's accuracy diagnostic.
//!
//! Combinatorial growth of the partition space is the central cost. The
//! engine mitigates it with level truncation, quantized memoization keys,
//! coarse lateral boundary sampling with interpolation, and the declared
//! problem class `markovian-features` under which every evaluator depends on
//! `π_n` only through `(t_n, Σ x_j)`.

use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{solve_cone, ConeGrid, Generator, ValueField};
use crate::hitting::{cone_classify, hitting_sequence_from, hitting_time, ConeRegion, ConeSpec, HitKind, Partition};
use crate::nonlin::{catalog_with_feedback, default_catalog, simulate_one, wiener_law, ControlLaw, MeasureFamilySpec};
use crate::path::SampledPath;
use crate::util::{chunked_mean, mix_stream};
use crate::{Error, Result};

/// Declared dependence class of generator and terminal data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemClass {
    /// `ξ` and `G` depend on the path only through `(t_n, Σ x_j)` and the
    /// terminal value; evaluators collapse to a two-variable table.
    MarkovianFeatures,
    /// Full partition keys; boundary data solved lazily per touched node.
    FullPath,
}

type GenFactory = dyn Fn(&SampledPath) -> Generator + Send + Sync;
type Terminal = dyn Fn(&SampledPath) -> f64 + Send + Sync;

/// A path-frozen problem: a generator factory evaluated on frozen paths, a
/// bounded terminal functional, and the admissibility bounds.
#[derive(Clone)]
pub struct FrozenProblem {
    pub label: String,
    pub class: ProblemClass,
    pub dim: usize,
    /// Lipschitz bound `L` of the generator in `(y, z, Γ)`.
    pub bound_l: f64,
    /// Bound `C₀` on `|G(·, 0, 0, 0)|`.
    pub c0: f64,
    pub horizon: f64,
    gen_factory: Arc<GenFactory>,
    terminal: Arc<Terminal>,
}

impl std::fmt::Debug for FrozenProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FrozenProblem({}, d={}, L={}, C0={})", self.label, self.dim, self.bound_l, self.c0)
    }
}

impl FrozenProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        class: ProblemClass,
        dim: usize,
        bound_l: f64,
        c0: f64,
        horizon: f64,
        gen_factory: impl Fn(&SampledPath) -> Generator + Send + Sync + 'static,
        terminal: impl Fn(&SampledPath) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(bound_l > 0.0) || c0 < 0.0 || !(horizon > 0.0) || dim == 0 {
            return Err(Error::Config("bad problem bounds".into()));
        }
        Ok(Self {
            label: label.into(),
            class,
            dim,
            bound_l,
            c0,
            horizon,
            gen_factory: Arc::new(gen_factory),
            terminal: Arc::new(terminal),
        })
    }

    /// The hitting slope `L₁ = L + 1` used by the partition machinery.
    pub fn slope(&self) -> f64 {
        self.bound_l + 1.0
    }

    pub fn generator_for(&self, frozen: &SampledPath) -> Generator {
        (self.gen_factory)(frozen)
    }

    pub fn terminal_value(&self, path: &SampledPath) -> f64 {
        (self.terminal)(path)
    }

    /// Same generator, different terminal (used by comparison checks).
    pub fn with_terminal(&self, terminal: impl Fn(&SampledPath) -> f64 + Send + Sync + 'static) -> Self {
        let mut out = self.clone();
        out.terminal = Arc::new(terminal);
        out
    }

    /// Heat problem `G = ½ tr Γ` with terminal `φ(ω_T)`; `L = ½` is both the
    /// generator's Lipschitz constant and the smallest bound admitting the
    /// unit diffusion.
    pub fn heat_terminal(
        dim: usize,
        horizon: f64,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            "heat",
            ProblemClass::MarkovianFeatures,
            dim,
            0.5,
            0.0,
            horizon,
            |_| Generator::heat(),
            move |p| phi(p.knot_value(p.n_knots() - 1)),
        )
    }

    /// Pure transport `G ≡ 0` with terminal `φ(ω_T)`.
    pub fn transport_terminal(
        dim: usize,
        bound_l: f64,
        horizon: f64,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            "transport",
            ProblemClass::MarkovianFeatures,
            dim,
            bound_l,
            0.0,
            horizon,
            |_| Generator::zero(),
            move |p| phi(p.knot_value(p.n_knots() - 1)),
        )
    }
}

/// Base-layer control family choice.
#[derive(Debug, Clone, Default)]
pub enum BaseFamily {
    /// The Wiener law only (needs `2L ≥ 1`): collapses the bounding bracket
    /// to plain Monte Carlo, appropriate for linear-representation checks.
    WienerOnly,
    /// Constant-drift catalog.
    #[default]
    Default,
    /// Constant catalog plus bang-bang feedback.
    WithFeedback,
    Custom(Vec<ControlLaw>),
}

impl BaseFamily {
    fn resolve(&self, spec: &MeasureFamilySpec) -> Result<Vec<ControlLaw>> {
        Ok(match self {
            BaseFamily::WienerOnly => vec![wiener_law(spec)?],
            BaseFamily::Default => default_catalog(spec),
            BaseFamily::WithFeedback => catalog_with_feedback(spec),
            BaseFamily::Custom(laws) => laws.clone(),
        })
    }
}

/// Engine configuration.
#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub epsilon: f64,
    /// Truncation depth `m ≥ 1`: levels `< m` are cone solves, levels `≥ m`
    /// the Monte Carlo base layer.
    pub levels: usize,
    pub dx: f64,
    pub dt: f64,
    /// Lateral boundary sample count per direction.
    pub boundary_samples: usize,
    /// Memoization quantum: anchor times and increments are rounded to
    /// multiples of this before solving. Must satisfy `q ≤ dx/2`.
    pub quantum: f64,
    pub base_samples: usize,
    pub base_step: f64,
    pub seed: u64,
    pub family: BaseFamily,
    pub discount_catalog: Vec<f64>,
    /// Hard cap on cone solves plus base evaluations.
    pub max_solves: usize,
}

impl CascadeConfig {
    pub fn validate(&self, problem: &FrozenProblem) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("cascade needs at least one level".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.quantum > self.dx / 2.0 + 1e-15 || !(self.quantum > 0.0) {
            return Err(Error::Config(format!("quantum {} must lie in (0, dx/2]", self.quantum)));
        }
        if self.boundary_samples < 2 {
            return Err(Error::Config("need at least two boundary samples".into()));
        }
        if self.base_samples < 2 {
            return Err(Error::Config("need at least two base samples".into()));
        }
        for &b in &self.discount_catalog {
            if b.abs() > problem.bound_l * (1.0 + 1e-12) {
                return Err(Error::Bound(format!("discount {b} outside [−L, L]")));
            }
        }
        if self.discount_catalog.is_empty() {
            return Err(Error::Config("empty discount catalog".into()));
        }
        Ok(())
    }

    /// Reasonable defaults for a problem at accuracy scale `dx = ε/25`.
    pub fn for_problem(problem: &FrozenProblem, epsilon: f64, levels: usize, seed: u64) -> Self {
        let dx = epsilon / 25.0;
        let g = problem.generator_for(&SampledPath::zero(problem.dim, 0.0, problem.horizon));
        let d = problem.dim as f64;
        let denom = 2.0 * g.lip_gamma * d / (dx * dx) + g.lip_z * d / dx + g.lip_y;
        let dt = if denom > 0.0 { (0.9 / denom).min(dx / 2.0) } else { dx / 2.0 };
        Self {
            epsilon,
            levels,
            dx,
            dt,
            boundary_samples: 24,
            quantum: dx / 2.0,
            base_samples: 400,
            base_step: 2e-3 * problem.horizon,
            seed,
            family: BaseFamily::Default,
            discount_catalog: vec![-problem.bound_l, 0.0, problem.bound_l],
            max_solves: 2_000_000,
        }
    }
}

/// Evaluator side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// A cascade anchor: the partition seen so far. In markovian-features mode
/// only the condensed state `(t, Σ x_j)` matters; in full mode the complete
/// quantized point list is carried.
#[derive(Debug, Clone)]
pub struct CascadeAnchor {
    pub t: f64,
    pub cum: Vec<f64>,
    /// Full partition `(t_i, cumulative value after t_i)`; empty at the root.
    pub knots: Vec<(f64, Vec<f64>)>,
}

impl CascadeAnchor {
    pub fn root(dim: usize) -> Self {
        Self { t: 0.0, cum: vec![0.0; dim], knots: Vec::new() }
    }

    /// Anchor from a hitting partition.
    pub fn from_partition(pi: &Partition, dim: usize) -> Self {
        let mut cum = vec![0.0; dim];
        let mut knots = Vec::with_capacity(pi.len());
        for p in &pi.points {
            for i in 0..dim {
                cum[i] += p.increment[i];
            }
            knots.push((p.time, cum.clone()));
        }
        let t = pi.points.last().map(|p| p.time).unwrap_or(0.0);
        Self { t, cum, knots }
    }

    /// Extended anchor after a lateral exit at `(s, x̄)`.
    fn extend(&self, s: f64, xbar: &[f64], class: ProblemClass) -> Self {
        let cum: Vec<f64> = self.cum.iter().zip(xbar).map(|(c, x)| c + x).collect();
        let mut knots = match class {
            ProblemClass::MarkovianFeatures => Vec::new(),
            ProblemClass::FullPath => self.knots.clone(),
        };
        if matches!(class, ProblemClass::FullPath) {
            knots.push((s, cum.clone()));
        }
        Self { t: s, cum, knots }
    }

    /// The frozen interpolation: through the partition knots, constant to
    /// the horizon. In markovian mode a single straight leg to `(t, cum)`.
    pub fn frozen_path(&self, dim: usize, horizon: f64, class: ProblemClass) -> SampledPath {
        let mut path_knots: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![0.0; dim])];
        match class {
            ProblemClass::MarkovianFeatures => {
                if self.t > 0.0 {
                    path_knots.push((self.t, self.cum.clone()));
                }
            }
            ProblemClass::FullPath => {
                for (t, v) in &self.knots {
                    path_knots.push((*t, v.clone()));
                }
            }
        }
        let last = path_knots.last().unwrap().clone();
        if last.0 < horizon {
            path_knots.push((horizon, last.1));
        }
        SampledPath::new(0.0, horizon, path_knots).expect("anchor knots are ordered")
    }

    /// Frozen path extended by a terminal increment at the horizon.
    fn frozen_with_terminal(&self, dim: usize, horizon: f64, class: ProblemClass, xbar: &[f64]) -> SampledPath {
        let mut path_knots: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![0.0; dim])];
        match class {
            ProblemClass::MarkovianFeatures => {
                if self.t > 0.0 && self.t < horizon {
                    path_knots.push((self.t, self.cum.clone()));
                }
            }
            ProblemClass::FullPath => {
                for (t, v) in &self.knots {
                    if *t < horizon {
                        path_knots.push((*t, v.clone()));
                    }
                }
            }
        }
        let terminal: Vec<f64> = self.cum.iter().zip(xbar).map(|(c, x)| c + x).collect();
        path_knots.push((horizon, terminal));
        SampledPath::new(0.0, horizon, path_knots).expect("anchor knots are ordered")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    side: u8,
    level: u32,
    body: Vec<i64>,
}

/// Per-level evaluation statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: usize,
    pub evaluations: usize,
    pub max_gap: f64,
}

struct Engine {
    problem: FrozenProblem,
    config: CascadeConfig,
    family: Vec<ControlLaw>,
    apex_memo: DashMap<Key, f64>,
    field_memo: DashMap<Key, Arc<ValueField>>,
    solve_count: AtomicUsize,
    deepest: AtomicUsize,
}

impl Engine {
    fn new(problem: FrozenProblem, config: CascadeConfig) -> Result<Arc<Self>> {
        config.validate(&problem)?;
        let sim_spec = MeasureFamilySpec::new(problem.bound_l, problem.dim, 0.0, problem.horizon, config.base_step)?;
        let family = config.family.resolve(&sim_spec)?;
        if family.is_empty() {
            return Err(Error::Config("empty base control family".into()));
        }
        Ok(Arc::new(Self {
            problem,
            config,
            family,
            apex_memo: DashMap::new(),
            field_memo: DashMap::new(),
            solve_count: AtomicUsize::new(0),
            deepest: AtomicUsize::new(0),
        }))
    }

    fn quantize(&self, v: f64) -> f64 {
        let q = self.config.quantum;
        (v / q).round() * q
    }

    fn quantize_anchor(&self, a: &CascadeAnchor) -> CascadeAnchor {
        let top = (self.problem.horizon - self.config.quantum).max(0.0);
        let qt = self.quantize(a.t).clamp(0.0, top);
        let cum: Vec<f64> = a.cum.iter().map(|&v| self.quantize(v)).collect();
        let mut knots: Vec<(f64, Vec<f64>)> = Vec::with_capacity(a.knots.len());
        for (t, v) in &a.knots {
            let t = self.quantize(*t).clamp(0.0, top);
            let v: Vec<f64> = v.iter().map(|&x| self.quantize(x)).collect();
            match knots.last_mut() {
                Some((lt, lv)) if *lt >= t => *lv = v,
                _ => knots.push((t, v)),
            }
        }
        CascadeAnchor { t: qt, cum, knots }
    }

    fn key(&self, side: Side, level: usize, a: &CascadeAnchor) -> Key {
        let q = self.config.quantum;
        let enc = |v: f64| (v / q).round() as i64;
        let mut body = Vec::new();
        match self.problem.class {
            ProblemClass::MarkovianFeatures => {
                body.push(enc(a.t));
                body.extend(a.cum.iter().map(|&v| enc(v)));
            }
            ProblemClass::FullPath => {
                for (t, v) in &a.knots {
                    body.push(enc(*t));
                    body.extend(v.iter().map(|&x| enc(x)));
                }
            }
        }
        Key { side: if side == Side::Upper { 0 } else { 1 }, level: level as u32, body }
    }

    fn charge_solve(&self, level: usize) -> Result<()> {
        self.deepest.fetch_max(level, AtomicOrdering::Relaxed);
        let n = self.solve_count.fetch_add(1, AtomicOrdering::Relaxed) + 1;
        if n > self.config.max_solves {
            return Err(Error::Budget(format!(
                "cascade exceeded {} solves (deepest level reached: {})",
                self.config.max_solves,
                self.deepest.load(AtomicOrdering::Relaxed)
            )));
        }
        Ok(())
    }

    /// Apex value `v_level(anchor; anchor.t, 0)`, memoized on quantized keys.
    fn apex_value(&self, side: Side, level: usize, anchor: &CascadeAnchor) -> Result<f64> {
        let qa = self.quantize_anchor(anchor);
        let key = self.key(side, level, &qa);
        if let Some(v) = self.apex_memo.get(&key) {
            return Ok(*v);
        }
        let value = if level >= self.config.levels {
            self.base_value(side, &qa, qa.t, &vec![0.0; self.problem.dim])?
        } else {
            let field = self.solve_level_field(side, level, &qa)?;
            field.apex_value()
        };
        self.apex_memo.insert(key, value);
        Ok(value)
    }

    /// Full cone solve at a (quantized) anchor with boundary data from the
    /// next level.
    fn solve_level_field(&self, side: Side, level: usize, qa: &CascadeAnchor) -> Result<Arc<ValueField>> {
        let key = self.key(side, level, qa);
        if let Some(f) = self.field_memo.get(&key) {
            return Ok(f.clone());
        }
        self.charge_solve(level)?;
        let problem = &self.problem;
        let cfg = &self.config;
        let spec = ConeSpec::new(qa.t, cfg.epsilon, problem.slope(), problem.horizon)?;
        let grid = ConeGrid::new(spec, problem.dim, cfg.dx, cfg.dt)?;
        let frozen = qa.frozen_path(problem.dim, problem.horizon, problem.class);
        let generator = problem.generator_for(&frozen);
        grid.check_cfl(&generator)?;

        // Coarse lateral table: child apexes at sampled (time, direction),
        // interpolated linearly in time inside the closure.
        let t_top = spec.top_time();
        let n_s = cfg.boundary_samples;
        let sample_times: Vec<f64> =
            (0..n_s).map(|k| qa.t + (t_top - qa.t) * (k as f64 + 0.5) / n_s as f64).collect();
        let directions: Vec<Vec<f64>> = lateral_directions(problem.dim);
        let mut entries: Vec<(usize, usize)> = Vec::new();
        for ti in 0..sample_times.len() {
            for di in 0..directions.len() {
                entries.push((ti, di));
            }
        }
        let table: Vec<Vec<f64>> = {
            let rows: Result<Vec<(usize, usize, f64)>> = entries
                .par_iter()
                .map(|&(ti, di)| {
                    let s = sample_times[ti];
                    let r = spec.radius_at(s).max(0.0);
                    let xbar: Vec<f64> = directions[di].iter().map(|&u| u * r).collect();
                    let child = qa.extend(s, &xbar, problem.class);
                    let v = self.apex_value(side, level + 1, &child)?;
                    Ok((ti, di, v))
                })
                .collect();
            let mut table = vec![vec![0.0; directions.len()]; sample_times.len()];
            for (ti, di, v) in rows? {
                table[ti][di] = v;
            }
            table
        };

        let horizon = problem.horizon;
        let at_horizon = t_top >= horizon - 1e-14;
        let anchor_for_terminal = qa.clone();
        let class = problem.class;
        let dim = problem.dim;
        let problem_ref = problem.clone();
        let boundary = move |s: f64, x: &[f64]| -> f64 {
            if at_horizon && s >= horizon - 1e-12 {
                let path = anchor_for_terminal.frozen_with_terminal(dim, horizon, class, x);
                return problem_ref.terminal_value(&path);
            }
            // Lateral: nearest direction, linear in time.
            let di = nearest_direction(&directions, x);
            let n = sample_times.len();
            let (lo, hi, lam) = if s <= sample_times[0] {
                (0, 0, 0.0)
            } else if s >= sample_times[n - 1] {
                (n - 1, n - 1, 0.0)
            } else {
                let mut k = 0;
                while k + 1 < n && sample_times[k + 1] < s {
                    k += 1;
                }
                let lam = (s - sample_times[k]) / (sample_times[k + 1] - sample_times[k]);
                (k, k + 1, lam)
            };
            (1.0 - lam) * table[lo][di] + lam * table[hi][di]
        };

        let field = Arc::new(solve_cone(&generator, &grid, boundary)?);
        self.field_memo.insert(key, field.clone());
        Ok(field)
    }

    /// Monte Carlo base layer at `(anchor; t, x)`: the discounted terminal
    /// representation on the simulated hitting skeleton.
    fn base_value(&self, side: Side, qa: &CascadeAnchor, t: f64, x: &[f64]) -> Result<f64> {
        self.charge_solve(self.config.levels)?;
        let problem = &self.problem;
        let cfg = &self.config;
        let horizon = problem.horizon;
        let slope = problem.slope();
        let dim = problem.dim;
        let spec = if qa.t < horizon { Some(ConeSpec::new(qa.t, cfg.epsilon, slope, horizon)?) } else { None };
        // Quantizing the anchor may displace the cone by up to one quantum;
        // points inside the unquantized cone are clamped back in, anything
        // farther out is a genuine domain violation.
        let slack = cfg.quantum * (1.0 + slope) + 1e-12;
        let mut t = t;
        let mut x = x.to_vec();
        if let Some(spec) = &spec {
            let apex = t <= qa.t && x.iter().all(|&v| v == 0.0);
            if !apex {
                if t < qa.t - slack {
                    return Err(Error::Domain(format!(
                        "base evaluation time {t} precedes the anchor time {}",
                        qa.t
                    )));
                }
                t = t.max(qa.t);
                let r = spec.radius_at(t);
                let xn = crate::path::norm(&x);
                if xn > r + slack {
                    return Err(Error::Domain(format!(
                        "base evaluation point (t={t}, |x|={xn}) outside the anchor cone at t_n={}",
                        qa.t
                    )));
                }
                if xn > r && xn > 0.0 {
                    let scale = (r / xn).max(0.0);
                    for xi in &mut x {
                        *xi *= scale;
                    }
                }
            } else {
                t = qa.t;
            }
        }
        let x = &x[..];

        // Terminal edge: no simulation window left.
        if t >= horizon - 1e-14 {
            let path = qa.frozen_with_terminal(dim, horizon, problem.class, x);
            let xi = problem.terminal_value(&path);
            return Ok(self.discount_extreme(side, 0.0, xi));
        }

        let sim_spec = MeasureFamilySpec::new(problem.bound_l, dim, t, horizon, cfg.base_step)?;
        let n = cfg.base_samples;

        let mut best: Option<f64> = None;
        for law in &self.family {
            law.validate(&sim_spec)?;
            // Common random numbers across anchors (streams keyed by the
            // sample index only): neighboring memoized base values share
            // their noise, so boundary tables vary smoothly in the anchor
            // and lateral compatibility measures interpolation error rather
            // than independent Monte Carlo scatter.
            let xis: Vec<f64> = (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let sim = simulate_one(law, &sim_spec, cfg.seed, mix_stream(&[0xBA5E, i]));
                    self.skeleton_terminal(qa, t, x, &sim, &spec)
                })
                .collect();
            for &b in &cfg.discount_catalog {
                let disc = (b * (horizon - t)).exp();
                let c0_int = if b == 0.0 { horizon - t } else { (disc - 1.0) / b };
                let vals: Vec<f64> = xis
                    .iter()
                    .map(|&xi| match side {
                        Side::Upper => disc * xi + problem.c0 * c0_int,
                        Side::Lower => disc * xi - problem.c0 * c0_int,
                    })
                    .collect();
                let m = chunked_mean(&vals);
                best = Some(match (best, side) {
                    (None, _) => m,
                    (Some(b0), Side::Upper) => b0.max(m),
                    (Some(b0), Side::Lower) => b0.min(m),
                });
            }
        }
        Ok(best.unwrap())
    }

    fn discount_extreme(&self, side: Side, window: f64, xi: f64) -> f64 {
        let mut best: Option<f64> = None;
        for &b in &self.config.discount_catalog {
            let disc = (b * window).exp();
            let c0_int = if b == 0.0 { window } else { (disc - 1.0) / b };
            let v = match side {
                Side::Upper => disc * xi + self.problem.c0 * c0_int,
                Side::Lower => disc * xi - self.problem.c0 * c0_int,
            };
            best = Some(match (best, side) {
                (None, _) => v,
                (Some(b0), Side::Upper) => b0.max(v),
                (Some(b0), Side::Lower) => b0.min(v),
            });
        }
        best.unwrap()
    }

    /// Terminal value on the assembled skeleton: partition knots, then the
    /// simulated path sampled at its own hitting sequence.
    fn skeleton_terminal(
        &self,
        qa: &CascadeAnchor,
        t: f64,
        x: &[f64],
        sim: &SampledPath,
        spec: &Option<ConeSpec>,
    ) -> f64 {
        let problem = &self.problem;
        let horizon = problem.horizon;
        let dim = problem.dim;
        let mut knots: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![0.0; dim])];
        match problem.class {
            ProblemClass::MarkovianFeatures => {
                if qa.t > 0.0 {
                    knots.push((qa.t, qa.cum.clone()));
                }
            }
            ProblemClass::FullPath => {
                for (kt, kv) in &qa.knots {
                    knots.push((*kt, kv.clone()));
                }
            }
        }
        let offset: Vec<f64> = qa.cum.iter().zip(x).map(|(c, xi)| c + xi).collect();
        let anchor_vals = sim.eval(t).expect("sim covers t");
        let push_knot = |knots: &mut Vec<(f64, Vec<f64>)>, s: f64, sim_val: &[f64]| {
            let v: Vec<f64> = offset
                .iter()
                .zip(sim_val.iter().zip(&anchor_vals))
                .map(|(o, (sv, av))| o + sv - av)
                .collect();
            if s > knots.last().unwrap().0 {
                knots.push((s, v));
            }
        };
        let sim_at = |s: f64| sim.eval(s).expect("sim covers window");
        let first = match spec {
            Some(spec) => hitting_time(sim, t, x, spec).expect("hitting on simulated path"),
            None => crate::hitting::HittingResult { time: horizon, kind: HitKind::Terminal, location: x.to_vec() },
        };
        push_knot(&mut knots, first.time, &sim_at(first.time));
        if first.kind == HitKind::Lateral && first.time < horizon {
            let seq = hitting_sequence_from(sim, first.time, self.config.epsilon, self.problem.slope())
                .expect("hitting sequence terminates");
            for p in &seq.points {
                push_knot(&mut knots, p.time, &sim_at(p.time));
            }
            push_knot(&mut knots, horizon, &sim_at(horizon));
        } else if first.time < horizon {
            push_knot(&mut knots, horizon, &sim_at(horizon));
        }
        let skeleton = SampledPath::new(0.0, horizon, knots).expect("skeleton knots ordered");
        problem.terminal_value(&skeleton)
    }

    /// Evaluate the glued ε-Markovian process at `(t, ω)`.
    fn evaluate(&self, side: Side, t: f64, omega: &SampledPath) -> Result<f64> {
        let problem = &self.problem;
        if t < omega.t_start() || t > omega.t_end() {
            return Err(Error::Domain(format!("evaluation time {t} outside the path domain")));
        }
        if omega.t_end() < problem.horizon - 1e-12 {
            return Err(Error::Domain("path does not cover the horizon".into()));
        }
        let pi = crate::hitting::hitting_sequence(omega, self.config.epsilon, problem.slope())?;
        let active: Vec<_> = pi.points.iter().filter(|p| p.time <= t).cloned().collect();
        let truncated =
            Partition { epsilon: pi.epsilon, slope: pi.slope, points: active, terminal_time: pi.terminal_time };
        let anchor = CascadeAnchor::from_partition(&truncated, problem.dim);
        let level = truncated.len();
        let base = omega.eval(anchor.t)?;
        let now = omega.eval(t)?;
        let x: Vec<f64> = now.iter().zip(&base).map(|(a, b)| a - b).collect();
        let qa = self.quantize_anchor(&anchor);
        if level >= self.config.levels {
            self.base_value(side, &qa, t, &x)
        } else {
            let field = self.solve_level_field(side, level, &qa)?;
            Ok(field.eval(t, &x))
        }
    }
}

fn lateral_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => {
            let mut dirs = Vec::new();
            for axis in 0..dim {
                for sgn in [1.0, -1.0] {
                    let mut d = vec![0.0; dim];
                    d[axis] = sgn;
                    dirs.push(d);
                }
            }
            let inv = 1.0 / (dim as f64).sqrt();
            for mask in 0..(1u32 << dim) {
                let d: Vec<f64> = (0..dim).map(|i| if mask & (1 << i) != 0 { inv } else { -inv }).collect();
                dirs.push(d);
            }
            dirs
        }
    }
}

fn nearest_direction(dirs: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, d) in dirs.iter().enumerate() {
        let dot: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum();
        if dot > best_dot {
            best_dot = dot;
            best = i;
        }
    }
    best
}

/// A solved cascade: lazily evaluable upper/lower families with gap
/// diagnostics.
pub struct CascadeSolution {
    upper: Arc<Engine>,
    lower: Arc<Engine>,
    pub root_upper: f64,
    pub root_lower: f64,
    pub per_level: Vec<LevelStat>,
}

impl CascadeSolution {
    pub fn root_gap(&self) -> f64 {
        self.root_upper - self.root_lower
    }

    pub fn problem(&self) -> &FrozenProblem {
        &self.upper.problem
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.upper.config
    }

    fn engine(&self, side: Side) -> &Arc<Engine> {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    /// Level evaluator `θ_level(anchor; t, x)` for either side.
    pub fn theta(&self, side: Side, anchor: &CascadeAnchor, level: usize, t: f64, x: &[f64]) -> Result<f64> {
        let eng = self.engine(side);
        let qa = eng.quantize_anchor(anchor);
        if level >= eng.config.levels {
            eng.base_value(side, &qa, t, x)
        } else {
            Ok(eng.solve_level_field(side, level, &qa)?.eval(t, x))
        }
    }

    pub fn theta_upper(&self, anchor: &CascadeAnchor, level: usize, t: f64, x: &[f64]) -> Result<f64> {
        self.theta(Side::Upper, anchor, level, t, x)
    }

    pub fn theta_lower(&self, anchor: &CascadeAnchor, level: usize, t: f64, x: &[f64]) -> Result<f64> {
        self.theta(Side::Lower, anchor, level, t, x)
    }

    /// Evaluation of the glued process `u^ε(t, ω)`.
    pub fn evaluate_upper(&self, t: f64, omega: &SampledPath) -> Result<f64> {
        self.upper.evaluate(Side::Upper, t, omega)
    }

    pub fn evaluate_lower(&self, t: f64, omega: &SampledPath) -> Result<f64> {
        self.lower.evaluate(Side::Lower, t, omega)
    }

    /// Compatibility residuals: at sampled lateral points of each level the
    /// parent field must match the child apex. Returns the worst residual
    /// per level along a random descent.
    pub fn compatibility_residuals(&self, side: Side, samples: usize, seed: u64) -> Result<Vec<f64>> {
        use rand::Rng;
        let eng = self.engine(side);
        let mut worst = vec![0.0f64; eng.config.levels.max(1)];
        let mut rng = crate::util::stream_rng(seed, 0xC0);
        let mut anchor = CascadeAnchor::root(eng.problem.dim);
        for level in 0..eng.config.levels {
            let qa = eng.quantize_anchor(&anchor);
            let spec = ConeSpec::new(qa.t, eng.config.epsilon, eng.problem.slope(), eng.problem.horizon)?;
            let field = eng.solve_level_field(side, level, &qa)?;
            let t_top = spec.top_time();
            let dirs = lateral_directions(eng.problem.dim);
            let mut descend: Option<CascadeAnchor> = None;
            for _ in 0..samples {
                let s = qa.t + (t_top - qa.t) * rng.gen_range(0.05..0.95);
                let r = spec.radius_at(s);
                let d = &dirs[rng.gen_range(0..dirs.len())];
                let xbar: Vec<f64> = d.iter().map(|&u| u * r).collect();
                let parent = field.eval(s, &xbar);
                let child_anchor = qa.extend(s, &xbar, eng.problem.class);
                let child = eng.apex_value(side, level + 1, &child_anchor)?;
                worst[level] = worst[level].max((parent - child).abs());
                descend.get_or_insert(child_anchor);
            }
            anchor = descend.unwrap();
            if anchor.t >= eng.problem.horizon - 2.0 * eng.config.quantum {
                break;
            }
        }
        Ok(worst)
    }
}

/// Builds the upper/lower cascade for a problem and returns the root values
/// with per-level statistics.
pub fn cascade_solve(problem: &FrozenProblem, config: &CascadeConfig) -> Result<CascadeSolution> {
    let upper = Engine::new(problem.clone(), config.clone())?;
    let lower = Engine::new(problem.clone(), config.clone())?;
    let root = CascadeAnchor::root(problem.dim);
    let root_upper = upper.apex_value(Side::Upper, 0, &root)?;
    let root_lower = lower.apex_value(Side::Lower, 0, &root)?;

    // Per-level stats: join upper/lower memoized apex values on shared keys.
    let mut per_level: Vec<LevelStat> = Vec::new();
    for level in 0..=config.levels {
        let mut evaluations = 0usize;
        let mut max_gap = 0.0f64;
        for entry in upper.apex_memo.iter() {
            if entry.key().level as usize != level {
                continue;
            }
            evaluations += 1;
            let lower_key = Key { side: 1, ..entry.key().clone() };
            if let Some(lo) = lower.apex_memo.get(&lower_key) {
                max_gap = max_gap.max(*entry.value() - *lo);
            }
        }
        per_level.push(LevelStat { level, evaluations, max_gap });
    }
    Ok(CascadeSolution { upper, lower, root_upper, root_lower, per_level })
}

/// Base-layer evaluator at an explicit partition point (upper side).
pub fn theta_base_upper(
    problem: &FrozenProblem,
    config: &CascadeConfig,
    pi: &Partition,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    theta_base(problem, config, pi, t, x, Side::Upper)
}

/// Base-layer evaluator at an explicit partition point (lower side).
pub fn theta_base_lower(
    problem: &FrozenProblem,
    config: &CascadeConfig,
    pi: &Partition,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    theta_base(problem, config, pi, t, x, Side::Lower)
}

fn theta_base(
    problem: &FrozenProblem,
    config: &CascadeConfig,
    pi: &Partition,
    t: f64,
    x: &[f64],
    side: Side,
) -> Result<f64> {
    let engine = Engine::new(problem.clone(), config.clone())?;
    let anchor = CascadeAnchor::from_partition(pi, problem.dim);
    if anchor.t < problem.horizon {
        let spec = ConeSpec::new(anchor.t, config.epsilon, problem.slope(), problem.horizon)?;
        let region = cone_classify(&spec, t, x);
        let apex = t == anchor.t && x.iter().all(|&v| v == 0.0);
        if region == ConeRegion::Outside && !apex {
            return Err(Error::Domain(format!(
                "point (t={t}) outside the admissible cone at the last partition time {}",
                anchor.t
            )));
        }
    }
    let qa = engine.quantize_anchor(&anchor);
    engine.base_value(side, &qa, t, x)
}

/// Modulus-shifted view of a cascade: `ũ(t, ω) = u(t, ω) − ρ (T − t)` and
/// the correspondingly shifted evaluator family.
pub struct ShiftedCascade<'a> {
    pub inner: &'a CascadeSolution,
    pub rho: f64,
}

/// The time-modulus shift; preserves terminal values and compatibility.
pub fn modulus_shift(solution: &CascadeSolution, rho: f64) -> Result<ShiftedCascade<'_>> {
    if rho < 0.0 {
        return Err(Error::Config("shift modulus must be nonnegative".into()));
    }
    Ok(ShiftedCascade { inner: solution, rho })
}

impl ShiftedCascade<'_> {
    fn shift(&self, t: f64) -> f64 {
        self.rho * (self.inner.problem().horizon - t)
    }

    pub fn evaluate_upper(&self, t: f64, omega: &SampledPath) -> Result<f64> {
        Ok(self.inner.evaluate_upper(t, omega)? - self.shift(t))
    }

    pub fn evaluate_lower(&self, t: f64, omega: &SampledPath) -> Result<f64> {
        Ok(self.inner.evaluate_lower(t, omega)? - self.shift(t))
    }

    pub fn theta_upper(&self, anchor: &CascadeAnchor, level: usize, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.inner.theta_upper(anchor, level, t, x)? - self.shift(t))
    }

    pub fn theta_lower(&self, anchor: &CascadeAnchor, level: usize, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.inner.theta_lower(anchor, level, t, x)? - self.shift(t))
    }

    /// The shift depends on time only, so lateral compatibility residuals
    /// coincide with the unshifted family's.
    pub fn compatibility_residuals(&self, side: Side, samples: usize, seed: u64) -> Result<Vec<f64>> {
        self.inner.compatibility_residuals(side, samples, seed)
    }
}

/// Report of the executable comparison check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub root_low_upper: f64,
    pub root_high_upper: f64,
    pub root_low_lower: f64,
    pub root_high_lower: f64,
    /// Worst `value(low) − value(high)` over the sampled points (positive
    /// means an ordering violation).
    pub worst_violation: f64,
    pub n_points: usize,
}

/// Builds cascades for two ordered terminals and verifies the ordering of
/// the evaluators at the sampled points. Report-only.
pub fn verify_comparison(
    problem: &FrozenProblem,
    xi_low: impl Fn(&SampledPath) -> f64 + Send + Sync + 'static,
    xi_high: impl Fn(&SampledPath) -> f64 + Send + Sync + 'static,
    config: &CascadeConfig,
    sample_points: &[(f64, SampledPath)],
) -> Result<ComparisonReport> {
    let p_low = problem.with_terminal(xi_low);
    let p_high = problem.with_terminal(xi_high);
    let low = cascade_solve(&p_low, config)?;
    let high = cascade_solve(&p_high, config)?;
    let mut worst = (low.root_upper - high.root_upper).max(low.root_lower - high.root_lower);
    for (t, omega) in sample_points {
        let lu = low.evaluate_upper(*t, omega)?;
        let hu = high.evaluate_upper(*t, omega)?;
        let ll = low.evaluate_lower(*t, omega)?;
        let hl = high.evaluate_lower(*t, omega)?;
        worst = worst.max(lu - hu).max(ll - hl);
    }
    Ok(ComparisonReport {
        root_low_upper: low.root_upper,
        root_high_upper: high.root_upper,
        root_low_lower: low.root_lower,
        root_high_lower: high.root_lower,
        worst_violation: worst,
        n_points: sample_points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::SampledPath;
    use rand::Rng;

    fn quick_config(problem: &FrozenProblem, epsilon: f64, levels: usize) -> CascadeConfig {
        let mut cfg = CascadeConfig::for_problem(problem, epsilon, levels, 7);
        cfg.dx = epsilon / 12.0;
        cfg.quantum = cfg.dx / 2.0;
        let g = problem.generator_for(&SampledPath::zero(problem.dim, 0.0, problem.horizon));
        let denom = 2.0 * g.lip_gamma / (cfg.dx * cfg.dx) + g.lip_z / cfg.dx + g.lip_y;
        cfg.dt = if denom > 0.0 { (0.9 / denom).min(cfg.dx / 2.0) } else { cfg.dx / 2.0 };
        cfg.boundary_samples = 10;
        cfg.base_samples = 200;
        cfg.base_step = 5e-3;
        cfg
    }

    #[test]
    fn constant_terminal_transport_is_exact() {
        // G ≡ 0, ξ ≡ c, discount catalog {0}: both roots equal c.
        let c = 1.75f64;
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, move |_| c).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.discount_catalog = vec![0.0];
        let sol = cascade_solve(&problem, &cfg).unwrap();
        assert!((sol.root_upper - c).abs() < 1e-12, "upper {}", sol.root_upper);
        assert!((sol.root_lower - c).abs() < 1e-12, "lower {}", sol.root_lower);
    }

    #[test]
    fn base_layer_constant_brackets_by_discount() {
        let c = 2.0f64;
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, move |_| c).unwrap();
        let cfg = quick_config(&problem, 0.5, 1);
        let pi = Partition::empty(0.5, problem.slope(), 1.0);
        let up = theta_base_upper(&problem, &cfg, &pi, 0.0, &[0.0]).unwrap();
        let lo = theta_base_lower(&problem, &cfg, &pi, 0.0, &[0.0]).unwrap();
        let l = problem.bound_l;
        assert!(up <= c * (l * 1.0f64).exp() + 1e-9);
        assert!(lo >= c * (-l * 1.0f64).exp() - 1e-9);
        assert!(lo <= up);
        let mut cfg0 = cfg.clone();
        cfg0.discount_catalog = vec![0.0];
        let up0 = theta_base_upper(&problem, &cfg0, &pi, 0.0, &[0.0]).unwrap();
        assert!((up0 - c).abs() < 1e-12);
    }

    #[test]
    fn base_layer_drift_payoff_matches_closed_form() {
        // ξ = ω_T · e1, discount {0}: the upper base value is L·(T − t).
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0]).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 4000;
        let pi = Partition::empty(0.5, problem.slope(), 1.0);
        let up = theta_base_upper(&problem, &cfg, &pi, 0.0, &[0.0]).unwrap();
        assert!((up - 0.5).abs() < 0.05, "upper base {up}");
    }

    #[test]
    fn base_layer_upper_dominates_lower_at_random_points() {
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh()).unwrap();
        let cfg = quick_config(&problem, 0.4, 1);
        let mut rng = crate::util::stream_rng(51, 0);
        let mut checked = 0;
        for _ in 0..50 {
            let tn: f64 = rng.gen_range(0.0..0.6);
            let pi = Partition {
                epsilon: 0.4,
                slope: problem.slope(),
                points: if tn > 0.0 {
                    vec![crate::hitting::PartitionPoint { time: tn, increment: vec![rng.gen_range(-0.3..0.3)] }]
                } else {
                    vec![]
                },
                terminal_time: 1.0,
            };
            let t0 = pi.last_time(0.0);
            let spec = ConeSpec::new(t0, 0.4, problem.slope(), 1.0).unwrap();
            let t = t0 + rng.gen_range(0.0..(spec.top_time() - t0) * 0.9);
            let rad = spec.radius_at(t);
            let x = vec![rng.gen_range(-0.9..0.9) * rad.max(0.0)];
            if matches!(cone_classify(&spec, t, &x), ConeRegion::Outside) {
                continue;
            }
            let up = theta_base_upper(&problem, &cfg, &pi, t, &x).unwrap();
            let lo = theta_base_lower(&problem, &cfg, &pi, t, &x).unwrap();
            assert!(up >= lo - 1e-12, "up {up} < lo {lo}");
            checked += 1;
        }
        assert!(checked >= 30);
    }

    #[test]
    fn base_layer_outside_cone_is_a_domain_error() {
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0]).unwrap();
        let cfg = quick_config(&problem, 0.4, 1);
        let pi = Partition::empty(0.4, problem.slope(), 1.0);
        let r = theta_base_upper(&problem, &cfg, &pi, 0.5, &[0.39]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn transport_cascade_reproduces_terminal_functional() {
        // G ≡ 0, ξ = φ(ω_T), singleton Wiener family, discount {0}: every
        // level transports the Wiener mean of φ (zero by symmetry here).
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 2);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 2000;
        let sol = cascade_solve(&problem, &cfg).unwrap();
        assert!(sol.root_upper.abs() < 0.05, "upper {}", sol.root_upper);
        assert!(sol.root_gap().abs() < 0.05, "gap {}", sol.root_gap());
    }

    #[test]
    fn heat_cascade_root_approaches_wiener_value() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0] * v[0]).unwrap();
        let mut cfg = quick_config(&problem, 0.25, 2);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 1500;
        cfg.boundary_samples = 12;
        let sol = cascade_solve(&problem, &cfg).unwrap();
        assert!((sol.root_upper - 1.0).abs() < 0.15, "upper root {}", sol.root_upper);
        assert!(sol.root_gap().abs() < 0.1, "gap {}", sol.root_gap());
    }

    #[test]
    fn sandwich_ordering_with_the_bounding_family() {
        // Full default family: θ̲^m ≤ θ̲^{m+1} ≤ θ̄^{m+1} ≤ θ̄^m at the root
        // within Monte Carlo and grid tolerance.
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg1 = quick_config(&problem, 0.5, 1);
        cfg1.base_samples = 400;
        cfg1.boundary_samples = 8;
        let mut cfg2 = cfg1.clone();
        cfg2.levels = 2;
        let s1 = cascade_solve(&problem, &cfg1).unwrap();
        let s2 = cascade_solve(&problem, &cfg2).unwrap();
        let tol = 0.06;
        assert!(s1.root_lower <= s2.root_lower + tol, "{} vs {}", s1.root_lower, s2.root_lower);
        assert!(s2.root_lower <= s2.root_upper + tol);
        assert!(s2.root_upper <= s1.root_upper + tol, "{} vs {}", s2.root_upper, s1.root_upper);
        // Root gap is controlled by the worst base-layer gap amplified at
        // most by the discount horizon.
        let base_gap = s2.per_level.last().map(|l| l.max_gap).unwrap_or(0.0);
        let bound = (problem.bound_l * problem.horizon).exp() * base_gap + tol;
        assert!(s2.root_gap() <= bound, "gap {} vs bound {bound}", s2.root_gap());
    }

    #[test]
    fn compatibility_holds_at_sampled_lateral_points() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0] * v[0]).unwrap();
        let mut cfg = quick_config(&problem, 0.4, 2);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 1000;
        let sol = cascade_solve(&problem, &cfg).unwrap();
        let res = sol.compatibility_residuals(Side::Upper, 50, 61).unwrap();
        let tol = 4.0 * cfg.dx;
        for (level, r) in res.iter().enumerate() {
            assert!(*r <= tol, "level {level} residual {r} > {tol}");
        }
    }

    #[test]
    fn evaluation_is_time_continuous_across_an_exit() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0] * v[0]).unwrap();
        let mut cfg = quick_config(&problem, 0.4, 2);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 1000;
        let sol = cascade_solve(&problem, &cfg).unwrap();
        let omega = SampledPath::from_knots_1d(0.0, 1.0, &[(0.0, 0.0), (0.15, 0.35), (1.0, 0.35)]).unwrap();
        let pi = crate::hitting::hitting_sequence(&omega, 0.4, problem.slope()).unwrap();
        assert!(!pi.is_empty());
        let h1 = pi.points[0].time;
        let before = sol.evaluate_upper(h1 - 1e-4, &omega).unwrap();
        let after = sol.evaluate_upper(h1 + 1e-4, &omega).unwrap();
        assert!((before - after).abs() <= 6.0 * cfg.dx, "jump {} at the exit", (before - after).abs());
    }

    #[test]
    fn evaluate_at_zero_returns_the_root() {
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        let sol = cascade_solve(&problem, &cfg).unwrap();
        let z = SampledPath::zero(1, 0.0, 1.0);
        let v = sol.evaluate_upper(0.0, &z).unwrap();
        assert!((v - sol.root_upper).abs() < 1e-9);
    }

    #[test]
    fn upper_evaluation_dominates_lower_on_random_paths() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.base_samples = 300;
        cfg.boundary_samples = 8;
        let sol = cascade_solve(&problem, &cfg).unwrap();
        let mut rng = crate::util::stream_rng(77, 0);
        for _ in 0..20 {
            let n = 50;
            let mut vals = vec![0.0];
            for _ in 0..n {
                vals.push(vals.last().unwrap() + rng.gen_range(-0.08..0.08f64));
            }
            let omega = SampledPath::from_uniform_grid(0.0, 1.0 / n as f64, 1, vals, 1.0).unwrap();
            let t = rng.gen_range(0.0..1.0);
            let up = sol.evaluate_upper(t, &omega).unwrap();
            let lo = sol.evaluate_lower(t, &omega).unwrap();
            assert!(up >= lo - 0.05, "up {up} < lo {lo} at t {t}");
        }
    }

    #[test]
    fn modulus_shift_identity_and_terminal_preservation() {
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        let sol = cascade_solve(&problem, &cfg).unwrap();
        let z = SampledPath::zero(1, 0.0, 1.0);
        let id = modulus_shift(&sol, 0.0).unwrap();
        assert_eq!(id.evaluate_upper(0.3, &z).unwrap(), sol.evaluate_upper(0.3, &z).unwrap());
        let sh = modulus_shift(&sol, 0.2).unwrap();
        let at_t = sh.evaluate_upper(1.0, &z).unwrap();
        assert!((at_t - sol.evaluate_upper(1.0, &z).unwrap()).abs() < 1e-12);
        let res = sh.compatibility_residuals(Side::Upper, 10, 91).unwrap();
        for r in res {
            assert!(r <= 4.0 * cfg.dx);
        }
        assert!(modulus_shift(&sol, -0.1).is_err());
    }

    #[test]
    fn comparison_identical_terminals_have_zero_margin() {
        let problem = FrozenProblem::transport_terminal(1, 0.5, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        let z = SampledPath::zero(1, 0.0, 1.0);
        let pts = vec![(0.0, z)];
        let rep = verify_comparison(
            &problem,
            |p| p.knot_value(p.n_knots() - 1)[0].tanh(),
            |p| p.knot_value(p.n_knots() - 1)[0].tanh(),
            &cfg,
            &pts,
        )
        .unwrap();
        assert!(rep.worst_violation.abs() < 1e-9);
    }

    #[test]
    fn comparison_additive_shift_moves_the_root_by_one() {
        // y-independent G, ξ_high = ξ_low + 1, discount {0}: the root
        // difference is exactly the shift up to solver roundoff.
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.4, 2);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 800;
        let rep = verify_comparison(
            &problem,
            |p| p.knot_value(p.n_knots() - 1)[0].tanh(),
            |p| p.knot_value(p.n_knots() - 1)[0].tanh() + 1.0,
            &cfg,
            &[],
        )
        .unwrap();
        let diff = rep.root_high_upper - rep.root_low_upper;
        assert!((diff - 1.0).abs() < 1e-6, "difference {diff}");
        assert!(rep.worst_violation <= 1e-9);
    }

    #[test]
    fn comparison_random_ordered_pair_has_no_violations() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0].tanh()).unwrap();
        let mut cfg = quick_config(&problem, 0.5, 1);
        cfg.family = BaseFamily::WienerOnly;
        cfg.discount_catalog = vec![0.0];
        cfg.base_samples = 600;
        let mut rng = crate::util::stream_rng(83, 0);
        let mut pts = Vec::new();
        for _ in 0..5 {
            let n = 40;
            let mut vals = vec![0.0];
            for _ in 0..n {
                vals.push(vals.last().unwrap() + rng.gen_range(-0.1..0.1f64));
            }
            let omega = SampledPath::from_uniform_grid(0.0, 1.0 / n as f64, 1, vals, 1.0).unwrap();
            pts.push((rng.gen_range(0.0..0.9), omega));
        }
        let rep = verify_comparison(
            &problem,
            |p| p.knot_value(p.n_knots() - 1)[0].sin().min(0.3),
            |p| {
                let v = p.knot_value(p.n_knots() - 1)[0];
                v.sin().min(0.3) + 0.25 + v.cos().abs() * 0.1
            },
            &cfg,
            &pts,
        )
        .unwrap();
        assert!(rep.worst_violation <= 0.02, "violation {}", rep.worst_violation);
    }

    #[test]
    fn budget_guard_reports_exhaustion() {
        let problem = FrozenProblem::heat_terminal(1, 1.0, |v| v[0] * v[0]).unwrap();
        let mut cfg = quick_config(&problem, 0.25, 3);
        cfg.max_solves = 5;
        let r = cascade_solve(&problem, &cfg);
        assert!(matches!(r, Err(Error::Budget(_))));
    }
}
