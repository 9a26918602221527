//! Path-dependent zero-sum games in strong formulation: strategy versus
//! control on the hitting mesh.
//!
//! The generator of the induced equation is the upper Hamiltonian
//!
//! ```text
//! G(t, ω, y, z, γ) = inf_β sup_α [ ½ σσᵀ(t, ω, α, β) : γ + f(t, ω, y, zσ, α, β) ],
//! ```
//!
//! and the game values are computed on a finite tree: decision stages live
//! at the hitting-mesh times, the Brownian increment per stage is quantized
//! to a three-point Gauss–Hermite-style set, and leaves are closed by Monte
//! Carlo with the controls frozen at their last stage values. The upper
//! value optimizes `inf_β sup_α` per stage (the strategy player responds to
//! the observed control), the lower value swaps the order; with identical
//! leaf estimates the ordering `lower ≤ upper` is exact.
//!
//! Dynamics are frozen along the construction: on each stage the diffusion
//! coefficient sees the piecewise-linear interpolation of the state at the
//! hitting times seen so far, which pins the pathwise freezing error at
//! `‖X − X̂_{·∧H}‖ ≤ ε` by construction — the engine asserts it on every
//! simulated sample.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hitting::{raw_hit, Partition};
use crate::path::SampledPath;
use crate::util::{chunked_mean, mix_stream, stream_rng};
use crate::{Error, Result};

type SigmaFn = dyn Fn(f64, &SampledPath, &[f64], &[f64]) -> f64 + Send + Sync;
type DriverFn = dyn Fn(f64, &SampledPath, f64, f64, &[f64], &[f64]) -> f64 + Send + Sync;
type TerminalFn = dyn Fn(&SampledPath) -> f64 + Send + Sync;

/// A zero-sum game specification with finite control sets (one-dimensional
/// state; the diffusion is scalar).
#[derive(Clone)]
pub struct GameSpec {
    pub label: String,
    pub u_set: Vec<Vec<f64>>,
    pub v_set: Vec<Vec<f64>>,
    pub horizon: f64,
    /// Admissibility bound; the hitting slope is `L + 1`.
    pub bound_l: f64,
    sigma: Arc<SigmaFn>,
    /// Driver `f(t, ω, y, z, α, β)`.
    f: Arc<DriverFn>,
    xi: Arc<TerminalFn>,
}

impl std::fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GameSpec({}, |U|={}, |V|={})", self.label, self.u_set.len(), self.v_set.len())
    }
}

impl GameSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        u_set: Vec<Vec<f64>>,
        v_set: Vec<Vec<f64>>,
        horizon: f64,
        bound_l: f64,
        sigma: impl Fn(f64, &SampledPath, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, &SampledPath, f64, f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        xi: impl Fn(&SampledPath) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if u_set.is_empty() || v_set.is_empty() {
            return Err(Error::Config("empty control sets".into()));
        }
        if !(horizon > 0.0) || !(bound_l > 0.0) {
            return Err(Error::Config("bad game bounds".into()));
        }
        Ok(Self {
            label: label.into(),
            u_set,
            v_set,
            horizon,
            bound_l,
            sigma: Arc::new(sigma),
            f: Arc::new(f),
            xi: Arc::new(xi),
        })
    }

    /// Matrix game: constant diffusion, running payoff `r[α][β]`, zero
    /// terminal data.
    pub fn matrix_game(r: Vec<Vec<f64>>, sigma_const: f64, horizon: f64, bound_l: f64) -> Result<Self> {
        let nu = r.len();
        let nv = r.first().map(|row| row.len()).unwrap_or(0);
        if nu == 0 || nv == 0 || r.iter().any(|row| row.len() != nv) {
            return Err(Error::Config("payoff matrix must be rectangular and nonempty".into()));
        }
        let payoff = r.clone();
        Self::new(
            "matrix",
            (0..nu).map(|i| vec![i as f64]).collect(),
            (0..nv).map(|j| vec![j as f64]).collect(),
            horizon,
            bound_l,
            move |_, _, _, _| sigma_const,
            move |_, _, _, _, a, b| payoff[a[0] as usize][b[0] as usize],
            |_| 0.0,
        )
    }

    pub fn slope(&self) -> f64 {
        self.bound_l + 1.0
    }
}

/// Tree/leaf configuration of the game solver.
#[derive(Debug, Clone)]
pub struct GameOptions {
    /// Decision stages before the Monte Carlo closure.
    pub depth: usize,
    pub epsilon: f64,
    pub leaf_samples: usize,
    pub leaf_step: f64,
    pub seed: u64,
    pub max_nodes: usize,
}

impl GameOptions {
    pub fn defaults(epsilon: f64, depth: usize, seed: u64) -> Self {
        Self { depth, epsilon, leaf_samples: 200, leaf_step: 2e-3, seed, max_nodes: 300_000 }
    }
}

/// Hamiltonian gap report of the min-max interchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsaacsReport {
    pub max_gap: f64,
    pub gaps: Vec<f64>,
    pub tolerance: f64,
    pub holds: bool,
}

/// A sample point for the Hamiltonian gap check.
#[derive(Debug, Clone)]
pub struct HamiltonianPoint {
    pub t: f64,
    pub omega: SampledPath,
    pub y: f64,
    pub z: f64,
    pub gamma: f64,
}

/// Computes `inf_β sup_α H − sup_α inf_β H` by exhaustive enumeration of the
/// finite control sets at each sample point. Report-only.
pub fn isaacs_condition_check(spec: &GameSpec, points: &[HamiltonianPoint], tolerance: f64) -> IsaacsReport {
    let mut gaps = Vec::with_capacity(points.len());
    for p in points {
        let h = |a: &[f64], b: &[f64]| -> f64 {
            let s = (spec.sigma)(p.t, &p.omega, a, b);
            0.5 * s * s * p.gamma + (spec.f)(p.t, &p.omega, p.y, p.z * s, a, b)
        };
        let mut inf_sup = f64::INFINITY;
        for b in &spec.v_set {
            let mut sup = f64::NEG_INFINITY;
            for a in &spec.u_set {
                sup = sup.max(h(a, b));
            }
            inf_sup = inf_sup.min(sup);
        }
        let mut sup_inf = f64::NEG_INFINITY;
        for a in &spec.u_set {
            let mut inf = f64::INFINITY;
            for b in &spec.v_set {
                inf = inf.min(h(a, b));
            }
            sup_inf = sup_inf.max(inf);
        }
        gaps.push(inf_sup - sup_inf);
    }
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    IsaacsReport { max_gap, gaps, tolerance, holds: max_gap <= tolerance }
}

/// Default randomized Hamiltonian sample points.
pub fn random_hamiltonian_points(spec: &GameSpec, n: usize, seed: u64) -> Vec<HamiltonianPoint> {
    let mut rng = stream_rng(seed, 0x15AAC5);
    (0..n)
        .map(|_| HamiltonianPoint {
            t: rng.gen_range(0.0..spec.horizon),
            omega: SampledPath::zero(1, 0.0, spec.horizon),
            y: rng.gen_range(-1.0..1.0),
            z: rng.gen_range(-1.0..1.0),
            gamma: rng.gen_range(-2.0..2.0),
        })
        .collect()
}

/// Which optimization order a value uses per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameSide {
    /// `inf_β sup_α`: the α-player responds to the observed β.
    Upper,
    /// `sup_α inf_β`: the β-player responds to the observed α.
    Lower,
}

/// Result of a game value computation with freezing diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameValue {
    pub value: f64,
    /// Largest observed `‖X − X̂_{·∧H}‖` over all leaf samples.
    pub freezing_max: f64,
    pub samples_checked: usize,
    /// Samples exceeding ε (beyond roundoff); zero by construction.
    pub freezing_violations: usize,
}

/// Information-set key of the strategy table: decision history (stage
/// branch and both control indices per past stage) plus the opponent move
/// being answered.
pub type InfoSet = (Vec<(usize, usize, usize)>, usize);

/// The extracted optimal responder table on the hitting mesh.
#[derive(Debug, Clone, Default)]
pub struct StrategyMesh {
    pub responses: HashMap<InfoSet, usize>,
}

struct TreeState {
    freezing_max: f64,
    samples: usize,
    violations: usize,
    nodes: usize,
    strategy: StrategyMesh,
}

struct TreeEngine<'a> {
    spec: &'a GameSpec,
    opts: &'a GameOptions,
    side: GameSide,
    state: Mutex<TreeState>,
}

const GH_NODES: [(f64, f64); 3] = [(-1.7320508075688772, 1.0 / 6.0), (0.0, 2.0 / 3.0), (1.7320508075688772, 1.0 / 6.0)];

impl<'a> TreeEngine<'a> {
    /// Stage transition under controls `(α, β)` and branch `z`: duration to
    /// the quantized cone exit and the state displacement.
    fn stage_move(&self, sigma: f64, radius: f64, remaining: f64, z: f64) -> (f64, f64) {
        let l1 = self.spec.slope();
        let tau = if z == 0.0 {
            radius / l1
        } else {
            // |σ z| √τ + L₁ τ = radius, quadratic in √τ.
            let a = l1;
            let b = sigma.abs() * z.abs();
            let disc = (b * b + 4.0 * a * radius).sqrt();
            let u = (disc - b) / (2.0 * a);
            u * u
        };
        if tau >= remaining {
            (remaining, sigma * z * remaining.sqrt())
        } else {
            (tau, sigma * z * tau.sqrt())
        }
    }

    fn charge_node(&self) -> Result<()> {
        let mut st = self.state.lock().unwrap();
        st.nodes += 1;
        if st.nodes > self.opts.max_nodes {
            let branching = (self.spec.u_set.len() * self.spec.v_set.len() * GH_NODES.len()).max(2);
            let admissible = (self.opts.max_nodes as f64).ln() / (branching as f64).ln();
            return Err(Error::Budget(format!(
                "game tree exceeded {} nodes; admissible depth at this branching is {}",
                self.opts.max_nodes,
                admissible.floor() as usize
            )));
        }
        Ok(())
    }

    /// Frozen path of the skeleton knots, constant to the horizon.
    fn frozen(&self, knots: &[(f64, f64)]) -> SampledPath {
        let horizon = self.spec.horizon;
        let mut ks: Vec<(f64, f64)> = knots.to_vec();
        let last = *ks.last().unwrap();
        if last.0 < horizon {
            ks.push((horizon, last.1));
        }
        SampledPath::from_knots_1d(0.0, horizon, &ks).expect("skeleton knots ordered")
    }

    #[allow(clippy::too_many_arguments)]
    fn node_value(
        &self,
        depth_left: usize,
        s: f64,
        x: f64,
        radius: f64,
        knots: &[(f64, f64)],
        history: &[(usize, usize, usize)],
        inherited: (usize, usize),
    ) -> Result<f64> {
        self.charge_node()?;
        let spec = self.spec;
        let horizon = spec.horizon;
        if s >= horizon - 1e-14 {
            return Ok((spec.xi)(&self.frozen(knots)));
        }
        if depth_left == 0 {
            return self.leaf_value(s, x, radius, knots, history, inherited);
        }
        let frozen_now = self.frozen(knots);
        let mut outer_best: Option<f64> = None;
        let (outer_set, inner_set) = match self.side {
            GameSide::Upper => (&spec.v_set, &spec.u_set),
            GameSide::Lower => (&spec.u_set, &spec.v_set),
        };
        for (oi, outer) in outer_set.iter().enumerate() {
            let mut inner_best: Option<(f64, usize)> = None;
            for (ii, inner) in inner_set.iter().enumerate() {
                let (a, b, ai, bi) = match self.side {
                    GameSide::Upper => (inner, outer, ii, oi),
                    GameSide::Lower => (outer, inner, oi, ii),
                };
                let sigma = (spec.sigma)(s, &frozen_now, a, b);
                let mut val = 0.0;
                for (zi, &(z, w)) in GH_NODES.iter().enumerate() {
                    let (tau, dx) = self.stage_move(sigma, radius, horizon - s, z);
                    let s_next = s + tau;
                    let x_next = x + dx;
                    let mut knots_next = knots.to_vec();
                    if s_next > knots_next.last().unwrap().0 {
                        knots_next.push((s_next, x_next));
                    }
                    let mut hist_next = history.to_vec();
                    hist_next.push((zi, ai, bi));
                    let cont = self.node_value(
                        depth_left - 1,
                        s_next,
                        x_next,
                        self.opts.epsilon,
                        &knots_next,
                        &hist_next,
                        (ai, bi),
                    )?;
                    val += w * (cont + tau * (spec.f)(s, &frozen_now, cont, 0.0, a, b));
                }
                // Inner optimizer: maximizes on the Upper side, minimizes on
                // the Lower side.
                let better = match (self.side, &inner_best) {
                    (_, None) => true,
                    (GameSide::Upper, Some((bv, _))) => val > *bv,
                    (GameSide::Lower, Some((bv, _))) => val < *bv,
                };
                if better {
                    inner_best = Some((val, ii));
                }
            }
            let (val, responder) = inner_best.unwrap();
            {
                let mut st = self.state.lock().unwrap();
                st.strategy.responses.insert((history.to_vec(), oi), responder);
            }
            let better = match (self.side, &outer_best) {
                (_, None) => true,
                (GameSide::Upper, Some(bv)) => val < *bv,
                (GameSide::Lower, Some(bv)) => val > *bv,
            };
            if better {
                outer_best = Some(val);
            }
        }
        Ok(outer_best.unwrap())
    }

    /// Monte Carlo closure beyond the decision depth: the controls freeze at
    /// their last stage values and the state keeps re-freezing along its own
    /// hitting sequence.
    #[allow(clippy::too_many_arguments)]
    fn leaf_value(
        &self,
        s: f64,
        x: f64,
        radius: f64,
        knots: &[(f64, f64)],
        history: &[(usize, usize, usize)],
        inherited: (usize, usize),
    ) -> Result<f64> {
        let spec = self.spec;
        let opts = self.opts;
        let horizon = spec.horizon;
        let alpha = &spec.u_set[inherited.0];
        let beta = &spec.v_set[inherited.1];
        let stream_base = {
            let mut parts: Vec<u64> = vec![0x1EAF];
            for &(zi, ai, bi) in history {
                parts.push(mix_stream(&[zi as u64, ai as u64, bi as u64]));
            }
            mix_stream(&parts)
        };
        let mut freezing_max = 0.0f64;
        let mut violations = 0usize;
        let mut vals = Vec::with_capacity(opts.leaf_samples);
        for i in 0..opts.leaf_samples as u64 {
            let mut rng = stream_rng(opts.seed, mix_stream(&[stream_base, i]));
            let noise = brownian_1d(s, horizon, opts.leaf_step, &mut rng);
            let mut knots_run: Vec<(f64, f64)> = knots.to_vec();
            let mut cur_t = s;
            let mut cur_x = x;
            let mut cur_radius = radius;
            let mut acc = 0.0;
            let mut guard = 0;
            while cur_t < horizon - 1e-14 {
                guard += 1;
                if guard > 100_000 {
                    return Err(Error::Budget("leaf refreeze loop exceeded its cap".into()));
                }
                let frozen = self.frozen(&knots_run);
                let sg = (spec.sigma)(cur_t, &frozen, alpha, beta);
                // Exit of |σ (W_r − W_t)| + L₁ (r − t) ≥ radius on the noise.
                let (h_time, h_disp) = if sg == 0.0 {
                    let tau = (cur_radius / spec.slope()).min(horizon - cur_t);
                    (cur_t + tau, 0.0)
                } else {
                    let hit = raw_hit(
                        &noise,
                        cur_t,
                        &[0.0],
                        cur_radius / sg.abs(),
                        spec.slope() / sg.abs(),
                        horizon,
                    )?;
                    let w_move = hit.location[0];
                    (hit.time, sg * w_move)
                };
                // Pathwise freezing error on this window, exact by the exit
                // minimality: sup |X − X_{H_m}| = |ΔX| at the exit.
                let excess = h_disp.abs() + spec.slope() * (h_time - cur_t) - opts.epsilon;
                freezing_max = freezing_max.max(h_disp.abs().min(opts.epsilon + excess.max(0.0)));
                if h_disp.abs() > opts.epsilon + 1e-9 {
                    violations += 1;
                }
                acc += (h_time - cur_t) * (spec.f)(cur_t, &frozen, 0.0, 0.0, alpha, beta);
                cur_t = h_time;
                cur_x += h_disp;
                if cur_t > knots_run.last().unwrap().0 {
                    knots_run.push((cur_t, cur_x));
                }
                cur_radius = opts.epsilon;
            }
            acc += (spec.xi)(&self.frozen(&knots_run));
            vals.push(acc);
        }
        {
            let mut st = self.state.lock().unwrap();
            st.freezing_max = st.freezing_max.max(freezing_max);
            st.samples += opts.leaf_samples;
            st.violations += violations;
        }
        Ok(chunked_mean(&vals))
    }
}

fn brownian_1d(t: f64, horizon: f64, step: f64, rng: &mut impl Rng) -> SampledPath {
    let span = horizon - t;
    let n = (span / step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let sqh = h.sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0f64;
    times.push(t);
    values.push(x);
    for k in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        x += sqh * z;
        times.push(if k + 1 == n { horizon } else { t + (k + 1) as f64 * h });
        values.push(x);
    }
    SampledPath::from_series(t, horizon, 1, times, values).expect("brownian grid increasing")
}

/// Shared driver of the tree computation.
fn game_value(
    spec: &GameSpec,
    side: GameSide,
    start_t: f64,
    start_x: f64,
    prefix: &[(f64, f64)],
    first_radius: f64,
    opts: &GameOptions,
) -> Result<(GameValue, StrategyMesh)> {
    if opts.depth == 0 {
        return Err(Error::Config("game depth must be at least 1".into()));
    }
    let engine = TreeEngine {
        spec,
        opts,
        side,
        state: Mutex::new(TreeState {
            freezing_max: 0.0,
            samples: 0,
            violations: 0,
            nodes: 0,
            strategy: StrategyMesh::default(),
        }),
    };
    let mut knots: Vec<(f64, f64)> = if prefix.is_empty() { vec![(0.0, 0.0)] } else { prefix.to_vec() };
    if knots[0].0 > 0.0 {
        knots.insert(0, (0.0, 0.0));
    }
    let value = engine.node_value(opts.depth, start_t, start_x, first_radius, &knots, &[], (0, 0))?;
    let st = engine.state.into_inner().unwrap();
    Ok((
        GameValue {
            value,
            freezing_max: st.freezing_max,
            samples_checked: st.samples,
            freezing_violations: st.violations,
        },
        st.strategy,
    ))
}

/// Upper game value `sup_λ inf_β` at `(t, ω)` (per-stage `inf_β sup_α`).
pub fn game_value_upper(spec: &GameSpec, t: f64, omega: &SampledPath, opts: &GameOptions) -> Result<GameValue> {
    let (v, _) = game_value_with_strategy(spec, GameSide::Upper, t, omega, opts)?;
    Ok(v)
}

/// Lower game value `inf_λ̃ sup_α` at `(t, ω)` (per-stage `sup_α inf_β`).
pub fn game_value_lower(spec: &GameSpec, t: f64, omega: &SampledPath, opts: &GameOptions) -> Result<GameValue> {
    let (v, _) = game_value_with_strategy(spec, GameSide::Lower, t, omega, opts)?;
    Ok(v)
}

/// Value plus the extracted responder table (for structural strategy tests).
pub fn game_value_with_strategy(
    spec: &GameSpec,
    side: GameSide,
    t: f64,
    omega: &SampledPath,
    opts: &GameOptions,
) -> Result<(GameValue, StrategyMesh)> {
    if omega.dim() != 1 {
        return Err(Error::Dimension("game paths are one-dimensional".into()));
    }
    if t < omega.t_start() || t > omega.t_end() {
        return Err(Error::Domain(format!("time {t} outside the path domain")));
    }
    let mut prefix: Vec<(f64, f64)> = Vec::new();
    for k in 0..omega.n_knots() {
        let kt = omega.knot_times()[k];
        if kt > t {
            break;
        }
        prefix.push((kt, omega.knot_value(k)[0]));
    }
    let x0 = omega.eval1(t)?;
    if prefix.last().map(|&(kt, _)| kt < t).unwrap_or(true) {
        prefix.push((t, x0));
    }
    game_value(spec, side, t, x0, &prefix, opts.epsilon, opts)
}

/// Pseudo-Markovian game value at `(π, t, x)`: the state starts from the
/// partition's cumulative value plus `x`, and the first stage consumes the
/// radius remaining at `t`.
pub fn game_cascade_value(
    spec: &GameSpec,
    pi: &Partition,
    t: f64,
    x: f64,
    opts: &GameOptions,
) -> Result<GameValue> {
    let mut prefix: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut cum = 0.0;
    for p in &pi.points {
        cum += p.increment[0];
        prefix.push((p.time, cum));
    }
    let anchor_t = pi.last_time(0.0);
    if t < anchor_t || t > spec.horizon {
        return Err(Error::Domain(format!("time {t} outside [t_n, T]")));
    }
    let first_radius = opts.epsilon - spec.slope() * (t - anchor_t);
    if first_radius <= 0.0 {
        return Err(Error::Domain("no radius left at the evaluation time".into()));
    }
    let (v, _) = game_value(spec, GameSide::Upper, t, cum + x, &prefix, first_radius, opts)?;
    Ok(v)
}

/// Report of the value-equality check under the Isaacs condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityReport {
    pub upper: f64,
    pub lower: f64,
    pub value_gap: f64,
    pub isaacs_gap: f64,
    pub isaacs_holds: bool,
    pub freezing_max: f64,
    pub freezing_violations: usize,
}

/// Runs both values and the Hamiltonian gap check; report-only.
pub fn value_equality_check(spec: &GameSpec, t: f64, omega: &SampledPath, opts: &GameOptions) -> Result<EqualityReport> {
    let points = random_hamiltonian_points(spec, 50, opts.seed ^ 0x51);
    let isaacs = isaacs_condition_check(spec, &points, 1e-9);
    let up = game_value_upper(spec, t, omega, opts)?;
    let lo = game_value_lower(spec, t, omega, opts)?;
    Ok(EqualityReport {
        upper: up.value,
        lower: lo.value,
        value_gap: up.value - lo.value,
        isaacs_gap: isaacs.max_gap,
        isaacs_holds: isaacs.holds,
        freezing_max: up.freezing_max.max(lo.freezing_max),
        freezing_violations: up.freezing_violations + lo.freezing_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_path(horizon: f64) -> SampledPath {
        SampledPath::zero(1, 0.0, horizon)
    }

    #[test]
    fn control_independent_hamiltonian_has_zero_gap() {
        let spec = GameSpec::new(
            "indep",
            vec![vec![0.0], vec![1.0]],
            vec![vec![0.0], vec![1.0]],
            1.0,
            1.0,
            |_, _, _, _| 0.7,
            |_, _, y, z, _, _| 0.3 * y + 0.1 * z,
            |_| 0.0,
        )
        .unwrap();
        let rep = isaacs_condition_check(&spec, &random_hamiltonian_points(&spec, 30, 1), 1e-12);
        assert_eq!(rep.max_gap, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn saddle_matrix_has_zero_gap_and_pennies_gap_two() {
        // Row-min-max = col-max-min at (0, 0).
        let saddle = GameSpec::matrix_game(vec![vec![1.0, 2.0], vec![0.0, 3.0]], 1.0, 1.0, 1.0).unwrap();
        let rep = isaacs_condition_check(&saddle, &random_hamiltonian_points(&saddle, 10, 2), 1e-12);
        assert_eq!(rep.max_gap, 0.0);

        let pennies = GameSpec::matrix_game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], 1.0, 1.0, 1.0).unwrap();
        let rep2 = isaacs_condition_check(&pennies, &random_hamiltonian_points(&pennies, 10, 3), 1e-12);
        assert_eq!(rep2.max_gap, 2.0);
        assert!(!rep2.holds);
    }

    #[test]
    fn singleton_sets_make_both_values_the_plain_fbsde_value() {
        let spec = GameSpec::new(
            "single",
            vec![vec![0.0]],
            vec![vec![0.0]],
            1.0,
            1.0,
            |_, _, _, _| 0.8,
            |_, _, _, _, _, _| 0.4,
            |_| 0.0,
        )
        .unwrap();
        let opts = GameOptions::defaults(0.4, 2, 11);
        let z = zero_path(1.0);
        let up = game_value_upper(&spec, 0.0, &z, &opts).unwrap();
        let lo = game_value_lower(&spec, 0.0, &z, &opts).unwrap();
        assert_eq!(up.value.to_bits(), lo.value.to_bits());
        // ∫ 0.4 over [0, 1].
        assert!((up.value - 0.4).abs() < 1e-9, "value {}", up.value);
    }

    #[test]
    fn saddle_game_value_is_horizon_times_saddle_payoff() {
        let r = vec![vec![1.0, 2.0], vec![0.0, 3.0]];
        let spec = GameSpec::matrix_game(r, 1.0, 1.0, 1.0).unwrap();
        let opts = GameOptions::defaults(0.4, 2, 13);
        let z = zero_path(1.0);
        let up = game_value_upper(&spec, 0.0, &z, &opts).unwrap();
        let lo = game_value_lower(&spec, 0.0, &z, &opts).unwrap();
        // Saddle at r[0][0] = 1: value = (T − t)·1.
        assert!((up.value - 1.0).abs() < 1e-9, "upper {}", up.value);
        assert!((lo.value - 1.0).abs() < 1e-9, "lower {}", lo.value);
    }

    #[test]
    fn matching_pennies_keeps_a_persistent_value_gap() {
        let spec = GameSpec::matrix_game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], 1.0, 1.0, 1.0).unwrap();
        let opts = GameOptions::defaults(0.4, 2, 17);
        let z = zero_path(1.0);
        let rep = value_equality_check(&spec, 0.0, &z, &opts).unwrap();
        assert!(rep.isaacs_gap > 1.0);
        assert!(!rep.isaacs_holds);
        // Upper = (T−t)·(+1), lower = (T−t)·(−1).
        assert!(rep.value_gap > 1.5, "gap {}", rep.value_gap);
        assert!(rep.upper >= rep.lower);
    }

    #[test]
    fn upper_dominates_lower_with_matched_seeds() {
        let spec = GameSpec::new(
            "mixed",
            vec![vec![-1.0], vec![1.0]],
            vec![vec![-1.0], vec![1.0]],
            1.0,
            1.0,
            |_, _, a, b| 0.5 + 0.3 * a[0] * b[0],
            |t, _, _, _, a, b| (a[0] + 0.5 * b[0]) * (1.0 - t) + a[0] * b[0],
            |p| p.eval1(p.t_end()).unwrap().tanh(),
        )
        .unwrap();
        for depth in [1usize, 2] {
            let opts = GameOptions::defaults(0.5, depth, 19);
            let z = zero_path(1.0);
            let up = game_value_upper(&spec, 0.0, &z, &opts).unwrap();
            let lo = game_value_lower(&spec, 0.0, &z, &opts).unwrap();
            assert!(up.value >= lo.value - 1e-12, "depth {depth}: {} < {}", up.value, lo.value);
        }
    }

    #[test]
    fn pathwise_freezing_error_is_within_epsilon_on_every_sample() {
        let spec = GameSpec::new(
            "freeze",
            vec![vec![1.0]],
            vec![vec![1.0]],
            1.0,
            1.0,
            |_, w, _, _| 0.6 + 0.2 * w.eval1(w.t_end()).unwrap().tanh(),
            |_, _, _, _, _, _| 0.0,
            |p| p.eval1(p.t_end()).unwrap(),
        )
        .unwrap();
        let opts = GameOptions { leaf_samples: 300, ..GameOptions::defaults(0.3, 1, 23) };
        let up = game_value_upper(&spec, 0.0, &zero_path(1.0), &opts).unwrap();
        assert!(up.samples_checked >= 300);
        assert_eq!(up.freezing_violations, 0);
        assert!(up.freezing_max <= opts.epsilon + 1e-9, "max {}", up.freezing_max);
    }

    #[test]
    fn cascade_value_matches_direct_value_for_path_free_coefficients() {
        let spec = GameSpec::new(
            "noop",
            vec![vec![-1.0], vec![1.0]],
            vec![vec![-1.0], vec![1.0]],
            1.0,
            1.0,
            |_, _, a, b| 0.5 + 0.1 * a[0] - 0.1 * b[0],
            |_, _, _, _, a, b| a[0] * b[0],
            |_| 0.0,
        )
        .unwrap();
        let opts = GameOptions::defaults(0.4, 2, 29);
        let direct = game_value_upper(&spec, 0.0, &zero_path(1.0), &opts).unwrap();
        let pi = Partition::empty(0.4, spec.slope(), 1.0);
        let frozen = game_cascade_value(&spec, &pi, 0.0, 0.0, &opts).unwrap();
        assert_eq!(direct.value.to_bits(), frozen.value.to_bits());
    }

    #[test]
    fn strategy_depends_only_on_past_information() {
        let spec = GameSpec::new(
            "info",
            vec![vec![-1.0], vec![1.0]],
            vec![vec![-1.0], vec![1.0]],
            1.0,
            1.0,
            |_, _, _, _| 1.0,
            |t, _, _, _, a, b| a[0] * b[0] * (1.0 + t),
            |p| p.eval1(p.t_end()).unwrap(),
        )
        .unwrap();
        let opts = GameOptions::defaults(0.5, 2, 31);
        let (_, strategy) = game_value_with_strategy(&spec, GameSide::Upper, 0.0, &zero_path(1.0), &opts).unwrap();
        assert!(!strategy.responses.is_empty());
        // Every stage-0 key carries an empty history: the response there
        // cannot depend on later moves, and stage-1 keys never contain
        // stage-2 information (depth is 2, so histories have length ≤ 1).
        for ((hist, _beta), _resp) in &strategy.responses {
            assert!(hist.len() < opts.depth);
        }
        // Identical prefixes get identical responses by map semantics:
        // querying the same info-set twice is the same entry.
        let probe: Vec<_> = strategy.responses.iter().take(1).collect();
        let (key, val) = probe[0];
        assert_eq!(strategy.responses.get(key), Some(val));
    }

    #[test]
    fn deeper_trees_never_lower_the_upper_value_noticeably() {
        let spec = GameSpec::new(
            "enrich",
            vec![vec![-1.0], vec![1.0]],
            vec![vec![-1.0], vec![1.0]],
            1.0,
            1.0,
            |_, _, _, _| 0.7,
            |t, _, _, _, a, b| a[0] * (b[0] + 0.3) * (1.0 - 0.5 * t),
            |p| p.eval1(p.t_end()).unwrap().tanh(),
        )
        .unwrap();
        let o1 = GameOptions { leaf_samples: 400, ..GameOptions::defaults(0.5, 1, 37) };
        let o2 = GameOptions { leaf_samples: 400, ..GameOptions::defaults(0.5, 2, 37) };
        let z = zero_path(1.0);
        let v1 = game_value_upper(&spec, 0.0, &z, &o1).unwrap();
        let v2 = game_value_upper(&spec, 0.0, &z, &o2).unwrap();
        assert!(v2.value >= v1.value - 0.05, "depth2 {} vs depth1 {}", v2.value, v1.value);
    }

    #[test]
    fn budget_exhaustion_reports_admissible_depth() {
        let spec = GameSpec::matrix_game(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0, 1.0, 1.0).unwrap();
        let opts = GameOptions { max_nodes: 10, ..GameOptions::defaults(0.4, 3, 41) };
        let r = game_value_upper(&spec, 0.0, &zero_path(1.0), &opts);
        assert!(matches!(r, Err(Error::Budget(_))));
    }
}
