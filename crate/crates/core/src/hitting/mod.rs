//! Cone-shaped hitting times and the recursive hitting sequence.
//!
//! The basic object is the first time the process leaves a shrinking ball
//! whose radius decays linearly with slope `L₁`:
//!
//! ```text
//! H = inf { s ≥ t : |x + ω_s − ω_t| + L₁ (s − t) ≥ R } ∧ T.
//! ```
//!
//! On piecewise-linear paths every crossing is solved in closed form: on a
//! segment the condition reads `|a + b u| ≥ K − L₁ u`, and squaring gives a
//! quadratic in `u` whose spurious roots are rejected by direct evaluation.
//! Exit times therefore carry no time-scan discretization error, which is
//! what makes the restart identity
//!
//! ```text
//! H from (t, x, R)  =  H from (τ, x + ω_τ − ω_t, R − L₁(τ − t)),   τ ≤ H,
//! ```
//!
//! an exact property rather than an approximate one. The identity itself is
//! certified in exact rational arithmetic (see [`markov_restart_check`]):
//! two independently rounded floating-point solves cannot be compared at
//! zero tolerance, but the underlying crossing descriptions can.

mod exact;

use serde::{Deserialize, Serialize};

use crate::path::{norm, SampledPath};
use crate::{Error, Result};

/// A cone domain: apex at `(t0, 0)`, radius `R` shrinking with slope `L₁`,
/// truncated at the horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub t0: f64,
    pub radius: f64,
    pub slope: f64,
    pub horizon: f64,
}

impl ConeSpec {
    pub fn new(t0: f64, radius: f64, slope: f64, horizon: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("cone radius must be positive, got {radius}")));
        }
        if !(slope >= 1.0) {
            return Err(Error::Config(format!("cone slope must be at least 1, got {slope}")));
        }
        if !(t0 < horizon) {
            return Err(Error::Config(format!("cone anchor {t0} at or past horizon {horizon}")));
        }
        Ok(Self { t0, radius, slope, horizon })
    }

    /// Remaining radius at time `t ≥ t0`.
    pub fn radius_at(&self, t: f64) -> f64 {
        self.radius - self.slope * (t - self.t0)
    }

    /// Last time the cone has positive radius, capped at the horizon.
    pub fn top_time(&self) -> f64 {
        (self.t0 + self.radius / self.slope).min(self.horizon)
    }
}

/// How a hitting time resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitKind {
    /// The shrinking-ball condition was met at `time < T` (or exactly at T).
    Lateral,
    /// No crossing before the horizon; clamped at `T`.
    Terminal,
}

/// Result of a hitting-time solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingResult {
    pub time: f64,
    pub kind: HitKind,
    /// Position `x + ω_time − ω_t` at the hit.
    pub location: Vec<f64>,
}

/// Classification of a space-time point against a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeRegion {
    Interior,
    LateralBoundary,
    TerminalBoundary,
    Outside,
}

/// Classifies `(s, x)` relative to the cone: strictly inside the shrinking
/// ball and before both the tip and the horizon is interior; the slanted
/// surface is lateral; the horizon face is terminal. Comparisons are exact.
pub fn cone_classify(spec: &ConeSpec, s: f64, x: &[f64]) -> ConeRegion {
    let r = norm(x) + spec.slope * (s - spec.t0);
    if r < spec.radius && s < spec.top_time() {
        return ConeRegion::Interior;
    }
    if r == spec.radius && s <= spec.horizon {
        return ConeRegion::LateralBoundary;
    }
    if s == spec.horizon && r <= spec.radius {
        return ConeRegion::TerminalBoundary;
    }
    ConeRegion::Outside
}

/// Crossing solve on one linear segment.
///
/// The position is `q(u) = w + v u` for `u ∈ [0, u_end]`, the threshold is
/// `K0 − slope·u`, and the caller guarantees `|q(0)| < K0`. Returns the
/// smallest `u` in `(0, u_end]` with `|q(u)| + slope·u ≥ K0`, if any.
fn segment_crossing(w: &[f64], v: &[f64], k0: f64, slope: f64, u_end: f64) -> Option<f64> {
    let phi = |u: f64| -> f64 {
        let mut q2 = 0.0;
        for (a, b) in w.iter().zip(v) {
            let q = a + b * u;
            q2 += q * q;
        }
        q2.sqrt() + slope * u - k0
    };
    if phi(u_end) < 0.0 {
        // The condition is convex in u and negative at both ends.
        return None;
    }
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let wv: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    let ww: f64 = w.iter().map(|a| a * a).sum();
    let a = vv - slope * slope;
    let b = 2.0 * wv + 2.0 * k0 * slope;
    let c = ww - k0 * k0;
    let scale = ww.max(k0 * k0).max(1e-300);
    let tol = 1e-12 * scale.sqrt().max(1.0);

    let mut candidates: Vec<f64> = Vec::new();
    if a.abs() <= 1e-14 * (vv + slope * slope).max(1.0) {
        if b.abs() > 0.0 {
            candidates.push(-c / b);
        }
    } else {
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let sq = disc.sqrt();
        // Numerically stable pairing.
        let q = -0.5 * (b + b.signum() * sq);
        if q != 0.0 {
            candidates.push(q / a);
            candidates.push(c / q);
        } else {
            candidates.push(0.0);
        }
    }
    candidates.retain(|&u| u.is_finite() && u > 0.0 && u <= u_end && k0 - slope * u >= -tol && phi(u).abs() <= 1e-7 * (1.0 + k0.abs()));
    if let Some(&u) = candidates.iter().min_by(|x, y| x.partial_cmp(y).unwrap()) {
        return Some(u);
    }
    // Roundoff starved the quadratic filter; fall back to bisection on the
    // convex crossing (negative at 0, nonnegative at u_end).
    let (mut lo, mut hi) = (0.0, u_end);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// First time `s ≥ t` with `|x + ω_s − ω_t| + L₁ (s − t) ≥ R_t`, clamped at
/// the horizon. `R_t = spec.radius − spec.slope (t − spec.t0)` is the cone
/// radius remaining at `t`, so restarting inside the cone needs no new spec.
pub fn hitting_time(path: &SampledPath, t: f64, x: &[f64], spec: &ConeSpec) -> Result<HittingResult> {
    if t < spec.t0 {
        return Err(Error::Precondition(format!("start {t} before cone anchor {}", spec.t0)));
    }
    raw_hit(path, t, x, spec.radius_at(t), spec.slope, spec.horizon)
}

/// Crate-internal first-crossing solve with an explicit remaining radius;
/// accepts any nonnegative slope (the public cone spec enforces `L₁ ≥ 1`).
pub(crate) fn raw_hit(path: &SampledPath, t: f64, x: &[f64], r_t: f64, slope: f64, horizon: f64) -> Result<HittingResult> {
    if x.len() != path.dim() {
        return Err(Error::Dimension(format!("offset of length {} for a {}-d path", x.len(), path.dim())));
    }
    if t < path.t_start() {
        return Err(Error::Domain(format!("path starts at {} but hitting starts at {t}", path.t_start())));
    }
    let horizon = horizon.min(path.t_end());
    let xn = norm(x);
    if xn > r_t {
        return Err(Error::Precondition(format!("|x| = {xn} exceeds remaining radius {r_t}")));
    }
    let anchor = path.eval(t)?;
    if xn >= r_t {
        // Boundary start: the infimum convention hits immediately.
        return Ok(HittingResult { time: t, kind: HitKind::Lateral, location: x.to_vec() });
    }
    // Walk the segments of [t, horizon] induced by the knots, carrying the
    // anchored offset q(s) = x + path(s) − path(t) without re-searching.
    let d = path.dim();
    let times = path.knot_times();
    let mut idx = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
        Ok(k) => k + 1,
        Err(k) => k,
    };
    let mut s0 = t;
    let mut w0: Vec<f64> = x.to_vec();
    let mut w1 = vec![0.0f64; d];
    let mut v = vec![0.0f64; d];
    let mut n0 = xn;
    loop {
        let at_knot = idx < times.len() && times[idx] <= horizon;
        let s1 = if at_knot { times[idx] } else { horizon };
        if s1 > s0 {
            let k0 = r_t - slope * (s0 - t);
            if n0 >= k0 {
                return Ok(HittingResult { time: s0, kind: HitKind::Lateral, location: w0 });
            }
            if at_knot {
                let kv = path.knot_value(idx);
                for i in 0..d {
                    w1[i] = x[i] + kv[i] - anchor[i];
                }
            } else {
                let pv = path.eval(horizon)?;
                for i in 0..d {
                    w1[i] = x[i] + pv[i] - anchor[i];
                }
            }
            let n1 = norm(&w1);
            let k1 = r_t - slope * (s1 - t);
            if n1 >= k1 {
                // Crossing bracketed inside (s0, s1].
                let du = s1 - s0;
                for i in 0..d {
                    v[i] = (w1[i] - w0[i]) / du;
                }
                let u = segment_crossing(&w0, &v, k0, slope, du).unwrap_or(du);
                let s = s0 + u;
                let loc: Vec<f64> = (0..d).map(|i| w0[i] + v[i] * u).collect();
                if s >= horizon && n1 < k1 {
                    return Ok(HittingResult { time: horizon, kind: HitKind::Terminal, location: loc });
                }
                return Ok(HittingResult { time: s, kind: HitKind::Lateral, location: loc });
            }
            std::mem::swap(&mut w0, &mut w1);
            n0 = n1;
            s0 = s1;
        }
        if s0 >= horizon {
            return Ok(HittingResult { time: horizon, kind: HitKind::Terminal, location: w0 });
        }
        idx += 1;
    }
}

/// One point of a hitting partition: exit time and path increment since the
/// previous exit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPoint {
    pub time: f64,
    pub increment: Vec<f64>,
}

/// The hitting partition π of a path: the sequence of lateral exits of the
/// recursive cone hitting sequence, together with the terminal time at which
/// the sequence reached the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub epsilon: f64,
    pub slope: f64,
    pub points: Vec<PartitionPoint>,
    /// The first hitting time equal to the horizon.
    pub terminal_time: f64,
}

impl Partition {
    pub fn empty(epsilon: f64, slope: f64, horizon: f64) -> Self {
        Self { epsilon, slope, points: Vec::new(), terminal_time: horizon }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Time of the last lateral exit, or `t0` if none.
    pub fn last_time(&self, t0: f64) -> f64 {
        self.points.last().map(|p| p.time).unwrap_or(t0)
    }

    /// Cumulative increment after the last exit.
    pub fn total_increment(&self, dim: usize) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        for p in &self.points {
            for i in 0..dim {
                acc[i] += p.increment[i];
            }
        }
        acc
    }

    pub fn validate(&self, t0: f64) -> Result<()> {
        let mut prev = t0;
        for p in &self.points {
            if p.time <= prev {
                return Err(Error::Ordering(format!("partition time {} not increasing", p.time)));
            }
            if p.time >= self.terminal_time {
                return Err(Error::Ordering("partition point at or past the terminal time".into()));
            }
            prev = p.time;
        }
        Ok(())
    }
}

/// Recursive hitting sequence `H_0 = t_start`, `H_{n+1}` the next exit of
/// the shrinking ball of radius ε re-anchored at `H_n`. Stops when an exit
/// is terminal; every run finishes because each lateral step consumes at
/// least the clock slack on the current segment.
pub fn hitting_sequence(path: &SampledPath, epsilon: f64, slope: f64) -> Result<Partition> {
    hitting_sequence_from(path, path.t_start(), epsilon, slope)
}

/// Hitting sequence started at `t0` (used by shifted evaluations).
pub fn hitting_sequence_from(path: &SampledPath, t0: f64, epsilon: f64, slope: f64) -> Result<Partition> {
    let horizon = path.t_end();
    let zero = vec![0.0; path.dim()];
    let mut points = Vec::new();
    let mut h = t0;
    let cap = 5_000_000usize;
    for _ in 0..cap {
        let spec = ConeSpec::new(h, epsilon, slope, horizon)?;
        let hit = hitting_time(path, h, &zero, &spec)?;
        match hit.kind {
            HitKind::Terminal => {
                return Ok(Partition { epsilon, slope, points, terminal_time: hit.time });
            }
            HitKind::Lateral => {
                if hit.time >= horizon {
                    return Ok(Partition { epsilon, slope, points, terminal_time: horizon });
                }
                if hit.time <= h {
                    return Err(Error::Ordering(format!("hitting sequence stalled at {h}")));
                }
                points.push(PartitionPoint { time: hit.time, increment: hit.location });
                h = hit.time;
            }
        }
    }
    Err(Error::Budget("hitting sequence exceeded the iteration cap".into()))
}

/// Linear interpolation of a partition: the piecewise-linear path through
/// `(t0, 0)` and the cumulative increments at the exit times, held constant
/// from the last exit to the horizon.
pub fn interpolate_partition(pi: &Partition, t0: f64, horizon: f64) -> Result<SampledPath> {
    pi.validate(t0)?;
    let dim = pi.points.first().map(|p| p.increment.len()).unwrap_or(1);
    if pi.points.is_empty() {
        return Ok(SampledPath::zero(dim, t0, horizon));
    }
    let mut knots: Vec<(f64, Vec<f64>)> = Vec::with_capacity(pi.points.len() + 2);
    knots.push((t0, vec![0.0; dim]));
    let mut acc = vec![0.0; dim];
    for p in &pi.points {
        if p.time >= horizon {
            return Err(Error::Ordering(format!("partition time {} at or past horizon", p.time)));
        }
        for i in 0..dim {
            acc[i] += p.increment[i];
        }
        knots.push((p.time, acc.clone()));
    }
    knots.push((horizon, acc));
    SampledPath::new(t0, horizon, knots)
}

/// Markov restart identity, certified in exact rational arithmetic.
///
/// Restarting the solve at any `τ ≤ H` from the moved point with the radius
/// consumed so far must reproduce the original hitting time exactly. Both
/// crossing descriptions (segment, canonicalized quadratic root) are
/// computed over the rationals from the same floating-point inputs and
/// compared for identity — zero tolerance.
pub fn markov_restart_check(path: &SampledPath, t: f64, x: &[f64], spec: &ConeSpec, tau: f64) -> Result<bool> {
    if tau < t {
        return Err(Error::Precondition(format!("restart time {tau} precedes start {t}")));
    }
    exact::restart_identity_holds(path, t, x, spec, tau)
}

/// Comparison hitting-time variants used in diagnostics:
/// `Ĥ_ε` is the plain ball exit capped at `(t+ε) ∧ T`, and `H*_ε` is the
/// first time the elapsed time plus the running supremum reaches ε.
pub fn hitting_variants(path: &SampledPath, t: f64, epsilon: f64) -> Result<(f64, f64)> {
    let horizon = path.t_end();
    let anchor = path.eval(t)?;
    let dim = path.dim();

    // Ĥ: first |ω_s − ω_t| ≥ ε, capped at (t+ε) ∧ T. Slope-0 crossing.
    let cap = (t + epsilon).min(horizon);
    let mut h_hat = cap;
    {
        let times = path.knot_times();
        let mut s0 = t;
        let mut idx = match times.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(k) => k + 1,
            Err(k) => k,
        };
        'outer: loop {
            let s1 = if idx < times.len() { times[idx].min(cap) } else { cap };
            if s1 > s0 {
                let p0 = path.eval(s0)?;
                let p1 = path.eval(s1)?;
                let w: Vec<f64> = (0..dim).map(|i| p0[i] - anchor[i]).collect();
                let v: Vec<f64> = (0..dim).map(|i| (p1[i] - p0[i]) / (s1 - s0)).collect();
                if norm(&w) >= epsilon {
                    h_hat = s0;
                    break 'outer;
                }
                if let Some(u) = segment_crossing(&w, &v, epsilon, 0.0, s1 - s0) {
                    h_hat = s0 + u;
                    break 'outer;
                }
                s0 = s1;
            }
            if s0 >= cap {
                break;
            }
            idx += 1;
        }
    }

    // H*: first (s − t) + sup_{r ≤ s} |ω_r − ω_t| ≥ ε. The running sup over
    // a segment of a convex norm sits at segment endpoints.
    let mut h_star = horizon;
    {
        let times = path.knot_times();
        let mut s0 = t;
        let mut running = 0.0f64;
        let mut idx = match times.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(k) => k + 1,
            Err(k) => k,
        };
        'outer2: loop {
            let s1 = if idx < times.len() { times[idx].min(horizon) } else { horizon };
            if s1 > s0 {
                let p0 = path.eval(s0)?;
                let p1 = path.eval(s1)?;
                let w: Vec<f64> = (0..dim).map(|i| p0[i] - anchor[i]).collect();
                let v: Vec<f64> = (0..dim).map(|i| (p1[i] - p0[i]) / (s1 - s0)).collect();
                running = running.max(norm(&w));
                // Clock + frozen running max.
                let mut best: Option<f64> = None;
                let ca = t + (epsilon - running);
                if ca <= s1 {
                    best = Some(ca.max(s0));
                }
                // Fresh supremum inside the segment: |q(s)| + (s − t) ≥ ε,
                // which is a slope-1 cone crossing with radius ε − (s0 − t).
                let k0 = epsilon - (s0 - t);
                if norm(&w) >= k0 {
                    best = Some(best.map_or(s0, |b| b.min(s0)));
                } else if let Some(u) = segment_crossing(&w, &v, k0, 1.0, s1 - s0) {
                    let cb = s0 + u;
                    best = Some(best.map_or(cb, |b| b.min(cb)));
                }
                if let Some(s) = best {
                    h_star = s.min(horizon);
                    break 'outer2;
                }
                running = running.max(norm(&(0..dim).map(|i| p1[i] - anchor[i]).collect::<Vec<f64>>()));
                s0 = s1;
            }
            if s0 >= horizon {
                break;
            }
            idx += 1;
        }
    }
    Ok((h_hat, h_star))
}
