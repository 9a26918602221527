//! Monotone explicit finite differences for path-frozen PDEs
//!
//! ```text
//! ∂_t v + g(s, x, v, Dv, D²v) = 0
//! ```
//!
//! on cone domains `{ |x| + L₁ (s − t₀) < R }`, backward from lateral and
//! terminal boundary data. The scheme uses central second differences,
//! central first differences stabilized by Lax–Friedrichs dissipation with
//! coefficient equal to the generator's gradient Lipschitz constant, and the
//! CFL condition
//!
//! ```text
//! Δt · (2 L_Γ d / Δx² + L_z d / Δx + L_y) ≤ 1,
//! ```
//!
//! under which every update is nondecreasing in each stencil input. No
//! uniform ellipticity is assumed anywhere; degenerate generators are the
//! point of the construction.
//!
//! The extremal bounding generators
//!
//! ```text
//! ḡ(y,z,Γ) = L Σ λ_i(Γ)⁺ + L(|y| + |z|) + C₀,
//! g̲(y,z,Γ) = L Σ min(λ_i(Γ), 0) − L(|y| + |z|) − C₀
//! ```
//!
//! sandwich every admissible generator with `|g(·,0,0,0)| ≤ C₀`, and the
//! upper one has the probabilistic representation (discounted boundary
//! payoff maximized over bounded drift/diffusion/discount controls) that
//! [`mc_bounding_value`] estimates as an independent cross-check.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hitting::{hitting_time, ConeSpec, HitKind};
use crate::nonlin::{default_catalog, simulate_one, ControlLaw, MCEstimate, MeasureFamilySpec};
use crate::path::norm;
use crate::util::mean_stderr;
use crate::{Error, Result};

/// Dense symmetric matrix of a discrete Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, a: f64) -> SymMat {
        SymMat { dim: self.dim, data: self.data.iter().map(|v| a * v).collect() }
    }

    /// Eigenvalues, clamped to zero inside ±1e−12 to avoid sign chatter on
    /// numerically degenerate directions.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            let v = self.get(0, 0);
            return vec![if v.abs() < 1e-12 { 0.0 } else { v }];
        }
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j));
        let eig = m.symmetric_eigen();
        eig.eigenvalues.iter().map(|&v| if v.abs() < 1e-12 { 0.0 } else { v }).collect()
    }
}

type GenFn = dyn Fn(f64, &[f64], f64, &[f64], &SymMat) -> f64 + Send + Sync;

/// A PDE nonlinearity `g(s, x, y, z, Γ)` together with its Lipschitz
/// metadata (used by the CFL condition and the dissipation coefficient).
/// Parabolicity — monotonicity in Γ — is the caller's contract.
#[derive(Clone)]
pub struct Generator {
    pub label: String,
    pub lip_y: f64,
    pub lip_z: f64,
    pub lip_gamma: f64,
    func: Arc<GenFn>,
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Generator({}, Ly={}, Lz={}, LΓ={})", self.label, self.lip_y, self.lip_z, self.lip_gamma)
    }
}

impl Generator {
    pub fn new(
        label: impl Into<String>,
        lip_y: f64,
        lip_z: f64,
        lip_gamma: f64,
        func: impl Fn(f64, &[f64], f64, &[f64], &SymMat) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), lip_y, lip_z, lip_gamma, func: Arc::new(func) }
    }

    pub fn eval(&self, s: f64, x: &[f64], y: f64, z: &[f64], gamma: &SymMat) -> f64 {
        (self.func)(s, x, y, z, gamma)
    }

    /// The zero generator: pure transport in time.
    pub fn zero() -> Self {
        Self::new("zero", 0.0, 0.0, 0.0, |_, _, _, _, _| 0.0)
    }

    /// The heat generator `½ tr Γ`.
    pub fn heat() -> Self {
        Self::new("heat", 0.0, 0.0, 0.5, |_, _, _, _, g| 0.5 * g.trace())
    }

    /// Combined Lipschitz constant (the `L` of the admissibility class).
    pub fn lip(&self) -> f64 {
        self.lip_y.max(self.lip_z).max(self.lip_gamma)
    }
}

/// Upper bounding generator `ḡ(y,z,Γ) = L Σ λ⁺(Γ) + L(|y|+|z|) + C₀`.
pub fn make_upper_bounding(l: f64, c0: f64) -> Generator {
    Generator::new("upper-bounding", l, l, l, move |_, _, y, z, gamma| {
        let lam_plus: f64 = gamma.eigenvalues().iter().map(|&v| v.max(0.0)).sum();
        l * lam_plus + l * (y.abs() + norm(z)) + c0
    })
}

/// Lower bounding generator `g̲(y,z,Γ) = L Σ min(λ(Γ),0) − L(|y|+|z|) − C₀`.
pub fn make_lower_bounding(l: f64, c0: f64) -> Generator {
    Generator::new("lower-bounding", l, l, l, move |_, _, y, z, gamma| {
        let lam_minus: f64 = gamma.eigenvalues().iter().map(|&v| v.min(0.0)).sum();
        l * lam_minus - l * (y.abs() + norm(z)) - c0
    })
}

/// Shape of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Shrinking ball `|x| + L₁ (s − t₀) < R` — the production domain.
    Cone,
    /// Fixed ball `|x| < R` up to `t₀ + R/L₁` — kept as a regression domain
    /// where degenerate boundary data fails to stay continuous.
    Cylinder,
}

/// Lattice on a cone (or cylinder) domain.
#[derive(Debug, Clone)]
pub struct ConeGrid {
    pub spec: ConeSpec,
    pub dim: usize,
    pub dx: f64,
    pub dt: f64,
    pub kind: DomainKind,
    /// Half-width of the lattice in nodes (two extra rings for stencils).
    n_half: i64,
    n_steps: usize,
}

impl ConeGrid {
    pub fn new(spec: ConeSpec, dim: usize, dx: f64, dt: f64) -> Result<Self> {
        Self::with_kind(spec, dim, dx, dt, DomainKind::Cone)
    }

    pub fn with_kind(spec: ConeSpec, dim: usize, dx: f64, dt: f64, kind: DomainKind) -> Result<Self> {
        if !(dx > 0.0) || !(dt > 0.0) {
            return Err(Error::Config("grid steps must be positive".into()));
        }
        if dim == 0 || dim > 3 {
            return Err(Error::Config(format!("cone grids support 1 ≤ d ≤ 3, got {dim}")));
        }
        if spec.radius / dx < 3.0 {
            return Err(Error::Config("need at least 3 interior nodes per axis at the cone base".into()));
        }
        let span = spec.top_time() - spec.t0;
        let n_steps = (span / dt).ceil().max(1.0) as usize;
        let dt_adj = span / n_steps as f64;
        let n_half = (spec.radius / dx).floor() as i64 + 2;
        Ok(Self { spec, dim, dx, dt: dt_adj, kind, n_half, n_steps })
    }

    /// CFL admissibility for a generator on this grid.
    pub fn check_cfl(&self, g: &Generator) -> Result<()> {
        let d = self.dim as f64;
        let bound = 2.0 * g.lip_gamma * d / (self.dx * self.dx) + g.lip_z * d / self.dx + g.lip_y;
        if self.dt * bound > 1.0 + 1e-9 {
            return Err(Error::Config(format!(
                "CFL violated: dt·(2LΓd/dx² + Lzd/dx + Ly) = {} > 1",
                self.dt * bound
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn side(&self) -> usize {
        (2 * self.n_half + 1) as usize
    }

    pub fn n_nodes(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn time_at(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.spec.top_time()
        } else {
            self.spec.t0 + j as f64 * self.dt
        }
    }

    /// Multi-index (lattice offsets) of a linear node index.
    pub fn unpack(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut out = vec![0i64; self.dim];
        for i in 0..self.dim {
            out[i] = (idx % side) as i64 - self.n_half;
            idx /= side;
        }
        out
    }

    pub fn pack(&self, k: &[i64]) -> usize {
        let side = self.side();
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            idx = idx * side + (k[i] + self.n_half) as usize;
        }
        idx
    }

    pub fn position(&self, k: &[i64]) -> Vec<f64> {
        k.iter().map(|&ki| ki as f64 * self.dx).collect()
    }

    /// Is a lattice point interior at time `s`?
    pub fn interior_at(&self, x: &[f64], s: f64) -> bool {
        let r = norm(x);
        match self.kind {
            DomainKind::Cone => r + self.spec.slope * (s - self.spec.t0) < self.spec.radius && s < self.spec.top_time(),
            DomainKind::Cylinder => r < self.spec.radius && s < self.spec.top_time(),
        }
    }

    /// Radial projection of an exterior point onto the lateral surface at
    /// time `s`.
    pub fn project_lateral(&self, x: &[f64], s: f64) -> Vec<f64> {
        let r = norm(x);
        let target = match self.kind {
            DomainKind::Cone => (self.spec.radius - self.spec.slope * (s - self.spec.t0)).max(0.0),
            DomainKind::Cylinder => self.spec.radius,
        };
        if r == 0.0 {
            return vec![0.0; self.dim];
        }
        x.iter().map(|&xi| xi * target / r).collect()
    }
}

/// Gridded solution of a cone solve; evaluation is multilinear in space and
/// linear in time, clamped to the lattice.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub grid: ConeGrid,
    times: Vec<f64>,
    slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        &self.slices[j]
    }

    /// Value at the cone apex `(t₀, 0)`.
    pub fn apex_value(&self) -> f64 {
        let center = vec![0i64; self.grid.dim];
        self.slices[0][self.grid.pack(&center)]
    }

    /// Interpolated evaluation, clamped to the grid domain.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let j = match self.times.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        };
        if j + 1 >= self.times.len() {
            return self.eval_slice(self.times.len() - 1, x);
        }
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (1.0 - lam) * self.eval_slice(j, x) + lam * self.eval_slice(j + 1, x)
    }

    fn eval_slice(&self, j: usize, x: &[f64]) -> f64 {
        let g = &self.grid;
        let d = g.dim;
        let lim = g.n_half as f64 - 1.0;
        let mut base = vec![0i64; d];
        let mut frac = vec![0.0f64; d];
        for i in 0..d {
            let u = (x[i] / g.dx).clamp(-lim, lim);
            let f = u.floor();
            base[i] = f as i64;
            frac[i] = u - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut k = base.clone();
            for i in 0..d {
                if corner & (1 << i) != 0 {
                    k[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            acc += w * self.slices[j][g.pack(&k)];
        }
        acc
    }

    /// Full-field CSV dump `s, x_1.., v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for i in 1..=self.grid.dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",v\n");
        for (j, t) in self.times.iter().enumerate() {
            for idx in 0..self.grid.n_nodes() {
                let k = self.grid.unpack(idx);
                let x = self.grid.position(&k);
                if norm(&x) <= self.grid.spec.radius {
                    out.push_str(&format!("{t}"));
                    for xi in &x {
                        out.push_str(&format!(",{xi}"));
                    }
                    out.push_str(&format!(",{}\n", self.slices[j][idx]));
                }
            }
        }
        out
    }
}

/// Backward monotone solve of `∂_t v + g = 0` on the grid with boundary
/// data `h(s, x)` on the lateral surface and the terminal face. Nodes that
/// leave the domain between slices carry radially projected boundary values.
pub fn solve_cone<B>(g: &Generator, grid: &ConeGrid, boundary: B) -> Result<ValueField>
where
    B: Fn(f64, &[f64]) -> f64 + Sync,
{
    grid.check_cfl(g)?;
    let n_nodes = grid.n_nodes();
    let n_steps = grid.n_steps();
    let times: Vec<f64> = (0..=n_steps).map(|j| grid.time_at(j)).collect();
    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);

    // Top slice: terminal data inside (when the cone is horizon-truncated),
    // projected lateral data outside.
    let t_top = *times.last().unwrap();
    let at_horizon = t_top >= grid.spec.horizon;
    let top: Vec<f64> = (0..n_nodes)
        .into_par_iter()
        .map(|idx| {
            let x = grid.position(&grid.unpack(idx));
            let inside = match grid.kind {
                DomainKind::Cone => norm(&x) + grid.spec.slope * (t_top - grid.spec.t0) <= grid.spec.radius,
                DomainKind::Cylinder => norm(&x) <= grid.spec.radius,
            };
            if at_horizon && inside {
                boundary(t_top, &x)
            } else {
                boundary(t_top, &grid.project_lateral(&x, t_top))
            }
        })
        .collect();
    slices.push(top);

    let dx = grid.dx;
    let dt = grid.dt;
    let d = grid.dim;
    for j in (0..n_steps).rev() {
        let s = times[j];
        let s_next = times[j + 1];
        let prev = slices.last().unwrap();
        let slice: Vec<f64> = (0..n_nodes)
            .into_par_iter()
            .map(|idx| {
                let k = grid.unpack(idx);
                let x = grid.position(&k);
                if !grid.interior_at(&x, s) {
                    if j == 0 {
                        // Boundary data is posed strictly after the anchor;
                        // reuse the first computed lateral time.
                        return prev[idx];
                    }
                    return boundary(s, &grid.project_lateral(&x, s));
                }
                let c = prev[idx];
                let mut z = vec![0.0f64; d];
                let mut gamma = SymMat::zeros(d);
                let mut dissip = 0.0;
                for i in 0..d {
                    let mut kp = k.clone();
                    kp[i] += 1;
                    let mut km = k.clone();
                    km[i] -= 1;
                    let vp = prev[grid.pack(&kp)];
                    let vm = prev[grid.pack(&km)];
                    z[i] = (vp - vm) / (2.0 * dx);
                    gamma.set(i, i, (vp - 2.0 * c + vm) / (dx * dx));
                    dissip += (vp + vm - 2.0 * c) * g.lip_z / (2.0 * dx);
                }
                for i in 0..d {
                    for l in (i + 1)..d {
                        let mut kpp = k.clone();
                        kpp[i] += 1;
                        kpp[l] += 1;
                        let mut kpm = k.clone();
                        kpm[i] += 1;
                        kpm[l] -= 1;
                        let mut kmp = k.clone();
                        kmp[i] -= 1;
                        kmp[l] += 1;
                        let mut kmm = k.clone();
                        kmm[i] -= 1;
                        kmm[l] -= 1;
                        let cross = (prev[grid.pack(&kpp)] - prev[grid.pack(&kpm)] - prev[grid.pack(&kmp)]
                            + prev[grid.pack(&kmm)])
                            / (4.0 * dx * dx);
                        gamma.set(i, l, cross);
                    }
                }
                c + dt * (g.eval(s_next, &x, c, &z, &gamma) + dissip)
            })
            .collect();
        if let Some(bad) = slice.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence { slice: j, message: format!("non-finite value at node {bad}") });
        }
        slices.push(slice);
    }
    slices.reverse();
    Ok(ValueField { grid: grid.clone(), times, slices })
}

/// Options of the probabilistic bounding-value estimator.
#[derive(Debug, Clone)]
pub struct McBoundingOptions {
    pub family: Option<Vec<ControlLaw>>,
    pub discount_catalog: Vec<f64>,
    pub step: f64,
}

impl McBoundingOptions {
    pub fn defaults(l: f64, spec: &ConeSpec) -> Self {
        Self {
            family: None,
            discount_catalog: vec![-l, 0.0, l],
            step: 1e-3 * (spec.top_time() - spec.t0).max(1e-9),
        }
    }
}

/// Monte Carlo estimate of the upper bounding value at the cone apex:
///
/// ```text
/// sup_{P, b} E^P [ e^{∫ b} h(H, B_H) + C₀ ∫ e^{∫ b} ds ],
/// ```
///
/// with `H` the cone exit of the controlled path and `|b| ≤ L` a
/// piecewise-constant discount catalog. Serves as the independent oracle for
/// [`solve_cone`] with the upper bounding generator.
pub fn mc_bounding_value<B>(
    h: B,
    spec: &ConeSpec,
    dim: usize,
    l: f64,
    c0: f64,
    n: usize,
    seed: u64,
    opts: &McBoundingOptions,
) -> Result<MCEstimate>
where
    B: Fn(f64, &[f64]) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let sim_spec = MeasureFamilySpec::new(l, dim, spec.t0, spec.top_time().max(spec.t0 + 1e-9), opts.step)?;
    let family = opts.family.clone().unwrap_or_else(|| default_catalog(&sim_spec));
    if family.is_empty() {
        return Err(Error::Config("empty control family".into()));
    }
    let zero = vec![0.0; dim];
    let mut best: Option<(f64, f64, String)> = None;
    for law in &family {
        law.validate(&sim_spec)?;
        // Hitting data per sample, reused across discount values.
        let hits: Vec<(f64, f64)> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let p = simulate_one(law, &sim_spec, seed, i);
                let hit = hitting_time(&p, spec.t0, &zero, spec).expect("hitting on simulated path");
                let elapsed = hit.time - spec.t0;
                let payoff = match hit.kind {
                    HitKind::Lateral | HitKind::Terminal => h(hit.time, &hit.location),
                };
                (elapsed, payoff)
            })
            .collect();
        for &b in &opts.discount_catalog {
            if b.abs() > l * (1.0 + 1e-12) {
                return Err(Error::Bound(format!("discount {b} outside [−L, L]")));
            }
            let vals: Vec<f64> = hits
                .iter()
                .map(|&(elapsed, payoff)| {
                    let disc = (b * elapsed).exp();
                    let c0_term = if b == 0.0 { c0 * elapsed } else { c0 * (disc - 1.0) / b };
                    disc * payoff + c0_term
                })
                .collect();
            let (m, se) = mean_stderr(&vals);
            if best.as_ref().map_or(true, |(bm, _, _)| m > *bm) {
                best = Some((m, se, format!("{}|b={b}", law.label)));
            }
        }
    }
    let (value, stderr, argmax_control) = best.unwrap();
    Ok(MCEstimate { value, stderr, n_samples: n, argmax_control })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn constants_are_fixed_points_of_the_scheme() {
        let spec = ConeSpec::new(0.0, 0.5, 1.0, 1.0).unwrap();
        let grid = ConeGrid::new(spec, 1, 0.02, 0.005).unwrap();
        let field = solve_cone(&Generator::zero(), &grid, |_, _| 3.25).unwrap();
        for j in 0..field.times().len() {
            for v in field.slice(j) {
                assert_eq!(*v, 3.25);
            }
        }
    }

    #[test]
    fn cone_exit_time_boundary_reproduces_distance_to_surface() {
        // ∂_t v = 0 with data h(s,x) = s on the cone of radius ε and unit
        // slope has the continuous solution v(t,x) = ε − |x|.
        let eps = 0.5;
        let spec = ConeSpec::new(0.0, eps, 1.0, 1.0).unwrap();
        let dx = eps / 25.0;
        let grid = ConeGrid::new(spec, 1, dx, dx / 2.0).unwrap();
        let field = solve_cone(&Generator::zero(), &grid, |s, _| s).unwrap();
        let mut worst = 0.0f64;
        for idx in 0..grid.n_nodes() {
            let x = grid.position(&grid.unpack(idx));
            if x[0].abs() < eps {
                let err = (field.slice(0)[idx] - (eps - x[0].abs())).abs();
                worst = worst.max(err);
            }
        }
        assert!(worst <= 2.0 * dx, "worst node error {worst} > {}", 2.0 * dx);
        assert_abs_diff_eq!(field.apex_value(), eps, epsilon = 2.0 * dx);
    }

    #[test]
    fn cylinder_domain_keeps_the_boundary_layer_jump() {
        // Same data on the fixed ball: the interior stays at the terminal
        // value ε while the lateral wall carries h = s, so a jump of order
        // ε − t persists near the wall. This is the regression showing why
        // the shrinking cone is the production domain.
        let eps = 0.5;
        let spec = ConeSpec::new(0.0, eps, 1.0, 1.0).unwrap();
        let dx = eps / 25.0;
        let dt = dx / 2.0;
        let grid = ConeGrid::with_kind(spec, 1, dx, dt, DomainKind::Cylinder).unwrap();
        let field = solve_cone(&Generator::zero(), &grid, |s, _| s).unwrap();
        let t = eps - 4.0 * grid.dt;
        let j = ((t - 0.0) / grid.dt).round() as usize;
        let inside_idx = grid.pack(&[((eps / dx) as i64) - 1]);
        let xin = grid.position(&grid.unpack(inside_idx));
        let inside_value = field.slice(j)[inside_idx];
        let wall_value = field.eval(t, &[eps]);
        assert!(xin[0] < eps);
        let jump = inside_value - wall_value;
        assert!(jump >= (eps - t) / 2.0, "jump {jump} too small; expected ≥ {}", (eps - t) / 2.0);
    }

    #[test]
    fn heat_generator_reproduces_quadratic_solution() {
        // w(s, x) = |x|² + d (S − s) solves ∂_t w + ½ tr D²w = 0 exactly.
        let spec = ConeSpec::new(0.0, 0.5, 1.0, 1.0).unwrap();
        let dx = 0.02;
        let grid = ConeGrid::new(spec, 1, dx, dx * dx / 2.0).unwrap();
        let top = grid.spec.top_time();
        let w = move |s: f64, x: &[f64]| -> f64 { x.iter().map(|v| v * v).sum::<f64>() + (top - s) };
        let field = solve_cone(&Generator::heat(), &grid, w).unwrap();
        // The scheme is exact on quadratics away from the lateral surface;
        // radially projected boundary carriers are first-order in dx, so the
        // global error is O(dx).
        let mut worst = 0.0f64;
        for (j, &s) in field.times().iter().enumerate() {
            if j == 0 {
                continue;
            }
            for idx in 0..grid.n_nodes() {
                let x = grid.position(&grid.unpack(idx));
                if grid.interior_at(&x, s) {
                    worst = worst.max((field.slice(j)[idx] - w(s, &x)).abs());
                }
            }
        }
        assert!(worst <= 2.0 * dx, "worst {worst} vs {}", 2.0 * dx);
        assert_abs_diff_eq!(field.apex_value(), w(0.0, &[0.0]), epsilon = 2.0 * dx);
    }

    #[test]
    fn bounding_generators_at_reference_points() {
        let g_up = make_upper_bounding(1.0, 0.75);
        let g_lo = make_lower_bounding(1.0, 0.75);
        let z = vec![0.0];
        assert_eq!(g_up.eval(0.0, &[0.0], 0.0, &z, &SymMat::zeros(1)), 0.75);
        let neg = SymMat::identity(1).scale(-1.0);
        assert_eq!(g_up.eval(0.0, &[0.0], 0.0, &z, &neg), 0.75);
        let z2 = vec![0.0, 0.0];
        let id2 = SymMat::identity(2);
        assert_abs_diff_eq!(g_up.eval(0.0, &[0.0, 0.0], 0.0, &z2, &id2), 2.0 + 0.75, epsilon = 1e-12);
        // Diagonal-σ grid search oracle: ½ max_{0≤s_i≤√(2L)} Σ s_i² λ_i = L·d at Γ = I.
        let mut best = f64::NEG_INFINITY;
        let m = 40;
        for a in 0..=m {
            for b in 0..=m {
                let s1 = (2.0f64).sqrt() * a as f64 / m as f64;
                let s2 = (2.0f64).sqrt() * b as f64 / m as f64;
                best = best.max(0.5 * (s1 * s1 + s2 * s2));
            }
        }
        assert_abs_diff_eq!(g_up.eval(0.0, &[0.0, 0.0], 0.0, &z2, &id2), best + 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(g_lo.eval(0.0, &[0.0, 0.0], 0.0, &z2, &id2), -0.75, epsilon = 1e-12);
    }

    #[test]
    fn generator_sandwich_on_sampled_arguments() {
        let l = 1.0;
        let c0 = 0.0;
        let g_up = make_upper_bounding(l, c0);
        let g_lo = make_lower_bounding(l, c0);
        let heat = Generator::heat();
        let mut rng = crate::util::stream_rng(31, 0);
        for _ in 0..200 {
            let y: f64 = rng.gen_range(-2.0..2.0);
            let z = vec![rng.gen_range(-2.0..2.0)];
            let mut gm = SymMat::zeros(1);
            gm.set(0, 0, rng.gen_range(-3.0..3.0));
            let g = heat.eval(0.0, &[0.0], y, &z, &gm);
            assert!(g_lo.eval(0.0, &[0.0], y, &z, &gm) <= g + 1e-12);
            assert!(g <= g_up.eval(0.0, &[0.0], y, &z, &gm) + 1e-12);
        }
    }

    #[test]
    fn discrete_comparison_ordered_boundaries_give_ordered_fields() {
        let spec = ConeSpec::new(0.0, 0.4, 1.5, 1.0).unwrap();
        let grid = ConeGrid::new(spec, 1, 0.02, 1e-4).unwrap();
        let g = make_upper_bounding(1.0, 0.0);
        grid.check_cfl(&g).unwrap();
        let f1 = solve_cone(&g, &grid, |s, x: &[f64]| (s + x[0]).sin()).unwrap();
        let f2 = solve_cone(&g, &grid, |s, x: &[f64]| (s + x[0]).sin() + 0.3).unwrap();
        for j in 0..f1.times().len() {
            for (a, b) in f1.slice(j).iter().zip(f2.slice(j)) {
                assert!(a <= &(b + 1e-10));
            }
        }
    }

    #[test]
    fn randomized_boundary_bumps_never_decrease_the_field() {
        // Monotonicity of the full update map, probed through boundary data.
        let spec = ConeSpec::new(0.0, 0.4, 1.0, 1.0).unwrap();
        let grid = ConeGrid::new(spec, 1, 0.04, 5e-4).unwrap();
        let g = make_upper_bounding(1.0, 0.5);
        let mut rng = crate::util::stream_rng(32, 0);
        for _ in 0..10 {
            let a = rng.gen_range(0.0..0.5);
            let c = rng.gen_range(0.2..0.8);
            let base = solve_cone(&g, &grid, |s, x: &[f64]| a * (3.0 * s + x[0]).cos()).unwrap();
            let bumped = solve_cone(&g, &grid, |s, x: &[f64]| {
                let v = a * (3.0 * s + x[0]).cos();
                if s > c {
                    v + 0.2
                } else {
                    v
                }
            })
            .unwrap();
            for j in 0..base.times().len() {
                for (u, w) in base.slice(j).iter().zip(bumped.slice(j)) {
                    assert!(u <= &(w + 1e-10));
                }
            }
        }
    }

    #[test]
    fn consistency_discrete_operator_matches_generator_on_quadratics() {
        // For quadratic data the one-step increment divided by dt equals
        // g(s, x, v, Dv, D²v) up to the O(dx) dissipation term.
        let spec = ConeSpec::new(0.0, 0.5, 1.0, 1.0).unwrap();
        let dx = 0.02;
        let g = make_upper_bounding(0.8, 0.3);
        let grid = ConeGrid::new(spec, 1, dx, 1e-4).unwrap();
        grid.check_cfl(&g).unwrap();
        let quad = |_s: f64, x: &[f64]| 0.7 * x[0] * x[0] - 0.4 * x[0] + 0.2;
        let field = solve_cone(&g, &grid, quad).unwrap();
        let n = grid.n_steps();
        let s_next = field.times()[n];
        // interior node well inside the base
        for &xi in &[-0.1f64, 0.0, 0.12] {
            let k = [(xi / dx).round() as i64];
            let x = grid.position(&k);
            if !grid.interior_at(&x, field.times()[n - 1]) {
                continue;
            }
            let idx = grid.pack(&k);
            let stepped = field.slice(n - 1)[idx];
            let top = field.slice(n);
            let c = top[idx];
            let vp = top[grid.pack(&[k[0] + 1])];
            let vm = top[grid.pack(&[k[0] - 1])];
            let z = vec![(vp - vm) / (2.0 * dx)];
            let mut gm = SymMat::zeros(1);
            gm.set(0, 0, (vp - 2.0 * c + vm) / (dx * dx));
            let discrete = (stepped - c) / grid.dt;
            let exact = g.eval(s_next, &x, c, &z, &gm);
            assert!((discrete - exact).abs() <= 3.0 * g.lip_z * dx, "mismatch at x = {xi}");
        }
    }

    #[test]
    fn mc_bounding_trivial_boundaries() {
        let spec = ConeSpec::new(0.0, 0.4, 1.5, 1.0).unwrap();
        let opts = McBoundingOptions::defaults(0.5, &spec);
        let z = mc_bounding_value(|_, _| 0.0, &spec, 1, 0.5, 0.0, 200, 41, &opts).unwrap();
        assert_eq!(z.value, 0.0);

        let one = mc_bounding_value(|_, _| 1.0, &spec, 1, 0.5, 0.0, 500, 42, &opts).unwrap();
        let tau_bar = 0.4 / 1.5;
        assert!(one.value <= (0.5f64 * tau_bar).exp() + 1e-9);
        assert!(one.value >= (-0.5f64 * tau_bar).exp() - 1e-9);
    }

    #[test]
    fn mc_bounding_agrees_with_fd_on_exit_time_boundary() {
        // Boundary h(s, x) = s, small L: the Monte Carlo bounding value and
        // the finite-difference solve of the upper bounding generator see
        // the same optimum (σ = 0, zero drift, positive discount).
        let eps = 0.5;
        let l = 0.5;
        let l1 = l + 1.0;
        let spec = ConeSpec::new(0.0, eps, l1, 1.0).unwrap();
        let dx = eps / 40.0;
        let g = make_upper_bounding(l, 0.0);
        let dt_max = 1.0 / (2.0 * g.lip_gamma / (dx * dx) + g.lip_z / dx + g.lip_y);
        let grid = ConeGrid::new(spec, 1, dx, dt_max * 0.9).unwrap();
        let fd = solve_cone(&g, &grid, |s, _| s).unwrap().apex_value();
        let opts = McBoundingOptions::defaults(l, &spec);
        let mc = mc_bounding_value(|s, _| s, &spec, 1, l, 0.0, 20_000, 43, &opts).unwrap();
        assert!(
            (fd - mc.value).abs() <= 5e-2,
            "fd = {fd}, mc = {} ± {}",
            mc.value,
            mc.stderr
        );
    }

    #[test]
    fn cfl_violation_is_a_configuration_error() {
        let spec = ConeSpec::new(0.0, 0.5, 1.0, 1.0).unwrap();
        let grid = ConeGrid::new(spec, 1, 0.02, 0.01).unwrap();
        let g = make_upper_bounding(1.0, 0.0);
        assert!(matches!(solve_cone(&g, &grid, |_, _| 0.0), Err(Error::Config(_))));
    }
}
