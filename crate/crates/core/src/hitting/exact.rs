//! Exact-arithmetic certification of the hitting-time restart identity.
//!
//! Floating-point hitting times computed from a restarted anchor differ from
//! the original in their last bits, so a bitwise comparison can never attest
//! the identity at zero tolerance. Over the rationals the two solves are
//! literally the same function: the crossing lives on the same path segment
//! and solves the same quadratic. This module mirrors the segment solver in
//! `BigRational` arithmetic, canonicalizes each hit as either a rational
//! time or a quadratic surd `p ± √e` (with `e` square-free over ℚ in the
//! sense of not being a perfect square), and compares the descriptions for
//! identity.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::hitting::ConeSpec;
use crate::path::SampledPath;
use crate::{Error, Result};

type Rat = BigRational;

fn rat(x: f64) -> Result<Rat> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite input {x}")))
}

fn rat_vec(xs: &[f64]) -> Result<Vec<Rat>> {
    xs.iter().map(|&x| rat(x)).collect()
}

fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn norm2(a: &[Rat]) -> Rat {
    dot(a, a)
}

/// Piecewise-linear path with exact rational knots.
struct RatPath {
    times: Vec<Rat>,
    values: Vec<Vec<Rat>>,
}

impl RatPath {
    fn from_sampled(p: &SampledPath) -> Result<Self> {
        let times = rat_vec(p.knot_times())?;
        let values = (0..p.n_knots()).map(|k| rat_vec(p.knot_value(k))).collect::<Result<Vec<_>>>()?;
        Ok(Self { times, values })
    }

    fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Exact interpolation; constant beyond the last knot.
    fn eval(&self, t: &Rat) -> Vec<Rat> {
        if *t <= self.times[0] {
            return self.values[0].clone();
        }
        let mut k = self.times.len() - 1;
        for i in 0..self.times.len() {
            if self.times[i] > *t {
                k = i - 1;
                break;
            }
        }
        if k + 1 >= self.times.len() || self.times[k] == *t {
            return self.values[k.min(self.times.len() - 1)].clone();
        }
        let lam = (t - &self.times[k]) / (&self.times[k + 1] - &self.times[k]);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| a + &lam * (b - a))
            .collect()
    }
}

/// Canonical description of a hitting time.
#[derive(Debug, Clone, PartialEq)]
enum HitDesc {
    /// Clamped at the horizon without a crossing.
    Terminal,
    /// Rational hit time.
    At(Rat),
    /// Hit time `p + sign·√e` with `e > 0` not a perfect rational square.
    Surd { p: Rat, sign: i8, e: Rat },
}

fn is_perfect_square(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

/// Canonicalizes `p + sign √e`; collapses to `At` when `e` is a perfect
/// square (including zero).
fn make_root(p: Rat, sign: i8, e: Rat) -> HitDesc {
    debug_assert!(!e.is_negative());
    if e.is_zero() {
        return HitDesc::At(p);
    }
    let (num, den) = (e.numer().clone(), e.denom().clone());
    if let (Some(rn), Some(rd)) = (is_perfect_square(&num), is_perfect_square(&den)) {
        let root = Rat::new(rn, rd);
        let val = if sign >= 0 { p + root } else { p - root };
        return HitDesc::At(val);
    }
    HitDesc::Surd { p, sign, e }
}

/// Compares `p + sign √e` with a rational `r` (with `e > 0` non-square, so
/// equality is impossible).
fn surd_cmp(p: &Rat, sign: i8, e: &Rat, r: &Rat) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    let d = r - p; // compare sign·√e with d
    if sign >= 0 {
        if d.is_negative() || d.is_zero() {
            return Greater;
        }
        let d2 = &d * &d;
        if *e > d2 {
            Greater
        } else {
            Less
        }
    } else {
        if d.is_positive() || d.is_zero() {
            return Less;
        }
        let d2 = &d * &d;
        if *e > d2 {
            Less
        } else {
            Greater
        }
    }
}

impl HitDesc {
    /// `desc < r`?
    fn lt_rational(&self, r: &Rat, horizon: &Rat) -> bool {
        match self {
            HitDesc::Terminal => horizon < r,
            HitDesc::At(t) => t < r,
            HitDesc::Surd { p, sign, e } => surd_cmp(p, *sign, e, r) == std::cmp::Ordering::Less,
        }
    }
}

/// The sign of `|q| − K` at a point, decided on squares (`K ≥ 0` case) or
/// directly (`K < 0` ⇒ positive).
fn phi_nonnegative(q2: &Rat, k: &Rat) -> bool {
    if k.is_negative() {
        return true;
    }
    *q2 >= k * k
}

/// Exact first-crossing solve of `|x + p(s) − p(anchor)| + slope (s −
/// anchor) ≥ radius` over `[anchor, horizon]`.
fn solve_exact(path: &RatPath, anchor: &Rat, x: &[Rat], radius: &Rat, slope: &Rat, horizon: &Rat) -> Result<HitDesc> {
    let p_anchor = path.eval(anchor);
    let offset = |s: &Rat| -> Vec<Rat> {
        let p = path.eval(s);
        x.iter().zip(p.iter().zip(&p_anchor)).map(|(xi, (pi, ai))| xi + pi - ai).collect()
    };
    // φ(anchor) ≥ 0: immediate hit.
    if phi_nonnegative(&norm2(x), radius) {
        return Ok(HitDesc::At(anchor.clone()));
    }
    // Segment boundaries: knots strictly after the anchor, then the horizon.
    let mut bounds: Vec<Rat> = path.times.iter().filter(|t| *t > anchor && *t < horizon).cloned().collect();
    bounds.push(horizon.clone());
    let mut s0 = anchor.clone();
    for s1 in bounds {
        let w = offset(&s0);
        let k0 = radius - slope * (&s0 - anchor);
        let p0 = path.eval(&s0);
        let p1 = path.eval(&s1);
        let du = &s1 - &s0;
        let v: Vec<Rat> = p0.iter().zip(&p1).map(|(a, b)| (b - a) / &du).collect();
        if phi_nonnegative(&norm2(&w), &k0) {
            return Ok(HitDesc::At(s0));
        }
        let k1 = radius - slope * (&s1 - anchor);
        let q1 = offset(&s1);
        if phi_nonnegative(&norm2(&q1), &k1) {
            // Crossing inside (s0, s1]: quadratic in Δ = s − s0 from
            // |w + vΔ|² = (K0 − slope Δ)².
            let a = norm2(&v) - slope * slope;
            let b = Rat::from_integer(2.into()) * (dot(&w, &v) + &k0 * slope);
            let c = norm2(&w) - &k0 * &k0;
            let two = Rat::from_integer(2.into());
            let four = Rat::from_integer(4.into());
            let valid = |delta_desc: &HitDesc| -> bool {
                // Δ ∈ (0, du] and K0 − slope Δ ≥ 0, decided exactly.
                match delta_desc {
                    HitDesc::At(d) => {
                        if !(d.is_positive() && *d <= du) {
                            return false;
                        }
                        !(&k0 - slope * d).is_negative()
                    }
                    HitDesc::Surd { p, sign, e } => {
                        use std::cmp::Ordering::*;
                        if surd_cmp(p, *sign, e, &Rat::zero()) != Greater {
                            return false;
                        }
                        if surd_cmp(p, *sign, e, &du) == Greater {
                            return false;
                        }
                        // K0/slope ≥ Δ (slope > 0).
                        let bound = &k0 / slope;
                        surd_cmp(p, *sign, e, &bound) != Greater
                    }
                    HitDesc::Terminal => false,
                }
            };
            let lift = |delta_desc: HitDesc| -> HitDesc {
                match delta_desc {
                    HitDesc::At(d) => HitDesc::At(&s0 + d),
                    HitDesc::Surd { p, sign, e } => HitDesc::Surd { p: &s0 + p, sign, e },
                    HitDesc::Terminal => HitDesc::Terminal,
                }
            };
            if a.is_zero() {
                if b.is_zero() {
                    // |q|² − K² constant and negative: the hit occurs where
                    // K reaches zero, at Δ = K0/slope.
                    let d = &k0 / slope;
                    return Ok(lift(HitDesc::At(d)));
                }
                let d = -&c / &b;
                let cand = HitDesc::At(d);
                if valid(&cand) {
                    return Ok(lift(cand));
                }
                // The genuine crossing must be the K = 0 point.
                let d = &k0 / slope;
                return Ok(lift(HitDesc::At(d)));
            }
            let disc = &b * &b - &four * &a * &c;
            if disc.is_negative() {
                return Err(Error::Domain("exact solver: crossing bracketed but discriminant negative".into()));
            }
            let pm = -&b / (&two * &a);
            let e = &disc / (&four * &a * &a);
            // Candidate roots pm − √e and pm + √e, smaller first.
            for sign in [-1i8, 1] {
                let cand = make_root(pm.clone(), sign, e.clone());
                if valid(&cand) {
                    return Ok(lift(cand));
                }
            }
            return Err(Error::Domain("exact solver: no valid root in a bracketed segment".into()));
        }
        s0 = s1;
    }
    Ok(HitDesc::Terminal)
}

/// Certifies the restart identity at `(path, t, x, spec, τ)`.
pub fn restart_identity_holds(path: &SampledPath, t: f64, x: &[f64], spec: &ConeSpec, tau: f64) -> Result<bool> {
    let rp = RatPath::from_sampled(path)?;
    let (rt, rtau) = (rat(t)?, rat(tau)?);
    let slope = rat(spec.slope)?;
    let radius0 = rat(spec.radius)?;
    let t0 = rat(spec.t0)?;
    let horizon = rat(spec.horizon.min(path.t_end()))?;
    let xr = rat_vec(x)?;
    if xr.len() != rp.dim() {
        return Err(Error::Dimension("offset dimension mismatch".into()));
    }
    // Radius remaining at t.
    let r_t = &radius0 - &slope * (&rt - &t0);
    if r_t.is_negative() || norm2(&xr) > &r_t * &r_t {
        return Err(Error::Precondition("start point outside the cone".into()));
    }
    if rtau > horizon {
        return Err(Error::Precondition("restart time past the horizon".into()));
    }

    let original = solve_exact(&rp, &rt, &xr, &r_t, &slope, &horizon)?;
    if original.lt_rational(&rtau, &horizon) {
        return Err(Error::Precondition("restart time past the hitting time".into()));
    }

    // Moved point and consumed radius.
    let p_tau = rp.eval(&rtau);
    let p_t = rp.eval(&rt);
    let x_moved: Vec<Rat> = xr.iter().zip(p_tau.iter().zip(&p_t)).map(|(xi, (a, b))| xi + a - b).collect();
    let r_moved = &r_t - &slope * (&rtau - &rt);

    // Re-anchored path: value zero at τ, original increments afterwards.
    let mut times = vec![rtau.clone()];
    let mut values = vec![vec![Rat::zero(); rp.dim()]];
    for (k, tk) in rp.times.iter().enumerate() {
        if *tk > rtau {
            times.push(tk.clone());
            values.push(rp.values[k].iter().zip(&p_tau).map(|(a, b)| a - b).collect());
        }
    }
    let re_anchored = RatPath { times, values };
    let restarted = solve_exact(&re_anchored, &rtau, &x_moved, &r_moved, &slope, &horizon)?;

    Ok(original == restarted)
}
