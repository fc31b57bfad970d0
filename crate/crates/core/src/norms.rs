//! Discrete Lebesgue, weak Lebesgue and Morrey norms, ball averages, and the
//! Lipschitz-type seminorms, all over the same gauge-ball families as the
//! operators.

use crate::accum::Sum;
use crate::error::{Error, Result};
use crate::group::Group;
use crate::lattice::{build_stencil, GridFunction, Index, LatticeSpec};
use crate::operators::{EvalContext, Translator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Largest number of point pairs the pair sup scans exhaustively.
pub const MAX_EXHAUSTIVE_PAIRS: usize = 100_000_000;
/// Points drawn for the subsampled pair sup on larger lattices.
pub const PAIR_SUBSAMPLE: usize = 10_000;

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::config(format!(
            "exponent p={p} must satisfy p >= 1 (infinity allowed)"
        )));
    }
    Ok(())
}

/// `(cell * sum |v|^p)^{1/p}`, or `max |v|` at `p = infinity`.
pub fn lp_norm(values: &[f64], cell_measure: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let mut acc = Sum::new();
    for v in values {
        acc.add(v.abs().powf(p));
    }
    Ok((cell_measure * acc.value()).powf(1.0 / p))
}

/// Weak `L^s` quasinorm `sup_t t * measure{|v| > t}^{1/s}`, computed exactly
/// from the value distribution: the sup is attained at some sample value.
pub fn weak_quasinorm(values: &[f64], cell_measure: f64, s: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::config(format!(
            "weak exponent s={s} must be finite and positive"
        )));
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let inv = 1.0 / s;
    let mut best = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        if v == 0.0 {
            break;
        }
        if i + 1 < sorted.len() && sorted[i + 1] == v {
            continue;
        }
        best = best.max(v * (cell_measure * (i + 1) as f64).powf(inv));
    }
    Ok(best)
}

/// The ball that attains a supremum over the admissible family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallWitness {
    pub center: Index,
    pub radius: f64,
    pub value: f64,
}

/// Morrey norm `sup_B (|B|^{-lambda/Q} integral_B |f|^p)^{1/p}` over the
/// admissible family, with the attaining ball.
pub fn morrey_norm(
    f: &GridFunction,
    p: f64,
    lambda: f64,
    ctx: &EvalContext,
) -> Result<(f64, BallWitness)> {
    morrey_norm_floor(f, p, lambda, ctx, 0.0)
}

/// Same norm with the ball sup restricted to family radii at or above
/// `floor`; see `lip_beta_p_floor` for why frozen constants want this.
pub fn morrey_norm_floor(
    f: &GridFunction,
    p: f64,
    lambda: f64,
    ctx: &EvalContext,
    floor: f64,
) -> Result<(f64, BallWitness)> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(Error::config(
            "Morrey norm requires a finite integrability exponent".to_string(),
        ));
    }
    let spec = &ctx.spec;
    let q = spec.group.homogeneous_dim() as f64;
    if !(0.0..=q).contains(&lambda) {
        return Err(Error::config(format!(
            "Morrey parameter lambda={lambda} must lie in [0, Q] with Q={q}"
        )));
    }
    if !f.spec.same_grid(spec) {
        return Err(Error::data("input grid does not match the context lattice".to_string()));
    }
    let cell = spec.cell_measure();
    // |f|^p once per point; the ball loops then only gather and add, which
    // keeps the accumulation order and hence every value bit-identical.
    let powered: Vec<f64> = f.values.par_iter().map(|v| v.abs().powf(p)).collect();
    let mut best: Option<BallWitness> = None;
    for st in &ctx.stencils {
        if st.radius < floor {
            continue;
        }
        let w = st.discrete_measure().powf(-lambda / q);
        let vals: Vec<f64> = ctx
            .core
            .indices()
            .par_iter()
            .map(|&z| {
                let tr = Translator::new(spec, z);
                let mut acc = Sum::new();
                for o in &st.offsets {
                    acc.add(powered[tr.linear(*o)]);
                }
                (w * cell * acc.value()).powf(1.0 / p)
            })
            .collect();
        for (z, v) in ctx.core.indices().iter().zip(vals) {
            if best.is_none_or(|b| v > b.value) {
                best = Some(BallWitness {
                    center: *z,
                    radius: st.radius,
                    value: v,
                });
            }
        }
    }
    let witness = best.ok_or_else(|| Error::config("empty ball family".to_string()))?;
    Ok((witness.value, witness))
}

/// Signed average `(1/|B|) integral_B f` over one gauge ball.
pub fn ball_average(f: &GridFunction, center: Index, radius: f64) -> Result<f64> {
    let spec = &f.spec;
    let st = build_stencil(spec, radius)?;
    let tr = Translator::new(spec, center);
    let mut acc = Sum::new();
    for o in &st.offsets {
        let t = spec.translate(center, *o);
        if !spec.contains(t) {
            return Err(Error::config(format!(
                "ball at {center:?} radius {radius} leaves the lattice"
            )));
        }
        acc.add(f.values[tr.linear(*o)]);
    }
    Ok(acc.value() / st.count() as f64)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && 0.0 < beta && beta <= 1.0) {
        return Err(Error::config(format!(
            "smoothness order beta={beta} must lie in (0, 1]"
        )));
    }
    Ok(())
}

fn pair_sup(spec: &LatticeSpec, b: &GridFunction, beta: f64, points: &[usize]) -> f64 {
    let g = spec.group;
    points
        .par_iter()
        .enumerate()
        .map(|(i, &xl)| {
            let xp = spec.point(spec.index(xl));
            let bx = b.values[xl];
            let mut m = 0.0f64;
            for &yl in &points[i + 1..] {
                let yp = spec.point(spec.index(yl));
                let r = (bx - b.values[yl]).abs() / g.dist(xp, yp).powf(beta);
                m = m.max(r);
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

/// Pointwise Lipschitz seminorm `sup_{x != y} |b(x)-b(y)| / d(x,y)^beta`.
///
/// Exhaustive over all lattice pairs when that fits the pair budget;
/// otherwise sups over a seeded point subsample that always contains the
/// group identity. The flag reports which happened.
pub fn lipschitz_seminorm(
    b: &GridFunction,
    beta: f64,
    seed: u64,
) -> Result<(f64, bool)> {
    check_beta(beta)?;
    let spec = &b.spec;
    let n = spec.len();
    if n < 2 {
        return Err(Error::config("pair sup needs at least two points".to_string()));
    }
    let exhaustive = n * n <= MAX_EXHAUSTIVE_PAIRS;
    let points: Vec<usize> = if exhaustive {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a1a_5eed);
        let mut chosen = rand::seq::index::sample(&mut rng, n, PAIR_SUBSAMPLE.min(n)).into_vec();
        let origin = spec.linear([0, 0, 0]);
        if !chosen.contains(&origin) {
            chosen.push(origin);
        }
        chosen.sort_unstable();
        chosen
    };
    Ok((pair_sup(spec, b, beta, &points), exhaustive))
}

/// Ball-oscillation seminorm
/// `sup_B |B|^{-beta/Q} ((1/|B|) integral_B |b - b_B|^p)^{1/p}`,
/// with the max oscillation in place of the integral at `p = infinity`.
pub fn lip_beta_p(b: &GridFunction, beta: f64, p: f64, ctx: &EvalContext) -> Result<f64> {
    Ok(lip_beta_p_floor(b, beta, p, ctx, 0.0)?.0)
}

/// Same functional with the sup restricted to family radii at or above
/// `floor`. Frozen suite constants use this: balls only a few cells wide
/// carry a discrete measure that moves with the spacing, so their values
/// never stabilize under refinement.
pub fn lip_beta_p_floor(
    b: &GridFunction,
    beta: f64,
    p: f64,
    ctx: &EvalContext,
    floor: f64,
) -> Result<(f64, BallWitness)> {
    check_beta(beta)?;
    check_p(p)?;
    let spec = &ctx.spec;
    if !b.spec.same_grid(spec) {
        return Err(Error::data("input grid does not match the context lattice".to_string()));
    }
    let q = spec.group.homogeneous_dim() as f64;
    let radii = ctx.family.radii();
    let mut best: Option<BallWitness> = None;
    for (st, &r) in ctx.stencils.iter().zip(&radii) {
        if r < floor {
            continue;
        }
        let w = st.discrete_measure().powf(-beta / q);
        let count = st.count() as f64;
        let sup = ctx
            .core
            .indices()
            .par_iter()
            .map(|&z| {
                let tr = Translator::new(spec, z);
                let mut mean = Sum::new();
                for o in &st.offsets {
                    mean.add(b.values[tr.linear(*o)]);
                }
                let avg = mean.value() / count;
                let v = if p.is_infinite() {
                    let mut m = 0.0f64;
                    for o in &st.offsets {
                        m = m.max((b.values[tr.linear(*o)] - avg).abs());
                    }
                    w * m
                } else {
                    let mut acc = Sum::new();
                    for o in &st.offsets {
                        acc.add((b.values[tr.linear(*o)] - avg).abs().powf(p));
                    }
                    w * (acc.value() / count).powf(1.0 / p)
                };
                (v, z)
            })
            .reduce(
                || (f64::NEG_INFINITY, [0i64; 3]),
                |a, b| match a.0.partial_cmp(&b.0) {
                    Some(std::cmp::Ordering::Greater) => a,
                    Some(std::cmp::Ordering::Less) => b,
                    _ => {
                        if spec.linear(a.1) <= spec.linear(b.1) {
                            a
                        } else {
                            b
                        }
                    }
                },
            );
        if best.as_ref().is_none_or(|w| sup.0 > w.value) {
            best = Some(BallWitness { center: sup.1, radius: r, value: sup.0 });
        }
    }
    let w = best
        .ok_or_else(|| Error::config("no family radius clears the frozen floor".to_string()))?;
    Ok((w.value, w))
}

/// An exponent configuration for one mapping-property suite, tied to the
/// group through its homogeneous dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentTuple {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl ExponentTuple {
    /// Strong-type pair: `1/q = 1/p - beta/Q`, valid for `1 < p < Q/beta`.
    pub fn lebesgue(group: Group, beta: f64, p: f64) -> Result<ExponentTuple> {
        check_beta(beta)?;
        let qdim = group.homogeneous_dim() as f64;
        if !(p > 1.0 && p < qdim / beta) {
            return Err(Error::config(format!(
                "need 1 < p < Q/beta = {} on {}, got p={p}",
                qdim / beta,
                group.name()
            )));
        }
        let q = 1.0 / (1.0 / p - beta / qdim);
        Ok(ExponentTuple {
            beta,
            p,
            q,
            lambda: 0.0,
            mu: 0.0,
        })
    }

    /// Morrey pair with the same target parameter:
    /// `1/q = 1/p - beta/(Q - lambda)`, valid for `0 < lambda < Q - beta p`.
    pub fn spanne(group: Group, beta: f64, p: f64, lambda: f64) -> Result<ExponentTuple> {
        check_beta(beta)?;
        let qdim = group.homogeneous_dim() as f64;
        if !(p > 1.0 && lambda > 0.0 && lambda < qdim - beta * p) {
            return Err(Error::config(format!(
                "need p > 1 and 0 < lambda < Q - beta p = {} on {}, got p={p} lambda={lambda}",
                qdim - beta * p,
                group.name()
            )));
        }
        let q = 1.0 / (1.0 / p - beta / (qdim - lambda));
        Ok(ExponentTuple {
            beta,
            p,
            q,
            lambda,
            mu: lambda,
        })
    }

    /// Morrey pair with rescaled target parameter `mu = lambda q / p` and the
    /// Lebesgue exponent relation.
    pub fn adams(group: Group, beta: f64, p: f64, lambda: f64) -> Result<ExponentTuple> {
        check_beta(beta)?;
        let qdim = group.homogeneous_dim() as f64;
        if !(p > 1.0 && lambda > 0.0 && lambda < qdim - beta * p) {
            return Err(Error::config(format!(
                "need p > 1 and 0 < lambda < Q - beta p = {} on {}, got p={p} lambda={lambda}",
                qdim - beta * p,
                group.name()
            )));
        }
        let q = 1.0 / (1.0 / p - beta / qdim);
        Ok(ExponentTuple {
            beta,
            p,
            q,
            lambda,
            mu: lambda * q / p,
        })
    }
}
