//! Maximal operators over gauge-ball families: Hardy-Littlewood, fractional,
//! maximal commutator, nonlinear commutator, and the ball-local operator.
//!
//! Every sup is a maximum over the finite admissible family: the configured
//! dyadic radii, with centers ranging over the evaluation core. `Centered`
//! mode takes balls centered at the evaluation point; `Containing` mode
//! additionally scans every family ball that contains the point. The oracle
//! path recomputes the same maxima from scratch, deriving ball membership by
//! distance evaluation per point, with no stencils and no reuse of sums.

use crate::accum::Sum;
use crate::error::{Error, Result};
use crate::group::Group;
use crate::lattice::{
    build_stencil, build_stencils, BallStencil, CoreRegion, GridFunction, Index, LatticeSpec,
    RadiusFamily, MAX_ORACLE_POINTS,
};
use rayon::prelude::*;
use std::collections::HashSet;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CenterMode {
    Centered,
    Containing,
}

impl CenterMode {
    pub fn parse(s: &str) -> Result<CenterMode> {
        match s {
            "centered" => Ok(CenterMode::Centered),
            "containing" => Ok(CenterMode::Containing),
            other => Err(Error::config(format!(
                "unknown center mode {other:?} (expected centered or containing)"
            ))),
        }
    }
}

/// Stencils and evaluation core for one lattice and radius family.
pub struct EvalContext {
    pub spec: LatticeSpec,
    pub family: RadiusFamily,
    pub stencils: Vec<BallStencil>,
    pub core: CoreRegion,
}

impl EvalContext {
    pub fn new(spec: LatticeSpec, family: RadiusFamily) -> Result<EvalContext> {
        let stencils = build_stencils(&spec, &family)?;
        let core = CoreRegion::compute(&spec, &stencils)?;
        Ok(EvalContext {
            spec,
            family,
            stencils,
            core,
        })
    }
}

/// Operator output restricted to the evaluation core.
#[derive(Clone, Debug)]
pub struct CoreField {
    pub spec: LatticeSpec,
    pub indices: Vec<Index>,
    pub values: Vec<f64>,
}

impl CoreField {
    /// Embed into a full grid, zero off the core.
    pub fn to_grid(&self) -> GridFunction {
        let mut values = vec![0.0; self.spec.len()];
        for (idx, v) in self.indices.iter().zip(&self.values) {
            values[self.spec.linear(*idx)] = *v;
        }
        GridFunction {
            spec: self.spec,
            values,
        }
    }

    pub fn max_abs_diff(&self, other: &CoreField) -> f64 {
        assert_eq!(self.indices.len(), other.indices.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Values of the local maximal operator on the points of its base ball that
/// some admissible sub-ball covers.
#[derive(Clone, Debug)]
pub struct BallField {
    pub spec: LatticeSpec,
    pub center: Index,
    pub radius: f64,
    /// `(linear index, value)` pairs in increasing linear order.
    pub entries: Vec<(usize, f64)>,
    /// Points of the base ball no admissible sub-ball covers.
    pub uncovered: usize,
}

impl BallField {
    pub fn to_grid(&self) -> GridFunction {
        let mut values = vec![0.0; self.spec.len()];
        for &(lin, v) in &self.entries {
            values[lin] = v;
        }
        GridFunction {
            spec: self.spec,
            values,
        }
    }
}

/// One shared expression for `|B|^{alpha/Q-1} integral_B ...` so that equal
/// sums give bitwise equal ball values across operators and modes.
#[inline]
fn ball_value(sum: f64, count: usize, cell: f64, alpha: f64, q: u32) -> f64 {
    if alpha == 0.0 {
        sum / count as f64
    } else {
        (count as f64 * cell).powf(alpha / q as f64 - 1.0) * cell * sum
    }
}

fn check_alpha(alpha: f64, group: Group) -> Result<()> {
    let q = group.homogeneous_dim() as f64;
    if !(alpha.is_finite() && (0.0..q).contains(&alpha)) {
        return Err(Error::config(format!(
            "fractional order alpha={alpha} must lie in [0, Q) with Q={q}"
        )));
    }
    Ok(())
}

fn check_same_grid(a: &LatticeSpec, b: &LatticeSpec) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::data(
            "input grids live on different lattices".to_string(),
        ));
    }
    Ok(())
}

/// Per-center translation helper: linear index of `center * offset`.
#[derive(Clone, Copy)]
pub(crate) struct Translator {
    base: i64,
    ci: i64,
    cj: i64,
    stride: [i64; 3],
    shear: bool,
}

impl Translator {
    pub(crate) fn new(spec: &LatticeSpec, center: Index) -> Translator {
        let dim = spec.dim();
        let mut stride = [0i64; 3];
        let mut s = 1i64;
        for a in (0..dim).rev() {
            stride[a] = s;
            s *= spec.axis_points(a) as i64;
        }
        Translator {
            base: spec.linear(center) as i64,
            ci: center[0],
            cj: center[1],
            stride,
            shear: spec.group == Group::Heisenberg1,
        }
    }

    #[inline]
    pub(crate) fn linear(&self, o: Index) -> usize {
        let mut lin = self.base + o[0] * self.stride[0] + o[1] * self.stride[1] + o[2] * self.stride[2];
        if self.shear {
            lin += (self.ci * o[1] - self.cj * o[0]) * self.stride[2];
        }
        lin as usize
    }
}

/// Contiguous runs of a stencil along the last axis, for the separable
/// Euclidean sweep that reuses per-row prefix sums.
struct StencilRows {
    rows: Vec<([i64; 2], i64, i64)>,
}

fn stencil_rows(spec: &LatticeSpec, st: &BallStencil) -> StencilRows {
    let last = spec.dim() - 1;
    let mut rows: Vec<([i64; 2], i64, i64)> = Vec::new();
    for o in &st.offsets {
        let mut lead = [0i64; 2];
        lead[..last].copy_from_slice(&o[..last]);
        match rows.last_mut() {
            Some((l, _, hi)) if *l == lead => {
                debug_assert_eq!(*hi + 1, o[last]);
                *hi = o[last];
            }
            _ => rows.push((lead, o[last], o[last])),
        }
    }
    StencilRows { rows }
}

/// Prefix sums of `|f|` along the last axis, one row per leading index tuple.
struct AbsPrefix {
    row_len: usize,
    data: Vec<f64>,
}

fn abs_prefix(f: &GridFunction) -> AbsPrefix {
    let spec = &f.spec;
    let last = spec.dim() - 1;
    let n = spec.axis_points(last);
    let n_rows = spec.len() / n;
    let mut data = vec![0.0f64; n_rows * (n + 1)];
    for row in 0..n_rows {
        let base = row * n;
        let out = row * (n + 1);
        let mut acc = 0.0;
        for k in 0..n {
            acc += f.values[base + k].abs();
            data[out + k + 1] = acc;
        }
    }
    AbsPrefix {
        row_len: n + 1,
        data,
    }
}

impl AbsPrefix {
    /// Sum of `|f|` over one stencil row translated to `center`.
    #[inline]
    fn row_sum(&self, spec: &LatticeSpec, center: Index, lead: [i64; 2], lo: i64, hi: i64) -> f64 {
        let last = spec.dim() - 1;
        let mut row = 0usize;
        for a in 0..last {
            row = row * spec.axis_points(a) + (center[a] + lead[a] + spec.half_count(a)) as usize;
        }
        let col = center[last] + spec.half_count(last);
        let base = row * self.row_len;
        let lo = (col + lo) as usize;
        let hi = (col + hi + 1) as usize;
        self.data[base + hi] - self.data[base + lo]
    }
}

/// Averages `|B(z,r)|^{alpha/Q-1} integral_B |f|` for every core center `z`,
/// one dense slab per radius, shared by the containing-mode passes.
fn ball_averages(f: &GridFunction, ctx: &EvalContext, st: &BallStencil, alpha: f64) -> Vec<f64> {
    let spec = &ctx.spec;
    let q = spec.group.homogeneous_dim();
    let cell = spec.cell_measure();
    let mut slab = vec![f64::NEG_INFINITY; spec.len()];
    let averages: Vec<(usize, f64)> = ctx
        .core
        .indices()
        .par_iter()
        .map(|&z| {
            let tr = Translator::new(spec, z);
            let mut acc = Sum::new();
            for o in &st.offsets {
                acc.add(f.values[tr.linear(*o)].abs());
            }
            (spec.linear(z), ball_value(acc.value(), st.count(), cell, alpha, q))
        })
        .collect();
    for (lin, v) in averages {
        slab[lin] = v;
    }
    slab
}

/// Fractional maximal operator `sup_B |B|^{alpha/Q-1} integral_B |f|`;
/// `alpha = 0` is the Hardy-Littlewood operator.
pub fn fractional_maximal(
    f: &GridFunction,
    alpha: f64,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    check_same_grid(&f.spec, &ctx.spec)?;
    check_alpha(alpha, ctx.spec.group)?;
    let spec = &ctx.spec;
    let q = spec.group.homogeneous_dim();
    let cell = spec.cell_measure();
    let values = match mode {
        CenterMode::Centered => {
            if spec.group == Group::Heisenberg1 {
                ctx.core
                    .indices()
                    .par_iter()
                    .map(|&x| {
                        let tr = Translator::new(spec, x);
                        let mut best = f64::NEG_INFINITY;
                        for st in &ctx.stencils {
                            let mut acc = Sum::new();
                            for o in &st.offsets {
                                acc.add(f.values[tr.linear(*o)].abs());
                            }
                            best = best.max(ball_value(acc.value(), st.count(), cell, alpha, q));
                        }
                        best
                    })
                    .collect()
            } else {
                let prefix = abs_prefix(f);
                let rows: Vec<StencilRows> =
                    ctx.stencils.iter().map(|st| stencil_rows(spec, st)).collect();
                ctx.core
                    .indices()
                    .par_iter()
                    .map(|&x| {
                        let mut best = f64::NEG_INFINITY;
                        for (st, sr) in ctx.stencils.iter().zip(&rows) {
                            let mut acc = Sum::new();
                            for &(lead, lo, hi) in &sr.rows {
                                acc.add(prefix.row_sum(spec, x, lead, lo, hi));
                            }
                            best = best.max(ball_value(acc.value(), st.count(), cell, alpha, q));
                        }
                        best
                    })
                    .collect()
            }
        }
        CenterMode::Containing => {
            // Seeding with the centered field keeps domination over centered
            // mode exact even where the centered sweep sums in another order.
            let mut values = fractional_maximal(f, alpha, ctx, CenterMode::Centered)?.values;
            for st in &ctx.stencils {
                let slab = ball_averages(f, ctx, st, alpha);
                values = ctx
                    .core
                    .indices()
                    .par_iter()
                    .zip(values.par_iter())
                    .map(|(&x, &cur)| {
                        let tr = Translator::new(spec, x);
                        let mut best = cur;
                        for o in &st.offsets {
                            best = best.max(slab[tr.linear(*o)]);
                        }
                        best
                    })
                    .collect();
            }
            values
        }
    };
    Ok(CoreField {
        spec: *spec,
        indices: ctx.core.indices().to_vec(),
        values,
    })
}

pub fn maximal(f: &GridFunction, ctx: &EvalContext, mode: CenterMode) -> Result<CoreField> {
    fractional_maximal(f, 0.0, ctx, mode)
}

/// Maximal commutator `sup_B |B|^{-1} integral_B |b(x)-b(y)| |f(y)| dy`.
pub fn commutator_maximal(
    f: &GridFunction,
    b: &GridFunction,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    check_same_grid(&f.spec, &ctx.spec)?;
    check_same_grid(&b.spec, &ctx.spec)?;
    let spec = &ctx.spec;
    let values: Vec<f64> = ctx
        .core
        .indices()
        .par_iter()
        .map(|&x| {
            let bx = b.values[spec.linear(x)];
            let tr = Translator::new(spec, x);
            let mut best = f64::NEG_INFINITY;
            match mode {
                CenterMode::Centered => {
                    for st in &ctx.stencils {
                        let mut acc = Sum::new();
                        for o in &st.offsets {
                            let y = tr.linear(*o);
                            acc.add((bx - b.values[y]).abs() * f.values[y].abs());
                        }
                        best = best.max(acc.value() / st.count() as f64);
                    }
                }
                CenterMode::Containing => {
                    for st in &ctx.stencils {
                        for zo in &st.offsets {
                            let z = spec.translate(x, *zo);
                            if !ctx.core.contains(z) {
                                continue;
                            }
                            let trz = Translator::new(spec, z);
                            let mut acc = Sum::new();
                            for o in &st.offsets {
                                let y = trz.linear(*o);
                                acc.add((bx - b.values[y]).abs() * f.values[y].abs());
                            }
                            best = best.max(acc.value() / st.count() as f64);
                        }
                    }
                }
            }
            best
        })
        .collect();
    Ok(CoreField {
        spec: *spec,
        indices: ctx.core.indices().to_vec(),
        values,
    })
}

/// Nonlinear commutator `[b, M] f = b * M f - M(b f)`.
pub fn nonlinear_commutator(
    f: &GridFunction,
    b: &GridFunction,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    check_same_grid(&f.spec, &ctx.spec)?;
    check_same_grid(&b.spec, &ctx.spec)?;
    let bf = b.zip(f, |x, y| x * y)?;
    let mf = maximal(f, ctx, mode)?;
    let mbf = maximal(&bf, ctx, mode)?;
    let spec = &ctx.spec;
    let values = mf
        .indices
        .iter()
        .zip(mf.values.iter().zip(&mbf.values))
        .map(|(idx, (m, mb))| b.values[spec.linear(*idx)] * m - mb)
        .collect();
    Ok(CoreField {
        spec: *spec,
        indices: mf.indices,
        values,
    })
}

/// Local maximal operator on a base ball: at each point of `B(center, radius)`
/// the sup of `|B'|^{-1} integral_{B'} |b|` over family balls `B'` that
/// contain the point, lie inside the base ball, and have their center in the
/// evaluation core.
pub fn local_maximal(
    b: &GridFunction,
    center: Index,
    radius: f64,
    ctx: &EvalContext,
) -> Result<BallField> {
    let slabs = subball_averages(b, ctx)?;
    local_maximal_with(center, radius, ctx, &slabs)
}

/// Averages of `|b|` over every family ball at every core center, one slab
/// per stencil, indexed by linear position. Off-core entries stay at
/// negative infinity. Computed once and shared across base balls.
pub(crate) fn subball_averages(b: &GridFunction, ctx: &EvalContext) -> Result<Vec<Vec<f64>>> {
    check_same_grid(&b.spec, &ctx.spec)?;
    Ok(ctx.stencils.iter().map(|st| ball_averages(b, ctx, st, 0.0)).collect())
}

pub(crate) fn local_maximal_with(
    center: Index,
    radius: f64,
    ctx: &EvalContext,
    slabs: &[Vec<f64>],
) -> Result<BallField> {
    let spec = &ctx.spec;
    if !spec.contains(center) {
        return Err(Error::config(format!("base ball center {center:?} is outside the lattice")));
    }
    let base = build_stencil(spec, radius)?;
    let mut base_points: Vec<usize> = Vec::with_capacity(base.count());
    for o in &base.offsets {
        let t = spec.translate(center, *o);
        if !spec.contains(t) {
            return Err(Error::config(format!(
                "base ball at {center:?} radius {radius} leaves the lattice"
            )));
        }
        base_points.push(spec.linear(t));
    }
    let mut base_mask = vec![false; spec.len()];
    for &p in &base_points {
        base_mask[p] = true;
    }
    let smallest = ctx
        .stencils
        .iter()
        .map(|st| st.count())
        .min()
        .ok_or_else(|| Error::config("no stencils supplied".to_string()))?;
    if base.count() < smallest {
        return Err(Error::config(format!(
            "base ball holds {} points, smaller than the smallest stencil ({smallest})",
            base.count()
        )));
    }
    let zpt = spec.point(center);
    let mut best: Vec<f64> = vec![f64::NEG_INFINITY; spec.len()];
    for (si, st) in ctx.stencils.iter().enumerate() {
        if st.count() > base.count() {
            continue;
        }
        for &wlin in &base_points {
            let w = spec.index(wlin);
            if !ctx.core.contains(w) {
                continue;
            }
            let tr = Translator::new(spec, w);
            // Containment: same center is monotone in the radius; otherwise
            // the triangle inequality settles everything except a thin band
            // near the boundary (the gauge is a true metric on each group,
            // and the safety factor absorbs float rounding). Only the band
            // falls through to the point scan.
            let d = spec.group.dist(zpt, spec.point(w));
            let inside = if (d == 0.0 && st.radius <= radius)
                || d + st.radius <= radius * (1.0 - 1e-9)
            {
                true
            } else {
                st.scan_order
                    .iter()
                    .all(|&k| base_mask[tr.linear(st.offsets[k as usize])])
            };
            if !inside {
                continue;
            }
            let avg = slabs[si][wlin];
            for o in &st.offsets {
                let y = tr.linear(*o);
                if avg > best[y] {
                    best[y] = avg;
                }
            }
        }
    }
    let mut entries = Vec::new();
    let mut uncovered = 0usize;
    let mut sorted = base_points.clone();
    sorted.sort_unstable();
    for lin in sorted {
        if best[lin] == f64::NEG_INFINITY {
            uncovered += 1;
        } else {
            entries.push((lin, best[lin]));
        }
    }
    Ok(BallField {
        spec: *spec,
        center,
        radius,
        entries,
        uncovered,
    })
}

// ===== ORACLE PATH =====
//
// Everything below recomputes the operators naively: ball membership by
// distance evaluation against every lattice point, fresh sums per ball,
// no stencils. Refuses lattices above `MAX_ORACLE_POINTS`.

fn oracle_guard(spec: &LatticeSpec) -> Result<()> {
    if spec.len() > MAX_ORACLE_POINTS {
        return Err(Error::config(format!(
            "oracle refuses {} points (limit {MAX_ORACLE_POINTS})",
            spec.len()
        )));
    }
    Ok(())
}

/// Sum of `weigh(y)` over the distance ball `B(z, r)`, together with the
/// ball's cell count.
fn oracle_ball_sum(
    spec: &LatticeSpec,
    z: Index,
    r: f64,
    weigh: &impl Fn(usize) -> f64,
) -> (usize, f64) {
    let g = spec.group;
    let zp = spec.point(z);
    let mut count = 0usize;
    let mut acc = Sum::new();
    for lin in 0..spec.len() {
        if g.dist(zp, spec.point(spec.index(lin))) < r {
            count += 1;
            acc.add(weigh(lin));
        }
    }
    (count, acc.value())
}

fn oracle_centers(spec: &LatticeSpec, core: &CoreRegion, x: Index, r: f64) -> Vec<Index> {
    let g = spec.group;
    let xp = spec.point(x);
    core.indices()
        .iter()
        .copied()
        .filter(|z| g.dist(spec.point(*z), xp) < r)
        .collect()
}

pub fn oracle_fractional_maximal(
    f: &GridFunction,
    alpha: f64,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    check_same_grid(&f.spec, &ctx.spec)?;
    check_alpha(alpha, ctx.spec.group)?;
    oracle_guard(&ctx.spec)?;
    let spec = &ctx.spec;
    let q = spec.group.homogeneous_dim();
    let cell = spec.cell_measure();
    let radii = ctx.family.radii();
    let weigh = |lin: usize| f.values[lin].abs();
    let values: Vec<f64> = ctx
        .core
        .indices()
        .par_iter()
        .map(|&x| {
            let mut best = f64::NEG_INFINITY;
            for &r in &radii {
                let centers = match mode {
                    CenterMode::Centered => vec![x],
                    CenterMode::Containing => oracle_centers(spec, &ctx.core, x, r),
                };
                for z in centers {
                    let (count, sum) = oracle_ball_sum(spec, z, r, &weigh);
                    if count > 0 {
                        best = best.max(ball_value(sum, count, cell, alpha, q));
                    }
                }
            }
            best
        })
        .collect();
    Ok(CoreField {
        spec: *spec,
        indices: ctx.core.indices().to_vec(),
        values,
    })
}

pub fn oracle_maximal(f: &GridFunction, ctx: &EvalContext, mode: CenterMode) -> Result<CoreField> {
    oracle_fractional_maximal(f, 0.0, ctx, mode)
}

pub fn oracle_commutator_maximal(
    f: &GridFunction,
    b: &GridFunction,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    check_same_grid(&f.spec, &ctx.spec)?;
    check_same_grid(&b.spec, &ctx.spec)?;
    oracle_guard(&ctx.spec)?;
    let spec = &ctx.spec;
    let radii = ctx.family.radii();
    let values: Vec<f64> = ctx
        .core
        .indices()
        .par_iter()
        .map(|&x| {
            let bx = b.values[spec.linear(x)];
            let weigh = |lin: usize| (bx - b.values[lin]).abs() * f.values[lin].abs();
            let mut best = f64::NEG_INFINITY;
            for &r in &radii {
                let centers = match mode {
                    CenterMode::Centered => vec![x],
                    CenterMode::Containing => oracle_centers(spec, &ctx.core, x, r),
                };
                for z in centers {
                    let (count, sum) = oracle_ball_sum(spec, z, r, &weigh);
                    if count > 0 {
                        best = best.max(sum / count as f64);
                    }
                }
            }
            best
        })
        .collect();
    Ok(CoreField {
        spec: *spec,
        indices: ctx.core.indices().to_vec(),
        values,
    })
}

pub fn oracle_nonlinear_commutator(
    f: &GridFunction,
    b: &GridFunction,
    ctx: &EvalContext,
    mode: CenterMode,
) -> Result<CoreField> {
    let bf = b.zip(f, |x, y| x * y)?;
    let mf = oracle_maximal(f, ctx, mode)?;
    let mbf = oracle_maximal(&bf, ctx, mode)?;
    let spec = &ctx.spec;
    let values = mf
        .indices
        .iter()
        .zip(mf.values.iter().zip(&mbf.values))
        .map(|(idx, (m, mb))| b.values[spec.linear(*idx)] * m - mb)
        .collect();
    Ok(CoreField {
        spec: *spec,
        indices: mf.indices,
        values,
    })
}

pub fn oracle_local_maximal(
    b: &GridFunction,
    center: Index,
    radius: f64,
    ctx: &EvalContext,
) -> Result<BallField> {
    check_same_grid(&b.spec, &ctx.spec)?;
    oracle_guard(&ctx.spec)?;
    let spec = &ctx.spec;
    let g = spec.group;
    let cp = spec.point(center);
    let base_points: Vec<usize> = (0..spec.len())
        .filter(|&lin| g.dist(cp, spec.point(spec.index(lin))) < radius)
        .collect();
    let base_set: HashSet<usize> = base_points.iter().copied().collect();
    let radii = ctx.family.radii();
    let mut best: Vec<f64> = vec![f64::NEG_INFINITY; spec.len()];
    for &r in &radii {
        for &zlin in &base_points {
            let z = spec.index(zlin);
            if !ctx.core.contains(z) {
                continue;
            }
            let zp = spec.point(z);
            let members: Vec<usize> = (0..spec.len())
                .filter(|&lin| g.dist(zp, spec.point(spec.index(lin))) < r)
                .collect();
            if members.is_empty() || !members.iter().all(|m| base_set.contains(m)) {
                continue;
            }
            let mut acc = Sum::new();
            for &y in &members {
                acc.add(b.values[y].abs());
            }
            let avg = acc.value() / members.len() as f64;
            for &y in &members {
                best[y] = best[y].max(avg);
            }
        }
    }
    let mut entries = Vec::new();
    let mut uncovered = 0usize;
    for &lin in &base_points {
        if best[lin] == f64::NEG_INFINITY {
            uncovered += 1;
        } else {
            entries.push((lin, best[lin]));
        }
    }
    entries.sort_by_key(|e| e.0);
    Ok(BallField {
        spec: *spec,
        center,
        radius,
        entries,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ORIGIN;

    fn ctx_r1(h: f64, extent: f64, margin: f64, fam: RadiusFamily) -> EvalContext {
        let spec = LatticeSpec::new(Group::Euclidean1, h, &[extent], margin).unwrap();
        EvalContext::new(spec, fam).unwrap()
    }

    #[test]
    fn delta_bump_average_at_the_origin() {
        let ctx = ctx_r1(0.5, 2.0, 1.0, RadiusFamily::new(1.0, 0).unwrap());
        let f = GridFunction::sample(ctx.spec, |p| if p[0] == 0.0 { 1.0 } else { 0.0 }).unwrap();
        let m = maximal(&f, &ctx, CenterMode::Centered).unwrap();
        let at0 = m.values[m.indices.iter().position(|i| *i == [0, 0, 0]).unwrap()];
        assert!((at0 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn commutator_with_root_gauge_symbol_matches_hand_value() {
        let ctx = ctx_r1(0.5, 2.0, 1.0, RadiusFamily::new(1.0, 0).unwrap());
        let b = GridFunction::sample(ctx.spec, |p| p[0].abs().sqrt()).unwrap();
        let f = GridFunction::constant(ctx.spec, 1.0).unwrap();
        let mb = commutator_maximal(&f, &b, &ctx, CenterMode::Centered).unwrap();
        let at0 = mb.values[mb.indices.iter().position(|i| *i == [0, 0, 0]).unwrap()];
        let expect = (0.5f64.sqrt() + 0.0 + 0.5f64.sqrt()) / 3.0;
        assert!((at0 - expect).abs() < 1e-15, "got {at0}, want {expect}");
    }

    #[test]
    fn alpha_zero_reduces_to_the_plain_operator_bitwise() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.25], 0.5).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(0.5, 0).unwrap()).unwrap();
        let g = spec.group;
        let f = GridFunction::sample(spec, |p| (1.0 + g.gauge(p)).recip()).unwrap();
        for mode in [CenterMode::Centered, CenterMode::Containing] {
            let m = maximal(&f, &ctx, mode).unwrap();
            let ma = fractional_maximal(&f, 0.0, &ctx, mode).unwrap();
            assert_eq!(m.values, ma.values);
        }
    }

    #[test]
    fn fractional_maximal_of_ball_indicator_peaks_at_ball_measure_power() {
        let ctx = ctx_r1(0.25, 2.0, 1.0, RadiusFamily::new(0.5, 1).unwrap());
        let g = ctx.spec.group;
        let chi = GridFunction::sample(ctx.spec, |p| if g.gauge(p) < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let alpha = 0.5;
        let ma = fractional_maximal(&chi, alpha, &ctx, CenterMode::Centered).unwrap();
        let at0 = ma.values[ma.indices.iter().position(|i| *i == [0, 0, 0]).unwrap()];
        let m1 = build_stencil(&ctx.spec, 1.0).unwrap().discrete_measure();
        assert!((at0 - m1.powf(alpha)).abs() < 1e-14);
    }

    #[test]
    fn containing_dominates_centered_pointwise() {
        let spec = LatticeSpec::new(Group::Euclidean2, 0.25, &[2.0], 1.0).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(0.5, 1).unwrap()).unwrap();
        let g = spec.group;
        let f = GridFunction::sample(spec, |p| (3.0 * p[0]).sin().abs() + 0.1 * g.gauge(p)).unwrap();
        let c = maximal(&f, &ctx, CenterMode::Centered).unwrap();
        let n = maximal(&f, &ctx, CenterMode::Containing).unwrap();
        for (a, b) in c.values.iter().zip(&n.values) {
            assert!(b >= a);
        }
    }

    #[test]
    fn constant_symbol_kills_both_commutators() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.25], 0.5).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(0.5, 0).unwrap()).unwrap();
        let g = spec.group;
        let f = GridFunction::sample(spec, |p| (g.gauge(p) * 2.0).cos().abs()).unwrap();
        let b = GridFunction::constant(spec, 3.0).unwrap();
        let mb = commutator_maximal(&f, &b, &ctx, CenterMode::Centered).unwrap();
        assert!(mb.values.iter().all(|&v| v == 0.0));
        let nl = nonlinear_commutator(&f, &b, &ctx, CenterMode::Centered).unwrap();
        assert!(nl.values.iter().all(|&v| v.abs() <= 1e-13));
    }

    #[test]
    fn local_maximal_of_a_constant_is_that_constant() {
        let ctx = ctx_r1(0.25, 2.0, 1.0, RadiusFamily::new(0.5, 1).unwrap());
        let b = GridFunction::constant(ctx.spec, -3.0).unwrap();
        let lm = local_maximal(&b, [0, 0, 0], 1.0, &ctx).unwrap();
        assert!(!lm.entries.is_empty());
        for &(_, v) in &lm.entries {
            assert_eq!(v, 3.0);
        }
    }

    #[test]
    fn local_maximal_never_exceeds_the_global_operator() {
        let spec = LatticeSpec::new(Group::Euclidean2, 0.25, &[2.0], 1.0).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(0.5, 1).unwrap()).unwrap();
        let g = spec.group;
        let b = GridFunction::sample(spec, |p| g.gauge(p).powf(0.5) + (p[0] * 2.0).sin()).unwrap();
        let lm = local_maximal(&b, [1, -1, 0], 1.0, &ctx).unwrap();
        let m = maximal(&b, &ctx, CenterMode::Containing).unwrap();
        let grid_m = m.to_grid();
        for &(lin, v) in &lm.entries {
            let idx = spec.index(lin);
            if ctx.core.contains(idx) {
                assert!(
                    v <= grid_m.values[lin],
                    "local value {v} above global {} at {idx:?}",
                    grid_m.values[lin]
                );
            }
        }
    }

    #[test]
    fn base_ball_below_smallest_stencil_is_refused() {
        let ctx = ctx_r1(0.25, 2.0, 1.0, RadiusFamily::new(1.0, 0).unwrap());
        let b = GridFunction::constant(ctx.spec, 1.0).unwrap();
        assert!(matches!(
            local_maximal(&b, [0, 0, 0], 0.3, &ctx),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn oracle_refuses_large_lattices() {
        let spec = LatticeSpec::new(Group::Euclidean2, 0.0125, &[2.0], 1.0).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(1.0, 0).unwrap()).unwrap();
        let f = GridFunction::constant(spec, 1.0).unwrap();
        assert!(matches!(
            oracle_maximal(&f, &ctx, CenterMode::Centered),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fast_path_matches_oracle_on_a_small_heisenberg_lattice() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.125], 0.5).unwrap();
        let ctx = EvalContext::new(spec, RadiusFamily::new(0.5, 0).unwrap()).unwrap();
        let g = spec.group;
        let f = GridFunction::sample(spec, |p| (1.0 + 3.0 * g.gauge(p)).sin().abs()).unwrap();
        let b = GridFunction::sample(spec, |p| g.gauge(p).powf(0.6)).unwrap();
        for mode in [CenterMode::Centered, CenterMode::Containing] {
            let fast = fractional_maximal(&f, 0.5, &ctx, mode).unwrap();
            let slow = oracle_fractional_maximal(&f, 0.5, &ctx, mode).unwrap();
            assert!(fast.max_abs_diff(&slow) <= 1e-13);
            let fast = commutator_maximal(&f, &b, &ctx, mode).unwrap();
            let slow = oracle_commutator_maximal(&f, &b, &ctx, mode).unwrap();
            assert!(fast.max_abs_diff(&slow) <= 1e-13);
        }
        let fast = local_maximal(&b, [0, 0, 0], 0.5, &ctx).unwrap();
        let slow = oracle_local_maximal(&b, [0, 0, 0], 0.5, &ctx).unwrap();
        assert_eq!(fast.entries.len(), slow.entries.len());
        assert_eq!(fast.uncovered, slow.uncovered);
        for (a, b) in fast.entries.iter().zip(&slow.entries) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() <= 1e-13);
        }
    }

    #[test]
    fn euclidean_dilation_covariance_is_exact() {
        let cases: [(Group, Vec<f64>); 3] = [
            (Group::Euclidean1, vec![2.0]),
            (Group::Euclidean2, vec![2.0]),
            (Group::Heisenberg1, vec![1.0, 0.25]),
        ];
        for (group, extents) in cases {
            let spec = LatticeSpec::new(group, 0.25, &extents, 0.5).unwrap();
            let fam = RadiusFamily::new(0.5, 0).unwrap();
            let ctx = EvalContext::new(spec, fam).unwrap();
            let g = spec.group;
            let f = GridFunction::sample(spec, |p| (1.0 + g.gauge(p)).recip()).unwrap();
            let alpha = 0.5;
            let m = fractional_maximal(&f, alpha, &ctx, CenterMode::Centered).unwrap();

            let pulled = f.pullback_half_scale();
            let half_ctx = EvalContext::new(pulled.spec, RadiusFamily::new(0.25, 0).unwrap()).unwrap();
            let mh = fractional_maximal(&pulled, alpha, &half_ctx, CenterMode::Centered).unwrap();
            assert_eq!(m.indices, mh.indices, "{group}: index sets must match");
            let scale = 0.5f64.powf(alpha);
            for (a, b) in m.values.iter().zip(&mh.values) {
                assert!(
                    (b - scale * a).abs() <= 1e-12 * (1.0 + a.abs()),
                    "{group}: covariance violated: {b} vs {}",
                    scale * a
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_grids_and_bad_alpha() {
        let ctx = ctx_r1(0.5, 2.0, 1.0, RadiusFamily::new(1.0, 0).unwrap());
        let other = LatticeSpec::new(Group::Euclidean1, 0.25, &[2.0], 1.0).unwrap();
        let f = GridFunction::constant(other, 1.0).unwrap();
        assert!(matches!(
            maximal(&f, &ctx, CenterMode::Centered),
            Err(Error::Data(_))
        ));
        let f = GridFunction::constant(ctx.spec, 1.0).unwrap();
        assert!(matches!(
            fractional_maximal(&f, 1.5, &ctx, CenterMode::Centered),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fractional_maximal(&f, -0.1, &ctx, CenterMode::Centered),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn origin_delta_sees_every_radius_in_the_family() {
        // With two radii the centered sup at distance h from the bump picks
        // the small ball; at distance 3h only the large ball sees the bump.
        let ctx = ctx_r1(0.25, 2.0, 1.0, RadiusFamily::new(0.5, 1).unwrap());
        let f = GridFunction::sample(ctx.spec, |p| if p[0] == 0.0 { 1.0 } else { 0.0 }).unwrap();
        let m = maximal(&f, &ctx, CenterMode::Centered).unwrap();
        let val = |i: i64| m.values[m.indices.iter().position(|x| *x == [i, 0, 0]).unwrap()];
        assert!((val(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(val(3), val(2));
        assert!((val(3) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(ORIGIN, [0.0; 3]);
    }
}
