//! Dilation-adapted lattices, sampled grid functions, and ball stencils.
//!
//! A lattice point carries one integer index per coordinate axis; the axis
//! of weight `w` steps by `h^w` (the Heisenberg center axis steps by
//! `h^2/2`, which makes left translation by a lattice point an exact map of
//! the lattice onto itself). Cell measure is the product of the axis steps.
//! Grid spacings should be dyadic (`2^-m` multiples) so translated points
//! reproduce group products bit for bit.

use crate::error::{Error, Result};
use crate::group::{fmt_float, Group, Point};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const MAX_POINTS: usize = 100_000_000;
pub const MAX_ORACLE_POINTS: usize = 10_000;

pub type Index = [i64; 3];

/// Geometry of a finite symmetric lattice: `2K_a + 1` points per axis, so
/// the identity is always a lattice point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSpec {
    pub group: Group,
    pub h: f64,
    half_counts: [i64; 3],
    spacings: [f64; 3],
    pub margin: f64,
}

impl LatticeSpec {
    /// `half_extents` holds one coordinate bound per stratum; axes of a
    /// stratum share its bound.
    pub fn new(group: Group, h: f64, half_extents: &[f64], margin: f64) -> Result<LatticeSpec> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("lattice spacing h={h} must be positive")));
        }
        if half_extents.len() != group.strata().len() {
            return Err(Error::config(format!(
                "expected {} half extents for {}, got {}",
                group.strata().len(),
                group.name(),
                half_extents.len()
            )));
        }
        if margin < 0.0 || !margin.is_finite() {
            return Err(Error::config(format!("margin {margin} must be nonnegative")));
        }
        let spacings = axis_spacings(group, h);
        let mut half_counts = [0i64; 3];
        let mut axis = 0;
        for (layer, &count) in group.strata().iter().enumerate() {
            let extent = half_extents[layer];
            if !(extent.is_finite() && extent > 0.0) {
                return Err(Error::config(format!("half extent {extent} must be positive")));
            }
            for _ in 0..count {
                half_counts[axis] = (extent / spacings[axis] + 1e-9).floor() as i64;
                axis += 1;
            }
        }
        let spec = LatticeSpec {
            group,
            h,
            half_counts,
            spacings,
            margin,
        };
        spec.check_size()?;
        Ok(spec)
    }

    pub fn from_counts(group: Group, h: f64, counts: &[usize], margin: f64) -> Result<LatticeSpec> {
        if counts.len() != group.dim() {
            return Err(Error::data(format!(
                "expected {} axis counts for {}, got {}",
                group.dim(),
                group.name(),
                counts.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::data(format!("lattice spacing h={h} must be positive")));
        }
        let mut half_counts = [0i64; 3];
        for (a, &n) in counts.iter().enumerate() {
            if n == 0 || n % 2 == 0 {
                return Err(Error::data(format!(
                    "axis point count {n} must be odd and positive"
                )));
            }
            half_counts[a] = ((n - 1) / 2) as i64;
        }
        let spec = LatticeSpec {
            group,
            h,
            half_counts,
            spacings: axis_spacings(group, h),
            margin,
        };
        spec.check_size()?;
        Ok(spec)
    }

    fn check_size(&self) -> Result<()> {
        let mut total = 1usize;
        for a in 0..self.dim() {
            let n = (2 * self.half_counts[a] + 1) as usize;
            total = total
                .checked_mul(n)
                .ok_or_else(|| Error::config("lattice point count overflows".to_string()))?;
        }
        if total > MAX_POINTS {
            return Err(Error::config(format!(
                "lattice would hold {total} points, above the {MAX_POINTS} limit"
            )));
        }
        Ok(())
    }

    pub fn with_margin(mut self, margin: f64) -> LatticeSpec {
        self.margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    pub fn half_count(&self, axis: usize) -> i64 {
        self.half_counts[axis]
    }

    pub fn axis_points(&self, axis: usize) -> usize {
        (2 * self.half_counts[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.axis_points(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lebesgue measure of one lattice cell.
    pub fn cell_measure(&self) -> f64 {
        self.spacings[..self.dim()].iter().product()
    }

    /// Coordinate bound along an axis.
    pub fn extent(&self, axis: usize) -> f64 {
        self.half_counts[axis] as f64 * self.spacings[axis]
    }

    pub fn contains(&self, idx: Index) -> bool {
        (0..self.dim()).all(|a| idx[a].abs() <= self.half_counts[a])
    }

    pub fn point(&self, idx: Index) -> Point {
        let mut p = [0.0f64; 3];
        for a in 0..self.dim() {
            p[a] = idx[a] as f64 * self.spacings[a];
        }
        p
    }

    /// Row-major linear position of an index.
    pub fn linear(&self, idx: Index) -> usize {
        debug_assert!(self.contains(idx));
        let mut lin = 0usize;
        for (a, &x) in idx.iter().enumerate().take(self.dim()) {
            lin = lin * self.axis_points(a) + (x + self.half_counts[a]) as usize;
        }
        lin
    }

    pub fn index(&self, mut lin: usize) -> Index {
        let mut idx = [0i64; 3];
        for a in (0..self.dim()).rev() {
            let n = self.axis_points(a);
            idx[a] = (lin % n) as i64 - self.half_counts[a];
            lin /= n;
        }
        idx
    }

    /// Index of the lattice point `point(center) * point(offset)`. Exact:
    /// the center axis shear `(x_c y_o - y_c x_o)/2` is an integer number
    /// of `h^2/2` steps.
    pub fn translate(&self, center: Index, offset: Index) -> Index {
        match self.group {
            Group::Euclidean1 | Group::Euclidean2 => [
                center[0] + offset[0],
                center[1] + offset[1],
                center[2] + offset[2],
            ],
            Group::Heisenberg1 => [
                center[0] + offset[0],
                center[1] + offset[1],
                center[2] + offset[2] + center[0] * offset[1] - center[1] * offset[0],
            ],
        }
    }

    /// Same grid geometry: group, spacing and point counts agree.
    pub fn same_grid(&self, other: &LatticeSpec) -> bool {
        self.group == other.group
            && self.h == other.h
            && self.half_counts == other.half_counts
    }

    /// The lattice with spacing halved and the same coordinate extents;
    /// point counts roughly double per layer-one axis and quadruple on the
    /// center axis.
    pub fn refined(&self) -> Result<LatticeSpec> {
        let mut extents = Vec::new();
        let mut axis = 0;
        for &count in self.group.strata() {
            extents.push(self.extent(axis));
            axis += count;
        }
        LatticeSpec::new(self.group, self.h / 2.0, &extents, self.margin)
    }

    /// The lattice for `f . dilate(2)`: spacing and extents halved. Shares
    /// index sets with `self`, so dilation acts as the identity on indices.
    pub fn half_scale(&self) -> LatticeSpec {
        LatticeSpec {
            group: self.group,
            h: self.h / 2.0,
            half_counts: self.half_counts,
            spacings: axis_spacings(self.group, self.h / 2.0),
            margin: self.margin / 2.0,
        }
    }
}

fn axis_spacings(group: Group, h: f64) -> [f64; 3] {
    match group {
        Group::Euclidean1 | Group::Euclidean2 => [h, h, h],
        Group::Heisenberg1 => [h, h, h * h / 2.0],
    }
}

/// A scalar function sampled on a lattice, stored row major.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub spec: LatticeSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(spec: LatticeSpec, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != spec.len() {
            return Err(Error::data(format!(
                "value count {} does not match lattice size {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at linear index {bad}"
            )));
        }
        Ok(GridFunction { spec, values })
    }

    pub fn sample(spec: LatticeSpec, f: impl Fn(Point) -> f64) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(spec.len());
        for lin in 0..spec.len() {
            values.push(f(spec.point(spec.index(lin))));
        }
        GridFunction::from_values(spec, values)
    }

    pub fn constant(spec: LatticeSpec, c: f64) -> Result<GridFunction> {
        GridFunction::from_values(spec, vec![c; spec.len()])
    }

    pub fn value_at(&self, idx: Index) -> f64 {
        self.values[self.spec.linear(idx)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::from_values(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if !self.spec.same_grid(&other.spec) {
            return Err(Error::data("grids live on different lattices".to_string()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::from_values(self.spec, values)
    }

    /// The same values reinterpreted on the half-scale lattice: exactly
    /// `f . dilate(2)` sampled there, since indices match.
    pub fn pullback_half_scale(&self) -> GridFunction {
        GridFunction {
            spec: self.spec.half_scale(),
            values: self.values.clone(),
        }
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let extents: Vec<String> = (0..self.spec.dim())
            .map(|a| self.spec.axis_points(a).to_string())
            .collect();
        writeln!(
            w,
            "group={} h={} extents={} layout=row-major",
            self.spec.group.name(),
            fmt_float(self.spec.h),
            extents.join(",")
        )?;
        for v in &self.values {
            writeln!(w, "{}", fmt_float(*v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<GridFunction> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("empty grid file".to_string()))??;
        let mut group = None;
        let mut h = None;
        let mut extents: Option<Vec<usize>> = None;
        let mut layout = None;
        for field in header.split_ascii_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::data(format!("grid header field {field:?} is not key=value")))?;
            match key {
                "group" => group = Some(Group::parse(value).map_err(|e| Error::data(e.to_string()))?),
                "h" => {
                    h = Some(value.parse::<f64>().map_err(|_| {
                        Error::data(format!("bad h value {value:?} in grid header"))
                    })?)
                }
                "extents" => {
                    let mut parsed = Vec::new();
                    for part in value.split(',') {
                        parsed.push(part.parse::<usize>().map_err(|_| {
                            Error::data(format!("bad extent {part:?} in grid header"))
                        })?);
                    }
                    extents = Some(parsed);
                }
                "layout" => layout = Some(value.to_string()),
                other => return Err(Error::data(format!("unknown grid header field {other:?}"))),
            }
        }
        let group = group.ok_or_else(|| Error::data("grid header missing group"))?;
        let h = h.ok_or_else(|| Error::data("grid header missing h"))?;
        let extents = extents.ok_or_else(|| Error::data("grid header missing extents"))?;
        match layout.as_deref() {
            Some("row-major") => {}
            other => {
                return Err(Error::data(format!(
                    "unsupported grid layout {other:?} (expected row-major)"
                )))
            }
        }
        let spec = LatticeSpec::from_counts(group, h, &extents, 0.0)?;
        let mut values = Vec::with_capacity(spec.len());
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(
                line.parse::<f64>()
                    .map_err(|_| Error::data(format!("bad grid value {line:?}")))?,
            );
        }
        GridFunction::from_values(spec, values)
    }
}

/// Offsets of the lattice points strictly inside the gauge ball of one
/// radius, in row-major index order.
#[derive(Clone, Debug)]
pub struct BallStencil {
    pub radius: f64,
    pub offsets: Vec<Index>,
    /// Largest absolute offset per axis.
    pub reach: [i64; 3],
    pub degenerate: bool,
    /// Offset positions sorted by gauge, farthest first. Containment scans
    /// walk this order so a failing ball is rejected near the start.
    pub(crate) scan_order: Vec<u32>,
    cell_measure: f64,
}

impl BallStencil {
    pub fn count(&self) -> usize {
        self.offsets.len()
    }

    /// Measure assigned to the discrete ball: cell count times cell measure.
    pub fn discrete_measure(&self) -> f64 {
        self.offsets.len() as f64 * self.cell_measure
    }
}

/// Enumerate the stencil for one radius. Errors if the ball does not fit on
/// the lattice even when centered at the identity.
pub fn build_stencil(spec: &LatticeSpec, radius: f64) -> Result<BallStencil> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::config(format!("ball radius {radius} must be positive")));
    }
    let group = spec.group;
    let bounds = group.unit_ball_bounds();
    let weights = group.weights();
    let dim = spec.dim();
    let mut reach = [0i64; 3];
    for a in 0..dim {
        let bound = bounds[a] * radius.powi(weights[a] as i32);
        reach[a] = (bound / spec.spacing(a)).ceil() as i64;
        if reach[a] > spec.half_count(a) {
            return Err(Error::config(format!(
                "radius {radius} needs {} cells on axis {a} but the lattice has {}",
                reach[a],
                spec.half_count(a)
            )));
        }
    }
    let mut offsets = Vec::new();
    let mut gauges = Vec::new();
    let mut actual = [0i64; 3];
    let hi = |a: usize| if a < dim { reach[a] } else { 0 };
    for i in -hi(0)..=hi(0) {
        for j in -hi(1)..=hi(1) {
            for k in -hi(2)..=hi(2) {
                let o = [i, j, k];
                let g = group.gauge(spec.point(o));
                if g < radius {
                    offsets.push(o);
                    gauges.push(g);
                    for a in 0..dim {
                        actual[a] = actual[a].max(o[a].abs());
                    }
                }
            }
        }
    }
    debug_assert!(!offsets.is_empty());
    let mut scan_order: Vec<u32> = (0..offsets.len() as u32).collect();
    scan_order.sort_unstable_by(|&a, &b| gauges[b as usize].total_cmp(&gauges[a as usize]));
    Ok(BallStencil {
        radius,
        degenerate: offsets.len() == 1,
        offsets,
        reach: actual,
        scan_order,
        cell_measure: spec.cell_measure(),
    })
}

/// Dyadic radius family `r0 * 2^k`, `k = 0..=k_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusFamily {
    pub r0: f64,
    pub k_max: u32,
}

impl RadiusFamily {
    pub fn new(r0: f64, k_max: u32) -> Result<RadiusFamily> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::config(format!("base radius {r0} must be positive")));
        }
        if k_max > 50 {
            return Err(Error::config(format!("radius doubling count {k_max} is too large")));
        }
        Ok(RadiusFamily { r0, k_max })
    }

    /// Default family: base radius `2h`, doubling until the largest radius
    /// reaches a quarter of the smallest layer-one domain width.
    pub fn default_for(spec: &LatticeSpec) -> Result<RadiusFamily> {
        let r0 = 2.0 * spec.h;
        let first_layer = spec.group.strata()[0];
        let mut max_r = f64::INFINITY;
        for a in 0..first_layer {
            max_r = max_r.min(spec.extent(a) / 2.0);
        }
        let k_max = if max_r > r0 {
            (max_r / r0).log2().floor() as u32
        } else {
            0
        };
        RadiusFamily::new(r0, k_max)
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.k_max)
            .map(|k| self.r0 * f64::powi(2.0, k as i32))
            .collect()
    }

    pub fn id(&self) -> String {
        format!("dyadic(r0={},k={})", self.r0, self.k_max)
    }
}

pub fn build_stencils(spec: &LatticeSpec, family: &RadiusFamily) -> Result<Vec<BallStencil>> {
    family
        .radii()
        .iter()
        .map(|&r| build_stencil(spec, r))
        .collect()
}

/// The evaluation core: centers whose translated stencils stay inside the
/// lattice for every family radius.
///
/// Layer-one axes shrink by the configured margin and by the stencil reach;
/// the Heisenberg center axis additionally shrinks per center by the exact
/// shear bound `|i_c j_o - j_c i_o| <= |i_c| J + |j_c| I`, so membership of
/// a translated point never needs a runtime bounds check.
#[derive(Clone, Debug)]
pub struct CoreRegion {
    spec: LatticeSpec,
    box_lims: [i64; 3],
    reach: [i64; 3],
    indices: Vec<Index>,
    mask: Vec<bool>,
}

impl CoreRegion {
    pub fn compute(spec: &LatticeSpec, stencils: &[BallStencil]) -> Result<CoreRegion> {
        if stencils.is_empty() {
            return Err(Error::config("no stencils supplied".to_string()));
        }
        let max_radius = stencils.iter().fold(0.0f64, |m, s| m.max(s.radius));
        if spec.margin < max_radius {
            return Err(Error::config(format!(
                "margin {} is below the largest stencil radius {max_radius}",
                spec.margin
            )));
        }
        let mut reach = [0i64; 3];
        for st in stencils {
            for (r, &sr) in reach.iter_mut().zip(&st.reach) {
                *r = (*r).max(sr);
            }
        }
        let weights = spec.group.weights();
        let bounds = spec.group.unit_ball_bounds();
        let mut box_lims = [0i64; 3];
        for a in 0..spec.dim() {
            let margin_coord = bounds[a] * spec.margin.powi(weights[a] as i32);
            let margin_cells = (margin_coord / spec.spacing(a) - 1e-9).ceil() as i64;
            box_lims[a] = spec.half_count(a) - margin_cells.max(reach[a]);
        }
        let mut indices = Vec::new();
        let mut mask = vec![false; spec.len()];
        match spec.group {
            Group::Euclidean1 => {
                for i in -box_lims[0]..=box_lims[0] {
                    indices.push([i, 0, 0]);
                }
            }
            Group::Euclidean2 => {
                for i in -box_lims[0]..=box_lims[0] {
                    for j in -box_lims[1]..=box_lims[1] {
                        indices.push([i, j, 0]);
                    }
                }
            }
            Group::Heisenberg1 => {
                for i in -box_lims[0]..=box_lims[0] {
                    for j in -box_lims[1]..=box_lims[1] {
                        let shear = i.abs() * reach[1] + j.abs() * reach[0];
                        let k_lim = (spec.half_count(2) - reach[2] - shear).min(box_lims[2]);
                        for k in -k_lim..=k_lim {
                            indices.push([i, j, k]);
                        }
                    }
                }
            }
        }
        if indices.is_empty() {
            return Err(Error::config(format!(
                "evaluation core is empty: margin {} and radius {max_radius} leave no interior points",
                spec.margin
            )));
        }
        for idx in &indices {
            mask[spec.linear(*idx)] = true;
        }
        Ok(CoreRegion {
            spec: *spec,
            box_lims,
            reach,
            indices,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn contains(&self, idx: Index) -> bool {
        self.spec.contains(idx) && self.mask[self.spec.linear(idx)]
    }

    pub fn contains_linear(&self, lin: usize) -> bool {
        self.mask[lin]
    }

    pub fn box_limit(&self, axis: usize) -> i64 {
        self.box_lims[axis]
    }

    pub fn stencil_reach(&self, axis: usize) -> i64 {
        self.reach[axis]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ball_cell_count, ALL_GROUPS, ORIGIN};
    use proptest::prelude::*;

    fn spec_r1(h: f64, extent: f64) -> LatticeSpec {
        LatticeSpec::new(Group::Euclidean1, h, &[extent], 0.0).unwrap()
    }

    // ===== LATTICE GEOMETRY =====

    #[test]
    fn identity_is_a_lattice_point_and_counts_are_odd() {
        for g in ALL_GROUPS {
            let extents: Vec<f64> = g.strata().iter().map(|_| 1.0).collect();
            let spec = LatticeSpec::new(g, 0.25, &extents, 0.0).unwrap();
            assert_eq!(spec.point([0, 0, 0]), ORIGIN);
            for a in 0..spec.dim() {
                assert_eq!(spec.axis_points(a) % 2, 1);
            }
        }
    }

    #[test]
    fn heisenberg_cell_measure_uses_the_center_step() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.5], 0.0).unwrap();
        assert_eq!(spec.spacing(2), 0.25 * 0.25 / 2.0);
        assert_eq!(spec.cell_measure(), 0.25 * 0.25 * 0.03125);
    }

    #[test]
    fn linear_index_round_trips() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.5, &[1.0, 0.5], 0.0).unwrap();
        for lin in 0..spec.len() {
            assert_eq!(spec.linear(spec.index(lin)), lin);
        }
    }

    #[test]
    fn oversized_lattices_are_refused() {
        let err = LatticeSpec::new(Group::Euclidean2, 1e-5, &[100.0], 0.0);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn translation_matches_the_group_product_exactly() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 1.0], 0.0).unwrap();
        let g = spec.group;
        for &c in &[[1, -2, 3], [4, 0, -5], [-3, 3, 0]] {
            for &o in &[[1, 1, 1], [-2, 1, 0], [0, -1, 2]] {
                let t = spec.translate(c, o);
                let expect = g.mul(spec.point(c), spec.point(o));
                assert_eq!(spec.point(t), expect, "translate({c:?},{o:?})");
            }
        }
    }

    // ===== STENCILS =====

    #[test]
    fn interval_stencil_matches_hand_enumeration() {
        let spec = spec_r1(0.5, 2.0);
        let st = build_stencil(&spec, 1.0).unwrap();
        let got: Vec<i64> = st.offsets.iter().map(|o| o[0]).collect();
        assert_eq!(got, vec![-1, 0, 1]);
        assert_eq!(st.discrete_measure(), 1.5);
        assert!(!st.degenerate);
    }

    #[test]
    fn tiny_radius_gives_a_flagged_single_cell() {
        let spec = spec_r1(0.5, 2.0);
        let st = build_stencil(&spec, 0.25).unwrap();
        assert_eq!(st.count(), 1);
        assert!(st.degenerate);
    }

    #[test]
    fn oversized_radius_is_refused() {
        let spec = spec_r1(0.5, 2.0);
        assert!(matches!(build_stencil(&spec, 10.0), Err(Error::Config(_))));
    }

    #[test]
    fn stencils_are_inverse_closed() {
        for (g, extents) in [
            (Group::Euclidean2, vec![2.0]),
            (Group::Heisenberg1, vec![2.0, 1.0]),
        ] {
            let spec = LatticeSpec::new(g, 0.25, &extents, 0.0).unwrap();
            let st = build_stencil(&spec, 1.0).unwrap();
            let set: std::collections::HashSet<Index> = st.offsets.iter().copied().collect();
            for o in &st.offsets {
                assert!(set.contains(&[-o[0], -o[1], -o[2]]));
            }
        }
    }

    #[test]
    fn stencil_count_matches_quadrature_count() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.5, 1.0], 0.0).unwrap();
        let st = build_stencil(&spec, 1.0).unwrap();
        let deltas = [spec.spacing(0), spec.spacing(1), spec.spacing(2)];
        let quad = ball_cell_count(Group::Heisenberg1, &deltas, 0.0, 1.0);
        assert_eq!(st.count() as u64, quad);
    }

    #[test]
    fn lattice_ball_measure_converges_to_the_calibrated_constant() {
        // Frozen h sequences; relative error shrinks monotonically and ends
        // below one percent of c1 r^Q at r = 1.
        let cases: [(Group, &[f64], Vec<f64>, f64); 3] = [
            (Group::Euclidean1, &[0.0625, 0.03125, 0.015625], vec![2.5], 2.0),
            (Group::Euclidean2, &[0.125, 0.0625, 0.03125], vec![2.5], std::f64::consts::PI),
            (Group::Heisenberg1, &[0.25, 0.125, 0.0625], vec![1.5, 0.5], std::f64::consts::PI * std::f64::consts::PI / 8.0),
        ];
        for (g, hs, extents, c1) in cases {
            let mut last = f64::INFINITY;
            for &h in hs {
                let spec = LatticeSpec::new(g, h, &extents, 0.0).unwrap();
                let st = build_stencil(&spec, 1.0).unwrap();
                let err = (st.discrete_measure() - c1).abs() / c1;
                assert!(err < last, "{g} h={h}: error {err} did not shrink from {last}");
                last = err;
            }
            assert!(last <= 0.01, "{g}: final measure error {last} above 1%");
        }
    }

    #[test]
    fn default_family_doubles_to_a_quarter_of_the_domain() {
        let spec = LatticeSpec::new(Group::Euclidean1, 0.03125, &[2.0], 0.0).unwrap();
        let fam = RadiusFamily::default_for(&spec).unwrap();
        assert_eq!(fam.r0, 0.0625);
        let radii = fam.radii();
        assert_eq!(*radii.last().unwrap(), 1.0);
    }

    // ===== GRID FUNCTIONS =====

    #[test]
    fn indicator_sample_uses_strict_membership() {
        let spec = spec_r1(0.5, 1.0);
        let g = spec.group;
        let chi = GridFunction::sample(spec, |p| if g.gauge(p) < 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(chi.values, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn non_finite_values_are_refused() {
        let spec = spec_r1(0.5, 1.0);
        assert!(GridFunction::from_values(spec, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(GridFunction::from_values(spec, vec![0.0; 3]).is_err());
    }

    #[test]
    fn grid_file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.grid");
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.5, &[1.0, 0.5], 0.0).unwrap();
        let g = spec.group;
        let f = GridFunction::sample(spec, |p| (g.gauge(p) * 7.3).sin() / 3.0).unwrap();
        f.write_text(&path).unwrap();
        let back = GridFunction::read_text(&path).unwrap();
        assert!(back.spec.same_grid(&f.spec));
        assert_eq!(back.values, f.values);
        back.write_text(&path).unwrap();
        let twice = GridFunction::read_text(&path).unwrap();
        assert_eq!(twice.values, f.values);
    }

    #[test]
    fn malformed_grid_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.grid");
        std::fs::write(&path, "group=euclidean1 h=0.5 extents=4 layout=row-major\n1\n2\n3\n4\n").unwrap();
        assert!(matches!(GridFunction::read_text(&path), Err(Error::Data(_))));
        std::fs::write(&path, "group=euclidean1 h=0.5 extents=3 layout=column-major\n1\n2\n3\n").unwrap();
        assert!(matches!(GridFunction::read_text(&path), Err(Error::Data(_))));
        std::fs::write(&path, "group=euclidean1 h=0.5 extents=3 layout=row-major\n1\nx\n3\n").unwrap();
        assert!(matches!(GridFunction::read_text(&path), Err(Error::Data(_))));
    }

    // ===== CORE REGION =====

    #[test]
    fn euclidean_core_shrinks_by_the_margin() {
        let spec = LatticeSpec::new(Group::Euclidean1, 0.25, &[2.0], 1.0).unwrap();
        let st = vec![build_stencil(&spec, 1.0).unwrap()];
        let core = CoreRegion::compute(&spec, &st).unwrap();
        assert_eq!(core.len(), 9);
        assert!(core.contains([4, 0, 0]) && !core.contains([5, 0, 0]));
    }

    #[test]
    fn margin_below_radius_is_refused() {
        let spec = LatticeSpec::new(Group::Euclidean1, 0.25, &[2.0], 0.5).unwrap();
        let st = vec![build_stencil(&spec, 1.0).unwrap()];
        assert!(matches!(CoreRegion::compute(&spec, &st), Err(Error::Config(_))));
    }

    #[test]
    fn heisenberg_core_keeps_translated_stencils_inside() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.125], 0.5).unwrap();
        let st = vec![build_stencil(&spec, 0.5).unwrap()];
        let core = CoreRegion::compute(&spec, &st).unwrap();
        assert!(!core.is_empty());
        for &c in core.indices() {
            for o in &st[0].offsets {
                assert!(
                    spec.contains(spec.translate(c, *o)),
                    "center {c:?} offset {o:?} escaped"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Left translation by a core point maps the stencil onto exactly the
        // lattice points of the translated ball, including the shear on the
        // Heisenberg center axis.
        #[test]
        fn translated_stencil_equals_distance_membership(
            h_pow in 1u32..3,
            r_mult in 1u32..3,
            ci in -2i64..3,
            cj in -2i64..3,
            ck in -4i64..5,
        ) {
            let h = 0.5f64.powi(h_pow as i32);
            let spec = LatticeSpec::new(Group::Heisenberg1, h, &[1.0, 0.5], 0.0).unwrap();
            let g = spec.group;
            let r = 2.0 * h * r_mult as f64;
            let st = match build_stencil(&spec, r) {
                Ok(st) => st,
                Err(_) => return Ok(()),
            };
            let center = [ci, cj, ck];
            prop_assume!(spec.contains(center));
            let mut translated: Vec<Index> = Vec::new();
            let mut inside = true;
            for o in &st.offsets {
                let t = spec.translate(center, *o);
                if !spec.contains(t) {
                    inside = false;
                    break;
                }
                translated.push(t);
            }
            prop_assume!(inside);
            translated.sort();
            let cpt = spec.point(center);
            let mut by_distance: Vec<Index> = Vec::new();
            for lin in 0..spec.len() {
                let idx = spec.index(lin);
                if g.dist(cpt, spec.point(idx)) < r {
                    by_distance.push(idx);
                }
            }
            by_distance.sort();
            prop_assert_eq!(translated, by_distance);
        }

        #[test]
        fn grid_values_round_trip_through_text(vals in proptest::collection::vec(-1e12f64..1e12, 5)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.grid");
            let spec = LatticeSpec::new(Group::Euclidean1, 0.5, &[1.0], 0.0).unwrap();
            let f = GridFunction::from_values(spec, vals).unwrap();
            f.write_text(&path).unwrap();
            let back = GridFunction::read_text(&path).unwrap();
            prop_assert_eq!(back.values, f.values);
        }
    }
}
