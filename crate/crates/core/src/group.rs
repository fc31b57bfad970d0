//! Group structure: the supported groups, their dilations and gauges, and
//! the calibration of the gauge constants.
//!
//! Points live in exponential coordinates as `[f64; 3]`, padded with zeros
//! below the topological dimension. The Haar measure is Lebesgue measure in
//! these coordinates. Every coordinate axis carries a homogeneity weight:
//! dilation by `t` scales an axis of weight `w` by `t^w`.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

pub type Point = [f64; 3];

pub const ORIGIN: Point = [0.0, 0.0, 0.0];

/// One of the supported stratified groups.
///
/// `Euclidean1`/`Euclidean2` are the abelian groups R and R^2 with the
/// Euclidean norm as gauge. `Heisenberg1` is the first Heisenberg group in
/// coordinates `(x, y, t)` with group law
/// `(x,y,t)*(x',y',t') = (x+x', y+y', t+t' + (x y' - y x')/2)` and gauge
/// `((x^2+y^2)^2 + 16 t^2)^(1/4)`, normalized so that the gauge is a metric.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Group {
    Euclidean1,
    Euclidean2,
    Heisenberg1,
}

pub const ALL_GROUPS: [Group; 3] = [Group::Euclidean1, Group::Euclidean2, Group::Heisenberg1];

impl Group {
    pub fn parse(s: &str) -> Result<Group> {
        match s {
            "euclidean1" => Ok(Group::Euclidean1),
            "euclidean2" => Ok(Group::Euclidean2),
            "heisenberg1" => Ok(Group::Heisenberg1),
            other => Err(Error::config(format!(
                "unknown group {other:?} (expected euclidean1, euclidean2 or heisenberg1)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Euclidean1 => "euclidean1",
            Group::Euclidean2 => "euclidean2",
            Group::Heisenberg1 => "heisenberg1",
        }
    }

    /// Topological dimension: the number of live coordinates.
    pub fn dim(self) -> usize {
        match self {
            Group::Euclidean1 => 1,
            Group::Euclidean2 => 2,
            Group::Heisenberg1 => 3,
        }
    }

    /// Number of coordinates in each stratum.
    pub fn strata(self) -> &'static [usize] {
        match self {
            Group::Euclidean1 => &[1],
            Group::Euclidean2 => &[2],
            Group::Heisenberg1 => &[2, 1],
        }
    }

    /// Homogeneity weight of each coordinate axis.
    pub fn weights(self) -> &'static [u32] {
        match self {
            Group::Euclidean1 => &[1],
            Group::Euclidean2 => &[1, 1],
            Group::Heisenberg1 => &[1, 1, 2],
        }
    }

    /// Homogeneous dimension Q = sum of the axis weights.
    pub fn homogeneous_dim(self) -> u32 {
        match self {
            Group::Euclidean1 => 1,
            Group::Euclidean2 => 2,
            Group::Heisenberg1 => 4,
        }
    }

    /// Coordinate bound of the unit ball along each axis: the gauge ball of
    /// radius r fits in the box `|x_a| <= bound_a * r^{w_a}`.
    pub fn unit_ball_bounds(self) -> &'static [f64] {
        match self {
            Group::Euclidean1 => &[1.0],
            Group::Euclidean2 => &[1.0, 1.0],
            Group::Heisenberg1 => &[1.0, 1.0, 0.25],
        }
    }

    pub fn mul(self, a: Point, b: Point) -> Point {
        match self {
            Group::Euclidean1 | Group::Euclidean2 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
            Group::Heisenberg1 => [
                a[0] + b[0],
                a[1] + b[1],
                a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0]),
            ],
        }
    }

    pub fn inverse(self, a: Point) -> Point {
        [-a[0], -a[1], -a[2]]
    }

    pub fn dilate(self, t: f64, a: Point) -> Point {
        match self {
            Group::Euclidean1 | Group::Euclidean2 => [t * a[0], t * a[1], t * a[2]],
            Group::Heisenberg1 => [t * a[0], t * a[1], t * t * a[2]],
        }
    }

    /// Homogeneous gauge. Symmetric, homogeneous of degree one under the
    /// dilations, zero exactly at the identity.
    pub fn gauge(self, a: Point) -> f64 {
        match self {
            Group::Euclidean1 | Group::Euclidean2 => {
                (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
            }
            Group::Heisenberg1 => {
                let s = a[0] * a[0] + a[1] * a[1];
                (s * s + 16.0 * a[2] * a[2]).sqrt().sqrt()
            }
        }
    }

    /// Left-invariant quasi-distance `gauge(a^{-1} x)`.
    pub fn dist(self, a: Point, x: Point) -> f64 {
        self.gauge(self.mul(self.inverse(a), x))
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Calibrated gauge constants for one group.
///
/// `c0` is the sampled maximum of `gauge(a*b) / (gauge(a)+gauge(b))`; `c1`
/// is the measure of the unit gauge ball from midpoint quadrature at
/// `resolution` cells across the unit ball bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub group: Group,
    pub q: u32,
    pub c0: f64,
    pub c1: f64,
    pub resolution: u32,
}

/// Count quadrature cells whose center lies strictly inside the gauge ball
/// of radius `r`. Cell centers sit at `(k + anchor) * delta_a` per axis, so
/// `anchor = 0` reproduces a dilation lattice and `anchor = 0.5` the
/// midpoint rule. The scan box always covers the ball bounds for `r`.
pub fn ball_cell_count(group: Group, delta: &[f64], anchor: f64, r: f64) -> u64 {
    let dim = group.dim();
    assert_eq!(delta.len(), dim);
    let bounds = group.unit_ball_bounds();
    let weights = group.weights();
    let mut k_hi = [0i64; 3];
    for a in 0..dim {
        let bound = bounds[a] * r.powi(weights[a] as i32);
        k_hi[a] = (bound / delta[a]).ceil() as i64 + 1;
    }
    let center = |a: usize, k: i64| (k as f64 + anchor) * delta[a];
    let mut count = 0u64;
    match dim {
        1 => {
            for i in -k_hi[0]..=k_hi[0] {
                if group.gauge([center(0, i), 0.0, 0.0]) < r {
                    count += 1;
                }
            }
        }
        2 => {
            for i in -k_hi[0]..=k_hi[0] {
                let x = center(0, i);
                for j in -k_hi[1]..=k_hi[1] {
                    if group.gauge([x, center(1, j), 0.0]) < r {
                        count += 1;
                    }
                }
            }
        }
        3 => {
            for i in -k_hi[0]..=k_hi[0] {
                let x = center(0, i);
                for j in -k_hi[1]..=k_hi[1] {
                    let y = center(1, j);
                    for k in -k_hi[2]..=k_hi[2] {
                        if group.gauge([x, y, center(2, k)]) < r {
                            count += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    count
}

/// Measure of the gauge ball of radius `r` by midpoint quadrature whose cell
/// size is fixed by the unit ball at `resolution` cells per axis. Keeping
/// the cells fixed while `r` varies makes the `r`-scaling check meaningful.
pub fn ball_quadrature_measure(group: Group, r: f64, resolution: u32) -> f64 {
    let dim = group.dim();
    let bounds = group.unit_ball_bounds();
    let mut delta = [0.0f64; 3];
    for a in 0..dim {
        delta[a] = 2.0 * bounds[a] / resolution as f64;
    }
    let count = ball_cell_count(group, &delta[..dim], 0.5, r);
    count as f64 * delta[..dim].iter().product::<f64>()
}

/// Measure of the unit gauge ball; the constant in `|B(x,r)| = c1 r^Q`.
pub fn calibrate_c1(group: Group, resolution: u32) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::config(format!(
            "quadrature resolution {resolution} below the minimum of 64"
        )));
    }
    Ok(ball_quadrature_measure(group, 1.0, resolution))
}

/// Sampled quasi-triangle constant: the maximum of
/// `gauge(a*b) / (gauge(a) + gauge(b))` over seeded uniform pairs.
pub fn estimate_c0(group: Group, samples: u32, seed: u64) -> Result<f64> {
    if samples < 10_000 {
        return Err(Error::config(format!(
            "c0 sample count {samples} below the minimum of 10000"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0c0_c0c0);
    let dim = group.dim();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut a = ORIGIN;
        let mut b = ORIGIN;
        for c in 0..dim {
            a[c] = rng.gen_range(-2.0..2.0);
            b[c] = rng.gen_range(-2.0..2.0);
        }
        let denom = group.gauge(a) + group.gauge(b);
        if denom < 1e-12 {
            continue;
        }
        let ratio = group.gauge(group.mul(a, b)) / denom;
        worst = worst.max(ratio);
    }
    Ok(worst)
}

pub const DEFAULT_C0_SAMPLES: u32 = 200_000;

/// Default quadrature resolution for `calibrate_c1`.
pub fn default_resolution(group: Group) -> u32 {
    match group {
        Group::Euclidean1 | Group::Euclidean2 => 256,
        Group::Heisenberg1 => 128,
    }
}

pub fn calibrate(group: Group, resolution: u32, seed: u64) -> Result<Calibration> {
    Ok(Calibration {
        group,
        q: group.homogeneous_dim(),
        c0: estimate_c0(group, DEFAULT_C0_SAMPLES, seed)?,
        c1: calibrate_c1(group, resolution)?,
        resolution,
    })
}

impl Calibration {
    pub fn cache_line(&self) -> String {
        format!(
            "group={} Q={} c0={} c1={} resolution={}",
            self.group.name(),
            self.q,
            fmt_float(self.c0),
            fmt_float(self.c1),
            self.resolution
        )
    }

    pub fn parse_cache_line(line: &str) -> Result<Calibration> {
        let mut group = None;
        let mut q = None;
        let mut c0 = None;
        let mut c1 = None;
        let mut resolution = None;
        for field in line.split_ascii_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::data(format!("calibration field {field:?} is not key=value")))?;
            match key {
                "group" => group = Some(Group::parse(value).map_err(|e| Error::data(e.to_string()))?),
                "Q" => q = Some(parse_num::<u32>(key, value)?),
                "c0" => c0 = Some(parse_num::<f64>(key, value)?),
                "c1" => c1 = Some(parse_num::<f64>(key, value)?),
                "resolution" => resolution = Some(parse_num::<u32>(key, value)?),
                other => return Err(Error::data(format!("unknown calibration field {other:?}"))),
            }
        }
        let group = group.ok_or_else(|| Error::data("calibration line missing group"))?;
        let cal = Calibration {
            group,
            q: q.ok_or_else(|| Error::data("calibration line missing Q"))?,
            c0: c0.ok_or_else(|| Error::data("calibration line missing c0"))?,
            c1: c1.ok_or_else(|| Error::data("calibration line missing c1"))?,
            resolution: resolution.ok_or_else(|| Error::data("calibration line missing resolution"))?,
        };
        if cal.q != group.homogeneous_dim() {
            return Err(Error::data(format!(
                "calibration Q={} does not match group {}",
                cal.q,
                group.name()
            )));
        }
        Ok(cal)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::data(format!("bad numeric value {value:?} for {key}")))
}

/// 17 significant digits: enough to round-trip any f64 through text.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_calibration_cache(path: &std::path::Path) -> Result<Vec<Calibration>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(Calibration::parse_cache_line(line)?);
    }
    Ok(out)
}

pub fn write_calibration_cache(path: &std::path::Path, cals: &[Calibration]) -> Result<()> {
    let mut text = String::new();
    for cal in cals {
        text.push_str(&cal.cache_line());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const H1: Group = Group::Heisenberg1;

    #[test]
    fn group_law_identity_and_inverse() {
        for g in ALL_GROUPS {
            let a = [0.75, -1.25, 0.375];
            assert_eq!(g.mul(a, ORIGIN), a);
            assert_eq!(g.mul(ORIGIN, a), a);
            let prod = g.mul(a, g.inverse(a));
            assert_eq!(prod, ORIGIN, "a * a^-1 must vanish exactly on {g}");
        }
    }

    #[test]
    fn heisenberg_law_matches_hand_value() {
        let p = H1.mul([1.0, 2.0, 0.5], [-0.5, 1.0, 0.25]);
        // t = 0.5 + 0.25 + (1*1 - 2*(-0.5))/2 = 0.75 + 1 = 1.75
        assert_eq!(p, [0.5, 3.0, 1.75]);
    }

    #[test]
    fn gauge_axioms_hold_at_sampled_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in ALL_GROUPS {
            assert_eq!(g.gauge(ORIGIN), 0.0);
            for _ in 0..500 {
                let mut a = ORIGIN;
                for c in 0..g.dim() {
                    a[c] = rng.gen_range(-3.0..3.0);
                }
                let n = g.gauge(a);
                assert!(n.is_finite() && n >= 0.0);
                assert_eq!(g.gauge(g.inverse(a)), n, "gauge must be symmetric");
                for t in [0.5, 2.0, 3.5] {
                    let scaled = g.gauge(g.dilate(t, a));
                    assert!(
                        (scaled - t * n).abs() <= 1e-12 * (1.0 + t * n),
                        "gauge homogeneity failed on {g}: {scaled} vs {}",
                        t * n
                    );
                }
            }
        }
    }

    #[test]
    fn koranyi_gauge_reference_point() {
        // ((0^2+0^2)^2 + 16)^{1/4} = 2 at the unit t-axis point.
        assert_eq!(H1.gauge([0.0, 0.0, 1.0]), 2.0);
    }

    #[test]
    fn associativity_and_left_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in ALL_GROUPS {
            for _ in 0..500 {
                let mut pts = [[0.0f64; 3]; 3];
                for p in pts.iter_mut() {
                    for c in 0..g.dim() {
                        p[c] = rng.gen_range(-2.0..2.0);
                    }
                }
                let [a, b, c] = pts;
                let l = g.mul(g.mul(a, b), c);
                let r = g.mul(a, g.mul(b, c));
                for i in 0..3 {
                    assert!((l[i] - r[i]).abs() <= 1e-12 * (1.0 + l[i].abs()));
                }
                let d0 = g.dist(b, c);
                let d1 = g.dist(g.mul(a, b), g.mul(a, c));
                assert!((d0 - d1).abs() <= 1e-11 * (1.0 + d0));
            }
        }
    }

    #[test]
    fn euclidean_unit_ball_measures_are_exact_or_close() {
        assert_eq!(calibrate_c1(Group::Euclidean1, 256).unwrap(), 2.0);
        assert_eq!(calibrate_c1(Group::Euclidean1, 64).unwrap(), 2.0);
        let c1 = calibrate_c1(Group::Euclidean2, 256).unwrap();
        assert!(
            (c1 - std::f64::consts::PI).abs() <= 1e-3,
            "disc quadrature at 256 gave {c1}"
        );
    }

    #[test]
    fn koranyi_unit_ball_measure_matches_frozen_quadrature() {
        // Frozen from an independent quadrature run: resolution 128,
        // midpoint cells, strict interior count 1294168.
        let c1 = calibrate_c1(H1, 128).unwrap();
        assert!(
            (c1 - 1.2342147827148438).abs() < 1e-12,
            "Koranyi ball quadrature drifted: {c1}"
        );
        // Four significant digits of the calibrated value.
        assert_eq!(format!("{c1:.4}"), "1.2342");
        assert_eq!(format!("{:.3e}", c1), "1.234e0");
    }

    #[test]
    fn ball_measure_scales_like_r_to_the_q() {
        for (g, res, tol) in [
            (Group::Euclidean1, 256u32, 1e-12),
            (Group::Euclidean2, 256, 0.01),
            (H1, 128, 0.01),
        ] {
            let c1 = calibrate_c1(g, res).unwrap();
            for r in [0.5, 1.0, 2.0] {
                let m = ball_quadrature_measure(g, r, res);
                let expect = c1 * r.powi(g.homogeneous_dim() as i32);
                assert!(
                    (m - expect).abs() <= tol * expect,
                    "{g} r={r}: measure {m} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn sampled_triangle_constant_is_one_for_both_gauges() {
        for g in ALL_GROUPS {
            let c0 = estimate_c0(g, 50_000, 20240811).unwrap();
            assert!(c0 <= 1.0 + 1e-9, "{g}: sampled c0 = {c0}");
            assert!(c0 > 0.9, "{g}: sampled c0 suspiciously small: {c0}");
        }
    }

    #[test]
    fn calibration_cache_round_trips() {
        let cal = Calibration {
            group: H1,
            q: 4,
            c0: 0.9999272634283803,
            c1: 1.2342147827148438,
            resolution: 128,
        };
        let line = cal.cache_line();
        let back = Calibration::parse_cache_line(&line).unwrap();
        assert_eq!(back, cal);
        assert!(Calibration::parse_cache_line("group=euclidean1 Q=3 c0=1 c1=2 resolution=64").is_err());
    }

    #[test]
    fn c0_rejects_tiny_sample_counts() {
        assert!(estimate_c0(H1, 100, 1).is_err());
        assert!(calibrate_c1(H1, 32).is_err());
    }
}
