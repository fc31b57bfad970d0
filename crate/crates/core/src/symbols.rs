//! Symbol and test-function families used by the verification suites.
//!
//! Symbols are the `b` arguments of the commutators: gauge powers (seminorm
//! exactly 1), shifted gauge powers, constants, a logarithmic spike outside
//! every Lipschitz class, and seeded random functions forced into the class
//! by a distance-envelope projection.

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, LatticeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Anchor count for the random-symbol envelope; the envelope over any anchor
/// subset stays inside the Lipschitz class.
const ENVELOPE_ANCHORS: usize = 2000;

/// Bump count for the noise field.
const NOISE_BUMPS: usize = 24;

/// A seeded point in the box spanned by the lattice. Depends on the extents
/// only, so coarse and refined lattices draw the same point sequence.
fn box_point(spec: LatticeSpec, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (a, c) in p.iter_mut().enumerate().take(spec.dim()) {
        *c = (2.0 * rng.gen::<f64>() - 1.0) * spec.extent(a);
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Symbol {
    /// `b = gauge^beta`.
    PowerGauge { beta: f64 },
    /// `b = d(shift, .)^beta` for a lattice point `shift`.
    /// Gauge power centered at a physical point, `d(s, x)^beta`. The center
    /// is continuum data so the field survives lattice refinement.
    ShiftedPowerGauge { beta: f64, shift: [f64; 3] },
    /// `b = c`.
    Constant { c: f64 },
    /// Logarithmic spike at the identity, compactly supported, outside
    /// every Lipschitz class.
    NonLipschitz,
    /// Envelope `b(x) = min_a (u(a) + d(x, a)^beta)` over seeded anchors
    /// `a` with seeded heights `u(a)` in `[0, 1]`.
    RandomLipschitz { beta: f64, seed: u64 },
}

impl Symbol {
    /// Smoothness order the symbol is designed for, if any.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Symbol::PowerGauge { beta } | Symbol::ShiftedPowerGauge { beta, .. } => Some(*beta),
            Symbol::RandomLipschitz { beta, .. } => Some(*beta),
            Symbol::Constant { .. } | Symbol::NonLipschitz => None,
        }
    }

    pub fn in_lipschitz_class(&self) -> bool {
        !matches!(self, Symbol::NonLipschitz)
    }

    pub fn id(&self) -> String {
        match self {
            Symbol::PowerGauge { beta } => format!("power_gauge(beta={beta})"),
            Symbol::ShiftedPowerGauge { beta, shift } => {
                format!("shifted_power_gauge(beta={beta},shift={}:{}:{})", shift[0], shift[1], shift[2])
            }
            Symbol::Constant { c } => format!("constant(c={c})"),
            Symbol::NonLipschitz => "non_lipschitz".to_string(),
            Symbol::RandomLipschitz { beta, seed } => {
                format!("random_lipschitz(beta={beta},seed={seed})")
            }
        }
    }

    pub fn sample(&self, spec: LatticeSpec) -> Result<GridFunction> {
        let g = spec.group;
        match *self {
            Symbol::PowerGauge { beta } => {
                check_beta(beta)?;
                GridFunction::sample(spec, |p| g.gauge(p).powf(beta))
            }
            Symbol::ShiftedPowerGauge { beta, shift } => {
                check_beta(beta)?;
                for (a, c) in shift.iter().enumerate() {
                    let lim = if a < spec.dim() { spec.extent(a) } else { 0.0 };
                    if c.abs() > lim {
                        return Err(Error::config(format!(
                            "shift {shift:?} is outside the lattice box"
                        )));
                    }
                }
                GridFunction::sample(spec, |p| g.dist(shift, p).powf(beta))
            }
            Symbol::Constant { c } => {
                if !c.is_finite() {
                    return Err(Error::config(format!("constant symbol {c} must be finite")));
                }
                GridFunction::constant(spec, c)
            }
            Symbol::NonLipschitz => {
                // Support held at gauge 1/2 so every family ball larger than
                // that sees the whole spike plus flat surroundings.
                let floor = spec.h / 2.0;
                GridFunction::sample(spec, |p| {
                    let rho = g.gauge(p);
                    let cut = (1.0 - 4.0 * rho * rho).max(0.0);
                    (rho.max(floor).recip()).ln().max(0.0) * cut * cut
                })
            }
            Symbol::RandomLipschitz { beta, seed } => {
                check_beta(beta)?;
                // Anchors live in the continuum box spanned by the lattice,
                // not on the lattice itself: resampling at a finer spacing
                // then evaluates the same function.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11b5_ca1e);
                let anchors: Vec<([f64; 3], f64)> = (0..ENVELOPE_ANCHORS)
                    .map(|_| (box_point(spec, &mut rng), rng.gen::<f64>()))
                    .collect();
                let values: Vec<f64> = (0..spec.len())
                    .into_par_iter()
                    .map(|lin| {
                        let p = spec.point(spec.index(lin));
                        anchors
                            .iter()
                            .map(|&(a, u)| u + g.dist(a, p).powf(beta))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                GridFunction::from_values(spec, values)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Symbol> {
        let (name, args) = split_call(s)?;
        match name {
            "power_gauge" => Ok(Symbol::PowerGauge {
                beta: get_f64(&args, "beta", s)?,
            }),
            "shifted_power_gauge" => Ok(Symbol::ShiftedPowerGauge {
                beta: get_f64(&args, "beta", s)?,
                shift: get_point(&args, "shift", s)?,
            }),
            "constant" => Ok(Symbol::Constant {
                c: get_f64(&args, "c", s)?,
            }),
            "non_lipschitz" => Ok(Symbol::NonLipschitz),
            "random_lipschitz" => Ok(Symbol::RandomLipschitz {
                beta: get_f64(&args, "beta", s)?,
                seed: get_u64(&args, "seed", s)?,
            }),
            other => Err(Error::config(format!("unknown symbol {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// Indicator of the identity cell.
    DeltaBump,
    /// Indicator of the gauge ball `B(e, r)`.
    BallIndicator { r: f64 },
    /// Oscillation under a compactly supported bump: `cos(k x_1) (1-rho^2)_+^2`.
    ModulatedBump { k: f64 },
    /// Seeded uniform noise in `[1/2, 3/2]`, bounded away from zero.
    Noise { seed: u64 },
}

impl TestFunction {
    pub fn id(&self) -> String {
        match self {
            TestFunction::DeltaBump => "delta".to_string(),
            TestFunction::BallIndicator { r } => format!("ball(r={r})"),
            TestFunction::ModulatedBump { k } => format!("modulated(k={k})"),
            TestFunction::Noise { seed } => format!("noise(seed={seed})"),
        }
    }

    pub fn sample(&self, spec: LatticeSpec) -> Result<GridFunction> {
        let g = spec.group;
        match *self {
            TestFunction::DeltaBump => {
                GridFunction::sample(spec, |p| if p == [0.0; 3] { 1.0 } else { 0.0 })
            }
            TestFunction::BallIndicator { r } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::config(format!("indicator radius {r} must be positive")));
                }
                GridFunction::sample(spec, |p| if g.gauge(p) < r { 1.0 } else { 0.0 })
            }
            TestFunction::ModulatedBump { k } => GridFunction::sample(spec, |p| {
                let rho = g.gauge(p);
                let cut = (1.0 - rho * rho).max(0.0);
                (k * p[0]).cos() * cut * cut
            }),
            TestFunction::Noise { seed } => {
                // Same continuum trick as the random symbol: a fixed splat of
                // bumps, so refinement samples the identical field.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0f0f_5eed);
                let bumps: Vec<([f64; 3], f64, f64)> = (0..NOISE_BUMPS)
                    .map(|_| {
                        (
                            box_point(spec, &mut rng),
                            0.5 + rng.gen::<f64>(),
                            0.15 + 0.35 * rng.gen::<f64>(),
                        )
                    })
                    .collect();
                let values: Vec<f64> = (0..spec.len())
                    .into_par_iter()
                    .map(|lin| {
                        let p = spec.point(spec.index(lin));
                        bumps
                            .iter()
                            .map(|&(c, w, s)| {
                                let u = g.dist(c, p) / s;
                                let cut = (1.0 - u * u).max(0.0);
                                w * cut * cut
                            })
                            .sum()
                    })
                    .collect();
                GridFunction::from_values(spec, values)
            }
        }
    }

    pub fn parse(s: &str) -> Result<TestFunction> {
        let (name, args) = split_call(s)?;
        match name {
            "delta" => Ok(TestFunction::DeltaBump),
            "ball" => {
                let r = get_f64(&args, "r", s)?;
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::config(format!("indicator radius {r} must be positive")));
                }
                Ok(TestFunction::BallIndicator { r })
            }
            "modulated" => Ok(TestFunction::ModulatedBump {
                k: get_f64(&args, "k", s)?,
            }),
            "noise" => Ok(TestFunction::Noise {
                seed: get_u64(&args, "seed", s)?,
            }),
            other => Err(Error::config(format!("unknown test function {other:?}"))),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && 0.0 < beta && beta <= 1.0) {
        return Err(Error::config(format!(
            "symbol smoothness order beta={beta} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// Split `name(key=value,...)` or a bare `name`.
fn split_call(s: &str) -> Result<(&str, Vec<(&str, &str)>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Ok((s, Vec::new()));
    };
    if !s.ends_with(')') {
        return Err(Error::config(format!("malformed spec {s:?}")));
    }
    let name = &s[..open];
    let inner = &s[open + 1..s.len() - 1];
    let mut args = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value in {s:?}, got {part:?}")))?;
        args.push((k.trim(), v.trim()));
    }
    Ok((name, args))
}

fn lookup<'a>(args: &[(&'a str, &'a str)], key: &str, ctx: &str) -> Result<&'a str> {
    args.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::config(format!("{ctx:?} is missing {key}")))
}

fn get_f64(args: &[(&str, &str)], key: &str, ctx: &str) -> Result<f64> {
    lookup(args, key, ctx)?
        .parse()
        .map_err(|_| Error::config(format!("bad {key} in {ctx:?}")))
}

fn get_u64(args: &[(&str, &str)], key: &str, ctx: &str) -> Result<u64> {
    lookup(args, key, ctx)?
        .parse()
        .map_err(|_| Error::config(format!("bad {key} in {ctx:?}")))
}

fn get_point(args: &[(&str, &str)], key: &str, ctx: &str) -> Result<[f64; 3]> {
    let raw = lookup(args, key, ctx)?;
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!("{key} in {ctx:?} must be x:y:t")));
    }
    let mut pt = [0.0f64; 3];
    for (slot, p) in pt.iter_mut().zip(parts) {
        *slot = p
            .parse()
            .map_err(|_| Error::config(format!("bad {key} in {ctx:?}")))?;
    }
    Ok(pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Group;
    use crate::norms::lipschitz_seminorm;

    #[test]
    fn ids_round_trip_through_parse() {
        let shift = [0.5, 0.0, 0.0];
        let symbols = [
            Symbol::PowerGauge { beta: 0.6 },
            Symbol::ShiftedPowerGauge { beta: 0.5, shift },
            Symbol::Constant { c: 2.5 },
            Symbol::NonLipschitz,
            Symbol::RandomLipschitz { beta: 0.7, seed: 9 },
        ];
        for s in symbols {
            assert_eq!(Symbol::parse(&s.id()).unwrap(), s);
        }
        let fns = [
            TestFunction::DeltaBump,
            TestFunction::BallIndicator { r: 0.5 },
            TestFunction::ModulatedBump { k: 3.0 },
            TestFunction::Noise { seed: 4 },
        ];
        for f in fns {
            assert_eq!(TestFunction::parse(&f.id()).unwrap(), f);
        }
        assert!(Symbol::parse("power_gauge(beta=").is_err());
        assert!(Symbol::parse("wiggle(a=1)").is_err());
        assert!(TestFunction::parse("ball(r=-1)").is_err());
    }

    #[test]
    fn random_symbol_is_deterministic_and_in_class() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.25], 0.0).unwrap();
        let beta = 0.6;
        let sym = Symbol::RandomLipschitz { beta, seed: 42 };
        let a = sym.sample(spec).unwrap();
        let b = sym.sample(spec).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().all(|v| *v >= 0.0));
        let (semi, exhaustive) = lipschitz_seminorm(&a, beta, 1).unwrap();
        assert!(exhaustive);
        assert!(semi <= 1.0 + 1e-9, "envelope seminorm {semi} escapes the class");
        assert!(semi > 0.1, "envelope degenerated to a constant");
    }

    #[test]
    fn log_spike_escapes_the_class_under_refinement() {
        let coarse = LatticeSpec::new(Group::Euclidean1, 1.0 / 16.0, &[2.0], 0.0).unwrap();
        let fine = coarse.refined().unwrap();
        let beta = 0.5;
        let (a, _) = lipschitz_seminorm(&Symbol::NonLipschitz.sample(coarse).unwrap(), beta, 1).unwrap();
        let (b, _) = lipschitz_seminorm(&Symbol::NonLipschitz.sample(fine).unwrap(), beta, 1).unwrap();
        assert!(b > a, "spike seminorm must grow: {a} then {b}");
    }

    #[test]
    fn delta_bump_is_one_exactly_at_the_identity() {
        let spec = LatticeSpec::new(Group::Heisenberg1, 0.25, &[1.0, 0.25], 0.0).unwrap();
        let f = TestFunction::DeltaBump.sample(spec).unwrap();
        let total: f64 = f.values.iter().sum();
        assert_eq!(total, 1.0);
        assert_eq!(f.value_at([0, 0, 0]), 1.0);
    }

    #[test]
    fn noise_is_nonnegative_and_not_flat() {
        let spec = LatticeSpec::new(Group::Euclidean2, 0.25, &[1.0], 0.0).unwrap();
        let f = TestFunction::Noise { seed: 3 }.sample(spec).unwrap();
        assert!(f.values.iter().all(|v| *v >= 0.0));
        let hi = f.values.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(hi > 0.1);
    }

    #[test]
    fn seeded_fields_agree_with_their_refinement_at_shared_points() {
        let coarse = LatticeSpec::new(Group::Euclidean2, 0.25, &[1.0], 0.0).unwrap();
        let fine = coarse.refined().unwrap();
        for (name, a, b) in [
            (
                "noise",
                TestFunction::Noise { seed: 3 }.sample(coarse).unwrap(),
                TestFunction::Noise { seed: 3 }.sample(fine).unwrap(),
            ),
            (
                "random",
                Symbol::RandomLipschitz { beta: 0.5, seed: 11 }.sample(coarse).unwrap(),
                Symbol::RandomLipschitz { beta: 0.5, seed: 11 }.sample(fine).unwrap(),
            ),
        ] {
            for i in -4..=4i64 {
                for j in -4..=4i64 {
                    let va = a.values[coarse.linear([i, j, 0])];
                    let vb = b.values[fine.linear([2 * i, 2 * j, 0])];
                    assert_eq!(va, vb, "{name} at ({i},{j})");
                }
            }
        }
    }
}
