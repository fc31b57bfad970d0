//! Run configuration: lattices, radius families, exponent tuples, symbol and
//! test-function sweeps, parsed from a small INI-style format.
//!
//! Any file setting overrides the built-in default run; unknown sections or
//! keys are errors.

use crate::error::{Error, Result};
use crate::group::{Group, ALL_GROUPS};
use crate::lattice::{LatticeSpec, RadiusFamily};
use crate::norms::ExponentTuple;
use crate::operators::{CenterMode, EvalContext};
use crate::symbols::{Symbol, TestFunction};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeConfig {
    pub h: f64,
    pub extents: [f64; 2],
    pub n_extents: usize,
    pub margin: f64,
}

impl LatticeConfig {
    pub fn spec(&self, group: Group) -> Result<LatticeSpec> {
        LatticeSpec::new(group, self.h, &self.extents[..self.n_extents], self.margin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExpKind {
    Lebesgue,
    Spanne,
    Adams,
}

impl ExpKind {
    pub fn name(self) -> &'static str {
        match self {
            ExpKind::Lebesgue => "lebesgue",
            ExpKind::Spanne => "spanne",
            ExpKind::Adams => "adams",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: CenterMode,
    lattices: [LatticeConfig; 3],
    radii: [(f64, u32); 3],
    exponents: [Vec<(ExpKind, ExponentTuple)>; 3],
    pub symbols: Vec<Symbol>,
    pub f_family: Vec<TestFunction>,
}

fn slot(group: Group) -> usize {
    match group {
        Group::Euclidean1 => 0,
        Group::Euclidean2 => 1,
        Group::Heisenberg1 => 2,
    }
}

impl RunConfig {
    pub fn lattice(&self, group: Group) -> LatticeConfig {
        self.lattices[slot(group)]
    }

    pub fn spec(&self, group: Group) -> Result<LatticeSpec> {
        self.lattices[slot(group)].spec(group)
    }

    pub fn family(&self, group: Group) -> Result<RadiusFamily> {
        let (r0, k_max) = self.radii[slot(group)];
        RadiusFamily::new(r0, k_max)
    }

    pub fn context(&self, group: Group) -> Result<EvalContext> {
        EvalContext::new(self.spec(group)?, self.family(group)?)
    }

    /// The same run at half the spacing for one group; domain, margins,
    /// radii, exponents, symbols and seeds are untouched.
    pub fn refined(&self, group: Group) -> RunConfig {
        let mut cfg = self.clone();
        cfg.lattices[slot(group)].h /= 2.0;
        cfg
    }

    pub fn exponents(&self, group: Group) -> &[(ExpKind, ExponentTuple)] {
        &self.exponents[slot(group)]
    }

    /// The built-in run: desk-scale lattices sized so the pair sup stays
    /// exhaustive and every suite finishes quickly.
    pub fn builtin() -> RunConfig {
        let lattices = [
            LatticeConfig {
                h: 1.0 / 128.0,
                extents: [2.0, 0.0],
                n_extents: 1,
                margin: 1.0,
            },
            LatticeConfig {
                h: 1.0 / 32.0,
                extents: [2.0, 0.0],
                n_extents: 1,
                margin: 1.0,
            },
            LatticeConfig {
                h: 0.1,
                extents: [1.2, 0.5],
                n_extents: 2,
                margin: 1.0,
            },
        ];
        let radii = [(1.0 / 64.0, 6), (1.0 / 16.0, 4), (0.25, 2)];
        let exponents = [
            vec![
                (ExpKind::Lebesgue, ExponentTuple::lebesgue(Group::Euclidean1, 0.5, 1.5).unwrap()),
                (ExpKind::Spanne, ExponentTuple::spanne(Group::Euclidean1, 0.25, 2.0, 0.25).unwrap()),
                (ExpKind::Adams, ExponentTuple::adams(Group::Euclidean1, 0.25, 2.0, 0.25).unwrap()),
            ],
            vec![
                (ExpKind::Lebesgue, ExponentTuple::lebesgue(Group::Euclidean2, 0.5, 2.0).unwrap()),
                (ExpKind::Spanne, ExponentTuple::spanne(Group::Euclidean2, 0.5, 2.0, 0.5).unwrap()),
                (ExpKind::Adams, ExponentTuple::adams(Group::Euclidean2, 0.5, 2.0, 0.5).unwrap()),
            ],
            vec![
                (ExpKind::Lebesgue, ExponentTuple::lebesgue(Group::Heisenberg1, 0.5, 2.0).unwrap()),
                (ExpKind::Spanne, ExponentTuple::spanne(Group::Heisenberg1, 0.5, 2.0, 1.0).unwrap()),
                (ExpKind::Adams, ExponentTuple::adams(Group::Heisenberg1, 0.5, 2.0, 1.0).unwrap()),
            ],
        ];
        RunConfig {
            seed: 7,
            mode: CenterMode::Centered,
            lattices,
            radii,
            exponents,
            symbols: vec![
                Symbol::PowerGauge { beta: 0.5 },
                Symbol::ShiftedPowerGauge { beta: 0.5, shift: [0.5, 0.0, 0.0] },
                Symbol::Constant { c: 2.0 },
                Symbol::RandomLipschitz { beta: 0.5, seed: 11 },
                Symbol::NonLipschitz,
            ],
            f_family: vec![
                TestFunction::DeltaBump,
                TestFunction::BallIndicator { r: 0.25 },
                TestFunction::BallIndicator { r: 0.5 },
                TestFunction::BallIndicator { r: 1.0 },
                TestFunction::ModulatedBump { k: 3.0 },
                TestFunction::Noise { seed: 1 },
                TestFunction::Noise { seed: 2 },
                TestFunction::Noise { seed: 3 },
                TestFunction::Noise { seed: 4 },
                TestFunction::Noise { seed: 5 },
            ],
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::builtin();
        let mut cleared_symbols = false;
        let mut cleared_fs = false;
        let mut cleared_exps = [false; 3];
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}: unterminated section", ln + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", ln + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.apply(
                &section,
                key,
                value,
                &mut cleared_symbols,
                &mut cleared_fs,
                &mut cleared_exps,
            )
            .map_err(|e| Error::config(format!("line {}: {e}", ln + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        cleared_symbols: &mut bool,
        cleared_fs: &mut bool,
        cleared_exps: &mut [bool; 3],
    ) -> Result<()> {
        if section == "run" {
            match key {
                "seed" => self.seed = parse_num(key, value)?,
                "mode" => self.mode = CenterMode::parse(value)?,
                _ => return Err(Error::config(format!("unknown key {key:?} in [run]"))),
            }
            return Ok(());
        }
        if section == "symbols" {
            if key != "symbol" {
                return Err(Error::config(format!("unknown key {key:?} in [symbols]")));
            }
            if !*cleared_symbols {
                self.symbols.clear();
                *cleared_symbols = true;
            }
            self.symbols.push(Symbol::parse(value)?);
            return Ok(());
        }
        if section == "f_family" {
            if key != "f" {
                return Err(Error::config(format!("unknown key {key:?} in [f_family]")));
            }
            if !*cleared_fs {
                self.f_family.clear();
                *cleared_fs = true;
            }
            self.f_family.push(TestFunction::parse(value)?);
            return Ok(());
        }
        if let Some(rest) = section.strip_prefix("lattice.") {
            let group = Group::parse(rest)?;
            let lc = &mut self.lattices[slot(group)];
            match key {
                "h" => lc.h = parse_num(key, value)?,
                "margin" => lc.margin = parse_num(key, value)?,
                "extents" => {
                    let parts: Vec<f64> = value
                        .split_whitespace()
                        .map(|p| parse_num("extents", p))
                        .collect::<Result<_>>()?;
                    if parts.is_empty() || parts.len() > 2 {
                        return Err(Error::config(format!(
                            "extents takes one value per stratum, got {}",
                            parts.len()
                        )));
                    }
                    lc.extents = [parts[0], parts.get(1).copied().unwrap_or(0.0)];
                    lc.n_extents = parts.len();
                }
                _ => {
                    return Err(Error::config(format!("unknown key {key:?} in [{section}]")));
                }
            }
            return Ok(());
        }
        if let Some(rest) = section.strip_prefix("radii.") {
            let group = Group::parse(rest)?;
            let r = &mut self.radii[slot(group)];
            match key {
                "r0" => r.0 = parse_num(key, value)?,
                "k_max" => r.1 = parse_num(key, value)?,
                _ => {
                    return Err(Error::config(format!("unknown key {key:?} in [{section}]")));
                }
            }
            return Ok(());
        }
        if let Some(rest) = section.strip_prefix("exponents.") {
            let group = Group::parse(rest)?;
            let kind = match key {
                "lebesgue" => ExpKind::Lebesgue,
                "spanne" => ExpKind::Spanne,
                "adams" => ExpKind::Adams,
                _ => {
                    return Err(Error::config(format!("unknown key {key:?} in [{section}]")));
                }
            };
            let s = slot(group);
            if !cleared_exps[s] {
                self.exponents[s].clear();
                cleared_exps[s] = true;
            }
            let tuple = parse_tuple(group, kind, value)?;
            self.exponents[s].push((kind, tuple));
            return Ok(());
        }
        Err(Error::config(format!("unknown section [{section}]")))
    }

    fn validate(&self) -> Result<()> {
        for group in ALL_GROUPS {
            let spec = self.spec(group)?;
            let family = self.family(group)?;
            if spec.margin < family.radii().last().copied().unwrap_or(0.0) {
                return Err(Error::config(format!(
                    "{}: margin {} is below the largest family radius",
                    group.name(),
                    spec.margin
                )));
            }
        }
        if self.f_family.is_empty() {
            return Err(Error::config("f_family must not be empty".to_string()));
        }
        if self.symbols.is_empty() {
            return Err(Error::config("symbols must not be empty".to_string()));
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("bad value {value:?} for {key}")))
}

fn parse_tuple(group: Group, kind: ExpKind, value: &str) -> Result<ExponentTuple> {
    let mut beta = None;
    let mut p = None;
    let mut lambda = None;
    for part in value.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value in {value:?}")))?;
        let num: f64 = parse_num(k, v)?;
        match k {
            "beta" => beta = Some(num),
            "p" => p = Some(num),
            "lambda" => lambda = Some(num),
            _ => return Err(Error::config(format!("unknown exponent field {k:?}"))),
        }
    }
    let beta = beta.ok_or_else(|| Error::config("exponent tuple is missing beta".to_string()))?;
    let p = p.ok_or_else(|| Error::config("exponent tuple is missing p".to_string()))?;
    match kind {
        ExpKind::Lebesgue => {
            if lambda.is_some() {
                return Err(Error::config("lebesgue tuple takes no lambda".to_string()));
            }
            ExponentTuple::lebesgue(group, beta, p)
        }
        ExpKind::Spanne => {
            let lambda =
                lambda.ok_or_else(|| Error::config("spanne tuple is missing lambda".to_string()))?;
            ExponentTuple::spanne(group, beta, p, lambda)
        }
        ExpKind::Adams => {
            let lambda =
                lambda.ok_or_else(|| Error::config("adams tuple is missing lambda".to_string()))?;
            ExponentTuple::adams(group, beta, p, lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_is_coherent() {
        let cfg = RunConfig::builtin();
        for group in ALL_GROUPS {
            let ctx = cfg.context(group).unwrap();
            assert!(!ctx.stencils.is_empty());
            assert!(ctx.core.len() > 0, "{group}: empty core");
            assert!(!cfg.exponents(group).is_empty());
        }
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn builtin_heisenberg_lattice_has_three_radii_and_a_solid_core() {
        let cfg = RunConfig::builtin();
        let spec = cfg.spec(Group::Heisenberg1).unwrap();
        assert_eq!(spec.len(), 25 * 25 * 201);
        let ctx = cfg.context(Group::Heisenberg1).unwrap();
        assert_eq!(ctx.stencils.len(), 3);
        assert!(ctx.stencils.iter().all(|st| !st.degenerate));
        assert!(ctx.core.len() >= 500, "core too thin: {}", ctx.core.len());
    }

    #[test]
    fn overrides_replace_defaults() {
        let text = "
[run]
seed = 12
mode = containing

[lattice.euclidean1]
h = 0.0625
extents = 2
margin = 1

[radii.euclidean1]
r0 = 0.125
k_max = 3

[exponents.euclidean1]
lebesgue = beta=0.5 p=1.5

[symbols]
symbol = power_gauge(beta=0.5)

[f_family]
f = delta
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 12);
        assert_eq!(cfg.mode, CenterMode::Containing);
        assert_eq!(cfg.lattice(Group::Euclidean1).h, 0.0625);
        assert_eq!(cfg.exponents(Group::Euclidean1).len(), 1);
        assert_eq!(cfg.symbols.len(), 1);
        assert_eq!(cfg.f_family.len(), 1);
        let q = cfg.exponents(Group::Euclidean1)[0].1.q;
        assert!((q - 6.0).abs() < 1e-12);
        // untouched groups keep builtin values
        assert_eq!(cfg.lattice(Group::Heisenberg1).h, 0.1);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_geometry() {
        assert!(RunConfig::parse("[run]\nspeed = 3\n").is_err());
        assert!(RunConfig::parse("[warp]\nx = 1\n").is_err());
        assert!(RunConfig::parse("[exponents.euclidean1]\nlebesgue = beta=0.5 p=3\n").is_err());
        // margin below largest radius
        let text = "[lattice.euclidean1]\nh = 0.03125\nextents = 2\nmargin = 0.5\n";
        assert!(RunConfig::parse(text).is_err());
    }
}
