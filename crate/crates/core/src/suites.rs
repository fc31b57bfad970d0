//! Verification suites: each one checks a family of inequalities or
//! identities satisfied by the discrete operators, against analytic bounds
//! derived from the calibration constants, frozen regression constants, or
//! exact arithmetic.

use crate::accum::Sum;
use crate::config::{ExpKind, RunConfig};
use crate::error::{Error, Result};
use crate::group::{calibrate, default_resolution, Calibration, Group};
use crate::lattice::{GridFunction, Index, RadiusFamily};
use crate::norms::{
    lip_beta_p, lip_beta_p_floor, lipschitz_seminorm, lp_norm, morrey_norm, morrey_norm_floor,
    weak_quasinorm, ExponentTuple,
};
use crate::operators::{
    commutator_maximal, fractional_maximal, local_maximal, local_maximal_with, maximal,
    nonlinear_commutator, subball_averages,
    CenterMode, CoreField, EvalContext, Translator,
};
use crate::report::{CheckClass, CheckReport};
use crate::symbols::{Symbol, TestFunction};
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::HashMap;
use std::time::Instant;

pub const SUITES: [&str; 8] = [
    "pointwise_domination",
    "strong_type",
    "weak_type",
    "morrey_spanne",
    "morrey_adams",
    "theorem3_functional",
    "seminorm_equivalence",
    "sign",
];

/// Previously observed suite constants; regression rows pin new runs to
/// these values with 10% slack. A missing entry fails its row, which is the
/// intended behavior for unvetted parameter combinations.
fn frozen_constant(suite: &str, group: Group, key: &str) -> Option<f64> {
    let _ = (suite, group, key);
    None
}

fn regression_bound(suite: &str, group: Group, key: &str) -> (f64, String) {
    match frozen_constant(suite, group, key) {
        Some(c) => (c * 1.1, format!("frozen={c}")),
        None => (f64::NAN, "frozen=missing".to_string()),
    }
}

pub struct GroupSuite<'a> {
    pub cfg: &'a RunConfig,
    pub group: Group,
    pub ctx: EvalContext,
    pub cal: Calibration,
    grids: RefCell<HashMap<String, GridFunction>>,
    seminorms: RefCell<HashMap<String, f64>>,
    commutators: RefCell<HashMap<String, CoreField>>,
}

impl<'a> GroupSuite<'a> {
    pub fn new(cfg: &'a RunConfig, group: Group) -> Result<GroupSuite<'a>> {
        let ctx = cfg.context(group)?;
        let cal = calibrate(group, default_resolution(group), cfg.seed)?;
        Ok(GroupSuite {
            cfg,
            group,
            ctx,
            cal,
            grids: RefCell::new(HashMap::new()),
            seminorms: RefCell::new(HashMap::new()),
            commutators: RefCell::new(HashMap::new()),
        })
    }

    /// Radii below this floor are swept for diagnostics but kept out of
    /// frozen constants: in a ball only a few cells wide, the discrete
    /// measure and the sampled oscillation both move with the spacing, so a
    /// value attained there cannot survive refinement. Calibrated per group
    /// against the half-spacing study.
    fn frozen_floor(&self) -> f64 {
        match self.group {
            Group::Euclidean1 => 0.25,
            Group::Euclidean2 => 0.25,
            Group::Heisenberg1 => 0.0,
        }
    }

    fn symbol_grid(&self, sym: &Symbol) -> Result<GridFunction> {
        let key = format!("sym:{}", sym.id());
        if let Some(g) = self.grids.borrow().get(&key) {
            return Ok(g.clone());
        }
        let g = sym.sample(self.ctx.spec)?;
        self.grids.borrow_mut().insert(key, g.clone());
        Ok(g)
    }

    fn test_grid(&self, f: &TestFunction) -> Result<GridFunction> {
        let key = format!("f:{}", f.id());
        if let Some(g) = self.grids.borrow().get(&key) {
            return Ok(g.clone());
        }
        let g = f.sample(self.ctx.spec)?;
        self.grids.borrow_mut().insert(key, g.clone());
        Ok(g)
    }

    fn seminorm(&self, sym: &Symbol, b: &GridFunction, beta: f64) -> Result<f64> {
        let key = format!("{}@{}", sym.id(), beta.to_bits());
        if let Some(v) = self.seminorms.borrow().get(&key) {
            return Ok(*v);
        }
        let (v, _) = lipschitz_seminorm(b, beta, self.cfg.seed)?;
        self.seminorms.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn commutator(&self, sym: &Symbol, f: &TestFunction) -> Result<CoreField> {
        let key = format!("{}|{}", sym.id(), f.id());
        if let Some(c) = self.commutators.borrow().get(&key) {
            return Ok(c.clone());
        }
        let bg = self.symbol_grid(sym)?;
        let fg = self.test_grid(f)?;
        let c = commutator_maximal(&fg, &bg, &self.ctx, self.cfg.mode)?;
        self.commutators.borrow_mut().insert(key, c.clone());
        Ok(c)
    }

    /// Symbols swept by the operator-norm suites, built at the tuple's order.
    fn tuple_symbols(&self, beta: f64) -> Vec<Symbol> {
        vec![
            Symbol::PowerGauge { beta },
            Symbol::RandomLipschitz { beta, seed: self.cfg.seed },
        ]
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        suite: &str,
        class: CheckClass,
        exps: [f64; 5],
        value: f64,
        bound: f64,
        detail: String,
        t0: Instant,
    ) -> CheckReport {
        CheckReport {
            suite: suite.to_string(),
            group: self.group,
            class,
            beta: exps[0],
            p: exps[1],
            q: exps[2],
            lambda: exps[3],
            mu: exps[4],
            value,
            bound,
            pass: class.passes(value, bound),
            runtime_ms: t0.elapsed().as_millis() as u64,
            detail,
            tag: String::new(),
        }
    }

    pub fn run(&self, suite: &str) -> Result<Vec<CheckReport>> {
        match suite {
            "pointwise_domination" => self.pointwise_domination(),
            "strong_type" => self.strong_type(),
            "weak_type" => self.weak_type(),
            "morrey_spanne" => self.morrey(ExpKind::Spanne),
            "morrey_adams" => self.morrey(ExpKind::Adams),
            "theorem3_functional" => self.theorem3(),
            "seminorm_equivalence" => self.seminorm_equivalence(),
            "sign" => self.sign(),
            other => Err(Error::config(format!("unknown suite {other:?}"))),
        }
    }

    pub fn run_all(&self) -> Result<Vec<CheckReport>> {
        let mut out = Vec::new();
        for suite in SUITES {
            out.extend(self.run(suite)?);
        }
        Ok(out)
    }

    /// `M_b f <= ||b|| (2 c0)^beta c1^(-beta/Q) * 1.1 * M_beta f` pointwise.
    ///
    /// For y in a ball of radius r containing x, `|b(x) - b(y)| <= ||b||
    /// (2 c0 r)^beta`, and `r^Q / |B|` stays close to `1/c1` over the family,
    /// so the calibrated factor holds with the 10% headroom in both center
    /// modes; centered mode has an extra `2^beta` of pure slack.
    fn pointwise_domination(&self) -> Result<Vec<CheckReport>> {
        let suite = "pointwise_domination";
        let q = self.group.homogeneous_dim() as f64;
        let mut out = Vec::new();
        let mut mbeta_cache: HashMap<(u64, String), CoreField> = HashMap::new();
        for sym in &self.cfg.symbols {
            if !sym.in_lipschitz_class() {
                continue;
            }
            let t0 = Instant::now();
            if matches!(sym, Symbol::Constant { .. }) {
                let mut value = 0.0f64;
                for tf in &self.cfg.f_family {
                    let mb = self.commutator(sym, tf)?;
                    for v in &mb.values {
                        value = value.max(v.abs());
                    }
                }
                out.push(self.row(
                    suite,
                    CheckClass::Identity,
                    [0.0; 5],
                    value,
                    0.0,
                    format!("symbol={} commutator_vanishes", sym.id()),
                    t0,
                ));
                continue;
            }
            let beta = sym.beta().unwrap();
            let b = self.symbol_grid(sym)?;
            let bnorm = self.seminorm(sym, &b, beta)?;
            let bound = bnorm * (2.0 * self.cal.c0).powf(beta) * self.cal.c1.powf(-beta / q) * 1.1;
            let mut value = 0.0f64;
            let mut worst_f = String::new();
            for tf in &self.cfg.f_family {
                let f = self.test_grid(tf)?;
                if f.values.iter().all(|v| *v == 0.0) {
                    return Err(Error::config(format!(
                        "test function {} is identically zero",
                        tf.id()
                    )));
                }
                let mb = self.commutator(sym, tf)?;
                let mbeta = match mbeta_cache.get(&(beta.to_bits(), tf.id())) {
                    Some(m) => m.clone(),
                    None => {
                        let m = fractional_maximal(&f, beta, &self.ctx, self.cfg.mode)?;
                        mbeta_cache.insert((beta.to_bits(), tf.id()), m.clone());
                        m
                    }
                };
                for (num, den) in mb.values.iter().zip(&mbeta.values) {
                    let r = if *den > 0.0 {
                        num / den
                    } else if *num == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    if r > value {
                        value = r;
                        worst_f = tf.id();
                    }
                }
            }
            out.push(self.row(
                suite,
                CheckClass::AnalyticBound,
                [beta, 0.0, 0.0, 0.0, 0.0],
                value,
                bound,
                format!("symbol={} seminorm={bnorm} worst_f={worst_f}", sym.id()),
                t0,
            ));
        }
        Ok(out)
    }

    /// `||M_b f||_q / ||f||_p` over the f-family for each Lebesgue tuple,
    /// pinned by regression, plus a dilation-drift row: the ratio is exactly
    /// scale-invariant when `1/q = 1/p - beta/Q` holds, so drift across
    /// lattice half-scalings detects a wrong exponent.
    fn strong_type(&self) -> Result<Vec<CheckReport>> {
        self.strong_type_rows(false)
    }

    /// `frozen_only` keeps just the tagged regression rows; the refinement
    /// study reruns those on the half-spacing lattice and has no use for
    /// the identity and rescaling rows, which cost most of a run.
    fn strong_type_rows(&self, frozen_only: bool) -> Result<Vec<CheckReport>> {
        let suite = "strong_type";
        let cell = self.ctx.spec.cell_measure();
        let mut out = Vec::new();
        for (kind, t) in self.cfg.exponents(self.group) {
            if *kind != ExpKind::Lebesgue {
                continue;
            }
            for sym in self.tuple_symbols(t.beta) {
                let t0 = Instant::now();
                let key = format!("{}|{}", sym.id(), tuple_key(*kind, t));
                let mut value = 0.0f64;
                let mut worst = String::new();
                for tf in &self.cfg.f_family {
                    // The one-cell spike never settles in L^p for p > 1: its
                    // ratio carries a residual power of the cell measure. It
                    // belongs to the weak endpoint, where the scaling is
                    // exact, not to a frozen strong-type constant.
                    if matches!(tf, TestFunction::DeltaBump) {
                        continue;
                    }
                    let f = self.test_grid(tf)?;
                    let mb = self.commutator(&sym, tf)?;
                    let ratio = lp_norm(&mb.values, cell, t.q)? / lp_norm(&f.values, cell, t.p)?;
                    if ratio > value {
                        value = ratio;
                        worst = tf.id();
                    }
                }
                let (bound, frozen) = regression_bound(suite, self.group, &key);
                out.push(
                    self.row(
                        suite,
                        CheckClass::Regression,
                        [t.beta, t.p, t.q, 0.0, 0.0],
                        value,
                        bound,
                        format!("{key} {frozen} worst_f={worst}"),
                        t0,
                    )
                    .tagged(&key),
                );
            }
            if frozen_only {
                continue;
            }
            out.push(self.constant_symbol_zero(suite, [t.beta, t.p, t.q, 0.0, 0.0], |mb| {
                lp_norm(&mb.values, cell, t.q)
            })?);
            let t0 = Instant::now();
            let (base, drift) = self.rescaling_drift(t.beta, |ctx, b, f| {
                let mb = commutator_maximal(f, b, ctx, self.cfg.mode)?;
                let c = ctx.spec.cell_measure();
                Ok(lp_norm(&mb.values, c, t.q)? / lp_norm(&f.values, c, t.p)?)
            })?;
            out.push(self.row(
                suite,
                CheckClass::AnalyticBound,
                [t.beta, t.p, t.q, 0.0, 0.0],
                drift,
                0.10,
                format!("rescaling_drift base={base}"),
                t0,
            ));
        }
        Ok(out)
    }

    /// A row asserting that the constant symbol sends the whole f-family to
    /// an exactly vanishing commutator norm.
    fn constant_symbol_zero(
        &self,
        suite: &str,
        exps: [f64; 5],
        norm: impl Fn(&CoreField) -> Result<f64>,
    ) -> Result<CheckReport> {
        let t0 = Instant::now();
        let sym = Symbol::Constant { c: 2.0 };
        let mut value = 0.0f64;
        for tf in &self.cfg.f_family {
            let mb = self.commutator(&sym, tf)?;
            value = value.max(norm(&mb)?);
        }
        Ok(self.row(
            suite,
            CheckClass::Identity,
            exps,
            value,
            0.0,
            "constant_symbol_zero".to_string(),
            t0,
        ))
    }

    /// Rerun a ratio on dilated copies of the problem: lattice half-scaled
    /// three times with the radius family and the symbol riding along, the
    /// test function carried by exact value copy.
    fn rescaling_drift(
        &self,
        beta: f64,
        eval: impl Fn(&EvalContext, &GridFunction, &GridFunction) -> Result<f64>,
    ) -> Result<(f64, f64)> {
        let sym = Symbol::PowerGauge { beta };
        let b0 = self.symbol_grid(&sym)?;
        let mut fs = Vec::new();
        for tf in &self.cfg.f_family {
            fs.push(self.test_grid(tf)?);
        }
        let mut base = 0.0f64;
        for f in &fs {
            base = base.max(eval(&self.ctx, &b0, f)?);
        }
        let mut ctx = EvalContext::new(self.ctx.spec, self.ctx.family)?;
        let mut drift = 0.0f64;
        for _ in 0..3 {
            let spec = ctx.spec.half_scale();
            let family = RadiusFamily::new(ctx.family.r0 / 2.0, ctx.family.k_max)?;
            ctx = EvalContext::new(spec, family)?;
            let b = sym.sample(ctx.spec)?;
            let mut scaled = 0.0f64;
            for f in fs.iter_mut() {
                *f = f.pullback_half_scale();
                scaled = scaled.max(eval(&ctx, &b, f)?);
            }
            drift = drift.max((scaled - base).abs() / base);
        }
        Ok((base, drift))
    }

    /// `sup_t t |{M_b f > t}|^((Q-beta)/Q) / ||f||_1`, the weak endpoint of
    /// the strong-type scale, evaluated exactly over the value distribution.
    fn weak_type(&self) -> Result<Vec<CheckReport>> {
        self.weak_type_rows(false)
    }

    fn weak_type_rows(&self, frozen_only: bool) -> Result<Vec<CheckReport>> {
        let suite = "weak_type";
        let q = self.group.homogeneous_dim() as f64;
        let cell = self.ctx.spec.cell_measure();
        let mut out = Vec::new();
        for (kind, t) in self.cfg.exponents(self.group) {
            if *kind != ExpKind::Lebesgue {
                continue;
            }
            let s = q / (q - t.beta);
            for sym in self.tuple_symbols(t.beta) {
                let t0 = Instant::now();
                let key = format!("{}|{}", sym.id(), tuple_key(*kind, t));
                let mut value = 0.0f64;
                let mut worst = String::new();
                for tf in &self.cfg.f_family {
                    let f = self.test_grid(tf)?;
                    let mb = self.commutator(&sym, tf)?;
                    let ratio =
                        weak_quasinorm(&mb.values, cell, s)? / lp_norm(&f.values, cell, 1.0)?;
                    if ratio > value {
                        value = ratio;
                        worst = tf.id();
                    }
                }
                let (bound, frozen) = regression_bound(suite, self.group, &key);
                out.push(
                    self.row(
                        suite,
                        CheckClass::Regression,
                        [t.beta, 1.0, s, 0.0, 0.0],
                        value,
                        bound,
                        format!("{key} {frozen} worst_f={worst}"),
                        t0,
                    )
                    .tagged(&key),
                );
            }
            if frozen_only {
                continue;
            }
            out.push(self.constant_symbol_zero(suite, [t.beta, 1.0, s, 0.0, 0.0], |mb| {
                weak_quasinorm(&mb.values, cell, s)
            })?);
            out.push(self.weak_homogeneity(t.beta, s)?);
        }
        Ok(out)
    }

    /// Doubling f doubles both sides of the weak-type ratio: the quotient
    /// must not move.
    fn weak_homogeneity(&self, beta: f64, s: f64) -> Result<CheckReport> {
        let t0 = Instant::now();
        let cell = self.ctx.spec.cell_measure();
        let b = self.symbol_grid(&Symbol::PowerGauge { beta })?;
        let f = self.test_grid(&TestFunction::DeltaBump)?;
        let f2 = f.map(|v| 2.0 * v)?;
        let ratio = |g: &GridFunction| -> Result<f64> {
            let mb = commutator_maximal(g, &b, &self.ctx, self.cfg.mode)?;
            Ok(weak_quasinorm(&mb.values, cell, s)? / lp_norm(&g.values, cell, 1.0)?)
        };
        let r1 = ratio(&f)?;
        let r2 = ratio(&f2)?;
        let value = (r2 / r1 - 1.0).abs();
        Ok(self.row(
            "weak_type",
            CheckClass::Identity,
            [beta, 1.0, s, 0.0, 0.0],
            value,
            1e-12,
            format!("doubling_invariance ratio={r1}"),
            t0,
        ))
    }

    /// Morrey mapping ratios. Spanne keeps the Morrey parameter on the
    /// target side; Adams rescales it to `mu = lambda q/p`. Both relations
    /// make the ratio exactly scale-invariant, checked by a drift row, and
    /// the Spanne block pins the indicator norm identity.
    fn morrey(&self, which: ExpKind) -> Result<Vec<CheckReport>> {
        self.morrey_rows(which, false)
    }

    fn morrey_rows(&self, which: ExpKind, frozen_only: bool) -> Result<Vec<CheckReport>> {
        let suite = match which {
            ExpKind::Spanne => "morrey_spanne",
            ExpKind::Adams => "morrey_adams",
            ExpKind::Lebesgue => return Err(Error::config("not a Morrey kind".to_string())),
        };
        let mut out = Vec::new();
        for (kind, t) in self.cfg.exponents(self.group) {
            if *kind != which {
                continue;
            }
            let target = if which == ExpKind::Adams { t.mu } else { t.lambda };
            for sym in self.tuple_symbols(t.beta) {
                let t0 = Instant::now();
                let key = format!("{}|{}", sym.id(), tuple_key(*kind, t));
                let mut value = 0.0f64;
                let mut worst = String::new();
                let floor = self.frozen_floor();
                for tf in &self.cfg.f_family {
                    // Same exclusion as the strong-type sup: the one-cell
                    // spike's ratio rides the cell measure. The ball sups on
                    // both sides trust resolved radii only.
                    if matches!(tf, TestFunction::DeltaBump) {
                        continue;
                    }
                    let f = self.test_grid(tf)?;
                    let mb = self.commutator(&sym, tf)?;
                    let (num, _) = morrey_norm_floor(&mb.to_grid(), t.q, target, &self.ctx, floor)?;
                    let (den, _) = morrey_norm_floor(&f, t.p, t.lambda, &self.ctx, floor)?;
                    let ratio = num / den;
                    if ratio > value {
                        value = ratio;
                        worst = tf.id();
                    }
                }
                let (bound, frozen) = regression_bound(suite, self.group, &key);
                out.push(
                    self.row(
                        suite,
                        CheckClass::Regression,
                        [t.beta, t.p, t.q, t.lambda, t.mu],
                        value,
                        bound,
                        format!("{key} {frozen} worst_f={worst}"),
                        t0,
                    )
                    .tagged(&key),
                );
            }
            if frozen_only {
                continue;
            }
            out.push(self.constant_symbol_zero(suite, [t.beta, t.p, t.q, t.lambda, t.mu], |mb| {
                Ok(morrey_norm(&mb.to_grid(), t.q, target, &self.ctx)?.0)
            })?);
            let t0 = Instant::now();
            let (base, drift) = self.rescaling_drift(t.beta, |ctx, b, f| {
                let mb = commutator_maximal(f, b, ctx, self.cfg.mode)?;
                let (num, _) = morrey_norm(&mb.to_grid(), t.q, target, ctx)?;
                let (den, _) = morrey_norm(f, t.p, t.lambda, ctx)?;
                Ok(num / den)
            })?;
            out.push(self.row(
                suite,
                CheckClass::AnalyticBound,
                [t.beta, t.p, t.q, t.lambda, t.mu],
                drift,
                0.10,
                format!("rescaling_drift base={base}"),
                t0,
            ));
            if which == ExpKind::Spanne {
                out.push(self.morrey_indicator_identity(t)?);
                out.push(self.lambda_zero_reduction()?);
            }
        }
        Ok(out)
    }

    /// At `lambda = 0` the Morrey mapping ratio collapses to the Lebesgue
    /// one up to the family balls not exhausting the lattice; the maxima
    /// agree because both are attained on concentrated data.
    fn lambda_zero_reduction(&self) -> Result<CheckReport> {
        let t0 = Instant::now();
        let t = self
            .cfg
            .exponents(self.group)
            .iter()
            .find(|(k, _)| *k == ExpKind::Lebesgue)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                Error::config(format!("{} has no Lebesgue tuple", self.group.name()))
            })?;
        let sym = Symbol::PowerGauge { beta: t.beta };
        let cell = self.ctx.spec.cell_measure();
        let mut strong = 0.0f64;
        let mut zero = 0.0f64;
        for tf in &self.cfg.f_family {
            let f = self.test_grid(tf)?;
            let mb = self.commutator(&sym, tf)?;
            strong = strong.max(lp_norm(&mb.values, cell, t.q)? / lp_norm(&f.values, cell, t.p)?);
            let (num, _) = morrey_norm(&mb.to_grid(), t.q, 0.0, &self.ctx)?;
            let (den, _) = morrey_norm(&f, t.p, 0.0, &self.ctx)?;
            zero = zero.max(num / den);
        }
        let value = (zero / strong - 1.0).abs();
        Ok(self.row(
            "morrey_spanne",
            CheckClass::AnalyticBound,
            [t.beta, t.p, t.q, 0.0, 0.0],
            value,
            0.02,
            format!("lambda_zero_reduction morrey0={zero:.6e} lebesgue={strong:.6e}"),
            t0,
        ))
    }

    /// `||chi_B||_{p,lambda} = |B|^((1 - lambda/Q)/p)`, attained at `B`.
    fn morrey_indicator_identity(&self, t: &ExponentTuple) -> Result<CheckReport> {
        let t0 = Instant::now();
        let q = self.group.homogeneous_dim() as f64;
        let r = self.ctx.family.r0;
        let chi = self.test_grid(&TestFunction::BallIndicator { r })?;
        let (val, witness) = morrey_norm(&chi, t.p, t.lambda, &self.ctx)?;
        let m = self.ctx.stencils[0].discrete_measure();
        let expect = m.powf((1.0 - t.lambda / q) / t.p);
        let err = (val - expect).abs() / expect;
        let witness_ok = witness.center == [0, 0, 0] && witness.radius == r;
        let value = if witness_ok { err } else { f64::INFINITY };
        Ok(self.row(
            "morrey_spanne",
            CheckClass::Identity,
            [0.0, t.p, 0.0, t.lambda, 0.0],
            value,
            1e-12,
            format!(
                "indicator_identity r={r} witness_center={:?} witness_radius={}",
                witness.center, witness.radius
            ),
            t0,
        ))
    }

    /// The ball functional `F(B) = |B|^(-beta/Q) (avg_B |b - M_B b|^q)^(1/q)`
    /// over every family ball: its max is pinned by regression for class
    /// symbols and must stay flat across dyadic radii, while the spike
    /// symbol must concentrate at small radii. The mean-oscillation split
    /// `sum_E |b - b_B| = sum_F |b - b_B|` recombines exactly on every ball.
    fn theorem3(&self) -> Result<Vec<CheckReport>> {
        let suite = "theorem3_functional";
        let qexp = self
            .cfg
            .exponents(self.group)
            .iter()
            .find(|(k, _)| *k == ExpKind::Lebesgue)
            .map(|(_, t)| t.q)
            .ok_or_else(|| {
                Error::config(format!("{} has no Lebesgue tuple to set q", self.group.name()))
            })?;
        let mut out = Vec::new();
        for sym in &self.cfg.symbols {
            let t0 = Instant::now();
            let beta = sym.beta().unwrap_or(0.5);
            let b = self.symbol_grid(sym)?;
            let frozen_sym = sym.in_lipschitz_class() && !matches!(sym, Symbol::Constant { .. });
            let floor = if frozen_sym { self.frozen_floor() } else { 0.0 };
            let m = theorem3_metrics(&b, beta, qexp, &self.ctx, floor)?;
            let key = sym.id();
            if matches!(sym, Symbol::Constant { .. }) {
                out.push(self.row(
                    suite,
                    CheckClass::Identity,
                    [beta, 0.0, qexp, 0.0, 0.0],
                    m.max,
                    0.0,
                    format!("symbol={key} functional_vanishes"),
                    t0,
                ));
                continue;
            }
            if sym.in_lipschitz_class() {
                let (bound, frozen) = regression_bound(suite, self.group, &key);
                out.push(
                    self.row(
                        suite,
                        CheckClass::Regression,
                        [beta, 0.0, qexp, 0.0, 0.0],
                        m.max,
                        bound,
                        format!(
                            "symbol={key} {frozen} floor={floor} witness={:?}@r={} chain={:.6e}",
                            m.witness.0, m.witness.1, m.chain
                        ),
                        t0,
                    )
                    .tagged(&key),
                );
                // The flatness bound 2 is asserted for the gauge power only;
                // other class symbols are scale-flat in practice but carry no
                // such constant, so their spread is pinned by regression.
                let spread_row = if matches!(sym, Symbol::PowerGauge { .. }) {
                    self.row(
                        suite,
                        CheckClass::AnalyticBound,
                        [beta, 0.0, qexp, 0.0, 0.0],
                        m.spread(),
                        2.0,
                        format!("symbol={key} radius_spread {}", m.sups_detail()),
                        t0,
                    )
                } else {
                    let skey = format!("{key}|spread");
                    let (sbound, sfrozen) = regression_bound(suite, self.group, &skey);
                    self.row(
                        suite,
                        CheckClass::Regression,
                        [beta, 0.0, qexp, 0.0, 0.0],
                        m.spread_over(floor),
                        sbound,
                        format!(
                            "symbol={key} radius_spread {sfrozen} floor={floor} {}",
                            m.sups_detail()
                        ),
                        t0,
                    )
                    .tagged(&skey)
                };
                out.push(spread_row);
            } else {
                out.push(self.row(
                    suite,
                    CheckClass::Diagnostic,
                    [beta, 0.0, qexp, 0.0, 0.0],
                    m.spread(),
                    4.0,
                    format!("symbol={key} radius_spread {}", m.sups_detail()),
                    t0,
                ));
            }
            out.push(self.row(
                suite,
                CheckClass::Identity,
                [beta, 0.0, qexp, 0.0, 0.0],
                m.imbalance,
                1e-12,
                format!("symbol={key} split_recombination"),
                t0,
            ));
        }
        Ok(out)
    }

    /// Two-sided comparison of the ball-oscillation seminorm with the pair
    /// seminorm. The forward direction carries an analytic constant; the
    /// reverse constant is theorem content, pinned by regression.
    fn seminorm_equivalence(&self) -> Result<Vec<CheckReport>> {
        self.seminorm_equivalence_rows(false)
    }

    fn seminorm_equivalence_rows(&self, frozen_only: bool) -> Result<Vec<CheckReport>> {
        let suite = "seminorm_equivalence";
        let q = self.group.homogeneous_dim() as f64;
        let mut out = Vec::new();
        for sym in &self.cfg.symbols {
            if !sym.in_lipschitz_class() || (frozen_only && matches!(sym, Symbol::Constant { .. }))
            {
                continue;
            }
            let t0 = Instant::now();
            let beta = sym.beta().unwrap_or(0.5);
            let b = self.symbol_grid(sym)?;
            let bnorm = self.seminorm(sym, &b, beta)?;
            if matches!(sym, Symbol::Constant { .. }) {
                let osc = lip_beta_p(&b, beta, 1.0, &self.ctx)?;
                out.push(self.row(
                    suite,
                    CheckClass::Identity,
                    [beta, 1.0, 0.0, 0.0, 0.0],
                    bnorm.max(osc),
                    0.0,
                    format!("symbol={} both_seminorms_vanish", sym.id()),
                    t0,
                ));
                continue;
            }
            if !frozen_only {
                let osc = lip_beta_p(&b, beta, 1.0, &self.ctx)?;
                let forward = osc / bnorm;
                let fbound = (2.0 * self.cal.c0).powf(beta) * self.cal.c1.powf(-beta / q) * 1.1;
                out.push(self.row(
                    suite,
                    CheckClass::AnalyticBound,
                    [beta, 1.0, 0.0, 0.0, 0.0],
                    forward,
                    fbound,
                    format!("forward symbol={} osc={osc} pair={bnorm}", sym.id()),
                    t0,
                ));
            }
            let key = sym.id();
            // The reverse constant is frozen, so its oscillation sup only
            // trusts resolved radii; the forward row keeps the full family,
            // where the analytic bound holds at any spacing.
            let floor = self.frozen_floor();
            let (osc_frozen, osc_ball) = lip_beta_p_floor(&b, beta, 1.0, &self.ctx, floor)?;
            let reverse = bnorm / osc_frozen;
            let (bound, frozen) = regression_bound(suite, self.group, &key);
            out.push(
                self.row(
                    suite,
                    CheckClass::Regression,
                    [beta, 1.0, 0.0, 0.0, 0.0],
                    reverse,
                    bound,
                    format!(
                        "reverse symbol={key} {frozen} floor={floor} osc={osc_frozen:.9e} \
                         ball={:?}@{}",
                        osc_ball.center, osc_ball.radius
                    ),
                    t0,
                )
                .tagged(&key),
            );
        }
        Ok(out)
    }

    /// Sign structure of the symbol: the averaged negative part vanishes for
    /// nonnegative symbols and is controlled by `|M_B b - b|` ball-by-ball
    /// for signed ones; nonnegative symbols keep the nonlinear commutator
    /// under the maximal commutator while a signed witness breaks that; and
    /// two exact fixed-point identities pin the operators themselves.
    fn sign(&self) -> Result<Vec<CheckReport>> {
        let suite = "sign";
        let mut out = Vec::new();
        for sym in &self.cfg.symbols {
            let t0 = Instant::now();
            let b = self.symbol_grid(sym)?;
            if b.values.iter().any(|v| *v < 0.0) {
                continue;
            }
            let beta = sym.beta().unwrap_or(0.5);
            let value = self.max_ball_avg_neg(&b);
            out.push(self.row(
                suite,
                CheckClass::Identity,
                [beta, 0.0, 0.0, 0.0, 0.0],
                value,
                0.0,
                format!("symbol={} negative_part_vanishes", sym.id()),
                t0,
            ));
        }
        for sym in &self.cfg.symbols {
            if !sym.in_lipschitz_class() {
                continue;
            }
            let t0 = Instant::now();
            let b = self.symbol_grid(sym)?;
            if b.values.iter().any(|v| *v < 0.0) {
                continue;
            }
            let beta = sym.beta().unwrap_or(0.5);
            let mut value = f64::NEG_INFINITY;
            let mut worst = String::new();
            for tf in &self.cfg.f_family {
                let f = self.test_grid(tf)?;
                let nl = nonlinear_commutator(&f, &b, &self.ctx, self.cfg.mode)?;
                let mb = self.commutator(sym, tf)?;
                for (n, m) in nl.values.iter().zip(&mb.values) {
                    let excess = n.abs() - m;
                    if excess > value {
                        value = excess;
                        worst = tf.id();
                    }
                }
            }
            out.push(self.row(
                suite,
                CheckClass::Identity,
                [beta, 0.0, 0.0, 0.0, 0.0],
                value,
                1e-13,
                format!("symbol={} nonnegative_domination worst_f={worst}", sym.id()),
                t0,
            ));
        }
        for (name, b) in self.signed_symbols()? {
            let t0 = Instant::now();
            let (gap, neg_side, dev_side) = self.signed_chain(&b)?;
            out.push(self.row(
                suite,
                CheckClass::Identity,
                [0.5, 0.0, 0.0, 0.0, 0.0],
                gap,
                1e-12,
                format!("signed_chain symbol={name} max_avg_neg={neg_side} max_avg_dev={dev_side}"),
                t0,
            ));
        }
        out.push(self.signed_witness()?);
        out.push(self.indicator_fixed_point()?);
        out.push(self.local_vs_global()?);
        Ok(out)
    }

    /// Max over family balls of the averaged negative part of b.
    fn max_ball_avg_neg(&self, b: &GridFunction) -> f64 {
        let spec = &self.ctx.spec;
        let mut value = 0.0f64;
        for st in &self.ctx.stencils {
            for z in self.ctx.core.indices() {
                let tr = Translator::new(spec, *z);
                let mut acc = Sum::new();
                for o in &st.offsets {
                    acc.add((-b.values[tr.linear(*o)]).max(0.0));
                }
                value = value.max(acc.value() / st.count() as f64);
            }
        }
        value
    }

    /// Signed symbols exercised by the chain inequality.
    fn signed_symbols(&self) -> Result<Vec<(String, GridFunction)>> {
        let base = self.symbol_grid(&Symbol::PowerGauge { beta: 0.5 })?;
        let shift = 0.5 * base.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let gauge_minus = base.map(|v| v - shift)?;
        let chi = self.test_grid(&TestFunction::BallIndicator { r: 0.5 })?;
        let neg_chi = chi.map(|v| -v)?;
        let odd = GridFunction::sample(self.ctx.spec, |p| p[0])?;
        Ok(vec![
            (format!("gauge_minus({shift})"), gauge_minus),
            ("neg_indicator(0.5)".to_string(), neg_chi),
            ("odd_coordinate".to_string(), odd),
        ])
    }

    /// `avg_B b^- <= avg_B |M_B b - b|` for every family ball: the
    /// inequality holds pointwise because `M_B b >= 0`, so the averaged gap
    /// can only be floating-point noise.
    fn signed_chain(&self, b: &GridFunction) -> Result<(f64, f64, f64)> {
        let ctx = &self.ctx;
        let slabs = subball_averages(b, ctx)?;
        let radii = ctx.family.radii();
        let mut gap = f64::NEG_INFINITY;
        let mut max_neg = 0.0f64;
        let mut max_dev = 0.0f64;
        for &r in &radii {
            let per_ball: Vec<(f64, f64)> = ctx
                .core
                .indices()
                .par_iter()
                .map(|&z| {
                    let lm = local_maximal_with(z, r, ctx, &slabs).expect("admissible ball");
                    debug_assert_eq!(lm.uncovered, 0);
                    let mut neg = Sum::new();
                    let mut dev = Sum::new();
                    for &(lin, v) in &lm.entries {
                        neg.add((-b.values[lin]).max(0.0));
                        dev.add((v - b.values[lin]).abs());
                    }
                    let n = lm.entries.len() as f64;
                    (neg.value() / n, dev.value() / n)
                })
                .collect();
            for (neg, dev) in per_ball {
                gap = gap.max(neg - dev);
                max_neg = max_neg.max(neg);
                max_dev = max_dev.max(dev);
            }
        }
        Ok((gap, max_neg, max_dev))
    }

    /// A signed symbol must break the nonlinear-commutator domination.
    fn signed_witness(&self) -> Result<CheckReport> {
        let t0 = Instant::now();
        let beta = 0.5;
        let base = self.symbol_grid(&Symbol::PowerGauge { beta })?;
        let shift = 0.5 * base.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let b = base.map(|v| v - shift)?;
        let f = self.test_grid(&TestFunction::DeltaBump)?;
        let nl = nonlinear_commutator(&f, &b, &self.ctx, self.cfg.mode)?;
        let mb = commutator_maximal(&f, &b, &self.ctx, self.cfg.mode)?;
        let value = nl
            .values
            .iter()
            .zip(&mb.values)
            .fold(f64::NEG_INFINITY, |acc, (n, m)| acc.max(n.abs() - m));
        Ok(self.row(
            "sign",
            CheckClass::Diagnostic,
            [beta, 0.0, 0.0, 0.0, 0.0],
            value,
            1e-9,
            format!("signed_witness shift={shift} f=delta"),
            t0,
        ))
    }

    /// In containing mode the operator applied to a ball indicator equals 1
    /// on the ball itself, bitwise.
    fn indicator_fixed_point(&self) -> Result<CheckReport> {
        let t0 = Instant::now();
        let radii = self.ctx.family.radii();
        let r = *radii.last().unwrap();
        let chi = self.test_grid(&TestFunction::BallIndicator { r })?;
        let m = maximal(&chi, &self.ctx, CenterMode::Containing)?;
        let g = self.group;
        let mut value = 0.0f64;
        let mut seen = 0usize;
        for (idx, v) in m.indices.iter().zip(&m.values) {
            if g.gauge(self.ctx.spec.point(*idx)) < r {
                seen += 1;
                value = value.max((v - 1.0).abs());
            }
        }
        Ok(self.row(
            "sign",
            CheckClass::Identity,
            [0.0; 5],
            value,
            0.0,
            format!("indicator_fixed_point r={r} points={seen}"),
            t0,
        ))
    }

    /// `M_B0 b <= M(b chi_B0)` pointwise on the base ball, bitwise, with the
    /// global side computed in containing mode.
    fn local_vs_global(&self) -> Result<CheckReport> {
        let t0 = Instant::now();
        let radii = self.ctx.family.radii();
        let r = *radii.last().unwrap();
        let b = self.symbol_grid(&Symbol::PowerGauge { beta: 0.5 })?;
        let chi = self.test_grid(&TestFunction::BallIndicator { r })?;
        let bchi = b.zip(&chi, |x, y| x * y)?;
        let local = local_maximal(&b, [0, 0, 0], r, &self.ctx)?;
        let global = maximal(&bchi, &self.ctx, CenterMode::Containing)?.to_grid();
        let mut value = f64::NEG_INFINITY;
        let mut equal = 0usize;
        let mut compared = 0usize;
        for &(lin, v) in &local.entries {
            if !self.ctx.core.contains_linear(lin) {
                continue;
            }
            compared += 1;
            let excess = v - global.values[lin];
            if excess == 0.0 {
                equal += 1;
            }
            value = value.max(excess);
        }
        if compared == 0 {
            return Err(Error::config("base ball misses the evaluation core".to_string()));
        }
        Ok(self.row(
            "sign",
            CheckClass::Identity,
            [0.0; 5],
            value,
            0.0,
            format!(
                "local_vs_global r={r} compared={compared} equal={equal} uncovered={}",
                local.uncovered
            ),
            t0,
        ))
    }
}

pub struct Theorem3Metrics {
    pub max: f64,
    pub radius_sups: Vec<(f64, f64)>,
    pub witness: (Index, f64),
    pub imbalance: f64,
    pub chain: f64,
    /// Strongest balls, ordered by functional value.
    pub top: Vec<(Index, f64, f64)>,
}

impl Theorem3Metrics {
    pub fn spread(&self) -> f64 {
        self.spread_over(0.0)
    }

    /// Spread over the radii at or above `floor`.
    pub fn spread_over(&self, floor: f64) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &(r, s) in &self.radius_sups {
            if r < floor {
                continue;
            }
            lo = lo.min(s);
            hi = hi.max(s);
        }
        hi / lo
    }

    fn sups_detail(&self) -> String {
        self.radius_sups
            .iter()
            .map(|(r, s)| format!("S({r})={s:.6e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Evaluate the ball functional over every family ball with core center,
/// track per-radius sups, and split the mean oscillation on each ball into
/// its below-mean and above-mean halves, which must carry equal mass.
pub fn theorem3_metrics(
    b: &GridFunction,
    beta: f64,
    qexp: f64,
    ctx: &EvalContext,
    floor: f64,
) -> Result<Theorem3Metrics> {
    if ctx.stencils.len() < 3 {
        return Err(Error::config(format!(
            "ball functional needs at least 3 dyadic radii, got {}",
            ctx.stencils.len()
        )));
    }
    let spec = &ctx.spec;
    let q = spec.group.homogeneous_dim() as f64;
    let radii = ctx.family.radii();
    let slabs = subball_averages(b, ctx)?;
    let mut max = f64::NEG_INFINITY;
    let mut witness: Option<(Index, f64)> = None;
    let mut radius_sups = Vec::new();
    let mut imbalance = 0.0f64;
    let mut ranked: Vec<(Index, f64, f64)> = Vec::new();
    for (st, &r) in ctx.stencils.iter().zip(&radii) {
        let w = st.discrete_measure().powf(-beta / q);
        let vals: Vec<(f64, f64)> = ctx
            .core
            .indices()
            .par_iter()
            .map(|&z| {
                let lm = local_maximal_with(z, r, ctx, &slabs).expect("admissible ball");
                debug_assert_eq!(lm.uncovered, 0);
                let n = lm.entries.len() as f64;
                let mut osc = Sum::new();
                let mut mean = Sum::new();
                for &(lin, v) in &lm.entries {
                    osc.add((b.values[lin] - v).abs().powf(qexp));
                    mean.add(b.values[lin]);
                }
                let f_val = w * (osc.value() / n).powf(1.0 / qexp);
                let b_bar = mean.value() / n;
                let mut pos = Sum::new();
                let mut neg = Sum::new();
                for &(lin, _) in &lm.entries {
                    let d = b.values[lin] - b_bar;
                    pos.add(d.max(0.0));
                    neg.add((-d).max(0.0));
                }
                let total = pos.value() + neg.value();
                let imb = (pos.value() - neg.value()).abs() / total.max(1e-300);
                (f_val, imb)
            })
            .collect();
        let mut radius_sup = 0.0f64;
        let mut at_radius: Vec<(Index, f64, f64)> = Vec::new();
        for (z, (v, imb)) in ctx.core.indices().iter().zip(vals) {
            radius_sup = radius_sup.max(v);
            imbalance = imbalance.max(imb);
            if r >= floor && v > max {
                max = v;
                witness = Some((*z, r));
            }
            at_radius.push((*z, r, v));
        }
        at_radius.sort_by(|a, b| b.2.total_cmp(&a.2));
        at_radius.truncate(TOP_BALLS_PER_RADIUS);
        ranked.extend(at_radius);
        radius_sups.push((r, radius_sup));
    }
    let (wz, wr) = witness
        .ok_or_else(|| Error::config("no family radius clears the frozen floor".to_string()))?;
    let lm = local_maximal_with(wz, wr, ctx, &slabs)?;
    let n = lm.entries.len() as f64;
    let mut mean = Sum::new();
    for &(lin, _) in &lm.entries {
        mean.add(b.values[lin]);
    }
    let b_bar = mean.value() / n;
    let mut below = Sum::new();
    for &(lin, _) in &lm.entries {
        below.add((b_bar - b.values[lin]).max(0.0));
    }
    let m = n * spec.cell_measure();
    let chain = 2.0 * m.powf(-(1.0 + beta / q)) * spec.cell_measure() * below.value();
    Ok(Theorem3Metrics {
        max,
        radius_sups,
        witness: (wz, wr),
        imbalance,
        chain,
        top: ranked,
    })
}

/// Balls kept per radius for cross-lattice comparison: enough to cover the
/// basin of each per-radius maximizer without rerunning the full sweep at
/// the finer spacing.
const TOP_BALLS_PER_RADIUS: usize = 8;

/// The functional at one ball, sharing precomputed subball averages.
fn ball_functional_value(
    b: &GridFunction,
    center: Index,
    radius: f64,
    beta: f64,
    qexp: f64,
    ctx: &EvalContext,
    slabs: &[Vec<f64>],
) -> Result<f64> {
    let q = ctx.spec.group.homogeneous_dim() as f64;
    let ri = ctx
        .family
        .radii()
        .iter()
        .position(|r| *r == radius)
        .ok_or_else(|| Error::config(format!("radius {radius} is not in the family")))?;
    let w = ctx.stencils[ri].discrete_measure().powf(-beta / q);
    let lm = local_maximal_with(center, radius, ctx, slabs)?;
    let n = lm.entries.len() as f64;
    let mut osc = Sum::new();
    for &(lin, v) in &lm.entries {
        osc.add((b.values[lin] - v).abs().powf(qexp));
    }
    Ok(w * (osc.value() / n).powf(1.0 / qexp))
}

fn tuple_key(kind: ExpKind, t: &ExponentTuple) -> String {
    match kind {
        ExpKind::Lebesgue => format!("lebesgue(beta={},p={})", t.beta, t.p),
        ExpKind::Spanne => format!("spanne(beta={},p={},lambda={})", t.beta, t.p, t.lambda),
        ExpKind::Adams => format!("adams(beta={},p={},lambda={})", t.beta, t.p, t.lambda),
    }
}

/// Discretization drift: recompute every frozen regression constant on the
/// half-spacing lattice (same domain, same radii, same seeds) and compare.
/// Ratio suites rerun whole; the ball functional reruns on the recorded
/// strongest balls, whose basins carry the max and the per-radius sups.
pub fn refinement_drift(cfg: &RunConfig, group: Group) -> Result<Vec<CheckReport>> {
    let coarse = GroupSuite::new(cfg, group)?;
    let fcfg = cfg.refined(group);
    let fine = GroupSuite::new(&fcfg, group)?;
    let mut out = Vec::new();

    let drift_row =
        |name: &str, tag: &str, a: f64, b: f64, ctx: &str, exps: [f64; 5], t0: Instant| {
            let drift = (b - a).abs() / a.abs().max(1e-300);
            CheckReport {
                suite: "refinement".to_string(),
                group,
                class: CheckClass::AnalyticBound,
                beta: exps[0],
                p: exps[1],
                q: exps[2],
                lambda: exps[3],
                mu: exps[4],
                value: drift,
                bound: 0.10,
                pass: CheckClass::AnalyticBound.passes(drift, 0.10),
                runtime_ms: t0.elapsed().as_millis() as u64,
                detail: format!("{name} {tag} coarse={a:.9e} refined={b:.9e}{ctx}"),
                tag: format!("{name}|{tag}"),
            }
        };

    type SuiteRunner = Box<dyn for<'b> Fn(&GroupSuite<'b>) -> Result<Vec<CheckReport>>>;
    let suites: Vec<(&str, SuiteRunner)> = vec![
        ("strong_type", Box::new(|s: &GroupSuite| s.strong_type_rows(true))),
        ("weak_type", Box::new(|s: &GroupSuite| s.weak_type_rows(true))),
        ("morrey_spanne", Box::new(|s: &GroupSuite| s.morrey_rows(ExpKind::Spanne, true))),
        ("morrey_adams", Box::new(|s: &GroupSuite| s.morrey_rows(ExpKind::Adams, true))),
        (
            "seminorm_equivalence",
            Box::new(|s: &GroupSuite| s.seminorm_equivalence_rows(true)),
        ),
    ];
    for (name, run) in &suites {
        let t0 = Instant::now();
        let rows_c = run(&coarse)?;
        let rows_f = run(&fine)?;
        for rc in rows_c.iter().filter(|r| r.class == CheckClass::Regression && !r.tag.is_empty())
        {
            let rf = rows_f.iter().find(|r| r.tag == rc.tag).ok_or_else(|| {
                Error::config(format!("refined run lost the {name} check {}", rc.tag))
            })?;
            out.push(drift_row(
                name,
                &rc.tag,
                rc.value,
                rf.value,
                &format!(" coarse[{}] refined[{}]", rc.detail, rf.detail),
                [rc.beta, rc.p, rc.q, rc.lambda, rc.mu],
                t0,
            ));
        }
    }

    let qexp = cfg
        .exponents(group)
        .iter()
        .find(|(k, _)| *k == ExpKind::Lebesgue)
        .map(|(_, t)| t.q)
        .ok_or_else(|| {
            Error::config(format!("{} has no Lebesgue tuple to set q", group.name()))
        })?;
    let cs = coarse.ctx.spec;
    let fs = fine.ctx.spec;
    let mut scale = [1i64; 3];
    for (a, s) in scale.iter_mut().enumerate().take(cs.dim()) {
        *s = (cs.spacing(a) / fs.spacing(a)).round() as i64;
    }
    let floor = coarse.frozen_floor();
    for sym in &cfg.symbols {
        if matches!(sym, Symbol::Constant { .. }) || !sym.in_lipschitz_class() {
            continue;
        }
        let t0 = Instant::now();
        let beta = sym.beta().unwrap_or(0.5);
        let bc = coarse.symbol_grid(sym)?;
        let mc = theorem3_metrics(&bc, beta, qexp, &coarse.ctx, floor)?;
        let bf = fine.symbol_grid(sym)?;
        let slabs = subball_averages(&bf, &fine.ctx)?;
        let mut fine_max = 0.0f64;
        // Per radius in family order: the coarse sup over the kept balls and
        // the refined value over the same balls. Sub-floor radii ride along
        // for the detail line only.
        let mut sups: Vec<(f64, f64, f64)> = Vec::new();
        for &(z, r, v) in &mc.top {
            let zf = [z[0] * scale[0], z[1] * scale[1], z[2] * scale[2]];
            let fv = ball_functional_value(&bf, zf, r, beta, qexp, &fine.ctx, &slabs)?;
            if r >= floor {
                fine_max = fine_max.max(fv);
            }
            if sups.last().is_none_or(|e| e.0 != r) {
                sups.push((r, 0.0, 0.0));
            }
            let e = sups.last_mut().expect("just pushed");
            e.1 = e.1.max(v);
            e.2 = e.2.max(fv);
        }
        let table = sups
            .iter()
            .map(|(r, c, f)| format!("S({r})={c:.3e}->{f:.3e}"))
            .collect::<Vec<_>>()
            .join(" ");
        let key = sym.id();
        out.push(drift_row(
            "theorem3_functional",
            &format!("{key} floor={floor}"),
            mc.max,
            fine_max,
            &format!(" {table}"),
            [beta, 0.0, qexp, 0.0, 0.0],
            t0,
        ));
        if !matches!(sym, Symbol::PowerGauge { .. }) {
            let mut lo = (f64::INFINITY, f64::INFINITY);
            let mut hi = (0.0f64, 0.0f64);
            for &(r, a, b) in &sups {
                if r < floor {
                    continue;
                }
                lo = (lo.0.min(a), lo.1.min(b));
                hi = (hi.0.max(a), hi.1.max(b));
            }
            out.push(drift_row(
                "theorem3_functional",
                &format!("{key}|spread floor={floor}"),
                hi.0 / lo.0,
                hi.1 / lo.1,
                "",
                [beta, 0.0, qexp, 0.0, 0.0],
                t0,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cfg() -> RunConfig {
        RunConfig::parse(
            "
[symbols]
symbol = power_gauge(beta=0.5)
symbol = constant(c=2)

[f_family]
f = delta
f = ball(r=0.5)
",
        )
        .unwrap()
    }

    #[test]
    fn pointwise_domination_clears_its_bound_on_the_line() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        let rows = suite.run("pointwise_domination").unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.pass, "{}", row.record_line());
        }
        assert!(rows.iter().any(|r| r.value > 0.0));
    }

    #[test]
    fn sign_suite_identities_hold_on_the_line() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        let rows = suite.run("sign").unwrap();
        for row in &rows {
            assert!(row.pass, "{}", row.record_line());
        }
        let witness = rows
            .iter()
            .find(|r| r.detail.starts_with("signed_witness"))
            .unwrap();
        assert!(witness.value > 1e-3, "violation too small: {}", witness.value);
    }

    #[test]
    fn theorem3_balance_is_exact_and_spread_is_tight() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        let rows = suite.run("theorem3_functional").unwrap();
        for row in rows.iter().filter(|r| r.class != CheckClass::Regression) {
            assert!(row.pass, "{}", row.record_line());
        }
        assert!(rows
            .iter()
            .any(|r| r.detail.contains("radius_spread") && r.value > 1.0));
    }

    #[test]
    fn rescaling_leaves_the_strong_type_ratio_in_place() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        let rows = suite.run("strong_type").unwrap();
        let drift = rows
            .iter()
            .find(|r| r.detail.starts_with("rescaling_drift"))
            .unwrap();
        assert!(drift.pass, "{}", drift.record_line());
        assert!(drift.value < 1e-10, "drift should be fp noise: {}", drift.value);
    }

    #[test]
    fn morrey_indicator_identity_holds_on_the_line() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        let rows = suite.run("morrey_spanne").unwrap();
        let ident = rows
            .iter()
            .find(|r| r.detail.starts_with("indicator_identity"))
            .unwrap();
        assert!(ident.pass, "{}", ident.record_line());
    }

    #[test]
    fn unknown_suite_is_refused() {
        let cfg = line_cfg();
        let suite = GroupSuite::new(&cfg, Group::Euclidean1).unwrap();
        assert!(suite.run("warp_drive").is_err());
    }
}
