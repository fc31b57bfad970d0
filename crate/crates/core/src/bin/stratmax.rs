//! Command line front end: calibration, single-operator runs, norm
//! evaluation, the verification suites, and the lattice refinement study.

use std::path::{Path, PathBuf};

use stratmax::config::RunConfig;
use stratmax::error::{Error, Result};
use stratmax::group::{calibrate, default_resolution, fmt_float, write_calibration_cache};
use stratmax::norms::{lip_beta_p, lipschitz_seminorm, lp_norm, morrey_norm, weak_quasinorm};
use stratmax::operators::{
    commutator_maximal, fractional_maximal, local_maximal, maximal, nonlinear_commutator,
};
use stratmax::report::{csv_string, norm_record, CheckReport};
use stratmax::suites::{refinement_drift, GroupSuite, SUITES};
use stratmax::{CenterMode, EvalContext, GridFunction, Group, Index, Symbol};

const USAGE: &str = "\
usage: stratmax <command> [flags]

commands:
  calibrate                compute group constants, print cache lines
  op <name> <grid-file>    apply an operator: M, Malpha, Mb, bM, MB0
  norm <kind> <grid-file>  evaluate a functional: lp, weak, morrey, lip_pair, lip_ball
  verify                   run every verification suite
  refine                   recompute representative ratios on the half-spacing lattice

flags:
  --config <path>    run configuration file (defaults to the built-in run)
  --group <name>     euclidean1 | euclidean2 | heisenberg1 (default: all three)
  --seed <u64>       override the configured seed
  --workers <n>      worker threads; affects runtime only, never output bytes
  --out <dir>        directory for grids, caches, records and CSV reports
  --mode <m>         centered | containing (op; default from config)
  --alpha <a>        fractional order for Malpha
  --symbol <id>      symbol for Mb / bM, e.g. power_gauge(beta=0.5)
  --b <grid-file>    symbol read from a grid file instead of --symbol
  --center <i:j:k>   base ball center for MB0 (default: origin)
  --radius <r>       base ball radius for MB0 (default: largest family radius)
  --p <x>            integrability exponent (lp, weak, morrey, lip_ball)
  --lambda <x>       Morrey parameter
  --beta <x>         smoothness order (lip_pair, lip_ball)
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("stratmax: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(args: &[String]) -> Result<i32> {
    let Some(cmd) = args.first() else {
        eprint!("{USAGE}");
        return Ok(2);
    };
    if matches!(cmd.as_str(), "help" | "--help" | "-h") {
        print!("{USAGE}");
        return Ok(0);
    }
    let flags = Flags::parse(&args[1..])?;
    if let Some(n) = flags.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cmd.as_str() {
        "calibrate" => cmd_calibrate(&flags),
        "op" => cmd_op(&flags),
        "norm" => cmd_norm(&flags),
        "verify" => cmd_verify(&flags),
        "refine" => cmd_refine(&flags),
        other => Err(Error::config(format!(
            "unknown command {other:?}; run `stratmax help`"
        ))),
    }
}

#[derive(Default)]
struct Flags {
    config: Option<PathBuf>,
    group: Option<Group>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    mode: Option<CenterMode>,
    alpha: Option<f64>,
    symbol: Option<String>,
    b_file: Option<PathBuf>,
    center: Option<Index>,
    radius: Option<f64>,
    p: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    positional: Vec<String>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags> {
        let mut flags = Flags::default();
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            if !arg.starts_with("--") {
                flags.positional.push(arg.clone());
                continue;
            }
            let mut value = || {
                it.next()
                    .ok_or_else(|| Error::config(format!("flag {arg} needs a value")))
            };
            match arg.as_str() {
                "--config" => flags.config = Some(PathBuf::from(value()?)),
                "--group" => flags.group = Some(Group::parse(value()?)?),
                "--seed" => flags.seed = Some(parse_num(arg, value()?)?),
                "--workers" => flags.workers = Some(parse_num(arg, value()?)?),
                "--out" => flags.out = Some(PathBuf::from(value()?)),
                "--mode" => flags.mode = Some(parse_mode(value()?)?),
                "--alpha" => flags.alpha = Some(parse_num(arg, value()?)?),
                "--symbol" => flags.symbol = Some(value()?.clone()),
                "--b" => flags.b_file = Some(PathBuf::from(value()?)),
                "--center" => flags.center = Some(parse_center(value()?)?),
                "--radius" => flags.radius = Some(parse_num(arg, value()?)?),
                "--p" => flags.p = Some(parse_num(arg, value()?)?),
                "--lambda" => flags.lambda = Some(parse_num(arg, value()?)?),
                "--beta" => flags.beta = Some(parse_num(arg, value()?)?),
                other => return Err(Error::config(format!("unknown flag {other:?}"))),
            }
        }
        if let Some(n) = flags.workers {
            if n == 0 || n > 512 {
                return Err(Error::config(format!("--workers {n} is out of range")));
            }
        }
        Ok(flags)
    }

    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::builtin(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn groups(&self) -> Vec<Group> {
        match self.group {
            Some(g) => vec![g],
            None => vec![Group::Euclidean1, Group::Euclidean2, Group::Heisenberg1],
        }
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            return Ok(Some(dir));
        }
        Ok(None)
    }
}

fn parse_num<T: std::str::FromStr>(flag: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::config(format!("bad value {s:?} for {flag}")))
}

fn parse_mode(s: &str) -> Result<CenterMode> {
    match s {
        "centered" => Ok(CenterMode::Centered),
        "containing" => Ok(CenterMode::Containing),
        other => Err(Error::config(format!(
            "unknown mode {other:?} (expected centered or containing)"
        ))),
    }
}

fn parse_center(s: &str) -> Result<Index> {
    let mut idx = [0i64; 3];
    let parts: Vec<&str> = s.split(':').collect();
    if parts.is_empty() || parts.len() > 3 {
        return Err(Error::config(format!("bad center {s:?} (expected i:j:k)")));
    }
    for (slot, part) in idx.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| Error::config(format!("bad center component {part:?}")))?;
    }
    Ok(idx)
}

fn cmd_calibrate(flags: &Flags) -> Result<i32> {
    let cfg = flags.config()?;
    let mut cals = Vec::new();
    for group in flags.groups() {
        let cal = calibrate(group, default_resolution(group), cfg.seed)?;
        println!("{}", cal.cache_line());
        cals.push(cal);
    }
    if let Some(dir) = flags.out_dir()? {
        let path = dir.join("calibration.cache");
        write_calibration_cache(&path, &cals)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

/// Reads a grid file and rebinds it to the configured margin for its group,
/// so the evaluation core matches the configured run.
fn load_grid(path: &Path, cfg: &RunConfig) -> Result<GridFunction> {
    let raw = GridFunction::read_text(path)?;
    let margin = cfg.lattice(raw.spec.group).margin;
    let spec = raw.spec.with_margin(margin);
    GridFunction::from_values(spec, raw.values)
}

fn symbol_grid(flags: &Flags, f: &GridFunction) -> Result<GridFunction> {
    match (&flags.symbol, &flags.b_file) {
        (Some(_), Some(_)) => Err(Error::config(
            "give either --symbol or --b, not both".to_string(),
        )),
        (Some(s), None) => Symbol::parse(s)?.sample(f.spec),
        (None, Some(path)) => {
            let raw = GridFunction::read_text(path)?;
            if !raw.spec.same_grid(&f.spec) {
                return Err(Error::data(format!(
                    "symbol grid {} does not match the input lattice",
                    path.display()
                )));
            }
            GridFunction::from_values(f.spec, raw.values)
        }
        (None, None) => Err(Error::config(
            "this operator needs a symbol: --symbol <id> or --b <grid-file>".to_string(),
        )),
    }
}

fn cmd_op(flags: &Flags) -> Result<i32> {
    let [name, input] = flags.positional.as_slice() else {
        return Err(Error::config(
            "usage: stratmax op <name> <grid-file>".to_string(),
        ));
    };
    let cfg = flags.config()?;
    let f = load_grid(Path::new(input), &cfg)?;
    let group = f.spec.group;
    if let Some(g) = flags.group {
        if g != group {
            return Err(Error::config(format!(
                "--group {} conflicts with the grid file ({})",
                g.name(),
                group.name()
            )));
        }
    }
    let ctx = EvalContext::new(f.spec, cfg.family(group)?)?;
    let mode = flags.mode.unwrap_or(cfg.mode);
    let mut uncovered = None;
    let out_grid = match name.as_str() {
        "M" => maximal(&f, &ctx, mode)?.to_grid(),
        "Malpha" => {
            let alpha = flags
                .alpha
                .ok_or_else(|| Error::config("Malpha needs --alpha".to_string()))?;
            fractional_maximal(&f, alpha, &ctx, mode)?.to_grid()
        }
        "Mb" => commutator_maximal(&f, &symbol_grid(flags, &f)?, &ctx, mode)?.to_grid(),
        "bM" => nonlinear_commutator(&f, &symbol_grid(flags, &f)?, &ctx, mode)?.to_grid(),
        "MB0" => {
            let center = flags.center.unwrap_or([0, 0, 0]);
            let radius = flags
                .radius
                .unwrap_or_else(|| *ctx.family.radii().last().unwrap());
            let field = local_maximal(&f, center, radius, &ctx)?;
            uncovered = Some(field.uncovered);
            field.to_grid()
        }
        other => {
            return Err(Error::config(format!(
                "unknown operator {other:?} (expected M, Malpha, Mb, bM or MB0)"
            )))
        }
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut points = 0usize;
    for lin in ctx.core.indices().iter().map(|z| ctx.spec.linear(*z)) {
        let v = out_grid.values[lin];
        lo = lo.min(v);
        hi = hi.max(v);
        points += 1;
    }
    let mut line = format!(
        "op={name} group={} core_min={} core_max={} core_points={points}",
        group.name(),
        fmt_float(lo),
        fmt_float(hi)
    );
    if let Some(u) = uncovered {
        line.push_str(&format!(" uncovered={u}"));
    }
    println!("{line}");
    let dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{name}.grid"));
    out_grid.write_text(&path)?;
    eprintln!("wrote {}", path.display());
    Ok(0)
}

fn cmd_norm(flags: &Flags) -> Result<i32> {
    let [kind, input] = flags.positional.as_slice() else {
        return Err(Error::config(
            "usage: stratmax norm <kind> <grid-file>".to_string(),
        ));
    };
    let cfg = flags.config()?;
    let f = load_grid(Path::new(input), &cfg)?;
    let group = f.spec.group;
    let ctx = EvalContext::new(f.spec, cfg.family(group)?)?;
    let cell = f.spec.cell_measure();
    let need = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| Error::config(format!("norm kind {kind:?} needs {flag}")))
    };
    let record = match kind.as_str() {
        "lp" => {
            let p = need(flags.p, "--p")?;
            let v = lp_norm(&f.values, cell, p)?;
            norm_record(&format!("lp(p={p})"), v, "lattice", true)
        }
        "weak" => {
            let s = need(flags.p, "--p")?;
            let v = weak_quasinorm(&f.values, cell, s)?;
            norm_record(&format!("weak(s={s})"), v, "lattice", true)
        }
        "morrey" => {
            let p = need(flags.p, "--p")?;
            let lambda = need(flags.lambda, "--lambda")?;
            let (v, w) = morrey_norm(&f, p, lambda, &ctx)?;
            let name = format!("morrey(p={p},lambda={lambda})");
            let rec = norm_record(&name, v, &ctx.family.id(), true);
            format!(
                "{rec} witness_center={:?} witness_radius={}",
                w.center, w.radius
            )
        }
        "lip_pair" => {
            let beta = need(flags.beta, "--beta")?;
            let (v, exhaustive) = lipschitz_seminorm(&f, beta, cfg.seed)?;
            norm_record(&format!("lip_pair(beta={beta})"), v, "pairs", exhaustive)
        }
        "lip_ball" => {
            let beta = need(flags.beta, "--beta")?;
            let p = flags.p.unwrap_or(1.0);
            let v = lip_beta_p(&f, beta, p, &ctx)?;
            norm_record(
                &format!("lip_ball(beta={beta},p={p})"),
                v,
                &ctx.family.id(),
                true,
            )
        }
        other => {
            return Err(Error::config(format!(
                "unknown norm kind {other:?} (expected lp, weak, morrey, lip_pair or lip_ball)"
            )))
        }
    };
    println!("{record}");
    Ok(0)
}

fn cmd_verify(flags: &Flags) -> Result<i32> {
    let cfg = flags.config()?;
    let mut all: Vec<CheckReport> = Vec::new();
    let mut broken: Vec<String> = Vec::new();
    for group in flags.groups() {
        let gs = GroupSuite::new(&cfg, group)?;
        for suite in SUITES {
            match gs.run(suite) {
                Ok(rows) => all.extend(rows),
                Err(e) => {
                    eprintln!("suite {suite} on {}: {e}", group.name());
                    broken.push(format!("{suite}({})", group.name()));
                }
            }
        }
    }
    let mut records = String::new();
    for r in &all {
        records.push_str(&r.record_block());
        records.push('\n');
    }
    print!("{records}");
    let gated: Vec<&CheckReport> = all
        .iter()
        .filter(|r| r.class != stratmax::CheckClass::Diagnostic)
        .collect();
    let failed: Vec<&&CheckReport> = gated.iter().filter(|r| !r.pass).collect();
    let diagnostics = all.len() - gated.len();
    println!(
        "verify: {} checks, {} passed, {} failed, {} diagnostics",
        gated.len(),
        gated.len() - failed.len(),
        failed.len(),
        diagnostics
    );
    if let Some(dir) = flags.out_dir()? {
        std::fs::write(dir.join("records.txt"), &records)?;
        std::fs::write(dir.join("report.csv"), csv_string(&all))?;
        eprintln!("wrote {}", dir.join("report.csv").display());
    }
    for r in &failed {
        let tag = format!("{}({})", r.suite, r.group.name());
        if !broken.contains(&tag) {
            broken.push(tag);
        }
    }
    if !broken.is_empty() {
        eprintln!("failing suites: {}", broken.join(" "));
        return Ok(4);
    }
    Ok(0)
}

fn cmd_refine(flags: &Flags) -> Result<i32> {
    let cfg = flags.config()?;
    let mut all: Vec<CheckReport> = Vec::new();
    for group in flags.groups() {
        all.extend(refinement_drift(&cfg, group)?);
    }
    for r in &all {
        println!("{}", r.record_block());
    }
    if let Some(dir) = flags.out_dir()? {
        std::fs::write(dir.join("refine.csv"), csv_string(&all))?;
        eprintln!("wrote {}", dir.join("refine.csv").display());
    }
    if all.iter().any(|r| !r.pass) {
        eprintln!("refinement drift above bound");
        return Ok(4);
    }
    Ok(0)
}
