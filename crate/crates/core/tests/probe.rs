use std::time::Instant;
use stratmax::suites::theorem3_metrics;
use stratmax::{EvalContext, Group, LatticeSpec, RadiusFamily, Symbol};

fn probe(tag: &str, group: Group, h: f64, extents: &[f64], margin: f64, r0: f64, k: u32, qexp: f64) {
    let spec = LatticeSpec::new(group, h, extents, margin).unwrap();
    let family = RadiusFamily::new(r0, k).unwrap();
    let ctx = EvalContext::new(spec, family).unwrap();
    let core = ctx.core.len();
    let counts: Vec<usize> = ctx.stencils.iter().map(|s| s.count()).collect();
    println!(
        "{tag}: points={} core={core} stencil_counts={counts:?}",
        spec.len()
    );
    for sym in [Symbol::PowerGauge { beta: 0.5 }, Symbol::NonLipschitz] {
        let b = sym.sample(spec).unwrap();
        let t0 = Instant::now();
        let m = theorem3_metrics(&b, 0.5, qexp, &ctx, 0.0).unwrap();
        let detail: Vec<String> = m
            .radius_sups
            .iter()
            .map(|(r, s)| format!("S({r})={s:.4}"))
            .collect();
        println!(
            "  {:<28} spread={:.4} [{}] ({} ms)",
            sym.id(),
            m.spread(),
            detail.join(" "),
            t0.elapsed().as_millis()
        );
    }
}

#[test]
fn candidates() {
    println!();
    probe("A1 line base", Group::Euclidean1, 1.0 / 32.0, &[2.0], 1.0, 1.0 / 16.0, 4, 6.0);
    probe("A2 line h64 r32", Group::Euclidean1, 1.0 / 64.0, &[2.0], 1.0, 1.0 / 32.0, 5, 6.0);
    probe("A4 line h64 r16", Group::Euclidean1, 1.0 / 64.0, &[2.0], 1.0, 1.0 / 16.0, 4, 6.0);
    probe("A3 line h128 r64", Group::Euclidean1, 1.0 / 128.0, &[2.0], 1.0, 1.0 / 64.0, 6, 6.0);
    probe("B1 plane base", Group::Euclidean2, 1.0 / 16.0, &[2.0], 1.0, 1.0 / 8.0, 3, 4.0);
    probe("B2 plane h32 r16", Group::Euclidean2, 1.0 / 32.0, &[2.0], 1.0, 1.0 / 16.0, 4, 4.0);
    probe("C1 heis base", Group::Heisenberg1, 0.125, &[1.25, 0.5], 1.0, 0.25, 2, 8.0 / 3.0);
    probe("C4 heis r3_16", Group::Heisenberg1, 0.125, &[1.25, 0.5], 1.0, 0.1875, 2, 8.0 / 3.0);
    probe("C2 heis h10", Group::Heisenberg1, 0.1, &[1.2, 0.5], 1.0, 0.25, 2, 8.0 / 3.0);
}
