use stratmax::config::RunConfig;
use stratmax::lattice::Group;
use stratmax::suites::theorem3_metrics;
use stratmax::symbols::Symbol;

#[test]
fn shifted_basins() {
    let cfg = RunConfig::default();
    let ctx = cfg.context(Group::Euclidean1).unwrap();
    for sym in [
        Symbol::PowerGauge { beta: 0.5 },
        Symbol::ShiftedPowerGauge { beta: 0.5, shift: [1.0, 0.0, 0.0] },
    ] {
        let b = sym.sample(ctx.spec).unwrap();
        let m = theorem3_metrics(&b, 0.5, 6.0, &ctx, 0.0).unwrap();
        println!("{} witness={:?}@{} max={:.6e}", sym.id(), m.witness.0, m.witness.1, m.max);
        for (z, r, v) in m.top.iter().take(20) {
            println!("  top {:?} r={} v={:.6e}", z, r, v);
        }
    }
}
