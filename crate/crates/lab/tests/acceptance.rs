//! All fourteen criteria, one PASS/FAIL line each. The lines go to the raw
//! stderr handle so they show without `--nocapture`.

use std::io::Write;

use relvac_lab::campaign::{run_criterion, Options, ALL};

#[test]
fn acceptance() {
    let opts = Options { tampered: false, seed: 1 };
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    for id in ALL {
        let o = run_criterion(id, &opts);
        let status = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "{status} criterion {:>2}: {} ({:.1} s)", o.id, o.title, o.seconds).unwrap();
        for (k, v) in &o.metrics {
            writeln!(err, "      {k} = {v:.6e}").unwrap();
        }
        if !o.pass {
            writeln!(err, "      failed: {}", o.note).unwrap();
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
