use std::time::Duration;

use cartan_cli::suite::{run_criterion, CRITERIA};

/// Wall-clock budget per criterion.
fn budget(index: usize) -> Option<Duration> {
    match index {
        1 | 10 => Some(Duration::from_secs(60)),
        8 => Some(Duration::from_secs(120)),
        _ => None,
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for k in 1..=CRITERIA {
        let o = run_criterion(k);
        let in_time = budget(k).is_none_or(|b| o.elapsed <= b);
        let pass = o.pass() && in_time;
        println!(
            "{} criterion {k:>2}: {} ({} checks, {:.2} s{})",
            if pass { "PASS" } else { "FAIL" },
            o.title,
            o.checks.len(),
            o.elapsed.as_secs_f64(),
            budget(k).map(|b| format!(", budget {} s", b.as_secs())).unwrap_or_default()
        );
        for c in o.checks.iter().filter(|c| !c.pass) {
            println!("    {} value={:?} reference={:e} tolerance={:e} {}", c.name, c.value, c.reference, c.tolerance, c.error.as_deref().unwrap_or(""));
        }
        if !pass {
            failed.push(k);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
