//! The fifteen acceptance criteria at default settings, one line per criterion.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;
use std::time::Instant;

use psido_workbench::config::Settings;
use psido_workbench::report::complex_text;
use psido_workbench::suites::{criterion_title, run_criterion, thread_pool};

fn main() -> ExitCode {
    let s = Settings::default();
    let pool = thread_pool();
    let mut failed = Vec::new();
    for id in 1..=15u8 {
        let start = Instant::now();
        let checks = pool.install(|| run_criterion(id, &s));
        let ok = !checks.is_empty() && checks.iter().all(|c| c.pass);
        println!(
            "criterion {id:2} {}: {} ({} checks, {:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            criterion_title(id),
            checks.len(),
            start.elapsed().as_secs_f64()
        );
        for c in checks.iter().filter(|c| !c.pass) {
            println!(
                "    {} value {} reference {} error {:e} tol {:e}{}",
                c.check_id,
                complex_text(c.value),
                complex_text(c.reference),
                c.error,
                c.tolerance,
                c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 15 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
