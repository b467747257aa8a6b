//! Runner for the acceptance suite: each criterion is a named check with a
//! wall-clock budget, reported as one PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type CheckResult = Result<String, String>;

pub struct Check {
    pub name: &'static str,
    pub budget: Duration,
    pub run: fn() -> CheckResult,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({}; {:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs one check; a panic or an overrun budget is a failure.
pub fn evaluate(check: &Check) -> Verdict {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check.run));
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(Ok(detail)) => (true, detail),
        Ok(Err(detail)) => (false, detail),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            (false, format!("panic: {msg}"))
        }
    };
    if elapsed > check.budget {
        passed = false;
        detail = format!("{detail}; over budget {:?}", check.budget);
    }
    Verdict {
        name: check.name,
        passed,
        detail,
        elapsed,
    }
}

/// Evaluates every check in order, printing each line as it completes.
pub fn run_all(checks: &[Check]) -> Vec<Verdict> {
    checks
        .iter()
        .map(|c| {
            let v = evaluate(c);
            println!("{}", v.line());
            v
        })
        .collect()
}

/// `Err(detail)` unless `cond` holds.
pub fn ensure(cond: bool, detail: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail())
    }
}
