//! Bookkeeping for the acceptance checks: every check prints one PASS/FAIL
//! line and the run fails if any check failed.

use std::time::Instant;

#[derive(Debug, Default)]
pub struct Ledger {
    results: Vec<(String, bool)>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record and print one check.
    pub fn check(&mut self, criterion: &str, pass: bool, detail: impl AsRef<str>) -> bool {
        println!("{} [{criterion}] {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
        self.results.push((criterion.to_string(), pass));
        pass
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results.iter().filter(|(_, ok)| !ok).map(|(c, _)| c.as_str()).collect()
    }

    pub fn passed(&self) -> usize {
        self.results.iter().filter(|(_, ok)| *ok).count()
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// Run `f`, returning its value and the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}
