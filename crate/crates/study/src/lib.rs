//! Reporting helpers for the simulation-study acceptance run.
//!
//! The run itself lives in `tests/acceptance.rs` so that it sorts after every
//! other test target in the workspace.

use std::io::Write;

/// Writes straight to stderr so lines survive test output capture.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Index of the smallest entry; NaN never wins.
pub fn lowest(values: &[f64; 3]) -> usize {
    (0..3).fold(0, |best, j| if values[j] < values[best] { j } else { best })
}

/// `value` within a relative band `tol` of `reference`.
pub fn within(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= tol * reference.abs()
}

/// Method triple in the fixed order proposed, naive, pace.
pub fn fmt3(v: &[f64; 3]) -> String {
    format!("proposed {:.4}, naive {:.4}, pace {:.4}", v[0], v[1], v[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_and_within() {
        assert_eq!(lowest(&[0.3, 0.1, 0.2]), 1);
        assert_eq!(lowest(&[0.3, f64::NAN, 0.2]), 2);
        assert!(within(1.4, 1.0, 0.5) && !within(1.6, 1.0, 0.5));
        assert!(within(-0.9, -1.0, 0.1));
    }
}
