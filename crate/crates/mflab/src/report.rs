//! Output formatting shared by CSV writers.

/// 17-significant-digit scientific formatting; enough to round-trip any f64,
/// so re-running an experiment can be diffed byte-for-byte.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
