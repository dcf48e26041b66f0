//! Shared number formatting for the CSV exports.

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Like [`fmt_f64`] but renders `None` as an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
