//! Text formatting of reals for the CSV outputs.

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn sig17(v: f64) -> String {
    if v == 0.0 {
        // keep the sign of -0.0 out of the files
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}
