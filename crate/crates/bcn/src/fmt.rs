//! Deterministic number formatting for output files and graph labels.

/// Shortest decimal representation of `x` rounded to 9 significant
/// digits. Zero (either sign) prints as "0". Output files round through
/// this so reruns are byte-identical across platforms.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Round via the 9-significant-digit scientific form, then let the
    // shortest round-trip formatter print the rounded value.
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific form always parses");
    rounded.to_string()
}

/// `sig9` applied in place to a value destined for JSON: returns the
/// rounded number itself (serializers then emit the shortest form).
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("scientific form always parses")
}
