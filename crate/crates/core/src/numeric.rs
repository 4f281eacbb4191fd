//! Decimal rounding shared by the engine's gate policy and the report layer.

/// Relative slack under which a binary value is treated as sitting exactly on
/// a decimal tie. `1.175` is stored as `1.17499999999999982236431605997495353221893310546875`
/// and must still round to `1.18`.
const TIE_TOLERANCE: f64 = 1e-12;

/// Rounds half away from zero to `decimals` fractional digits.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = x.abs() * scale;
    let nudged = scaled + TIE_TOLERANCE * scaled.max(1.0);
    let rounded = (nudged + 0.5).floor() / scale;
    rounded.copysign(x)
}

/// Rounds and renders with exactly `decimals` fractional digits.
pub fn format_fixed(x: f64, decimals: u32) -> String {
    let r = round_half_up(x, decimals);
    // avoid "-0.00"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{:.*}", decimals as usize, r)
}

/// Rounds, then strips trailing fractional zeros (`1.00` -> `1`, `0.40` -> `0.4`).
pub fn format_trimmed(x: f64, decimals: u32) -> String {
    let s = format_fixed(x, decimals);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
