//! Display rounding for `value ± uncertainty` pairs.
//!
//! The uncertainty keeps two significant digits and the value is rounded
//! to the same decimal place. In column mode the decimal place comes from
//! the largest (rounded) uncertainty in the column and applies to every
//! entry, so a column shares one precision.

/// Decimal places used when the uncertainty is exactly zero.
pub const DEFAULT_PRECISION: u32 = 3;

/// Power of ten of the last kept digit when `u` is rounded to two
/// significant digits; `None` for zero or non-finite `u`.
pub fn rounding_exponent(u: f64) -> Option<i32> {
    if !(u > 0.0) || !u.is_finite() {
        return None;
    }
    let mut p = u.log10().floor() as i32 - 1;
    // log10 can land one off near exact powers of ten
    if scaled_round(u, p).abs() >= 100 {
        p += 1;
    } else if scaled_round(u, p).abs() < 10 {
        p -= 1;
    }
    // 99.5 -> 100 at this place: one more digit to the left
    if scaled_round(u, p).abs() >= 100 {
        p += 1;
    }
    Some(p)
}

/// `round(v / 10^p)` with halves away from zero.
fn scaled_round(v: f64, p: i32) -> i64 {
    let scaled = if p < 0 { v * 10f64.powi(-p) } else { v / 10f64.powi(p) };
    scaled.round() as i64
}

/// Formats `v` rounded to a multiple of `10^p`.
pub fn format_at(v: f64, p: i32) -> String {
    let k = scaled_round(v, p);
    let neg = k < 0;
    let digits = k.unsigned_abs().to_string();
    let body = if p >= 0 {
        if k == 0 {
            "0".to_string()
        } else {
            format!("{digits}{}", "0".repeat(p as usize))
        }
    } else {
        let places = (-p) as usize;
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (int, frac) = padded.split_at(padded.len() - places);
        format!("{int}.{frac}")
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Rounded display of one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GumDisplay {
    pub value: String,
    /// `None` when the uncertainty is zero.
    pub uncertainty: Option<String>,
}

impl std::fmt::Display for GumDisplay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.uncertainty {
            Some(u) => write!(f, "{} ± {}", self.value, u),
            None => f.write_str(&self.value),
        }
    }
}

fn display_at(value: f64, uncertainty: f64, p: Option<i32>) -> GumDisplay {
    match p {
        Some(p) => GumDisplay { value: format_at(value, p), uncertainty: Some(format_at(uncertainty, p)) },
        None => GumDisplay { value: format!("{value:.prec$}", prec = DEFAULT_PRECISION as usize), uncertainty: None },
    }
}

/// Rounds a single pair.
///
/// ```
/// use aerobench::uncertainty::gum::gum_round;
/// assert_eq!(gum_round(0.13584, 0.00237).to_string(), "0.1358 ± 0.0024");
/// assert_eq!(gum_round(5.0, 0.0).to_string(), "5.000");
/// ```
pub fn gum_round(value: f64, uncertainty: f64) -> GumDisplay {
    display_at(value, uncertainty, rounding_exponent(uncertainty))
}

/// Rounds a table column to the precision of its largest uncertainty.
pub fn gum_round_column(pairs: &[(f64, f64)]) -> Vec<GumDisplay> {
    let p = column_exponent(pairs);
    pairs.iter().map(|&(v, u)| display_at(v, u, p)).collect()
}

/// Decimal exponent shared by a column, from its largest uncertainty.
pub fn column_exponent(pairs: &[(f64, f64)]) -> Option<i32> {
    let largest = pairs
        .iter()
        .map(|&(_, u)| u)
        .filter(|u| u.is_finite())
        .fold(0.0f64, f64::max);
    rounding_exponent(largest)
}
