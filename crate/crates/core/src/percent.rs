//! Exact one-decimal percentage rounding.

/// Rounds `100 * num / den` to tenths of a percent, half-up, using integer
/// arithmetic only. Returns `None` when `den == 0`.
pub fn tenths_of_percent(num: u64, den: u64) -> Option<u64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    Some(((2 * 1000 * num + den) / (2 * den)) as u64)
}

/// Formats a tenths-of-percent value as `"96.3"`.
pub fn format_tenths(tenths: u64) -> String {
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// `"97.0"` for 191/197, `"n/a"` for a zero denominator.
pub fn format_ratio(num: u64, den: u64) -> String {
    match tenths_of_percent(num, den) {
        Some(t) => format_tenths(t),
        None => "n/a".to_string(),
    }
}

/// `"1026 (6.2%)"`.
pub fn count_with_percent(count: u64, total: u64) -> String {
    format!("{} ({}%)", count, format_ratio(count, total))
}
