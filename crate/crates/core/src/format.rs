//! Number rendering shared by every report.

/// Up to 9 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    trim(format!("{x:.decimals$}"))
}

/// Renders with `round` fixed decimals when given, otherwise as [`fmt_num`].
pub fn fmt_rounded(x: f64, round: Option<usize>) -> String {
    match round {
        Some(d) => trim(format!("{x:.d$}")),
        None => fmt_num(x),
    }
}

/// The value a reader of the rendered text would see.
pub fn displayed(x: f64, round: Option<usize>) -> f64 {
    fmt_rounded(x, round).parse().unwrap_or(x)
}

fn trim(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}
