//! Number and field formatting shared by the CSV writers.

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros
/// removed, exponent form outside `1e-4 <= |x| < 1e17`. Round-trips exactly.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };

    if (-4..17).contains(&exp) {
        let mut s = String::new();
        if exp < 0 {
            s.push_str("0.");
            s.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            s.push_str(&digits);
        } else {
            let int_len = exp as usize + 1;
            s.push_str(&digits[..int_len]);
            s.push('.');
            s.push_str(&digits[int_len..]);
        }
        if s.contains('.') {
            let trimmed = s.trim_end_matches('0').trim_end_matches('.');
            s = trimmed.to_owned();
        }
        format!("{sign}{s}")
    } else {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        m = m.trim_end_matches('0').trim_end_matches('.').to_owned();
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{sign}{m}e{esign}{:02}", exp.abs())
    }
}

/// Quotes a CSV field when it contains a delimiter, quote or line break.
pub fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
