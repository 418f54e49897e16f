//! Text formats shared by the CLI and the reports: fixed 10-significant-digit
//! numbers and single-column theta CSV files.

use crate::error::{Error, Result};

/// Formats like C's `%.10g`: 10 significant digits, trailing zeros
/// dropped, scientific notation outside `1e-4 <= |x| < 1e10`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 10;
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One value per line, header `theta`, values written with round-trip
/// precision so that pack/unpack is bit-exact.
pub fn theta_to_csv(theta: &[f64]) -> String {
    let mut out = String::from("theta\n");
    for t in theta {
        out.push_str(&format!("{t:?}\n"));
    }
    out
}

/// Accepts an optional `theta` header, blank lines and one number per line.
pub fn theta_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut offset = 0usize;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line = raw.trim();
        if !(line.is_empty() || (i == 0 && line == "theta")) {
            let v = line.parse::<f64>().map_err(|_| Error::Format {
                offset,
                msg: format!("line {}: not a number: {line:?}", i + 1),
            })?;
            values.push(v);
        }
        offset += raw.len();
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.25), "0.25");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.141592654");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig(123456.789), "123456.789");
        assert_eq!(fmt_sig(1e-5), "1e-5");
        assert_eq!(fmt_sig(1.5e12), "1.5e12");
        assert_eq!(fmt_sig(0.0001234), "0.0001234");
        assert_eq!(fmt_sig(9_999_999_999.6), "1e10");
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }

    #[test]
    fn theta_csv_roundtrip_is_exact() {
        let theta = vec![0.1, -1.0 / 3.0, 1e-300, 12345.678, -0.0];
        let back = theta_from_csv(&theta_to_csv(&theta)).unwrap();
        assert_eq!(
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn theta_csv_reports_offset() {
        match theta_from_csv("theta\n1.0\nabc\n") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
    }
}
