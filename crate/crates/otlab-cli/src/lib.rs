//! Argument parsing shared by the binary and the fuzz harness.

/// Parses a probability literal: a plain decimal, or an exact dyadic
/// `num/2^exp` so grid points round-trip without decimal noise.
pub fn parse_prob(s: &str) -> Result<f64, String> {
    let v = if let Some((num, exp)) = s.split_once("/2^") {
        let num: u64 = num
            .trim()
            .parse()
            .map_err(|_| format!("bad dyadic numerator in {s:?}"))?;
        let exp: u32 = exp
            .trim()
            .parse()
            .map_err(|_| format!("bad dyadic exponent in {s:?}"))?;
        if exp > 1076 {
            return Err(format!("dyadic exponent {exp} underflows"));
        }
        num as f64 / 2f64.powi(exp as i32)
    } else {
        let t = s.trim();
        if t.is_empty() || !t.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
            return Err(format!("{s:?} is not a probability"));
        }
        t.parse::<f64>().map_err(|_| format!("{s:?} is not a probability"))?
    };
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{s:?} is outside [0, 1]"))
    }
}

#[cfg(test)]
mod tests {
    use super::parse_prob;

    #[test]
    fn dyadic_literals_are_exact() {
        assert_eq!(parse_prob("1/2^2").unwrap(), 0.25);
        assert_eq!(parse_prob("3/2^5").unwrap(), 3.0 / 32.0);
        assert_eq!(parse_prob("0/2^0").unwrap(), 0.0);
    }

    #[test]
    fn decimals_parse_in_range() {
        assert_eq!(parse_prob("0.3").unwrap(), 0.3);
        assert_eq!(parse_prob("1").unwrap(), 1.0);
        assert_eq!(parse_prob(".5").unwrap(), 0.5);
    }

    #[test]
    fn junk_is_rejected() {
        for bad in ["", "abc", "-0.1", "1.5", "3/2^1", "inf", "nan", "0x1"] {
            assert!(parse_prob(bad).is_err(), "{bad:?} parsed");
        }
    }
}
