//! Exact, saturating edge and tree costs.
//!
//! Weights are read as decimal literals with at most [`FRACTION_DIGITS`]
//! fractional digits and stored as integer multiples of `10^-6`. Every sum in
//! the solvers is therefore exact; [`Cost::INFINITY`] absorbs additions.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use thiserror::Error;

/// Number of fractional decimal digits kept by [`Cost`].
pub const FRACTION_DIGITS: u32 = 6;

/// Scale between whole units and the stored integer.
pub const SCALE: u64 = 10u64.pow(FRACTION_DIGITS);

/// Largest whole-unit weight accepted from text input. Keeps sums of a few
/// million edges well clear of `u64::MAX`.
pub const MAX_WHOLE_WEIGHT: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostParseError {
    #[error("empty cost literal")]
    Empty,
    #[error("malformed decimal literal `{0}`")]
    Malformed(String),
    #[error("`{0}` has more than {FRACTION_DIGITS} fractional digits")]
    TooPrecise(String),
    #[error("`{0}` exceeds the maximum weight {MAX_WHOLE_WEIGHT}")]
    TooLarge(String),
}

/// A nonnegative exact cost, or infinity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const INFINITY: Cost = Cost(u64::MAX);

    /// A whole number of units.
    pub const fn from_int(units: u64) -> Cost {
        Cost(units * SCALE)
    }

    /// Raw scaled value (millionths of a unit).
    pub const fn from_micros(micros: u64) -> Cost {
        Cost(micros)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub const fn is_finite(self) -> bool {
        self.0 != u64::MAX
    }

    pub const fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    /// Difference of two finite costs, `None` if it would be negative or
    /// either side is infinite.
    pub fn checked_sub(self, other: Cost) -> Option<Cost> {
        if self.is_infinite() || other.is_infinite() {
            return None;
        }
        self.0.checked_sub(other.0).map(Cost)
    }

    /// `self * factor`, saturating to infinity.
    pub fn times(self, factor: u64) -> Cost {
        if self.is_infinite() {
            return Cost::INFINITY;
        }
        match self.0.checked_mul(factor) {
            Some(v) if v != u64::MAX => Cost(v),
            _ => Cost::INFINITY,
        }
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        // u64::MAX doubles as the sentinel, so saturation lands on it.
        Cost(self.0.saturating_add(rhs.0))
    }
}

impl std::ops::AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        *self = *self + rhs;
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Cost> for Cost {
    fn sum<I: Iterator<Item = &'a Cost>>(iter: I) -> Cost {
        iter.copied().sum()
    }
}

impl FromStr for Cost {
    type Err = CostParseError;

    fn from_str(text: &str) -> Result<Cost, CostParseError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(CostParseError::Empty);
        }
        if text == "inf" {
            return Ok(Cost::INFINITY);
        }
        let (whole, frac) = match text.split_once('.') {
            Some((w, f)) => (w, f),
            None => (text, ""),
        };
        let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if whole.is_empty() || !digits(whole) || !digits(frac) || (text.contains('.') && frac.is_empty()) {
            return Err(CostParseError::Malformed(text.to_string()));
        }
        if frac.len() > FRACTION_DIGITS as usize {
            return Err(CostParseError::TooPrecise(text.to_string()));
        }
        let whole: u64 = whole.parse().map_err(|_| CostParseError::TooLarge(text.to_string()))?;
        if whole > MAX_WHOLE_WEIGHT {
            return Err(CostParseError::TooLarge(text.to_string()));
        }
        let mut micros = 0u64;
        for (pos, b) in frac.bytes().enumerate() {
            micros += u64::from(b - b'0') * 10u64.pow(FRACTION_DIGITS - 1 - pos as u32);
        }
        Ok(Cost(whole * SCALE + micros))
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            return f.write_str("inf");
        }
        let whole = self.0 / SCALE;
        let frac = self.0 % SCALE;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = format!("{frac:0width$}", width = FRACTION_DIGITS as usize);
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cost({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_renders_decimals() {
        assert_eq!("2".parse::<Cost>().unwrap(), Cost::from_int(2));
        assert_eq!("2.5".parse::<Cost>().unwrap(), Cost::from_micros(2_500_000));
        assert_eq!("0.000001".parse::<Cost>().unwrap(), Cost::from_micros(1));
        assert_eq!(Cost::from_micros(2_500_000).to_string(), "2.5");
        assert_eq!(Cost::from_int(7).to_string(), "7");
        assert_eq!(Cost::INFINITY.to_string(), "inf");
    }

    #[test]
    fn rejects_bad_literals() {
        assert!(matches!("".parse::<Cost>(), Err(CostParseError::Empty)));
        assert!(matches!("1.".parse::<Cost>(), Err(CostParseError::Malformed(_))));
        assert!(matches!("-1".parse::<Cost>(), Err(CostParseError::Malformed(_))));
        assert!(matches!("1e3".parse::<Cost>(), Err(CostParseError::Malformed(_))));
        assert!(matches!("0.1234567".parse::<Cost>(), Err(CostParseError::TooPrecise(_))));
        assert!(matches!("99999999999".parse::<Cost>(), Err(CostParseError::TooLarge(_))));
    }

    #[test]
    fn infinity_saturates() {
        assert_eq!(Cost::INFINITY + Cost::from_int(3), Cost::INFINITY);
        assert_eq!(Cost::from_int(3) + Cost::INFINITY, Cost::INFINITY);
        assert!(Cost::INFINITY > Cost::from_micros(u64::MAX - 1));
        let total: Cost = [Cost::from_int(1), Cost::INFINITY, Cost::from_int(2)].iter().sum();
        assert!(total.is_infinite());
        assert_eq!(Cost::from_int(5).times(3), Cost::from_int(15));
        assert_eq!(Cost::INFINITY.times(0), Cost::INFINITY);
    }

    proptest! {
        #[test]
        fn display_round_trips(micros in 0u64..(MAX_WHOLE_WEIGHT * SCALE)) {
            let c = Cost::from_micros(micros);
            prop_assert_eq!(c.to_string().parse::<Cost>().unwrap(), c);
        }
    }
}
