//! Extended reals with explicit infinity flags.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A value in `[-inf, +inf]`. Infinities are variants, never sentinel floats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl XReal {
    pub const ZERO: XReal = XReal::Finite(0.0);

    /// Wraps a float. Non-finite floats are rejected rather than reinterpreted.
    pub fn finite(v: f64) -> Result<Self> {
        if v.is_finite() {
            Ok(XReal::Finite(v))
        } else {
            Err(Error::Undefined(format!("non-finite float {v}")))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, XReal::Finite(_))
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            XReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Float view, mapping the flags to IEEE infinities. Only for internal numerics.
    pub fn to_f64(self) -> f64 {
        match self {
            XReal::NegInf => f64::NEG_INFINITY,
            XReal::Finite(v) => v,
            XReal::PosInf => f64::INFINITY,
        }
    }

    /// Truncation to `[-k, k]`.
    pub fn clamp_level(self, k: f64) -> f64 {
        match self {
            XReal::NegInf => -k,
            XReal::PosInf => k,
            XReal::Finite(v) => v.clamp(-k, k),
        }
    }

    pub fn try_add(self, other: XReal) -> Result<XReal> {
        use XReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(Error::Undefined("inf - inf".into())),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn neg(self) -> XReal {
        match self {
            XReal::NegInf => XReal::PosInf,
            XReal::PosInf => XReal::NegInf,
            XReal::Finite(v) => XReal::Finite(-v),
        }
    }

    pub fn try_sub(self, other: XReal) -> Result<XReal> {
        self.try_add(other.neg())
    }

    /// Product with a finite scalar. `0 * inf` is undefined.
    pub fn try_scale(self, s: f64) -> Result<XReal> {
        if !s.is_finite() {
            return Err(Error::Undefined(format!("scale by {s}")));
        }
        match self {
            XReal::Finite(v) => Ok(XReal::Finite(v * s)),
            _ if s == 0.0 => Err(Error::Undefined("0 * inf".into())),
            x if s > 0.0 => Ok(x),
            x => Ok(x.neg()),
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: XReal) -> XReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Serialization token.
    pub fn token(self) -> String {
        match self {
            XReal::NegInf => "-inf".into(),
            XReal::PosInf => "+inf".into(),
            XReal::Finite(v) => format!("{v:.17e}"),
        }
    }

    pub fn parse_token(s: &str) -> Result<XReal> {
        match s.trim() {
            "+inf" => Ok(XReal::PosInf),
            "-inf" => Ok(XReal::NegInf),
            t => t
                .parse::<f64>()
                .map_err(|e| Error::Undefined(format!("bad value token {t:?}: {e}")))
                .and_then(XReal::finite),
        }
    }
}

impl From<f64> for XReal {
    /// Maps IEEE infinities onto the flags; NaN panics because it has no extended-real meaning.
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            XReal::PosInf
        } else if v == f64::NEG_INFINITY {
            XReal::NegInf
        } else {
            assert!(!v.is_nan(), "NaN is not an extended real");
            XReal::Finite(v)
        }
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XReal::NegInf => write!(f, "-inf"),
            XReal::PosInf => write!(f, "+inf"),
            XReal::Finite(v) => write!(f, "{v}"),
        }
    }
}
