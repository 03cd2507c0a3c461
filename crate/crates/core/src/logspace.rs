//! Overflow-safe accumulation of exponentials.
//!
//! Empirical moment generating functions E exp((λ, ξ)) overflow `f64` for
//! moderate λ, so every expectation of an exponential in the crate is
//! formed here, in log scale, and never as a raw sum of `exp` values.

use crate::error::{Error, Result};

/// A signed quantity s·exp(m) kept in log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub log_magnitude: f64,
    /// −1, 0 or +1. A zero sign means the value is exactly 0.
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    /// exp(m) with positive sign.
    pub fn exp(m: f64) -> Self {
        Self {
            log_magnitude: m,
            sign: 1,
        }
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.log_magnitude.exp()
    }

    pub fn mul(self, other: Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            return Self::ZERO;
        }
        Self {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }

    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_magnitude >= other.log_magnitude {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.log_magnitude - big.log_magnitude).exp();
        if big.sign == small.sign {
            Self {
                log_magnitude: big.log_magnitude + ratio.ln_1p(),
                sign: big.sign,
            }
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude: big.log_magnitude + (-ratio).ln_1p(),
                sign: big.sign,
            }
        }
    }
}

/// Streaming log Σ exp(v_i) with a running maximum shift.
///
/// Chunks can be merged with [`LogSumExp::merge`]; merging in a fixed order
/// gives bit-identical results regardless of how chunks were scheduled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    /// Σ exp(v_i − max).
    scaled: f64,
    count: usize,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
            count: 0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.max == f64::NEG_INFINITY {
            self.count += other.count;
            return;
        }
        if self.max == f64::NEG_INFINITY {
            let count = self.count + other.count;
            *self = *other;
            self.count = count;
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// log Σ exp(v_i); −∞ when empty.
    pub fn log_sum(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    /// log of the arithmetic mean of exp(v_i).
    pub fn log_mean(&self) -> f64 {
        self.log_sum() - (self.count as f64).ln()
    }

    /// Share of the total mass carried by the single largest term.
    pub fn max_term_share(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            0.0
        } else {
            1.0 / self.scaled
        }
    }
}

/// log((1/n) Σ exp(v_i)), shifted by the maximum so that no exponential
/// overflows.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_mean_exp of an empty array".into()));
    }
    let mut acc = LogSumExp::default();
    for &v in values {
        acc.push(v);
    }
    Ok(acc.log_mean())
}
