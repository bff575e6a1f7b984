//! Scale sequences `(a_n)` defining a 4-corner Cantor set.
//!
//! Every supported kind is stored as one period of ratios: constant sequences
//! have period one, explicit prefixes are extended by cycling, and
//! perturbations of a periodic base are periodic with period
//! `lcm(base period, pattern period)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// How a sequence was specified. Kept for reporting; all kinds share the same
/// periodic storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SequenceKind {
    Constant,
    Periodic,
    /// Finite prefix, extended past its end by cycling the prefix.
    ExplicitPrefix,
    PerturbationOfBase {
        delta: f64,
        pattern: PerturbationPattern,
    },
}

/// Sign pattern `s_n` used when perturbing a base sequence by `delta * s_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationPattern {
    /// `s_n = +1, -1, +1, ...` starting at `n = 1`.
    #[default]
    Alternating,
    /// `s_n = +1` for all `n`.
    ConstantSign,
}

impl PerturbationPattern {
    fn signs(self) -> &'static [i8] {
        match self {
            PerturbationPattern::Alternating => &[1, -1],
            PerturbationPattern::ConstantSign => &[1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSequence<T> {
    kind: SequenceKind,
    period: Vec<T>,
    lower: T,
    upper: T,
}

impl<T: Real> ScaleSequence<T> {
    pub fn constant(a: T) -> Result<Self> {
        Self::build(SequenceKind::Constant, vec![a], None)
    }

    pub fn periodic(values: Vec<T>) -> Result<Self> {
        Self::build(SequenceKind::Periodic, values, None)
    }

    /// An explicit prefix `a_1..a_p`; generations past `p` cycle the prefix.
    pub fn explicit_prefix(prefix: Vec<T>) -> Result<Self> {
        Self::build(SequenceKind::ExplicitPrefix, prefix, None)
    }

    /// Replaces the default bounds (the extreme ratios of the period) with
    /// explicit `A_lo`, `A_hi`.
    pub fn with_bounds(self, lower: T, upper: T) -> Result<Self> {
        Self::build(self.kind, self.period, Some((lower, upper)))
    }

    /// `a'_n = a_n + delta * s_n`. Fails if any perturbed ratio leaves `(0, 1/2)`.
    pub fn perturbed(&self, delta: T, pattern: PerturbationPattern) -> Result<Self> {
        let signs = pattern.signs();
        let len = lcm(self.period.len(), signs.len());
        let period = (0..len)
            .map(|i| {
                let s = if signs[i % signs.len()] > 0 { T::one() } else { -T::one() };
                self.period[i % self.period.len()] + delta * s
            })
            .collect();
        let kind = SequenceKind::PerturbationOfBase {
            delta: delta.as_f64(),
            pattern,
        };
        Self::build(kind, period, None)
    }

    fn build(kind: SequenceKind, period: Vec<T>, bounds: Option<(T, T)>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidSequence("empty ratio list".into()));
        }
        let half = T::lit(0.5);
        for (i, &a) in period.iter().enumerate() {
            if !a.is_finite() || a <= T::zero() || a >= half {
                return Err(Error::InvalidSequence(format!(
                    "a_{} = {} outside the open interval (0, 1/2)",
                    i + 1,
                    a
                )));
            }
        }
        let min = period.iter().copied().fold(T::infinity(), T::min);
        let max = period.iter().copied().fold(T::neg_infinity(), T::max);
        let (lower, upper) = bounds.unwrap_or((min, max));
        if !(lower > T::zero() && lower <= upper && upper < half) {
            return Err(Error::InvalidSequence(format!(
                "bounds must satisfy 0 < A_lo <= A_hi < 1/2, got [{lower}, {upper}]"
            )));
        }
        if min < lower || max > upper {
            return Err(Error::InvalidSequence(format!(
                "ratios span [{min}, {max}], outside bounds [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            kind,
            period,
            lower,
            upper,
        })
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn period(&self) -> &[T] {
        &self.period
    }

    /// `(A_lo, A_hi)`.
    pub fn bounds(&self) -> (T, T) {
        (self.lower, self.upper)
    }

    /// The ratio `a_n` for `n >= 1`.
    ///
    /// # Panics
    /// If `n == 0`; generations of ratios start at one.
    #[inline]
    pub fn ratio(&self, n: usize) -> T {
        assert!(n >= 1, "scale ratios are indexed from n = 1");
        self.period[(n - 1) % self.period.len()]
    }

    /// `l(n) = a_1 ... a_n`, with `l(0) = 1`.
    pub fn sidelength(&self, n: usize) -> T {
        (1..=n).fold(T::one(), |acc, i| acc * self.ratio(i))
    }

    /// `l(0), ..., l(n)` computed by the same running product as [`Self::sidelength`].
    pub fn sidelengths(&self, n: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = T::one();
        out.push(acc);
        for i in 1..=n {
            acc = acc * self.ratio(i);
            out.push(acc);
        }
        out
    }

    /// `a_1..a_depth` as `f64`, the only part of the sequence that affects a
    /// depth-`depth` approximation.
    pub fn prefix_f64(&self, depth: usize) -> Vec<f64> {
        (1..=depth).map(|n| self.ratio(n).as_f64()).collect()
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// `l(n)` for `seq`; `1` for `n = 0`.
pub fn sidelength<T: Real>(seq: &ScaleSequence<T>, n: usize) -> T {
    seq.sidelength(n)
}
