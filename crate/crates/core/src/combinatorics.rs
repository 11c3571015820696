//! Exact and log-space combinatorial primitives.
//!
//! Counts are carried as [`BigUint`] so that equality checks on small
//! instances stay exact; anything that only feeds a risk bound is carried as
//! a [`LogNumber`] (natural log) so it never overflows.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul};
use std::sync::{OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("cannot aggregate an empty list of log-space terms")]
    EmptySum,
}

/// A nonnegative real number stored as its natural logarithm.
///
/// Zero is represented by `-inf` and behaves as the additive identity and
/// the multiplicative absorbing element.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogNumber(f64);

impl LogNumber {
    pub const ZERO: LogNumber = LogNumber(f64::NEG_INFINITY);
    pub const ONE: LogNumber = LogNumber(0.0);

    /// Wraps a value that is already a natural logarithm.
    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "log-space value is NaN");
        LogNumber(ln)
    }

    pub fn from_value(x: f64) -> Self {
        assert!(x >= 0.0, "LogNumber requires a nonnegative value, got {x}");
        LogNumber(x.ln())
    }

    pub fn from_count(x: &BigUint) -> Self {
        LogNumber(ln_biguint(x))
    }

    pub fn from_u64(x: u64) -> Self {
        LogNumber((x as f64).ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn min(self, other: LogNumber) -> LogNumber {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: LogNumber) -> LogNumber {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl Mul for LogNumber {
    type Output = LogNumber;

    fn mul(self, rhs: LogNumber) -> LogNumber {
        if self.is_zero() || rhs.is_zero() {
            LogNumber::ZERO
        } else {
            LogNumber(self.0 + rhs.0)
        }
    }
}

impl Add for LogNumber {
    type Output = LogNumber;

    fn add(self, rhs: LogNumber) -> LogNumber {
        let (hi, lo) = if self.0 >= rhs.0 { (self, rhs) } else { (rhs, self) };
        if lo.is_zero() {
            return hi;
        }
        LogNumber(hi.0 + (lo.0 - hi.0).exp().ln_1p())
    }
}

impl fmt::Display for LogNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.0)
    }
}

/// Natural log of an arbitrary-precision integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        if let Some(v) = x.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    // keep the top 64 bits and account for the rest as a power of two
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().expect("64-bit value fits in f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// log(Σ exp(terms)) with the pivot at the largest term.
pub fn log_sum(terms: &[LogNumber]) -> Result<LogNumber, CombinatoricsError> {
    let pivot = terms
        .iter()
        .copied()
        .reduce(LogNumber::max)
        .ok_or(CombinatoricsError::EmptySum)?;
    if pivot.is_zero() {
        return Ok(LogNumber::ZERO);
    }
    if pivot.0 == f64::INFINITY {
        return Ok(pivot);
    }
    let cumul: f64 = terms.iter().map(|t| (t.0 - pivot.0).exp()).sum();
    Ok(LogNumber(pivot.0 + cumul.ln()))
}

pub fn binomial(m: u64, k: u64) -> BigUint {
    if k > m {
        return BigUint::zero();
    }
    let k = k.min(m - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= m - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

fn stirling_table() -> &'static RwLock<HashMap<(u64, u64), BigUint>> {
    static TABLE: OnceLock<RwLock<HashMap<(u64, u64), BigUint>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Stirling number of the second kind: the number of `c`-partitions of an
/// `m`-set.
pub fn stirling2(m: u64, c: u64) -> BigUint {
    if c > m {
        return BigUint::zero();
    }
    if c == 0 {
        return if m == 0 { BigUint::one() } else { BigUint::zero() };
    }
    if c == m || c == 1 {
        return BigUint::one();
    }
    if let Some(v) = stirling_table().read().unwrap().get(&(m, c)) {
        return v.clone();
    }
    // row recurrence S(i, j) = S(i-1, j-1) + j S(i-1, j)
    let mut row = vec![BigUint::zero(); c as usize + 1];
    row[0] = BigUint::one();
    for i in 1..=m {
        let upper = i.min(c) as usize;
        for j in (1..=upper).rev() {
            let carried = &row[j] * (j as u64);
            row[j] = &row[j - 1] + carried;
        }
        row[0] = BigUint::zero();
    }
    let value = row[c as usize].clone();
    stirling_table()
        .write()
        .unwrap()
        .insert((m, c), value.clone());
    value
}

/// Number of 2-partitions of an `m`-set having at least one part of size `k`.
pub fn stirling2_part_k(m: u64, k: u64) -> BigUint {
    if k == 0 || k >= m {
        return BigUint::zero();
    }
    let b = binomial(m, k);
    if 2 * k == m {
        b >> 1u32
    } else {
        b
    }
}

/// Number of structurally distinct (unordered) binary trees with `leaves`
/// leaves.
pub fn wedderburn_etherington(leaves: u64) -> BigUint {
    static TABLE: OnceLock<RwLock<Vec<BigUint>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RwLock::new(vec![BigUint::zero(), BigUint::one()]));
    if leaves == 0 {
        return BigUint::zero();
    }
    let n = leaves as usize;
    if let Some(v) = table.read().unwrap().get(n) {
        return v.clone();
    }
    let mut t = table.write().unwrap();
    while t.len() <= n {
        let l = t.len();
        let mut acc = BigUint::zero();
        for i in 1..=(l - 1) / 2 {
            acc += &t[i] * &t[l - i];
        }
        if l.is_multiple_of(2) {
            let h = &t[l / 2];
            acc += (h * (h + 1u32)) >> 1u32;
        }
        t.push(acc);
    }
    t[n].clone()
}

/// log of the falling factorial (n)_a = n (n-1) ... (n-a+1).
pub fn ln_falling_factorial(n: u64, a: u64) -> LogNumber {
    if a > n {
        return LogNumber::ZERO;
    }
    LogNumber::from_ln((0..a).map(|i| ((n - i) as f64).ln()).sum())
}
