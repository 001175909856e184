//! Exact rational intervals with directed-rounding transcendentals.
//!
//! `exp` and `ln` are evaluated by series over `BigRational` with explicit
//! tail bounds, so every returned interval rigorously encloses the true
//! value. Interval width is driven down to `2^-precision` of the result's
//! magnitude; comparisons against thresholds are three-valued and never
//! silently decided when the interval straddles the threshold.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Default interval precision in bits.
pub const DEFAULT_PRECISION: u32 = 128;

/// A closed interval with exact rational endpoints, `lo <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

/// Outcome of comparing an interval against an exact threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalOrdering {
    Below,
    Above,
    Indeterminate,
}

impl fmt::Display for IntervalOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalOrdering::Below => write!(f, "below"),
            IntervalOrdering::Above => write!(f, "above"),
            IntervalOrdering::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

impl RatInterval {
    pub fn exact(v: BigRational) -> Self {
        RatInterval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi);
        RatInterval { lo, hi }
    }

    pub fn zero() -> Self {
        RatInterval::exact(BigRational::zero())
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(BigInt::from(2))
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn add_exact(&self, v: &BigRational) -> RatInterval {
        RatInterval {
            lo: &self.lo + v,
            hi: &self.hi + v,
        }
    }

    /// Multiply by an exact nonnegative rational.
    pub fn scale_nonneg(&self, v: &BigRational) -> RatInterval {
        debug_assert!(!v.is_negative());
        RatInterval {
            lo: &self.lo * v,
            hi: &self.hi * v,
        }
    }

    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let candidates = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = candidates.iter().min().unwrap().clone();
        let hi = candidates.iter().max().unwrap().clone();
        RatInterval { lo, hi }
    }

    pub fn neg(&self) -> RatInterval {
        RatInterval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn compare(&self, threshold: &BigRational) -> IntervalOrdering {
        if &self.hi < threshold {
            IntervalOrdering::Below
        } else if &self.lo > threshold {
            IntervalOrdering::Above
        } else {
            IntervalOrdering::Indeterminate
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering of both endpoints, enough digits to show the width.
    pub fn decimal(&self, digits: usize) -> (String, String) {
        (
            decimal_string(&self.lo, digits),
            decimal_string(&self.hi, digits),
        )
    }
}

fn pow2(bits: u32) -> BigRational {
    BigRational::from_integer(BigInt::one() << bits as usize)
}

fn tolerance(precision: u32) -> BigRational {
    BigRational::one() / pow2(precision)
}

/// `exp(x)` for exact rational `x`, enclosed to roughly `2^-precision`
/// relative width. Large arguments are range-reduced by halving, then the
/// Taylor series is summed exactly with a geometric tail bound.
pub fn exp_rat(x: &BigRational, precision: u32) -> RatInterval {
    if x.is_zero() {
        return RatInterval::exact(BigRational::one());
    }
    if x.is_negative() {
        let pos = exp_rat(&-x.clone(), precision + 2);
        // exact reciprocal, endpoints swap
        return RatInterval {
            lo: pos.hi.recip(),
            hi: pos.lo.recip(),
        };
    }
    // halve until the argument is <= 1, square back afterwards
    let mut halvings = 0u32;
    let mut arg = x.clone();
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    while arg > one {
        arg /= &two;
        halvings += 1;
    }
    // each squaring roughly doubles relative width
    let work_precision = precision + 2 * halvings + 8;
    let tol = tolerance(work_precision);

    let mut sum = BigRational::one();
    let mut term = BigRational::one();
    let mut k = BigInt::one();
    loop {
        term = term * &arg / BigRational::from_integer(k.clone());
        sum += &term;
        k += 1;
        // once k >= 2, next terms shrink by factor <= arg/k <= 1/2:
        // tail <= term * sum of (1/2)^j = term
        if k >= BigInt::from(2) && &term * &two <= tol {
            break;
        }
    }
    let mut iv = RatInterval {
        lo: sum.clone(),
        hi: sum + &term * &two,
    };
    for _ in 0..halvings {
        // argument was positive, endpoints are >= 1
        iv = RatInterval {
            lo: &iv.lo * &iv.lo,
            hi: &iv.hi * &iv.hi,
        };
    }
    iv
}

/// `exp` over an interval argument.
pub fn exp_interval(x: &RatInterval, precision: u32) -> RatInterval {
    let lo = exp_rat(&x.lo, precision);
    let hi = exp_rat(&x.hi, precision);
    RatInterval {
        lo: lo.lo,
        hi: hi.hi,
    }
}

/// `ln 2` enclosure via `2·atanh(1/3)`.
pub fn ln2(precision: u32) -> RatInterval {
    atanh_small(&BigRational::new(BigInt::one(), BigInt::from(3)), precision)
        .scale_nonneg(&BigRational::from_integer(BigInt::from(2)))
}

/// `atanh(t)` for |t| < 1/2, series with geometric tail bound.
fn atanh_small(t: &BigRational, precision: u32) -> RatInterval {
    let tol = tolerance(precision + 4);
    let t2 = t * t;
    let mut sum = t.clone();
    let mut power = t.clone();
    let mut k = 1u64;
    loop {
        power *= &t2;
        k += 2;
        let term = &power / BigRational::from_integer(BigInt::from(k));
        sum += &term;
        // tail <= |term| * t^2/(1-t^2) * ... <= |term| since |t| < 1/2
        if term.abs() <= tol {
            let bound = term.abs();
            return if t.is_negative() {
                RatInterval {
                    lo: &sum - &bound,
                    hi: sum.clone() + &bound,
                }
            } else {
                RatInterval {
                    lo: sum.clone(),
                    hi: &sum + &bound,
                }
            };
        }
    }
}

/// `ln(x)` for exact rational `x > 0`. Range-reduces by powers of two and
/// evaluates `ln m = 2·atanh((m-1)/(m+1))` on the mantissa.
pub fn ln_rat(x: &BigRational, precision: u32) -> Option<RatInterval> {
    if x.is_negative() || x.is_zero() {
        return None;
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let mut m = x.clone();
    let mut k: i64 = 0;
    while m >= BigRational::new(BigInt::from(4), BigInt::from(3)) {
        m /= &two;
        k += 1;
    }
    while m < BigRational::new(BigInt::from(2), BigInt::from(3)) {
        m *= &two;
        k -= 1;
    }
    // t = (m-1)/(m+1) ∈ (-1/5, 1/7]
    let t = (&m - BigRational::one()) / (&m + BigRational::one());
    let ln_m = atanh_small(&t, precision + 4).scale_nonneg(&two);
    let l2 = ln2(precision + 4);
    let k_rat = BigRational::from_integer(BigInt::from(k));
    let scaled = if k >= 0 {
        l2.scale_nonneg(&k_rat)
    } else {
        l2.scale_nonneg(&-k_rat.clone()).neg()
    };
    Some(ln_m.add(&scaled))
}

/// Fixed-point decimal rendering of a rational (round toward zero).
pub fn decimal_string(r: &BigRational, digits: usize) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = r.abs();
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = (abs.numer() * &scale) / abs.denom();
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part:0>width$}", width = digits)
    }
}

/// Serialize a rational as "numer/denom".
pub fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parse "numer/denom" or a plain integer.
pub fn parse_ratio(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let numer: BigInt = n.trim().parse().ok()?;
        let denom: BigInt = d.trim().parse().ok()?;
        if denom.is_zero() {
            return None;
        }
        Some(BigRational::new(numer, denom))
    } else {
        let numer: BigInt = s.parse().ok()?;
        Some(BigRational::from_integer(numer))
    }
}
