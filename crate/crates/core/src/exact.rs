//! Exact rationals and certified interval bounds for `ln` and `exp`.
//!
//! The parameters `s_k` and `Q_k` are ceilings of irrational numbers. They
//! are evaluated on dyadic intervals with outward rounding; the precision is
//! doubled until both endpoints share the same ceiling.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for distances and probabilities of small tables.
pub type Rational = Ratio<i128>;

pub fn big(r: Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn to_f64(r: &BigRational) -> f64 {
    // Scale to avoid overflow in to_f64 on huge numerators and denominators.
    let n = r.numer().bits() as i64;
    let d = r.denom().bits() as i64;
    let shift = (n.max(d) - 60).max(0) as u32;
    let num = (r.numer() >> shift).to_f64().unwrap_or(0.0);
    let den = (r.denom() >> shift).to_f64().unwrap_or(1.0);
    if den == 0.0 {
        return f64::INFINITY * num.signum();
    }
    num / den
}

pub fn rat_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits
}

fn round_down(x: &BigRational, bits: u32) -> BigRational {
    let s = pow2(bits);
    BigRational::new(
        (x * BigRational::from_integer(s.clone()))
            .floor()
            .to_integer(),
        s,
    )
}

fn round_up(x: &BigRational, bits: u32) -> BigRational {
    let s = pow2(bits);
    BigRational::new(
        (x * BigRational::from_integer(s.clone()))
            .ceil()
            .to_integer(),
        s,
    )
}

/// A closed interval `[lo, hi]` of rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn point(x: BigRational) -> Self {
        Interval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub fn scale(&self, c: &BigRational) -> Interval {
        self.mul(&Interval::point(c.clone()))
    }

    /// Reciprocal of a strictly positive interval.
    pub fn recip(&self) -> Interval {
        assert!(
            self.lo.is_positive(),
            "reciprocal of a non-positive interval"
        );
        Interval {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        }
    }

    fn outward(&self, bits: u32) -> Interval {
        Interval {
            lo: round_down(&self.lo, bits),
            hi: round_up(&self.hi, bits),
        }
    }
}

/// `atanh(z)` for `0 <= z <= 1/3`.
fn atanh_small(z: &BigRational, bits: u32) -> Interval {
    let z2 = z * z;
    let eps = BigRational::new(BigInt::one(), pow2(bits + 8));
    let work = bits + 16;
    let mut power = z.clone();
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    let mut i = 0u32;
    loop {
        let term = &power / BigRational::from_integer(BigInt::from(2 * i + 1));
        lo += round_down(&term, work);
        hi += round_up(&term, work);
        power = &power * &z2;
        i += 1;
        // sum_{j >= i} z^(2j+1)/(2j+1) <= z^(2i+1) / ((2i+1)(1 - z^2))
        let tail = &power
            / BigRational::from_integer(BigInt::from(2 * i + 1))
            / (BigRational::one() - &z2);
        if tail < eps || z.is_zero() {
            return Interval {
                lo,
                hi: hi + round_up(&tail, work),
            };
        }
    }
}

/// Certified enclosure of `ln x` for rational `x > 0`.
pub fn ln(x: &BigRational, bits: u32) -> Result<Interval> {
    if !x.is_positive() {
        return Err(Error::Domain("logarithm of a non-positive number".into()));
    }
    if x.is_one() {
        return Ok(Interval::point(BigRational::zero()));
    }
    // x = 2^e * y with 1 <= y < 2.
    let two = BigRational::from_integer(BigInt::from(2));
    let mut e: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let mut y = x / two_pow(e);
    while y >= two {
        y /= &two;
        e += 1;
    }
    while y < BigRational::one() {
        y *= &two;
        e -= 1;
    }
    let one = BigRational::one();
    let z = (&y - &one) / (&y + &one);
    let ln_y = atanh_small(&z, bits).scale(&two);
    let ln2 = atanh_small(&BigRational::new(BigInt::one(), BigInt::from(3)), bits).scale(&two);
    Ok(ln2
        .scale(&BigRational::from_integer(BigInt::from(e)))
        .add(&ln_y)
        .outward(bits))
}

fn two_pow(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Certified enclosure of `exp(y)` for rational `y >= 0`.
fn exp_point(y: &BigRational, bits: u32) -> Interval {
    // Halve until y / 2^r <= 1/2, sum the Taylor series, then square r times.
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut r = 0u32;
    let mut u = y.clone();
    while u > half {
        u /= BigRational::from_integer(BigInt::from(2));
        r += 1;
    }
    let work = bits + 2 * r + 16;
    let eps = BigRational::new(BigInt::one(), pow2(work));
    let two = BigRational::from_integer(BigInt::from(2));
    let (mut t_lo, mut t_hi) = (BigRational::one(), BigRational::one());
    let (mut lo, mut hi) = (BigRational::zero(), BigRational::zero());
    let mut i = 0u32;
    loop {
        lo += &t_lo;
        hi += &t_hi;
        i += 1;
        let div = BigRational::from_integer(BigInt::from(i));
        t_lo = round_down(&(&t_lo * &u / &div), work + 8);
        t_hi = round_up(&(&t_hi * &u / &div), work + 8);
        // The remainder is at most twice the next term because u <= 1/2.
        if t_hi < eps {
            let mut iv = Interval {
                lo: lo.clone(),
                hi: &hi + &t_hi * &two,
            }
            .outward(work);
            for _ in 0..r {
                iv = iv.mul(&iv).outward(work);
            }
            return iv;
        }
    }
}

/// Certified enclosure of `exp` over a non-negative interval.
pub fn exp(y: &Interval, bits: u32) -> Interval {
    assert!(
        !y.lo.is_negative(),
        "exp is only needed for non-negative arguments"
    );
    let lo = exp_point(&y.lo, bits).lo;
    let hi = exp_point(&y.hi, bits).hi;
    Interval { lo, hi }
}

/// Ceiling of a real known through enclosures of increasing precision.
pub fn certified_ceil(mut enclose: impl FnMut(u32) -> Result<Interval>) -> Result<BigInt> {
    let mut bits = 64;
    while bits <= 1 << 14 {
        let iv = enclose(bits)?;
        let (a, b) = (iv.lo.ceil().to_integer(), iv.hi.ceil().to_integer());
        if a == b {
            return Ok(a);
        }
        bits *= 2;
    }
    Err(Error::Budget(
        "ceiling not resolved at 16384 bits of precision".into(),
    ))
}

/// The distance parameter of a family. For Reed-Muller codes it is
/// `q^(-d/(q-1))`, usually irrational, kept symbolically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delta0 {
    QPower { q: u32, d: u32 },
    Exact { num: i128, den: i128 },
}

impl Delta0 {
    pub fn exact(r: Rational) -> Self {
        Delta0::Exact {
            num: *r.numer(),
            den: *r.denom(),
        }
    }

    /// Compares `x` with the distance parameter exactly.
    pub fn cmp_value(&self, x: &BigRational) -> Ordering {
        match self {
            Delta0::Exact { num, den } => {
                x.cmp(&BigRational::new(BigInt::from(*num), BigInt::from(*den)))
            }
            Delta0::QPower { q, d } => {
                if !x.is_positive() {
                    return Ordering::Less;
                }
                // x vs q^(-d/(q-1))  <=>  x^(q-1) * q^d vs 1
                let lhs = num_traits::pow(x.clone(), (*q - 1) as usize)
                    * BigRational::from_integer(BigInt::from(*q).pow(*d));
                lhs.cmp(&BigRational::one())
            }
        }
    }

    /// `x >= delta0`.
    pub fn le(&self, x: &BigRational) -> bool {
        self.cmp_value(x) != Ordering::Less
    }

    /// `delta0 > 2x`: `x` is strictly inside the unique-decoding radius.
    pub fn exceeds_twice(&self, x: Rational) -> bool {
        let two_x = big(x) * BigRational::from_integer(BigInt::from(2));
        self.cmp_value(&two_x) == Ordering::Less
    }

    /// `delta0 / c > x`, used for thresholds such as `eps < delta0 / 6`.
    pub fn exceeds_scaled(&self, c: i128, x: Rational) -> bool {
        self.cmp_value(&(big(x) * BigRational::from_integer(BigInt::from(c)))) == Ordering::Less
    }

    /// Enclosure of `1 / delta0`.
    pub fn recip_interval(&self, bits: u32) -> Result<Interval> {
        match self {
            Delta0::Exact { num, den } => {
                if *num <= 0 {
                    return Err(Error::Domain("zero distance parameter".into()));
                }
                Ok(Interval::point(BigRational::new(
                    BigInt::from(*den),
                    BigInt::from(*num),
                )))
            }
            Delta0::QPower { q, d } => {
                let lnq = ln(&BigRational::from_integer(BigInt::from(*q)), bits)?;
                let y = lnq.scale(&BigRational::new(BigInt::from(*d), BigInt::from(*q - 1)));
                Ok(exp(&y, bits))
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Delta0::Exact { num, den } => *num as f64 / *den as f64,
            Delta0::QPower { q, d } => (*q as f64).powf(-(*d as f64) / (*q as f64 - 1.0)),
        }
    }
}

impl fmt::Display for Delta0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta0::Exact { num, den } => write!(f, "{num}/{den}"),
            Delta0::QPower { q, d } => write!(f, "{q}^(-{d}/{})", q - 1),
        }
    }
}

/// Natural log of a family's size: `dim * ln q` for linear codes, `ln(count)` otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogSize {
    Linear { dim: usize, q: u32 },
    Count(BigUint),
}

impl LogSize {
    pub fn interval(&self, bits: u32) -> Result<Interval> {
        match self {
            LogSize::Linear { dim, q } => {
                Ok(ln(&BigRational::from_integer(BigInt::from(*q)), bits)?
                    .scale(&BigRational::from_integer(BigInt::from(*dim))))
            }
            LogSize::Count(c) => ln(&BigRational::from_integer(BigInt::from(c.clone())), bits),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LogSize::Linear { dim, .. } => *dim == 0,
            LogSize::Count(c) => c.is_one(),
        }
    }
}

/// `ceil(100 * ln|C| / delta0) + 1`.
pub fn hundred_log_over_delta(log_size: &LogSize, delta0: &Delta0) -> Result<u64> {
    if log_size.is_zero() {
        return Ok(1);
    }
    let hundred = BigRational::from_integer(BigInt::from(100));
    let c = certified_ceil(|bits| {
        Ok(log_size
            .interval(bits)?
            .mul(&delta0.recip_interval(bits)?)
            .scale(&hundred))
    })?;
    (c + 1u32)
        .to_u64()
        .ok_or_else(|| Error::Budget("parameter exceeds 64 bits".into()))
}

/// `ceil(a / b)` for positive integers.
pub fn div_ceil(a: u128, b: u128) -> u128 {
    Integer::div_ceil(&a, &b)
}

/// Serializes a rational as `"num/den"` (or `"num"` when integral).
pub fn ser_rational<S: serde::Serializer>(
    r: &Rational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}
