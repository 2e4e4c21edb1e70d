//! Exact arithmetic in F_q, q = p^ell, for q <= 256.
//!
//! An element is its index in `[0, q)`, read in base `p` as the coefficient
//! vector of a residue polynomial (constant term in the least significant
//! digit). All four operations are served from precomputed tables, so a
//! [`Field`] is built once and shared behind an [`Arc`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared handle to a field.
pub type FieldRef = Arc<Field>;

/// Largest supported field size. Elements are stored in one byte.
pub const MAX_Q: u32 = 256;

/// Conway polynomials for the non-prime sizes with a fixed modulus,
/// coefficients constant term first, monic leading coefficient included.
const FIXED_MODULI: &[(u32, &[u32])] = &[
    (4, &[1, 1, 1]),
    (8, &[1, 1, 0, 1]),
    (9, &[2, 2, 1]),
    (16, &[1, 1, 0, 0, 1]),
    (25, &[2, 4, 1]),
    (27, &[1, 2, 0, 1]),
    (32, &[1, 0, 1, 0, 0, 1]),
];

/// A finite field F_q with its multiplication and inversion tables.
#[derive(Clone)]
pub struct Field {
    p: u32,
    ell: u32,
    q: u32,
    /// Monic modulus, constant term first, length `ell + 1`. Empty for prime fields.
    modulus: Vec<u32>,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.modulus == other.modulus
    }
}
impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)?;
        if !self.modulus.is_empty() {
            write!(f, "[{}]", join(&self.modulus, ","))?;
        }
        Ok(())
    }
}

fn join(v: &[u32], sep: &str) -> String {
    v.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Returns `(p, ell)` with `q = p^ell`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let (mut rest, mut ell) = (q, 0);
    while rest % p == 0 {
        rest /= p;
        ell += 1;
    }
    (rest == 1 && is_prime(p)).then_some((p, ell))
}

// Dense polynomials over F_p, constant term first.

fn poly_trim(a: &mut Vec<u32>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = pow_mod(m[dm], p - 2, p);
    while r.len() > dm && !(r.len() == 1 && r[0] == 0) {
        let shift = r.len() - 1 - dm;
        let c = r[r.len() - 1] * lead_inv % p;
        for (i, &mi) in m.iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - c * mi % p) % p;
        }
        poly_trim(&mut r);
        if r.len() - 1 < dm {
            break;
        }
    }
    r
}

fn pow_mod(mut b: u32, mut e: u32, p: u32) -> u32 {
    let mut acc = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// Trial division of `m` by every monic polynomial of degree `1..=deg(m)/2`.
fn is_irreducible(m: &[u32], p: u32) -> bool {
    let deg = m.len() - 1;
    for d in 1..=deg / 2 {
        let count = (p as usize).pow(d as u32);
        for low in 0..count {
            let mut div = Vec::with_capacity(d + 1);
            let mut x = low;
            for _ in 0..d {
                div.push((x % p as usize) as u32);
                x /= p as usize;
            }
            div.push(1);
            let r = poly_rem(m, &div, p);
            if r.iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl Field {
    /// Builds F_q. Prime `q` and the fixed table sizes need no modulus.
    pub fn new(q: u32) -> Result<FieldRef> {
        let (_, ell) =
            prime_power(q).ok_or_else(|| Error::Config(format!("q={q} is not a prime power")))?;
        if ell == 1 {
            return Self::build(q, Vec::new());
        }
        match FIXED_MODULI.iter().find(|(size, _)| *size == q) {
            Some((_, m)) => Self::build(q, m.to_vec()),
            None => Err(Error::Config(format!(
                "q={q} has no built-in modulus; supply modulus=<coefficients>"
            ))),
        }
    }

    /// Builds F_q from an explicit modulus (constant term first). The leading
    /// coefficient may be given explicitly (length `ell + 1`, last entry 1) or
    /// left implicit (length `ell`).
    pub fn with_modulus(q: u32, coeffs: &[u32]) -> Result<FieldRef> {
        let (p, ell) =
            prime_power(q).ok_or_else(|| Error::Config(format!("q={q} is not a prime power")))?;
        if ell == 1 {
            if coeffs.is_empty() {
                return Self::build(q, Vec::new());
            }
            return Err(Error::Config(format!("prime field F_{q} takes no modulus")));
        }
        let mut m = coeffs.to_vec();
        if m.len() == ell as usize {
            m.push(1);
        }
        if m.len() != ell as usize + 1 || m[ell as usize] != 1 {
            return Err(Error::Config(format!(
                "modulus for q={q} must be monic of degree {ell}"
            )));
        }
        if m.iter().any(|&c| c >= p) {
            return Err(Error::Config(format!(
                "modulus coefficients must lie in [0, {p})"
            )));
        }
        Self::build(q, m)
    }

    /// Parses `"q=<int>"` with an optional `"modulus=<c0,c1,...>"`, in any order.
    pub fn from_config(text: &str) -> Result<FieldRef> {
        let mut q = None;
        let mut modulus = None;
        for tok in text.split_whitespace() {
            if let Some(v) = tok.strip_prefix("q=") {
                q = Some(
                    v.parse::<u32>()
                        .map_err(|_| Error::Config(format!("bad q: {v}")))?,
                );
            } else if let Some(v) = tok.strip_prefix("modulus=") {
                modulus = Some(parse_coeffs(v)?);
            }
        }
        let q = q.ok_or_else(|| Error::Config("missing q=<int>".into()))?;
        match modulus {
            Some(m) => Self::with_modulus(q, &m),
            None => Self::new(q),
        }
    }

    fn build(q: u32, modulus: Vec<u32>) -> Result<FieldRef> {
        let (p, ell) =
            prime_power(q).ok_or_else(|| Error::Config(format!("q={q} is not a prime power")))?;
        if q > MAX_Q {
            return Err(Error::Config(format!(
                "q={q} exceeds the supported maximum {MAX_Q}"
            )));
        }
        if ell > 1 && !is_irreducible(&modulus, p) {
            return Err(Error::Config(format!(
                "modulus [{}] is reducible over F_{p}",
                join(&modulus, ",")
            )));
        }
        let qs = q as usize;
        let digits = |x: usize| -> Vec<u32> {
            let mut v = Vec::with_capacity(ell as usize);
            let mut x = x;
            for _ in 0..ell {
                v.push((x % p as usize) as u32);
                x /= p as usize;
            }
            v
        };
        let undigits = |v: &[u32]| -> u8 {
            v.iter()
                .rev()
                .fold(0usize, |acc, &c| acc * p as usize + c as usize) as u8
        };
        let mut add = vec![0u8; qs * qs];
        let mut mul = vec![0u8; qs * qs];
        for a in 0..qs {
            let da = digits(a);
            for b in 0..qs {
                let db = digits(b);
                let sum: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a * qs + b] = undigits(&sum);
                let prod = if ell == 1 {
                    vec![(a as u32 * b as u32) % p]
                } else {
                    let mut raw = vec![0u32; 2 * ell as usize - 1];
                    for (i, x) in da.iter().enumerate() {
                        for (j, y) in db.iter().enumerate() {
                            raw[i + j] = (raw[i + j] + x * y) % p;
                        }
                    }
                    let mut r = poly_rem(&raw, &modulus, p);
                    r.resize(ell as usize, 0);
                    r
                };
                mul[a * qs + b] = undigits(&prod);
            }
        }
        let mut neg = vec![0u8; qs];
        for a in 0..qs {
            neg[a] = (0..qs).find(|&b| add[a * qs + b] == 0).unwrap() as u8;
        }
        let mut field = Field {
            p,
            ell,
            q,
            modulus,
            add,
            mul,
            neg,
            inv: vec![0u8; qs],
        };
        // a^{q-2}
        for a in 1..qs {
            field.inv[a] = field.pow(a as u8, q as u64 - 2);
        }
        Ok(Arc::new(field))
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn ell(&self) -> u32 {
        self.ell
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    /// Number of elements as a `usize`.
    pub fn size(&self) -> usize {
        self.q as usize
    }
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.q as usize + b as usize]
    }
    #[inline]
    pub fn sub(&self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg[b as usize])
    }
    #[inline]
    pub fn neg(&self, a: u8) -> u8 {
        self.neg[a as usize]
    }
    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.q as usize + b as usize]
    }

    /// Multiplicative inverse; zero has none.
    pub fn inv(&self, a: u8) -> Result<u8> {
        if a == 0 {
            return Err(Error::Domain("zero has no multiplicative inverse".into()));
        }
        Ok(self.inv[a as usize])
    }

    /// Inverse of a value already known to be nonzero.
    #[inline]
    pub(crate) fn inv_nonzero(&self, a: u8) -> u8 {
        debug_assert!(a != 0);
        self.inv[a as usize]
    }

    pub fn pow(&self, a: u8, mut e: u64) -> u8 {
        let mut base = a;
        let mut acc = 1u8;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// All elements in index order `0..q`.
    pub fn elements(&self) -> impl Iterator<Item = u8> {
        (0..self.q).map(|x| x as u8)
    }

    /// Typed view of an element, checked against the field size.
    pub fn elem(&self, index: u32) -> Result<Elem<'_>> {
        if index >= self.q {
            return Err(Error::Domain(format!(
                "element {index} not in F_{}",
                self.q
            )));
        }
        Ok(Elem {
            field: self,
            index: index as u8,
        })
    }

    /// The configuration string this field parses back from.
    pub fn config_string(&self) -> String {
        if self.modulus.is_empty() {
            format!("q={}", self.q)
        } else {
            format!("q={} modulus={}", self.q, join(&self.modulus, ","))
        }
    }
}

/// Parses comma separated F_p coefficients.
pub fn parse_coeffs(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("bad coefficient {c:?}")))
        })
        .collect()
}

/// Enumerates the field in index order.
pub fn enumerate_field(field: &Field) -> Vec<Elem<'_>> {
    field.elements().map(|i| Elem { field, index: i }).collect()
}

/// An element bound to its field. Mixing fields is a configuration error.
#[derive(Clone, Copy)]
pub struct Elem<'f> {
    field: &'f Field,
    index: u8,
}

impl fmt::Debug for Elem<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:?}", self.index, self.field)
    }
}

impl PartialEq for Elem<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index && self.field == other.field
    }
}

impl<'f> Elem<'f> {
    pub fn index(&self) -> u8 {
        self.index
    }

    fn same_field(&self, other: &Elem<'_>) -> Result<()> {
        if std::ptr::eq(self.field, other.field) || self.field == other.field {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "elements from different fields: {:?} vs {:?}",
                self.field, other.field
            )))
        }
    }

    pub fn try_add(self, other: Elem<'_>) -> Result<Elem<'f>> {
        self.same_field(&other)?;
        Ok(Elem {
            field: self.field,
            index: self.field.add(self.index, other.index),
        })
    }

    pub fn try_mul(self, other: Elem<'_>) -> Result<Elem<'f>> {
        self.same_field(&other)?;
        Ok(Elem {
            field: self.field,
            index: self.field.mul(self.index, other.index),
        })
    }

    pub fn inv(self) -> Result<Elem<'f>> {
        Ok(Elem {
            field: self.field,
            index: self.field.inv(self.index)?,
        })
    }

    pub fn pow(self, e: u64) -> Elem<'f> {
        Elem {
            field: self.field,
            index: self.field.pow(self.index, e),
        }
    }
}
