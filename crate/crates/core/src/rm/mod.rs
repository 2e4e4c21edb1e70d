//! Reed-Muller codes, lifted codes, and the [`CodeFamily`] abstraction the testers run against.

mod lifted;
mod poly;

use std::ops::ControlFlow;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{hundred_log_over_delta, Delta0, LogSize, Rational};
use crate::functab::FunctionTable;
use crate::gf::{Field, FieldRef};
use crate::space::Space;

pub use lifted::{ExplicitFamily, LiftedCode};
pub use poly::{
    degree, evaluate, interpolate_reduced, interpolate_table, monomials, rm_dim, rm_membership,
    Transform,
};

/// Default cap on the number of codewords an exhaustive scan may visit.
pub const ENUMERATION_CAP: u128 = 1 << 22;

/// Largest dimension for which bases are cached.
const MAX_CACHED_DIM: usize = 32;

/// Evaluations of a linear code's basis at every point of F_q^k.
#[derive(Clone, Debug)]
pub struct LinearBasis {
    pub k: usize,
    pub dim: usize,
    /// Row-major `q^k x dim`: `evals[z * dim + j]` is basis function `j` at local point `z`.
    pub evals: Vec<u8>,
    /// Exponent vectors when the basis is monomial.
    pub monomials: Option<Vec<Vec<u8>>>,
}

impl LinearBasis {
    pub fn row(&self, z: usize) -> &[u8] {
        &self.evals[z * self.dim..(z + 1) * self.dim]
    }

    pub fn points(&self) -> usize {
        self.evals.len().checked_div(self.dim).unwrap_or(0)
    }

    /// Builds from basis tables given as rows of length `q^k`.
    pub fn from_tables(k: usize, tables: &[Vec<u8>], size: usize) -> Self {
        let dim = tables.len();
        let mut evals = vec![0u8; size * dim];
        for (j, t) in tables.iter().enumerate() {
            for (z, &v) in t.iter().enumerate() {
                evals[z * dim + j] = v;
            }
        }
        LinearBasis {
            k,
            dim,
            evals,
            monomials: None,
        }
    }

    /// The codeword with the given coefficient vector.
    pub fn combine(&self, f: &Field, coeffs: &[u8]) -> Vec<u8> {
        let n = self.points();
        (0..n)
            .map(|z| {
                self.row(z).iter().zip(coeffs).fold(0u8, |acc, (&b, &c)| {
                    if c == 0 {
                        acc
                    } else {
                        f.add(acc, f.mul(b, c))
                    }
                })
            })
            .collect()
    }

    /// Visits every codeword. Each odometer step adds one basis vector per changing digit.
    pub fn for_each_codeword(
        &self,
        f: &Field,
        size: usize,
        mut visit: impl FnMut(&[u8]) -> ControlFlow<()>,
    ) {
        let q = f.size();
        let mut digits = vec![0usize; self.dim];
        let mut word = vec![0u8; size];
        loop {
            if visit(&word).is_break() {
                return;
            }
            let mut j = 0;
            loop {
                if j == self.dim {
                    return;
                }
                for (z, w) in word.iter_mut().enumerate() {
                    let b = self.evals[z * self.dim + j];
                    if b != 0 {
                        *w = f.add(*w, b);
                    }
                }
                digits[j] += 1;
                if digits[j] < q {
                    break;
                }
                digits[j] = 0;
                j += 1;
            }
        }
    }
}

/// A family `{C_k}` of codes on F_q^k, one per dimension.
pub trait CodeFamily: Send + Sync {
    fn name(&self) -> String;
    fn field(&self) -> &FieldRef;
    /// Smallest dimension at which the restriction test is sound.
    fn base_dim(&self) -> usize;
    /// Lower bound on the relative distance of every `C_k` in use.
    fn delta0(&self) -> Delta0;
    fn contains(&self, f: &FunctionTable) -> Result<bool>;
    /// Basis evaluations when `C_k` is linear.
    fn linear_basis(&self, k: usize) -> Result<Option<Arc<LinearBasis>>>;
    /// `ln |C_k|`.
    fn log_size(&self, k: usize) -> Result<LogSize>;

    /// All codewords of `C_k`, refused above `cap`.
    fn codewords(&self, k: usize, cap: u128) -> Result<Vec<FunctionTable>> {
        let basis = self.linear_basis(k)?.ok_or_else(|| {
            Error::Unsupported(format!("{} is neither linear nor enumerable", self.name()))
        })?;
        let space = Space::new(self.field().clone(), k)?;
        check_cap(self.field().size(), basis.dim, cap)?;
        let mut out = Vec::new();
        basis.for_each_codeword(self.field(), space.size(), |w| {
            out.push(
                FunctionTable::from_values(space.clone(), w.to_vec()).expect("codeword shape"),
            );
            ControlFlow::Continue(())
        });
        Ok(out)
    }

    fn random_codeword(&self, n: usize, rng: &mut dyn RngCore) -> Result<FunctionTable> {
        let basis = self.linear_basis(n)?.ok_or_else(|| {
            Error::Unsupported(format!("{} cannot sample codewords at n={n}", self.name()))
        })?;
        let q = self.field().q();
        let coeffs: Vec<u8> = (0..basis.dim).map(|_| rng.gen_range(0..q) as u8).collect();
        let space = Space::new(self.field().clone(), n)?;
        FunctionTable::from_values(space, basis.combine(self.field(), &coeffs))
    }
}

fn check_cap(q: usize, dim: usize, cap: u128) -> Result<()> {
    let count = BigUint::from(q).pow(dim as u32);
    if count > BigUint::from(cap) {
        return Err(Error::Budget(format!(
            "{count} codewords exceed the enumeration cap {cap}; use plant-certified instances instead"
        )));
    }
    Ok(())
}

/// `t_{q,d} = ceil((d+1)/(q - q/p)) + 1`.
pub fn testing_dim(field: &Field, d: usize) -> usize {
    let (p, ell) = (field.p() as usize, field.ell());
    let denom = p.pow(ell) - p.pow(ell - 1);
    (d + 1).div_ceil(denom) + 1
}

/// Smallest dimension at which the RM restriction test is sound.
#[derive(Clone, Debug, Serialize)]
pub struct RmParameters {
    pub t: usize,
    /// The value an alternative reading gives for q = 2 (`d + 1`); reported, never used.
    pub t_alt_q2: Option<usize>,
    pub delta0: Delta0,
    pub s_k: u64,
}

pub fn rm_delta0(q: u32, d: usize) -> Delta0 {
    Delta0::QPower { q, d: d as u32 }
}

/// `s_k = ceil(100 ln|RM[k,q,d]| / delta0) + 1`.
pub fn s_k(field: &Field, d: usize, k: usize) -> Result<u64> {
    let dim = rm_dim(k, field.size(), d);
    hundred_log_over_delta(
        &LogSize::Linear {
            dim: dim as usize,
            q: field.q(),
        },
        &rm_delta0(field.q(), d),
    )
}

pub fn rm_parameters(field: &Field, d: usize, k: usize) -> Result<RmParameters> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    Ok(RmParameters {
        t: testing_dim(field, d),
        t_alt_q2: (field.q() == 2).then_some(d + 1),
        delta0: rm_delta0(field.q(), d),
        s_k: s_k(field, d, k)?,
    })
}

/// `Q_k = ceil(100 ln|C_k| / delta0) + 1`.
pub fn q_k_parameter(code: &dyn CodeFamily, k: usize) -> Result<u64> {
    hundred_log_over_delta(&code.log_size(k)?, &code.delta0())
}

/// Exact distance from `f` to the family at `f`'s dimension, by exhaustive scan.
pub fn exact_distance(f: &FunctionTable, code: &dyn CodeFamily) -> Result<Rational> {
    exact_distance_capped(f, code, ENUMERATION_CAP)
}

pub fn exact_distance_capped(
    f: &FunctionTable,
    code: &dyn CodeFamily,
    cap: u128,
) -> Result<Rational> {
    let vals = f.values()?;
    let n = f.n();
    let size = vals.len();
    let best = match code.linear_basis(n)? {
        Some(basis) => {
            check_cap(code.field().size(), basis.dim, cap)?;
            let mut best = size;
            basis.for_each_codeword(code.field(), size, |w| {
                let d = w.iter().zip(&vals).filter(|(a, b)| a != b).count();
                best = best.min(d);
                if best == 0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            best
        }
        None => code
            .codewords(n, cap)?
            .iter()
            .map(|g| {
                g.symbols()
                    .iter()
                    .zip(f.symbols())
                    .filter(|(a, b)| a != b)
                    .count()
            })
            .min()
            .unwrap_or(size),
    };
    Ok(Rational::new(best as i128, size as i128))
}

/// The Reed-Muller family `RM[k, q, d]`.
pub struct ReedMuller {
    field: FieldRef,
    d: usize,
    /// Low-degree soundness constant; only used in threshold reports.
    pub c_km: u32,
    transform: Transform,
    bases: Vec<OnceLock<Arc<LinearBasis>>>,
}

impl ReedMuller {
    pub fn new(field: FieldRef, d: usize) -> Self {
        let transform = Transform::new(&field);
        ReedMuller {
            field,
            d,
            c_km: 6,
            transform,
            bases: (0..=MAX_CACHED_DIM).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn with_c_km(mut self, c_km: u32) -> Self {
        self.c_km = c_km;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self, k: usize) -> u128 {
        rm_dim(k, self.field.size(), self.d)
    }

    fn build_basis(&self, k: usize) -> Result<LinearBasis> {
        let space = Space::new(self.field.clone(), k)?;
        let monos = monomials(k, self.field.size(), self.d);
        let dim = monos.len();
        let f = &self.field;
        let mut evals = vec![0u8; space.size() * dim];
        let mut x = vec![0u8; k];
        for z in 0..space.size() {
            space.coords_into(z, &mut x);
            for (j, e) in monos.iter().enumerate() {
                evals[z * dim + j] = e.iter().zip(&x).fold(1u8, |acc, (&ei, &xi)| {
                    if ei == 0 {
                        acc
                    } else {
                        f.mul(acc, f.pow(xi, ei as u64))
                    }
                });
            }
        }
        Ok(LinearBasis {
            k,
            dim,
            evals,
            monomials: Some(monos),
        })
    }

    /// Evaluates a coefficient table using the cached transform.
    pub fn evaluate(&self, space: &Space, coeffs: &[u8]) -> Result<FunctionTable> {
        let mut vals = coeffs.to_vec();
        self.transform.evaluate(&self.field, space.n(), &mut vals);
        FunctionTable::from_values(space.clone(), vals)
    }

    pub fn degree(&self, f: &FunctionTable) -> Result<i64> {
        let mut vals = f.values()?;
        self.transform.interpolate(&self.field, f.n(), &mut vals);
        Ok(poly::degree_of_coeffs(f.space(), &vals))
    }
}

impl CodeFamily for ReedMuller {
    fn name(&self) -> String {
        format!("RM[q={},d={}]", self.field.q(), self.d)
    }
    fn field(&self) -> &FieldRef {
        &self.field
    }
    fn base_dim(&self) -> usize {
        testing_dim(&self.field, self.d)
    }
    fn delta0(&self) -> Delta0 {
        rm_delta0(self.field.q(), self.d)
    }
    fn contains(&self, f: &FunctionTable) -> Result<bool> {
        if **f.field() != *self.field {
            return Err(Error::Config("table and code use different fields".into()));
        }
        Ok(self.degree(f)? <= self.d as i64)
    }
    fn linear_basis(&self, k: usize) -> Result<Option<Arc<LinearBasis>>> {
        if k <= MAX_CACHED_DIM {
            if let Some(b) = self.bases[k].get() {
                return Ok(Some(b.clone()));
            }
            let b = Arc::new(self.build_basis(k)?);
            return Ok(Some(self.bases[k].get_or_init(|| b).clone()));
        }
        Ok(Some(Arc::new(self.build_basis(k)?)))
    }
    fn log_size(&self, k: usize) -> Result<LogSize> {
        Ok(LogSize::Linear {
            dim: self.dim(k) as usize,
            q: self.field.q(),
        })
    }
    fn random_codeword(&self, n: usize, rng: &mut dyn RngCore) -> Result<FunctionTable> {
        // Random coefficients on the monomials of degree <= d, then one forward transform.
        let space = Space::new(self.field.clone(), n)?;
        let q = space.q();
        let mut coeffs = vec![0u8; space.size()];
        for e in 0..space.size() {
            let mut x = e;
            let mut deg = 0;
            while x > 0 {
                deg += x % q;
                x /= q;
            }
            if deg <= self.d {
                coeffs[e] = rng.gen_range(0..q) as u8;
            }
        }
        self.evaluate(&space, &coeffs)
    }
}
