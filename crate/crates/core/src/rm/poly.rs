//! Reduced polynomials over F_q: monomial bases, interpolation and evaluation.
//!
//! A coefficient table has the same shape as a function table: the entry at
//! point index `e` is the coefficient of `prod_j x_j^{e_j}`. Interpolation and
//! evaluation are tensor products of a univariate `q x q` transform.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::functab::FunctionTable;
use crate::gf::Field;
use crate::space::{Matrix, Space};

/// Univariate Vandermonde matrix `V[a][e] = a^e` (with `0^0 = 1`) and its inverse.
#[derive(Clone, Debug)]
pub struct Transform {
    q: usize,
    forward: Vec<u8>,
    inverse: Vec<u8>,
}

impl Transform {
    pub fn new(f: &Field) -> Self {
        let q = f.size();
        let mut forward = vec![0u8; q * q];
        for a in 0..q {
            for e in 0..q {
                forward[a * q + e] = f.pow(a as u8, e as u64);
            }
        }
        // Invert [V | I] by elimination.
        let mut aug = Matrix::zeros(q, 2 * q);
        for a in 0..q {
            for e in 0..q {
                aug.set(a, e, forward[a * q + e]);
            }
            aug.set(a, q + a, 1);
        }
        aug.rref_in_place(f);
        let mut inverse = vec![0u8; q * q];
        for r in 0..q {
            for c in 0..q {
                inverse[r * q + c] = aug.get(r, q + c);
            }
        }
        Transform {
            q,
            forward,
            inverse,
        }
    }

    fn apply(&self, f: &Field, n: usize, data: &mut [u8], m: &[u8]) {
        let q = self.q;
        let mut buf = vec![0u8; q];
        let mut stride = 1usize;
        for _ in 0..n {
            let block = stride * q;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (a, b) in buf.iter_mut().enumerate() {
                        *b = data[base + off + a * stride];
                    }
                    for r in 0..q {
                        let row = &m[r * q..(r + 1) * q];
                        let mut s = 0u8;
                        for (c, &v) in row.iter().zip(&buf) {
                            if *c != 0 && v != 0 {
                                s = f.add(s, f.mul(*c, v));
                            }
                        }
                        data[base + off + r * stride] = s;
                    }
                }
            }
            stride = block;
        }
    }

    /// Values on all of F_q^n -> coefficient table.
    pub fn interpolate(&self, f: &Field, n: usize, values: &mut [u8]) {
        let inv = self.inverse.clone();
        self.apply(f, n, values, &inv);
    }

    /// Coefficient table -> values on all of F_q^n.
    pub fn evaluate(&self, f: &Field, n: usize, coeffs: &mut [u8]) {
        let fwd = self.forward.clone();
        self.apply(f, n, coeffs, &fwd);
    }
}

/// Number of reduced monomials in `k` variables of total degree at most `d`.
pub fn rm_dim(k: usize, q: usize, d: usize) -> u128 {
    // ways[s] = number of exponent vectors over the variables so far with sum s.
    let mut ways = vec![0u128; d + 1];
    ways[0] = 1;
    for _ in 0..k {
        let mut next = vec![0u128; d + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for e in 0..q.min(d - s + 1) {
                next[s + e] += w;
            }
        }
        ways = next;
    }
    ways.iter().sum()
}

/// Exponent vectors of total degree at most `d`, per-variable degree at most
/// `q - 1`, in graded order (by degree, then lexicographically descending).
pub fn monomials(k: usize, q: usize, d: usize) -> Vec<Vec<u8>> {
    fn go(i: usize, k: usize, q: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if i == k {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in (0..q.min(left + 1)).rev() {
            cur.push(e as u8);
            go(i + 1, k, q, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=d.min(k * (q - 1)) {
        go(0, k, q, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Coefficient table of the unique reduced polynomial agreeing with `f`.
pub fn interpolate_table(f: &FunctionTable) -> Result<Vec<u8>> {
    let mut vals = f.values()?;
    Transform::new(f.field()).interpolate(f.field(), f.n(), &mut vals);
    Ok(vals)
}

/// Nonzero coefficients keyed by exponent vector.
pub fn interpolate_reduced(f: &FunctionTable) -> Result<BTreeMap<Vec<u8>, u8>> {
    let coeffs = interpolate_table(f)?;
    let space = f.space();
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(e, &c)| (space.coords(e), c))
        .collect())
}

/// Total degree of the reduced polynomial; -1 for the zero function.
pub fn degree(f: &FunctionTable) -> Result<i64> {
    let coeffs = interpolate_table(f)?;
    Ok(degree_of_coeffs(f.space(), &coeffs))
}

pub(crate) fn degree_of_coeffs(space: &Space, coeffs: &[u8]) -> i64 {
    let q = space.q();
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(mut e, _)| {
            let mut s = 0i64;
            while e > 0 {
                s += (e % q) as i64;
                e /= q;
            }
            s
        })
        .max()
        .unwrap_or(-1)
}

pub fn rm_membership(f: &FunctionTable, d: usize) -> Result<bool> {
    Ok(degree(f)? <= d as i64)
}

/// Evaluates a coefficient table on all points.
pub fn evaluate(space: &Space, coeffs: &[u8]) -> Result<FunctionTable> {
    let mut vals = coeffs.to_vec();
    Transform::new(space.field()).evaluate(space.field(), space.n(), &mut vals);
    FunctionTable::from_values(space.clone(), vals)
}
