//! Points, matrices and subspaces of F_q^n.
//!
//! Points are addressed by a little-endian base-q index
//! `idx = sum_j x_j q^j`. Subspaces are stored by the reduced row-echelon
//! form of a basis, which makes structural equality coincide with equality
//! of subspaces.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::{Field, FieldRef};

/// Largest table the library will allocate, in entries.
pub const MAX_TABLE: usize = 1 << 28;

/// The ambient space F_q^n together with its index arithmetic.
#[derive(Clone, Debug)]
pub struct Space {
    field: FieldRef,
    n: usize,
    size: usize,
    pows: Vec<usize>,
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && *self.field == *other.field
    }
}
impl Eq for Space {}

impl Space {
    pub fn new(field: FieldRef, n: usize) -> Result<Self> {
        let q = field.size();
        let mut pows = Vec::with_capacity(n + 1);
        let mut acc = 1usize;
        for _ in 0..=n {
            pows.push(acc);
            if acc > MAX_TABLE {
                return Err(Error::Budget(format!(
                    "q^n = {q}^{n} exceeds the table limit of 2^28 entries"
                )));
            }
            acc = acc.saturating_mul(q);
        }
        let size = pows[n];
        if size > MAX_TABLE {
            return Err(Error::Budget(format!(
                "q^n = {q}^{n} exceeds the table limit of 2^28 entries"
            )));
        }
        Ok(Space {
            field,
            n,
            size,
            pows,
        })
    }

    pub fn field(&self) -> &FieldRef {
        &self.field
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> usize {
        self.field.size()
    }
    /// Number of points, q^n.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coords(&self, idx: usize) -> Vec<u8> {
        let mut v = vec![0u8; self.n];
        self.coords_into(idx, &mut v);
        v
    }

    pub fn coords_into(&self, mut idx: usize, out: &mut [u8]) {
        let q = self.q();
        for c in out.iter_mut().take(self.n) {
            *c = (idx % q) as u8;
            idx /= q;
        }
    }

    pub fn index(&self, x: &[u8]) -> usize {
        x.iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.q() + c as usize)
    }

    /// Coordinate `j` of the point `idx`.
    #[inline]
    pub fn coord(&self, idx: usize, j: usize) -> u8 {
        ((idx / self.pows[j]) % self.q()) as u8
    }

    /// Index of the sum of two points.
    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        if self.q() == 2 {
            return a ^ b;
        }
        let q = self.q();
        let (mut a, mut b) = (a, b);
        let mut out = 0usize;
        for j in 0..self.n {
            if a == 0 && b == 0 {
                break;
            }
            let s = self.field.add((a % q) as u8, (b % q) as u8) as usize;
            out += s * self.pows[j];
            a /= q;
            b /= q;
        }
        out
    }

    /// Index of `c * a`.
    pub fn scale(&self, c: u8, a: usize) -> usize {
        if c == 1 {
            return a;
        }
        let q = self.q();
        let mut a = a;
        let mut out = 0usize;
        for j in 0..self.n {
            if a == 0 {
                break;
            }
            out += self.field.mul(c, (a % q) as u8) as usize * self.pows[j];
            a /= q;
        }
        out
    }

    /// Index of `a - b`.
    pub fn sub(&self, a: usize, b: usize) -> usize {
        let neg = self.field.neg(1);
        self.add(a, self.scale(neg, b))
    }

    /// Dot product of two points given as indices.
    pub fn dot(&self, a: usize, b: usize) -> u8 {
        let q = self.q();
        let (mut a, mut b) = (a, b);
        let mut s = 0u8;
        while a != 0 && b != 0 {
            s = self
                .field
                .add(s, self.field.mul((a % q) as u8, (b % q) as u8));
            a /= q;
            b /= q;
        }
        s
    }
}

/// Dense row-major matrix over F_q.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[Vec<u8>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Domain(format!(
                    "row of length {} in a {cols}-column matrix",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
    pub fn row_vecs(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }

    /// Stacks `other` below `self`.
    pub fn stack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Domain("column mismatch when stacking".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, f: &Field, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Domain("inner dimension mismatch".into()));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out.get(i, j), f.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// In-place reduced row-echelon form; returns the pivot columns.
    /// Zero rows end up at the bottom.
    pub fn rref_in_place(&mut self, f: &Field) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = f.inv_nonzero(self.get(r, c));
            if inv != 1 {
                for j in c..self.cols {
                    let v = f.mul(self.get(r, j), inv);
                    self.set(r, j, v);
                }
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.get(i, c);
                if factor == 0 {
                    continue;
                }
                let nf = f.neg(factor);
                for j in c..self.cols {
                    let v = f.add(self.get(i, j), f.mul(nf, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Reduced row-echelon form and rank. The shape is preserved.
    pub fn rref(&self, f: &Field) -> (Matrix, usize) {
        let mut m = self.clone();
        let rank = m.rref_in_place(f).len();
        (m, rank)
    }

    pub fn rank(&self, f: &Field) -> usize {
        self.rref(f).1
    }

    /// The first `r` rows.
    pub fn truncate_rows(&self, r: usize) -> Matrix {
        Matrix {
            rows: r,
            cols: self.cols,
            data: self.data[..r * self.cols].to_vec(),
        }
    }

    /// Basis (as rows) of the right kernel `{x : self * x = 0}`.
    pub fn null_space(&self, f: &Field) -> Matrix {
        let mut m = self.clone();
        let pivots = m.rref_in_place(f);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = Matrix::zeros(free.len(), self.cols);
        for (i, &fc) in free.iter().enumerate() {
            out.set(i, fc, 1);
            for (r, &pc) in pivots.iter().enumerate() {
                let v = m.get(r, fc);
                if v != 0 {
                    out.set(i, pc, f.neg(v));
                }
            }
        }
        out
    }

    /// Serializes as `"rows cols ; r0 ; r1 ..."` with comma separated entries.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}", self.rows, self.cols);
        for r in 0..self.rows {
            s.push_str(" ; ");
            s.push_str(
                &self
                    .row(r)
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        s
    }
}

/// Uniform random matrix.
pub fn random_matrix<R: Rng + ?Sized>(f: &Field, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let q = f.q();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(0..q) as u8)
        .collect();
    Matrix { rows, cols, data }
}

/// Uniformly random invertible n x n matrix, by rejection.
pub fn random_invertible<R: Rng + ?Sized>(f: &Field, n: usize, rng: &mut R) -> Matrix {
    loop {
        let m = random_matrix(f, n, n, rng);
        if m.rank(f) == n {
            return m;
        }
    }
}

/// A linear subspace, stored as the RREF of a basis (no zero rows).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Subspace {
    n: usize,
    basis: Matrix,
}

impl Subspace {
    /// The span of `rows` (which need not be independent).
    pub fn span(f: &Field, n: usize, rows: &[Vec<u8>]) -> Result<Self> {
        let m = Matrix::from_rows(n, rows)?;
        Ok(Self::from_matrix(f, &m))
    }

    pub fn from_matrix(f: &Field, m: &Matrix) -> Self {
        let (r, rank) = m.rref(f);
        Subspace {
            n: m.cols,
            basis: r.truncate_rows(rank),
        }
    }

    pub fn zero(n: usize) -> Self {
        Subspace {
            n,
            basis: Matrix::zeros(0, n),
        }
    }

    pub fn full(n: usize) -> Self {
        Subspace {
            n,
            basis: Matrix::identity(n),
        }
    }

    /// Kernel of the functional `x -> a . x`.
    pub fn kernel_of(f: &Field, a: &[u8]) -> Self {
        let m = Matrix {
            rows: 1,
            cols: a.len(),
            data: a.to_vec(),
        };
        Subspace {
            n: a.len(),
            basis: m.null_space(f),
        }
        .canonical(f)
    }

    fn canonical(self, f: &Field) -> Self {
        Self::from_matrix(f, &self.basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.basis.rows
    }
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn pivots(&self) -> Vec<usize> {
        (0..self.basis.rows)
            .map(|r| self.basis.row(r).iter().position(|&v| v != 0).unwrap())
            .collect()
    }

    /// Rows of a matrix whose kernel is this subspace.
    pub fn annihilator(&self, f: &Field) -> Matrix {
        self.basis.null_space(f)
    }

    pub fn contains(&self, f: &Field, x: &[u8]) -> bool {
        // In RREF, x is in the span iff x equals the combination given by its pivot values.
        let mut r = x.to_vec();
        for (i, p) in self.pivots().into_iter().enumerate() {
            let c = r[p];
            if c != 0 {
                let nc = f.neg(c);
                for (j, v) in r.iter_mut().enumerate() {
                    *v = f.add(*v, f.mul(nc, self.basis.get(i, j)));
                }
            }
        }
        r.iter().all(|&v| v == 0)
    }

    pub fn contains_subspace(&self, f: &Field, other: &Subspace) -> bool {
        (0..other.dim()).all(|i| self.contains(f, other.basis.row(i)))
    }

    /// Intersection, computed as the kernel of the stacked annihilators.
    pub fn intersect(&self, f: &Field, other: &Subspace) -> Result<Subspace> {
        if self.n != other.n {
            return Err(Error::Domain(
                "subspaces live in different ambient spaces".into(),
            ));
        }
        let stacked = self.annihilator(f).stack(&other.annihilator(f))?;
        if stacked.rows == 0 {
            return Ok(Subspace::full(self.n));
        }
        Ok(Subspace::from_matrix(f, &stacked.null_space(f)))
    }

    /// Ambient indices of `a * b_i` for each basis row and scalar, row-major by basis row.
    fn scaled_rows(&self, space: &Space) -> Vec<usize> {
        let q = space.q();
        let mut out = Vec::with_capacity(self.dim() * q);
        for i in 0..self.dim() {
            let row = space.index(self.basis.row(i));
            for a in 0..q {
                out.push(space.scale(a as u8, row));
            }
        }
        out
    }

    /// Chart `F_q^k -> F_q^n`, `z -> sum_i z_i b_i`, as a table over local indices.
    pub fn points(&self, space: &Space) -> Vec<usize> {
        chart_points(space, &self.scaled_rows(space), self.dim(), 0)
    }

    /// Chart evaluator for on-demand point mapping.
    pub fn chart(&self, space: &Space) -> Chart {
        Chart {
            scaled: self.scaled_rows(space),
            k: self.dim(),
            q: space.q(),
            shift: 0,
        }
    }

    /// Local (pivot) coordinates of a point known to lie in the subspace.
    pub fn local_coords(&self, x: &[u8]) -> Vec<u8> {
        self.pivots().into_iter().map(|p| x[p]).collect()
    }

    /// Serializes as `"k n ; row ; row ..."`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}", self.dim(), self.n);
        for r in 0..self.dim() {
            s.push_str(" ; ");
            s.push_str(
                &self
                    .basis
                    .row(r)
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        s
    }

    pub fn parse(f: &Field, text: &str) -> Result<Subspace> {
        let bad = |m: &str| Error::Parse {
            line: 1,
            msg: m.to_string(),
        };
        let mut parts = text.split(';');
        let head: Vec<usize> = parts
            .next()
            .ok_or_else(|| bad("empty subspace"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad header")))
            .collect::<Result<_>>()?;
        if head.len() != 2 {
            return Err(bad("header must be \"k n\""));
        }
        let (k, n) = (head[0], head[1]);
        let rows: Vec<Vec<u8>> = parts
            .map(|r| {
                r.trim()
                    .split(',')
                    .map(|t| match t.trim().parse::<u32>() {
                        Ok(v) if v < f.q() => Ok(v as u8),
                        _ => Err(bad(&format!("bad entry {t:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != k {
            return Err(bad(&format!("expected {k} rows, found {}", rows.len())));
        }
        let s = Subspace::span(f, n, &rows).map_err(|e| bad(&e.to_string()))?;
        if s.dim() != k {
            return Err(bad("rows are linearly dependent"));
        }
        Ok(s)
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Maps local coordinates of a subspace or flat to ambient indices.
#[derive(Clone, Debug)]
pub struct Chart {
    scaled: Vec<usize>,
    k: usize,
    q: usize,
    shift: usize,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.k
    }

    /// Number of local points, q^k.
    pub fn size(&self) -> usize {
        self.q.pow(self.k as u32)
    }

    pub fn map(&self, space: &Space, mut z: usize) -> usize {
        let mut x = self.shift;
        for i in 0..self.k {
            let a = z % self.q;
            z /= self.q;
            if a != 0 {
                x = space.add(x, self.scaled[i * self.q + a]);
            }
        }
        x
    }
}

fn chart_points(space: &Space, scaled: &[usize], k: usize, shift: usize) -> Vec<usize> {
    let q = space.q();
    let mut pts = Vec::with_capacity(q.pow(k as u32));
    pts.push(shift);
    for i in 0..k {
        let len = pts.len();
        for a in 1..q {
            let off = scaled[i * q + a];
            for z in 0..len {
                let p = space.add(pts[z], off);
                pts.push(p);
            }
        }
    }
    pts
}

/// An affine flat `shift + direction`, with the shift reduced modulo the direction.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AffineFlat {
    direction: Subspace,
    shift: Vec<u8>,
}

impl AffineFlat {
    pub fn new(f: &Field, direction: Subspace, shift: &[u8]) -> Result<Self> {
        if shift.len() != direction.n {
            return Err(Error::Domain(
                "shift length differs from ambient dimension".into(),
            ));
        }
        let mut s = shift.to_vec();
        for (i, p) in direction.pivots().into_iter().enumerate() {
            let c = s[p];
            if c != 0 {
                let nc = f.neg(c);
                for (j, v) in s.iter_mut().enumerate() {
                    *v = f.add(*v, f.mul(nc, direction.basis.get(i, j)));
                }
            }
        }
        Ok(AffineFlat {
            direction,
            shift: s,
        })
    }

    /// The flat through the origin.
    pub fn linear(direction: Subspace) -> Self {
        let n = direction.n;
        AffineFlat {
            direction,
            shift: vec![0; n],
        }
    }

    pub fn direction(&self) -> &Subspace {
        &self.direction
    }
    pub fn shift(&self) -> &[u8] {
        &self.shift
    }
    pub fn dim(&self) -> usize {
        self.direction.dim()
    }
    pub fn ambient_dim(&self) -> usize {
        self.direction.n
    }

    pub fn points(&self, space: &Space) -> Vec<usize> {
        chart_points(
            space,
            &self.direction.scaled_rows(space),
            self.dim(),
            space.index(&self.shift),
        )
    }

    pub fn chart(&self, space: &Space) -> Chart {
        let mut c = self.direction.chart(space);
        c.shift = space.index(&self.shift);
        c
    }
}

/// Number of k-dimensional subspaces of F_q^n.
pub fn gaussian_binomial(n: usize, k: usize, q: u64) -> Result<BigUint> {
    if k > n {
        return Err(Error::Domain(format!("k={k} exceeds n={n}")));
    }
    let qb = BigUint::from(q);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= qb.pow(n as u32) - qb.pow(i as u32);
        den *= qb.pow(k as u32) - qb.pow(i as u32);
    }
    Ok(num / den)
}

/// Uniform k-dimensional subspace: draw k x n matrices until one has rank k.
pub fn random_subspace<R: Rng + ?Sized>(
    f: &Field,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Subspace> {
    if k > n {
        return Err(Error::Domain(format!("k={k} exceeds n={n}")));
    }
    if k == n {
        return Ok(Subspace::full(n));
    }
    loop {
        let mut m = random_matrix(f, k, n, rng);
        let rank = m.rref_in_place(f).len();
        if rank == k {
            return Ok(Subspace { n, basis: m });
        }
    }
}

/// Nonzero functionals normalized so that the first nonzero entry is 1, in index order.
pub fn normalized_functionals(space: &Space) -> Vec<usize> {
    let q = space.q();
    (1..space.size())
        .filter(|&a| {
            let mut x = a;
            while x % q == 0 {
                x /= q;
            }
            x % q == 1
        })
        .collect()
}

/// All (q^n - 1)/(q - 1) linear hyperplanes, one per normalized functional.
pub fn enumerate_hyperplanes(space: &Space) -> Vec<Subspace> {
    normalized_functionals(space)
        .into_iter()
        .map(|a| Subspace::kernel_of(space.field(), &space.coords(a)))
        .collect()
}

/// All k-dimensional subspaces, by enumerating RREF matrices.
pub fn enumerate_subspaces(f: &Field, n: usize, k: usize) -> Result<Vec<Subspace>> {
    if k > n {
        return Err(Error::Domain(format!("k={k} exceeds n={n}")));
    }
    let q = f.size();
    let mut out = Vec::new();
    for pivots in combinations(n, k) {
        // Free entries: row i, columns after its pivot that are not pivots.
        let free: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| {
                ((pivots[i] + 1)..n)
                    .filter(|c| !pivots.contains(c))
                    .map(move |c| (i, c))
            })
            .collect();
        let total = q.pow(free.len() as u32);
        for mut code in 0..total {
            let mut m = Matrix::zeros(k, n);
            for (i, &p) in pivots.iter().enumerate() {
                m.set(i, p, 1);
            }
            for &(i, c) in &free {
                m.set(i, c, (code % q) as u8);
                code /= q;
            }
            out.push(Subspace { n, basis: m });
        }
    }
    Ok(out)
}

/// All affine k-flats: every subspace with every reduced shift.
pub fn enumerate_affine_flats(f: &Field, n: usize, k: usize) -> Result<Vec<AffineFlat>> {
    let q = f.size();
    let mut out = Vec::new();
    for sub in enumerate_subspaces(f, n, k)? {
        let pivots = sub.pivots();
        let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        for mut code in 0..q.pow(free.len() as u32) {
            let mut shift = vec![0u8; n];
            for &c in &free {
                shift[c] = (code % q) as u8;
                code /= q;
            }
            out.push(AffineFlat {
                direction: sub.clone(),
                shift,
            });
        }
    }
    Ok(out)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn f(q: u32) -> FieldRef {
        Field::new(q).unwrap()
    }

    #[test]
    fn rref_examples() {
        let f2 = f(2);
        let (m, r) = Matrix::identity(3).rref(&f2);
        assert_eq!((m, r), (Matrix::identity(3), 3));
        let (m, r) = Matrix::zeros(2, 2).rref(&f2);
        assert_eq!((m, r), (Matrix::zeros(2, 2), 0));
        let m = Matrix::from_rows(2, &[vec![1, 1], vec![1, 1]]).unwrap();
        let (r, rank) = m.rref(&f2);
        assert_eq!(rank, 1);
        assert_eq!(r.truncate_rows(rank).row_vecs(), vec![vec![1, 1]]);
    }

    #[test]
    fn gaussian_binomial_examples() {
        assert_eq!(gaussian_binomial(2, 1, 2).unwrap(), BigUint::from(3u32));
        assert_eq!(gaussian_binomial(3, 1, 2).unwrap(), BigUint::from(7u32));
        assert_eq!(gaussian_binomial(4, 2, 2).unwrap(), BigUint::from(35u32));
        assert!(matches!(gaussian_binomial(2, 3, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn subspace_enumeration_matches_binomial() {
        for q in [2u32, 3] {
            let fq = f(q);
            for n in 0..=4 {
                for k in 0..=n {
                    let subs = enumerate_subspaces(&fq, n, k).unwrap();
                    let set: HashSet<_> = subs.iter().cloned().collect();
                    assert_eq!(set.len(), subs.len());
                    assert_eq!(
                        BigUint::from(subs.len()),
                        gaussian_binomial(n, k, q as u64).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn gaussian_binomial_symmetry() {
        for q in 2..=4u64 {
            for n in 0..=8 {
                for k in 0..=n {
                    assert_eq!(
                        gaussian_binomial(n, k, q).unwrap(),
                        gaussian_binomial(n, n - k, q).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn hyperplane_counts() {
        let s = Space::new(f(2), 1).unwrap();
        let h = enumerate_hyperplanes(&s);
        assert_eq!(h, vec![Subspace::zero(1)]);
        assert_eq!(
            enumerate_hyperplanes(&Space::new(f(2), 3).unwrap()).len(),
            7
        );
        let hs = enumerate_hyperplanes(&Space::new(f(3), 2).unwrap());
        assert_eq!(hs.len(), 4);
        let distinct: HashSet<_> = hs.iter().collect();
        assert_eq!(distinct.len(), 4);
        assert!(hs.iter().all(|h| h.dim() == 1));
    }

    #[test]
    fn hyperplane_intersections() {
        for q in [2u32, 3] {
            for n in 2..=4 {
                let s = Space::new(f(q), n).unwrap();
                let hs = enumerate_hyperplanes(&s);
                for (i, u) in hs.iter().enumerate() {
                    assert_eq!(&u.intersect(s.field(), u).unwrap(), u);
                    for v in &hs[i + 1..] {
                        assert_eq!(u.intersect(s.field(), v).unwrap().dim(), n - 2);
                    }
                }
            }
        }
        let f2 = f(2);
        let a = Subspace::span(&f2, 2, &[vec![1, 0]]).unwrap();
        let b = Subspace::span(&f2, 2, &[vec![1, 1]]).unwrap();
        assert_eq!(a.intersect(&f2, &b).unwrap(), Subspace::zero(2));
    }

    #[test]
    fn points_of_subspaces_and_flats() {
        let s = Space::new(f(2), 3).unwrap();
        assert_eq!(Subspace::zero(3).points(&s), vec![0]);
        let h = &enumerate_hyperplanes(&s)[0];
        let pts: HashSet<_> = h.points(&s).into_iter().collect();
        assert_eq!(pts.len(), 4);
        // e_1 + span{e_2} in F_2^2: points (1,0) and (1,1), i.e. indices 1 and 3.
        let s2 = Space::new(f(2), 2).unwrap();
        let dir = Subspace::span(&f(2), 2, &[vec![0, 1]]).unwrap();
        let flat = AffineFlat::new(&f(2), dir, &[1, 0]).unwrap();
        let mut pts = flat.points(&s2);
        pts.sort();
        let expected: Vec<usize> = vec![s2.index(&[1, 0]), s2.index(&[1, 1])];
        assert_eq!(pts, expected);
        let chart = flat.chart(&s2);
        assert_eq!(
            (0..2).map(|z| chart.map(&s2, z)).collect::<Vec<_>>(),
            flat.points(&s2)
        );
    }

    #[test]
    fn affine_flat_counts() {
        let f2 = f(2);
        for (n, k, expected) in [(2, 1, 6), (2, 2, 1), (3, 2, 14)] {
            let flats = enumerate_affine_flats(&f2, n, k).unwrap();
            assert_eq!(flats.len(), expected);
            let s = Space::new(f2.clone(), n).unwrap();
            let as_sets: HashSet<Vec<usize>> = flats
                .iter()
                .map(|fl| {
                    let mut p = fl.points(&s);
                    p.sort();
                    p
                })
                .collect();
            assert_eq!(as_sets.len(), expected);
        }
    }

    #[test]
    fn affine_flat_shift_is_canonical() {
        let f3 = f(3);
        let s = Space::new(f3.clone(), 3).unwrap();
        let dir = Subspace::span(&f3, 3, &[vec![1, 2, 0]]).unwrap();
        let a = AffineFlat::new(&f3, dir.clone(), &[0, 0, 1]).unwrap();
        let b = AffineFlat::new(&f3, dir, &[2, 1, 1]).unwrap(); // (0,0,1) + 2*(1,2,0)
        assert_eq!(a, b);
        let mut pa = a.points(&s);
        pa.sort();
        let mut pb = b.points(&s);
        pb.sort();
        assert_eq!(pa, pb);
    }

    #[test]
    fn random_subspace_full_and_uniform() {
        let f2 = f(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            random_subspace(&f2, 3, 3, &mut rng).unwrap(),
            Subspace::full(3)
        );
        // Three lines of F_2^2, 30000 draws, each within 3 sigma of 10000.
        let mut counts: HashMap<Subspace, usize> = HashMap::new();
        let trials = 30_000;
        for _ in 0..trials {
            *counts
                .entry(random_subspace(&f2, 2, 1, &mut rng).unwrap())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let p = 1.0 / 3.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!(
                (c as f64 - trials as f64 * p).abs() <= 3.0 * sigma,
                "count {c}"
            );
        }
        // Coverage of all 35 planes of F_2^4.
        let mut seen = HashSet::new();
        for _ in 0..100_000 {
            seen.insert(random_subspace(&f2, 4, 2, &mut rng).unwrap());
        }
        assert_eq!(seen.len(), 35);
    }

    #[test]
    fn random_subspace_contains_fixed_line() {
        // p1 = [n-1 choose t]_q / [n choose t]_q for (n,k,t) = (4,3,1), q = 2:
        // a uniform 3-space contains a fixed nonzero vector with probability 7/15.
        let f2 = f(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = vec![1, 0, 1, 1];
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| {
                random_subspace(&f2, 4, 3, &mut rng)
                    .unwrap()
                    .contains(&f2, &v)
            })
            .count();
        let g = |n, k| {
            gaussian_binomial(n, k, 2)
                .unwrap()
                .to_string()
                .parse::<f64>()
                .unwrap()
        };
        let p = g(3, 1) / g(4, 1);
        assert!((p - 7.0 / 15.0).abs() < 1e-12);
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - trials as f64 * p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn random_invertible_uniform_gl22() {
        let f2 = f(2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        assert_eq!(random_invertible(&f2, 1, &mut rng), Matrix::identity(1));
        let trials = 12_000;
        let mut counts: HashMap<Matrix, usize> = HashMap::new();
        for _ in 0..trials {
            let m = random_invertible(&f2, 2, &mut rng);
            assert_eq!(m.rank(&f2), 2);
            *counts.entry(m).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!(
                (c as f64 - trials as f64 * p).abs() <= 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn serialization_round_trip() {
        let f3 = f(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = random_subspace(&f3, 4, 2, &mut rng).unwrap();
            assert_eq!(Subspace::parse(&f3, &s.to_text()).unwrap(), s);
        }
        assert!(Subspace::parse(&f3, "2 2 ; 1,0 ; 2,0").is_err());
        assert!(Subspace::parse(&f3, "1 2 ; 1,3").is_err());
    }

    #[test]
    fn index_arithmetic() {
        let s = Space::new(f(3), 3).unwrap();
        for a in 0..s.size() {
            assert_eq!(s.index(&s.coords(a)), a);
            for b in [0, 5, 13, 26] {
                let sum: Vec<u8> = s
                    .coords(a)
                    .iter()
                    .zip(s.coords(b))
                    .map(|(x, y)| s.field().add(*x, y))
                    .collect();
                assert_eq!(s.add(a, b), s.index(&sum));
                assert_eq!(s.sub(s.add(a, b), b), a);
            }
        }
        assert!(matches!(Space::new(f(2), 29), Err(Error::Budget(_))));
    }

    #[test]
    fn null_space_is_kernel() {
        let f3 = f(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let m = random_matrix(&f3, 2, 5, &mut rng);
            let ns = m.null_space(&f3);
            assert_eq!(ns.rows() + m.rank(&f3), 5);
            for r in 0..ns.rows() {
                for i in 0..m.rows() {
                    let dot =
                        (0..5).fold(0u8, |acc, j| f3.add(acc, f3.mul(m.get(i, j), ns.get(r, j))));
                    assert_eq!(dot, 0);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rank_invariant_under_row_ops(seed in any::<u64>(), q in prop::sample::select(vec![2u32, 3, 4, 5])) {
                let fq = f(q);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_matrix(&fq, 4, 5, &mut rng);
                let p = random_invertible(&fq, 4, &mut rng);
                let pm = p.mul(&fq, &m).unwrap();
                prop_assert_eq!(m.rank(&fq), pm.rank(&fq));
                let mut rows = m.row_vecs();
                rows.reverse();
                prop_assert_eq!(Matrix::from_rows(5, &rows).unwrap().rank(&fq), m.rank(&fq));
            }

            #[test]
            fn span_is_canonical(seed in any::<u64>()) {
                let f3 = f(3);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_subspace(&f3, 4, 2, &mut rng).unwrap();
                let p = random_invertible(&f3, 2, &mut rng);
                let other = p.mul(&f3, s.basis()).unwrap();
                prop_assert_eq!(Subspace::from_matrix(&f3, &other), s);
            }
        }
    }
}
