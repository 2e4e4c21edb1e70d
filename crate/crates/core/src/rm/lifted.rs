//! Lifted affine-invariant codes and extensional families.

use std::collections::{BTreeMap, HashSet};
use std::ops::ControlFlow;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use rand::{Rng, RngCore};

use super::{check_cap, CodeFamily, LinearBasis, ENUMERATION_CAP, MAX_CACHED_DIM};
use crate::error::{Error, Result};
use crate::exact::{Delta0, LogSize, Rational};
use crate::functab::FunctionTable;
use crate::gf::{Field, FieldRef};
use crate::space::{enumerate_affine_flats, Matrix, Space};

/// Work limit for closure validation and flat scans, in table lookups.
const SCAN_BUDGET: u128 = 200_000_000;

/// The lift `C^{t -> k}` of an affine-invariant base code on F_q^t: all
/// functions whose restriction to every affine t-flat lies in the base.
pub struct LiftedCode {
    field: FieldRef,
    t: usize,
    base: Vec<Vec<u8>>,
    base_set: HashSet<Vec<u8>>,
    /// Basis rows of the base when it is a linear space.
    base_basis: Option<Vec<Vec<u8>>>,
    max_dim: usize,
    delta0: Delta0,
    bases: Vec<OnceLock<Arc<LinearBasis>>>,
}

impl LiftedCode {
    /// Validates the base (shape, affine closure) and computes the distance
    /// parameter over dimensions `t..=max_dim`.
    pub fn new(
        field: FieldRef,
        t: usize,
        tables: &[FunctionTable],
        max_dim: usize,
    ) -> Result<Self> {
        if max_dim < t {
            return Err(Error::Config(format!(
                "max_dim {max_dim} below base dimension {t}"
            )));
        }
        let space = Space::new(field.clone(), t)?;
        let mut base = Vec::new();
        let mut base_set = HashSet::new();
        for g in tables {
            if *g.space() != space {
                return Err(Error::Config(format!(
                    "base table over F^{} instead of F^{t}",
                    g.n()
                )));
            }
            let v = g.values()?;
            if base_set.insert(v.clone()) {
                base.push(v);
            }
        }
        if base.is_empty() {
            return Err(Error::Config("empty base code".into()));
        }
        validate_affine_closure(&space, &base, &base_set)?;
        let base_basis = linear_basis_of(&field, &base, space.size());
        let mut code = LiftedCode {
            field,
            t,
            base,
            base_set,
            base_basis,
            max_dim,
            delta0: Delta0::Exact { num: 1, den: 1 },
            bases: (0..=MAX_CACHED_DIM).map(|_| OnceLock::new()).collect(),
        };
        code.delta0 = code.compute_delta0()?;
        Ok(code)
    }

    /// Lifts the dimension-`t` slice of another family.
    pub fn lift_of(code: &dyn CodeFamily, t: usize, max_dim: usize) -> Result<Self> {
        Self::new(
            code.field().clone(),
            t,
            &code.codewords(t, ENUMERATION_CAP)?,
            max_dim,
        )
    }

    /// Loads a base from a directory: a `manifest` file with
    /// `t=<int> q=<int> count=<int> [modulus=<coeffs>]` and one table file per codeword.
    pub fn load(dir: &Path, max_dim: usize) -> Result<Self> {
        let manifest_path = dir.join("manifest");
        let text = std::fs::read_to_string(&manifest_path)?;
        let perr = |msg: String| Error::Parse { line: 1, msg };
        let (mut t, mut q, mut count, mut modulus) = (None, None, None, None);
        for tok in text.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| perr(format!("bad manifest token {tok:?}")))?;
            let num = || {
                v.parse::<usize>()
                    .map_err(|_| perr(format!("bad value in {tok:?}")))
            };
            match k {
                "t" => t = Some(num()?),
                "q" => q = Some(num()? as u32),
                "count" => count = Some(num()?),
                "modulus" => modulus = Some(crate::gf::parse_coeffs(v)?),
                _ => return Err(perr(format!("unknown manifest key {k:?}"))),
            }
        }
        let (t, q, count) = match (t, q, count) {
            (Some(t), Some(q), Some(c)) => (t, q, c),
            _ => return Err(perr("manifest needs t=, q= and count=".into())),
        };
        let field = match modulus {
            Some(m) => Field::with_modulus(q, &m)?,
            None => Field::new(q)?,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != "manifest"))
            .collect();
        paths.sort();
        if paths.len() != count {
            return Err(perr(format!(
                "manifest declares {count} tables, directory holds {}",
                paths.len()
            )));
        }
        let tables = paths
            .iter()
            .map(|p| FunctionTable::read(p))
            .collect::<Result<Vec<_>>>()?;
        if tables.iter().any(|tb| **tb.field() != *field) {
            return Err(perr("table field differs from manifest".into()));
        }
        Self::new(field, t, &tables, max_dim)
    }

    /// Writes the base in the directory format read by [`LiftedCode::load`].
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = format!(
            "t={} q={} count={}",
            self.t,
            self.field.q(),
            self.base.len()
        );
        if !self.field.modulus().is_empty() {
            let m: Vec<String> = self.field.modulus().iter().map(|c| c.to_string()).collect();
            manifest.push_str(&format!(" modulus={}", m.join(",")));
        }
        std::fs::write(dir.join("manifest"), manifest + "\n")?;
        let space = Space::new(self.field.clone(), self.t)?;
        for (i, g) in self.base.iter().enumerate() {
            FunctionTable::from_values(space.clone(), g.clone())?
                .write(&dir.join(format!("base_{i:05}.txt")))?;
        }
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.t
    }
    pub fn base_len(&self) -> usize {
        self.base.len()
    }
    pub fn is_linear(&self) -> bool {
        self.base_basis.is_some()
    }
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    fn compute_delta0(&self) -> Result<Delta0> {
        let mut best: Option<Rational> = None;
        let mut consider = |r: Rational| best = Some(best.map_or(r, |b: Rational| b.min(r)));
        match &self.base_basis {
            Some(_) => {
                for k in self.t..=self.max_dim {
                    let basis = self.lift_basis(k)?;
                    check_cap(self.field.size(), basis.dim, ENUMERATION_CAP)?;
                    let size = self.field.size().pow(k as u32);
                    let mut min_w = usize::MAX;
                    basis.for_each_codeword(&self.field, size, |w| {
                        let wt = w.iter().filter(|&&v| v != 0).count();
                        if wt > 0 {
                            min_w = min_w.min(wt);
                        }
                        ControlFlow::Continue(())
                    });
                    if min_w != usize::MAX {
                        consider(Rational::new(min_w as i128, size as i128));
                    }
                }
            }
            None => {
                let size = self.field.size().pow(self.t as u32);
                for (i, a) in self.base.iter().enumerate() {
                    for b in &self.base[i + 1..] {
                        let d = a.iter().zip(b).filter(|(x, y)| x != y).count();
                        consider(Rational::new(d as i128, size as i128));
                    }
                }
            }
        }
        Ok(Delta0::exact(best.unwrap_or(Rational::from_integer(1))))
    }

    fn lift_basis(&self, k: usize) -> Result<Arc<LinearBasis>> {
        if k <= MAX_CACHED_DIM {
            if let Some(b) = self.bases[k].get() {
                return Ok(b.clone());
            }
        }
        let b = Arc::new(self.build_lift_basis(k)?);
        if k <= MAX_CACHED_DIM {
            return Ok(self.bases[k].get_or_init(|| b).clone());
        }
        Ok(b)
    }

    /// Basis of `C_k` as the kernel of all parity checks of the base, placed on every affine t-flat.
    fn build_lift_basis(&self, k: usize) -> Result<LinearBasis> {
        let rows = self
            .base_basis
            .as_ref()
            .ok_or_else(|| Error::Unsupported("base code is not linear".into()))?;
        if k < self.t {
            return Err(Error::Domain(format!(
                "dimension {k} below base dimension {}",
                self.t
            )));
        }
        let space = Space::new(self.field.clone(), k)?;
        let size = space.size();
        if k == self.t {
            return Ok(LinearBasis::from_tables(k, rows, size));
        }
        if size > 1 << 12 {
            return Err(Error::Budget(format!(
                "lifting to q^k = {size} points exceeds the 4096-point limit"
            )));
        }
        let local = self.field.size().pow(self.t as u32);
        let dual = Matrix::from_rows(local, rows)?.null_space(&self.field);
        let flats = enumerate_affine_flats(&self.field, k, self.t)?;
        let mut acc = Matrix::zeros(0, size);
        let mut pending: Vec<Vec<u8>> = Vec::new();
        let flush = |acc: &mut Matrix, pending: &mut Vec<Vec<u8>>| -> Result<()> {
            let stacked = acc.stack(&Matrix::from_rows(size, pending)?)?;
            let (r, rank) = stacked.rref(&self.field);
            *acc = r.truncate_rows(rank);
            pending.clear();
            Ok(())
        };
        for flat in &flats {
            let pts = flat.points(&space);
            for h in 0..dual.rows() {
                let mut row = vec![0u8; size];
                for (z, &p) in pts.iter().enumerate() {
                    row[p] = self.field.add(row[p], dual.get(h, z));
                }
                pending.push(row);
            }
            if pending.len() >= 2 * size {
                flush(&mut acc, &mut pending)?;
            }
        }
        flush(&mut acc, &mut pending)?;
        let kernel = acc.null_space(&self.field);
        Ok(LinearBasis::from_tables(k, &kernel.row_vecs(), size))
    }
}

/// Checks that `g o A` lies in the base for every affine map `A: F^t -> F^t`.
fn validate_affine_closure(space: &Space, base: &[Vec<u8>], set: &HashSet<Vec<u8>>) -> Result<()> {
    let f = space.field();
    let (q, t, size) = (space.q(), space.n(), space.size());
    let maps = BigUint::from(q).pow((t * t + t) as u32);
    let work = maps.clone() * BigUint::from(base.len() * size);
    if work > BigUint::from(SCAN_BUDGET) {
        return Err(Error::Budget(format!(
            "affine-closure check needs {work} lookups"
        )));
    }
    let maps: usize = maps.try_into().expect("bounded by budget");
    let mut x = vec![0u8; t];
    let mut img = vec![0usize; size];
    for code in 0..maps {
        // Digits of `code`: t*t matrix entries, then t shift entries.
        let mut c = code;
        let mut entries = vec![0u8; t * t + t];
        for e in entries.iter_mut() {
            *e = (c % q) as u8;
            c /= q;
        }
        for (z, slot) in img.iter_mut().enumerate() {
            space.coords_into(z, &mut x);
            let y: Vec<u8> = (0..t)
                .map(|i| {
                    (0..t).fold(entries[t * t + i], |acc, j| {
                        f.add(acc, f.mul(entries[i * t + j], x[j]))
                    })
                })
                .collect();
            *slot = space.index(&y);
        }
        for g in base {
            let composed: Vec<u8> = img.iter().map(|&y| g[y]).collect();
            if !set.contains(&composed) {
                return Err(Error::Config(
                    "base code is not closed under affine maps".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Basis rows when the tables form a linear space.
fn linear_basis_of(f: &Field, tables: &[Vec<u8>], size: usize) -> Option<Vec<Vec<u8>>> {
    let m = Matrix::from_rows(size, tables).ok()?;
    let (r, rank) = m.rref(f);
    let span = BigUint::from(f.size()).pow(rank as u32);
    (span == BigUint::from(tables.len())).then(|| r.truncate_rows(rank).row_vecs())
}

impl CodeFamily for LiftedCode {
    fn name(&self) -> String {
        format!(
            "lift[q={},t={},|base|={}]",
            self.field.q(),
            self.t,
            self.base.len()
        )
    }
    fn field(&self) -> &FieldRef {
        &self.field
    }
    fn base_dim(&self) -> usize {
        self.t
    }
    fn delta0(&self) -> Delta0 {
        self.delta0.clone()
    }

    fn contains(&self, f: &FunctionTable) -> Result<bool> {
        let n = f.n();
        if n < self.t {
            return Err(Error::Domain(format!(
                "dimension {n} below base dimension {}",
                self.t
            )));
        }
        if n == self.t {
            return Ok(self.base_set.contains(&f.values()?));
        }
        let flats = BigUint::from(f.space().q()).pow((n - self.t) as u32)
            * crate::space::gaussian_binomial(n, self.t, f.space().q() as u64)?;
        if flats * BigUint::from(self.field.size().pow(self.t as u32)) > BigUint::from(SCAN_BUDGET)
        {
            return Err(Error::Budget(format!(
                "membership at n={n} exceeds the flat-scan budget"
            )));
        }
        let vals = f.values()?;
        for flat in enumerate_affine_flats(&self.field, n, self.t)? {
            let r: Vec<u8> = flat.points(f.space()).iter().map(|&x| vals[x]).collect();
            if !self.base_set.contains(&r) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn linear_basis(&self, k: usize) -> Result<Option<Arc<LinearBasis>>> {
        if self.base_basis.is_none() {
            return Ok(None);
        }
        Ok(Some(self.lift_basis(k)?))
    }

    fn log_size(&self, k: usize) -> Result<LogSize> {
        match &self.base_basis {
            Some(_) => Ok(LogSize::Linear {
                dim: self.lift_basis(k)?.dim,
                q: self.field.q(),
            }),
            None if k == self.t => Ok(LogSize::Count(BigUint::from(self.base.len()))),
            None => Err(Error::Unsupported(
                "size of a non-linear lift above the base dimension".into(),
            )),
        }
    }

    fn codewords(&self, k: usize, cap: u128) -> Result<Vec<FunctionTable>> {
        if self.base_basis.is_none() && k == self.t {
            if self.base.len() as u128 > cap {
                return Err(Error::Budget("base exceeds the enumeration cap".into()));
            }
            let space = Space::new(self.field.clone(), k)?;
            return self
                .base
                .iter()
                .map(|g| FunctionTable::from_values(space.clone(), g.clone()))
                .collect();
        }
        let basis = self
            .linear_basis(k)?
            .ok_or_else(|| Error::Unsupported("non-linear lift".into()))?;
        check_cap(self.field.size(), basis.dim, cap)?;
        let space = Space::new(self.field.clone(), k)?;
        let mut out = Vec::new();
        basis.for_each_codeword(&self.field, space.size(), |w| {
            out.push(
                FunctionTable::from_values(space.clone(), w.to_vec()).expect("codeword shape"),
            );
            ControlFlow::Continue(())
        });
        Ok(out)
    }
}

/// A family given by explicit codeword lists per dimension. Consistency
/// checks against it fall back to exhaustive scans.
pub struct ExplicitFamily {
    field: FieldRef,
    t: usize,
    words: BTreeMap<usize, Vec<FunctionTable>>,
    delta0: Delta0,
}

impl ExplicitFamily {
    pub fn new(
        field: FieldRef,
        t: usize,
        words: BTreeMap<usize, Vec<FunctionTable>>,
    ) -> Result<Self> {
        let mut best: Option<Rational> = None;
        for (k, list) in &words {
            if list.iter().any(|w| w.n() != *k || **w.field() != *field) {
                return Err(Error::Config(format!(
                    "word list for dimension {k} has a mismatched table"
                )));
            }
            for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    let d = crate::functab::hamming_distance(a, b)?;
                    best = Some(best.map_or(d, |x| x.min(d)));
                }
            }
        }
        Ok(ExplicitFamily {
            field,
            t,
            words,
            delta0: Delta0::exact(best.unwrap_or(Rational::from_integer(1))),
        })
    }

    fn list(&self, k: usize) -> Result<&Vec<FunctionTable>> {
        self.words
            .get(&k)
            .ok_or_else(|| Error::Unsupported(format!("no codewords listed for dimension {k}")))
    }
}

impl CodeFamily for ExplicitFamily {
    fn name(&self) -> String {
        format!("explicit[q={},t={}]", self.field.q(), self.t)
    }
    fn field(&self) -> &FieldRef {
        &self.field
    }
    fn base_dim(&self) -> usize {
        self.t
    }
    fn delta0(&self) -> Delta0 {
        self.delta0.clone()
    }
    fn contains(&self, f: &FunctionTable) -> Result<bool> {
        Ok(self.list(f.n())?.contains(f))
    }
    fn linear_basis(&self, _k: usize) -> Result<Option<Arc<LinearBasis>>> {
        Ok(None)
    }
    fn log_size(&self, k: usize) -> Result<LogSize> {
        Ok(LogSize::Count(BigUint::from(self.list(k)?.len())))
    }
    fn codewords(&self, k: usize, cap: u128) -> Result<Vec<FunctionTable>> {
        let l = self.list(k)?;
        if l.len() as u128 > cap {
            return Err(Error::Budget(
                "word list exceeds the enumeration cap".into(),
            ));
        }
        Ok(l.clone())
    }
    fn random_codeword(&self, n: usize, rng: &mut dyn RngCore) -> Result<FunctionTable> {
        let l = self.list(n)?;
        Ok(l[rng.gen_range(0..l.len())].clone())
    }
}
