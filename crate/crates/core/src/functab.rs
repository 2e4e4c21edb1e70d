//! Dense function tables `f: F_q^n -> F_q`, possibly carrying erasure marks.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::gf::{Field, FieldRef};
use crate::rm::CodeFamily;
use crate::space::{AffineFlat, Chart, Space, Subspace};

/// One table entry: a field element or the erasure mark.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Symbol {
    Value(u8),
    Erased,
}

impl Symbol {
    pub fn value(self) -> Option<u8> {
        match self {
            Symbol::Value(v) => Some(v),
            Symbol::Erased => None,
        }
    }
    pub fn is_erased(self) -> bool {
        matches!(self, Symbol::Erased)
    }
}

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::Value(v) => write!(f, "{v}"),
            Symbol::Erased => f.write_str("*"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunctionTable {
    space: Space,
    values: Vec<Symbol>,
}

impl FunctionTable {
    pub fn new(space: Space, values: Vec<Symbol>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::Domain(format!(
                "{} values for a table of size {}",
                values.len(),
                space.size()
            )));
        }
        let q = space.q();
        if let Some(bad) = values
            .iter()
            .find(|s| matches!(s, Symbol::Value(v) if *v as usize >= q))
        {
            return Err(Error::Domain(format!(
                "symbol {bad} is not an element of F_{q}"
            )));
        }
        Ok(FunctionTable { space, values })
    }

    pub fn from_values(space: Space, values: Vec<u8>) -> Result<Self> {
        Self::new(space, values.into_iter().map(Symbol::Value).collect())
    }

    pub fn zero(space: Space) -> Self {
        let size = space.size();
        FunctionTable {
            space,
            values: vec![Symbol::Value(0); size],
        }
    }

    pub fn constant(space: Space, c: u8) -> Result<Self> {
        let size = space.size();
        Self::from_values(space, vec![c; size])
    }

    /// Tabulates `g` over all points, given as coordinate vectors.
    pub fn from_fn(space: Space, mut g: impl FnMut(&[u8]) -> u8) -> Result<Self> {
        let mut x = vec![0u8; space.n()];
        let vals = (0..space.size())
            .map(|i| {
                space.coords_into(i, &mut x);
                g(&x)
            })
            .collect();
        Self::from_values(space, vals)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }
    pub fn field(&self) -> &FieldRef {
        self.space.field()
    }
    pub fn n(&self) -> usize {
        self.space.n()
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn symbols(&self) -> &[Symbol] {
        &self.values
    }
    #[inline]
    pub fn get(&self, x: usize) -> Symbol {
        self.values[x]
    }
    pub fn set(&mut self, x: usize, s: Symbol) {
        self.values[x] = s;
    }

    pub fn has_erasures(&self) -> bool {
        self.values.iter().any(|s| s.is_erased())
    }

    /// Plain values; fails on an erased entry.
    pub fn values(&self) -> Result<Vec<u8>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.value()
                    .ok_or_else(|| Error::Domain(format!("entry {i} is erased")))
            })
            .collect()
    }

    /// Pointwise sum of two erasure-free tables.
    pub fn add(&self, other: &FunctionTable) -> Result<FunctionTable> {
        self.same_shape(other)?;
        let f = self.field();
        let (a, b) = (self.values()?, other.values()?);
        Self::from_values(
            self.space.clone(),
            a.iter().zip(&b).map(|(x, y)| f.add(*x, *y)).collect(),
        )
    }

    fn same_shape(&self, other: &FunctionTable) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Domain("tables over different spaces".into()));
        }
        Ok(())
    }

    /// Restriction to an affine flat, with the chart's basis order taken from
    /// the flat's canonical basis.
    pub fn restrict(&self, flat: &AffineFlat) -> Result<Restriction> {
        if flat.ambient_dim() != self.n() {
            return Err(Error::Domain(format!(
                "flat in F^{} but table over F^{}",
                flat.ambient_dim(),
                self.n()
            )));
        }
        let points = flat.points(&self.space);
        let local = Space::new(self.field().clone(), flat.dim())?;
        let values = points.iter().map(|&x| self.values[x]).collect();
        Ok(Restriction {
            flat: flat.clone(),
            points,
            table: FunctionTable::new(local, values)?,
        })
    }

    pub fn restrict_subspace(&self, sub: &Subspace) -> Result<Restriction> {
        self.restrict(&AffineFlat::linear(sub.clone()))
    }

    /// `f o T` for the affine map `x -> chart(x)` given by a chart of full dimension
    /// or smaller: the result lives on the chart's domain.
    pub fn compose_chart(&self, chart: &Chart) -> Result<FunctionTable> {
        let local = Space::new(self.field().clone(), chart.dim())?;
        let values = (0..local.size())
            .map(|z| self.values[chart.map(&self.space, z)])
            .collect();
        FunctionTable::new(local, values)
    }

    /// Serializes in the table file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "q={} n={}", self.field().q(), self.n());
        if !self.field().modulus().is_empty() {
            let m: Vec<String> = self
                .field()
                .modulus()
                .iter()
                .map(|c| c.to_string())
                .collect();
            let _ = write!(s, " modulus={}", m.join(","));
        }
        s.push('\n');
        for chunk in self.values.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<FunctionTable> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, strip_comment(l)));
        let (hline, header) =
            lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or(Error::Parse {
                    line: 1,
                    msg: "missing header".into(),
                })?;
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut q = None;
        let mut n = None;
        let mut modulus = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("q=") {
                q = Some(
                    v.parse::<u32>()
                        .map_err(|_| perr(hline, format!("bad q {v:?}")))?,
                );
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = Some(
                    v.parse::<usize>()
                        .map_err(|_| perr(hline, format!("bad n {v:?}")))?,
                );
            } else if let Some(v) = tok.strip_prefix("modulus=") {
                modulus = Some(crate::gf::parse_coeffs(v).map_err(|e| perr(hline, e.to_string()))?);
            } else {
                return Err(perr(hline, format!("unknown header token {tok:?}")));
            }
        }
        let q = q.ok_or_else(|| perr(hline, "header lacks q=".into()))?;
        let n = n.ok_or_else(|| perr(hline, "header lacks n=".into()))?;
        let field = match modulus {
            Some(m) => Field::with_modulus(q, &m),
            None => Field::new(q),
        }
        .map_err(|e| perr(hline, e.to_string()))?;
        let space = Space::new(field, n).map_err(|e| perr(hline, e.to_string()))?;
        let size = space.size();
        let mut values = Vec::with_capacity(size);
        let mut last = hline;
        for (ln, line) in lines {
            last = ln;
            for tok in line.split_whitespace() {
                if values.len() == size {
                    return Err(perr(ln, format!("more than {size} entries")));
                }
                if tok == "*" {
                    values.push(Symbol::Erased);
                    continue;
                }
                match tok.parse::<u32>() {
                    Ok(v) if v < q => values.push(Symbol::Value(v as u8)),
                    Ok(v) => return Err(perr(ln, format!("symbol {v} is not below q={q}"))),
                    Err(_) => return Err(perr(ln, format!("bad symbol {tok:?}"))),
                }
            }
        }
        if values.len() != size {
            return Err(perr(
                last,
                format!("expected {size} entries, found {}", values.len()),
            ));
        }
        FunctionTable::new(space, values)
    }

    pub fn read(path: &Path) -> Result<FunctionTable> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// A restriction `f|_U` together with the chart that produced it.
#[derive(Clone, Debug)]
pub struct Restriction {
    pub flat: AffineFlat,
    /// Ambient index of each local point.
    pub points: Vec<usize>,
    pub table: FunctionTable,
}

/// Fractional Hamming distance as an exact rational.
pub fn hamming_distance(f: &FunctionTable, g: &FunctionTable) -> Result<Rational> {
    f.same_shape(g)?;
    let mut diff = 0i128;
    for (a, b) in f.values.iter().zip(&g.values) {
        match (a, b) {
            (Symbol::Value(x), Symbol::Value(y)) => diff += (x != y) as i128,
            _ => return Err(Error::Domain("distance undefined on erased entries".into())),
        }
    }
    Ok(Rational::new(diff, f.len() as i128))
}

/// A codeword plus noise of known support.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub codeword: FunctionTable,
    pub support: Vec<usize>,
    pub f: FunctionTable,
    pub certified_distance: Rational,
}

/// Plants `noise_weight` random nonzero perturbations on a random codeword.
/// Refused unless the weight is below half the family's distance, where the
/// noise weight is the exact distance to the code.
pub fn plant<R: Rng>(
    code: &dyn CodeFamily,
    n: usize,
    noise_weight: usize,
    rng: &mut R,
) -> Result<PlantedInstance> {
    let space = Space::new(code.field().clone(), n)?;
    let size = space.size();
    if !code
        .delta0()
        .exceeds_twice(Rational::new(noise_weight as i128, size as i128))
    {
        return Err(Error::Domain(format!(
            "noise weight {noise_weight}/{size} is not below half the code distance; distance would not be certified"
        )));
    }
    let g = code.random_codeword(n, rng)?;
    let support: Vec<usize> = {
        let mut s = sample(rng, size, noise_weight).into_vec();
        s.sort_unstable();
        s
    };
    let field = code.field();
    let q = field.q();
    let mut f = g.clone();
    for &x in &support {
        let offset = rng.gen_range(1..q) as u8;
        let v = g.get(x).value().expect("fresh codewords carry no erasures");
        f.set(x, Symbol::Value(field.add(v, offset)));
    }
    Ok(PlantedInstance {
        codeword: g,
        support,
        f,
        certified_distance: Rational::new(noise_weight as i128, size as i128),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rm::ReedMuller;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(q: u32, n: usize) -> Space {
        Space::new(Field::new(q).unwrap(), n).unwrap()
    }

    #[test]
    fn restriction_examples() {
        let s = sp(2, 2);
        let f = FunctionTable::from_fn(s.clone(), |x| x[0]).unwrap();
        let full = f.restrict_subspace(&Subspace::full(2)).unwrap();
        assert_eq!(full.table.symbols(), f.symbols());
        let e2 = Subspace::span(s.field(), 2, &[vec![0, 1]]).unwrap();
        let r = f.restrict_subspace(&e2).unwrap();
        assert!(r.table.values().unwrap().iter().all(|&v| v == 0));
        let g = FunctionTable::from_fn(s.clone(), |x| x[0] & x[1]).unwrap();
        let diag = Subspace::span(s.field(), 2, &[vec![1, 1]]).unwrap();
        let r = g.restrict_subspace(&diag).unwrap();
        // Pointwise oracle: z -> g(z, z) = z * z = z over F_2.
        assert_eq!(r.table.values().unwrap(), vec![0, 1]);
    }

    #[test]
    fn distance_examples() {
        let s = sp(2, 2);
        let z = FunctionTable::zero(s.clone());
        let one = FunctionTable::constant(s.clone(), 1).unwrap();
        assert_eq!(hamming_distance(&z, &z).unwrap(), Rational::from_integer(0));
        assert_eq!(
            hamming_distance(&z, &one).unwrap(),
            Rational::from_integer(1)
        );
        let g = FunctionTable::from_values(s.clone(), vec![0, 1, 1, 0]).unwrap();
        assert_eq!(hamming_distance(&z, &g).unwrap(), Rational::new(1, 2));
        let mut e = z.clone();
        e.set(0, Symbol::Erased);
        assert!(matches!(hamming_distance(&e, &z), Err(Error::Domain(_))));
    }

    #[test]
    fn file_format() {
        let f = FunctionTable::parse("q=2 n=1\n0 1\n").unwrap();
        assert_eq!(f.values().unwrap(), vec![0, 1]);
        let e = FunctionTable::parse("# erased table\nq=2 n=1\n0 *  # second\n").unwrap();
        assert_eq!(e.get(1), Symbol::Erased);
        let g = FunctionTable::parse("q=4 n=1 modulus=1,1,1\n0 1 2 3").unwrap();
        assert_eq!(g.values().unwrap(), vec![0, 1, 2, 3]);
        match FunctionTable::parse("q=2 n=2\n0 1\n1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match FunctionTable::parse("q=2 n=2\n0 1\n1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            FunctionTable::parse("q=4 n=1 modulus=1,0,1\n0 1 2 3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dir = tempfile::tempdir().unwrap();
        for case in 0..100 {
            let q = [2u32, 3, 4, 5, 9][case % 5];
            let n = rng.gen_range(0..4);
            let s = sp(q, n);
            let vals = (0..s.size())
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        Symbol::Erased
                    } else {
                        Symbol::Value(rng.gen_range(0..q) as u8)
                    }
                })
                .collect();
            let t = FunctionTable::new(s, vals).unwrap();
            let path = dir.path().join(format!("t{case}.txt"));
            t.write(&path).unwrap();
            assert_eq!(FunctionTable::read(&path).unwrap(), t);
        }
    }

    #[test]
    fn plant_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rm = ReedMuller::new(Field::new(2).unwrap(), 1);
        let p0 = plant(&rm, 4, 0, &mut rng).unwrap();
        assert_eq!(p0.f, p0.codeword);
        assert_eq!(p0.certified_distance, Rational::from_integer(0));
        let p1 = plant(&rm, 8, 1, &mut rng).unwrap();
        assert_eq!(p1.certified_distance, Rational::new(1, 256));
        let p3 = plant(&rm, 4, 3, &mut rng).unwrap();
        assert_eq!(p3.certified_distance, Rational::new(3, 16));
        assert_eq!(
            crate::rm::exact_distance(&p3.f, &rm).unwrap(),
            Rational::new(3, 16)
        );
        assert!(matches!(plant(&rm, 4, 4, &mut rng), Err(Error::Domain(_))));
    }

    mod props {
        use super::*;
        use crate::space::{random_subspace, AffineFlat};
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn distance_is_metric(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = sp(3, 2);
                let mut rand_table = || FunctionTable::from_values(s.clone(), (0..9).map(|_| rng.gen_range(0..3)).collect()).unwrap();
                let (a, b, c) = (rand_table(), rand_table(), rand_table());
                let d = |x: &FunctionTable, y: &FunctionTable| hamming_distance(x, y).unwrap();
                prop_assert_eq!(d(&a, &b), d(&b, &a));
                prop_assert_eq!(d(&a, &a), Rational::from_integer(0));
                prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
            }

            #[test]
            fn restriction_is_functorial(seed in any::<u64>(), q in prop::sample::select(vec![2u32, 3]), n in 2usize..=4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = sp(q, n);
                let fq = s.field().clone();
                let f = FunctionTable::from_values(s.clone(), (0..s.size()).map(|_| rng.gen_range(0..q) as u8).collect()).unwrap();
                let ka = rng.gen_range(1..=n);
                let a_dir = random_subspace(&fq, n, ka, &mut rng).unwrap();
                let a_shift: Vec<u8> = (0..n).map(|_| rng.gen_range(0..q) as u8).collect();
                let a = AffineFlat::new(&fq, a_dir, &a_shift).unwrap();
                let ra = f.restrict(&a).unwrap();
                // B inside A, described in A's local coordinates.
                let kb = rng.gen_range(0..=ka);
                let b_dir_local = random_subspace(&fq, ka, kb, &mut rng).unwrap();
                let b_shift_local: Vec<u8> = (0..ka).map(|_| rng.gen_range(0..q) as u8).collect();
                let b_local = AffineFlat::new(&fq, b_dir_local.clone(), &b_shift_local).unwrap();
                let via_a = ra.table.restrict(&b_local).unwrap();
                // The same flat in ambient coordinates.
                let local_space = ra.table.space().clone();
                let to_amb = |z: &[u8]| s.coords(ra.points[local_space.index(z)]);
                let origin = s.coords(ra.points[0]);
                let amb_rows: Vec<Vec<u8>> = b_dir_local.basis().row_vecs().iter().map(|r| {
                    let p = to_amb(r);
                    p.iter().zip(&origin).map(|(x, o)| fq.sub(*x, *o)).collect()
                }).collect();
                let b_dir = Subspace::span(&fq, n, &amb_rows).unwrap();
                let b = AffineFlat::new(&fq, b_dir, &to_amb(&b_shift_local)).unwrap();
                let direct = f.restrict(&b).unwrap();
                let mut lhs: Vec<(usize, Symbol)> = via_a.points.iter().map(|&z| ra.points[z]).zip(via_a.table.symbols().iter().copied()).collect();
                let mut rhs: Vec<(usize, Symbol)> = direct.points.iter().copied().zip(direct.table.symbols().iter().copied()).collect();
                lhs.sort_by_key(|p| p.0);
                rhs.sort_by_key(|p| p.0);
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
