//! Sample-based, semi-sample-based, flat and BLR testers.
//!
//! Every tester reads its input through an [`Oracle`]. An erased answer makes
//! the tester stop and accept, which is the online wrapper's contract; offline
//! runs go through [`TableOracle`] on erasure-free tables, where that branch
//! never fires.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{certified_ceil, ln, rat_f64, Rational};
use crate::functab::{FunctionTable, Symbol};
use crate::gf::Field;
use crate::par::{count_trials, trial_rng};
use crate::rm::{CodeFamily, ENUMERATION_CAP};
use crate::space::{random_subspace, AffineFlat, Space};
use crate::stats::RateEstimate;

/// Source of answers for a tester.
pub trait Oracle {
    fn space(&self) -> &Space;
    fn query(&mut self, x: usize) -> Result<Symbol>;
}

/// Answers straight from a table, logging the query order.
pub struct TableOracle<'a> {
    table: &'a FunctionTable,
    pub log: Vec<usize>,
}

impl<'a> TableOracle<'a> {
    pub fn new(table: &'a FunctionTable) -> Self {
        TableOracle {
            table,
            log: Vec::new(),
        }
    }
}

impl Oracle for TableOracle<'_> {
    fn space(&self) -> &Space {
        self.table.space()
    }
    fn query(&mut self, x: usize) -> Result<Symbol> {
        if x >= self.table.len() {
            return Err(Error::Domain(format!(
                "query {x} outside a table of size {}",
                self.table.len()
            )));
        }
        self.log.push(x);
        Ok(self.table.get(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Consistent,
    NoCodewordFits,
    ErasureSeen,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub reason: Reason,
    /// Coefficients of a fitting local codeword (linear families) or its
    /// values (enumerated families), from the last round.
    pub witness: Option<Vec<u8>>,
    /// Queries issued, counting repeats.
    pub queries: usize,
    pub rounds: usize,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
    pub fn erasure_seen(&self) -> bool {
        self.reason == Reason::ErasureSeen
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TesterKind {
    Sample,
    SemiSample,
    Blr,
    Flat,
}

impl fmt::Display for TesterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TesterKind::Sample => "sample",
            TesterKind::SemiSample => "semi",
            TesterKind::Blr => "blr",
            TesterKind::Flat => "flat",
        })
    }
}

impl std::str::FromStr for TesterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sample" => Ok(TesterKind::Sample),
            "semi" | "semisample" => Ok(TesterKind::SemiSample),
            "blr" => Ok(TesterKind::Blr),
            "flat" => Ok(TesterKind::Flat),
            _ => Err(Error::Config(format!("unknown tester kind {s:?}"))),
        }
    }
}

/// Incremental row reduction of `[basis row | value]` constraints.
struct Eliminator<'f> {
    f: &'f Field,
    dim: usize,
    rows: Vec<Vec<u8>>,
    pivots: Vec<usize>,
}

impl<'f> Eliminator<'f> {
    fn new(f: &'f Field, dim: usize) -> Self {
        Eliminator {
            f,
            dim,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    /// Adds one constraint; false when the system becomes inconsistent.
    fn push(&mut self, row: &[u8], rhs: u8) -> bool {
        let f = self.f;
        let mut r = Vec::with_capacity(self.dim + 1);
        r.extend_from_slice(row);
        r.push(rhs);
        for (pr, &p) in self.rows.iter().zip(&self.pivots) {
            let c = r[p];
            if c != 0 {
                let nc = f.neg(c);
                for (x, &y) in r.iter_mut().zip(pr).skip(p) {
                    if y != 0 {
                        *x = f.add(*x, f.mul(nc, y));
                    }
                }
            }
        }
        match r[..self.dim].iter().position(|&v| v != 0) {
            None => r[self.dim] == 0,
            Some(p) => {
                let inv = f.inv_nonzero(r[p]);
                for x in r.iter_mut().skip(p) {
                    *x = f.mul(*x, inv);
                }
                self.rows.push(r);
                self.pivots.push(p);
                true
            }
        }
    }

    /// One solution, free variables set to zero.
    fn solution(&self) -> Vec<u8> {
        let f = self.f;
        let mut x = vec![0u8; self.dim];
        for (r, &p) in self.rows.iter().zip(&self.pivots).rev() {
            let mut v = r[self.dim];
            for j in p + 1..self.dim {
                if r[j] != 0 && x[j] != 0 {
                    v = f.sub(v, f.mul(r[j], x[j]));
                }
            }
            x[p] = v;
        }
        x
    }
}

/// Outcome of fitting a local codeword to an assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fit {
    pub consistent: bool,
    pub witness: Option<Vec<u8>>,
}

/// Whether some `g` in `C_k` matches the assignment `(local point, value)`.
/// Linear families use rank comparison on the augmented system; other
/// families are scanned exhaustively.
pub fn consistency_check(
    code: &dyn CodeFamily,
    k: usize,
    assignment: &[(usize, u8)],
) -> Result<Fit> {
    let f = code.field();
    if let Some(basis) = code.linear_basis(k)? {
        let mut el = Eliminator::new(f, basis.dim);
        for &(z, v) in assignment {
            if z >= basis.points() && basis.dim > 0 {
                return Err(Error::Domain(format!("point {z} outside F^{k}")));
            }
            let row: &[u8] = if basis.dim == 0 { &[] } else { basis.row(z) };
            if !el.push(row, v) {
                return Ok(Fit {
                    consistent: false,
                    witness: None,
                });
            }
        }
        return Ok(Fit {
            consistent: true,
            witness: Some(el.solution()),
        });
    }
    let words = code.codewords(k, ENUMERATION_CAP).map_err(|e| match e {
        Error::Budget(m) | Error::Unsupported(m) => {
            Error::Unsupported(format!("{}: {m}", code.name()))
        }
        other => other,
    })?;
    for w in &words {
        if assignment
            .iter()
            .all(|&(z, v)| w.get(z) == Symbol::Value(v))
        {
            return Ok(Fit {
                consistent: true,
                witness: Some(w.values()?),
            });
        }
    }
    Ok(Fit {
        consistent: false,
        witness: None,
    })
}

/// Keeps the first answer for every point.
fn collapse(mut pairs: Vec<(usize, u8)>) -> Vec<(usize, u8)> {
    pairs.sort_by_key(|p| p.0);
    pairs.dedup_by_key(|p| p.0);
    pairs
}

/// `ceil(4 * (1/(Q*eps) + 1))` rounds of the base tester.
pub fn repeated_rounds(queries: usize, eps: Rational) -> Result<usize> {
    if eps <= Rational::from_integer(0) || queries == 0 {
        return Err(Error::Domain("need eps > 0 and Q >= 1".into()));
    }
    let r = (Rational::from_integer(1) / (eps * Rational::from_integer(queries as i128)) + 1) * 4;
    Ok(r.ceil().to_integer() as usize)
}

/// `ceil((2 ln N + ln 2) / delta)`: uniform points that separate every pair
/// of an `N`-word family at distance `delta` with probability at least 1/2.
pub fn distinguishing_sample_size(words: &BigUint, delta: Rational) -> Result<u64> {
    if delta <= Rational::from_integer(0) || *words == BigUint::from(0u32) {
        return Err(Error::Domain("need delta > 0 and N >= 1".into()));
    }
    let arg = BigRational::from_integer(BigInt::from(words * words * 2u32));
    let inv = BigRational::new(BigInt::from(*delta.denom()), BigInt::from(*delta.numer()));
    let c = certified_ceil(|bits| Ok(ln(&arg, bits)?.scale(&inv)))?;
    c.to_u64()
        .ok_or_else(|| Error::Budget("sample size exceeds 64 bits".into()))
}

/// A configured tester against a code family.
#[derive(Clone)]
pub struct Tester {
    pub kind: TesterKind,
    pub code: Arc<dyn CodeFamily>,
    /// Subspace or flat dimension (semi-sample and flat testers).
    pub k: usize,
    /// Points drawn per round (sample and semi-sample testers).
    pub queries: usize,
    pub reps: usize,
}

impl fmt::Debug for Tester {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tester")
            .field("kind", &self.kind)
            .field("code", &self.code.name())
            .field("k", &self.k)
            .field("queries", &self.queries)
            .field("reps", &self.reps)
            .finish()
    }
}

impl Tester {
    pub fn sample(code: Arc<dyn CodeFamily>, queries: usize) -> Self {
        Tester {
            kind: TesterKind::Sample,
            code,
            k: 0,
            queries,
            reps: 1,
        }
    }
    pub fn semi_sample(code: Arc<dyn CodeFamily>, k: usize, queries: usize) -> Self {
        Tester {
            kind: TesterKind::SemiSample,
            code,
            k,
            queries,
            reps: 1,
        }
    }
    pub fn flat(code: Arc<dyn CodeFamily>, k: usize) -> Self {
        Tester {
            kind: TesterKind::Flat,
            code,
            k,
            queries: 0,
            reps: 1,
        }
    }
    pub fn blr(code: Arc<dyn CodeFamily>) -> Self {
        Tester {
            kind: TesterKind::Blr,
            code,
            k: 0,
            queries: 4,
            reps: 1,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    /// Sets the repetition count for proximity `eps`.
    pub fn repeated_for(mut self, eps: Rational) -> Result<Self> {
        self.reps = repeated_rounds(self.per_round_hint(), eps)?;
        Ok(self)
    }

    fn per_round_hint(&self) -> usize {
        match self.kind {
            TesterKind::Sample | TesterKind::SemiSample => self.queries,
            TesterKind::Blr => 4,
            TesterKind::Flat => self.code.field().size().pow(self.k as u32),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        match self.kind {
            TesterKind::Sample if self.queries == 0 => {
                Err(Error::Config("Q must be at least 1".into()))
            }
            TesterKind::SemiSample => {
                if self.queries == 0 {
                    return Err(Error::Config("Q must be at least 1".into()));
                }
                let t = self.code.base_dim();
                if self.k < t || self.k > n {
                    return Err(Error::Config(format!(
                        "need t <= k <= n, got t={t} k={} n={n}",
                        self.k
                    )));
                }
                Ok(())
            }
            TesterKind::Flat if self.k > n => Err(Error::Config(format!(
                "flat dimension {} exceeds n={n}",
                self.k
            ))),
            _ => Ok(()),
        }
    }

    /// Queries per round, counting repeats.
    pub fn queries_per_round(&self) -> usize {
        self.per_round_hint()
    }

    /// Query budget over all rounds.
    pub fn total_queries(&self) -> usize {
        self.reps * self.queries_per_round()
    }

    /// Runs the configured rounds, rejecting at the first rejecting round.
    pub fn run(&self, oracle: &mut dyn Oracle, rng: &mut dyn RngCore) -> Result<Verdict> {
        let space = oracle.space().clone();
        if **space.field() != **self.code.field() {
            return Err(Error::Config("oracle and code use different fields".into()));
        }
        self.validate(space.n())?;
        let mut queries = 0;
        let mut last = None;
        for round in 1..=self.reps {
            let (reason, witness, used) = self.round(&space, oracle, rng)?;
            queries += used;
            let decision = if reason == Reason::NoCodewordFits {
                Decision::Reject
            } else {
                Decision::Accept
            };
            let v = Verdict {
                decision,
                reason,
                witness,
                queries,
                rounds: round,
            };
            if reason != Reason::Consistent {
                return Ok(v);
            }
            last = Some(v);
        }
        Ok(last.expect("at least one round"))
    }

    /// Offline run on an erasure-free table.
    pub fn test_table(&self, f: &FunctionTable, rng: &mut dyn RngCore) -> Result<Verdict> {
        if f.has_erasures() {
            return Err(Error::Domain(
                "offline testers need an erasure-free table".into(),
            ));
        }
        self.run(&mut TableOracle::new(f), rng)
    }

    fn round(
        &self,
        space: &Space,
        oracle: &mut dyn Oracle,
        rng: &mut dyn RngCore,
    ) -> Result<(Reason, Option<Vec<u8>>, usize)> {
        let f = space.field();
        let q = space.q();
        let n = space.n();
        match self.kind {
            TesterKind::Sample | TesterKind::SemiSample => {
                let k = if self.kind == TesterKind::Sample {
                    n
                } else {
                    self.k
                };
                let local = q.pow(k as u32);
                // Small subspaces are listed once; large ones are mapped per query.
                let (table, chart) = match self.kind {
                    TesterKind::Sample => (None, None),
                    _ => {
                        let sub = random_subspace(f, n, self.k, rng)?;
                        if local <= self.queries {
                            (Some(sub.points(space)), None)
                        } else {
                            (None, Some(sub.chart(space)))
                        }
                    }
                };
                let mut pairs = Vec::with_capacity(self.queries);
                for i in 0..self.queries {
                    let z = rng.gen_range(0..local);
                    let x = match (&table, &chart) {
                        (Some(t), _) => t[z],
                        (_, Some(c)) => c.map(space, z),
                        _ => z,
                    };
                    match oracle.query(x)? {
                        Symbol::Erased => return Ok((Reason::ErasureSeen, None, i + 1)),
                        Symbol::Value(v) => pairs.push((z, v)),
                    }
                }
                let fit = consistency_check(self.code.as_ref(), k, &collapse(pairs))?;
                let reason = if fit.consistent {
                    Reason::Consistent
                } else {
                    Reason::NoCodewordFits
                };
                Ok((reason, fit.witness, self.queries))
            }
            TesterKind::Flat => {
                let dir = random_subspace(f, n, self.k, rng)?;
                let shift: Vec<u8> = (0..n).map(|_| rng.gen_range(0..q) as u8).collect();
                let chart = AffineFlat::new(f, dir, &shift)?.chart(space);
                let local = Space::new(f.clone(), self.k)?;
                let mut vals = Vec::with_capacity(local.size());
                for z in 0..local.size() {
                    match oracle.query(chart.map(space, z))? {
                        Symbol::Erased => return Ok((Reason::ErasureSeen, None, z + 1)),
                        Symbol::Value(v) => vals.push(v),
                    }
                }
                let table = FunctionTable::from_values(local, vals.clone())?;
                let ok = self.code.contains(&table)?;
                Ok(if ok {
                    (Reason::Consistent, Some(vals), table.len())
                } else {
                    (Reason::NoCodewordFits, None, table.len())
                })
            }
            TesterKind::Blr => {
                // Affine form: f(x) + f(y) = f(x + y) + f(0).
                let x = rng.gen_range(0..space.size());
                let y = rng.gen_range(0..space.size());
                let pts = [x, y, 0, space.add(x, y)];
                let mut v = [0u8; 4];
                for (i, &p) in pts.iter().enumerate() {
                    match oracle.query(p)? {
                        Symbol::Erased => return Ok((Reason::ErasureSeen, None, i + 1)),
                        Symbol::Value(a) => v[i] = a,
                    }
                }
                let ok = f.add(v[0], v[1]) == f.add(v[3], v[2]);
                Ok((
                    if ok {
                        Reason::Consistent
                    } else {
                        Reason::NoCodewordFits
                    },
                    None,
                    4,
                ))
            }
        }
    }
}

/// `min{1/128, Q * eps / 8}`, the small-distance rejection floor.
pub fn soundness_floor(queries: usize, eps: Rational) -> Rational {
    let small = eps * Rational::from_integer(queries as i128) / 8;
    small.min(Rational::new(1, 128))
}

/// Rejection rate of a tester on one input against [`soundness_floor`].
#[derive(Clone, Debug, Serialize)]
pub struct SoundnessCell {
    pub k: usize,
    pub queries: usize,
    #[serde(serialize_with = "crate::exact::ser_rational")]
    pub eps: Rational,
    pub estimate: RateEstimate,
    #[serde(serialize_with = "crate::exact::ser_rational")]
    pub bound: Rational,
    /// With `eps = 0`: no rejection at all. Otherwise the lower confidence
    /// bound clears `bound`.
    pub pass: bool,
}

pub fn soundness_cell(
    f: &FunctionTable,
    eps: Rational,
    tester: &Tester,
    trials: u64,
    seed: u64,
    sigma: f64,
) -> Result<SoundnessCell> {
    let rejects = count_trials(trials, |t| {
        tester
            .test_table(f, &mut trial_rng(seed, t))
            .map(|v| v.rejected())
    })?;
    let estimate = RateEstimate::new(rejects, trials, sigma);
    let bound = soundness_floor(tester.queries, eps);
    let pass = if eps == Rational::from_integer(0) {
        rejects == 0
    } else {
        estimate.clears(rat_f64(bound))
    };
    Ok(SoundnessCell {
        k: tester.k,
        queries: tester.queries,
        eps,
        estimate,
        bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functab::plant;
    use crate::gf::FieldRef;
    use crate::rm::{s_k, ReedMuller};
    use crate::space::Subspace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2() -> FieldRef {
        Field::new(2).unwrap()
    }

    fn rm(q: u32, d: usize) -> Arc<dyn CodeFamily> {
        Arc::new(ReedMuller::new(Field::new(q).unwrap(), d))
    }

    /// Brute-force oracle: any codeword agreeing on the assignment.
    fn brute_fit(code: &dyn CodeFamily, k: usize, a: &[(usize, u8)]) -> bool {
        code.codewords(k, ENUMERATION_CAP)
            .unwrap()
            .iter()
            .any(|w| a.iter().all(|&(z, v)| w.get(z) == Symbol::Value(v)))
    }

    #[test]
    fn consistency_examples() {
        let code = rm(2, 1);
        let fit = consistency_check(code.as_ref(), 2, &[(0, 0), (1, 1), (2, 1)]).unwrap();
        assert!(fit.consistent);
        // Basis order 1, x_1, x_2: the witness is x_1 + x_2.
        assert_eq!(fit.witness, Some(vec![0, 1, 1]));
        assert!(brute_fit(code.as_ref(), 2, &[(0, 0), (1, 1), (2, 1)]));
        let fit = consistency_check(code.as_ref(), 2, &[(0, 0), (1, 1), (2, 1), (3, 1)]).unwrap();
        assert!(!fit.consistent);
        assert!(!brute_fit(
            code.as_ref(),
            2,
            &[(0, 0), (1, 1), (2, 1), (3, 1)]
        ));
        assert!(consistency_check(code.as_ref(), 2, &[]).unwrap().consistent);
    }

    #[test]
    fn sample_based_examples() {
        let code = rm(2, 1);
        let s = Space::new(f2(), 2).unwrap();
        let delta = FunctionTable::from_values(s.clone(), vec![1, 0, 0, 0]).unwrap();
        let fit = consistency_check(code.as_ref(), 2, &[(0, 1), (1, 0), (2, 0), (3, 0)]).unwrap();
        assert!(!fit.consistent);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Tester::sample(code.clone(), 64);
        assert!(t.test_table(&delta, &mut rng).unwrap().rejected());
        for _ in 0..50 {
            let g = code.random_codeword(2, &mut rng).unwrap();
            assert!(t.test_table(&g, &mut rng).unwrap().accepted());
        }
    }

    #[test]
    fn lemma_sample_rejection_floor() {
        // f at distance 3/16 from RM[4,2,1]; s >= ln(2|C|)/eps = ln 64 * 16/3.
        let code = rm(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = plant(code.as_ref(), 4, 3, &mut rng).unwrap();
        let s = ((64f64).ln() * 16.0 / 3.0).ceil() as usize;
        let t = Tester::sample(code, s);
        let trials = 10_000u64;
        let rejects = (0..trials)
            .filter(|_| t.test_table(&inst.f, &mut rng).unwrap().rejected())
            .count() as f64;
        let p = 0.25;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            rejects / trials as f64 >= p - 3.0 * sigma,
            "rate {}",
            rejects / trials as f64
        );
    }

    #[test]
    fn completeness_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (q, d, n, k) in [(2u32, 1usize, 5usize, 3usize), (3, 1, 3, 2), (2, 2, 5, 4)] {
            let code = rm(q, d);
            let testers = [
                Tester::sample(code.clone(), 20),
                Tester::semi_sample(code.clone(), k, 30).with_reps(3),
                Tester::flat(code.clone(), k),
            ];
            for _ in 0..100 {
                let g = code.random_codeword(n, &mut rng).unwrap();
                for t in &testers {
                    let v = t.test_table(&g, &mut rng).unwrap();
                    assert!(v.accepted() && v.reason == Reason::Consistent, "{t:?}");
                }
            }
        }
        let blr = Tester::blr(rm(2, 1)).with_reps(10);
        for _ in 0..100 {
            let g = rm(2, 1).random_codeword(6, &mut rng).unwrap();
            assert!(blr.test_table(&g, &mut rng).unwrap().accepted());
        }
    }

    #[test]
    fn blr_example() {
        struct Fixed<'a>(TableOracle<'a>);
        let s = Space::new(f2(), 2).unwrap();
        let f = FunctionTable::from_fn(s.clone(), |x| x[0] & x[1]).unwrap();
        // x = (1,0) = index 1, y = (0,1) = index 2: 0 + 0 != f(1,1) + f(0) = 1.
        let mut o = Fixed(TableOracle::new(&f));
        let vals: Vec<u8> = [1usize, 2, 0, s.add(1, 2)]
            .iter()
            .map(|&p| o.0.query(p).unwrap().value().unwrap())
            .collect();
        assert_ne!(f2().add(vals[0], vals[1]), f2().add(vals[3], vals[2]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = Tester::blr(rm(2, 1)).with_reps(40);
        assert!(t.test_table(&f, &mut rng).unwrap().rejected());
    }

    #[test]
    fn repeated_round_counts() {
        assert_eq!(repeated_rounds(10, Rational::new(1, 10)).unwrap(), 8);
        assert_eq!(repeated_rounds(100, Rational::new(1, 2)).unwrap(), 5);
        assert_eq!(repeated_rounds(1, Rational::new(1, 4)).unwrap(), 20);
        assert!(repeated_rounds(1, Rational::from_integer(0)).is_err());
    }

    #[test]
    fn repeated_tester_two_thirds() {
        // eps-far input; the repeated tester rejects with probability >= 2/3.
        let code = rm(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let inst = plant(code.as_ref(), 6, 8, &mut rng).unwrap();
        let eps = Rational::new(8, 64);
        let t = Tester::semi_sample(code, 3, 8).repeated_for(eps).unwrap();
        let trials = 2000;
        let rejects = (0..trials)
            .filter(|_| t.test_table(&inst.f, &mut rng).unwrap().rejected())
            .count();
        assert!(rejects as f64 / trials as f64 >= 2.0 / 3.0, "{rejects}");
    }

    #[test]
    fn semi_sample_at_full_dimension_matches_sample() {
        let code = rm(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = plant(code.as_ref(), 4, 2, &mut rng).unwrap();
        let trials = 20_000;
        let a = (0..trials)
            .filter(|_| {
                Tester::sample(code.clone(), 6)
                    .test_table(&inst.f, &mut rng)
                    .unwrap()
                    .rejected()
            })
            .count();
        let b = (0..trials)
            .filter(|_| {
                Tester::semi_sample(code.clone(), 4, 6)
                    .test_table(&inst.f, &mut rng)
                    .unwrap()
                    .rejected()
            })
            .count();
        let (pa, pb) = (a as f64 / trials as f64, b as f64 / trials as f64);
        let sigma = (pa * (1.0 - pa) * 2.0 / trials as f64).sqrt();
        assert!((pa - pb).abs() <= 4.0 * sigma, "{pa} vs {pb}");
    }

    #[test]
    fn semi_sample_queries_uniform_within_subspace() {
        // Fix the subspace by seeding, collect queries, chi-square against uniform.
        let code = rm(2, 1);
        let s = Space::new(f2(), 5).unwrap();
        let g = FunctionTable::zero(s.clone());
        let t = Tester::semi_sample(code, 3, 4000);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut o = TableOracle::new(&g);
        t.run(&mut o, &mut rng).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for &x in &o.log {
            *counts.entry(x).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 8);
        let basis_rows: Vec<Vec<u8>> = counts.keys().map(|&x| s.coords(x)).collect();
        let sub = Subspace::span(&f2(), 5, &basis_rows).unwrap();
        assert_eq!(sub.dim(), 3);
        let expected = 4000.0 / 8.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 24.3, "chi2 {chi2}"); // 99.9% quantile, 7 dof
    }

    #[test]
    fn determinism() {
        let code = rm(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = plant(code.as_ref(), 4, 3, &mut rng).unwrap();
        let t = Tester::semi_sample(code, 2, 12).with_reps(5);
        let run = |seed| {
            let mut o = TableOracle::new(&inst.f);
            let v = t.run(&mut o, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            (v, o.log)
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn distinguishing_size_and_engine() {
        // RM[3,2,1]: N = 16, delta = 1/2 gives ceil((2 ln 16 + ln 2) * 2) = 13.
        let m = distinguishing_sample_size(&BigUint::from(16u32), Rational::new(1, 2)).unwrap();
        assert_eq!(m, 13);
        let code = rm(2, 1);
        let words = code.codewords(3, ENUMERATION_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 2000;
        let mut good = 0;
        for _ in 0..trials {
            let pts: Vec<usize> = (0..m).map(|_| rng.gen_range(0..8)).collect();
            let sigs: std::collections::HashSet<Vec<Symbol>> = words
                .iter()
                .map(|w| pts.iter().map(|&p| w.get(p)).collect())
                .collect();
            good += (sigs.len() == words.len()) as usize;
        }
        assert!(good * 2 >= trials, "{good}");
    }

    #[test]
    fn validation_and_errors() {
        let code = rm(2, 1);
        let s = Space::new(f2(), 4).unwrap();
        let g = FunctionTable::zero(s);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            Tester::semi_sample(code.clone(), 2, 5).test_table(&g, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Tester::semi_sample(code.clone(), 3, 0).test_table(&g, &mut rng),
            Err(Error::Config(_))
        ));
        let mut erased = g.clone();
        erased.set(0, Symbol::Erased);
        assert!(matches!(
            Tester::sample(code.clone(), 3).test_table(&erased, &mut rng),
            Err(Error::Domain(_))
        ));
        let g3 = FunctionTable::zero(Space::new(Field::new(3).unwrap(), 4).unwrap());
        assert!(matches!(
            Tester::sample(code, 3).test_table(&g3, &mut rng),
            Err(Error::Config(_))
        ));
        assert_eq!(s_k(&f2(), 1, 3).unwrap(), 556);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn elimination_agrees_with_brute_force(
                seed in any::<u64>(),
                q in prop::sample::select(vec![2u32, 3]),
                d in 0usize..3,
                m in 0usize..12,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let code = rm(q, d);
                let k = 2;
                let size = (q as usize).pow(2);
                let a: Vec<(usize, u8)> = (0..m).map(|_| (rng.gen_range(0..size), rng.gen_range(0..q) as u8)).collect();
                let a = collapse(a);
                let fit = consistency_check(code.as_ref(), k, &a).unwrap();
                prop_assert_eq!(fit.consistent, brute_fit(code.as_ref(), k, &a));
                if let Some(w) = fit.witness {
                    let basis = code.linear_basis(k).unwrap().unwrap();
                    let g = basis.combine(code.field(), &w);
                    prop_assert!(a.iter().all(|&(z, v)| g[z] == v));
                }
            }
        }
    }
}
