//! Query lower bounds from lexicographic prefixes, evaluation-matrix ranks,
//! the `s_k / q^k` ratio, and dimension sizing for online testers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{big, Rational};
use crate::gf::Field;
use crate::rm::{monomials, q_k_parameter, rm_dim, s_k, testing_dim, CodeFamily};
use crate::space::{Matrix, Space};
use crate::testers::repeated_rounds;

/// Largest `k` searched by [`k_adv_size`].
pub const K_ADV_CAP: usize = 200;
/// Largest evaluation matrix `|S| * dim` accepted by [`rank_witness`].
pub const RANK_BUDGET: u128 = 1 << 24;
const DIRECT_LIMIT: u128 = 1 << 24;

fn pow_u128(q: usize, n: usize) -> Result<u128> {
    (q as u128)
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Budget(format!("{q}^{n} overflows 128 bits")))
}

/// The first `k` tuples of `{0..q-1}^n` in lexicographic order, most
/// significant coordinate first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexSet {
    pub q: usize,
    pub n: usize,
    pub k: u128,
}

impl LexSet {
    pub fn new(q: usize, n: usize, k: u128) -> Result<Self> {
        if k > pow_u128(q, n)? {
            return Err(Error::Domain(format!("k={k} exceeds {q}^{n}")));
        }
        Ok(LexSet { q, n, k })
    }

    pub fn len(&self) -> u128 {
        self.k
    }
    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// The `i`-th tuple, written most significant coordinate first.
    pub fn tuple(&self, mut i: u128) -> Vec<u8> {
        let mut out = vec![0u8; self.n];
        for slot in out.iter_mut().rev() {
            *slot = (i % self.q as u128) as u8;
            i /= self.q as u128;
        }
        out
    }

    /// Point index of the `i`-th tuple. Coordinate `j` of the point is
    /// entry `j` of the tuple, so the little-endian index reverses the order.
    pub fn point(&self, space: &Space, i: u128) -> usize {
        space.index(&self.tuple(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        (0..self.k).map(|i| self.tuple(i))
    }
}

// ways[len][s]: tuples of length `len` with digit sum exactly `s`.
fn sum_table(q: usize, n: usize, d: usize) -> Vec<Vec<u128>> {
    let mut ways = vec![vec![0u128; d + 1]; n + 1];
    ways[0][0] = 1;
    for len in 1..=n {
        for s in 0..=d {
            ways[len][s] = (0..q.min(s + 1)).map(|c| ways[len - 1][s - c]).sum();
        }
    }
    ways
}

/// `|{x in M_q^n(k) : sum x_i <= d}|` by digit counting.
pub fn lex_count_dp(q: usize, n: usize, k: u128, d: usize) -> Result<u128> {
    let total = pow_u128(q, n)?;
    if k > total {
        return Err(Error::Domain(format!("k={k} exceeds {q}^{n}")));
    }
    let d = d.min(n * (q - 1));
    let ways = sum_table(q, n, d);
    let upto = |len: usize, budget: usize| -> u128 { ways[len][..=budget].iter().sum() };
    if k == total {
        return Ok(upto(n, d));
    }
    let digits = LexSet { q, n, k }.tuple(k);
    let mut count = 0u128;
    let mut used = 0usize;
    for (i, &kd) in digits.iter().enumerate() {
        for c in 0..kd as usize {
            if used + c <= d {
                count += upto(n - i - 1, d - used - c);
            }
        }
        used += kd as usize;
        if used > d {
            break;
        }
    }
    Ok(count)
}

/// `|{x in M_q^n(k) : sum x_i <= d}|`, enumerating small prefixes directly.
pub fn lex_set_count_low_weight(q: usize, n: usize, k: u128, d: usize) -> Result<u128> {
    let set = LexSet::new(q, n, k)?;
    if k <= DIRECT_LIMIT {
        return Ok(set
            .iter()
            .filter(|x| x.iter().map(|&v| v as usize).sum::<usize>() <= d)
            .count() as u128);
    }
    lex_count_dp(q, n, k, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub q: usize,
    pub n: usize,
    pub d: usize,
    pub t: u128,
    pub lower_bound: u128,
    /// `(floor(log_q t) / d)^d`, present when `1 <= d <= q`.
    pub explicit_floor: Option<f64>,
    #[serde(skip)]
    pub explicit_floor_exact: Option<Rational>,
    /// Query budget of the tester the bound is compared against, if any.
    pub tester_queries: Option<u64>,
}

impl BoundReport {
    pub fn floor_holds(&self) -> bool {
        self.explicit_floor_exact
            .is_none_or(|f| Rational::from_integer(self.lower_bound as i128) >= f)
    }
    pub fn tester_meets_bound(&self) -> Option<bool> {
        self.tester_queries.map(|qt| qt as u128 >= self.lower_bound)
    }
}

fn floor_log(q: u128, t: u128) -> u32 {
    let mut e = 0;
    let mut p = q;
    while p <= t {
        e += 1;
        match p.checked_mul(q) {
            Some(x) => p = x,
            None => break,
        }
    }
    e
}

/// `|M_q^n(t)_{<= d}|`, the query lower bound against a `t`-online eraser.
pub fn query_lower_bound(q: usize, n: usize, d: usize, t: u128) -> Result<BoundReport> {
    if t == 0 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    let lower_bound = lex_set_count_low_weight(q, n, t, d)?;
    let explicit_floor_exact = (d >= 1 && d <= q).then(|| {
        let r = Rational::new(floor_log(q as u128, t) as i128, d as i128);
        (0..d).fold(Rational::one(), |acc, _| acc * r)
    });
    Ok(BoundReport {
        q,
        n,
        d,
        t,
        lower_bound,
        explicit_floor: explicit_floor_exact.map(crate::exact::rat_f64),
        explicit_floor_exact,
        tester_queries: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub q: usize,
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub rm_dim: u128,
    pub lex_rank: usize,
    pub lex_bound: u128,
    /// Rank on a uniformly random set of the same size (reported only).
    pub random_rank: usize,
    pub holds: bool,
}

fn evaluation_rank(field: &Field, points: &[Vec<u8>], monos: &[Vec<u8>]) -> usize {
    let rows: Vec<Vec<u8>> = points
        .iter()
        .map(|x| {
            monos
                .iter()
                .map(|e| {
                    x.iter().zip(e).fold(1u8, |acc, (&xi, &ei)| {
                        field.mul(acc, field.pow(xi, ei as u64))
                    })
                })
                .collect()
        })
        .collect();
    let m = Matrix::from_rows(monos.len(), &rows).expect("rows share a width");
    m.rref(field).1
}

/// Rank of the `RM[n,q,d]` evaluation matrix on `M_q^n(q^r)` and on a random
/// set of the same size; the lexicographic prefix must reach
/// `|M_q^n(q^r)_{<= d}|`.
pub fn rank_witness(
    field: &Field,
    n: usize,
    d: usize,
    r: usize,
    rng: &mut dyn RngCore,
) -> Result<RankReport> {
    let q = field.size();
    if r > n {
        return Err(Error::Domain(format!("r={r} exceeds n={n}")));
    }
    let size = pow_u128(q, r)?;
    let dim = rm_dim(n, q, d);
    if size * dim > RANK_BUDGET {
        return Err(Error::Budget(format!(
            "{size} x {dim} evaluation matrix exceeds the rank budget"
        )));
    }
    let monos = monomials(n, q, d);
    let lex = LexSet::new(q, n, size)?;
    let lex_points: Vec<Vec<u8>> = lex.iter().collect();
    let lex_rank = evaluation_rank(field, &lex_points, &monos);
    let space = Space::new(std::sync::Arc::new(field.clone()), n)?;
    let picks = rand::seq::index::sample(rng, space.size(), size as usize);
    let random_points: Vec<Vec<u8>> = picks.into_iter().map(|i| space.coords(i)).collect();
    let random_rank = evaluation_rank(field, &random_points, &monos);
    let lex_bound = lex_set_count_low_weight(q, n, size, d)?;
    let report = RankReport {
        q,
        n,
        d,
        r,
        rm_dim: dim,
        lex_rank,
        lex_bound,
        random_rank,
        holds: lex_rank as u128 >= lex_bound,
    };
    if !report.holds {
        return Err(Error::LemmaViolation(format!(
            "evaluation rank {lex_rank} below {lex_bound} at q={q} n={n} d={d} r={r}"
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SkRatioReport {
    pub q: usize,
    pub d: usize,
    pub c: u32,
    pub k: usize,
    pub s_k: u64,
    /// `s_k / q^k`.
    pub ratio: f64,
    #[serde(skip)]
    pub ratio_exact: BigRational,
    /// Whether `k >= 8d + 3c + 24`, where `ratio <= q^{-c}` is guaranteed.
    pub guaranteed: bool,
    pub below_bound: bool,
}

fn q_pow(q: usize, k: usize) -> BigInt {
    BigInt::from(q).pow(k as u32)
}

pub fn sk_ratio(field: &Field, d: usize, k: usize) -> Result<(u64, BigRational)> {
    let s = s_k(field, d, k)?;
    Ok((s, BigRational::new(BigInt::from(s), q_pow(field.size(), k))))
}

/// `s_k / q^k <= q^{-c}`, asserted once `k >= 8d + 3c + 24`.
pub fn sk_ratio_check(field: &Field, d: usize, c: u32, k: usize) -> Result<SkRatioReport> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let q = field.size();
    let (s, ratio) = sk_ratio(field, d, k)?;
    let bound = BigRational::new(BigInt::one(), q_pow(q, c as usize));
    let guaranteed = k >= 8 * d + 3 * c as usize + 24;
    let below_bound = ratio <= bound;
    if guaranteed && !below_bound {
        return Err(Error::LemmaViolation(format!(
            "s_k/q^k = {ratio} exceeds q^-{c} at k={k}, d={d}, q={q}"
        )));
    }
    Ok(SkRatioReport {
        q,
        d,
        c,
        k,
        s_k: s,
        ratio: crate::exact::to_f64(&ratio),
        ratio_exact: ratio,
        guaranteed,
        below_bound,
    })
}

/// Ratios `s_k / q^k` over `k in [from, to]`, required to be non-increasing.
pub fn sk_ratio_sweep(field: &Field, d: usize, from: usize, to: usize) -> Result<Vec<BigRational>> {
    let mut out: Vec<BigRational> = Vec::new();
    for k in from.max(1)..=to {
        let (_, r) = sk_ratio(field, d, k)?;
        if let Some(prev) = out.last() {
            if r > *prev {
                return Err(Error::LemmaViolation(format!(
                    "s_k/q^k increases at k={k} (q={}, d={d})",
                    field.size()
                )));
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Dimension chosen for an online tester and the numbers behind it.
#[derive(Clone, Debug, Serialize)]
pub struct KAdv {
    pub k: usize,
    pub s_k: u64,
    pub reps: usize,
    pub q_total: u64,
    /// `t * Q_total^2 / q^k`.
    pub hit_bound: f64,
    #[serde(skip)]
    pub hit_bound_exact: BigRational,
}

/// Total queries of the repeated semi-sample RM tester at dimension `k`:
/// `s_k` points per round, `ceil(4 (1/(s_k eps) + 1))` rounds.
pub fn online_query_total(
    field: &Field,
    d: usize,
    k: usize,
    eps: Rational,
) -> Result<(u64, usize, u64)> {
    let s = s_k(field, d, k)?;
    let reps = repeated_rounds(s as usize, eps)?;
    Ok((s, reps, s * reps as u64))
}

/// Smallest `k >= t_{q,d}` with `t * Q_total(k)^2 / q^k <= safety`.
pub fn k_adv_size(
    field: &Field,
    d: usize,
    t: Rational,
    eps: Rational,
    safety: Rational,
) -> Result<KAdv> {
    if t < Rational::zero() || eps <= Rational::zero() || safety <= Rational::zero() {
        return Err(Error::Domain("need t >= 0, eps > 0 and safety > 0".into()));
    }
    let q = field.size();
    let start = testing_dim(field, d);
    let (tb, sb) = (big(t), big(safety));
    for k in start..=K_ADV_CAP {
        let (s, reps, total) = online_query_total(field, d, k, eps)?;
        let qt = BigInt::from(total);
        let bound = &tb * BigRational::new(&qt * &qt, q_pow(q, k));
        if bound <= sb {
            return Ok(KAdv {
                k,
                s_k: s,
                reps,
                q_total: total,
                hit_bound: crate::exact::to_f64(&bound),
                hit_bound_exact: bound,
            });
        }
    }
    Err(Error::Budget(format!(
        "no k <= {K_ADV_CAP} has t*Q_total^2/q^k <= {safety} (q={q}, d={d}, t={t}, eps={eps})"
    )))
}

/// `Q_k^2 t / q^k <= 1/100`, the gate for online testing of lifted codes.
pub fn lifted_online_feasible(code: &dyn CodeFamily, k: usize, t: Rational) -> Result<bool> {
    let qk = BigInt::from(q_k_parameter(code, k)?);
    let lhs = big(t) * BigRational::new(&qk * &qk, q_pow(code.field().size(), k));
    Ok(lhs <= BigRational::new(BigInt::one(), BigInt::from(100)))
}
