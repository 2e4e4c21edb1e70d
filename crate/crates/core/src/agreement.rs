//! Hyperplane agreement: the sampling measure `nu`, the count `N(x)`, the
//! consistency graph of local functions, its non-transitivity `beta`, a
//! greedy clique cover, and extrapolation of a global function from a clique.

use std::fs;
use std::path::Path;

use num_traits::{Signed, Zero};
use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{rat_f64, ser_rational, Rational};
use crate::functab::{hamming_distance, FunctionTable, Symbol};
use crate::gf::{Field, FieldRef};
use crate::par::{count_trials, trial_rng};
use crate::rm::{CodeFamily, ENUMERATION_CAP};
use crate::space::{normalized_functionals, Space, Subspace};
use crate::stats::RateEstimate;
use crate::testers::{Tester, TesterKind};

/// `M` distinct linear hyperplanes of F_q^n, each stored as its normalized
/// functional `a` (the hyperplane is `{x : <a, x> = 0}`), with optional local
/// functions on each hyperplane in its chart coordinates.
#[derive(Clone, Debug)]
pub struct HyperplaneCollection {
    space: Space,
    functionals: Vec<usize>,
    locals: Option<Vec<FunctionTable>>,
}

fn is_normalized(q: usize, mut a: usize) -> bool {
    if a == 0 {
        return false;
    }
    while a.is_multiple_of(q) {
        a /= q;
    }
    a % q == 1
}

impl HyperplaneCollection {
    pub fn new(space: Space, functionals: Vec<usize>) -> Result<Self> {
        let q = space.q();
        let mut seen = vec![false; space.size()];
        for &a in &functionals {
            if a >= space.size() || !is_normalized(q, a) {
                return Err(Error::Domain(format!(
                    "{a} is not a normalized nonzero functional"
                )));
            }
            if std::mem::replace(&mut seen[a], true) {
                return Err(Error::Domain(format!("hyperplane {a} listed twice")));
            }
        }
        Ok(HyperplaneCollection {
            space,
            functionals,
            locals: None,
        })
    }

    /// Builds a collection from hyperplane subspaces.
    pub fn from_subspaces(space: Space, hyperplanes: &[Subspace]) -> Result<Self> {
        let f = space.field().clone();
        let mut functionals = Vec::with_capacity(hyperplanes.len());
        for w in hyperplanes {
            if w.ambient_dim() != space.n() || w.dim() + 1 != space.n() {
                return Err(Error::Domain(format!(
                    "{w} is not a hyperplane of F^{}",
                    space.n()
                )));
            }
            let ann = w.annihilator(&f);
            let row = space.index(ann.row(0));
            let lead = ann
                .row(0)
                .iter()
                .find(|&&v| v != 0)
                .copied()
                .expect("nonzero annihilator");
            functionals.push(space.scale(f.inv(lead)?, row));
        }
        Self::new(space, functionals)
    }

    /// All `(q^n - 1)/(q - 1)` hyperplanes.
    pub fn all(space: Space) -> Self {
        let functionals = normalized_functionals(&space);
        HyperplaneCollection {
            space,
            functionals,
            locals: None,
        }
    }

    /// `m` distinct hyperplanes drawn uniformly without replacement.
    pub fn random(space: Space, m: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let pool = normalized_functionals(&space);
        if m == 0 || m > pool.len() {
            return Err(Error::Domain(format!("M={m} outside [1, {}]", pool.len())));
        }
        let functionals = sample(rng, pool.len(), m)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        Ok(HyperplaneCollection {
            space,
            functionals,
            locals: None,
        })
    }

    /// Attaches local functions, one per hyperplane, on F_q^{n-1}.
    pub fn with_locals(mut self, locals: Vec<FunctionTable>) -> Result<Self> {
        if locals.len() != self.m() {
            return Err(Error::Domain(format!(
                "{} local functions for {} hyperplanes",
                locals.len(),
                self.m()
            )));
        }
        for t in &locals {
            if t.n() + 1 != self.space.n() || t.field().q() != self.space.field().q() {
                return Err(Error::Domain(
                    "local function does not live on a hyperplane chart".into(),
                ));
            }
            if t.has_erasures() {
                return Err(Error::Domain(
                    "local functions cannot carry erasures".into(),
                ));
            }
        }
        self.locals = Some(locals);
        Ok(self)
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
    pub fn m(&self) -> usize {
        self.functionals.len()
    }
    pub fn functionals(&self) -> &[usize] {
        &self.functionals
    }
    pub fn locals(&self) -> Option<&[FunctionTable]> {
        self.locals.as_deref()
    }

    pub fn hyperplane(&self, i: usize) -> Subspace {
        Subspace::kernel_of(self.space.field(), &self.space.coords(self.functionals[i]))
    }

    pub fn contains(&self, i: usize, x: usize) -> bool {
        self.space.dot(self.functionals[i], x) == 0
    }

    /// `N(x)`, the number of hyperplanes through `x`.
    pub fn count_containing(&self, x: usize) -> usize {
        (0..self.m()).filter(|&i| self.contains(i, x)).count()
    }

    /// `N(x)` for every point at once.
    ///
    /// `T[x][s]` counts functionals `a` with `<a, x> = s`; coordinates of `a`
    /// are swapped for coordinates of `x` one at a time.
    pub fn all_counts(&self) -> Vec<u32> {
        let (q, n, size) = (self.space.q(), self.n(), self.space.size());
        let f = self.space.field();
        let mut cur = vec![0u32; size * q];
        for &a in &self.functionals {
            cur[a * q] += 1;
        }
        let mut next = vec![0u32; size * q];
        let mut stride = 1usize;
        for _ in 0..n {
            next.iter_mut().for_each(|v| *v = 0);
            for idx in 0..size {
                let digit = (idx / stride) % q;
                let base = idx - digit * stride;
                for s in 0..q {
                    let v = cur[idx * q + s];
                    if v == 0 {
                        continue;
                    }
                    for xj in 0..q {
                        let t = f.add(s as u8, f.mul(digit as u8, xj as u8)) as usize;
                        next[(base + xj * stride) * q + t] += v;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
            stride *= q;
        }
        (0..size).map(|x| cur[x * q]).collect()
    }

    /// Ambient points of hyperplane `i`, in its chart order.
    pub fn points(&self, i: usize) -> Vec<usize> {
        self.hyperplane(i).points(&self.space)
    }

    /// Writes `collection.txt` (a `q= n= count= [modulus=]` header and one
    /// functional per line) plus `local_#####.txt` when local functions exist.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let f = self.space.field();
        let mut text = format!("q={} n={} count={}", f.q(), self.n(), self.m());
        if !f.modulus().is_empty() {
            let m: Vec<String> = f.modulus().iter().map(|c| c.to_string()).collect();
            text.push_str(&format!(" modulus={}", m.join(",")));
        }
        text.push('\n');
        for &a in &self.functionals {
            let c: Vec<String> = self.space.coords(a).iter().map(|v| v.to_string()).collect();
            text.push_str(&c.join(" "));
            text.push('\n');
        }
        fs::write(dir.join("collection.txt"), text)?;
        if let Some(locals) = &self.locals {
            for (i, t) in locals.iter().enumerate() {
                t.write(&dir.join(format!("local_{i:05}.txt")))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("collection.txt"))?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty collection file".into(),
        })?;
        let (mut q, mut n, mut count, mut modulus) = (None, None, None, None);
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse {
                line: hline + 1,
                msg: format!("expected key=value, got {tok}"),
            })?;
            let num = || {
                v.parse::<usize>().map_err(|e| Error::Parse {
                    line: hline + 1,
                    msg: format!("{k}: {e}"),
                })
            };
            match k {
                "q" => q = Some(num()?),
                "n" => n = Some(num()?),
                "count" => count = Some(num()?),
                "modulus" => modulus = Some(crate::gf::parse_coeffs(v)?),
                _ => {
                    return Err(Error::Parse {
                        line: hline + 1,
                        msg: format!("unknown key {k}"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse {
            line: hline + 1,
            msg: format!("missing {k}"),
        };
        let (q, n, count) = (
            q.ok_or_else(|| missing("q"))?,
            n.ok_or_else(|| missing("n"))?,
            count.ok_or_else(|| missing("count"))?,
        );
        let field = match modulus {
            Some(m) => Field::with_modulus(q as u32, &m)?,
            None => Field::new(q as u32)?,
        };
        let space = Space::new(field, n)?;
        let mut functionals = Vec::with_capacity(count);
        for (ln, line) in lines {
            let coords: Vec<u8> = line
                .split_whitespace()
                .map(|t| t.parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })?;
            if coords.len() != n || coords.iter().any(|&c| c as usize >= q) {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected {n} coordinates below {q}"),
                });
            }
            functionals.push(space.index(&coords));
        }
        if functionals.len() != count {
            return Err(Error::Parse {
                line: hline + 1,
                msg: format!("header says count={count}, found {}", functionals.len()),
            });
        }
        let mut coll = Self::new(space, functionals)?;
        if dir.join("local_00000.txt").exists() {
            let locals = (0..count)
                .map(|i| FunctionTable::read(&dir.join(format!("local_{i:05}.txt"))))
                .collect::<Result<Vec<_>>>()?;
            coll = coll.with_locals(locals)?;
        }
        Ok(coll)
    }
}

/// `mu(S) = |S| / q^n`.
pub fn mu_measure(space: &Space, set: &[usize]) -> Rational {
    Rational::new(set.len() as i128, space.size() as i128)
}

/// `nu(S) = sum_{x in S} N(x) / (M q^{n-1})`, from precomputed counts.
pub fn nu_from_counts(
    coll: &HyperplaneCollection,
    counts: &[u32],
    set: &[usize],
) -> Result<Rational> {
    if coll.m() == 0 {
        return Err(Error::Domain(
            "nu is undefined for an empty collection".into(),
        ));
    }
    let total: i128 = set.iter().map(|&x| counts[x] as i128).sum();
    Ok(Rational::new(
        total,
        (coll.m() * coll.space.size() / coll.space.q()) as i128,
    ))
}

pub fn nu_measure(coll: &HyperplaneCollection, set: &[usize]) -> Result<Rational> {
    nu_from_counts(coll, &coll.all_counts(), set)
}

/// Outcome of the two-sided sampling inequality
/// `(mu - 4q/M)/2 <= nu <= 2 mu + 8q/M`.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingReport {
    pub m: usize,
    pub set_size: usize,
    #[serde(serialize_with = "ser_rational")]
    pub mu: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub nu: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub lower: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub upper: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub slack_lower: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub slack_upper: Rational,
}

pub fn check_sampling_bounds_with(
    coll: &HyperplaneCollection,
    counts: &[u32],
    set: &[usize],
) -> Result<SamplingReport> {
    let mu = mu_measure(&coll.space, set);
    let nu = nu_from_counts(coll, counts, set)?;
    let qm = Rational::new(coll.space.q() as i128, coll.m() as i128);
    let lower = (mu - qm * 4) / 2;
    let upper = mu * 2 + qm * 8;
    let report = SamplingReport {
        m: coll.m(),
        set_size: set.len(),
        mu,
        nu,
        lower,
        upper,
        slack_lower: nu - lower,
        slack_upper: upper - nu,
    };
    if report.slack_lower.is_negative() || report.slack_upper.is_negative() {
        return Err(Error::LemmaViolation(format!(
            "sampling bounds fail: {lower} <= nu={nu} <= {upper} with mu={mu}, M={}",
            coll.m()
        )));
    }
    Ok(report)
}

pub fn check_sampling_bounds(coll: &HyperplaneCollection, set: &[usize]) -> Result<SamplingReport> {
    check_sampling_bounds_with(coll, &coll.all_counts(), set)
}

/// Outcome of `Pr_x[|N(x) - M/q| >= cM/q] <= q/(c^2 M)`.
#[derive(Clone, Debug, Serialize)]
pub struct ChebyshevReport {
    pub m: usize,
    #[serde(serialize_with = "ser_rational")]
    pub c: Rational,
    pub tail_count: usize,
    #[serde(serialize_with = "ser_rational")]
    pub tail: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub bound: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub slack: Rational,
}

pub fn check_chebyshev_with(
    coll: &HyperplaneCollection,
    counts: &[u32],
    c: Rational,
) -> Result<ChebyshevReport> {
    if !c.is_positive() {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    if coll.m() == 0 {
        return Err(Error::Domain("empty collection".into()));
    }
    let q = coll.space.q() as i128;
    let m = coll.m() as i128;
    // |N - M/q| >= cM/q  <=>  |qN - M| >= cM.
    let threshold = c * m;
    let tail_count = counts
        .iter()
        .filter(|&&nx| Rational::from_integer((q * nx as i128 - m).abs()) >= threshold)
        .count();
    let tail = Rational::new(tail_count as i128, coll.space.size() as i128);
    let bound = Rational::from_integer(q) / (c * c * m);
    let report = ChebyshevReport {
        m: coll.m(),
        c,
        tail_count,
        tail,
        bound,
        slack: bound - tail,
    };
    if report.slack.is_negative() {
        return Err(Error::LemmaViolation(format!(
            "Chebyshev tail {tail} exceeds {bound} (c={c}, M={})",
            coll.m()
        )));
    }
    Ok(report)
}

pub fn check_chebyshev(coll: &HyperplaneCollection, c: Rational) -> Result<ChebyshevReport> {
    check_chebyshev_with(coll, &coll.all_counts(), c)
}

/// Two-step sampling: a uniform hyperplane of the collection, then a uniform
/// point on it.
pub fn sample_two_step(coll: &HyperplaneCollection, rng: &mut dyn RngCore) -> usize {
    let i = rng.gen_range(0..coll.m());
    let w = coll.hyperplane(i);
    let z = rng.gen_range(0..coll.space.size() / coll.space.q());
    w.chart(&coll.space).map(&coll.space, z)
}

/// How edges of a [`ConsistencyGraph`] were decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRule {
    /// Local functions agree on the pairwise intersection.
    Restriction,
    /// Edges supplied directly.
    Explicit,
}

/// Undirected graph on `M` vertices as a symmetric bit matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyGraph {
    m: usize,
    words: usize,
    adj: Vec<u64>,
    pub rule: EdgeRule,
}

impl ConsistencyGraph {
    pub fn empty(m: usize) -> Self {
        let words = m.div_ceil(64).max(1);
        ConsistencyGraph {
            m,
            words,
            adj: vec![0; m * words],
            rule: EdgeRule::Explicit,
        }
    }

    pub fn complete(m: usize) -> Self {
        let mut g = Self::empty(m);
        for i in 0..m {
            for j in i + 1..m {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(m);
        for &(i, j) in edges {
            if i >= m || j >= m || i == j {
                return Err(Error::Domain(format!(
                    "bad edge ({i},{j}) for {m} vertices"
                )));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    pub fn vertices(&self) -> usize {
        self.m
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.adj[i * self.words..(i + 1) * self.words]
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.words + j / 64] |= 1 << (j % 64);
        self.adj[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.words + j / 64] &= !(1 << (j % 64));
        self.adj[j * self.words + i / 64] &= !(1 << (i % 64));
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Number of common neighbors of `i` and `j`.
    pub fn common(&self, i: usize, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.m).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in i + 1..self.m {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `|E| / M^2`.
    pub fn density(&self) -> Rational {
        if self.m == 0 {
            return Rational::zero();
        }
        Rational::new(self.edge_count() as i128, (self.m * self.m) as i128)
    }
}

/// Joins `i` and `j` when their local functions agree on `W_i ∩ W_j`.
pub fn build_consistency_graph(coll: &HyperplaneCollection) -> Result<ConsistencyGraph> {
    let locals = coll
        .locals()
        .ok_or_else(|| Error::Domain("collection has no local functions".into()))?;
    let size = coll.space.size();
    // Each local function placed on the ambient space; `None` off the hyperplane.
    let lifted: Vec<Vec<Option<u8>>> = (0..coll.m())
        .map(|i| {
            let mut v = vec![None; size];
            for (z, x) in coll.points(i).into_iter().enumerate() {
                v[x] = locals[i].get(z).value();
            }
            v
        })
        .collect();
    let pts: Vec<Vec<usize>> = (0..coll.m()).map(|i| coll.points(i)).collect();
    let mut g = ConsistencyGraph::empty(coll.m());
    g.rule = EdgeRule::Restriction;
    for i in 0..coll.m() {
        for j in i + 1..coll.m() {
            let agree = pts[i].iter().all(|&x| match lifted[j][x] {
                Some(v) => lifted[i][x] == Some(v),
                None => true,
            });
            if agree {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

/// `max` over non-edges `(i, j)` of `|N(i) ∩ N(j)| / M`; zero without non-edges.
pub fn beta(g: &ConsistencyGraph) -> Rational {
    let mut best = 0usize;
    for i in 0..g.m {
        for j in i + 1..g.m {
            if !g.has_edge(i, j) {
                best = best.max(g.common(i, j));
            }
        }
    }
    if g.m == 0 {
        return Rational::zero();
    }
    Rational::new(best as i128, g.m as i128)
}

/// Vertex-disjoint cliques covering every vertex, plus the edges dropped
/// between them.
#[derive(Clone, Debug, Serialize)]
pub struct CliqueCover {
    pub cliques: Vec<Vec<usize>>,
    pub removed: Vec<(usize, usize)>,
    #[serde(serialize_with = "ser_rational")]
    pub beta: Rational,
    /// `3 sqrt(beta) M^2`.
    pub removal_bound: f64,
    pub within_bound: bool,
}

impl CliqueCover {
    /// The graph formed by clique edges only.
    pub fn retained(&self, m: usize) -> ConsistencyGraph {
        let mut g = ConsistencyGraph::empty(m);
        for c in &self.cliques {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Largest clique; ties go to the smallest minimum vertex.
    pub fn select(&self) -> Option<&[usize]> {
        self.cliques
            .iter()
            .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
            .map(|c| c.as_slice())
    }
}

// c >= (1 - 2 sqrt(beta)) d, decided exactly.
fn meets_threshold(beta: Rational, c: usize, d: usize) -> bool {
    if c >= d {
        return true;
    }
    let gap = (d - c) as i128;
    beta * 4 * (d as i128 * d as i128) >= Rational::from_integer(gap * gap)
}

/// Greedy clique extraction: take the live vertex of highest degree, keep
/// neighbors sharing enough of its neighborhood, prune to a clique, remove it.
pub fn make_transitive(g: &ConsistencyGraph) -> Result<CliqueCover> {
    let m = g.m;
    let b = beta(g);
    let mut alive = vec![true; m];
    let mut live = g.clone();
    let mut cliques = Vec::new();
    while let Some(v) = (0..m)
        .filter(|&i| alive[i])
        .max_by(|&a, &c| live.degree(a).cmp(&live.degree(c)).then(c.cmp(&a)))
    {
        let nv = live.neighbors(v);
        let d = nv.len();
        let mut k: Vec<usize> = vec![v];
        for &u in &nv {
            // Common neighbors within the closed neighborhood of v.
            let shared = live.common(u, v) + 1;
            if meets_threshold(b, shared, d) {
                k.push(u);
            }
        }
        loop {
            let deg: Vec<usize> = k
                .iter()
                .map(|&a| k.iter().filter(|&&c| c != a && live.has_edge(a, c)).count())
                .collect();
            let need = k.len() - 1;
            if deg.iter().all(|&x| x == need) {
                break;
            }
            let worst = (0..k.len())
                .min_by(|&a, &c| deg[a].cmp(&deg[c]).then(k[c].cmp(&k[a])))
                .unwrap();
            k.remove(worst);
        }
        k.sort_unstable();
        for &a in &k {
            alive[a] = false;
            for j in 0..m {
                if live.has_edge(a, j) {
                    live.remove_edge(a, j);
                }
            }
        }
        cliques.push(k);
    }
    let mut owner = vec![usize::MAX; m];
    for (ci, c) in cliques.iter().enumerate() {
        for &v in c {
            if owner[v] != usize::MAX {
                return Err(Error::Integrity(format!("vertex {v} lies in two cliques")));
            }
            owner[v] = ci;
        }
    }
    let removed: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .filter(|&(i, j)| owner[i] != owner[j])
        .collect();
    let removal_bound = 3.0 * rat_f64(b).sqrt() * (m * m) as f64;
    let cover = CliqueCover {
        within_bound: removed.len() as f64 <= removal_bound,
        cliques,
        removed,
        beta: b,
        removal_bound,
    };
    let retained = cover.retained(m);
    if !beta(&retained).is_zero() {
        return Err(Error::Integrity("clique cover is not transitive".into()));
    }
    for c in &cover.cliques {
        for (a, &i) in c.iter().enumerate() {
            if c[a + 1..].iter().any(|&j| !g.has_edge(i, j)) {
                return Err(Error::Integrity(format!(
                    "clique {c:?} is not complete in the input graph"
                )));
            }
        }
    }
    if retained.edge_count() + cover.removed.len() != g.edge_count() {
        return Err(Error::Integrity(
            "clique edges and removed edges do not partition E".into(),
        ));
    }
    Ok(cover)
}

/// `F(x) = f_j(x)` for the smallest clique member `j` with `x ∈ W_j`, else 0.
pub fn extrapolate(coll: &HyperplaneCollection, clique: &[usize]) -> Result<FunctionTable> {
    let locals = coll
        .locals()
        .ok_or_else(|| Error::Domain("collection has no local functions".into()))?;
    let mut members = clique.to_vec();
    members.sort_unstable();
    members.dedup();
    let mut out: Vec<Option<(u8, usize)>> = vec![None; coll.space.size()];
    for &j in &members {
        if j >= coll.m() {
            return Err(Error::Domain(format!(
                "vertex {j} outside a collection of {}",
                coll.m()
            )));
        }
        for (z, x) in coll.points(j).into_iter().enumerate() {
            let v = locals[j].get(z).value().expect("locals carry no erasures");
            match out[x] {
                None => out[x] = Some((v, j)),
                Some((w, i)) if w != v => {
                    return Err(Error::Integrity(format!(
                        "clique members {i} and {j} disagree at point {x}"
                    )))
                }
                Some(_) => {}
            }
        }
    }
    FunctionTable::from_values(
        coll.space.clone(),
        out.into_iter().map(|o| o.map_or(0, |(v, _)| v)).collect(),
    )
}

/// A collection whose local functions come from two codewords `g` and
/// `g' = g + 1`, plus optional random junk codewords, and a noisy `f`
/// close to `g`.
#[derive(Clone, Debug)]
pub struct PlantedAgreement {
    pub collection: HyperplaneCollection,
    /// Vertices whose local function decodes `f|_W` to `g|_W`.
    pub planted: Vec<usize>,
    /// Vertices carrying `g'|_W`.
    pub alternate: Vec<usize>,
    /// Vertices carrying unrelated codewords.
    pub junk: Vec<usize>,
    pub g: FunctionTable,
    pub g_alt: FunctionTable,
    pub f: FunctionTable,
    pub eps: Rational,
}

/// Nearest codeword of `C_{n-1}` to `h`; `hint` is returned without search
/// when it is within half the code distance.
fn decode_local(
    code: &dyn CodeFamily,
    h: &FunctionTable,
    hint: &FunctionTable,
) -> Result<FunctionTable> {
    if code.delta0().exceeds_twice(hamming_distance(h, hint)?) {
        return Ok(hint.clone());
    }
    let mut best: Option<(Rational, FunctionTable)> = None;
    for w in code.codewords(h.n(), ENUMERATION_CAP)? {
        let d = hamming_distance(h, &w)?;
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, w));
        }
    }
    Ok(best.expect("codes are nonempty").1)
}

pub fn plant_agreement(
    code: &dyn CodeFamily,
    n: usize,
    sizes: (usize, usize, usize),
    noise_weight: usize,
    rng: &mut dyn RngCore,
) -> Result<PlantedAgreement> {
    let (planted_n, alt_n, junk_n) = sizes;
    let space = Space::new(code.field().clone(), n)?;
    let coll = HyperplaneCollection::random(space.clone(), planted_n + alt_n + junk_n, rng)?;
    let g = code.random_codeword(n, rng)?;
    let one = FunctionTable::constant(space.clone(), 1)?;
    let g_alt = g.add(&one)?;
    if !code.contains(&g_alt)? {
        return Err(Error::Unsupported(format!(
            "{} does not contain the constants",
            code.name()
        )));
    }
    let size = space.size();
    let support = sample(rng, size, noise_weight).into_vec();
    let mut f = g.clone();
    let field = code.field().clone();
    for &x in &support {
        let off = rng.gen_range(1..field.size()) as u8;
        f.set(x, Symbol::Value(field.add(g.get(x).value().unwrap(), off)));
    }
    let mut roles: Vec<u8> = std::iter::repeat_n(0, planted_n)
        .chain(std::iter::repeat_n(1, alt_n))
        .chain(std::iter::repeat_n(2, junk_n))
        .collect();
    rand::seq::SliceRandom::shuffle(roles.as_mut_slice(), &mut *rng);
    let mut locals = Vec::with_capacity(coll.m());
    let (mut planted, mut alternate, mut junk) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &role) in roles.iter().enumerate() {
        let w = coll.hyperplane(i);
        let local = match role {
            0 => {
                planted.push(i);
                let fw = f.restrict_subspace(&w)?.table;
                let gw = g.restrict_subspace(&w)?.table;
                decode_local(code, &fw, &gw)?
            }
            1 => {
                alternate.push(i);
                g_alt.restrict_subspace(&w)?.table
            }
            _ => {
                junk.push(i);
                code.random_codeword(n - 1, rng)?
            }
        };
        locals.push(local);
    }
    Ok(PlantedAgreement {
        collection: coll.with_locals(locals)?,
        planted,
        alternate,
        junk,
        g,
        g_alt,
        f,
        eps: Rational::new(noise_weight as i128, size as i128),
    })
}

/// A random collection with `M` uniform in `[1, N]` and a test set: either a
/// Bernoulli subset of random density or a union of up to three of the
/// collection's hyperplanes.
pub fn random_instance(
    space: &Space,
    rng: &mut dyn RngCore,
) -> Result<(HyperplaneCollection, Vec<usize>)> {
    let total = normalized_functionals(space).len();
    let m = rng.gen_range(1..=total);
    let coll = HyperplaneCollection::random(space.clone(), m, rng)?;
    let set = if rng.gen_bool(0.5) {
        let p: f64 = rng.gen();
        (0..space.size()).filter(|_| rng.gen_bool(p)).collect()
    } else {
        let picks: Vec<usize> = (0..rng.gen_range(1..=3.min(m)))
            .map(|_| rng.gen_range(0..m))
            .collect();
        (0..space.size())
            .filter(|&x| picks.iter().any(|&i| coll.contains(i, x)))
            .collect()
    };
    Ok((coll, set))
}

/// One run of graph, clique cover and extrapolation on a planted collection.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub q: usize,
    pub n: usize,
    pub m: usize,
    pub planted: usize,
    #[serde(serialize_with = "ser_rational")]
    pub eps: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub density: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub beta: Rational,
    pub cliques: usize,
    pub removed: usize,
    pub removal_bound: f64,
    pub selected: usize,
    pub selected_is_planted: bool,
    #[serde(serialize_with = "ser_rational")]
    pub distance: Rational,
    /// Whether the extrapolated function is a codeword (reported only).
    pub extrapolation_in_code: bool,
    /// `dist(F, f) <= 3 eps`.
    pub pass: bool,
}

/// Plants a collection whose planted part covers every point (more than
/// `q^{n-1}` hyperplanes), then runs the full pipeline.
pub fn agreement_pipeline(
    code: &dyn CodeFamily,
    n: usize,
    noise_weight: usize,
    rng: &mut dyn RngCore,
) -> Result<PipelineReport> {
    let space = Space::new(code.field().clone(), n)?;
    let q = space.q();
    let total = normalized_functionals(&space).len();
    let cover = space.size() / q + 1;
    if cover > total {
        return Err(Error::Domain(format!(
            "n={n} too small to plant a covering clique"
        )));
    }
    let eps = Rational::new(noise_weight as i128, space.size() as i128);
    if !code.delta0().exceeds_scaled(6, eps) {
        return Err(Error::Domain(format!("eps={eps} is not below delta0/6")));
    }
    let planted_n = rng.gen_range(cover..=(cover + (total - cover) / 2));
    let rest = total - planted_n;
    let junk_n = rng.gen_range(0..=rest / 3);
    let alt_n = rng.gen_range(0..=rest - junk_n);
    let p = plant_agreement(code, n, (planted_n, alt_n, junk_n), noise_weight, rng)?;
    let graph = build_consistency_graph(&p.collection)?;
    let cover = make_transitive(&graph)?;
    let selected = cover.select().unwrap_or(&[]).to_vec();
    let big_f = extrapolate(&p.collection, &selected)?;
    let distance = hamming_distance(&big_f, &p.f)?;
    Ok(PipelineReport {
        q,
        n,
        m: p.collection.m(),
        planted: p.planted.len(),
        eps: p.eps,
        density: graph.density(),
        beta: cover.beta,
        cliques: cover.cliques.len(),
        removed: cover.removed.len(),
        removal_bound: cover.removal_bound,
        selected: selected.len(),
        selected_is_planted: selected == p.planted,
        distance,
        extrapolation_in_code: code.contains(&big_f)?,
        pass: distance <= p.eps * 3,
    })
}

/// Both sides of `Pr[T_k^f rejects] = E_W[Pr[T_k^{f|W} rejects]]`.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub direct: RateEstimate,
    pub two_stage: RateEstimate,
    /// Whether the hyperplane stage cycled through every hyperplane equally.
    pub stratified: bool,
    pub z: f64,
    pub agree: bool,
}

/// Compares direct runs of a semi-sample tester with runs on the restriction
/// to a uniform hyperplane. With `k = n - 1` the hyperplanes are cycled
/// through exhaustively and the trial count is rounded up to a multiple of N.
pub fn hyperplane_decomposition_check(
    f: &FunctionTable,
    tester: &Tester,
    trials: u64,
    seed: u64,
    sigma: f64,
) -> Result<DecompositionReport> {
    if tester.kind != TesterKind::SemiSample {
        return Err(Error::Unsupported(format!(
            "decomposition needs a semi-sample tester, got {}",
            tester.kind
        )));
    }
    let n = f.n();
    if tester.k >= n {
        return Err(Error::Domain(format!(
            "need n > k, got n={n}, k={}",
            tester.k
        )));
    }
    tester.validate(n)?;
    let all = HyperplaneCollection::all(f.space().clone());
    let stratified = tester.k + 1 == n;
    let hyper = all.m() as u64;
    let two_trials = if stratified {
        trials.div_ceil(hyper) * hyper
    } else {
        trials
    };
    let direct = count_trials(trials, |t| {
        tester
            .test_table(f, &mut trial_rng(seed, t))
            .map(|v| v.rejected())
    })?;
    let salt = seed ^ 0x5bd1_e995_0000_0001;
    let two = count_trials(two_trials, |t| {
        let mut rng = trial_rng(salt, t);
        let i = if stratified {
            (t % hyper) as usize
        } else {
            rng.gen_range(0..all.m())
        };
        let fw = f.restrict_subspace(&all.hyperplane(i))?.table;
        tester.test_table(&fw, &mut rng).map(|v| v.rejected())
    })?;
    let direct = RateEstimate::new(direct, trials, sigma);
    let two_stage = RateEstimate::new(two, two_trials, sigma);
    let pooled = (direct.hits + two_stage.hits) as f64 / (trials + two_trials) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / trials as f64 + 1.0 / two_trials as f64)).sqrt();
    let diff = (direct.rate - two_stage.rate).abs();
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DecompositionReport {
        direct,
        two_stage,
        stratified,
        z,
        agree: z <= sigma,
    })
}
