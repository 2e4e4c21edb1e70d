//! The online manipulation protocol: oracle sessions, accounting, built-in
//! strategies and the tester-versus-adversary game runner.
//!
//! `O_1` is the input itself. After the i-th answer the adversary may change
//! up to its allowance of points, producing `O_{i+1}`. Repeat queries return
//! the first answer given for that point.

use std::fmt;
use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::functab::{FunctionTable, Symbol};
use crate::par::{map_trials, trial_rng};
use crate::space::Space;
use crate::stats::RateEstimate;
use crate::testers::{Oracle, Tester, TesterKind, Verdict};

/// Mixed into the game seed so the adversary never shares the tester's stream.
const ADVERSARY_SALT: u64 = 0x6164_7665_7273_6172;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Erasure,
    Corruption,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erasure" | "erase" => Ok(Mode::Erasure),
            "corruption" | "corrupt" => Ok(Mode::Corruption),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// How manipulations are metered, with an exact rational rate `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accounting {
    FixedRate(Rational),
    Budget(Rational),
}

impl Accounting {
    pub fn rate(&self) -> Rational {
        match *self {
            Accounting::FixedRate(t) | Accounting::Budget(t) => t,
        }
    }

    /// `floor(t * j)`.
    fn floor_at(&self, j: u64) -> u64 {
        let t = self.rate();
        (t.numer() * j as i128).div_euclid(*t.denom()) as u64
    }

    /// Manipulations allowed right after answer `i` (1-based), given `spent` so far.
    pub fn allowance(&self, i: u64, spent: u64) -> u64 {
        match self {
            Accounting::FixedRate(_) => self.floor_at(i + 1) - self.floor_at(i),
            Accounting::Budget(_) => self.floor_at(i).saturating_sub(spent),
        }
    }

    /// Largest total spend allowed once `i` answers were given.
    pub fn cumulative_cap(&self, i: u64) -> u64 {
        match self {
            Accounting::FixedRate(_) => self.floor_at(i + 1) - self.floor_at(1),
            Accounting::Budget(_) => self.floor_at(i),
        }
    }
}

impl fmt::Display for Accounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Accounting::FixedRate(t) => write!(f, "fixed:{t}"),
            Accounting::Budget(t) => write!(f, "budget:{t}"),
        }
    }
}

impl FromStr for Accounting {
    type Err = Error;
    /// `fixed:<t>` or `budget:<t>`, with `t` an integer or `a/b`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, t) = s.split_once(':').unwrap_or(("fixed", s));
        let t = parse_rational(t)?;
        match kind {
            "fixed" => Ok(Accounting::FixedRate(t)),
            "budget" => Ok(Accounting::Budget(t)),
            _ => Err(Error::Config(format!("unknown accounting {kind:?}"))),
        }
    }
}

impl Serialize for Accounting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Accounting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `a`, `a/b` into a non-negative rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::Config(format!("bad rational {s:?}"));
    let (a, b) = match s.trim().split_once('/') {
        Some((a, b)) => (
            a.trim().parse::<i128>().map_err(|_| bad())?,
            b.trim().parse::<i128>().map_err(|_| bad())?,
        ),
        None => (s.trim().parse::<i128>().map_err(|_| bad())?, 1),
    };
    if b <= 0 || a < 0 {
        return Err(bad());
    }
    Ok(Rational::new(a, b))
}

/// One manipulation: the new symbol at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub point: usize,
    pub value: Symbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    /// Number of answers given before the move.
    pub after: u64,
    pub point: usize,
    pub value: Symbol,
}

/// What a strategy sees after each answer: the queries and answers so far and
/// the oracle's current state, never the tester's randomness.
pub struct View<'a> {
    pub space: &'a Space,
    pub mode: Mode,
    pub step: u64,
    pub allowance: u64,
    pub query: usize,
    pub answer: Symbol,
    truth: &'a FunctionTable,
    overlay: &'a FxHashMap<usize, Symbol>,
    memo: &'a FxHashMap<usize, Symbol>,
    touched: usize,
}

impl View<'_> {
    pub fn is_queried(&self, x: usize) -> bool {
        self.memo.contains_key(&x)
    }
    pub fn is_manipulated(&self, x: usize) -> bool {
        self.overlay.contains_key(&x)
    }
    /// Free to manipulate: unqueried and untouched.
    pub fn is_fresh(&self, x: usize) -> bool {
        !self.is_queried(x) && !self.is_manipulated(x)
    }
    pub fn current(&self, x: usize) -> Symbol {
        self.overlay
            .get(&x)
            .copied()
            .unwrap_or_else(|| self.truth.get(x))
    }
    pub fn manipulated(&self) -> usize {
        self.overlay.len()
    }
    /// Number of fresh points.
    pub fn fresh_count(&self) -> usize {
        self.space.size() - self.touched
    }
}

/// An adversary. Called after every answer, including those with zero allowance.
pub trait Strategy: Send {
    fn name(&self) -> &'static str;
    fn respond(&mut self, view: &View, rng: &mut dyn RngCore) -> Vec<Move>;
}

/// Never manipulates.
pub struct NoneAdv;

impl Strategy for NoneAdv {
    fn name(&self) -> &'static str {
        "none_adv"
    }
    fn respond(&mut self, _: &View, _: &mut dyn RngCore) -> Vec<Move> {
        Vec::new()
    }
}

/// Draws up to `count` distinct fresh points uniformly.
fn random_fresh(view: &View, count: u64, rng: &mut dyn RngCore) -> Vec<usize> {
    let size = view.space.size();
    let count = count.min(view.fresh_count() as u64);
    let mut out: Vec<usize> = Vec::new();
    if count == 0 {
        return out;
    }
    let mut tries = 0;
    while (out.len() as u64) < count && tries < 64 * count.max(1) {
        tries += 1;
        let x = rng.gen_range(0..size);
        if view.is_fresh(x) && !out.contains(&x) {
            out.push(x);
        }
    }
    if (out.len() as u64) < count {
        // Nearly exhausted space: fall back to a scan from a random offset.
        let start = rng.gen_range(0..size);
        for off in 0..size {
            let x = (start + off) % size;
            if (out.len() as u64) >= count {
                break;
            }
            if view.is_fresh(x) && !out.contains(&x) {
                out.push(x);
            }
        }
    }
    out
}

/// Erases uniformly random unqueried points.
pub struct RandomEraser;

impl Strategy for RandomEraser {
    fn name(&self) -> &'static str {
        "random_eraser"
    }
    fn respond(&mut self, view: &View, rng: &mut dyn RngCore) -> Vec<Move> {
        random_fresh(view, view.allowance, rng)
            .into_iter()
            .map(|point| Move {
                point,
                value: Symbol::Erased,
            })
            .collect()
    }
}

/// Erases `a x + b y` over pairs of observed points, most recent pair first.
#[derive(Default)]
pub struct SumEraser {
    seen: Vec<usize>,
    seen_set: FxHashSet<usize>,
    /// Candidate stack; the top holds the most recent pair's combinations.
    stack: Vec<usize>,
}

impl Strategy for SumEraser {
    fn name(&self) -> &'static str {
        "sum_eraser"
    }
    fn respond(&mut self, view: &View, _: &mut dyn RngCore) -> Vec<Move> {
        let sp = view.space;
        let q = sp.q();
        let y = view.query;
        if self.seen_set.insert(y) {
            for &x in &self.seen {
                // Pushed in reverse so that a = b = 1 pops first.
                for a in (1..q).rev() {
                    for b in (1..q).rev() {
                        self.stack
                            .push(sp.add(sp.scale(a as u8, x), sp.scale(b as u8, y)));
                    }
                }
            }
            self.seen.push(y);
        }
        let mut out = Vec::new();
        while (out.len() as u64) < view.allowance {
            let Some(p) = self.stack.pop() else { break };
            if view.is_fresh(p) && !out.iter().any(|m: &Move| m.point == p) {
                out.push(Move {
                    point: p,
                    value: Symbol::Erased,
                });
            }
        }
        out
    }
}

/// Erases unqueried points in the linear span of the observed queries.
#[derive(Default)]
pub struct SpanInferenceEraser {
    /// Echelon basis of the span, as coordinate vectors.
    rows: Vec<Vec<u8>>,
    pivots: Vec<usize>,
}

impl SpanInferenceEraser {
    fn absorb(&mut self, space: &Space, x: usize) {
        let f = space.field();
        let mut v = space.coords(x);
        for (r, &p) in self.rows.iter().zip(&self.pivots) {
            let c = v[p];
            if c != 0 {
                let nc = f.neg(c);
                for (a, &b) in v.iter_mut().zip(r) {
                    *a = f.add(*a, f.mul(nc, b));
                }
            }
        }
        if let Some(p) = v.iter().position(|&c| c != 0) {
            let inv = f.inv_nonzero(v[p]);
            v.iter_mut().for_each(|a| *a = f.mul(*a, inv));
            self.rows.push(v);
            self.pivots.push(p);
        }
    }

    fn combine(&self, space: &Space, coeffs: &[u8]) -> usize {
        let f = space.field();
        let mut v = vec![0u8; space.n()];
        for (r, &c) in self.rows.iter().zip(coeffs) {
            if c != 0 {
                for (a, &b) in v.iter_mut().zip(r) {
                    *a = f.add(*a, f.mul(c, b));
                }
            }
        }
        space.index(&v)
    }
}

impl Strategy for SpanInferenceEraser {
    fn name(&self) -> &'static str {
        "span_inference_eraser"
    }
    fn respond(&mut self, view: &View, rng: &mut dyn RngCore) -> Vec<Move> {
        let sp = view.space;
        self.absorb(sp, view.query);
        let q = sp.q();
        let r = self.rows.len();
        let mut out: Vec<usize> = Vec::new();
        let mut tries = 0u64;
        while (out.len() as u64) < view.allowance && tries < 64 * view.allowance {
            tries += 1;
            let c: Vec<u8> = (0..r).map(|_| rng.gen_range(0..q) as u8).collect();
            let p = self.combine(sp, &c);
            if view.is_fresh(p) && !out.contains(&p) {
                out.push(p);
            }
        }
        if (out.len() as u64) < view.allowance && (r as u32) < 20 {
            // Scan the whole span once random draws stop finding fresh points.
            let total = q.pow(r as u32);
            let mut c = vec![0u8; r];
            for mut z in 0..total {
                if (out.len() as u64) >= view.allowance {
                    break;
                }
                for ci in c.iter_mut() {
                    *ci = (z % q) as u8;
                    z /= q;
                }
                let p = self.combine(sp, &c);
                if view.is_fresh(p) && !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out.into_iter()
            .map(|point| Move {
                point,
                value: Symbol::Erased,
            })
            .collect()
    }
}

/// Adds uniform nonzero offsets at uniformly random unqueried points.
pub struct RandomCorruptor;

impl Strategy for RandomCorruptor {
    fn name(&self) -> &'static str {
        "random_corruptor"
    }
    fn respond(&mut self, view: &View, rng: &mut dyn RngCore) -> Vec<Move> {
        let f = view.space.field();
        let q = view.space.q();
        random_fresh(view, view.allowance, rng)
            .into_iter()
            .map(|point| {
                let cur = view.current(point).value().unwrap_or(0);
                let off = rng.gen_range(1..q) as u8;
                Move {
                    point,
                    value: Symbol::Value(f.add(cur, off)),
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NoneAdv,
    RandomEraser,
    SumEraser,
    SpanInferenceEraser,
    RandomCorruptor,
}

impl StrategyKind {
    pub const ERASERS: [StrategyKind; 4] = [
        StrategyKind::NoneAdv,
        StrategyKind::RandomEraser,
        StrategyKind::SumEraser,
        StrategyKind::SpanInferenceEraser,
    ];

    pub fn make(self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::NoneAdv => Box::new(NoneAdv),
            StrategyKind::RandomEraser => Box::new(RandomEraser),
            StrategyKind::SumEraser => Box::<SumEraser>::default(),
            StrategyKind::SpanInferenceEraser => Box::<SpanInferenceEraser>::default(),
            StrategyKind::RandomCorruptor => Box::new(RandomCorruptor),
        }
    }

    pub fn name(self) -> &'static str {
        self.make().name()
    }

    /// Whether the strategy can run in `mode`.
    pub fn supports(self, mode: Mode) -> bool {
        match self {
            StrategyKind::NoneAdv => true,
            StrategyKind::RandomCorruptor => mode == Mode::Corruption,
            _ => mode == Mode::Erasure,
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "none_adv" => Ok(StrategyKind::NoneAdv),
            "random_eraser" => Ok(StrategyKind::RandomEraser),
            "sum_eraser" => Ok(StrategyKind::SumEraser),
            "span_inference_eraser" | "span_eraser" => Ok(StrategyKind::SpanInferenceEraser),
            "random_corruptor" => Ok(StrategyKind::RandomCorruptor),
            _ => Err(Error::Config(format!("unknown adversary {s:?}"))),
        }
    }
}

/// The adversary side of a game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub strategy: StrategyKind,
    pub mode: Mode,
    pub accounting: Accounting,
}

impl AdversarySpec {
    pub fn new(strategy: StrategyKind, mode: Mode, accounting: Accounting) -> Result<Self> {
        if !strategy.supports(mode) {
            return Err(Error::Config(format!(
                "{} cannot run in {mode:?} mode",
                strategy.name()
            )));
        }
        Ok(AdversarySpec {
            strategy,
            mode,
            accounting,
        })
    }

    pub fn erasure(strategy: StrategyKind, t: Rational) -> Result<Self> {
        Self::new(strategy, Mode::Erasure, Accounting::FixedRate(t))
    }
}

/// The oracle sequence `O_1, O_2, ...` seen by one tester run.
pub struct OracleSession<'a> {
    truth: &'a FunctionTable,
    overlay: FxHashMap<usize, Symbol>,
    memo: FxHashMap<usize, Symbol>,
    /// Size of the union of queried and manipulated points.
    touched: usize,
    trace: Vec<(usize, Symbol)>,
    timeline: Vec<MoveRecord>,
    answers: u64,
    spent: u64,
    mode: Mode,
    accounting: Accounting,
    strategy: Box<dyn Strategy>,
    rng: ChaCha8Rng,
    keep_trace: bool,
    forfeit: Option<String>,
}

impl<'a> OracleSession<'a> {
    pub fn new(truth: &'a FunctionTable, spec: &AdversarySpec, rng: ChaCha8Rng) -> Result<Self> {
        if truth.has_erasures() {
            return Err(Error::Domain("O_1 must be erasure-free".into()));
        }
        if !spec.strategy.supports(spec.mode) {
            return Err(Error::Config(format!(
                "{} cannot run in {:?} mode",
                spec.strategy.name(),
                spec.mode
            )));
        }
        Ok(OracleSession {
            truth,
            overlay: FxHashMap::default(),
            memo: FxHashMap::default(),
            touched: 0,
            trace: Vec::new(),
            timeline: Vec::new(),
            answers: 0,
            spent: 0,
            mode: spec.mode,
            accounting: spec.accounting,
            strategy: spec.strategy.make(),
            rng,
            keep_trace: true,
            forfeit: None,
        })
    }

    /// Session with a custom strategy object.
    pub fn with_strategy(
        truth: &'a FunctionTable,
        strategy: Box<dyn Strategy>,
        mode: Mode,
        accounting: Accounting,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut s = Self::new(
            truth,
            &AdversarySpec {
                strategy: StrategyKind::NoneAdv,
                mode,
                accounting,
            },
            rng,
        )?;
        s.strategy = strategy;
        Ok(s)
    }

    pub fn keep_trace(mut self, keep: bool) -> Self {
        self.keep_trace = keep;
        self
    }

    pub fn trace(&self) -> &[(usize, Symbol)] {
        &self.trace
    }
    pub fn timeline(&self) -> &[MoveRecord] {
        &self.timeline
    }
    pub fn answers(&self) -> u64 {
        self.answers
    }
    pub fn spent(&self) -> u64 {
        self.spent
    }
    pub fn forfeit(&self) -> Option<&str> {
        self.forfeit.as_deref()
    }

    /// `Dist(O_1, O_current)` in points.
    pub fn distance(&self) -> usize {
        self.overlay
            .iter()
            .filter(|(&x, &s)| s != self.truth.get(x))
            .count()
    }

    /// The current oracle as a table.
    pub fn snapshot(&self) -> FunctionTable {
        let mut t = self.truth.clone();
        for (&x, &s) in &self.overlay {
            t.set(x, s);
        }
        t
    }

    pub fn allowance(&self, i: u64) -> u64 {
        self.accounting.allowance(i, self.spent)
    }

    fn violation(&mut self, msg: String) -> Error {
        self.forfeit = Some(msg.clone());
        Error::Protocol(format!("{} forfeits: {msg}", self.strategy.name()))
    }

    fn adversary_turn(&mut self, x: usize, answer: Symbol) -> Result<()> {
        let allowance = self.allowance(self.answers);
        let view = View {
            space: self.truth.space(),
            mode: self.mode,
            step: self.answers,
            allowance,
            query: x,
            answer,
            truth: self.truth,
            overlay: &self.overlay,
            memo: &self.memo,
            touched: self.touched,
        };
        let moves = self.strategy.respond(&view, &mut self.rng);
        if moves.len() as u64 > allowance {
            return Err(self.violation(format!("{} moves with allowance {allowance}", moves.len())));
        }
        let size = self.truth.len();
        let q = self.truth.space().q();
        let mut batch = FxHashSet::default();
        for m in &moves {
            if m.point >= size || !batch.insert(m.point) {
                return Err(self.violation(format!("illegal target {}", m.point)));
            }
            if self.overlay.contains_key(&m.point) {
                return Err(self.violation(format!("point {} manipulated twice", m.point)));
            }
            if self.memo.contains_key(&m.point) {
                return Err(self.violation(format!("point {} was already queried", m.point)));
            }
            match (self.mode, m.value) {
                (Mode::Erasure, Symbol::Erased) => {}
                (Mode::Corruption, Symbol::Value(v))
                    if (v as usize) < q && Symbol::Value(v) != self.truth.get(m.point) => {}
                _ => {
                    return Err(self.violation(format!(
                        "illegal value {} at {} in {:?} mode",
                        m.value, m.point, self.mode
                    )))
                }
            }
        }
        for m in moves {
            self.touched += 1;
            self.overlay.insert(m.point, m.value);
            self.spent += 1;
            if self.keep_trace {
                self.timeline.push(MoveRecord {
                    after: self.answers,
                    point: m.point,
                    value: m.value,
                });
            }
        }
        let cap = self.accounting.cumulative_cap(self.answers);
        // Every accepted move changes a fresh point, so the overlay size is the distance.
        if self.spent > cap || self.overlay.len() as u64 != self.spent {
            return Err(
                self.violation(format!("spent {} exceeds cumulative cap {cap}", self.spent))
            );
        }
        Ok(())
    }
}

impl Oracle for OracleSession<'_> {
    fn space(&self) -> &Space {
        self.truth.space()
    }

    fn query(&mut self, x: usize) -> Result<Symbol> {
        if let Some(msg) = &self.forfeit {
            return Err(Error::Protocol(msg.clone()));
        }
        if x >= self.truth.len() {
            return Err(Error::Domain(format!(
                "query {x} outside a table of size {}",
                self.truth.len()
            )));
        }
        let answer = match self.memo.get(&x) {
            Some(&s) => s,
            None => {
                let s = match self.overlay.get(&x) {
                    Some(&s) => s,
                    None => {
                        self.touched += 1;
                        self.truth.get(x)
                    }
                };
                self.memo.insert(x, s);
                s
            }
        };
        self.answers += 1;
        if self.keep_trace {
            self.trace.push((x, answer));
        }
        self.adversary_turn(x, answer)?;
        Ok(answer)
    }
}

/// Runs a tester through a session; an erased answer ends the run with ACCEPT.
pub fn online_wrapper(
    tester: &Tester,
    session: &mut OracleSession,
    rng: &mut dyn RngCore,
) -> Result<Verdict> {
    tester.run(session, rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Verdict(Verdict),
    Forfeit(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TesterSummary {
    pub kind: TesterKind,
    pub code: String,
    pub k: usize,
    pub queries: usize,
    pub reps: usize,
}

impl From<&Tester> for TesterSummary {
    fn from(t: &Tester) -> Self {
        TesterSummary {
            kind: t.kind,
            code: t.code.name(),
            k: t.k,
            queries: t.queries,
            reps: t.reps,
        }
    }
}

/// One game, replayable from `(seed, trial)` and the specs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub tester: TesterSummary,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub trial: u64,
    pub outcome: Outcome,
    pub hit: bool,
    pub trace: Vec<(usize, Symbol)>,
    pub timeline: Vec<MoveRecord>,
}

impl GameRecord {
    pub fn verdict(&self) -> Option<&Verdict> {
        match &self.outcome {
            Outcome::Verdict(v) => Some(v),
            Outcome::Forfeit(_) => None,
        }
    }
    pub fn rejected(&self) -> bool {
        self.verdict().is_some_and(|v| v.rejected())
    }
    pub fn accepted(&self) -> bool {
        self.verdict().is_some_and(|v| v.accepted())
    }
}

fn game_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (
        trial_rng(seed, trial),
        trial_rng(seed ^ ADVERSARY_SALT, trial),
    )
}

/// Plays one game. Protocol violations are recorded as forfeits.
pub fn run_game(
    f: &FunctionTable,
    tester: &Tester,
    adversary: &AdversarySpec,
    seed: u64,
    trial: u64,
    keep_trace: bool,
) -> Result<GameRecord> {
    let (mut trng, arng) = game_rngs(seed, trial);
    let mut session = OracleSession::new(f, adversary, arng)?.keep_trace(keep_trace);
    let outcome = match online_wrapper(tester, &mut session, &mut trng) {
        Ok(v) => Outcome::Verdict(v),
        Err(Error::Protocol(m)) => Outcome::Forfeit(m),
        Err(e) => return Err(e),
    };
    let hit = session.trace.iter().any(|(_, s)| s.is_erased())
        || matches!(&outcome, Outcome::Verdict(v) if v.erasure_seen());
    Ok(GameRecord {
        tester: tester.into(),
        adversary: *adversary,
        seed,
        trial,
        outcome,
        hit,
        trace: std::mem::take(&mut session.trace),
        timeline: std::mem::take(&mut session.timeline),
    })
}

/// Plays `trials` independent games in trial order.
pub fn play_games(
    f: &FunctionTable,
    tester: &Tester,
    adversary: &AdversarySpec,
    trials: u64,
    seed: u64,
    keep_trace: bool,
) -> Result<Vec<GameRecord>> {
    map_trials(trials, |i| {
        run_game(f, tester, adversary, seed, i, keep_trace)
    })
    .into_iter()
    .collect()
}

/// Aggregate over a batch of games.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArenaSummary {
    pub games: u64,
    pub accepts: u64,
    pub rejects: u64,
    pub erasure_seen: u64,
    pub forfeits: u64,
}

pub fn summarize(records: &[GameRecord]) -> ArenaSummary {
    let mut s = ArenaSummary {
        games: records.len() as u64,
        accepts: 0,
        rejects: 0,
        erasure_seen: 0,
        forfeits: 0,
    };
    for r in records {
        match &r.outcome {
            Outcome::Verdict(v) => {
                s.accepts += v.accepted() as u64;
                s.rejects += v.rejected() as u64;
                s.erasure_seen += v.erasure_seen() as u64;
            }
            Outcome::Forfeit(_) => s.forfeits += 1,
        }
    }
    s
}

/// Empirical erasure-hit rate against the union bound `t * Q_total^2 / q^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitReport {
    pub estimate: RateEstimate,
    pub bound: f64,
    pub bound_num: i128,
    pub bound_den: i128,
    pub vacuous: bool,
    pub within: bool,
}

/// `t * Q^2 / q^k` as an exact rational.
pub fn hit_bound(t: Rational, total_queries: usize, q: usize, k: usize) -> Rational {
    let qq = total_queries as i128;
    t * Rational::new(qq * qq, (q as i128).pow(k as u32))
}

pub fn erasure_hit_rate(
    f: &FunctionTable,
    tester: &Tester,
    adversary: &AdversarySpec,
    trials: u64,
    seed: u64,
    sigma: f64,
) -> Result<HitReport> {
    if adversary.mode != Mode::Erasure {
        return Err(Error::Config(
            "hit rates are defined for erasure mode".into(),
        ));
    }
    let records = play_games(f, tester, adversary, trials, seed, false)?;
    let hits = records.iter().filter(|r| r.hit).count() as u64;
    let k = match tester.kind {
        TesterKind::SemiSample | TesterKind::Flat => tester.k,
        _ => f.n(),
    };
    let b = hit_bound(
        adversary.accounting.rate(),
        tester.total_queries(),
        f.space().q(),
        k,
    );
    let bound = crate::exact::rat_f64(b);
    let estimate = RateEstimate::new(hits, trials, sigma);
    Ok(HitReport {
        estimate,
        bound,
        bound_num: *b.numer(),
        bound_den: *b.denom(),
        vacuous: b >= Rational::from_integer(1),
        within: estimate.within(bound),
    })
}
