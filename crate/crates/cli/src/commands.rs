//! Subcommand implementations. Every artifact starts with a [`Meta`] record.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use rmtest::adversary::{
    parse_rational, play_games, run_game, summarize, Accounting, AdversarySpec, Mode, Outcome,
    StrategyKind,
};
use rmtest::agreement::{
    agreement_pipeline, check_chebyshev_with, check_sampling_bounds_with, random_instance,
    PipelineReport,
};
use rmtest::bounds::{k_adv_size, query_lower_bound, rank_witness, BoundReport, KAdv, RankReport};
use rmtest::exact::Rational;
use rmtest::functab::{plant, FunctionTable};
use rmtest::gf::{parse_coeffs, Field, FieldRef};
use rmtest::par::trial_rng;
use rmtest::rm::{q_k_parameter, testing_dim, CodeFamily, LiftedCode, ReedMuller};
use rmtest::space::Space;
use rmtest::stats::RateEstimate;
use rmtest::testers::{soundness_cell, Tester, TesterKind, Verdict};
use rmtest::{Error, Result};

use crate::{
    AdversaryArgs, AgreementArgs, BoundsArgs, Cli, CodeArgs, Command, Common, GameArgs, SweepArgs,
    TestArgs, EXIT_LEMMA, EXIT_OK, EXIT_PROTOCOL,
};

pub fn version_string() -> String {
    match option_env!("RMTEST_GIT_DESCRIBE") {
        Some(d) => format!("{}-{d}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: String,
    seed: u64,
    config: &'a Command,
}

fn meta<'a>(cli: &'a Cli, common: &Common) -> Meta<'a> {
    Meta {
        tool: "rmtest",
        version: version_string(),
        seed: common.seed,
        config: &cli.command,
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("reports serialize")
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = out {
        fs::write(p, text)?;
    }
    stdout(text);
    Ok(())
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Test(a) => cmd_test(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Game(a) => cmd_game(cli, a),
        Command::Arena(a) => cmd_arena(cli, a),
        Command::Agreement(a) => cmd_agreement(cli, a),
        Command::Bounds(a) => cmd_bounds(cli, a),
    }
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn rationals(s: &str) -> Result<Vec<Rational>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_rational)
        .collect()
}

fn build_field(q: u32, modulus: Option<&str>) -> Result<FieldRef> {
    match modulus {
        Some(m) => Field::with_modulus(q, &parse_coeffs(m)?),
        None => Field::new(q),
    }
}

fn build_code(c: &CodeArgs, n: usize) -> Result<Arc<dyn CodeFamily>> {
    let field = build_field(c.q, c.modulus.as_deref())?;
    match c.code.as_str() {
        "rm" => Ok(Arc::new(ReedMuller::new(field, c.d))),
        "lifted" => {
            let dir = c
                .lifted_base
                .as_ref()
                .ok_or_else(|| Error::Config("--code lifted needs --lifted-base".into()))?;
            let code = LiftedCode::load(dir, n)?;
            if code.field().q() != field.q() {
                return Err(Error::Config(format!(
                    "lifted base is over F_{}, not F_{}",
                    code.field().q(),
                    field.q()
                )));
            }
            Ok(Arc::new(code))
        }
        other => Err(Error::Config(format!(
            "unknown code {other:?}; expected rm or lifted"
        ))),
    }
}

fn default_k(code: &dyn CodeFamily, c: &CodeArgs) -> usize {
    c.k.unwrap_or_else(|| match c.code.as_str() {
        "rm" => testing_dim(code.field(), c.d),
        _ => code.base_dim(),
    })
}

fn build_tester(
    code: Arc<dyn CodeFamily>,
    n: usize,
    c: &CodeArgs,
    k: usize,
    queries: Option<usize>,
) -> Result<Tester> {
    let kind: TesterKind = c.tester.parse()?;
    let qk = |dim: usize| -> Result<usize> {
        match queries.or(c.queries) {
            Some(x) => Ok(x),
            None => Ok(q_k_parameter(code.as_ref(), dim)? as usize),
        }
    };
    let mut t = match kind {
        TesterKind::SemiSample => Tester::semi_sample(code.clone(), k, qk(k)?),
        TesterKind::Sample => Tester::sample(code.clone(), qk(n)?),
        TesterKind::Flat => Tester::flat(code.clone(), k),
        TesterKind::Blr => Tester::blr(code.clone()),
    };
    if let Some(r) = c.reps {
        t = t.with_reps(r);
    } else if let Some(e) = &c.eps {
        t = t.repeated_for(parse_rational(e)?)?;
    }
    t.validate(n)?;
    Ok(t)
}

fn build_adversary(a: &AdversaryArgs) -> Result<Option<AdversarySpec>> {
    let Some(name) = &a.adversary else {
        return Ok(None);
    };
    let strategy: StrategyKind = name.parse()?;
    let mode: Mode = a.mode.parse()?;
    let accounting: Accounting = a.accounting.parse()?;
    AdversarySpec::new(strategy, mode, accounting).map(Some)
}

#[derive(Serialize)]
struct TestRecord<'a> {
    meta: Meta<'a>,
    verdict: Option<&'a Verdict>,
    forfeit: Option<&'a str>,
    hit: bool,
}

fn cmd_test(cli: &Cli, a: &TestArgs) -> Result<i32> {
    let f = FunctionTable::read(&a.input)?;
    let code = build_code(&a.code, f.n())?;
    let k = default_k(code.as_ref(), &a.code);
    let tester = build_tester(code, f.n(), &a.code, k, None)?;
    let (verdict, forfeit, hit) = match build_adversary(&a.adversary)? {
        None => (
            Some(tester.test_table(&f, &mut trial_rng(a.common.seed, 0))?),
            None,
            false,
        ),
        Some(spec) => {
            let r = run_game(&f, &tester, &spec, a.common.seed, 0, false)?;
            match r.outcome {
                Outcome::Verdict(v) => (Some(v), None, r.hit),
                Outcome::Forfeit(m) => (None, Some(m), r.hit),
            }
        }
    };
    let rec = TestRecord {
        meta: meta(cli, &a.common),
        verdict: verdict.as_ref(),
        forfeit: forfeit.as_deref(),
        hit,
    };
    emit(a.common.out.as_deref(), &(json_pretty(&rec) + "\n"))?;
    Ok(if forfeit.is_some() {
        EXIT_PROTOCOL
    } else {
        EXIT_OK
    })
}

#[derive(Serialize)]
struct SweepRow {
    q: u32,
    n: usize,
    d: usize,
    k: usize,
    #[serde(rename = "Q")]
    queries: usize,
    eps_num: i128,
    eps_den: i128,
    trials: u64,
    rejects: u64,
    rate: f64,
    bound: f64,
    pass: bool,
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<i32> {
    let start = Instant::now();
    let code = build_code(&a.code, a.n)?;
    let ks = match list::<usize>(&a.ks, "k")? {
        v if v.is_empty() => vec![default_k(code.as_ref(), &a.code)],
        v => v,
    };
    let qs: Vec<Option<usize>> = match list::<usize>(&a.query_list, "Q")? {
        v if v.is_empty() => vec![None],
        v => v.into_iter().map(Some).collect(),
    };
    let weights = list::<usize>(&a.weights, "weight")?;
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    let size = Space::new(code.field().clone(), a.n)?.size();
    let mut cell = 0u64;
    let mut all_pass = true;
    for &w in &weights {
        let mut rng = trial_rng(a.common.seed ^ 0x9e37_79b9_7f4a_7c15, w as u64);
        let f = if w == 0 {
            code.random_codeword(a.n, &mut rng)?
        } else {
            plant(code.as_ref(), a.n, w, &mut rng)?.f
        };
        let eps = Rational::new(w as i128, size as i128);
        for &k in &ks {
            for &qo in &qs {
                let mut c = a.code.clone();
                c.tester = "semi".into();
                let tester = build_tester(code.clone(), a.n, &c, k, qo)?;
                let r = soundness_cell(
                    &f,
                    eps,
                    &tester,
                    a.trials,
                    a.common.seed.wrapping_add(cell),
                    a.common.sigma,
                )?;
                cell += 1;
                all_pass &= r.pass;
                wtr.serialize(SweepRow {
                    q: a.code.q,
                    n: a.n,
                    d: a.code.d,
                    k,
                    queries: tester.queries,
                    eps_num: *eps.numer(),
                    eps_den: *eps.denom(),
                    trials: a.trials,
                    rejects: r.estimate.hits,
                    rate: r.estimate.rate,
                    bound: rmtest::exact::rat_f64(r.bound),
                    pass: r.pass,
                })
                .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    let body = String::from_utf8(wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .expect("csv is utf-8");
    let text = format!("# {}\n{body}", json(&meta(cli, &a.common)));
    emit(a.common.out.as_deref(), &text)?;
    eprintln!(
        "sweep: {cell} cells, all pass: {all_pass}, {:.2}s",
        start.elapsed().as_secs_f64()
    );
    Ok(EXIT_OK)
}

fn game_input(a: &GameArgs, code: &dyn CodeFamily) -> Result<FunctionTable> {
    if let Some(p) = &a.input {
        return FunctionTable::read(p);
    }
    let mut rng = trial_rng(a.common.seed ^ 0x9e37_79b9_7f4a_7c15, 0);
    if a.weight == 0 {
        code.random_codeword(a.n, &mut rng)
    } else {
        Ok(plant(code, a.n, a.weight, &mut rng)?.f)
    }
}

fn game_setup(a: &GameArgs) -> Result<(FunctionTable, Tester, AdversarySpec)> {
    let n = match &a.input {
        Some(p) => FunctionTable::read(p)?.n(),
        None => a.n,
    };
    let code = build_code(&a.code, n)?;
    let f = game_input(a, code.as_ref())?;
    let k = default_k(code.as_ref(), &a.code);
    let tester = build_tester(code, f.n(), &a.code, k, None)?;
    let spec = build_adversary(&a.adversary)?.unwrap_or(AdversarySpec::new(
        StrategyKind::NoneAdv,
        Mode::Erasure,
        Accounting::FixedRate(Rational::from_integer(0)),
    )?);
    Ok((f, tester, spec))
}

fn cmd_game(cli: &Cli, a: &GameArgs) -> Result<i32> {
    let (f, tester, spec) = game_setup(a)?;
    let rec = run_game(&f, &tester, &spec, a.common.seed, a.trial, true)?;
    let text = format!("{}\n{}\n", json(&meta(cli, &a.common)), json(&rec));
    if let Some(p) = &a.common.out {
        fs::write(p, &text)?;
    }
    stdout(&format!("{}\n", json_pretty(&rec.outcome)));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ArenaReport<'a> {
    meta: Meta<'a>,
    summary: rmtest::adversary::ArenaSummary,
    reject_rate: RateEstimate,
    hit_rate: RateEstimate,
}

fn cmd_arena(cli: &Cli, a: &GameArgs) -> Result<i32> {
    let (f, tester, spec) = game_setup(a)?;
    let keep = a.common.out.is_some();
    let records = play_games(&f, &tester, &spec, a.trials, a.common.seed, keep)?;
    if let Some(p) = &a.common.out {
        let mut file = std::io::BufWriter::new(fs::File::create(p)?);
        writeln!(file, "{}", json(&meta(cli, &a.common)))?;
        for r in &records {
            writeln!(file, "{}", json(r))?;
        }
        file.flush()?;
    }
    let summary = summarize(&records);
    let hits = records.iter().filter(|r| r.hit).count() as u64;
    let report = ArenaReport {
        meta: meta(cli, &a.common),
        reject_rate: RateEstimate::new(summary.rejects, summary.games, a.common.sigma),
        hit_rate: RateEstimate::new(hits, summary.games, a.common.sigma),
        summary,
    };
    stdout(&format!("{}\n", json_pretty(&report)));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AgreementCell {
    q: u32,
    n: usize,
    instances: u64,
    sampling_failures: u64,
    chebyshev_failures: u64,
    min_slack_lower: f64,
    min_slack_upper: f64,
    min_chebyshev_slack: f64,
}

#[derive(Serialize)]
struct AgreementReport<'a> {
    meta: Meta<'a>,
    cells: Vec<AgreementCell>,
    pipeline: Vec<PipelineReport>,
    pass: bool,
}

/// Runs the sampling and Chebyshev checks on `instances` random collections.
fn agreement_cell(
    q: u32,
    n: usize,
    instances: u64,
    cs: &[Rational],
    seed: u64,
) -> Result<AgreementCell> {
    let space = Space::new(Field::new(q)?, n)?;
    let mut cell = AgreementCell {
        q,
        n,
        instances,
        sampling_failures: 0,
        chebyshev_failures: 0,
        min_slack_lower: f64::INFINITY,
        min_slack_upper: f64::INFINITY,
        min_chebyshev_slack: f64::INFINITY,
    };
    let results = rmtest::par::map_trials(
        instances,
        |i| -> Result<(Option<(f64, f64)>, Vec<Option<f64>>)> {
            let mut rng = trial_rng(seed ^ ((q as u64) << 32 | n as u64), i);
            let (coll, set) = random_instance(&space, &mut rng)?;
            let counts = coll.all_counts();
            let s = match check_sampling_bounds_with(&coll, &counts, &set) {
                Ok(r) => Some((
                    rmtest::exact::rat_f64(r.slack_lower),
                    rmtest::exact::rat_f64(r.slack_upper),
                )),
                Err(Error::LemmaViolation(_)) => None,
                Err(e) => return Err(e),
            };
            let mut ch = Vec::new();
            for &c in cs {
                ch.push(match check_chebyshev_with(&coll, &counts, c) {
                    Ok(r) => Some(rmtest::exact::rat_f64(r.slack)),
                    Err(Error::LemmaViolation(_)) => None,
                    Err(e) => return Err(e),
                });
            }
            Ok((s, ch))
        },
    );
    for r in results {
        let (s, ch) = r?;
        match s {
            Some((lo, hi)) => {
                cell.min_slack_lower = cell.min_slack_lower.min(lo);
                cell.min_slack_upper = cell.min_slack_upper.min(hi);
            }
            None => cell.sampling_failures += 1,
        }
        for c in ch {
            match c {
                Some(x) => cell.min_chebyshev_slack = cell.min_chebyshev_slack.min(x),
                None => cell.chebyshev_failures += 1,
            }
        }
    }
    Ok(cell)
}

fn cmd_agreement(cli: &Cli, a: &AgreementArgs) -> Result<i32> {
    let qs = list::<u32>(&a.qs, "q")?;
    let ns = list::<usize>(&a.ns, "n")?;
    let cs = rationals(&a.cs)?;
    let mut cells = Vec::new();
    let mut pipeline = Vec::new();
    for &q in &qs {
        for &n in &ns {
            cells.push(agreement_cell(q, n, a.instances, &cs, a.common.seed)?);
            if a.planted > 0 && n <= 6 {
                let rm = ReedMuller::new(Field::new(q)?, 1);
                for i in 0..a.planted {
                    let mut rng = trial_rng(
                        a.common.seed ^ 0x51_7cc1_b727_220a,
                        (q as u64) << 40 | (n as u64) << 32 | i,
                    );
                    pipeline.push(agreement_pipeline(&rm, n, 1, &mut rng)?);
                }
            }
        }
    }
    let pass = cells
        .iter()
        .all(|c| c.sampling_failures == 0 && c.chebyshev_failures == 0)
        && pipeline.iter().all(|p| p.pass);
    let report = AgreementReport {
        meta: meta(cli, &a.common),
        cells,
        pipeline,
        pass,
    };
    emit(a.common.out.as_deref(), &(json_pretty(&report) + "\n"))?;
    Ok(if pass { EXIT_OK } else { EXIT_LEMMA })
}

#[derive(Serialize)]
struct BoundsRow {
    #[serde(flatten)]
    bound: BoundReport,
    k_adv: Option<KAdv>,
    infeasible: Option<String>,
}

#[derive(Serialize)]
struct BoundsReport<'a> {
    meta: Meta<'a>,
    bounds: Vec<BoundsRow>,
    ranks: Vec<RankReport>,
    pass: bool,
}

fn cmd_bounds(cli: &Cli, a: &BoundsArgs) -> Result<i32> {
    let field = Field::new(a.q)?;
    let eps = parse_rational(&a.eps)?;
    let safety = parse_rational(&a.safety)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for t in list::<u128>(&a.ts, "t")? {
        let mut bound = query_lower_bound(a.q as usize, a.n, a.d, t)?;
        let (k_adv, infeasible) =
            match k_adv_size(&field, a.d, Rational::from_integer(t as i128), eps, safety) {
                Ok(k) => (Some(k), None),
                Err(Error::Budget(m)) => (None, Some(m)),
                Err(e) => return Err(e),
            };
        bound.tester_queries = k_adv.as_ref().map(|k| k.q_total);
        pass &= bound.floor_holds() && bound.tester_meets_bound().unwrap_or(true);
        rows.push(BoundsRow {
            bound,
            k_adv,
            infeasible,
        });
    }
    let mut ranks = Vec::new();
    if let Some(rmax) = a.rank_r {
        let mut rng = trial_rng(a.common.seed, 0);
        for r in 0..=rmax.min(a.n) {
            match rank_witness(&field, a.n, a.d, r, &mut rng) {
                Ok(rep) => ranks.push(rep),
                Err(Error::LemmaViolation(m)) => {
                    eprintln!("rank witness failed: {m}");
                    pass = false;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let report = BoundsReport {
        meta: meta(cli, &a.common),
        bounds: rows,
        ranks,
        pass,
    };
    emit(a.common.out.as_deref(), &(json_pretty(&report) + "\n"))?;
    Ok(if pass { EXIT_OK } else { EXIT_LEMMA })
}
