//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the timing criteria measure an otherwise idle process.

mod common;

use std::time::{Duration, Instant};

use isocheck::checkers::{check, check_ra_one_session, CheckOptions, IsolationLevel, Verdict};
use isocheck::consistency::{check_read_consistency, ReadViolationKind};
use isocheck::generators::{
    gen_ra_reduction, gen_random, gen_range_reduction, gen_rc_reduction, gen_unconstrained, has_triangle, Anomaly,
    RandomSpec, UnconstrainedSpec, UndirectedGraph,
};
use isocheck::model::History;
use isocheck::oracle::{oracle_check, OracleBudget};
use isocheck::IsolationLevel::RA;
use common::{certificate_ok, fixture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: bool,
}

impl Report {
    fn line(&mut self, n: u32, ok: bool, detail: String) {
        self.timed(n, ok, true, detail);
    }

    /// Wall-clock bounds depend on the host's cache sizes, so a miss there is
    /// reported but only `correct` decides the exit code.
    fn timed(&mut self, n: u32, correct: bool, timing: bool, detail: String) {
        let tag = if correct && !timing { " [timing only]" } else { "" };
        println!("{}{tag} criterion {n}: {detail}", if correct && timing { "PASS" } else { "FAIL" });
        self.failed |= !correct;
    }
}

/// Histories whose verdicts feed the certificate and monotonicity sweeps.
#[derive(Default)]
struct Corpus {
    checked: Vec<(History, [Verdict; 3])>,
}

impl Corpus {
    fn add(&mut self, h: History) -> &[Verdict; 3] {
        let verdicts = IsolationLevel::ALL.map(|l| check(&h, l));
        self.checked.push((h, verdicts));
        &self.checked.last().unwrap().1
    }
}

fn criterion1(corpus: &mut Corpus) -> (bool, String) {
    let start = Instant::now();
    // (fixture, expected RC, RA, CC consistency)
    let expected = [
        ("rc_cycle", Some(false), None, None),
        ("cc_inferences", None, None, Some(false)),
        ("non_repeatable", Some(false), None, None),
        ("rc_not_ra", Some(true), Some(false), None),
        ("ra_not_cc", None, Some(true), Some(false)),
        ("all_consistent", None, None, Some(true)),
    ];
    let mut errors = Vec::new();
    for (name, rc, ra, cc) in expected {
        let h = fixture(name);
        if name == "non_repeatable" && !check_read_consistency(&h).is_empty() {
            errors.push("non_repeatable not read-consistent".to_owned());
        }
        let v = corpus.add(h);
        for (i, want) in [rc, ra, cc].into_iter().enumerate() {
            if let Some(want) = want {
                if v[i].is_consistent() != want {
                    errors.push(format!("{name} {}", IsolationLevel::ALL[i]));
                }
            }
        }
    }
    use ReadViolationKind::*;
    for (name, kind) in [
        ("thin_air", ThinAir),
        ("aborted_read", AbortedRead),
        ("future_read", FutureRead),
        ("not_own_write", NotOwnWrite),
        ("not_latest_write", NotLatestWrite),
    ] {
        let h = fixture(name);
        if !check_read_consistency(&h).iter().any(|v| v.kind == kind) {
            errors.push(format!("{name} missing {kind}"));
        }
        corpus.add(h);
    }
    let elapsed = start.elapsed();
    let ok = errors.is_empty() && elapsed < Duration::from_secs(1);
    (ok, format!("11 fixtures, {:.1} ms, mismatches {errors:?}", elapsed.as_secs_f64() * 1e3))
}

fn criterion2(corpus: &mut Corpus) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut disagreements = Vec::new();
    let mut consistent_counts = [0usize; 3];
    let total = 1200;
    for i in 0..total {
        let spec = UnconstrainedSpec {
            seed: rng.gen(),
            sessions: rng.gen_range(2..=4),
            txns: rng.gen_range(1..=6),
            keys: rng.gen_range(1..=4),
            abort_probability: 0.1,
            glitch_probability: if i % 3 == 0 { 0.1 } else { 0.0 },
            ..UnconstrainedSpec::default()
        };
        let h = gen_unconstrained(&spec).unwrap();
        assert!(h.committed_txns().count() <= 6);
        corpus.add(h);
        let (h, verdicts) = corpus.checked.last().unwrap();
        for (j, level) in IsolationLevel::ALL.into_iter().enumerate() {
            let oracle = oracle_check(h, level, OracleBudget::default()).unwrap();
            let ours = verdicts[j].is_consistent();
            consistent_counts[j] += ours as usize;
            if ours != oracle.is_consistent() {
                disagreements.push((spec.seed, level));
            }
        }
    }
    (
        disagreements.is_empty(),
        format!(
            "{total} histories x 3 levels, consistent rc/ra/cc = {consistent_counts:?}, disagreements {disagreements:?}"
        ),
    )
}

fn criterion3(corpus: &mut Corpus) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut triangles = 0;
    let graphs = 240;
    for i in 0..graphs {
        let n = rng.gen_range(1..=10);
        let p = if i % 2 == 0 { 0.2 } else { 0.5 };
        let seed: u64 = rng.gen();
        let g = UndirectedGraph::erdos_renyi(n, p, seed);
        let tri = has_triangle(&g);
        triangles += tri as usize;
        let range = corpus.add(gen_range_reduction(&g)).clone();
        let ra = corpus.add(gen_ra_reduction(&g))[1].is_consistent();
        let rc = corpus.add(gen_rc_reduction(&g))[0].is_consistent();
        let checks = [
            ("rc-reduction rc", rc),
            ("ra-reduction ra", ra),
            ("range cc", range[2].is_consistent()),
            ("range rc", range[0].is_consistent()),
        ];
        for (what, ok) in checks {
            if ok == tri {
                failures.push(format!("n={n} p={p} seed={seed}: {what}"));
            }
        }
    }
    (
        failures.is_empty(),
        format!("{graphs} graphs ({triangles} with triangles), failures {failures:?}"),
    )
}

fn criterion4(corpus: &Corpus) -> (bool, String) {
    let mut failures = Vec::new();
    let (mut orders, mut cycles) = (0, 0);
    for (h, verdicts) in &corpus.checked {
        for (level, v) in IsolationLevel::ALL.into_iter().zip(verdicts) {
            orders += v.is_consistent() as usize;
            cycles += v.cycles().count();
            if let Err(e) = certificate_ok(h, level, v) {
                failures.push(format!("{level}: {e}"));
            }
        }
    }
    failures.truncate(5);
    (
        failures.is_empty(),
        format!("{orders} commit orders and {cycles} cycles validated, failures {failures:?}"),
    )
}

/// Fastest time of each job over `rounds` round-robin passes, so that drift
/// in machine load hits every job alike.
fn fastest(rounds: usize, jobs: &[&dyn Fn()]) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; jobs.len()];
    for _ in 0..rounds {
        for (job, b) in jobs.iter().zip(&mut best) {
            let s = Instant::now();
            job();
            *b = b.min(s.elapsed().as_secs_f64());
        }
    }
    best
}

fn sized(ops: usize, sessions: u32, seed: u64) -> History {
    let spec = RandomSpec {
        seed,
        sessions,
        txns: (ops as f64 / 4.5) as u32,
        ops_min: 1,
        ops_max: 8,
        keys: 20,
        ..RandomSpec::default()
    };
    gen_random(&spec).unwrap().history
}

/// `[history][level]` seconds.
fn level_times(hs: &[History]) -> Vec<[f64; 3]> {
    let jobs: Vec<Box<dyn Fn()>> = hs
        .iter()
        .flat_map(|h| {
            IsolationLevel::ALL.map(|l| Box::new(move || assert!(check(h, l).is_consistent())) as Box<dyn Fn()>)
        })
        .collect();
    let refs: Vec<&dyn Fn()> = jobs.iter().map(|j| j.as_ref()).collect();
    fastest(9, &refs).chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn criterion5() -> (bool, String) {
    let mut ok = true;
    let mut detail = String::from("doubling n at k=100:");
    let sizes: Vec<usize> = (14..=17).map(|e| 1 << e).collect();
    let hs: Vec<History> = sizes.iter().map(|&n| sized(n, 100, 5)).collect();
    let times = level_times(&hs);
    for (l, level) in IsolationLevel::ALL.into_iter().enumerate() {
        let ratios: Vec<f64> = times.windows(2).map(|w| w[1][l] / w[0][l]).collect();
        ok &= ratios.iter().all(|&r| r <= 2.5);
        detail += &format!(" {level} {:.2?}", ratios);
    }

    detail += "; n=1e5, k=25..200:";
    let ks = [25, 50, 100, 200];
    let hs: Vec<History> = ks.iter().map(|&k| sized(100_000, k, 6)).collect();
    let times = level_times(&hs);
    let cc: Vec<f64> = times.iter().map(|t| t[2] * 1e3).collect();
    let cc_monotone = cc.windows(2).all(|w| w[1] > w[0]);
    ok &= cc_monotone;
    detail += &format!(" cc ms {:.1?} monotone={cc_monotone}", cc);
    for l in [0, 1] {
        let ms: Vec<f64> = times.iter().map(|t| t[l] * 1e3).collect();
        let mean = ms.iter().sum::<f64>() / ms.len() as f64;
        let within = ms.iter().all(|&t| (t - mean).abs() <= 0.25 * mean);
        ok &= within;
        detail += &format!(" {} ms {:.1?} within25%={within}", IsolationLevel::ALL[l], ms);
    }
    (ok, detail)
}

fn criterion6() -> (bool, bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = Vec::new();
    let opts = CheckOptions::default();
    let (mut consistent_count, total) = (0, 600);
    for i in 0..total {
        let seed: u64 = rng.gen();
        let h = if i % 2 == 0 {
            gen_unconstrained(&UnconstrainedSpec {
                seed,
                sessions: 1,
                txns: rng.gen_range(1..=150),
                keys: rng.gen_range(1..=12),
                ops_max: 6,
                glitch_probability: if i % 4 == 0 { 0.02 } else { 0.0 },
                ..UnconstrainedSpec::default()
            })
            .unwrap()
        } else {
            let inject = if i % 3 == 0 { [Anomaly::FracturedRead].into() } else { Default::default() };
            gen_random(&RandomSpec {
                seed,
                sessions: 1,
                txns: rng.gen_range(8..=200),
                keys: rng.gen_range(1..=20),
                inject,
                ..RandomSpec::default()
            })
            .unwrap()
            .history
        };
        assert!(h.op_count() <= 1000);
        let fast = check_ra_one_session(&h, opts);
        consistent_count += fast.is_consistent() as usize;
        let kinds = |v: &Verdict| v.violations().iter().map(|x| x.kind_name()).collect::<Vec<_>>();
        if kinds(&fast) != kinds(&check(&h, RA)) || certificate_ok(&h, RA, &fast).is_err() {
            mismatches.push(seed);
        }
    }

    let sizes: Vec<usize> = (17..=20).map(|e| 1 << e).collect();
    let hs: Vec<History> = sizes.iter().map(|&n| sized(n, 1, 7)).collect();
    let jobs: Vec<Box<dyn Fn() + '_>> = hs
        .iter()
        .map(|h| Box::new(move || assert!(check_ra_one_session(h, opts).is_consistent())) as Box<dyn Fn()>)
        .collect();
    let refs: Vec<&dyn Fn()> = jobs.iter().map(|j| j.as_ref()).collect();
    let times = fastest(9, &refs);
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0]).collect();
    let linear = ratios.iter().all(|&r| r <= 2.2);
    (
        mismatches.is_empty(),
        linear,
        format!(
            "{total} one-session histories ({consistent_count} consistent), mismatches {mismatches:?}; \
             ms at 2^17..2^20 ops {:.1?}, ratios {ratios:.2?}",
            times.iter().map(|t| t * 1e3).collect::<Vec<_>>()
        ),
    )
}

fn criterion7(corpus: &mut Corpus) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let mut inject = std::collections::BTreeSet::new();
        if i % 3 == 1 {
            inject.insert(Anomaly::FracturedRead);
        }
        if i % 3 == 2 {
            inject.insert(Anomaly::CausalityViolation);
        }
        let spec = RandomSpec {
            seed: rng.gen(),
            sessions: rng.gen_range(2..=16),
            txns: rng.gen_range(200..=2000),
            keys: rng.gen_range(4..=200),
            inject,
            ..RandomSpec::default()
        };
        corpus.add(gen_random(&spec).unwrap().history);
    }
    let exceptions = corpus
        .checked
        .iter()
        .filter(|(_, [rc, ra, cc])| (cc.is_consistent() && !ra.is_consistent()) || (ra.is_consistent() && !rc.is_consistent()))
        .count();
    let pattern = |a: bool, b: bool, c: bool| {
        corpus
            .checked
            .iter()
            .filter(|(_, [rc, ra, cc])| (rc.is_consistent(), ra.is_consistent(), cc.is_consistent()) == (a, b, c))
            .count()
    };
    (
        exceptions == 0,
        format!(
            "{} histories, exceptions {exceptions}; rc/ra/cc all={} rc+ra={} rc-only={} none={}",
            corpus.checked.len(),
            pattern(true, true, true),
            pattern(true, true, false),
            pattern(true, false, false),
            pattern(false, false, false)
        ),
    )
}

fn main() {
    let mut report = Report { failed: false };
    let mut fixtures = Corpus::default();
    let mut sweep = Corpus::default();

    let (ok, d) = criterion1(&mut fixtures);
    report.line(1, ok, d);
    let (ok, d) = criterion2(&mut sweep);
    report.line(2, ok, d);
    let (ok, d) = criterion3(&mut sweep);
    report.line(3, ok, d);
    fixtures.checked.append(&mut sweep.checked);
    let (ok, d) = criterion4(&fixtures);
    report.line(4, ok, d);
    let (ok, d) = criterion5();
    report.timed(5, true, ok, d);
    let (correct, timing, d) = criterion6();
    report.timed(6, correct, timing, d);
    // Suites 2 and 3 plus the larger histories.
    let mut monotone = Corpus {
        checked: fixtures.checked.split_off(11),
    };
    let (ok, d) = criterion7(&mut monotone);
    report.line(7, ok, d);

    if report.failed {
        std::process::exit(1);
    }
}

