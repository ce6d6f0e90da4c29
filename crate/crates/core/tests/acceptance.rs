//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::process::{Child, ChildStdout, Command, Stdio};

use bia_pir::audit::{audit_correctness, audit_privacy, bound_asymptotic, bound_two_message, CostReport, StoreSource};
use bia_pir::{
    run_inprocess, scheme_for, session_rng, FieldId, MessageStore, PirScheme, QueryPayload, RandomnessToken, Rational,
    Result, SchemeId, SchemeParams, ShiftToken,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn params(id: SchemeId, k: usize, n: usize, field: FieldId) -> SchemeParams {
    SchemeParams::new(id, k, n, field).unwrap()
}

fn gf(p: u16) -> FieldId {
    FieldId::prime(p).unwrap()
}

/// Decodes every `(token, index)` pair on `store` and counts mismatches with
/// the planted message.
fn decode_failures(s: &dyn PirScheme, store: &MessageStore, tokens: &[RandomnessToken]) -> usize {
    let mut failures = 0;
    for tok in tokens {
        for i in 1..=s.params().k {
            let got = s.retrieve_blocks(i, store, tok).unwrap().message;
            if got != store.messages()[i - 1] {
                failures += 1;
            }
        }
    }
    failures
}

/// Exact law of the query bytes seen by each database, per index, counted
/// directly from the token space.
fn query_laws(s: &dyn PirScheme) -> Vec<Vec<BTreeMap<Vec<u8>, Rational>>> {
    let tokens = s.randomness_space().unwrap();
    let total = tokens.len() as i64;
    let p = *s.params();
    let mut laws = vec![vec![BTreeMap::new(); p.k]; p.n];
    for tok in &tokens {
        for i in 1..=p.k {
            for q in s.query_gen(i, tok).unwrap() {
                *laws[q.db_index - 1][i - 1].entry(q.to_bytes()).or_insert(Rational::from_integer(0)) +=
                    Rational::new(1, total);
            }
        }
    }
    laws
}

fn laws_private(s: &dyn PirScheme) -> bool {
    query_laws(s).iter().all(|per_index| per_index.iter().all(|law| law == &per_index[0]))
}

/// Coefficient of every store symbol in every downloaded symbol, found by
/// answering the queries against unit stores. Row order is database-major.
fn probe_rows(s: &dyn PirScheme, index: usize, tok: &RandomnessToken) -> Vec<Vec<Vec<u16>>> {
    let p = *s.params();
    let bl = s.block_len();
    let queries = s.query_gen(index, tok).unwrap();
    let mut rows: Vec<Vec<Vec<u16>>> = Vec::new();
    for pos in 0..p.k * bl {
        let mut msgs = vec![vec![0u16; bl]; p.k];
        msgs[pos / bl][pos % bl] = 1;
        let store = MessageStore::new(p.field, msgs).unwrap();
        for (j, q) in queries.iter().enumerate() {
            let ans = s.answer(&store, q).unwrap();
            let syms = &ans.blocks[0];
            if rows.len() <= j {
                rows.push(vec![vec![0; p.k * bl]; syms.len()]);
            }
            for (e, &v) in syms.iter().enumerate() {
                rows[j][e][pos] = v;
            }
        }
    }
    rows
}

fn c1_two_opt_cost() {
    for n in 2..=6 {
        let s = scheme_for(params(SchemeId::TWO_OPT, 2, n, FieldId::Gf256)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
        let store = MessageStore::random(FieldId::Gf256, 2, s.block_len(), s.block_len(), &mut rng).unwrap();
        for tok in s.randomness_space().unwrap() {
            for i in 1..=2 {
                let r = s.retrieve_blocks(i, &store, &tok).unwrap();
                assert_eq!(r.message.len(), n * n - n);
                let down: usize = r.downloaded_symbols().iter().sum();
                assert_eq!(down, n * n - 1);
                let eta = Rational::new(down as i64, r.message.len() as i64);
                assert_eq!(eta, Rational::new(n as i64 + 1, n as i64));
            }
        }
    }
}

fn c2_two_database_table() {
    let s = scheme_for(params(SchemeId::TWO_OPT, 2, 2, FieldId::Gf256)).unwrap();
    // columns: a1 a2 b1 b2
    let b = |x: usize| 2 + x;
    for i in 1..=2 {
        let mut pair_outcomes = BTreeSet::new();
        let mut sum_outcomes = BTreeSet::new();
        for l in 0..2 {
            let rows = probe_rows(s.as_ref(), i, &RandomnessToken::Shift(ShiftToken(l)));
            let support = |r: &Vec<u16>| -> Vec<usize> { (0..4).filter(|&c| r[c] != 0).collect() };
            assert!(rows.iter().flatten().all(|r| r.iter().all(|&v| v <= 1)));
            let mut sizes: Vec<usize> = rows.iter().map(Vec::len).collect();
            sizes.sort();
            assert_eq!(sizes, vec![1, 2]);
            let single = rows.iter().find(|r| r.len() == 1).unwrap();
            let pair = rows.iter().find(|r| r.len() == 2).unwrap();
            // a_z + b_z
            let sum = support(&single[0]);
            assert_eq!(sum.len(), 2);
            assert!(sum[0] < 2 && sum[1] == b(sum[0]));
            sum_outcomes.insert(sum[0]);
            // one pure a-symbol and one pure b-symbol with different indices
            let mut pure: Vec<usize> = pair
                .iter()
                .map(|r| {
                    let sup = support(r);
                    assert_eq!(sup.len(), 1);
                    sup[0]
                })
                .collect();
            pure.sort();
            assert!(pure[0] < 2 && pure[1] >= 2);
            let (x, y) = (pure[0], pure[1] - 2);
            assert_ne!(x, y);
            pair_outcomes.insert((x, y));
        }
        // the two coin outcomes swap indices
        assert_eq!(pair_outcomes, BTreeSet::from([(0, 1), (1, 0)]));
        assert_eq!(sum_outcomes, BTreeSet::from([0, 1]));
    }
}

fn all_stores(field: FieldId, k: usize, len: usize) -> Vec<MessageStore> {
    let q = field.order() as usize;
    let cells = k * len;
    let mut out = Vec::new();
    for code in 0..q.pow(cells as u32) {
        let mut c = code;
        let mut msgs = vec![vec![0u16; len]; k];
        for pos in 0..cells {
            msgs[pos / len][pos % len] = (c % q) as u16;
            c /= q;
        }
        out.push(MessageStore::new(field, msgs).unwrap());
    }
    out
}

fn c3_exhaustive_correctness() {
    let f2 = gf(2);
    let s = scheme_for(params(SchemeId::TWO_OPT, 2, 2, f2)).unwrap();
    let stores = all_stores(f2, 2, s.block_len());
    assert_eq!(stores.len(), 16);
    let tokens = s.randomness_space().unwrap();
    assert_eq!(stores.iter().map(|st| decode_failures(s.as_ref(), st, &tokens)).sum::<usize>(), 0);

    let s = scheme_for(params(SchemeId::TWO_OPT, 2, 3, f2)).unwrap();
    let mut everything = all_stores(f2, 2, s.block_len());
    assert_eq!(everything.len(), 1 << 12);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let tokens = s.randomness_space().unwrap();
    let mut failures = 0;
    for _ in 0..1000 {
        let st = everything.swap_remove(rng.gen_range(0..everything.len()));
        failures += decode_failures(s.as_ref(), &st, &tokens);
    }
    assert_eq!(failures, 0);

    for field in [gf(2), gf(3)] {
        for k in [2, 3] {
            for n in [2, 3] {
                let s = scheme_for(params(SchemeId::K_REP, k, n, field)).unwrap();
                let tokens = s.randomness_space().unwrap();
                let mut rng = ChaCha20Rng::seed_from_u64((k * 10 + n) as u64);
                let mut failures = 0;
                for _ in 0..500 {
                    let st = MessageStore::random(field, k, 2 * s.block_len(), s.block_len(), &mut rng).unwrap();
                    failures += decode_failures(s.as_ref(), &st, &tokens);
                }
                assert_eq!(failures, 0, "k-rep k={k} n={n} over {field}");
            }
        }
    }
}

/// TWO_OPT with the shift pinned to zero.
struct Pinned(Box<dyn PirScheme>);

impl PirScheme for Pinned {
    fn params(&self) -> &SchemeParams {
        self.0.params()
    }
    fn block_len(&self) -> usize {
        self.0.block_len()
    }
    fn equations_per_block(&self, db: usize) -> usize {
        self.0.equations_per_block(db)
    }
    fn draw_randomness(&self, _: &mut dyn rand::RngCore) -> RandomnessToken {
        RandomnessToken::Shift(ShiftToken(0))
    }
    fn randomness_space_size(&self) -> u128 {
        1
    }
    fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
        Ok(vec![RandomnessToken::Shift(ShiftToken(0))])
    }
    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<bia_pir::Query>> {
        self.0.query_gen(index, token)
    }
    fn answer_block(&self, payload: &QueryPayload, db: usize, block: &[&[u16]]) -> Result<Vec<u16>> {
        self.0.answer_block(payload, db, block)
    }
    fn decode_block(&self, index: usize, token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>> {
        self.0.decode_block(index, token, answers)
    }
}

fn c4_exact_privacy() {
    let mut cases: Vec<SchemeParams> = (2..=5).map(|n| params(SchemeId::TWO_OPT, 2, n, FieldId::Gf256)).collect();
    for (k, n) in [(2, 2), (2, 3), (3, 2)] {
        cases.push(params(SchemeId::K_REP, k, n, gf(2)));
    }
    for p in cases {
        let s = scheme_for(p).unwrap();
        let expected_tokens = match p.scheme {
            SchemeId::TWO_OPT => p.n as u128,
            _ => 2u128.pow((p.k * (p.n - 1)) as u32),
        };
        assert_eq!(s.randomness_space_size(), expected_tokens);
        assert!(audit_privacy(s.as_ref()).unwrap().passed(), "{} k={} n={}", p.scheme, p.k, p.n);
        assert!(laws_private(s.as_ref()));
    }
    for n in 2..=5 {
        let leaky = Pinned(scheme_for(params(SchemeId::TWO_OPT, 2, n, FieldId::Gf256)).unwrap());
        let report = audit_privacy(&leaky).unwrap();
        assert!(!report.passed());
        assert!(report.counterexample.is_some());
        assert!(!laws_private(&leaky));
    }
}

fn c5_rank_facts() {
    let f = FieldId::Gf256;
    for n in 2..=4 {
        let s = scheme_for(params(SchemeId::TWO_OPT, 2, n, f)).unwrap();
        let bl = s.block_len();
        for l in 0..n {
            for i in 1..=2 {
                let rows: Vec<Vec<u16>> =
                    probe_rows(s.as_ref(), i, &RandomnessToken::Shift(ShiftToken(l))).into_iter().flatten().collect();
                assert_eq!(rows.len(), n * n - 1);
                let (desired, interference) = if i == 1 { (0..bl, bl..2 * bl) } else { (bl..2 * bl, 0..bl) };
                let d: Vec<Vec<u16>> = rows.iter().map(|r| r[desired.clone()].to_vec()).collect();
                let x: Vec<Vec<u16>> = rows.iter().map(|r| r[interference.clone()].to_vec()).collect();
                assert_eq!(f.rank(&d).unwrap(), n * n - n, "n={n} l={l} i={i}");
                assert_eq!(f.rank(&x).unwrap(), n - 1, "n={n} l={l} i={i}");
            }
        }
    }
}

fn measured_eta(s: &dyn PirScheme, seed: u64) -> Rational {
    let p = *s.params();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let store = MessageStore::random(p.field, p.k, s.block_len(), s.block_len(), &mut rng).unwrap();
    let tok = s.draw_randomness(&mut rng);
    let r = s.retrieve_blocks(p.k, &store, &tok).unwrap();
    assert_eq!(r.message, store.messages()[p.k - 1]);
    Rational::new(r.downloaded_symbols().iter().sum::<usize>() as i64, r.message.len() as i64)
}

fn c6_k_rep_and_baseline_cost() {
    for n in 2..=5 {
        for k in [2, 3, 4] {
            let s = scheme_for(params(SchemeId::K_REP, k, n, FieldId::Gf256)).unwrap();
            assert_eq!(measured_eta(s.as_ref(), n as u64), Rational::new(n as i64, n as i64 - 1));
        }
    }
    for k in [2, 3, 5] {
        for n in [2, 3] {
            let s = scheme_for(params(SchemeId::ALL, k, n, FieldId::Gf256)).unwrap();
            assert_eq!(measured_eta(s.as_ref(), k as u64), Rational::from_integer(k as i64));
        }
    }
}

fn c7_bounds() {
    for n in 2..=6 {
        let b = bound_two_message(n).unwrap();
        assert_eq!(b, Rational::new(1, 1) + Rational::new(1, n as i64));
        let s = scheme_for(params(SchemeId::TWO_OPT, 2, n, FieldId::Gf256)).unwrap();
        assert_eq!(measured_eta(s.as_ref(), 7), b);
        let report = CostReport::for_scheme(s.as_ref()).unwrap();
        assert_eq!(report.gap, Rational::from_integer(0));

        let k_rep = scheme_for(params(SchemeId::K_REP, 3, n, FieldId::Gf256)).unwrap();
        let asym = bound_asymptotic(3, n).unwrap();
        assert_eq!(asym.limit, Rational::new(n as i64, n as i64 - 1));
        assert_eq!(asym.limit, measured_eta(k_rep.as_ref(), 11));
    }
    let edge = bound_asymptotic(2, 2).unwrap();
    assert_eq!(edge.finite, Rational::from_integer(2));
    assert_eq!(edge.flag(), "asymptotic heuristic");
    assert!(edge.exceeds_two_message_optimum);
    let out = Command::new(env!("CARGO_BIN_EXE_bia-pir"))
        .args(["--format", "kv", "bounds", "--k", "2", "--n", "2"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bounds.asymptotic.finite=2\n"));
    assert!(text.contains("bounds.asymptotic.flag=asymptotic heuristic\n"));
}

fn c8_symmetrization() {
    for n in [2, 3] {
        let inner = scheme_for(params(SchemeId::TWO_OPT, 2, n, gf(2))).unwrap();
        let s = scheme_for(params(SchemeId::Symmetrized(bia_pir::schemes::BaseScheme::TwoMessageOptimal), 2, n, gf(2)))
            .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let store = MessageStore::random(gf(2), 2, s.block_len(), s.block_len(), &mut rng).unwrap();
        for _ in 0..4 {
            let tok = s.draw_randomness(&mut rng);
            for i in 1..=2 {
                let r = s.retrieve_blocks(i, &store, &tok).unwrap();
                assert_eq!(r.message, store.messages()[i - 1]);
                let counts = r.downloaded_symbols();
                assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
            }
        }
        assert_eq!(measured_eta(s.as_ref(), 1), measured_eta(inner.as_ref(), 1));
        let source =
            if n == 2 { StoreSource::Exhaustive } else { StoreSource::Random { count: 300, blocks: 1, seed: 8 } };
        assert!(audit_correctness(s.as_ref(), source).unwrap().passed());
        assert!(audit_privacy(s.as_ref()).unwrap().passed());
        assert!(laws_private(s.as_ref()));
    }
}

struct Servers(Vec<(Child, BufReader<ChildStdout>)>);

impl Drop for Servers {
    fn drop(&mut self) {
        for (c, _) in &mut self.0 {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

fn c9_transport_equivalence() {
    let exe = env!("CARGO_BIN_EXE_bia-pir");
    let dir = tempfile::tempdir().unwrap();
    for n in [2, 3] {
        let path = dir.path().join(format!("store{n}.json"));
        let ok = Command::new(exe)
            .args(["genstore", "--k", "2", "--n", &n.to_string(), "--len", "12", "--seed", "5", "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(ok.status.success());

        let mut servers = Servers(Vec::new());
        let mut endpoints = Vec::new();
        for j in 1..=n {
            let mut child = Command::new(exe)
                .args(["serve", "--db-index", &j.to_string(), "--listen", "127.0.0.1:0", "--store"])
                .arg(&path)
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .unwrap();
            let mut line = String::new();
            let mut stdout = BufReader::new(child.stdout.take().unwrap());
            stdout.read_line(&mut line).unwrap();
            servers.0.push((child, stdout));
            endpoints.push(line.trim().strip_prefix("listening on ").unwrap().to_string());
        }

        let seed = 42 + n as u64;
        let out = Command::new(exe)
            .args(["--format", "kv", "retrieve", "--scheme", "two-opt", "--index", "2", "--seed", &seed.to_string()])
            .args(["--endpoints", &endpoints.join(",")])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let socket_kv = String::from_utf8(out.stdout).unwrap();

        let p = params(SchemeId::TWO_OPT, 2, n, FieldId::Gf256);
        let store = MessageStore::load(&path).unwrap();
        let mut rng = session_rng(Some(seed));
        let tok = scheme_for(p).unwrap().draw_randomness(&mut rng);
        let (message, transcript) = run_inprocess(p, 2, &store, &tok).unwrap();
        assert_eq!(message, store.messages()[1]);
        assert_eq!(socket_kv, transcript.to_kv());

        let blocks = store.len() / (n * n - n);
        assert_eq!(transcript.downloaded_symbols(), blocks * (n * n - 1));
        assert!(socket_kv.contains(&format!("transcript.downloaded_symbols={}\n", blocks * (n * n - 1))));
    }
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("1 two-opt downloads N^2-1 symbols, eta = 1+1/N", c1_two_opt_cost),
        ("2 n=2 coefficient structure matches the two-database table", c2_two_database_table),
        ("3 decode equals planted message for every store, token and index", c3_exhaustive_correctness),
        ("4 exact query-law equality; pinned shift fails", c4_exact_privacy),
        ("5 desired rank N^2-N, interference rank N-1", c5_rank_facts),
        ("6 k-rep eta = n/(n-1), download-all eta = k", c6_k_rep_and_baseline_cost),
        ("7 bounds: zero gap, limit equals k-rep cost, flagged finite formula", c7_bounds),
        ("8 symmetrized two-opt balances load, keeps eta, audits pass", c8_symmetrization),
        ("9 socket transcript equals in-process transcript", c9_transport_equivalence),
    ];
    panic::set_hook(Box::new(|info| eprintln!("  {info}")));
    let mut failed = 0;
    for (name, check) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(()) => println!("PASS criterion {name}"),
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
