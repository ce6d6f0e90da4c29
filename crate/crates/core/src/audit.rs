//! Exact privacy and correctness audits over enumerated randomness, and the
//! closed-form download-cost bounds.
//!
//! Probabilities and costs are exact rationals throughout; privacy passes
//! only when, at every database, the query distribution is identical for
//! every desired index.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Rational64;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::grid::is_cyclic_run;
use crate::schemes::{PirScheme, Query, QueryPayload, RandomnessToken, SchemeId, SchemeParams, MAX_ENUMERATION};
use crate::store::MessageStore;

pub type Rational = Rational64;

/// Label attached to the finite-K formula, which is only meaningful as
/// K grows.
pub const ASYMPTOTIC_FLAG: &str = "asymptotic heuristic";

/// Canonical query bytes mapped to their exact probability.
pub type QueryDistribution = BTreeMap<Vec<u8>, Rational>;

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyCounterexample {
    pub db_index: usize,
    pub index_a: usize,
    pub index_b: usize,
    pub query: Vec<u8>,
    pub prob_a: Rational,
    pub prob_b: Rational,
}

#[derive(Debug, Clone)]
pub struct DistributionReport {
    pub scheme: String,
    pub params: SchemeParams,
    pub tokens: usize,
    /// `distributions[j][i]`: database `j + 1`, desired index `i + 1`.
    pub distributions: Vec<Vec<QueryDistribution>>,
    /// Only evaluated for two-opt: every supported query is a cyclic run.
    pub cyclic_support: Option<bool>,
    pub counterexample: Option<PrivacyCounterexample>,
}

impl DistributionReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none() && self.cyclic_support != Some(false)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "privacy audit: {} k={} n={} field={} over {} tokens: {}",
            self.scheme,
            self.params.k,
            self.params.n,
            self.params.field,
            self.tokens,
            verdict(self.passed())
        );
        for (j, per_index) in self.distributions.iter().enumerate() {
            let support = per_index.first().map_or(0, BTreeMap::len);
            let _ = writeln!(s, "  db {}: {} distinct queries", j + 1, support);
        }
        if let Some(c) = self.cyclic_support {
            let _ = writeln!(s, "  cyclic-run support: {}", verdict(c));
        }
        if let Some(c) = &self.counterexample {
            let _ = writeln!(
                s,
                "  counterexample: db {} query {} has P = {} for i={} but {} for i={}",
                c.db_index,
                hex::encode(&c.query),
                c.prob_a,
                c.index_a,
                c.prob_b,
                c.index_b
            );
        }
        s
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "privacy.scheme={}", self.scheme);
        let _ = writeln!(s, "privacy.k={}", self.params.k);
        let _ = writeln!(s, "privacy.n={}", self.params.n);
        let _ = writeln!(s, "privacy.field={}", self.params.field);
        let _ = writeln!(s, "privacy.tokens={}", self.tokens);
        let _ = writeln!(s, "privacy.pass={}", self.passed());
        if let Some(c) = self.cyclic_support {
            let _ = writeln!(s, "privacy.cyclic_support={c}");
        }
        for (j, per_index) in self.distributions.iter().enumerate() {
            for (i, dist) in per_index.iter().enumerate() {
                for (q, p) in dist {
                    let _ = writeln!(s, "privacy.db{}.i{}.{}={}", j + 1, i + 1, hex::encode(q), p);
                }
            }
        }
        if let Some(c) = &self.counterexample {
            let _ = writeln!(s, "privacy.counterexample.db={}", c.db_index);
            let _ = writeln!(s, "privacy.counterexample.query={}", hex::encode(&c.query));
        }
        s
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Exact per-database query distributions for every desired index, under a
/// uniformly drawn token from the scheme's full randomness space.
pub fn audit_privacy(scheme: &dyn PirScheme) -> Result<DistributionReport> {
    let params = *scheme.params();
    let space = scheme.randomness_space()?;
    if space.is_empty() {
        return Err(Error::InvalidParams("empty randomness space".into()));
    }
    let weight = Rational::new(1, space.len() as i64);
    let mut distributions = vec![vec![QueryDistribution::new(); params.k]; params.n];
    for token in &space {
        for i in 1..=params.k {
            for q in scheme.query_gen(i, token)? {
                let slot = distributions[q.db_index - 1][i - 1].entry(q.to_bytes()).or_insert_with(Rational::zero);
                *slot += weight;
            }
        }
    }
    debug_assert!(distributions.iter().flatten().all(|d| d.values().sum::<Rational>() == Rational::one()));

    let counterexample = distributions.iter().enumerate().find_map(|(j, per_index)| {
        let reference = &per_index[0];
        per_index.iter().enumerate().skip(1).find_map(|(i, dist)| {
            if dist == reference {
                return None;
            }
            let query = reference.keys().chain(dist.keys()).find(|q| reference.get(*q) != dist.get(*q))?.clone();
            Some(PrivacyCounterexample {
                db_index: j + 1,
                index_a: 1,
                index_b: i + 1,
                prob_a: reference.get(&query).copied().unwrap_or_else(Rational::zero),
                prob_b: dist.get(&query).copied().unwrap_or_else(Rational::zero),
                query,
            })
        })
    });

    let cyclic_support = (params.scheme == SchemeId::TWO_OPT).then(|| {
        distributions.iter().flatten().flat_map(BTreeMap::keys).all(|bytes| {
            matches!(
                Query::from_bytes(bytes).map(|q| q.payload),
                Ok(QueryPayload::TwoOpt(units))
                    if is_cyclic_run(&units.iter().map(|&u| u as usize).collect::<Vec<_>>(), params.n)
            )
        })
    });

    Ok(DistributionReport {
        scheme: scheme.name(),
        params,
        tokens: space.len(),
        distributions,
        cyclic_support,
        counterexample,
    })
}

/// Marginal uniformity spot check for spaces too large to enumerate: for
/// each database and desired index, a chi-square statistic of every query
/// byte position against its pooled distribution over all indices.
/// Returns human-readable warnings; an empty list means nothing stood out.
/// Non-binding.
pub fn spot_check_privacy(scheme: &dyn PirScheme, samples: usize, rng: &mut dyn RngCore) -> Result<Vec<String>> {
    let p = *scheme.params();
    let mut warnings = Vec::new();
    for j in 0..p.n {
        // counts[i][pos][byte]
        let mut counts: Vec<Vec<[u64; 256]>> = Vec::new();
        for i in 1..=p.k {
            let mut per_pos: Vec<[u64; 256]> = Vec::new();
            for _ in 0..samples {
                let token = scheme.draw_randomness(rng);
                let bytes = scheme.query_gen(i, &token)?[j].to_bytes();
                if per_pos.len() < bytes.len() {
                    per_pos.resize(bytes.len(), [0; 256]);
                }
                for (pos, &b) in bytes.iter().enumerate() {
                    per_pos[pos][b as usize] += 1;
                }
            }
            counts.push(per_pos);
        }
        let positions = counts.iter().map(Vec::len).max().unwrap_or(0);
        for pos in 0..positions {
            let pooled: Vec<f64> =
                (0..256).map(|b| counts.iter().map(|c| c.get(pos).map_or(0, |x| x[b])).sum::<u64>() as f64).collect();
            let total: f64 = pooled.iter().sum();
            let support = pooled.iter().filter(|&&x| x > 0.0).count();
            if support < 2 {
                continue;
            }
            let df = ((support - 1) * (p.k - 1)) as f64;
            let mut stat = 0.0;
            for c in &counts {
                let row = c.get(pos);
                let row_total: f64 = row.map_or(0.0, |x| x.iter().sum::<u64>() as f64);
                for b in 0..256 {
                    if pooled[b] == 0.0 {
                        continue;
                    }
                    let expected = row_total * pooled[b] / total;
                    let observed = row.map_or(0.0, |x| x[b] as f64);
                    stat += (observed - expected).powi(2) / expected;
                }
            }
            // roughly a 5-sigma excursion of a chi-square with df degrees of freedom
            if stat > df + 5.0 * (2.0 * df).sqrt() {
                warnings.push(format!(
                    "db {} byte {pos}: chi-square {stat:.1} on {df} degrees of freedom across desired indices",
                    j + 1
                ));
            }
        }
    }
    Ok(warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreSource {
    /// Every single-block store over the field.
    Exhaustive,
    /// `count` uniformly random stores of `blocks` blocks.
    Random { count: usize, blocks: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessCounterexample {
    pub index: usize,
    pub token: RandomnessToken,
    pub store: Vec<Vec<u16>>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CorrectnessReport {
    pub scheme: String,
    pub params: SchemeParams,
    pub stores: usize,
    pub checks: u64,
    pub failures: u64,
    pub counterexample: Option<CorrectnessCounterexample>,
}

impl CorrectnessReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "correctness audit: {} k={} n={} field={}: {} checks over {} stores, {} failures: {}\n",
            self.scheme,
            self.params.k,
            self.params.n,
            self.params.field,
            self.checks,
            self.stores,
            self.failures,
            verdict(self.passed())
        );
        if let Some(c) = &self.counterexample {
            let _ =
                writeln!(s, "  counterexample: i={} token={:?} store={:?}: {}", c.index, c.token, c.store, c.detail);
        }
        s
    }

    pub fn to_kv(&self) -> String {
        format!(
            "correctness.scheme={}\ncorrectness.stores={}\ncorrectness.checks={}\ncorrectness.failures={}\ncorrectness.pass={}\n",
            self.scheme,
            self.stores,
            self.checks,
            self.failures,
            self.passed()
        )
    }
}

/// Decodes every desired index under every token (or, when the space is too
/// large, a handful of fresh tokens per store) and compares with the store.
pub fn audit_correctness(scheme: &dyn PirScheme, source: StoreSource) -> Result<CorrectnessReport> {
    let params = *scheme.params();
    let bl = scheme.block_len();
    let field = params.field;
    let stores: Vec<MessageStore> = match source {
        StoreSource::Exhaustive => {
            let digits = params.k * bl;
            let size = (field.order() as u128).checked_pow(digits as u32).unwrap_or(u128::MAX);
            if size > MAX_ENUMERATION {
                return Err(Error::SpaceTooLarge { size });
            }
            let mut flat = vec![0u16; digits];
            let mut all = Vec::with_capacity(size as usize);
            'outer: loop {
                all.push(MessageStore::new(field, flat.chunks(bl).map(<[u16]>::to_vec).collect())?);
                for d in flat.iter_mut().rev() {
                    *d += 1;
                    if *d < field.order() {
                        continue 'outer;
                    }
                    *d = 0;
                }
                break;
            }
            all
        }
        StoreSource::Random { count, blocks, seed } => {
            let mut rng = crate::session_rng(Some(seed));
            (0..count)
                .map(|_| MessageStore::random(field, params.k, blocks.max(1) * bl, bl, &mut rng))
                .collect::<Result<_>>()?
        }
    };

    let enumerated = match scheme.randomness_space() {
        Ok(space) => Some(space),
        Err(Error::SpaceTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut token_rng = crate::session_rng(Some(0x5eed));

    let mut report = CorrectnessReport {
        scheme: scheme.name(),
        params,
        stores: stores.len(),
        checks: 0,
        failures: 0,
        counterexample: None,
    };
    for store in &stores {
        let tokens = match &enumerated {
            Some(space) => space.clone(),
            None => (0..8).map(|_| scheme.draw_randomness(&mut token_rng)).collect(),
        };
        for token in &tokens {
            for i in 1..=params.k {
                report.checks += 1;
                let expected = store.message(i)?;
                let detail = match scheme.retrieve_blocks(i, store, token) {
                    Ok(r) if r.message == expected => continue,
                    Ok(r) => format!("decoded {:?}, expected {:?}", r.message, expected),
                    Err(e) => format!("retrieval failed: {e}"),
                };
                report.failures += 1;
                if report.counterexample.is_none() {
                    report.counterexample = Some(CorrectnessCounterexample {
                        index: i,
                        token: token.clone(),
                        store: store.messages().to_vec(),
                        detail,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Download cost: symbols downloaded over symbols of the desired message.
pub fn measure_cost(downloaded_symbols: usize, message_symbols: usize) -> Result<Rational> {
    if message_symbols == 0 {
        return Err(Error::InvalidParams("cost of an empty message is undefined".into()));
    }
    Ok(Rational::new(downloaded_symbols as i64, message_symbols as i64))
}

/// Optimal two-message cost `1 + 1/n`.
pub fn bound_two_message(n: usize) -> Result<Rational> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("need n >= 2, got {n}")));
    }
    Ok(Rational::one() + Rational::new(1, n as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsymptoticBound {
    pub k: usize,
    pub n: usize,
    /// `nk / (1 + (k - 1)(n - 1))`.
    pub finite: Rational,
    /// `n / (n - 1)`, the value as k grows without bound.
    pub limit: Rational,
    /// Set when `k = 2` and the finite formula exceeds the achievable
    /// two-message cost, i.e. it cannot be a lower bound there.
    pub exceeds_two_message_optimum: bool,
}

impl AsymptoticBound {
    pub fn flag(&self) -> &'static str {
        ASYMPTOTIC_FLAG
    }
}

pub fn bound_asymptotic(k: usize, n: usize) -> Result<AsymptoticBound> {
    if k < 2 || n < 2 {
        return Err(Error::InvalidParams(format!("need k >= 2 and n >= 2, got k={k} n={n}")));
    }
    let (ki, ni) = (k as i64, n as i64);
    let finite = Rational::new(ni * ki, 1 + (ki - 1) * (ni - 1));
    let limit = Rational::new(ni, ni - 1);
    let exceeds_two_message_optimum = k == 2 && finite > bound_two_message(n)?;
    Ok(AsymptoticBound { k, n, finite, limit, exceeds_two_message_optimum })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Proven optimum for two messages.
    TwoMessageOptimum,
    /// K -> infinity limit of the finite-K formula.
    AsymptoticLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub scheme: String,
    pub params: SchemeParams,
    pub measured_eta: Rational,
    pub bound_eta: Rational,
    pub bound_kind: BoundKind,
    pub gap: Rational,
}

impl CostReport {
    pub fn new(scheme: String, params: SchemeParams, measured_eta: Rational) -> Result<Self> {
        let (bound_eta, bound_kind) = if params.k == 2 {
            (bound_two_message(params.n)?, BoundKind::TwoMessageOptimum)
        } else {
            (bound_asymptotic(params.k, params.n)?.limit, BoundKind::AsymptoticLimit)
        };
        Ok(CostReport { scheme, params, measured_eta, bound_eta, bound_kind, gap: measured_eta - bound_eta })
    }

    /// Structural cost of one block, without running a retrieval.
    pub fn for_scheme(scheme: &dyn PirScheme) -> Result<Self> {
        let p = *scheme.params();
        let downloaded: usize = (1..=p.n).map(|j| scheme.equations_per_block(j)).sum();
        Self::new(scheme.name(), p, measure_cost(downloaded, scheme.block_len())?)
    }

    fn bound_label(&self) -> &'static str {
        match self.bound_kind {
            BoundKind::TwoMessageOptimum => "two-message optimum",
            BoundKind::AsymptoticLimit => ASYMPTOTIC_FLAG,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "cost: {} k={} n={}: measured eta = {}, bound = {} ({}), gap = {}\n",
            self.scheme,
            self.params.k,
            self.params.n,
            self.measured_eta,
            self.bound_eta,
            self.bound_label(),
            self.gap
        )
    }

    pub fn to_kv(&self) -> String {
        format!(
            "cost.scheme={}\ncost.measured_eta={}\ncost.bound_eta={}\ncost.bound_kind={}\ncost.gap={}\n",
            self.scheme,
            self.measured_eta,
            self.bound_eta,
            self.bound_label(),
            self.gap
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldId;
    use crate::schemes::{scheme_for, SchemeParams};

    fn r(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    fn scheme(id: SchemeId, k: usize, n: usize, f: FieldId) -> Box<dyn PirScheme> {
        scheme_for(SchemeParams::new(id, k, n, f).unwrap()).unwrap()
    }

    #[test]
    fn two_message_bounds() {
        assert_eq!(bound_two_message(2).unwrap(), r(3, 2));
        assert_eq!(bound_two_message(3).unwrap(), r(4, 3));
        assert_eq!(bound_two_message(10).unwrap(), r(11, 10));
        assert!(bound_two_message(1).is_err());
    }

    #[test]
    fn asymptotic_bounds() {
        assert_eq!(bound_asymptotic(5, 4).unwrap().limit, r(4, 3));
        assert_eq!(bound_asymptotic(3, 2).unwrap().finite, r(2, 1));
        let b = bound_asymptotic(2, 2).unwrap();
        assert_eq!(b.finite, r(2, 1));
        assert!(b.exceeds_two_message_optimum);
        assert_eq!(b.flag(), "asymptotic heuristic");
        assert!(bound_asymptotic(1, 2).is_err());
    }

    #[test]
    fn structural_costs() {
        let two = CostReport::for_scheme(scheme(SchemeId::TWO_OPT, 2, 2, FieldId::Gf256).as_ref()).unwrap();
        assert_eq!(two.measured_eta, r(3, 2));
        assert_eq!(two.gap, Rational::zero());
        let krep = CostReport::for_scheme(scheme(SchemeId::K_REP, 3, 4, FieldId::Gf256).as_ref()).unwrap();
        assert_eq!(krep.measured_eta, r(4, 3));
        let all = CostReport::for_scheme(scheme(SchemeId::ALL, 5, 3, FieldId::Gf256).as_ref()).unwrap();
        assert_eq!(all.measured_eta, r(5, 1));
        assert!(measure_cost(3, 0).is_err());
    }

    #[test]
    fn two_opt_n2_distribution() {
        let rep = audit_privacy(scheme(SchemeId::TWO_OPT, 2, 2, FieldId::Gf256).as_ref()).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.cyclic_support, Some(true));
        for per_index in &rep.distributions {
            for dist in per_index {
                assert_eq!(dist.len(), 2);
                assert!(dist.values().all(|&p| p == r(1, 2)));
            }
        }
    }

    #[test]
    fn correctness_exhaustive_small() {
        let rep =
            audit_correctness(scheme(SchemeId::TWO_OPT, 2, 2, FieldId::Prime(2)).as_ref(), StoreSource::Exhaustive)
                .unwrap();
        assert_eq!(rep.stores, 16);
        assert_eq!(rep.checks, 16 * 2 * 2);
        assert!(rep.passed());
        let rep = audit_correctness(scheme(SchemeId::K_REP, 2, 2, FieldId::Prime(2)).as_ref(), StoreSource::Exhaustive)
            .unwrap();
        assert_eq!(rep.checks, 4 * 4 * 2);
        assert!(rep.passed());
    }

    #[test]
    fn spot_check_quiet_for_private_scheme() {
        let s = scheme(SchemeId::K_REP, 3, 3, FieldId::Gf256);
        let mut rng = crate::session_rng(Some(3));
        assert!(spot_check_privacy(s.as_ref(), 400, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn spot_check_flags_leaky_queries() {
        // two-opt with a pinned shift is deterministic per index, so positions differ
        struct Leaky(Box<dyn PirScheme>);
        impl PirScheme for Leaky {
            fn params(&self) -> &SchemeParams {
                self.0.params()
            }
            fn block_len(&self) -> usize {
                self.0.block_len()
            }
            fn equations_per_block(&self, db: usize) -> usize {
                self.0.equations_per_block(db)
            }
            fn draw_randomness(&self, _: &mut dyn RngCore) -> RandomnessToken {
                RandomnessToken::Shift(crate::grid::ShiftToken(0))
            }
            fn randomness_space_size(&self) -> u128 {
                1
            }
            fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
                Ok(vec![RandomnessToken::Shift(crate::grid::ShiftToken(0))])
            }
            fn query_gen(&self, i: usize, t: &RandomnessToken) -> Result<Vec<Query>> {
                self.0.query_gen(i, t)
            }
            fn answer_block(&self, q: &QueryPayload, db: usize, b: &[&[u16]]) -> Result<Vec<u16>> {
                self.0.answer_block(q, db, b)
            }
            fn decode_block(&self, i: usize, t: &RandomnessToken, a: &[&[u16]]) -> Result<Vec<u16>> {
                self.0.decode_block(i, t, a)
            }
        }
        let leaky = Leaky(scheme(SchemeId::TWO_OPT, 2, 3, FieldId::Gf256));
        let mut rng = crate::session_rng(Some(3));
        assert!(!spot_check_privacy(&leaky, 50, &mut rng).unwrap().is_empty());
        let rep = audit_privacy(&leaky).unwrap();
        assert!(!rep.passed());
        assert!(rep.counterexample.is_some());
    }
}
