//! Cache-placement search.
//!
//! Every placement is scored by running the per-relay allocator on the files
//! it caches and evaluating the system objective. [`solve_exhaustive`] visits
//! each distinct placement once: for every per-relay count vector
//! ([`Partition`]) it enumerates the ways to split the holdings into blocks of
//! those sizes. Only the set of holdings on a relay matters, so permutations
//! within a block are never revisited.
//!
//! Winner selection is a total order shared by serial and parallel runs and
//! by the oracle: higher `sum_form` wins, exact ties go to the lexicographically
//! smallest assignment vector (relay id per holding, holdings in scenario
//! order).

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freshness::{system_freshness, ObjectiveValue};
use crate::model::{validate_scenario, validate_scheme, CacheScheme, HoldingRef, Scenario};
use crate::rate_alloc::{allocate, AllocationEntry, AllocationInput, RateAllocation};
use crate::scenario_io::ResultTable;

pub const DEFAULT_ASSIGNMENT_LIMIT: u128 = 10_000_000;

/// Candidates evaluated per hill-climbing step in sampled mode.
const SAMPLED_BATCH: usize = 32;
/// Non-improving batches tolerated before a random restart.
const SAMPLED_PATIENCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Upper bound on distinct assignments the exhaustive search will visit.
    pub limit: u128,
    /// Allow relays to cache nothing (per-relay counts ≥ 0 instead of ≥ 1).
    pub allow_empty_relay: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            limit: DEFAULT_ASSIGNMENT_LIMIT,
            allow_empty_relay: false,
            threads: None,
        }
    }
}

impl SearchConfig {
    fn min_per_relay(&self) -> usize {
        usize::from(!self.allow_empty_relay)
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(job()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Domain(format!("cannot build thread pool: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }
}

/// Number of holdings cached on each relay, in relay order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub counts: Vec<usize>,
}

impl Partition {
    /// Distinct assignments with these block sizes: `N! / Π c_k!`.
    pub fn assignment_count(&self) -> u128 {
        let mut remaining: u128 = self.counts.iter().map(|&c| c as u128).sum();
        let mut total: u128 = 1;
        for &c in &self.counts {
            total = total.saturating_mul(binomial(remaining, c as u128));
            remaining -= c as u128;
        }
        total
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub best_sum_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best_scheme: CacheScheme,
    /// One allocation per relay, in relay order.
    pub best_rates: Vec<RateAllocation>,
    pub objective: ObjectiveValue,
    pub trace: Vec<TracePoint>,
    pub evaluated_count: u64,
    pub table: ResultTable,
}

/// Count vectors `(c_1..c_K)` with `Σ c_k = n` and `1 ≤ c_k ≤ C_k`, in
/// lexicographic order.
pub fn enumerate_partitions(n: usize, capacities: &[usize]) -> impl Iterator<Item = Partition> {
    enumerate_partitions_with_min(n, capacities, 1)
}

/// As [`enumerate_partitions`] with a configurable lower bound per relay.
pub fn enumerate_partitions_with_min(
    n: usize,
    capacities: &[usize],
    min: usize,
) -> impl Iterator<Item = Partition> {
    fn rec(rest: usize, caps: &[usize], min: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        let Some((&cap, tail)) = caps.split_first() else {
            if rest == 0 {
                out.push(Partition { counts: prefix.clone() });
            }
            return;
        };
        let tail_max: usize = tail.iter().sum();
        let tail_min = min * tail.len();
        for c in min..=cap.min(rest) {
            let left = rest - c;
            if left < tail_min || left > tail_max {
                continue;
            }
            prefix.push(c);
            rec(left, tail, min, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if !capacities.is_empty() {
        rec(n, capacities, min, &mut Vec::with_capacity(capacities.len()), &mut out);
    }
    out.into_iter()
}

/// Calls `visit` with every index subset of size `r` from `0..n`, ascending
/// lexicographic order.
fn for_each_combination(n: usize, r: usize, visit: &mut dyn FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..r).rev().find(|&i| idx[i] != i + n - r) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Calls `visit` with every assignment (relay id per holding index) whose
/// per-relay counts equal `partition`.
pub(crate) fn for_each_assignment(n: usize, partition: &Partition, visit: &mut dyn FnMut(&[u32])) {
    fn rec(
        relay: usize,
        counts: &[usize],
        free: &[usize],
        assign: &mut [u32],
        visit: &mut dyn FnMut(&[u32]),
    ) {
        if relay == counts.len() {
            visit(assign);
            return;
        }
        let take = counts[relay];
        for_each_combination(free.len(), take, &mut |chosen| {
            let mut rest = Vec::with_capacity(free.len() - take);
            let mut c = chosen.iter().peekable();
            for (pos, &h) in free.iter().enumerate() {
                if c.peek() == Some(&&pos) {
                    c.next();
                    assign[h] = relay as u32 + 1;
                } else {
                    rest.push(h);
                }
            }
            rec(relay + 1, counts, &rest, assign, visit);
        });
    }
    let free: Vec<usize> = (0..n).collect();
    let mut assign = vec![0u32; n];
    rec(0, &partition.counts, &free, &mut assign, visit);
}

/// Allocates rates on every relay for `scheme` and scores it. Relays with
/// nothing cached get an empty allocation.
pub fn evaluate_scheme(scenario: &Scenario, scheme: &CacheScheme) -> Result<(ObjectiveValue, Vec<RateAllocation>)> {
    let report = validate_scheme(scenario, scheme);
    if !report.is_valid() {
        return Err(Error::InvalidScheme(report));
    }
    evaluate_valid(scenario, scheme)
}

fn evaluate_valid(scenario: &Scenario, scheme: &CacheScheme) -> Result<(ObjectiveValue, Vec<RateAllocation>)> {
    let holdings = scenario.holdings();
    let mut rates = Vec::with_capacity(scenario.relay_count());
    for relay in &scenario.relays {
        let entries: Vec<AllocationEntry> = holdings
            .iter()
            .filter(|h| scheme.relay_of(h.user, h.file) == Some(relay.id))
            .map(|h| AllocationEntry::new((h.user, h.file), h.user_rate, h.server_rate))
            .collect();
        if entries.is_empty() {
            rates.push(RateAllocation::empty());
        } else {
            rates.push(allocate(&AllocationInput::new(entries, relay.rate_budget))?);
        }
    }
    let objective = system_freshness(scenario, scheme, &rates)?;
    Ok((objective, rates))
}

pub(crate) fn scheme_from_assignment(holdings: &[HoldingRef], assign: &[u32]) -> CacheScheme {
    let mut scheme = CacheScheme::new();
    for (h, &relay) in holdings.iter().zip(assign) {
        scheme.assign(h.user, h.file, relay);
    }
    scheme
}

/// `Greater` when `a` should replace `b` as the incumbent.
fn compare_candidates(a_value: f64, a_assign: &[u32], b_value: f64, b_assign: &[u32]) -> Ordering {
    a_value
        .partial_cmp(&b_value)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b_assign.cmp(a_assign))
}

#[derive(Debug, Clone)]
struct Incumbent {
    value: f64,
    assign: Vec<u32>,
}

impl Incumbent {
    fn offer(slot: &mut Option<Incumbent>, value: f64, assign: &[u32]) {
        let replace = match slot {
            None => true,
            Some(cur) => compare_candidates(value, assign, cur.value, &cur.assign) == Ordering::Greater,
        };
        if replace {
            *slot = Some(Incumbent { value, assign: assign.to_vec() });
        }
    }
}

/// Builds the trace and incumbent incrementally over evaluations in order.
#[derive(Debug, Default)]
struct Tracker {
    evaluated: u64,
    best: Option<Incumbent>,
    trace: Vec<TracePoint>,
}

impl Tracker {
    fn record(&mut self, value: f64, assign: &[u32]) {
        self.evaluated += 1;
        let improves = self.best.as_ref().is_none_or(|b| value > b.value);
        if improves {
            self.trace.push(TracePoint { iteration: self.evaluated, best_sum_form: value });
        }
        Incumbent::offer(&mut self.best, value, assign);
    }
}

fn finish(scenario: &Scenario, holdings: &[HoldingRef], tracker: Tracker) -> Result<SolveResult> {
    let best = tracker
        .best
        .ok_or_else(|| Error::Infeasible("no feasible cache scheme was evaluated".into()))?;
    let scheme = scheme_from_assignment(holdings, &best.assign);
    let (objective, rates) = evaluate_valid(scenario, &scheme)?;
    debug_assert_eq!(objective.sum_form, best.value);
    let table = ResultTable::build(scenario, &scheme, &rates, objective)?;
    Ok(SolveResult {
        best_scheme: scheme,
        best_rates: rates,
        objective,
        trace: tracker.trace,
        evaluated_count: tracker.evaluated,
        table,
    })
}

fn checked_scenario(scenario: &Scenario) -> Result<()> {
    let report = validate_scenario(scenario);
    if report.is_valid() {
        Ok(())
    } else {
        Err(report.into_scenario_error())
    }
}

fn feasible_partitions(scenario: &Scenario, config: &SearchConfig) -> Result<Vec<Partition>> {
    let caps: Vec<usize> = scenario.relays.iter().map(|r| r.capacity).collect();
    let parts: Vec<Partition> =
        enumerate_partitions_with_min(scenario.file_count(), &caps, config.min_per_relay()).collect();
    if parts.is_empty() {
        return Err(Error::Infeasible(format!(
            "no way to place {} files on relays with capacities {caps:?}{}",
            scenario.file_count(),
            if config.allow_empty_relay { "" } else { " with every relay non-empty" }
        )));
    }
    Ok(parts)
}

/// Total distinct assignments the exhaustive search would visit.
pub fn exhaustive_assignment_count(scenario: &Scenario, config: &SearchConfig) -> Result<u128> {
    let parts = feasible_partitions(scenario, config)?;
    Ok(parts
        .iter()
        .fold(0u128, |acc, p| acc.saturating_add(p.assignment_count())))
}

struct PartitionOutcome {
    evaluated: u64,
    best: Option<Incumbent>,
    /// Local improvements: (1-based index within the partition, value).
    improvements: Vec<(u64, f64)>,
    error: Option<Error>,
}

fn search_partition(scenario: &Scenario, holdings: &[HoldingRef], partition: &Partition) -> PartitionOutcome {
    let mut out = PartitionOutcome { evaluated: 0, best: None, improvements: Vec::new(), error: None };
    for_each_assignment(holdings.len(), partition, &mut |assign| {
        if out.error.is_some() {
            return;
        }
        let scheme = scheme_from_assignment(holdings, assign);
        match evaluate_valid(scenario, &scheme) {
            Ok((objective, _)) => {
                out.evaluated += 1;
                let value = objective.sum_form;
                if out.best.as_ref().is_none_or(|b| value > b.value) {
                    out.improvements.push((out.evaluated, value));
                }
                Incumbent::offer(&mut out.best, value, assign);
            }
            Err(e) => out.error = Some(e),
        }
    });
    out
}

/// Visits every distinct feasible placement and returns the best one.
pub fn solve_exhaustive(scenario: &Scenario, config: &SearchConfig) -> Result<SolveResult> {
    checked_scenario(scenario)?;
    let parts = feasible_partitions(scenario, config)?;
    let count = parts
        .iter()
        .fold(0u128, |acc, p| acc.saturating_add(p.assignment_count()));
    if count > config.limit {
        return Err(Error::SearchBudget { count, limit: config.limit });
    }

    let holdings = scenario.holdings();
    let outcomes: Vec<PartitionOutcome> = config.run(|| {
        parts
            .par_iter()
            .map(|p| search_partition(scenario, &holdings, p))
            .collect()
    })?;

    // Splice per-partition traces back into serial evaluation order: a global
    // improvement is always a local one, and a local one is global iff it
    // beats everything before it.
    let mut tracker = Tracker::default();
    let mut running = f64::NEG_INFINITY;
    for outcome in outcomes {
        if let Some(e) = outcome.error {
            return Err(e);
        }
        for (local, value) in outcome.improvements {
            if value > running {
                tracker.trace.push(TracePoint { iteration: tracker.evaluated + local, best_sum_form: value });
                running = value;
            }
        }
        tracker.evaluated += outcome.evaluated;
        if let Some(b) = outcome.best {
            Incumbent::offer(&mut tracker.best, b.value, &b.assign);
        }
    }
    finish(scenario, &holdings, tracker)
}

struct Sampler<'a> {
    caps: Vec<usize>,
    min: usize,
    holdings: &'a [HoldingRef],
}

impl Sampler<'_> {
    fn random_assignment(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let n = self.holdings.len();
        let k = self.caps.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut loads = vec![0usize; k];
        let mut assign = vec![0u32; n];
        let mut next = order.into_iter();
        // seed the lower bound first
        for (relay, load) in loads.iter_mut().enumerate() {
            for _ in 0..self.min {
                let h = next.next().expect("partition exists, so N ≥ K·min");
                assign[h] = relay as u32 + 1;
                *load += 1;
            }
        }
        for h in next {
            let open: Vec<usize> = (0..k).filter(|&r| loads[r] < self.caps[r]).collect();
            let relay = open[rng.random_range(0..open.len())];
            assign[h] = relay as u32 + 1;
            loads[relay] += 1;
        }
        assign
    }

    /// A single-holding move to another relay or a swap of two holdings on
    /// different relays. `None` when no feasible neighbor was drawn.
    fn neighbor(&self, current: &[u32], rng: &mut ChaCha8Rng) -> Option<Vec<u32>> {
        let n = current.len();
        let k = self.caps.len();
        if k < 2 {
            return None;
        }
        let mut loads = vec![0usize; k];
        for &r in current {
            loads[r as usize - 1] += 1;
        }
        for _ in 0..16 {
            let h = rng.random_range(0..n);
            let from = current[h] as usize - 1;
            let mut to = rng.random_range(0..k - 1);
            if to >= from {
                to += 1;
            }
            let can_move = loads[to] < self.caps[to] && loads[from] > self.min;
            let partners: Vec<usize> = (0..n).filter(|&j| current[j] as usize - 1 == to).collect();
            let mut cand = current.to_vec();
            if can_move && (partners.is_empty() || rng.random_bool(0.5)) {
                cand[h] = to as u32 + 1;
                return Some(cand);
            }
            if !partners.is_empty() {
                let j = partners[rng.random_range(0..partners.len())];
                cand.swap(h, j);
                return Some(cand);
            }
        }
        None
    }
}

/// Random restarts plus first-best hill climbing over single-holding moves
/// and swaps, for exactly `budget` evaluations. Candidate generation is serial
/// and seeded; only scoring runs in parallel, so results do not depend on the
/// thread count.
pub fn solve_sampled(scenario: &Scenario, budget: u64, seed: u64, config: &SearchConfig) -> Result<SolveResult> {
    if budget == 0 {
        return Err(Error::Domain("sampling budget must be ≥ 1".into()));
    }
    checked_scenario(scenario)?;
    feasible_partitions(scenario, config)?;

    let holdings = scenario.holdings();
    let sampler = Sampler {
        caps: scenario.relays.iter().map(|r| r.capacity).collect(),
        min: config.min_per_relay(),
        holdings: &holdings,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = Tracker::default();

    let score = |batch: &[Vec<u32>]| -> Result<Vec<f64>> {
        config.run(|| {
            batch
                .par_iter()
                .map(|a| evaluate_valid(scenario, &scheme_from_assignment(&holdings, a)).map(|(o, _)| o.sum_form))
                .collect::<Result<Vec<f64>>>()
        })?
    };

    let mut current: Option<(Vec<u32>, f64)> = None;
    let mut stale = 0usize;
    while tracker.evaluated < budget {
        let remaining = (budget - tracker.evaluated) as usize;
        let restart = current.is_none() || stale >= SAMPLED_PATIENCE;
        let batch: Vec<Vec<u32>> = if restart {
            vec![sampler.random_assignment(&mut rng)]
        } else {
            let (cur, _) = current.as_ref().expect("not a restart");
            (0..SAMPLED_BATCH.min(remaining))
                .map(|_| sampler.neighbor(cur, &mut rng).unwrap_or_else(|| sampler.random_assignment(&mut rng)))
                .collect()
        };
        let values = score(&batch)?;
        for (a, &v) in batch.iter().zip(&values) {
            tracker.record(v, a);
        }

        if restart {
            current = Some((batch[0].clone(), values[0]));
            stale = 0;
            continue;
        }
        let cur_value = current.as_ref().map(|c| c.1).unwrap_or(f64::NEG_INFINITY);
        let step = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > cur_value)
            .fold(None::<(usize, f64)>, |acc, (i, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        match step {
            Some((i, v)) => {
                current = Some((batch[i].clone(), v));
                stale = 0;
            }
            None => stale += 1,
        }
    }
    finish(scenario, &holdings, tracker)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{table1, table2_scheme};

    fn counts(parts: impl Iterator<Item = Partition>) -> Vec<Vec<usize>> {
        parts.map(|p| p.counts).collect()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(counts(enumerate_partitions(3, &[2, 2])), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(enumerate_partitions(10, &[6, 5, 4]).count(), 17);
        assert_eq!(enumerate_partitions(5, &[2, 2]).count(), 0);
        assert_eq!(
            counts(enumerate_partitions_with_min(2, &[2, 2], 0)),
            vec![vec![0, 2], vec![1, 1], vec![2, 0]]
        );
    }

    #[test]
    fn partitions_match_brute_force_count() {
        // every vector in the capacity box, filtered
        let caps = [6usize, 5, 4];
        let mut brute = Vec::new();
        for a in 1..=caps[0] {
            for b in 1..=caps[1] {
                for c in 1..=caps[2] {
                    if a + b + c == 10 {
                        brute.push(vec![a, b, c]);
                    }
                }
            }
        }
        assert_eq!(counts(enumerate_partitions(10, &caps)), brute);
    }

    #[test]
    fn assignment_enumeration_is_complete_and_distinct() {
        let p = Partition { counts: vec![2, 1, 2] };
        let mut seen = std::collections::BTreeSet::new();
        for_each_assignment(5, &p, &mut |a| {
            let mut loads = [0; 3];
            for &r in a {
                loads[r as usize - 1] += 1;
            }
            assert_eq!(loads, [2, 1, 2]);
            assert!(seen.insert(a.to_vec()));
        });
        assert_eq!(seen.len() as u128, p.assignment_count());
        assert_eq!(p.assignment_count(), 30);
    }

    #[test]
    fn table2_scheme_evaluation() {
        let (obj, rates) = evaluate_scheme(&table1(), &table2_scheme()).unwrap();
        assert!((obj.sum_form - 0.5319).abs() < 5e-4);
        for (a, g) in rates.iter().zip([12.0, 10.0, 8.0]) {
            assert!((a.total() - g).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_budgets_score_zero() {
        let mut s = table1();
        for r in &mut s.relays {
            r.rate_budget = 0.0;
        }
        let (obj, _) = evaluate_scheme(&s, &table2_scheme()).unwrap();
        assert_eq!(obj.sum_form, 0.0);
    }

    #[test]
    fn invalid_scheme_is_rejected() {
        let mut scheme = table2_scheme();
        scheme.assignment.remove(&(1, 1));
        assert!(matches!(evaluate_scheme(&table1(), &scheme), Err(Error::InvalidScheme(_))));
    }

    #[test]
    fn table1_exhaustive_count() {
        let n = exhaustive_assignment_count(&table1(), &SearchConfig::default()).unwrap();
        assert_eq!(n, 40110);
    }

    #[test]
    fn limit_is_enforced() {
        let config = SearchConfig { limit: 1000, ..SearchConfig::default() };
        match solve_exhaustive(&table1(), &config) {
            Err(Error::SearchBudget { count, limit }) => {
                assert_eq!(count, 40110);
                assert_eq!(limit, 1000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_budget_one() {
        let r = solve_sampled(&table1(), 1, 3, &SearchConfig::default()).unwrap();
        assert_eq!(r.evaluated_count, 1);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn sampled_is_deterministic() {
        let a = solve_sampled(&table1(), 500, 11, &SearchConfig::default()).unwrap();
        let b = solve_sampled(&table1(), 500, 11, &SearchConfig { threads: Some(1), ..Default::default() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluated_count, 500);
    }
}
