//! Per-relay update-rate allocation.
//!
//! A relay caching `T` files with a total request-rate budget `G` chooses
//! rates `λ_j ≥ 0`, `Σ λ_j ≤ G`, to maximize `Σ μ_j λ_j / (λ_j + s_j)` where
//! `s_j` is the server rate and `μ_j = u_j / (u_j + s_j)` the user-side factor.
//! The objective is separable and concave, so the optimum is a water-filling
//! solution: with `w_j = √(u_j s_j / (u_j + s_j))`,
//!
//! ```text
//! λ_j = max{ (β/α)·w_j − s_j, 0 },  α = Σ_active w_j,  β = G + Σ_active s_j
//! ```
//!
//! and every active file has the same marginal gain `δ = (α/β)²`.
//! [`allocate`] finds the active set in one pass over files sorted by
//! `μ_j / s_j`, dropping those whose zero-rate marginal gain does not exceed
//! the current water level.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(user_id, file_id)`.
pub type HoldingKey = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub key: HoldingKey,
    pub user_rate: f64,
    pub server_rate: f64,
}

impl AllocationEntry {
    pub fn new(key: HoldingKey, user_rate: f64, server_rate: f64) -> Self {
        Self { key, user_rate, server_rate }
    }

    /// `μ = u / (u + s)`, the freshness factor contributed by the user side.
    pub fn user_factor(&self) -> f64 {
        self.user_rate / (self.user_rate + self.server_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationInput {
    pub entries: Vec<AllocationEntry>,
    pub rate_budget: f64,
}

impl AllocationInput {
    pub fn new(entries: Vec<AllocationEntry>, rate_budget: f64) -> Self {
        Self { entries, rate_budget }
    }

    fn check(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Domain("allocation input has no entries".into()));
        }
        if !self.rate_budget.is_finite() || self.rate_budget < 0.0 {
            return Err(Error::Domain(format!(
                "rate budget must be finite and ≥ 0, got {}",
                self.rate_budget
            )));
        }
        for e in &self.entries {
            weight(e.user_rate, e.server_rate)?;
        }
        let keys: BTreeSet<_> = self.entries.iter().map(|e| e.key).collect();
        if keys.len() != self.entries.len() {
            return Err(Error::Domain("duplicate keys in allocation input".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDiagnostics {
    /// Sum of weights over the active set.
    pub alpha: f64,
    /// Budget plus the server rates of the active set.
    pub beta: f64,
    /// Common marginal gain `(α/β)²` of the active set.
    pub water_level: f64,
    #[serde(with = "key_set")]
    pub dropped: BTreeSet<HoldingKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    #[serde(with = "key_map")]
    pub rates: BTreeMap<HoldingKey, f64>,
    pub diagnostics: Option<AllocationDiagnostics>,
}

impl RateAllocation {
    /// Allocation for a relay with nothing cached.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Wraps externally supplied rates; no diagnostics are attached.
    pub fn from_rates(rates: BTreeMap<HoldingKey, f64>) -> Self {
        Self { rates, diagnostics: None }
    }

    pub fn rate(&self, user: u32, file: u32) -> Option<f64> {
        self.rates.get(&(user, file)).copied()
    }

    pub fn total(&self) -> f64 {
        self.rates.values().sum()
    }

    pub fn is_dropped(&self, key: &HoldingKey) -> bool {
        match &self.diagnostics {
            Some(d) => d.dropped.contains(key),
            None => self.rates.get(key).is_some_and(|&r| r == 0.0),
        }
    }
}

/// `√(u s / (u + s))`.
pub fn weight(user_rate: f64, server_rate: f64) -> Result<f64> {
    if !(user_rate.is_finite() && server_rate.is_finite()) || user_rate <= 0.0 || server_rate <= 0.0 {
        return Err(Error::Domain(format!(
            "rates must be finite and > 0, got user {user_rate}, server {server_rate}"
        )));
    }
    Ok((user_rate * server_rate / (user_rate + server_rate)).sqrt())
}

/// `Σ μ_j λ_j / (λ_j + s_j)` for the given rates, in input order.
pub fn allocation_objective(input: &AllocationInput, rates: &[f64]) -> f64 {
    input
        .entries
        .iter()
        .zip(rates)
        .map(|(e, &r)| e.user_factor() * r / (r + e.server_rate))
        .sum()
}

struct Ranked {
    entry: AllocationEntry,
    ratio: f64,
    weight: f64,
}

/// Optimal water-filling rates for one relay.
///
/// The result is independent of entry order: entries are ranked by
/// `(μ/s, user_id, file_id)` before any arithmetic.
pub fn allocate(input: &AllocationInput) -> Result<RateAllocation> {
    input.check()?;
    let budget = input.rate_budget;

    let mut ranked: Vec<Ranked> = input
        .entries
        .iter()
        .map(|&entry| Ranked {
            entry,
            ratio: entry.user_factor() / entry.server_rate,
            weight: weight(entry.user_rate, entry.server_rate).expect("checked above"),
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.ratio
            .partial_cmp(&b.ratio)
            .unwrap_or(Ordering::Equal)
            .then(a.entry.key.cmp(&b.entry.key))
    });

    let mut rates = BTreeMap::new();
    let mut dropped = BTreeSet::new();

    // a zero budget leaves nothing to fill
    if budget == 0.0 {
        for r in &ranked {
            rates.insert(r.entry.key, 0.0);
            dropped.insert(r.entry.key);
        }
        return Ok(RateAllocation {
            rates,
            diagnostics: Some(AllocationDiagnostics { alpha: 0.0, beta: 0.0, water_level: 0.0, dropped }),
        });
    }

    let mut alpha: f64 = ranked.iter().map(|r| r.weight).sum();
    let mut beta: f64 = budget + ranked.iter().map(|r| r.entry.server_rate).sum::<f64>();

    for r in &ranked {
        let level = (alpha / beta).powi(2);
        if r.ratio <= level {
            rates.insert(r.entry.key, 0.0);
            dropped.insert(r.entry.key);
            alpha -= r.weight;
            beta -= r.entry.server_rate;
        } else {
            let rate = (beta / alpha * r.weight - r.entry.server_rate).max(0.0);
            rates.insert(r.entry.key, rate);
        }
    }

    let water_level = (alpha / beta).powi(2);
    debug_assert!(
        ranked
            .iter()
            .all(|r| dropped.contains(&r.entry.key) == (r.ratio <= water_level)),
        "drop set inconsistent with final water level"
    );

    Ok(RateAllocation {
        rates,
        diagnostics: Some(AllocationDiagnostics { alpha, beta, water_level, dropped }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// Max over active entries of `|−μ s/(λ+s)² + δ|`.
    pub stationarity_residual: f64,
    /// `|Σ λ − G| · δ`.
    pub budget_slackness_residual: f64,
    /// Max over entries of `θ_j · λ_j` with `θ_j = δ − μ s/(λ+s)²`.
    pub rate_slackness_residual: f64,
    /// Max over zero-rate entries of `max(0, −θ_j)`.
    pub dual_feasibility_residual: f64,
    /// Negative rates or budget overrun.
    pub primal_residual: f64,
    pub water_level: f64,
    pub tolerance: f64,
    pub satisfied: bool,
}

/// Evaluates the Karush-Kuhn-Tucker conditions of the per-relay problem at
/// `allocation`, recomputing the multiplier from the allocation's own active
/// set rather than trusting its diagnostics.
pub fn kkt_check(input: &AllocationInput, allocation: &RateAllocation, tolerance: f64) -> Result<KktReport> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tolerance}")));
    }
    let input_keys: BTreeSet<_> = input.entries.iter().map(|e| e.key).collect();
    let alloc_keys: BTreeSet<_> = allocation.rates.keys().copied().collect();
    if input_keys != alloc_keys {
        let missing: Vec<_> = input_keys.difference(&alloc_keys).collect();
        let extra: Vec<_> = alloc_keys.difference(&input_keys).collect();
        return Err(Error::Inconsistent(format!(
            "allocation keys do not match input: missing {missing:?}, extra {extra:?}"
        )));
    }

    let rate_of = |e: &AllocationEntry| allocation.rates[&e.key];
    let active: Vec<&AllocationEntry> = input.entries.iter().filter(|e| rate_of(e) > 0.0).collect();

    let water_level = if active.is_empty() {
        // smallest multiplier for which every zero rate is dual feasible
        input
            .entries
            .iter()
            .map(|e| e.user_factor() / e.server_rate)
            .fold(0.0, f64::max)
    } else {
        let alpha: f64 = active
            .iter()
            .map(|e| weight(e.user_rate, e.server_rate))
            .sum::<Result<f64>>()?;
        let beta = input.rate_budget + active.iter().map(|e| e.server_rate).sum::<f64>();
        (alpha / beta).powi(2)
    };

    let marginal = |e: &AllocationEntry, rate: f64| {
        e.user_factor() * e.server_rate / (rate + e.server_rate).powi(2)
    };

    let mut stationarity: f64 = 0.0;
    let mut rate_slack: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut primal: f64 = 0.0;
    for e in &input.entries {
        let rate = rate_of(e);
        let theta = water_level - marginal(e, rate);
        if rate > 0.0 {
            stationarity = stationarity.max(theta.abs());
        } else {
            dual = dual.max(-theta);
        }
        rate_slack = rate_slack.max((theta * rate).abs());
        primal = primal.max(-rate);
    }
    let total: f64 = input.entries.iter().map(rate_of).sum();
    primal = primal.max(total - input.rate_budget);
    let budget_slack = (total - input.rate_budget).abs() * water_level;

    let satisfied = [stationarity, budget_slack, rate_slack, dual, primal]
        .iter()
        .all(|&r| r <= tolerance);

    Ok(KktReport {
        stationarity_residual: stationarity,
        budget_slackness_residual: budget_slack,
        rate_slackness_residual: rate_slack,
        dual_feasibility_residual: dual,
        primal_residual: primal,
        water_level,
        tolerance,
        satisfied,
    })
}

mod key_map {
    use super::HoldingKey;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Row {
        user: u32,
        file: u32,
        rate: f64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<HoldingKey, f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|(&(user, file), &rate)| Row { user, file, rate })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<HoldingKey, f64>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| ((r.user, r.file), r.rate)).collect())
    }
}

mod key_set {
    use super::HoldingKey;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeSet;

    pub fn serialize<S: Serializer>(set: &BTreeSet<HoldingKey>, s: S) -> Result<S::Ok, S::Error> {
        set.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<HoldingKey>, D::Error> {
        Ok(Vec::<HoldingKey>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relay3() -> AllocationInput {
        AllocationInput::new(
            vec![
                AllocationEntry::new((3, 7), 10.0, 6.0),
                AllocationEntry::new((4, 10), 6.0, 6.0),
            ],
            8.0,
        )
    }

    #[test]
    fn weight_examples() {
        assert!((weight(10.0, 6.0).unwrap() - 3.75f64.sqrt()).abs() < 1e-12);
        assert!((weight(6.0, 6.0).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        for r in [0.1, 1.0, 7.5, 1e4] {
            assert!((weight(r, r).unwrap() - (r / 2.0).sqrt()).abs() < 1e-12);
        }
        assert!((weight(3.0, 11.0).unwrap() - weight(11.0, 3.0).unwrap()).abs() < 1e-15);
        assert!(weight(0.0, 1.0).is_err());
        assert!(weight(1.0, -2.0).is_err());
        assert!(weight(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn relay3_matches_reported_rates() {
        let a = allocate(&relay3()).unwrap();
        assert!((a.rate(3, 7).unwrap() - 4.5573).abs() < 5e-4);
        assert!((a.rate(4, 10).unwrap() - 3.4427).abs() < 5e-4);
        assert!((a.total() - 8.0).abs() < 1e-9);
        assert!(a.diagnostics.unwrap().dropped.is_empty());
    }

    #[test]
    fn single_entry_takes_full_budget() {
        for (u, s) in [(1.0, 1.0), (0.3, 9.0), (12.0, 0.5)] {
            let a = allocate(&AllocationInput::new(vec![AllocationEntry::new((1, 1), u, s)], 5.0)).unwrap();
            assert!((a.rate(1, 1).unwrap() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_entry_is_dropped() {
        let input = AllocationInput::new(
            vec![
                AllocationEntry::new((1, 1), 10.0, 1.0),
                AllocationEntry::new((1, 2), 0.1, 10.0),
            ],
            1.0,
        );
        let a = allocate(&input).unwrap();
        assert!((a.rate(1, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(a.rate(1, 2), Some(0.0));
        assert!(a.diagnostics.as_ref().unwrap().dropped.contains(&(1, 2)));
        assert!(kkt_check(&input, &a, 1e-6).unwrap().satisfied);
    }

    #[test]
    fn zero_budget_drops_everything() {
        let mut input = relay3();
        input.rate_budget = 0.0;
        let a = allocate(&input).unwrap();
        assert!(a.rates.values().all(|&r| r == 0.0));
        assert_eq!(a.diagnostics.as_ref().unwrap().dropped.len(), 2);
        assert!(kkt_check(&input, &a, 1e-6).unwrap().satisfied);
    }

    #[test]
    fn bad_inputs_are_domain_errors() {
        let mut input = relay3();
        input.rate_budget = -1.0;
        assert!(matches!(allocate(&input), Err(Error::Domain(_))));
        assert!(matches!(allocate(&AllocationInput::new(vec![], 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn kkt_holds_at_the_closed_form() {
        let input = relay3();
        let a = allocate(&input).unwrap();
        let report = kkt_check(&input, &a, 1e-6).unwrap();
        assert!(report.satisfied, "{report:?}");
        assert!((report.water_level - a.diagnostics.unwrap().water_level).abs() < 1e-12);
    }

    #[test]
    fn kkt_detects_perturbation() {
        let input = relay3();
        let mut a = allocate(&input).unwrap();
        *a.rates.get_mut(&(3, 7)).unwrap() += 0.1;
        let report = kkt_check(&input, &a, 1e-6).unwrap();
        assert!(!report.satisfied);
        assert!(report.stationarity_residual > 1e-6);
    }

    #[test]
    fn kkt_rejects_mismatched_keys() {
        let input = relay3();
        let mut a = allocate(&input).unwrap();
        a.rates.insert((9, 9), 0.0);
        assert!(matches!(kkt_check(&input, &a, 1e-6), Err(Error::Inconsistent(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn input_strategy(max_len: usize) -> impl Strategy<Value = AllocationInput> {
            (
                proptest::collection::vec((0.5f64..12.0, 0.5f64..12.0), 1..=max_len),
                0.0f64..20.0,
            )
                .prop_map(|(rates, g)| {
                    AllocationInput::new(
                        rates
                            .into_iter()
                            .enumerate()
                            .map(|(i, (u, s))| AllocationEntry::new((1, i as u32 + 1), u, s))
                            .collect(),
                        g,
                    )
                })
        }

        proptest! {
            #[test]
            fn budget_is_spent_exactly(input in input_strategy(8)) {
                let a = allocate(&input).unwrap();
                prop_assert!(a.rates.values().all(|&r| r >= 0.0));
                if input.rate_budget > 0.0 {
                    prop_assert!((a.total() - input.rate_budget).abs() < 1e-9);
                }
            }

            #[test]
            fn active_marginals_are_equal(input in input_strategy(8)) {
                let a = allocate(&input).unwrap();
                let d = a.diagnostics.clone().unwrap();
                for e in &input.entries {
                    let r = a.rates[&e.key];
                    let m = e.user_factor() * e.server_rate / (r + e.server_rate).powi(2);
                    if d.dropped.contains(&e.key) {
                        prop_assert_eq!(r, 0.0);
                        prop_assert!(e.user_factor() / e.server_rate <= d.water_level);
                    } else {
                        prop_assert!((m - d.water_level).abs() < 1e-9);
                        prop_assert!(e.user_factor() / e.server_rate > d.water_level);
                    }
                }
            }

            #[test]
            fn order_does_not_matter(input in input_strategy(8), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = input.clone();
                shuffled.entries.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(allocate(&input).unwrap(), allocate(&shuffled).unwrap());
            }

            #[test]
            fn closed_form_satisfies_kkt(input in input_strategy(8)) {
                let a = allocate(&input).unwrap();
                let report = kkt_check(&input, &a, 1e-6).unwrap();
                prop_assert!(report.satisfied, "{:?}", report);
            }
        }
    }
}
