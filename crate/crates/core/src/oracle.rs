//! Brute-force reference solvers.
//!
//! These share no enumeration or allocation code with [`crate::search`] or
//! [`crate::rate_alloc::allocate`]. They reuse only the freshness formulas and,
//! for placements, the closed-form allocator as the per-relay scorer.

use crate::error::{Error, Result};
use crate::freshness::system_freshness;
use crate::model::{validate_scenario, CacheScheme, Scenario};
use crate::rate_alloc::{allocate, AllocationEntry, AllocationInput, RateAllocation};
use crate::scenario_io::ResultTable;
use crate::search::{SolveResult, TracePoint};

/// Largest entry count [`grid_allocate`] accepts.
pub const GRID_MAX_ENTRIES: usize = 4;
/// Largest number of feasible placements [`brute_force_assignments`] will score.
pub const BRUTE_FORCE_MAX_ASSIGNMENTS: u64 = 100_000;
/// Largest raw odometer space (`K^N`) [`brute_force_assignments`] will walk.
const BRUTE_FORCE_MAX_STATES: u128 = 10_000_000;

/// Best point of the budget simplex `Σ λ_j = G` on the grid `λ_j = G·i_j/steps`.
///
/// The objective is separable, so the grid maximum is found exactly by a
/// max-plus convolution over entries rather than by listing every grid point.
/// Returns the rates (in input order) and their objective.
pub fn grid_allocate(input: &AllocationInput, steps: usize) -> Result<(Vec<f64>, f64)> {
    let t = input.entries.len();
    if t == 0 {
        return Err(Error::Domain("grid oracle needs at least one entry".into()));
    }
    if t > GRID_MAX_ENTRIES {
        return Err(Error::OracleScale(format!(
            "grid oracle handles at most {GRID_MAX_ENTRIES} entries, got {t}"
        )));
    }
    if steps == 0 {
        return Err(Error::Domain("grid needs at least one step".into()));
    }
    let g = input.rate_budget;
    if !g.is_finite() || g < 0.0 {
        return Err(Error::Domain(format!("rate budget must be finite and ≥ 0, got {g}")));
    }

    let gain = |e: &AllocationEntry, units: usize| {
        let rate = g * units as f64 / steps as f64;
        let mu = e.user_rate / (e.user_rate + e.server_rate);
        mu * rate / (rate + e.server_rate)
    };

    // best[j][s]: best value of entries 0..=j using exactly s units
    // pick[j][s]: units given to entry j at that optimum
    let mut best = vec![vec![f64::NEG_INFINITY; steps + 1]; t];
    let mut pick = vec![vec![0usize; steps + 1]; t];
    for s in 0..=steps {
        best[0][s] = gain(&input.entries[0], s);
        pick[0][s] = s;
    }
    for j in 1..t {
        let table: Vec<f64> = (0..=steps).map(|u| gain(&input.entries[j], u)).collect();
        for s in 0..=steps {
            for u in 0..=s {
                let v = best[j - 1][s - u] + table[u];
                if v > best[j][s] {
                    best[j][s] = v;
                    pick[j][s] = u;
                }
            }
        }
    }

    let mut units = vec![0usize; t];
    let mut left = steps;
    for j in (0..t).rev() {
        units[j] = pick[j][left];
        left -= units[j];
    }
    let rates: Vec<f64> = units.iter().map(|&u| g * u as f64 / steps as f64).collect();
    let objective = input
        .entries
        .iter()
        .zip(&rates)
        .map(|(e, &r)| e.user_rate / (e.user_rate + e.server_rate) * r / (r + e.server_rate))
        .sum();
    Ok((rates, objective))
}

/// Scores every feasible placement (every relay non-empty and within
/// capacity) by walking all `K^N` relay vectors in lexicographic order.
/// The first maximum wins.
pub fn brute_force_assignments(scenario: &Scenario) -> Result<SolveResult> {
    let report = validate_scenario(scenario);
    if !report.is_valid() {
        return Err(report.into_scenario_error());
    }

    // holdings in scenario order: user-major, then listed order
    let mut holdings = Vec::new();
    for u in &scenario.users {
        for h in &u.holdings {
            let server_rate = scenario.files[h.file as usize - 1].server_rate;
            holdings.push((u.id, h.file, h.user_rate, server_rate));
        }
    }
    let n = holdings.len();
    let k = scenario.relays.len();

    let states = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if states > BRUTE_FORCE_MAX_STATES {
        return Err(Error::OracleScale(format!("{k}^{n} relay vectors exceed {BRUTE_FORCE_MAX_STATES}")));
    }

    let mut digits = vec![0usize; n];
    let mut evaluated: u64 = 0;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut trace = Vec::new();
    loop {
        let mut loads = vec![0usize; k];
        for &d in &digits {
            loads[d] += 1;
        }
        let feasible = loads
            .iter()
            .zip(&scenario.relays)
            .all(|(&l, r)| l >= 1 && l <= r.capacity);
        if feasible {
            evaluated += 1;
            if evaluated > BRUTE_FORCE_MAX_ASSIGNMENTS {
                return Err(Error::OracleScale(format!(
                    "more than {BRUTE_FORCE_MAX_ASSIGNMENTS} feasible placements"
                )));
            }
            let mut scheme = CacheScheme::new();
            let mut rates = Vec::with_capacity(k);
            for (relay_pos, relay) in scenario.relays.iter().enumerate() {
                let entries: Vec<AllocationEntry> = holdings
                    .iter()
                    .zip(&digits)
                    .filter(|(_, &d)| d == relay_pos)
                    .map(|(&(user, file, u, s), _)| {
                        scheme.assign(user, file, relay.id);
                        AllocationEntry::new((user, file), u, s)
                    })
                    .collect();
                rates.push(allocate(&AllocationInput::new(entries, relay.rate_budget))?);
            }
            let value = system_freshness(scenario, &scheme, &rates)?.sum_form;
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                trace.push(TracePoint { iteration: evaluated, best_sum_form: value });
                best = Some((value, digits.clone()));
            }
        }

        // odometer, last holding varies fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return finish(scenario, &holdings, best, trace, evaluated);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn finish(
    scenario: &Scenario,
    holdings: &[(u32, u32, f64, f64)],
    best: Option<(f64, Vec<usize>)>,
    trace: Vec<TracePoint>,
    evaluated: u64,
) -> Result<SolveResult> {
    let (_, digits) = best.ok_or_else(|| Error::Infeasible("no feasible placement exists".into()))?;
    let mut scheme = CacheScheme::new();
    let mut rates: Vec<RateAllocation> = Vec::new();
    for (relay_pos, relay) in scenario.relays.iter().enumerate() {
        let entries: Vec<AllocationEntry> = holdings
            .iter()
            .zip(&digits)
            .filter(|(_, &d)| d == relay_pos)
            .map(|(&(user, file, u, s), _)| {
                scheme.assign(user, file, relay.id);
                AllocationEntry::new((user, file), u, s)
            })
            .collect();
        rates.push(allocate(&AllocationInput::new(entries, relay.rate_budget))?);
    }
    let objective = system_freshness(scenario, &scheme, &rates)?;
    let table = ResultTable::build(scenario, &scheme, &rates, objective)?;
    Ok(SolveResult {
        best_scheme: scheme,
        best_rates: rates,
        objective,
        trace,
        evaluated_count: evaluated,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FileSpec, Holding, Popularity, RelaySpec, UserSpec};
    use crate::rate_alloc::allocation_objective;

    fn relay3() -> AllocationInput {
        AllocationInput::new(
            vec![
                AllocationEntry::new((3, 7), 10.0, 6.0),
                AllocationEntry::new((4, 10), 6.0, 6.0),
            ],
            8.0,
        )
    }

    /// Every grid point listed explicitly; small `steps` only.
    fn naive_grid(input: &AllocationInput, steps: usize) -> f64 {
        fn rec(input: &AllocationInput, steps: usize, j: usize, left: usize, acc: &mut Vec<f64>, best: &mut f64) {
            let g = input.rate_budget;
            if j + 1 == input.entries.len() {
                acc.push(g * left as f64 / steps as f64);
                *best = best.max(allocation_objective(input, acc));
                acc.pop();
                return;
            }
            for u in 0..=left {
                acc.push(g * u as f64 / steps as f64);
                rec(input, steps, j + 1, left - u, acc, best);
                acc.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(input, steps, 0, steps, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn grid_matches_naive_enumeration() {
        let input = AllocationInput::new(
            vec![
                AllocationEntry::new((1, 1), 2.0, 7.0),
                AllocationEntry::new((1, 2), 11.0, 0.6),
                AllocationEntry::new((1, 3), 5.0, 5.0),
                AllocationEntry::new((1, 4), 0.7, 3.0),
            ],
            9.0,
        );
        for steps in [1, 7, 40] {
            let (rates, obj) = grid_allocate(&input, steps).unwrap();
            assert!((obj - naive_grid(&input, steps)).abs() < 1e-12);
            assert!((rates.iter().sum::<f64>() - 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_agrees_with_closed_form_on_relay3() {
        let input = relay3();
        let (_, grid) = grid_allocate(&input, 1000).unwrap();
        let a = allocate(&input).unwrap();
        let rates: Vec<f64> = input.entries.iter().map(|e| a.rates[&e.key]).collect();
        let closed = allocation_objective(&input, &rates);
        assert!(grid <= closed + 1e-12);
        assert!(closed - grid < 1e-4);
    }

    #[test]
    fn grid_single_entry_and_zero_budget() {
        let input = AllocationInput::new(vec![AllocationEntry::new((1, 1), 3.0, 2.0)], 5.0);
        let (rates, obj) = grid_allocate(&input, 100).unwrap();
        assert_eq!(rates, vec![5.0]);
        assert!((obj - 0.6 * 5.0 / 7.0).abs() < 1e-15);

        let mut zero = relay3();
        zero.rate_budget = 0.0;
        let (rates, obj) = grid_allocate(&zero, 100).unwrap();
        assert_eq!(rates, vec![0.0, 0.0]);
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn grid_scale_guard() {
        let input = AllocationInput::new(
            (1..=5).map(|f| AllocationEntry::new((1, f), 1.0, 1.0)).collect(),
            1.0,
        );
        assert!(matches!(grid_allocate(&input, 10), Err(Error::OracleScale(_))));
    }

    fn tiny(capacities: &[usize]) -> Scenario {
        let k = capacities.len();
        Scenario {
            files: vec![FileSpec { id: 1, server_rate: 2.0 }],
            users: vec![UserSpec {
                id: 1,
                holdings: vec![Holding { file: 1, user_rate: 3.0, request_prob: 1.0 }],
                relay_prefs: vec![1.0 / k as f64; k],
            }],
            relays: capacities
                .iter()
                .enumerate()
                .map(|(i, &c)| RelaySpec { id: i as u32 + 1, capacity: c, rate_budget: 4.0 })
                .collect(),
            popularity: Popularity::Explicit,
        }
    }

    #[test]
    fn single_holding_single_relay() {
        let r = brute_force_assignments(&tiny(&[1])).unwrap();
        assert_eq!(r.evaluated_count, 1);
        assert_eq!(r.best_scheme.relay_of(1, 1), Some(1));
        assert!((r.objective.sum_form - 0.6 * 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn infeasible_capacities() {
        let mut s = tiny(&[1, 1]);
        // two relays cannot both be non-empty with one file
        s.users[0].relay_prefs = vec![0.5, 0.5];
        assert!(matches!(brute_force_assignments(&s), Err(Error::Infeasible(_))));
        let s = tiny(&[0]);
        assert!(matches!(brute_force_assignments(&s), Err(Error::Infeasible(_))));
    }
}
