//! Monte Carlo check of the analytic freshness formula.
//!
//! Each holding is simulated as three independent Poisson streams: server
//! updates, relay fetches and user fetches. A server update makes both the
//! relay and the user copy stale; a relay fetch makes the relay copy fresh; a
//! user fetch copies the relay's current state. Both copies start fresh.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freshness::{file_freshness, lookup_rate, ObjectiveValue};
use crate::model::{CacheScheme, Scenario};
use crate::rate_alloc::{HoldingKey, RateAllocation};

pub const BATCHES: usize = 20;
/// Two-sided 95% Student-t quantile with `BATCHES - 1` degrees of freedom.
const T_QUANTILE_19: f64 = 2.093_024_054_408_263;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    /// Fraction of the horizon during which the user's copy was fresh.
    pub freshness_estimate: f64,
    /// Completed cycles between consecutive stale-to-fresh transitions at the user.
    pub cycles_observed: u64,
    /// Fresh time over cycle length, pooled across completed cycles.
    pub cycle_ratio_estimate: Option<f64>,
    pub total_time: f64,
    /// 95% half-width from batch means.
    pub half_width_95: f64,
    pub user_requests: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Server,
    Relay,
    User,
}

struct Clock {
    dist: Option<Exp<f64>>,
    next: f64,
}

impl Clock {
    fn new(rate: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if rate == 0.0 {
            return Ok(Self { dist: None, next: f64::INFINITY });
        }
        let dist = Exp::new(rate).map_err(|e| Error::Domain(format!("bad rate {rate}: {e}")))?;
        let next = dist.sample(rng);
        Ok(Self { dist: Some(dist), next })
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) {
        if let Some(d) = &self.dist {
            self.next += d.sample(rng);
        }
    }
}

/// Simulates one holding over `[0, horizon]`.
pub fn simulate_file(user_rate: f64, server_rate: f64, relay_rate: f64, horizon: f64, seed: u64) -> Result<SimEstimate> {
    let finite = [user_rate, server_rate, relay_rate, horizon].iter().all(|x| x.is_finite());
    if !finite || user_rate <= 0.0 || server_rate <= 0.0 || relay_rate < 0.0 || horizon <= 0.0 {
        return Err(Error::Domain(format!(
            "simulation needs user, server rates > 0, relay rate ≥ 0, horizon > 0; got {user_rate}, {server_rate}, {relay_rate}, {horizon}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut server = Clock::new(server_rate, &mut rng)?;
    let mut relay = Clock::new(relay_rate, &mut rng)?;
    let mut user = Clock::new(user_rate, &mut rng)?;

    let batch_len = horizon / BATCHES as f64;
    let mut batch_fresh = [0.0f64; BATCHES];

    let mut relay_fresh = true;
    let mut user_fresh = true;
    let mut now = 0.0;
    let mut fresh_total = 0.0;
    let mut user_requests = 0u64;

    let mut cycle_start: Option<f64> = None;
    let mut cycle_fresh = 0.0;
    let mut cycles = 0u64;
    let mut cycles_len = 0.0;
    let mut cycles_fresh = 0.0;

    let credit = |from: f64, to: f64, batch_fresh: &mut [f64; BATCHES]| {
        // spread [from, to) over the batches it overlaps
        let mut t = from;
        while t < to {
            let b = ((t / batch_len) as usize).min(BATCHES - 1);
            let end = if b == BATCHES - 1 { to } else { to.min((b + 1) as f64 * batch_len) };
            batch_fresh[b] += end - t;
            t = end;
        }
    };

    loop {
        // ties resolve server, then relay, then user
        let (event, at) = [(Event::Server, server.next), (Event::Relay, relay.next), (Event::User, user.next)]
            .into_iter()
            .fold((Event::Server, f64::INFINITY), |acc, e| if e.1 < acc.1 { e } else { acc });
        let at_or_end = at.min(horizon);
        if user_fresh {
            fresh_total += at_or_end - now;
            credit(now, at_or_end, &mut batch_fresh);
            if cycle_start.is_some() {
                cycle_fresh += at_or_end - now;
            }
        }
        now = at_or_end;
        if at >= horizon {
            break;
        }
        match event {
            Event::Server => {
                relay_fresh = false;
                user_fresh = false;
                server.advance(&mut rng);
            }
            Event::Relay => {
                relay_fresh = true;
                relay.advance(&mut rng);
            }
            Event::User => {
                user_requests += 1;
                if !user_fresh && relay_fresh {
                    if let Some(start) = cycle_start {
                        cycles += 1;
                        cycles_len += now - start;
                        cycles_fresh += cycle_fresh;
                    }
                    cycle_start = Some(now);
                    cycle_fresh = 0.0;
                }
                user_fresh = relay_fresh;
                user.advance(&mut rng);
            }
        }
    }

    let means: Vec<f64> = batch_fresh.iter().map(|f| f / batch_len).collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let half_width_95 = T_QUANTILE_19 * (var / BATCHES as f64).sqrt();

    Ok(SimEstimate {
        freshness_estimate: (fresh_total / horizon).clamp(0.0, 1.0),
        cycles_observed: cycles,
        cycle_ratio_estimate: (cycles > 0).then(|| cycles_fresh / cycles_len),
        total_time: horizon,
        half_width_95,
        user_requests,
    })
}

/// Per-holding stream seed: `seed` xor a fixed mix of the holding key, so
/// results do not depend on evaluation order.
pub fn holding_seed(seed: u64, key: HoldingKey) -> u64 {
    // splitmix64 finalizer
    let mut z = ((key.0 as u64) << 32 | key.1 as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    seed ^ (z ^ (z >> 31))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSimRow {
    pub user: u32,
    pub file: u32,
    pub relay: u32,
    pub analytic: f64,
    pub estimate: SimEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSimulation {
    pub rows: Vec<SystemSimRow>,
    pub aggregate: ObjectiveValue,
    pub analytic: ObjectiveValue,
    /// 95% half-width of `aggregate.sum_form`, combining per-holding
    /// half-widths as independent errors.
    pub aggregate_half_width_95: f64,
}

impl SystemSimulation {
    pub fn by_key(&self) -> BTreeMap<HoldingKey, &SimEstimate> {
        self.rows.iter().map(|r| ((r.user, r.file), &r.estimate)).collect()
    }
}

/// Simulates every holding independently and combines the estimates with the
/// same weights as the analytic objective.
pub fn simulate_system(
    scenario: &Scenario,
    scheme: &CacheScheme,
    rates: &[RateAllocation],
    horizon: f64,
    seed: u64,
) -> Result<SystemSimulation> {
    use rayon::prelude::*;

    let report = crate::model::validate_scheme(scenario, scheme);
    if !report.is_valid() {
        return Err(Error::InvalidScheme(report));
    }

    struct Job {
        user: u32,
        file: u32,
        relay: u32,
        user_rate: f64,
        server_rate: f64,
        relay_rate: f64,
        weight: f64,
    }
    let mut jobs = Vec::new();
    for h in scenario.holdings() {
        let relay = scheme.relay_of(h.user, h.file).expect("validated");
        let pref = scenario
            .relay_pref(h.user, relay)
            .ok_or_else(|| Error::Domain(format!("user {} has no preference for relay {relay}", h.user)))?;
        jobs.push(Job {
            user: h.user,
            file: h.file,
            relay,
            user_rate: h.user_rate,
            server_rate: h.server_rate,
            relay_rate: lookup_rate(rates, relay, h.user, h.file)?,
            weight: h.request_prob * pref,
        });
    }

    let rows: Vec<SystemSimRow> = jobs
        .par_iter()
        .map(|j| {
            let estimate = simulate_file(j.user_rate, j.server_rate, j.relay_rate, horizon, holding_seed(seed, (j.user, j.file)))?;
            let analytic = file_freshness(j.user_rate, j.server_rate, j.relay_rate)?.value();
            Ok(SystemSimRow { user: j.user, file: j.file, relay: j.relay, analytic, estimate })
        })
        .collect::<Result<_>>()?;

    let mut sim_sum = 0.0;
    let mut analytic_sum = 0.0;
    let mut var = 0.0;
    for (j, r) in jobs.iter().zip(&rows) {
        sim_sum += j.weight * r.estimate.freshness_estimate;
        analytic_sum += j.weight * r.analytic;
        var += (j.weight * r.estimate.half_width_95).powi(2);
    }
    let m = scenario.user_count();
    Ok(SystemSimulation {
        rows,
        aggregate: ObjectiveValue::from_sum(sim_sum, m),
        analytic: ObjectiveValue::from_sum(analytic_sum, m),
        aggregate_half_width_95: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_rates() {
        let e = simulate_file(1.0, 1.0, 1.0, 1e5, 1).unwrap();
        assert!((e.freshness_estimate - 0.25).abs() < 0.01, "{e:?}");
        assert!(e.user_requests > 90_000);
    }

    #[test]
    fn zero_relay_rate_only_keeps_the_initial_copy() {
        let e = simulate_file(8.0, 4.0, 0.0, 1e4, 5).unwrap();
        assert_eq!(e.cycles_observed, 0);
        assert!(e.cycle_ratio_estimate.is_none());
        // fresh only until the first server update, typically ~1/4 time units
        assert!(e.freshness_estimate < 1e-2, "{e:?}");
    }

    #[test]
    fn reported_row_seven() {
        let e = simulate_file(10.0, 6.0, 4.5573, 1e5, 9).unwrap();
        assert!((e.freshness_estimate - 0.2698).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_file(2.0, 3.0, 4.0, 1e3, 42).unwrap();
        let b = simulate_file(2.0, 3.0, 4.0, 1e3, 42).unwrap();
        let c = simulate_file(2.0, 3.0, 4.0, 1e3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(simulate_file(0.0, 1.0, 1.0, 10.0, 0).is_err());
        assert!(simulate_file(1.0, 1.0, -1.0, 10.0, 0).is_err());
        assert!(simulate_file(1.0, 1.0, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn estimators_agree() {
        let e = simulate_file(5.0, 2.0, 3.0, 5e4, 17).unwrap();
        let cycle = e.cycle_ratio_estimate.unwrap();
        assert!((cycle - e.freshness_estimate).abs() <= 2.0 * e.half_width_95, "{e:?}");
    }

    #[test]
    fn holding_seeds_differ() {
        assert_ne!(holding_seed(7, (1, 2)), holding_seed(7, (2, 1)));
        assert_eq!(holding_seed(7, (3, 4)), holding_seed(7, (3, 4)));
    }
}
