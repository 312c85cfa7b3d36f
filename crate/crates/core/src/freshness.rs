//! Analytic long-run freshness.
//!
//! A user's copy is fresh from the moment it fetches a fresh relay copy until
//! the server publishes the next version. With Poisson server
//! updates (rate `s`), relay fetches (rate `r`) and user fetches (rate `u`),
//! the fraction of time the user's copy is fresh is
//! `u/(u+s) · r/(r+s)`.
//!
//! The system objective weights each holding by its request probability and
//! by the user's preference for the relay that caches it. Two normalizations
//! appear in the literature for this objective: the plain sum over users and
//! the mean over users. [`ObjectiveValue`] carries both; tables and traces
//! report the sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CacheScheme, Scenario};
use crate::rate_alloc::RateAllocation;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreshnessValue(f64);

impl FreshnessValue {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("freshness {value} outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Σ over users of the user's expected freshness.
    pub sum_form: f64,
    /// `sum_form / M`.
    pub mean_form: f64,
}

impl ObjectiveValue {
    pub fn from_sum(sum_form: f64, user_count: usize) -> Self {
        Self {
            sum_form,
            mean_form: sum_form / user_count as f64,
        }
    }

    pub fn zero() -> Self {
        Self { sum_form: 0.0, mean_form: 0.0 }
    }
}

/// Long-run fraction of time a user's copy is fresh.
pub fn file_freshness(user_rate: f64, server_rate: f64, relay_rate: f64) -> Result<FreshnessValue> {
    if !(user_rate.is_finite() && server_rate.is_finite() && relay_rate.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite rate: user {user_rate}, server {server_rate}, relay {relay_rate}"
        )));
    }
    if user_rate <= 0.0 || server_rate <= 0.0 || relay_rate < 0.0 {
        return Err(Error::Domain(format!(
            "rates out of range: user {user_rate} (> 0), server {server_rate} (> 0), relay {relay_rate} (≥ 0)"
        )));
    }
    let value = user_rate / (user_rate + server_rate) * (relay_rate / (relay_rate + server_rate));
    Ok(FreshnessValue(value))
}

/// Relay rate for a holding from per-relay allocations (`rates[k]` belongs to relay `k + 1`).
pub(crate) fn lookup_rate(rates: &[RateAllocation], relay: u32, user: u32, file: u32) -> Result<f64> {
    relay
        .checked_sub(1)
        .and_then(|k| rates.get(k as usize))
        .and_then(|a| a.rate(user, file))
        .ok_or(Error::IncompleteAllocation { user, file })
}

/// Expected freshness of one user: `Σ_f p(f) · p(relay of f) · F(f)`.
pub fn user_freshness(
    scenario: &Scenario,
    scheme: &CacheScheme,
    rates: &[RateAllocation],
    user_id: u32,
) -> Result<FreshnessValue> {
    let user = scenario
        .user(user_id)
        .ok_or_else(|| Error::Domain(format!("unknown user {user_id}")))?;
    let mut total = 0.0;
    for h in &user.holdings {
        let relay = scheme.relay_of(user.id, h.file).ok_or_else(|| {
            Error::InvalidScheme(crate::model::validate_scheme(scenario, scheme))
        })?;
        let server_rate = scenario
            .file(h.file)
            .ok_or_else(|| Error::Domain(format!("unknown file {}", h.file)))?
            .server_rate;
        let pref = scenario
            .relay_pref(user.id, relay)
            .ok_or_else(|| Error::Domain(format!("user {} has no preference for relay {relay}", user.id)))?;
        let relay_rate = lookup_rate(rates, relay, user.id, h.file)?;
        let fresh = file_freshness(h.user_rate, server_rate, relay_rate)?;
        total += h.request_prob * pref * fresh.value();
    }
    // probabilities sum to 1 within tolerance, so clamp the rounding overshoot
    FreshnessValue::new(total.clamp(0.0, 1.0))
}

/// System objective over all users.
pub fn system_freshness(
    scenario: &Scenario,
    scheme: &CacheScheme,
    rates: &[RateAllocation],
) -> Result<ObjectiveValue> {
    let mut sum = 0.0;
    for u in &scenario.users {
        sum += user_freshness(scenario, scheme, rates, u.id)?.value();
    }
    Ok(ObjectiveValue::from_sum(sum, scenario.user_count()))
}
