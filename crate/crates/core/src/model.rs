//! Problem-instance types: the server's files, the users that hold them, the
//! relays that cache them, and the placement of every holding onto a relay.
//!
//! Ids are 1-based and dense: files are `1..=N`, users `1..=M`, relays
//! `1..=K`, each listed in id order. A user's `relay_prefs[k]` is the
//! preference for relay `k + 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    pub id: u32,
    /// Poisson update rate of the file at the server.
    pub server_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holding {
    pub file: u32,
    /// Rate at which the user requests a new copy from its relay.
    pub user_rate: f64,
    /// Probability that a request of this user targets this file.
    pub request_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: u32,
    pub holdings: Vec<Holding>,
    pub relay_prefs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaySpec {
    pub id: u32,
    pub capacity: usize,
    pub rate_budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Popularity {
    /// Request probabilities are given per holding.
    Explicit,
    /// Request probabilities follow a Zipf law over file ids, renormalized per user.
    Zipf { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub files: Vec<FileSpec>,
    pub users: Vec<UserSpec>,
    pub relays: Vec<RelaySpec>,
    pub popularity: Popularity,
}

/// Flattened view of one (user, file) holding with everything the
/// allocation and freshness code needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingRef {
    pub user: u32,
    pub file: u32,
    pub user_rate: f64,
    pub server_rate: f64,
    pub request_prob: f64,
}

impl Scenario {
    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn relay_count(&self) -> usize {
        self.relays.len()
    }

    pub fn file(&self, id: u32) -> Option<&FileSpec> {
        id.checked_sub(1)
            .and_then(|i| self.files.get(i as usize))
            .filter(|f| f.id == id)
    }

    pub fn user(&self, id: u32) -> Option<&UserSpec> {
        id.checked_sub(1)
            .and_then(|i| self.users.get(i as usize))
            .filter(|u| u.id == id)
    }

    pub fn relay(&self, id: u32) -> Option<&RelaySpec> {
        id.checked_sub(1)
            .and_then(|i| self.relays.get(i as usize))
            .filter(|r| r.id == id)
    }

    /// All holdings in user order, then in each user's listed order.
    ///
    /// Panics if a holding names a file that does not exist; call on
    /// validated scenarios only.
    pub fn holdings(&self) -> Vec<HoldingRef> {
        self.users
            .iter()
            .flat_map(|u| {
                u.holdings.iter().map(move |h| HoldingRef {
                    user: u.id,
                    file: h.file,
                    user_rate: h.user_rate,
                    server_rate: self
                        .file(h.file)
                        .unwrap_or_else(|| panic!("holding references unknown file {}", h.file))
                        .server_rate,
                    request_prob: h.request_prob,
                })
            })
            .collect()
    }

    /// Preference of `user` for `relay`, both by id.
    pub fn relay_pref(&self, user: u32, relay: u32) -> Option<f64> {
        let u = self.user(user)?;
        relay
            .checked_sub(1)
            .and_then(|k| u.relay_prefs.get(k as usize))
            .copied()
    }

    /// Recomputes request probabilities from the popularity mode. A no-op in
    /// explicit mode.
    pub fn resolve_popularity(&mut self) -> Result<()> {
        let Popularity::Zipf { exponent } = self.popularity else {
            return Ok(());
        };
        let popularity = zipf_popularity(exponent, self.files.len())?;
        for user in &mut self.users {
            let probs = per_user_request_probs(&popularity, user)?;
            for (h, p) in user.holdings.iter_mut().zip(probs) {
                h.request_prob = p;
            }
        }
        Ok(())
    }

    /// Copy of the scenario with every user rate multiplied by `factor`.
    pub fn scale_user_rates(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for h in s.users.iter_mut().flat_map(|u| u.holdings.iter_mut()) {
            h.user_rate *= factor;
        }
        s
    }

    /// Copy of the scenario with every server rate multiplied by `factor`.
    pub fn scale_server_rates(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for f in &mut s.files {
            f.server_rate *= factor;
        }
        s
    }
}

/// Placement of every (user, file) holding onto exactly one relay.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheScheme {
    #[serde(with = "assignment_rows")]
    pub assignment: BTreeMap<(u32, u32), u32>,
}

mod assignment_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Row {
        user: u32,
        file: u32,
        relay: u32,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(u32, u32), u32>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map.iter().map(|(&(user, file), &relay)| Row { user, file, relay }).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, u32), u32>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| ((r.user, r.file), r.relay)).collect())
    }
}

impl CacheScheme {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, user: u32, file: u32, relay: u32) {
        self.assignment.insert((user, file), relay);
    }

    pub fn relay_of(&self, user: u32, file: u32) -> Option<u32> {
        self.assignment.get(&(user, file)).copied()
    }

    /// Number of holdings placed on each relay id.
    pub fn relay_loads(&self) -> BTreeMap<u32, usize> {
        let mut loads = BTreeMap::new();
        for &relay in self.assignment.values() {
            *loads.entry(relay).or_insert(0) += 1;
        }
        loads
    }

    /// Holdings (user, file) placed on `relay`, in key order.
    pub fn holdings_on(&self, relay: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.assignment
            .iter()
            .filter(move |(_, &r)| r == relay)
            .map(|(&k, _)| k)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    /// Malformed data.
    Invalid,
    /// Well-formed data that admits no placement.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub message: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, entity: impl Into<String>, message: impl Into<String>) {
        self.push_kind(ViolationKind::Invalid, entity, message);
    }

    fn push_kind(&mut self, kind: ViolationKind, entity: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            entity: entity.into(),
            message: message.into(),
            kind,
        });
    }

    /// True when the report is non-empty and every violation is an infeasibility.
    pub fn only_infeasible(&self) -> bool {
        !self.violations.is_empty() && self.violations.iter().all(|v| v.kind == ViolationKind::Infeasible)
    }

    /// Error for a failed scenario check: infeasibility when that is the
    /// only problem, otherwise a validation error.
    pub fn into_scenario_error(self) -> Error {
        if self.only_infeasible() {
            Error::Infeasible(self.to_string().trim().to_string())
        } else {
            Error::InvalidScenario(self)
        }
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.entity, v.message)?;
        }
        Ok(())
    }
}

fn check_rate(report: &mut ValidationReport, entity: &str, name: &str, value: f64) {
    if !value.is_finite() || value <= 0.0 {
        report.push(entity, format!("{name} must be finite and > 0, got {value}"));
    }
}

fn check_prob_vector(report: &mut ValidationReport, entity: &str, name: &str, probs: &[f64]) {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
        report.push(entity, format!("{name} entry {p} outside [0, 1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        report.push(entity, format!("{name} sum ≠ 1 (sum = {sum})"));
    }
}

/// Lists every violated scenario invariant. An empty report means valid.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = scenario.files.len();
    let k = scenario.relays.len();

    if n == 0 {
        report.push("scenario", "no files");
    }
    if scenario.users.is_empty() {
        report.push("scenario", "no users");
    }
    if k == 0 {
        report.push("scenario", "no relays");
    }

    for (i, f) in scenario.files.iter().enumerate() {
        let entity = format!("file {}", f.id);
        if f.id as usize != i + 1 {
            report.push(&entity, format!("file ids must be 1..N in order; position {} has id {}", i + 1, f.id));
        }
        check_rate(&mut report, &entity, "server_rate", f.server_rate);
    }

    for (i, r) in scenario.relays.iter().enumerate() {
        let entity = format!("relay {}", r.id);
        if r.id as usize != i + 1 {
            report.push(&entity, format!("relay ids must be 1..K in order; position {} has id {}", i + 1, r.id));
        }
        if r.capacity > n {
            report.push(&entity, format!("capacity {} exceeds file count {n}", r.capacity));
        }
        if !r.rate_budget.is_finite() || r.rate_budget < 0.0 {
            report.push(&entity, format!("rate_budget must be finite and ≥ 0, got {}", r.rate_budget));
        }
    }

    let mut owner: BTreeMap<u32, u32> = BTreeMap::new();
    for (i, u) in scenario.users.iter().enumerate() {
        let entity = format!("user {}", u.id);
        if u.id as usize != i + 1 {
            report.push(&entity, format!("user ids must be 1..M in order; position {} has id {}", i + 1, u.id));
        }
        if u.holdings.is_empty() {
            report.push(&entity, "holdings empty");
        }
        for h in &u.holdings {
            let hentity = format!("user {}, file {}", u.id, h.file);
            if scenario.file(h.file).is_none() {
                report.push(&hentity, format!("unknown file {}", h.file));
            }
            check_rate(&mut report, &hentity, "user_rate", h.user_rate);
            if let Some(prev) = owner.insert(h.file, u.id) {
                report.push(&hentity, format!("file {} already held by user {prev}", h.file));
            }
        }
        if !u.holdings.is_empty() {
            let probs: Vec<f64> = u.holdings.iter().map(|h| h.request_prob).collect();
            check_prob_vector(&mut report, &entity, "request_prob", &probs);
        }
        if u.relay_prefs.len() != k {
            report.push(&entity, format!("relay_prefs has {} entries, expected {k}", u.relay_prefs.len()));
        }
        check_prob_vector(&mut report, &entity, "relay_prefs", &u.relay_prefs);
    }

    for f in &scenario.files {
        if !owner.contains_key(&f.id) {
            report.push(format!("file {}", f.id), "not held by any user");
        }
    }

    let total_capacity: usize = scenario.relays.iter().map(|r| r.capacity).sum();
    if total_capacity < n {
        report.push_kind(
            ViolationKind::Infeasible,
            "relays",
            format!("aggregate capacity below file count: {total_capacity} < {n}"),
        );
    }

    if let Popularity::Zipf { exponent } = scenario.popularity {
        if !exponent.is_finite() || exponent < 0.0 {
            report.push("popularity", format!("zipf exponent must be finite and ≥ 0, got {exponent}"));
        }
    }

    report
}

/// Checks the placement constraints: every holding on exactly one existing
/// relay, no relay over capacity, and the per-relay loads adding up to the
/// holding count.
pub fn validate_scheme(scenario: &Scenario, scheme: &CacheScheme) -> ValidationReport {
    let mut report = ValidationReport::default();
    let holdings = scenario.holdings();

    for h in &holdings {
        if scheme.relay_of(h.user, h.file).is_none() {
            report.push(
                format!("user {}, file {}", h.user, h.file),
                format!("unassigned holding (user {}, file {})", h.user, h.file),
            );
        }
    }
    for (&(user, file), &relay) in &scheme.assignment {
        let entity = format!("user {user}, file {file}");
        let known = scenario
            .user(user)
            .is_some_and(|u| u.holdings.iter().any(|h| h.file == file));
        if !known {
            report.push(&entity, format!("assignment for unknown holding (user {user}, file {file})"));
        }
        if scenario.relay(relay).is_none() {
            report.push(&entity, format!("assigned to unknown relay {relay}"));
        }
    }

    let loads = scheme.relay_loads();
    for r in &scenario.relays {
        let load = loads.get(&r.id).copied().unwrap_or(0);
        if load > r.capacity {
            report.push(
                format!("relay {}", r.id),
                format!("relay {} over capacity: {load} > {}", r.id, r.capacity),
            );
        }
    }

    let placed: usize = loads.values().sum();
    if placed != holdings.len() {
        report.push(
            "scheme",
            format!("placed holdings {placed} ≠ total holdings {}", holdings.len()),
        );
    }

    report
}

/// Zipf request probabilities `p_f ∝ f^(-exponent)` for ranks `f = 1..=n`.
pub fn zipf_popularity(exponent: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyDomain("zipf popularity over zero files".into()));
    }
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::Domain(format!("zipf exponent must be finite and ≥ 0, got {exponent}")));
    }
    let weights: Vec<f64> = (1..=n).map(|f| (f as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Restricts a global popularity vector (indexed by `file_id - 1`) to the
/// user's holdings and renormalizes.
pub fn per_user_request_probs(popularity: &[f64], user: &UserSpec) -> Result<Vec<f64>> {
    if user.holdings.is_empty() {
        return Err(Error::EmptyDomain(format!("user {} has no holdings", user.id)));
    }
    let restricted = user
        .holdings
        .iter()
        .map(|h| {
            h.file
                .checked_sub(1)
                .and_then(|i| popularity.get(i as usize))
                .copied()
                .ok_or_else(|| Error::Domain(format!("no popularity entry for file {}", h.file)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(p) = restricted.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Domain(format!("popularity entry {p} is not a nonnegative number")));
    }
    let total: f64 = restricted.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePopularity { user: user.id });
    }
    Ok(restricted.into_iter().map(|p| p / total).collect())
}
