//! Freshness-optimal cache placement for a server, relay and user updating
//! system.
//!
//! A server holds `N` files updated as Poisson processes. `K` relays each
//! cache a bounded number of files and split a bounded request-rate budget
//! across them; `M` users each hold a disjoint set of files and fetch them
//! from the relay that caches them. The crate chooses the placement and the
//! per-relay rates that maximize the expected time-average freshness seen by
//! users.
//!
//! - [`model`]: instance types and validation
//! - [`freshness`]: analytic freshness and the system objective
//! - [`rate_alloc`]: closed-form water-filling rates and a KKT checker
//! - [`search`]: exhaustive and sampled placement search
//! - [`oracle`]: brute-force cross-checks
//! - [`simulator`]: discrete-event Monte Carlo validation
//! - [`scenario_io`]: file formats, fixtures and result tables
//! - [`cli`]: the `freshcache` command

pub mod cli;
pub mod error;
pub mod freshness;
pub mod model;
pub mod oracle;
pub mod rate_alloc;
pub mod scenario_io;
pub mod search;
pub mod simulator;

pub use error::{Error, Result};
pub use freshness::{file_freshness, system_freshness, user_freshness, FreshnessValue, ObjectiveValue};
pub use model::{
    per_user_request_probs, validate_scenario, validate_scheme, zipf_popularity, CacheScheme, FileSpec, Holding,
    Popularity, RelaySpec, Scenario, UserSpec, ValidationReport,
};
pub use rate_alloc::{allocate, kkt_check, weight, AllocationEntry, AllocationInput, KktReport, RateAllocation};
pub use search::{
    enumerate_partitions, evaluate_scheme, solve_exhaustive, solve_sampled, Partition, SearchConfig, SolveResult,
};
pub use simulator::{simulate_file, simulate_system, SimEstimate};
