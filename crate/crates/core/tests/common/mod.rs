#![allow(dead_code)]

use freshcache::model::{FileSpec, Holding, Popularity, RelaySpec, Scenario, UserSpec};
use freshcache::rate_alloc::{AllocationEntry, AllocationInput};
use freshcache::CacheScheme;
use rand::seq::SliceRandom;
use rand::Rng;

/// Reported placement for the bundled `table1` instance.
pub fn table2_scheme() -> CacheScheme {
    let mut s = CacheScheme::new();
    for (user, file, relay) in [
        (1, 1, 1),
        (1, 2, 1),
        (1, 3, 1),
        (2, 4, 1),
        (2, 5, 2),
        (2, 6, 2),
        (3, 7, 3),
        (3, 8, 2),
        (4, 9, 1),
        (4, 10, 3),
    ] {
        s.assign(user, file, relay);
    }
    s
}

fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - head;
    p
}

/// Random valid scenario with `1 ≤ K ≤ N ≤ max_files`, `K ≤ max_relays` and
/// enough capacity for every holding.
pub fn random_scenario<R: Rng>(rng: &mut R, max_files: usize, max_relays: usize) -> Scenario {
    let n = rng.random_range(1..=max_files);
    let k = rng.random_range(1..=max_relays.min(n));
    let m = rng.random_range(1..=n.min(3));

    let files = (1..=n as u32)
        .map(|id| FileSpec { id, server_rate: rng.random_range(0.5..12.0) })
        .collect();

    // first m files seed one user each, the rest go to random users
    let mut owner: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
    owner.shuffle(rng);
    let mut users: Vec<UserSpec> = (0..m)
        .map(|i| UserSpec { id: i as u32 + 1, holdings: Vec::new(), relay_prefs: simplex(rng, k) })
        .collect();
    for (f, &u) in owner.iter().enumerate() {
        users[u].holdings.push(Holding { file: f as u32 + 1, user_rate: rng.random_range(0.5..12.0), request_prob: 0.0 });
    }
    for u in &mut users {
        let p = simplex(rng, u.holdings.len());
        for (h, q) in u.holdings.iter_mut().zip(p) {
            h.request_prob = q;
        }
    }

    let mut caps: Vec<usize> = (0..k).map(|_| rng.random_range(1..=n)).collect();
    while caps.iter().sum::<usize>() < n {
        let i = rng.random_range(0..k);
        caps[i] += 1;
    }
    let relays = caps
        .into_iter()
        .enumerate()
        .map(|(i, capacity)| RelaySpec { id: i as u32 + 1, capacity, rate_budget: rng.random_range(1.0..20.0) })
        .collect();

    Scenario { files, users, relays, popularity: Popularity::Explicit }
}

/// Random single-relay problem: 1 to `max_entries` holdings, rates in
/// [0.5, 12], budget in [1, 20].
pub fn random_input<R: Rng>(rng: &mut R, max_entries: usize) -> AllocationInput {
    let n = rng.random_range(1..=max_entries);
    let entries = (0..n)
        .map(|i| AllocationEntry::new((1, i as u32 + 1), rng.random_range(0.5..=12.0), rng.random_range(0.5..=12.0)))
        .collect();
    AllocationInput::new(entries, rng.random_range(1.0..=20.0))
}
