mod common;

use freshcache::model::validate_scheme;
use freshcache::oracle::brute_force_assignments;
use freshcache::search::{evaluate_scheme, solve_exhaustive, solve_sampled, SearchConfig};
use freshcache::{CacheScheme, Scenario};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64) -> Scenario {
    common::random_scenario(&mut ChaCha8Rng::seed_from_u64(seed), 6, 3)
}

/// Random placement with every relay non-empty and within capacity.
fn random_feasible(scenario: &Scenario, rng: &mut ChaCha8Rng) -> CacheScheme {
    let mut holdings = scenario.holdings();
    holdings.shuffle(rng);
    let k = scenario.relay_count();
    let mut load = vec![0usize; k];
    let mut scheme = CacheScheme::new();
    for (i, h) in holdings.iter().enumerate() {
        let relay = if i < k {
            i
        } else {
            let open: Vec<usize> = (0..k).filter(|&r| load[r] < scenario.relays[r].capacity).collect();
            open[rng.random_range(0..open.len())]
        };
        load[relay] += 1;
        scheme.assign(h.user, h.file, relay as u32 + 1);
    }
    scheme
}

/// Relabels relays by `perm`: old relay `k + 1` becomes `perm[k] + 1`.
fn permute_relays(scenario: &Scenario, perm: &[usize]) -> Scenario {
    let mut out = scenario.clone();
    for (old, &new) in perm.iter().enumerate() {
        out.relays[new] = scenario.relays[old].clone();
        out.relays[new].id = new as u32 + 1;
    }
    for (u, orig) in out.users.iter_mut().zip(&scenario.users) {
        for (old, &new) in perm.iter().enumerate() {
            u.relay_prefs[new] = orig.relay_prefs[old];
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exhaustive_matches_brute_force(seed in any::<u64>()) {
        let s = scenario(seed);
        let a = solve_exhaustive(&s, &SearchConfig::default()).unwrap();
        let b = brute_force_assignments(&s).unwrap();
        prop_assert_eq!(a.objective.sum_form, b.objective.sum_form);
        prop_assert_eq!(a.best_scheme, b.best_scheme);
        prop_assert_eq!(a.evaluated_count, b.evaluated_count);
    }

    #[test]
    fn produced_schemes_are_valid(seed in any::<u64>(), budget in 1u64..200) {
        let s = scenario(seed);
        let config = SearchConfig::default();
        let exhaustive = solve_exhaustive(&s, &config).unwrap();
        let sampled = solve_sampled(&s, budget, seed, &config).unwrap();
        for r in [&exhaustive, &sampled] {
            let report = validate_scheme(&s, &r.best_scheme);
            prop_assert!(report.is_valid(), "{}", report);
            let loads = r.best_scheme.relay_loads();
            prop_assert!(s.relays.iter().all(|k| loads.get(&k.id).copied().unwrap_or(0) >= 1));
        }
        prop_assert!(sampled.evaluated_count <= budget);
        prop_assert!(sampled.objective.sum_form <= exhaustive.objective.sum_form);
    }

    #[test]
    fn exhaustive_dominates_any_feasible_scheme(seed in any::<u64>()) {
        let s = scenario(seed);
        let best = solve_exhaustive(&s, &SearchConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..5 {
            let scheme = random_feasible(&s, &mut rng);
            let (obj, _) = evaluate_scheme(&s, &scheme).unwrap();
            prop_assert!(obj.sum_form <= best.objective.sum_form + 1e-12);
        }
    }

    #[test]
    fn relay_relabelling_keeps_the_optimum(seed in any::<u64>()) {
        let s = scenario(seed);
        let mut perm: Vec<usize> = (0..s.relay_count()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.rotate_left(7)));
        let t = permute_relays(&s, &perm);
        let a = solve_exhaustive(&s, &SearchConfig::default()).unwrap();
        let b = solve_exhaustive(&t, &SearchConfig::default()).unwrap();
        prop_assert!((a.objective.sum_form - b.objective.sum_form).abs() < 1e-12);
    }
}
