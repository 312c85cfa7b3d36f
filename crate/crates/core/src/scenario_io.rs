//! Scenario, scheme and rate files (TOML) and result emission.
//!
//! Scenario schema:
//!
//! ```toml
//! [popularity]            # optional, defaults to explicit
//! mode = "explicit"       # or "zipf" with `exponent = 1.0`
//!
//! [[files]]
//! id = 1
//! server_rate = 4.0
//!
//! [[users]]
//! id = 1
//! relay_prefs = [0.5, 0.3, 0.2]
//! holdings = [{ file = 1, user_rate = 8.0, request_prob = 0.3 }]
//!
//! [[relays]]
//! id = 1
//! capacity = 6
//! rate_budget = 12.0
//! ```
//!
//! `request_prob` is required in explicit mode and forbidden in zipf mode.
//! Scheme files hold `[[assignment]]` tables of `{user, file, relay}`; rate
//! files hold `[[rates]]` tables of `{relay, user, file, rate}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freshness::ObjectiveValue;
use crate::model::{
    validate_scenario, CacheScheme, FileSpec, Holding, Popularity, RelaySpec, Scenario, UserSpec,
};
use crate::rate_alloc::RateAllocation;
use crate::search::SolveResult;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    popularity: Option<PopularityDoc>,
    files: Vec<FileDoc>,
    users: Vec<UserDoc>,
    relays: Vec<RelayDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopularityDoc {
    mode: ModeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeDoc {
    Explicit,
    Zipf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    id: u32,
    server_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserDoc {
    id: u32,
    relay_prefs: Vec<f64>,
    holdings: Vec<HoldingDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoldingDoc {
    file: u32,
    user_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    request_prob: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelayDoc {
    id: u32,
    capacity: usize,
    rate_budget: f64,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses TOML in two passes so that syntax errors and schema errors are
/// reported as different classes.
fn parse_doc<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    if let Err(e) = text.parse::<toml::Table>() {
        let at = e.span().map(|s| format!("line {}: ", line_of(text, s.start))).unwrap_or_default();
        return Err(Error::Syntax(format!("{at}{}", e.message().trim())));
    }
    toml::from_str(text).map_err(|e| {
        let at = e.span().map(|s| format!("line {}: ", line_of(text, s.start))).unwrap_or_default();
        Error::Schema(format!("{at}{}", e.message().trim()))
    })
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = parse_doc(text)?;
    let popularity = match doc.popularity {
        None => Popularity::Explicit,
        Some(PopularityDoc { mode: ModeDoc::Explicit, exponent: None }) => Popularity::Explicit,
        Some(PopularityDoc { mode: ModeDoc::Explicit, exponent: Some(_) }) => {
            return Err(Error::Schema("popularity.exponent is only valid with mode = \"zipf\"".into()))
        }
        Some(PopularityDoc { mode: ModeDoc::Zipf, exponent: Some(exponent) }) => Popularity::Zipf { exponent },
        Some(PopularityDoc { mode: ModeDoc::Zipf, exponent: None }) => {
            return Err(Error::Schema("popularity.exponent is required with mode = \"zipf\"".into()))
        }
    };
    let explicit = popularity == Popularity::Explicit;

    let mut users = Vec::with_capacity(doc.users.len());
    for (ui, u) in doc.users.into_iter().enumerate() {
        let mut holdings = Vec::with_capacity(u.holdings.len());
        for (hi, h) in u.holdings.into_iter().enumerate() {
            let request_prob = match (explicit, h.request_prob) {
                (true, Some(p)) => p,
                (true, None) => {
                    return Err(Error::Schema(format!(
                        "users[{ui}].holdings[{hi}]: missing field `request_prob` (required in explicit mode)"
                    )))
                }
                (false, None) => 0.0,
                (false, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "users[{ui}].holdings[{hi}]: `request_prob` is derived in zipf mode and must be omitted"
                    )))
                }
            };
            holdings.push(Holding { file: h.file, user_rate: h.user_rate, request_prob });
        }
        users.push(UserSpec { id: u.id, holdings, relay_prefs: u.relay_prefs });
    }

    let mut scenario = Scenario {
        files: doc.files.into_iter().map(|f| FileSpec { id: f.id, server_rate: f.server_rate }).collect(),
        users,
        relays: doc
            .relays
            .into_iter()
            .map(|r| RelaySpec { id: r.id, capacity: r.capacity, rate_budget: r.rate_budget })
            .collect(),
        popularity,
    };

    if !explicit {
        // popularity lookups need well-formed file ids; report those first
        let report = validate_scenario(&scenario);
        let structural = report
            .violations
            .iter()
            .any(|v| v.message.contains("ids must be") || v.message.contains("unknown file") || v.message.contains("holdings empty"));
        if structural {
            return Err(Error::InvalidScenario(report));
        }
        scenario.resolve_popularity()?;
    }

    let report = validate_scenario(&scenario);
    if !report.is_valid() {
        return Err(report.into_scenario_error());
    }
    Ok(scenario)
}

/// Serializes a scenario to the TOML schema. Floats use the shortest
/// representation that reads back to the same value.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let explicit = scenario.popularity == Popularity::Explicit;
    let doc = ScenarioDoc {
        popularity: Some(match scenario.popularity {
            Popularity::Explicit => PopularityDoc { mode: ModeDoc::Explicit, exponent: None },
            Popularity::Zipf { exponent } => PopularityDoc { mode: ModeDoc::Zipf, exponent: Some(exponent) },
        }),
        files: scenario
            .files
            .iter()
            .map(|f| FileDoc { id: f.id, server_rate: f.server_rate })
            .collect(),
        users: scenario
            .users
            .iter()
            .map(|u| UserDoc {
                id: u.id,
                relay_prefs: u.relay_prefs.clone(),
                holdings: u
                    .holdings
                    .iter()
                    .map(|h| HoldingDoc {
                        file: h.file,
                        user_rate: h.user_rate,
                        request_prob: explicit.then_some(h.request_prob),
                    })
                    .collect(),
            })
            .collect(),
        relays: scenario
            .relays
            .iter()
            .map(|r| RelayDoc { id: r.id, capacity: r.capacity, rate_budget: r.rate_budget })
            .collect(),
    };
    toml::to_string(&doc).expect("scenario documents always serialize")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeDoc {
    assignment: Vec<AssignmentRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentRow {
    user: u32,
    file: u32,
    relay: u32,
}

pub fn parse_scheme(text: &str) -> Result<CacheScheme> {
    let doc: SchemeDoc = parse_doc(text)?;
    let mut scheme = CacheScheme::new();
    for row in doc.assignment {
        if scheme.relay_of(row.user, row.file).is_some() {
            return Err(Error::Schema(format!(
                "holding (user {}, file {}) assigned twice",
                row.user, row.file
            )));
        }
        scheme.assign(row.user, row.file, row.relay);
    }
    Ok(scheme)
}

pub fn serialize_scheme(scheme: &CacheScheme) -> String {
    let doc = SchemeDoc {
        assignment: scheme
            .assignment
            .iter()
            .map(|(&(user, file), &relay)| AssignmentRow { user, file, relay })
            .collect(),
    };
    toml::to_string(&doc).expect("scheme documents always serialize")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesDoc {
    rates: Vec<RateRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateRow {
    relay: u32,
    user: u32,
    file: u32,
    rate: f64,
}

/// Parses a rates file into one allocation per relay (`1..=relay_count`).
pub fn parse_rates(text: &str, relay_count: usize) -> Result<Vec<RateAllocation>> {
    let doc: RatesDoc = parse_doc(text)?;
    let mut per_relay: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); relay_count];
    for row in doc.rates {
        let slot = row
            .relay
            .checked_sub(1)
            .and_then(|k| per_relay.get_mut(k as usize))
            .ok_or_else(|| Error::Schema(format!("rate row names unknown relay {}", row.relay)))?;
        if !row.rate.is_finite() || row.rate < 0.0 {
            return Err(Error::Schema(format!(
                "rate for (user {}, file {}) must be finite and ≥ 0, got {}",
                row.user, row.file, row.rate
            )));
        }
        if slot.insert((row.user, row.file), row.rate).is_some() {
            return Err(Error::Schema(format!(
                "duplicate rate for relay {}, (user {}, file {})",
                row.relay, row.user, row.file
            )));
        }
    }
    Ok(per_relay.into_iter().map(RateAllocation::from_rates).collect())
}

pub fn serialize_rates(rates: &[RateAllocation]) -> String {
    let doc = RatesDoc {
        rates: rates
            .iter()
            .enumerate()
            .flat_map(|(k, a)| {
                a.rates.iter().map(move |(&(user, file), &rate)| RateRow {
                    relay: k as u32 + 1,
                    user,
                    file,
                    rate,
                })
            })
            .collect(),
    };
    toml::to_string(&doc).expect("rate documents always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub file_index: u32,
    pub user_index: u32,
    pub user_rate: f64,
    pub relay_index: u32,
    pub relay_rate: f64,
    pub server_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFooter {
    pub user_count: usize,
    pub relay_count: usize,
    pub file_count: usize,
    pub objective_sum: f64,
    pub objective_mean: f64,
}

/// The optimal-scheme table: one row per holding, ordered by file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub footer: ResultFooter,
}

impl ResultTable {
    pub fn build(
        scenario: &Scenario,
        scheme: &CacheScheme,
        rates: &[RateAllocation],
        objective: ObjectiveValue,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(scenario.file_count());
        for h in scenario.holdings() {
            let relay = scheme
                .relay_of(h.user, h.file)
                .ok_or(Error::IncompleteAllocation { user: h.user, file: h.file })?;
            let relay_rate = crate::freshness::lookup_rate(rates, relay, h.user, h.file)?;
            rows.push(ResultRow {
                file_index: h.file,
                user_index: h.user,
                user_rate: h.user_rate,
                relay_index: relay,
                relay_rate,
                server_rate: h.server_rate,
            });
        }
        rows.sort_by_key(|r| r.file_index);
        Ok(Self {
            rows,
            footer: ResultFooter {
                user_count: scenario.user_count(),
                relay_count: scenario.relay_count(),
                file_count: scenario.file_count(),
                objective_sum: objective.sum_form,
                objective_mean: objective.mean_form,
            },
        })
    }

    /// Objective recomputed row by row from the table columns:
    /// `Σ u/(u+s) · r/(r+s) · p(file | user) · p(relay | user)`.
    pub fn row_sum(&self, scenario: &Scenario) -> Result<f64> {
        let mut total = 0.0;
        for r in &self.rows {
            let user = scenario
                .user(r.user_index)
                .ok_or_else(|| Error::Domain(format!("unknown user {}", r.user_index)))?;
            let p_file = user
                .holdings
                .iter()
                .find(|h| h.file == r.file_index)
                .ok_or_else(|| Error::Domain(format!("user {} does not hold file {}", r.user_index, r.file_index)))?
                .request_prob;
            let p_relay = scenario
                .relay_pref(r.user_index, r.relay_index)
                .ok_or_else(|| Error::Domain(format!("no preference for relay {}", r.relay_index)))?;
            total += r.user_rate / (r.user_rate + r.server_rate) * r.relay_rate / (r.relay_rate + r.server_rate)
                * p_file
                * p_relay;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableStyle {
    #[default]
    Csv,
    Aligned,
}

/// Up to six decimals, trailing zeros dropped (`8`, `2.5`, `0.333333`).
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub const TABLE_HEADER: [&str; 6] =
    ["file_index", "user_index", "user_rate", "relay_index", "relay_rate", "server_rate"];

pub fn write_result_table(result: &SolveResult, style: TableStyle) -> String {
    write_table(&result.table, style)
}

pub fn write_table(table: &ResultTable, style: TableStyle) -> String {
    let cells: Vec<[String; 6]> = table
        .rows
        .iter()
        .map(|r| {
            [
                r.file_index.to_string(),
                r.user_index.to_string(),
                format_number(r.user_rate),
                r.relay_index.to_string(),
                format!("{:.4}", r.relay_rate),
                format_number(r.server_rate),
            ]
        })
        .collect();

    let mut out = String::new();
    match style {
        TableStyle::Csv => {
            out.push_str(&TABLE_HEADER.join(","));
            out.push('\n');
            for row in &cells {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        TableStyle::Aligned => {
            let mut widths = TABLE_HEADER.map(str::len);
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cols: Vec<&str>| {
                cols.iter()
                    .zip(widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(TABLE_HEADER.to_vec()));
            out.push('\n');
            for row in &cells {
                out.push_str(&line(row.iter().map(String::as_str).collect()));
                out.push('\n');
            }
        }
    }
    let f = &table.footer;
    let _ = writeln!(out, "users={},relays={},files={}", f.user_count, f.relay_count, f.file_count);
    let _ = writeln!(out, "objective_sum={:.4}", f.objective_sum);
    let _ = writeln!(out, "objective_mean={:.4}", f.objective_mean);
    out
}

/// Best-so-far trace as CSV. Values use the shortest round-trip
/// representation so the last row reads back as the exact objective.
pub fn write_trace(result: &SolveResult) -> String {
    let mut out = String::from("iteration,best_objective_sum\n");
    for p in &result.trace {
        let _ = writeln!(out, "{},{}", p.iteration, p.best_sum_form);
    }
    out
}

/// Scenarios shipped with the crate, by name.
pub const FIXTURES: &[(&str, &str)] = &[
    ("table1", include_str!("../fixtures/table1.toml")),
    ("table1_zipf", include_str!("../fixtures/table1_zipf.toml")),
    ("table3_set1", include_str!("../fixtures/table3_set1.toml")),
    ("table3_set2", include_str!("../fixtures/table3_set2.toml")),
    ("table3_set3", include_str!("../fixtures/table3_set3.toml")),
    ("table4_set1", include_str!("../fixtures/table4_set1.toml")),
    ("table4_set2", include_str!("../fixtures/table4_set2.toml")),
    ("table4_set3", include_str!("../fixtures/table4_set3.toml")),
    ("popularity_var1", include_str!("../fixtures/popularity_var1.toml")),
    ("popularity_var2", include_str!("../fixtures/popularity_var2.toml")),
    ("popularity_var3", include_str!("../fixtures/popularity_var3.toml")),
    ("popularity_var4", include_str!("../fixtures/popularity_var4.toml")),
];

pub fn fixture_text(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled fixture by name.
pub fn fixture(name: &str) -> Result<Scenario> {
    let text = fixture_text(name).ok_or_else(|| Error::Domain(format!("no bundled fixture named {name:?}")))?;
    parse_scenario(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{table1, table2_scheme};
    use crate::search::evaluate_scheme;

    #[test]
    fn table1_fixture_parses() {
        let s = fixture("table1").unwrap();
        assert_eq!((s.file_count(), s.relay_count(), s.user_count()), (10, 3, 4));
        let budgets: Vec<f64> = s.relays.iter().map(|r| r.rate_budget).collect();
        let caps: Vec<usize> = s.relays.iter().map(|r| r.capacity).collect();
        assert_eq!(budgets, vec![12.0, 10.0, 8.0]);
        assert_eq!(caps, vec![6, 5, 4]);
        assert_eq!(s, table1());
    }

    #[test]
    fn all_fixtures_parse() {
        for (name, _) in FIXTURES {
            fixture(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn missing_relays_names_the_field() {
        let text = fixture_text("table1").unwrap();
        let cut = text.find("[[relays]]").unwrap();
        let err = parse_scenario(&text[..cut]).unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("relays"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn error_classes_are_distinct() {
        assert!(matches!(parse_scenario("files = [ {id = 1"), Err(Error::Syntax(_))));
        let text = fixture_text("table1").unwrap().replacen("server_rate = 4", "server_rat = 4", 1);
        match parse_scenario(&text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("line ") && msg.contains("server_rat"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
        let text = fixture_text("table1").unwrap().replacen("relay_prefs = [0.5, 0.3, 0.2]", "relay_prefs = [0.5, 0.3]", 1);
        assert!(matches!(parse_scenario(&text), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn capacity_shortfall_is_infeasible() {
        let mut s = table1();
        s.relays[0].capacity = 1;
        s.relays[1].capacity = 1;
        assert!(matches!(parse_scenario(&serialize_scenario(&s)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zipf_mode_derives_probabilities() {
        let s = fixture("table1_zipf").unwrap();
        let u1: Vec<f64> = s.users[0].holdings.iter().map(|h| h.request_prob).collect();
        for (got, want) in u1.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(parse_scenario(&serialize_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn scheme_and_rates_round_trip() {
        let scheme = table2_scheme();
        assert_eq!(parse_scheme(&serialize_scheme(&scheme)).unwrap(), scheme);
        let (_, rates) = evaluate_scheme(&table1(), &scheme).unwrap();
        let back = parse_rates(&serialize_rates(&rates), 3).unwrap();
        for (a, b) in rates.iter().zip(&back) {
            assert_eq!(a.rates, b.rates);
        }
    }

    #[test]
    fn table_rows_match_reported_layout() {
        let s = table1();
        let (obj, rates) = evaluate_scheme(&s, &table2_scheme()).unwrap();
        let table = ResultTable::build(&s, &table2_scheme(), &rates, obj).unwrap();
        let text = write_table(&table, TableStyle::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "file_index,user_index,user_rate,relay_index,relay_rate,server_rate");
        assert_eq!(lines[1], "1,1,8,1,2.4832,4");
        assert_eq!(lines[7], "7,3,10,3,4.5573,6");
        assert_eq!(lines[11], "users=4,relays=3,files=10");
        assert_eq!(lines[12], "objective_sum=0.5319");
        assert!(lines[13].starts_with("objective_mean=0.13"));
        assert!((table.row_sum(&s).unwrap() - obj.sum_form).abs() < 1e-12);
    }

    #[test]
    fn aligned_table_has_same_cells() {
        let s = table1();
        let (obj, rates) = evaluate_scheme(&s, &table2_scheme()).unwrap();
        let table = ResultTable::build(&s, &table2_scheme(), &rates, obj).unwrap();
        let text = write_table(&table, TableStyle::Aligned);
        let row7: Vec<&str> = text.lines().nth(7).unwrap().split_whitespace().collect();
        assert_eq!(row7, vec!["7", "3", "10", "3", "4.5573", "6"]);
    }

    #[test]
    fn format_number_trims() {
        assert_eq!(format_number(8.0), "8");
        assert_eq!(format_number(2.5), "2.5");
        assert_eq!(format_number(1.0 / 3.0), "0.333333");
        assert_eq!(format_number(0.0), "0");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scenario_strategy() -> impl Strategy<Value = Scenario> {
            (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(m, per_user, k)| {
                let n = m * per_user;
                (
                    proptest::collection::vec(0.01f64..50.0, n),
                    proptest::collection::vec((0.01f64..50.0, 0.01f64..1.0), n),
                    proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, k), m),
                    proptest::collection::vec(0.0f64..30.0, k),
                )
                    .prop_map(move |(server, holdings, prefs, budgets)| {
                        let norm = |v: Vec<f64>| {
                            let t: f64 = v.iter().sum();
                            v.into_iter().map(|x| x / t).collect::<Vec<_>>()
                        };
                        let users = (0..m)
                            .map(|i| {
                                let hs = &holdings[i * per_user..(i + 1) * per_user];
                                let probs = norm(hs.iter().map(|h| h.1).collect());
                                UserSpec {
                                    id: i as u32 + 1,
                                    holdings: hs
                                        .iter()
                                        .zip(probs)
                                        .enumerate()
                                        .map(|(j, (h, p))| Holding {
                                            file: (i * per_user + j) as u32 + 1,
                                            user_rate: h.0,
                                            request_prob: p,
                                        })
                                        .collect(),
                                    relay_prefs: norm(prefs[i].clone()),
                                }
                            })
                            .collect();
                        Scenario {
                            files: server
                                .iter()
                                .enumerate()
                                .map(|(i, &s)| FileSpec { id: i as u32 + 1, server_rate: s })
                                .collect(),
                            users,
                            relays: budgets
                                .iter()
                                .enumerate()
                                .map(|(i, &g)| RelaySpec { id: i as u32 + 1, capacity: n, rate_budget: g })
                                .collect(),
                            popularity: Popularity::Explicit,
                        }
                    })
            })
        }

        proptest! {
            #[test]
            fn parse_inverts_serialize(s in scenario_strategy()) {
                prop_assume!(validate_scenario(&s).is_valid());
                prop_assert_eq!(parse_scenario(&serialize_scenario(&s)).unwrap(), s);
            }
        }
    }
}
