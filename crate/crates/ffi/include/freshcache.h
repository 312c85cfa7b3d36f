#ifndef FRESHCACHE_H
#define FRESHCACHE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes. The non-zero error values match the CLI exit codes.
 */
typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_INVALID = 2,
  FC_STATUS_INFEASIBLE = 3,
  FC_STATUS_BUDGET = 4,
  FC_STATUS_IO = 5,
  FC_STATUS_NULL_ARGUMENT = 10,
  FC_STATUS_INVALID_UTF8 = 11,
  FC_STATUS_PANIC = 12,
} FcStatus;

/*
 A validated problem instance.
 */
typedef struct FcScenario FcScenario;

/*
 The outcome of a placement search.
 */
typedef struct FcSolveResult FcSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer is
 valid until the next failing call on the same thread.
 */
const char *fc_last_error_message(void);

/*
 Parses and validates a TOML scenario.

 # Safety
 `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum FcStatus fc_scenario_from_str(const char *toml, struct FcScenario **out);

/*
 Loads one of the bundled scenarios by name, e.g. `"table1"`.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum FcStatus fc_scenario_from_fixture(const char *name, struct FcScenario **out);

/*
 # Safety
 `scenario` must come from this library and not be freed twice. NULL is ignored.
 */
void fc_scenario_free(struct FcScenario *scenario);

/*
 Writes the file, user and relay counts. Any output pointer may be NULL.

 # Safety
 `scenario` must be a live handle.
 */
enum FcStatus fc_scenario_counts(const struct FcScenario *scenario,
                                 uint32_t *files,
                                 uint32_t *users,
                                 uint32_t *relays);

/*
 Exhaustive placement search. `threads == 0` uses all cores.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_solve_exhaustive(const struct FcScenario *scenario,
                                  bool allow_empty_relay,
                                  uint32_t threads,
                                  struct FcSolveResult **out);

/*
 Seeded local search evaluating at most `budget` placements.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_solve_sampled(const struct FcScenario *scenario,
                               uint64_t budget,
                               uint64_t seed,
                               bool allow_empty_relay,
                               uint32_t threads,
                               struct FcSolveResult **out);

/*
 # Safety
 `result` must come from this library and not be freed twice. NULL is ignored.
 */
void fc_result_free(struct FcSolveResult *result);

/*
 Objective summed over users.

 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_result_objective_sum(const struct FcSolveResult *result, double *out);

/*
 Objective averaged over users.

 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_result_objective_mean(const struct FcSolveResult *result, double *out);

/*
 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_result_evaluated_count(const struct FcSolveResult *result, uint64_t *out);

/*
 Relay caching `(user, file)` and the rate it spends on it.
 `relay` and `rate` may each be NULL.

 # Safety
 `result` must be a live handle.
 */
enum FcStatus fc_result_holding(const struct FcSolveResult *result,
                                uint32_t user,
                                uint32_t file,
                                uint32_t *relay,
                                double *rate);

/*
 The result table as CSV. Release with [`fc_string_free`].

 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_result_table_csv(const struct FcSolveResult *result, char **out);

/*
 # Safety
 `s` must come from this library and not be freed twice. NULL is ignored.
 */
void fc_string_free(char *s);

/*
 Optimal split of `budget` across `n` holdings of one relay. Holding `i`
 has user rate `user_rates[i]` and server rate `server_rates[i]`; its rate
 is written to `rates_out[i]`.

 # Safety
 All three arrays must hold `n` elements.
 */
enum FcStatus fc_allocate(const double *user_rates,
                          const double *server_rates,
                          uintptr_t n,
                          double budget,
                          double *rates_out);

/*
 Freshness of one holding given its user, server and relay rates.

 # Safety
 `out` must be writable.
 */
enum FcStatus fc_file_freshness(double user_rate,
                                double server_rate,
                                double relay_rate,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRESHCACHE_H */
