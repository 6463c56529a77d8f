#ifndef CORRAL_CORRAL_H
#define CORRAL_CORRAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CORRAL_API __declspec(dllexport)
#else
#define CORRAL_API __attribute__((visibility("default")))
#endif

typedef enum corral_status {
  CORRAL_OK = 0,
  CORRAL_ERR_ARG = 1,        /* null handle, bad size, out-of-range argument */
  CORRAL_ERR_CONFIG = 2,     /* invalid or infeasible configuration */
  CORRAL_ERR_NUMERICAL = 3,  /* solver failed to converge */
  CORRAL_ERR_CONTRACT = 4,   /* call out of order, horizon exhausted, loss too large */
  CORRAL_ERR_INVARIANT = 5,  /* internal invariant observed broken */
  CORRAL_ERR_IO = 6          /* file could not be read or written */
} corral_status;

/* Message of the last failing call on this thread ("" if none). */
CORRAL_API const char* corral_last_error(void);
CORRAL_API const char* corral_version(void);
/* Frees strings returned through char** out-parameters. */
CORRAL_API void corral_string_free(char* s);

/* ---- random streams ---- */

typedef struct corral_rng corral_rng;

CORRAL_API corral_status corral_rng_create(uint64_t seed, uint64_t stream_id, corral_rng** out);
CORRAL_API void corral_rng_destroy(corral_rng* rng);
CORRAL_API corral_status corral_rng_uniform(corral_rng* rng, double* out);

/* ---- tuned parameters ---- */

typedef struct corral_params {
  double C, gamma, eta, epsilon, mu, beta, lambda;
} corral_params;

/* alpha <= 0 selects the l_p ball tuning, alpha > 0 the gauge tuning. */
CORRAL_API corral_status corral_derive_params(double p, int d, int T, int S, double alpha,
                                              corral_params* out);

/* ---- l_p ball learner: select() returns x_t, observe() takes l_t . x_t ---- */

typedef struct corral_learner corral_learner;

/* overrides may be NULL; fields that are NaN keep the derived value. */
CORRAL_API corral_status corral_learner_create(double p, int d, int T, int S,
                                               const corral_params* overrides,
                                               corral_learner** out);
CORRAL_API void corral_learner_destroy(corral_learner* learner);
CORRAL_API corral_status corral_learner_select(corral_learner* learner, corral_rng* rng,
                                               double* x_out, size_t d);
CORRAL_API corral_status corral_learner_observe(corral_learner* learner, double realized_loss);
CORRAL_API corral_status corral_learner_params(const corral_learner* learner, corral_params* out);
/* Number of base learners started so far. */
CORRAL_API corral_status corral_learner_active(const corral_learner* learner, int* out);

/* ---- experiments ---- */

typedef struct corral_experiment corral_experiment;

CORRAL_API corral_status corral_experiment_load(const char* config_path, corral_experiment** out);
CORRAL_API corral_status corral_experiment_parse(const char* config_json, corral_experiment** out);
CORRAL_API void corral_experiment_destroy(corral_experiment* exp);
CORRAL_API corral_status corral_experiment_set_full_trace(corral_experiment* exp, int on);
/* Output path from the config, or "" if unset. */
CORRAL_API const char* corral_experiment_output(const corral_experiment* exp);
/* Runs every seed on up to jobs threads. Returns CORRAL_ERR_NUMERICAL (after
   storing the rows, including diagnostic error rows) if any run failed
   numerically. */
CORRAL_API corral_status corral_experiment_run(corral_experiment* exp, int jobs);
CORRAL_API corral_status corral_experiment_row_count(const corral_experiment* exp, size_t* out);
CORRAL_API corral_status corral_experiment_write_csv(const corral_experiment* exp, const char* path);
/* CSV text and summary table of the last run. */
CORRAL_API corral_status corral_experiment_csv(const corral_experiment* exp, char** out);
CORRAL_API corral_status corral_experiment_summary(const corral_experiment* exp, char** out);

/* Mean/stderr table of cumulative regret over several trace CSVs. */
CORRAL_API corral_status corral_aggregate(const char* const* paths, size_t n, char** out);

/* ---- oracles and loss files ---- */

/* Optimal S-switch comparator over the unit l_p ball for a loss file. value is
   the comparator loss; report is a printable segment listing. Either out may be
   NULL. */
CORRAL_API corral_status corral_oracle(const char* loss_path, int switches, double p,
                                       double* value, char** report);
/* Writes the loss sequence a config generates for a seed. */
CORRAL_API corral_status corral_generate_losses(const char* config_path, uint64_t seed,
                                                const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
