#include "corral/corral.h"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "corral/corral_learner.hpp"
#include "corral/environments.hpp"
#include "corral/harness.hpp"

struct corral_rng {
  corral::RngStream stream;
};

struct corral_learner {
  corral::CorralLearner learner;
  bool selected = false;
};

struct corral_experiment {
  corral::ExperimentConfig cfg;
  corral::ExperimentResult result;
  bool ran = false;
};

namespace {

thread_local std::string g_last_error;

void setup_logging() {
  static const bool done = [] {
    auto logger = spdlog::stderr_color_mt("corral");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* lvl = std::getenv("CORRAL_LOG");
    spdlog::set_level(lvl ? spdlog::level::from_str(lvl) : spdlog::level::warn);
    return true;
  }();
  (void)done;
}

corral_status fail(corral_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
corral_status guarded(F&& f) {
  setup_logging();
  try {
    g_last_error.clear();
    return f();
  } catch (const corral::ConfigError& e) {
    return fail(CORRAL_ERR_CONFIG, e.what());
  } catch (const corral::NumericalError& e) {
    return fail(CORRAL_ERR_NUMERICAL, e.what());
  } catch (const corral::ContractViolation& e) {
    return fail(CORRAL_ERR_CONTRACT, e.what());
  } catch (const corral::InvariantViolation& e) {
    return fail(CORRAL_ERR_INVARIANT, e.what());
  } catch (const corral::DomainError& e) {
    return fail(CORRAL_ERR_CONTRACT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CORRAL_ERR_NUMERICAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CORRAL_ERR_ARG, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string summary_text(const std::vector<corral::TraceRow>& rows) {
  const auto summary = corral::summarize(rows);
  std::ostringstream os;
  corral::print_summary(os, summary, corral::ratio_table(summary));
  return os.str();
}

}  // namespace

extern "C" {

const char* corral_last_error(void) { return g_last_error.c_str(); }

const char* corral_version(void) { return "0.1.0"; }

void corral_string_free(char* s) { std::free(s); }

corral_status corral_rng_create(uint64_t seed, uint64_t stream_id, corral_rng** out) {
  if (!out) return fail(CORRAL_ERR_ARG, "null output pointer");
  return guarded([&] {
    *out = new corral_rng{corral::RngStream(seed, stream_id)};
    return CORRAL_OK;
  });
}

void corral_rng_destroy(corral_rng* rng) { delete rng; }

corral_status corral_rng_uniform(corral_rng* rng, double* out) {
  if (!rng || !out) return fail(CORRAL_ERR_ARG, "null argument");
  *out = rng->stream.uniform();
  return CORRAL_OK;
}

static void to_c(const corral::CorralParams& cp, corral_params* out) {
  out->C = cp.C;
  out->gamma = cp.gamma;
  out->eta = cp.eta;
  out->epsilon = cp.epsilon;
  out->mu = cp.mu;
  out->beta = cp.beta;
  out->lambda = cp.lambda;
}

corral_status corral_derive_params(double p, int d, int T, int S, double alpha,
                                   corral_params* out) {
  if (!out) return fail(CORRAL_ERR_ARG, "null output pointer");
  return guarded([&] {
    const auto cp = alpha > 0.0
                        ? corral::derive_params(p, d, T, S, corral::DomainSpec::Kind::Gauge, alpha)
                        : corral::derive_params(p, d, T, S);
    to_c(cp, out);
    return CORRAL_OK;
  });
}

corral_status corral_learner_create(double p, int d, int T, int S, const corral_params* overrides,
                                    corral_learner** out) {
  if (!out) return fail(CORRAL_ERR_ARG, "null output pointer");
  return guarded([&] {
    auto cp = corral::derive_params(p, d, T, S);
    if (overrides) {
      auto set = [](double v, double& dst) {
        if (!std::isnan(v)) dst = v;
      };
      set(overrides->gamma, cp.gamma);
      set(overrides->eta, cp.eta);
      set(overrides->epsilon, cp.epsilon);
      set(overrides->mu, cp.mu);
      set(overrides->beta, cp.beta);
      set(overrides->lambda, cp.lambda);
      cp.validate();
    }
    *out = new corral_learner{corral::CorralLearner(cp, corral::DomainSpec::lp_ball(p))};
    return CORRAL_OK;
  });
}

void corral_learner_destroy(corral_learner* learner) { delete learner; }

corral_status corral_learner_select(corral_learner* learner, corral_rng* rng, double* x_out,
                                    size_t d) {
  if (!learner || !rng || !x_out) return fail(CORRAL_ERR_ARG, "null argument");
  if (d != static_cast<size_t>(learner->learner.params().d)) {
    return fail(CORRAL_ERR_ARG, "output buffer size does not match d");
  }
  return guarded([&] {
    const corral::Vec& x = learner->learner.select(rng->stream);
    for (size_t i = 0; i < d; ++i) x_out[i] = x[static_cast<Eigen::Index>(i)];
    learner->selected = true;
    return CORRAL_OK;
  });
}

corral_status corral_learner_observe(corral_learner* learner, double realized_loss) {
  if (!learner) return fail(CORRAL_ERR_ARG, "null learner");
  if (!learner->selected) return fail(CORRAL_ERR_CONTRACT, "observe called before select");
  return guarded([&] {
    learner->learner.observe(realized_loss);
    learner->selected = false;
    return CORRAL_OK;
  });
}

corral_status corral_learner_params(const corral_learner* learner, corral_params* out) {
  if (!learner || !out) return fail(CORRAL_ERR_ARG, "null argument");
  to_c(learner->learner.params(), out);
  return CORRAL_OK;
}

corral_status corral_learner_active(const corral_learner* learner, int* out) {
  if (!learner || !out) return fail(CORRAL_ERR_ARG, "null argument");
  *out = learner->learner.active();
  return CORRAL_OK;
}

corral_status corral_experiment_load(const char* config_path, corral_experiment** out) {
  if (!config_path || !out) return fail(CORRAL_ERR_ARG, "null argument");
  return guarded([&] {
    *out = new corral_experiment{corral::load_config(config_path), {}, false};
    return CORRAL_OK;
  });
}

corral_status corral_experiment_parse(const char* config_json, corral_experiment** out) {
  if (!config_json || !out) return fail(CORRAL_ERR_ARG, "null argument");
  return guarded([&] {
    *out = new corral_experiment{corral::parse_config(config_json), {}, false};
    return CORRAL_OK;
  });
}

void corral_experiment_destroy(corral_experiment* exp) { delete exp; }

corral_status corral_experiment_set_full_trace(corral_experiment* exp, int on) {
  if (!exp) return fail(CORRAL_ERR_ARG, "null experiment");
  exp->cfg.full_trace = on != 0;
  return CORRAL_OK;
}

const char* corral_experiment_output(const corral_experiment* exp) {
  return exp ? exp->cfg.output.c_str() : "";
}

corral_status corral_experiment_run(corral_experiment* exp, int jobs) {
  if (!exp) return fail(CORRAL_ERR_ARG, "null experiment");
  if (jobs < 1) return fail(CORRAL_ERR_ARG, "jobs must be >= 1");
  return guarded([&] {
    exp->result = corral::run_experiment(exp->cfg, jobs);
    exp->ran = true;
    for (const auto& e : exp->result.errors) spdlog::warn("{}", e);
    if (exp->result.numerical_failure) {
      return fail(CORRAL_ERR_NUMERICAL, exp->result.errors.empty() ? std::string("numerical failure")
                                                                    : exp->result.errors.front());
    }
    return CORRAL_OK;
  });
}

corral_status corral_experiment_row_count(const corral_experiment* exp, size_t* out) {
  if (!exp || !out) return fail(CORRAL_ERR_ARG, "null argument");
  *out = exp->result.rows.size();
  return CORRAL_OK;
}

corral_status corral_experiment_write_csv(const corral_experiment* exp, const char* path) {
  if (!exp || !path) return fail(CORRAL_ERR_ARG, "null argument");
  if (!exp->ran) return fail(CORRAL_ERR_CONTRACT, "experiment has not run");
  return guarded([&] {
    std::ofstream os(path, std::ios::binary);
    if (!os) return fail(CORRAL_ERR_IO, std::string("cannot write '") + path + "'");
    corral::write_csv(os, exp->result.rows);
    if (!os) return fail(CORRAL_ERR_IO, std::string("write failed for '") + path + "'");
    return CORRAL_OK;
  });
}

corral_status corral_experiment_csv(const corral_experiment* exp, char** out) {
  if (!exp || !out) return fail(CORRAL_ERR_ARG, "null argument");
  if (!exp->ran) return fail(CORRAL_ERR_CONTRACT, "experiment has not run");
  return guarded([&] {
    std::ostringstream os;
    corral::write_csv(os, exp->result.rows);
    *out = dup_string(os.str());
    return CORRAL_OK;
  });
}

corral_status corral_experiment_summary(const corral_experiment* exp, char** out) {
  if (!exp || !out) return fail(CORRAL_ERR_ARG, "null argument");
  if (!exp->ran) return fail(CORRAL_ERR_CONTRACT, "experiment has not run");
  return guarded([&] {
    *out = dup_string(summary_text(exp->result.rows));
    return CORRAL_OK;
  });
}

corral_status corral_aggregate(const char* const* paths, size_t n, char** out) {
  if (!paths || !out || n == 0) return fail(CORRAL_ERR_ARG, "aggregate needs at least one path");
  return guarded([&] {
    std::vector<corral::TraceRow> rows;
    for (size_t i = 0; i < n; ++i) {
      std::ifstream in(paths[i], std::ios::binary);
      if (!in) return fail(CORRAL_ERR_IO, std::string("cannot open '") + paths[i] + "'");
      try {
        auto part = corral::read_csv(in);
        for (auto& r : part) rows.push_back(std::move(r));
      } catch (const corral::ConfigError& e) {
        throw corral::ConfigError(std::string(paths[i]) + ": " + e.what());
      }
    }
    *out = dup_string(summary_text(rows));
    return CORRAL_OK;
  });
}

corral_status corral_oracle(const char* loss_path, int switches, double p, double* value,
                            char** report) {
  if (!loss_path) return fail(CORRAL_ERR_ARG, "null loss path");
  return guarded([&] {
    const corral::LossSequence losses = corral::load_losses(loss_path);
    if (switches < 1 || switches > losses.T) {
      throw corral::ConfigError("switches must be in [1, T]");
    }
    if (!(p > 1.0 && p <= 2.0)) throw corral::ConfigError("p must lie in (1, 2]");
    const auto dp = corral::dp_switching_comparator(losses, switches, p);
    if (value) *value = dp.value;
    if (report) {
      std::ostringstream os;
      os << "value " << corral::format_double(dp.value) << '\n';
      const auto& c = dp.comparator;
      for (int k = 0; k < c.segments(); ++k) {
        os << "segment " << k + 1 << " rounds " << c.starts[k] + 1 << ".." << c.segment_end(k)
           << " anchor";
        for (Eigen::Index i = 0; i < c.anchors[k].size(); ++i) {
          os << ' ' << corral::format_double(c.anchors[k][i]);
        }
        os << '\n';
      }
      *report = dup_string(os.str());
    }
    return CORRAL_OK;
  });
}

corral_status corral_generate_losses(const char* config_path, uint64_t seed, const char* out_path) {
  if (!config_path || !out_path) return fail(CORRAL_ERR_ARG, "null argument");
  return guarded([&] {
    const auto cfg = corral::load_config(config_path);
    const auto losses = corral::make_losses(cfg, seed);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) return fail(CORRAL_ERR_IO, std::string("cannot write '") + out_path + "'");
    corral::write_losses(os, losses);
    return CORRAL_OK;
  });
}

}  // extern "C"
