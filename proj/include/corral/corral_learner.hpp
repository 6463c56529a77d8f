#pragma once

#include <Eigen/Cholesky>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "corral/base_learner.hpp"
#include "corral/core.hpp"
#include "corral/geometry.hpp"
#include "corral/rng.hpp"

namespace corral {

struct CorralParams {
  double p = 2.0;
  int d = 1;
  int T = 1;
  int S = 1;
  DomainSpec::Kind variant = DomainSpec::Kind::LpBall;
  double alpha = 1.0;

  double C = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  double mu = 0.0;
  double beta = 0.0;
  double lambda = 0.0;

  // Throws ConfigError naming the first violated bound.
  void validate() const;
  std::vector<std::pair<std::string_view, double>> as_diagnostics() const;
};

// Tuned parameters for the l_p ball (variant LpBall) or a gauge domain with
// curvature alpha (variant Gauge). Rejects beta > 1/2 and gamma >= 1.
CorralParams derive_params(double p, int d, int T, int S,
                           DomainSpec::Kind variant = DomainSpec::Kind::LpBall,
                           double alpha = 1.0);

// ---------------------------------------------------------------------------
// Literal per-round operations over dense vectors. CorralLearner implements the
// same arithmetic on a compact state; tests pin the two together.

// p_hat_i = p_i / sum_{j<t} p_j over the first t entries.
Vec renormalize(const Vec& p, int t);

struct SampledAction {
  Vec x;
  int rho = 0;
  int chosen = -1;
  int xi = 0;
};

// rho ~ Ber(beta); rho = 1 plays a uniform signed basis vector, otherwise i ~ p_hat
// and the chosen proposal is played. Draws: rho, then i (rho = 0 only), then the
// uniform direction (rho = 1 only).
SampledAction sample_action(const Vec& p_hat, const std::vector<Vec>& proposals,
                            const std::vector<int>& xis, double beta, RngStream& rng);

// 1 - sum p_hat_i ||a_i||.
double estimator_denominator(const Vec& p_hat, const Vec& norms);

// 1{rho=0} 1{xi=0} / (1-beta) * d (l.x) / D * x. Throws InvariantViolation if
// D < gamma - 1e-9.
Vec base_loss_estimator(const Vec& x, double realized, int rho, int xi, const Vec& p_hat,
                        const Vec& norms, double beta, double gamma);

// (beta/d) I + (1-beta) sum p_hat_i a~_i a~_i^T.
Mat build_mtilde(const Vec& p_hat, const std::vector<Vec>& proposals, double beta, int d);

// (1 / (lambda T (1-beta))) (1 - ||a_i||) / D.
Vec bias_terms(const Vec& p_hat, const Vec& norms, double lambda, double beta, int T,
               double gamma);

struct MetaEstimate {
  Vec ell_bar;  // M~^{-1} x (l.x)
  Vec c;        // <a~_i, ell_bar>, active slots
  Vec c_hat;    // length T, padded
};

MetaEstimate meta_loss_estimator(const Mat& mtilde, const Vec& x, double realized,
                                 const std::vector<Vec>& proposals, const Vec& p_hat,
                                 const Vec& b, int T);

// (1-mu) p e^{-eps c} / Z + mu / T with max-subtraction.
Vec fixed_share_update(const Vec& p, const Vec& c_hat, double epsilon, double mu);

// ---------------------------------------------------------------------------

struct InvariantTally {
  long long checks = 0;
  long long violations = 0;
  std::vector<std::string> messages;  // first few violations

  void check(bool ok, const char* what, int t, double value);
};

// Estimates from one draw of the round's randomness against a frozen state.
struct RoundDraw {
  int rho = 0;
  int chosen = -1;
  Proposal played;                  // uniform direction or the chosen proposal
  std::vector<Proposal> proposals;  // one per active base
};

// The meta/base learner over T base slots. Each round is split in two:
// select() starts the round's new base, draws proposals and returns x_t;
// observe() takes the scalar l_t . x_t and performs every update. The full loss
// vector never reaches the learner.
class CorralLearner {
 public:
  CorralLearner(const CorralParams& params, DomainSpec domain);

  const Vec& select(RngStream& rng);
  void observe(double realized);

  // select + feedback + observe in one call.
  const RoundRecord& round(const std::function<double(const Vec&)>& feedback, RngStream& rng);

  // Frozen-state helpers: draw the round's randomness for the current active set
  // without touching state, and evaluate both loss estimators for a given loss.
  void draw(RngStream& rng, RoundDraw& out) const;
  void estimates(const RoundDraw& draw, const Vec& loss, Vec& ell_hat, Vec& ell_bar) const;

  void enable_invariant_checks(bool on) { check_invariants_ = on; }
  const InvariantTally& invariants() const { return tally_; }

  int round_index() const { return t_; }  // rounds started so far
  int active() const { return static_cast<int>(bases_.size()); }
  const CorralParams& params() const { return params_; }
  const BaseLearner& base(int i) const { return bases_[i]; }
  const RoundRecord& last_record() const { return record_; }
  const RoundDraw& last_draw() const { return draw_; }

  // Full weight vector p_t over T slots (expanded from the compact form).
  Vec weights() const;
  // Renormalized weights over active slots.
  Vec renormalized() const;
  // Last round's quantities, valid after observe().
  const Vec& last_bias() const { return b_; }
  const Vec& last_c_hat() const { return c_hat_; }
  double last_c_hat_pad() const { return c_hat_pad_; }
  const Vec& last_p_hat() const { return p_hat_; }
  const Vec& last_ell_bar() const { return ell_bar_; }
  double last_denominator() const { return denom_; }
  const Mat& last_mtilde() const { return mtilde_; }

 private:
  void accumulate_mtilde(const RoundDraw& draw, const Vec& p_hat, Mat& m) const;
  void check_round_invariants();

  CorralParams params_;
  DomainSpec domain_;
  int d_;
  int T_;
  int t_ = 0;
  bool awaiting_feedback_ = false;
  bool check_invariants_ = false;

  std::vector<BaseLearner> bases_;
  std::vector<double> w_;  // weights of active slots
  double pad_;             // common weight of every inactive slot

  RoundDraw draw_;
  Vec x_;
  Vec p_hat_;
  Vec norms_;
  Vec b_;
  Vec c_hat_;
  double c_hat_pad_ = 0.0;
  double denom_ = 1.0;
  Mat mtilde_;
  Vec ell_bar_;
  Eigen::LLT<Mat> llt_;
  RoundRecord record_;
  InvariantTally tally_;
};

}  // namespace corral
