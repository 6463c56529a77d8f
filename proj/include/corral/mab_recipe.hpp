#pragma once

#include "corral/core.hpp"
#include "corral/rng.hpp"
#include "corral/simplex.hpp"

namespace corral {

// argmin over the clipped simplex {sum a = 1, a >= eta} of <a, loss> + D_psi(a, prev) / eta
// with psi the negative entropy. Throws ConfigError if d * eta > 1.
Vec clipped_entropy_step(const Vec& prev, const Vec& loss_hat, double eta);

struct MabParams {
  int d = 2;
  int T = 1;
  int M = 8;             // base copies
  double eta = 0.0;      // clipping threshold and base learning rate
  double epsilon = 0.0;  // meta learning rate

  void validate() const;
};

// eta = sqrt(ln d / (d T)), epsilon = sqrt(ln M / (4 d T)).
MabParams default_mab_params(int d, int T, int M = 8);

// M clipped-Exp3 copies combined by exponential weights with the bias
// b_j = eta sum_n a_{j,n} / q_n subtracted from the meta losses.
class MabCorral {
 public:
  explicit MabCorral(const MabParams& params);

  // Samples an arm from the mixture q = sum p_i a_i (one categorical draw).
  int select(RngStream& rng);
  // Feedback is the played arm's loss only.
  void observe(double arm_loss);

  const MabParams& params() const { return params_; }
  int round_index() const { return t_; }
  const Vec& weights() const { return p_; }
  const Vec& mixture() const { return q_; }
  const Vec& base(int i) const { return bases_[i]; }
  const Vec& last_bias() const { return b_; }
  const Vec& last_loss_estimate() const { return ell_hat_; }
  // <p_t, b_t> with the pre-update weights of the last round.
  double last_bias_mass() const { return bias_mass_; }
  const RoundRecord& last_record() const { return record_; }

 private:
  MabParams params_;
  int t_ = 0;
  int arm_ = -1;
  bool awaiting_feedback_ = false;
  std::vector<Vec> bases_;
  Vec p_;
  Vec q_;
  Vec b_;
  Vec c_hat_;
  Vec ell_hat_;
  Vec rates_;
  Vec floors_;
  double bias_mass_ = 0.0;
  RoundRecord record_;
};

}  // namespace corral
