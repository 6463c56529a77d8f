#pragma once

#include "corral/core.hpp"
#include "corral/geometry.hpp"
#include "corral/rng.hpp"

namespace corral {

// A base learner's randomized proposal a~. With xi = 0 the proposal is
// sign * e_axis; with xi = 1 it is the normalized iterate a / ||a||.
struct Proposal {
  int xi = 0;
  int axis = 0;
  double sign = 1.0;
};

// Mirror-descent base learner on the clipped ball {||a|| <= 1 - gamma} of an l_p
// or gauge domain. Starts at the origin.
class BaseLearner {
 public:
  BaseLearner(int start_round, double eta, double gamma, DomainSpec domain, int d);

  // xi ~ Ber(||a||); xi = 0 then draws the signed basis vector uniformly from
  // the 2d candidates (one bounded-integer draw). a = 0 never reaches the
  // normalization branch since Ber(0) is always 0.
  Proposal propose(RngStream& rng) const;

  // OMD step against a dense loss estimate. A zero loss is a no-op.
  void update(const Vec& loss_hat);
  // Same step for loss_hat = value * e_axis without building the dense vector.
  void update_sparse(int axis, double value);

  Vec proposal_vector(const Proposal& prop) const;
  double dot_proposal(const Proposal& prop, const Vec& v) const;

  const Vec& iterate() const { return a_; }
  // ||a|| in the domain norm.
  double norm() const { return norm_; }
  // a / ||a||; zero when a = 0.
  const Vec& direction() const { return dir_; }

  int start_round() const { return start_round_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  double radius() const { return 1.0 - gamma_; }
  int dim() const { return static_cast<int>(a_.size()); }
  const DomainSpec& domain() const { return domain_; }

 private:
  void set_iterate(Vec a);

  int start_round_;
  double eta_;
  double gamma_;
  DomainSpec domain_;
  Vec a_;
  Vec grad_;  // cached grad R(a)
  Vec dir_;
  Vec scratch_;
  double norm_ = 0.0;
};

}  // namespace corral
