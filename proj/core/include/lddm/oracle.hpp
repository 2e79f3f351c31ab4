#pragma once

#include <string>
#include <vector>

#include "lddm/discrete_chain.hpp"
#include "lddm/sawtooth.hpp"
#include "lddm/schedules.hpp"
#include "lddm/sequences.hpp"

namespace lddm {

// Fully tabulated target over clean sequences (alphabet K-1, mask excluded),
// optionally decomposed over a finite latent support.
struct EnumerableTarget {
  std::string name;
  int S = 2;
  int K = 3;               // mask included
  Eigen::VectorXd q0;      // (K-1)^S entries, sums to 1
  std::vector<double> latent_weights;       // empty when no latent is attached
  std::vector<Eigen::VectorXd> q0_given_y;  // one table per latent value

  int clean_states() const;
  int masked_states() const;  // K^S
  bool has_latent() const { return !latent_weights.empty(); }
  void validate() const;
};

// Mixed-radix codecs. Clean sequences use base K-1, noisy states base K
// (digit K-1 = mask), position 0 = most significant.
std::vector<int> decode_state(int code, int S, int base);
int encode_state(const std::vector<int>& digits, int base);

// Exact forward/reverse tables at one step t.
struct ReverseTables {
  Eigen::VectorXd q_t;           // marginal of x_t, K^S entries
  RowMatrixXd q_prev_given_t;    // rows: x_t; cols: x_{t-1}
  std::vector<RowMatrixXd> position_marginals;  // per position: K^S x K
};

ReverseTables enumerate_reverse(const EnumerableTarget& target, const MaskSchedule& ms, int t);

double target_entropy(const EnumerableTarget& target);

// Prop. 1: sum_t E[KL(q_{t-1|t} || prod_i q^i_{t-1|t})] + H(q0), exact.
double factorization_bound(const EnumerableTarget& target, const MaskSchedule& ms);

// Prop. 2: the latent-conditioned analogue, averaged over the finite support.
double conditional_factorization_bound(const EnumerableTarget& target, const MaskSchedule& ms);

// Law over clean sequences of the reverse chain that samples each position
// independently from the exact per-position reverse marginals, started at the
// all-mask state and run down the full grid.
Eigen::VectorXd product_reverse_law(const EnumerableTarget& target, const MaskSchedule& ms);

// Exact per-position posterior of x0 given x_t (zero mass on the mask column;
// unmasked positions collapse to their observed token).
CategoricalField posterior_x0_marginals(const EnumerableTarget& target, const MaskSchedule& ms,
                                        int t, const TokenSequence& xt);

// Exact discrete NELBO of a factorized predictor on an enumerable target:
// sum_t E_{x0, x_t} lambda_t sum_{i masked} ln <pred_i, onehot(x0_i)>.
double exact_nelbo(const EnumerableTarget& target, const MaskSchedule& ms,
                   const std::function<CategoricalField(const TokenSequence& xt, int t)>& predict);

// Inverse-CDF sampler over q0.
TokenSequence sample_from_target(const EnumerableTarget& target, RngStream& rng);
TokenBatch sample_batch_from_target(const EnumerableTarget& target, int n, RngStream& rng);

// Built-in targets.
EnumerableTarget correlated_pair_target();                   // q0(00) = q0(11) = 1/2, latent = shared bit
EnumerableTarget factorized_target(const std::vector<double>& p_one);  // independent Bernoulli bits
EnumerableTarget uninformative_latent_target();              // latent independent of X
EnumerableTarget correlated_triple_target();                 // S = 3 mixture with cross-position structure
EnumerableTarget sawtooth_mini_target(int S, int bins, const SawtoothConfig& cfg);
EnumerableTarget builtin_target(const std::string& name);

struct OracleReportRow {
  std::string target;
  int T = 0;
  double bound_unconditional = 0.0;
  double bound_conditional = 0.0;  // NaN when the target has no latent
  double entropy = 0.0;
};

// Text table over the built-in targets (CLI `oracle` verb).
std::vector<OracleReportRow> oracle_report(int T);
std::string format_oracle_report(const std::vector<OracleReportRow>& rows);

}  // namespace lddm
