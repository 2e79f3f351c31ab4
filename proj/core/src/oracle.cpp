#include "lddm/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lddm {

namespace {

constexpr long kStateBudget = 1000000;

long ipow(int base, int exp) {
  long v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double entropy_of(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlogx(p[i]);
  return h;
}

void check_normalized(const Eigen::VectorXd& p, const std::string& what) {
  require((p.array() >= -1e-15).all(), what + ": negative mass");
  require(std::abs(p.sum() - 1.0) < 1e-12, what + ": table does not sum to 1");
}

}  // namespace

int EnumerableTarget::clean_states() const { return static_cast<int>(ipow(K - 1, S)); }
int EnumerableTarget::masked_states() const { return static_cast<int>(ipow(K, S)); }

void EnumerableTarget::validate() const {
  require(S >= 1 && S <= 4, "EnumerableTarget: S must lie in [1,4]");
  require(K >= 2 && K <= 4, "EnumerableTarget: K must lie in [2,4]");
  require(q0.size() == clean_states(), "EnumerableTarget: q0 size mismatch");
  check_normalized(q0, "EnumerableTarget q0");
  if (has_latent()) {
    require(latent_weights.size() == q0_given_y.size(),
            "EnumerableTarget: latent weight/table count mismatch");
    double wsum = 0.0;
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(q0.size());
    for (size_t j = 0; j < latent_weights.size(); ++j) {
      require(latent_weights[j] >= 0.0, "EnumerableTarget: negative latent weight");
      require(q0_given_y[j].size() == q0.size(), "EnumerableTarget: conditional size mismatch");
      check_normalized(q0_given_y[j], "EnumerableTarget q0|y");
      wsum += latent_weights[j];
      mix += latent_weights[j] * q0_given_y[j];
    }
    require(std::abs(wsum - 1.0) < 1e-12, "EnumerableTarget: latent weights must sum to 1");
    require((mix - q0).cwiseAbs().maxCoeff() < 1e-9,
            "EnumerableTarget: q0 must equal the latent mixture");
  }
}

std::vector<int> decode_state(int code, int S, int base) {
  std::vector<int> digits(S);
  for (int i = S - 1; i >= 0; --i) {
    digits[i] = code % base;
    code /= base;
  }
  return digits;
}

int encode_state(const std::vector<int>& digits, int base) {
  int code = 0;
  for (int d : digits) code = code * base + d;
  return code;
}

namespace {

void check_capacity(const EnumerableTarget& target, const MaskSchedule& ms) {
  long states = ipow(target.K, target.S);
  if (states * (ms.T + 1) > kStateBudget) {
    throw capacity_error("oracle: state space exceeds the enumeration budget");
  }
}

// Enumerate all x_t reachable from clean x0 (each position kept or masked),
// together with the accumulated probability factor.
template <class Fn>
void for_each_masking(const std::vector<int>& x0, int K, double keep, Fn&& fn) {
  int S = static_cast<int>(x0.size());
  std::vector<int> state(S);
  long combos = ipow(2, S);
  for (long m = 0; m < combos; ++m) {
    double w = 1.0;
    for (int i = 0; i < S; ++i) {
      if ((m >> i) & 1) {
        state[i] = K - 1;
        w *= 1.0 - keep;
      } else {
        state[i] = x0[i];
        w *= keep;
      }
    }
    if (w > 0.0) fn(state, w);
  }
}

// Joint table of (x_{t-1}, x_t) via the per-position two-step kernel:
//   (a, a): gb_{t-1} * gamma_t = gb_t      (a, m): gb_{t-1} - gb_t
//   (m, m): 1 - gb_{t-1}
struct JointTables {
  Eigen::VectorXd q_prev;  // marginal of x_{t-1}
  Eigen::VectorXd q_t;
  RowMatrixXd joint;  // rows x_{t-1}, cols x_t
};

JointTables joint_two_step(const Eigen::VectorXd& q0, int S, int K, double gb_prev,
                           double gb_t) {
  long states = ipow(K, S);
  JointTables tb;
  tb.q_prev = Eigen::VectorXd::Zero(states);
  tb.q_t = Eigen::VectorXd::Zero(states);
  tb.joint = RowMatrixXd::Zero(states, states);

  double keep_pair = gb_t;
  double drop_pair = gb_prev - gb_t;
  double masked_pair = 1.0 - gb_prev;

  long cleans = ipow(K - 1, S);
  std::vector<int> u(S), v(S);
  for (long c = 0; c < cleans; ++c) {
    double w0 = q0[c];
    if (w0 == 0.0) continue;
    std::vector<int> x0 = decode_state(static_cast<int>(c), S, K - 1);
    long pair_combos = ipow(3, S);  // per position: (a,a), (a,m), (m,m)
    for (long pc = 0; pc < pair_combos; ++pc) {
      long rem = pc;
      double w = w0;
      for (int i = 0; i < S; ++i) {
        int choice = static_cast<int>(rem % 3);
        rem /= 3;
        switch (choice) {
          case 0:
            u[i] = x0[i];
            v[i] = x0[i];
            w *= keep_pair;
            break;
          case 1:
            u[i] = x0[i];
            v[i] = K - 1;
            w *= drop_pair;
            break;
          default:
            u[i] = K - 1;
            v[i] = K - 1;
            w *= masked_pair;
            break;
        }
        if (w == 0.0) break;
      }
      if (w == 0.0) continue;
      int cu = encode_state(u, K);
      int cv = encode_state(v, K);
      tb.joint(cu, cv) += w;
      tb.q_prev[cu] += w;
      tb.q_t[cv] += w;
    }
  }
  return tb;
}

ReverseTables reverse_from_joint(const JointTables& tb, int S, int K) {
  long states = tb.q_t.size();
  ReverseTables out;
  out.q_t = tb.q_t;
  out.q_prev_given_t = RowMatrixXd::Zero(states, states);
  out.position_marginals.assign(S, RowMatrixXd::Zero(states, K));
  for (long v = 0; v < states; ++v) {
    double qv = tb.q_t[v];
    if (qv <= 0.0) continue;
    for (long u = 0; u < states; ++u) {
      double p = tb.joint(u, v) / qv;
      if (p == 0.0) continue;
      out.q_prev_given_t(v, u) = p;
      std::vector<int> du = decode_state(static_cast<int>(u), S, K);
      for (int i = 0; i < S; ++i) out.position_marginals[i](v, du[i]) += p;
    }
  }
  return out;
}

double kl_joint_vs_product(const ReverseTables& rt, int S, int K, long v) {
  double kl = 0.0;
  long states = rt.q_prev_given_t.cols();
  for (long u = 0; u < states; ++u) {
    double p = rt.q_prev_given_t(v, u);
    if (p <= 0.0) continue;
    std::vector<int> du = decode_state(static_cast<int>(u), S, K);
    double q = 1.0;
    for (int i = 0; i < S; ++i) q *= rt.position_marginals[i](v, du[i]);
    kl += p * std::log(p / q);
  }
  return kl;
}

double bound_for_table(const Eigen::VectorXd& q0, int S, int K, const MaskSchedule& ms) {
  double acc = 0.0;
  for (int t = 1; t <= ms.T; ++t) {
    JointTables tb = joint_two_step(q0, S, K, ms.gamma_bar[t - 1], ms.gamma_bar[t]);
    ReverseTables rt = reverse_from_joint(tb, S, K);
    long states = rt.q_t.size();
    for (long v = 0; v < states; ++v) {
      if (rt.q_t[v] <= 0.0) continue;
      acc += rt.q_t[v] * kl_joint_vs_product(rt, S, K, v);
    }
  }
  return acc;
}

}  // namespace

ReverseTables enumerate_reverse(const EnumerableTarget& target, const MaskSchedule& ms, int t) {
  target.validate();
  check_capacity(target, ms);
  require(t >= 1 && t <= ms.T, "enumerate_reverse: t out of range");
  JointTables tb =
      joint_two_step(target.q0, target.S, target.K, ms.gamma_bar[t - 1], ms.gamma_bar[t]);
  ReverseTables rt = reverse_from_joint(tb, target.S, target.K);
  // Rows of the conditional tables must renormalize after the Bayes inversion.
  for (long v = 0; v < rt.q_t.size(); ++v) {
    if (rt.q_t[v] <= 1e-300) continue;
    double rowsum = rt.q_prev_given_t.row(v).sum();
    if (std::abs(rowsum - 1.0) > 1e-12) {
      throw numerical_error("enumerate_reverse: conditional row does not renormalize");
    }
  }
  return rt;
}

double target_entropy(const EnumerableTarget& target) {
  target.validate();
  return entropy_of(target.q0);
}

double factorization_bound(const EnumerableTarget& target, const MaskSchedule& ms) {
  target.validate();
  check_capacity(target, ms);
  return bound_for_table(target.q0, target.S, target.K, ms) + entropy_of(target.q0);
}

double conditional_factorization_bound(const EnumerableTarget& target, const MaskSchedule& ms) {
  target.validate();
  require(target.has_latent(), "conditional_factorization_bound: target has no latent");
  check_capacity(target, ms);
  double acc = 0.0;
  for (size_t j = 0; j < target.latent_weights.size(); ++j) {
    double w = target.latent_weights[j];
    if (w == 0.0) continue;
    acc += w * (bound_for_table(target.q0_given_y[j], target.S, target.K, ms) +
                entropy_of(target.q0_given_y[j]));
  }
  return acc;
}

Eigen::VectorXd product_reverse_law(const EnumerableTarget& target, const MaskSchedule& ms) {
  target.validate();
  check_capacity(target, ms);
  long states = ipow(target.K, target.S);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(states);
  std::vector<int> all_mask(target.S, target.K - 1);
  p[encode_state(all_mask, target.K)] = 1.0;

  for (int t = ms.T; t >= 1; --t) {
    JointTables tb =
        joint_two_step(target.q0, target.S, target.K, ms.gamma_bar[t - 1], ms.gamma_bar[t]);
    ReverseTables rt = reverse_from_joint(tb, target.S, target.K);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(states);
    for (long v = 0; v < states; ++v) {
      if (p[v] <= 0.0) continue;
      for (long u = 0; u < states; ++u) {
        std::vector<int> du = decode_state(static_cast<int>(u), target.S, target.K);
        double q = 1.0;
        for (int i = 0; i < target.S && q > 0.0; ++i) {
          q *= rt.position_marginals[i](v, du[i]);
        }
        if (q > 0.0) next[u] += p[v] * q;
      }
    }
    p = std::move(next);
  }

  // Restrict to clean sequences; the chain must have fully unmasked.
  long cleans = ipow(target.K - 1, target.S);
  Eigen::VectorXd law = Eigen::VectorXd::Zero(cleans);
  double mass = 0.0;
  for (long c = 0; c < cleans; ++c) {
    std::vector<int> digits = decode_state(static_cast<int>(c), target.S, target.K - 1);
    law[c] = p[encode_state(digits, target.K)];
    mass += law[c];
  }
  require(std::abs(mass - 1.0) < 1e-9, "product_reverse_law: mass escaped the clean support");
  return law / mass;
}

CategoricalField posterior_x0_marginals(const EnumerableTarget& target, const MaskSchedule& ms,
                                        int t, const TokenSequence& xt) {
  (void)ms;
  (void)t;
  target.validate();
  require(xt.size() == target.S && xt.vocab == target.K, "posterior_x0_marginals: shape mismatch");
  CategoricalField field;
  field.probs = RowMatrixXd::Zero(target.S, target.K);
  // The survival factors cancel in the posterior; only consistency with the
  // unmasked positions matters.
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(target.clean_states());
  long cleans = target.clean_states();
  for (long c = 0; c < cleans; ++c) {
    std::vector<int> x0 = decode_state(static_cast<int>(c), target.S, target.K - 1);
    bool consistent = true;
    for (int i = 0; i < target.S && consistent; ++i) {
      if (xt.tokens[i] != xt.mask_id() && xt.tokens[i] != x0[i]) consistent = false;
    }
    if (consistent) weights[c] = target.q0[c];
  }
  double norm = weights.sum();
  require(norm > 0.0, "posterior_x0_marginals: x_t unreachable under q0");
  for (long c = 0; c < cleans; ++c) {
    if (weights[c] == 0.0) continue;
    std::vector<int> x0 = decode_state(static_cast<int>(c), target.S, target.K - 1);
    for (int i = 0; i < target.S; ++i) field.probs(i, x0[i]) += weights[c] / norm;
  }
  return field;
}

double exact_nelbo(const EnumerableTarget& target, const MaskSchedule& ms,
                   const std::function<CategoricalField(const TokenSequence& xt, int t)>& predict) {
  target.validate();
  check_capacity(target, ms);
  double total = 0.0;
  long states = ipow(target.K, target.S);
  for (int t = 1; t <= ms.T; ++t) {
    double lam = elbo_weight_discrete(ms, t);
    double keep = ms.gamma_bar[t];
    for (long v = 0; v < states; ++v) {
      std::vector<int> xt_digits = decode_state(static_cast<int>(v), target.S, target.K);
      int masked = 0;
      for (int i = 0; i < target.S; ++i) masked += (xt_digits[i] == target.K - 1);
      if (masked == 0) continue;
      double kernel = std::pow(keep, target.S - masked) * std::pow(1.0 - keep, masked);
      if (kernel == 0.0) continue;
      TokenSequence xt(xt_digits, target.K);
      CategoricalField pred = predict(xt, t);
      long cleans = target.clean_states();
      for (long c = 0; c < cleans; ++c) {
        if (target.q0[c] == 0.0) continue;
        std::vector<int> x0 = decode_state(static_cast<int>(c), target.S, target.K - 1);
        bool consistent = true;
        for (int i = 0; i < target.S && consistent; ++i) {
          if (xt_digits[i] != target.K - 1 && xt_digits[i] != x0[i]) consistent = false;
        }
        if (!consistent) continue;
        double inner = 0.0;
        for (int i = 0; i < target.S; ++i) {
          if (xt_digits[i] != target.K - 1) continue;
          inner += std::log(std::max(pred.probs(i, x0[i]), kLogProbFloor));
        }
        total += target.q0[c] * kernel * lam * inner;
      }
    }
  }
  return total;
}

TokenSequence sample_from_target(const EnumerableTarget& target, RngStream& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  long cleans = target.clean_states();
  long pick = cleans - 1;
  for (long c = 0; c < cleans; ++c) {
    acc += target.q0[c];
    if (u < acc) {
      pick = c;
      break;
    }
  }
  return TokenSequence(decode_state(static_cast<int>(pick), target.S, target.K - 1), target.K);
}

TokenBatch sample_batch_from_target(const EnumerableTarget& target, int n, RngStream& rng) {
  TokenBatch tb;
  tb.vocab = target.K;
  tb.tokens.resize(n, target.S);
  for (int b = 0; b < n; ++b) {
    TokenSequence s = sample_from_target(target, rng);
    for (int i = 0; i < target.S; ++i) tb.tokens(b, i) = s.tokens[i];
  }
  return tb;
}

EnumerableTarget correlated_pair_target() {
  EnumerableTarget t;
  t.name = "corr-pair";
  t.S = 2;
  t.K = 3;
  t.q0 = Eigen::VectorXd::Zero(4);
  t.q0[encode_state({0, 0}, 2)] = 0.5;
  t.q0[encode_state({1, 1}, 2)] = 0.5;
  t.latent_weights = {0.5, 0.5};
  Eigen::VectorXd d0 = Eigen::VectorXd::Zero(4), d1 = Eigen::VectorXd::Zero(4);
  d0[encode_state({0, 0}, 2)] = 1.0;
  d1[encode_state({1, 1}, 2)] = 1.0;
  t.q0_given_y = {d0, d1};
  t.validate();
  return t;
}

EnumerableTarget factorized_target(const std::vector<double>& p_one) {
  EnumerableTarget t;
  t.name = "factorized";
  t.S = static_cast<int>(p_one.size());
  t.K = 3;
  long cleans = ipow(2, t.S);
  t.q0.resize(cleans);
  for (long c = 0; c < cleans; ++c) {
    std::vector<int> bits = decode_state(static_cast<int>(c), t.S, 2);
    double w = 1.0;
    for (int i = 0; i < t.S; ++i) w *= bits[i] ? p_one[i] : 1.0 - p_one[i];
    t.q0[c] = w;
  }
  t.validate();
  return t;
}

EnumerableTarget uninformative_latent_target() {
  EnumerableTarget t = correlated_pair_target();
  t.name = "uninformative-latent";
  t.latent_weights = {0.5, 0.5};
  t.q0_given_y = {t.q0, t.q0};
  t.validate();
  return t;
}

EnumerableTarget correlated_triple_target() {
  EnumerableTarget t;
  t.name = "corr-triple";
  t.S = 3;
  t.K = 3;
  std::vector<double> low{0.2, 0.2, 0.2}, high{0.8, 0.8, 0.8};
  Eigen::VectorXd q_low = factorized_target(low).q0;
  Eigen::VectorXd q_high = factorized_target(high).q0;
  t.q0 = 0.5 * q_low + 0.5 * q_high;
  t.latent_weights = {0.5, 0.5};
  t.q0_given_y = {q_low, q_high};
  t.validate();
  return t;
}

EnumerableTarget sawtooth_mini_target(int S, int bins, const SawtoothConfig& cfg) {
  require(bins >= 1, "sawtooth_mini_target: bins must be >= 1");
  EnumerableTarget t;
  t.name = "sawtooth-mini";
  t.S = S;
  t.K = 3;
  long cleans = ipow(2, S);
  t.q0 = Eigen::VectorXd::Zero(cleans);
  t.latent_weights.assign(bins, 1.0 / bins);
  t.q0_given_y.resize(bins);
  for (int j = 0; j < bins; ++j) {
    double y = (j + 0.5) / bins;
    Eigen::VectorXd tab(cleans);
    for (long c = 0; c < cleans; ++c) {
      std::vector<int> bits = decode_state(static_cast<int>(c), S, 2);
      double w = 1.0;
      for (int i = 0; i < S; ++i) {
        double omega = sawtooth_prob(i + 1, y, cfg);
        w *= bits[i] ? omega : 1.0 - omega;
      }
      tab[c] = w;
    }
    t.q0_given_y[j] = tab;
    t.q0 += t.latent_weights[j] * tab;
  }
  t.validate();
  return t;
}

EnumerableTarget builtin_target(const std::string& name) {
  if (name == "corr-pair") return correlated_pair_target();
  if (name == "factorized") return factorized_target({0.3, 0.7});
  if (name == "uninformative-latent") return uninformative_latent_target();
  if (name == "corr-triple") return correlated_triple_target();
  if (name == "sawtooth-mini") {
    SawtoothConfig cfg;
    cfg.seq_len = 4;
    return sawtooth_mini_target(4, 8, cfg);
  }
  throw invalid_argument("unknown builtin target: " + name);
}

std::vector<OracleReportRow> oracle_report(int T) {
  std::vector<std::pair<EnumerableTarget, int>> targets = {
      {correlated_pair_target(), 1},
      {correlated_pair_target(), T},
      {factorized_target({0.3, 0.7}), T},
      {uninformative_latent_target(), T},
      {correlated_triple_target(), T},
      {builtin_target("sawtooth-mini"), T},
  };
  std::vector<OracleReportRow> rows;
  for (auto& [target, horizon] : targets) {
    MaskSchedule ms = build_mask_schedule(horizon);
    OracleReportRow row;
    row.target = target.name;
    row.T = horizon;
    row.bound_unconditional = factorization_bound(target, ms);
    row.bound_conditional = target.has_latent()
                                ? conditional_factorization_bound(target, ms)
                                : std::numeric_limits<double>::quiet_NaN();
    row.entropy = target_entropy(target);
    rows.push_back(row);
  }
  return rows;
}

std::string format_oracle_report(const std::vector<OracleReportRow>& rows) {
  std::ostringstream os;
  os << "target                    T  bound_unconditional  bound_conditional  H(q0)\n";
  char buf[160];
  for (const auto& r : rows) {
    if (std::isnan(r.bound_conditional)) {
      std::snprintf(buf, sizeof(buf), "%-24s %3d  %19.4f  %17s  %.4f\n", r.target.c_str(), r.T,
                    r.bound_unconditional, "-", r.entropy);
    } else {
      std::snprintf(buf, sizeof(buf), "%-24s %3d  %19.4f  %17.4f  %.4f\n", r.target.c_str(), r.T,
                    r.bound_unconditional, r.bound_conditional, r.entropy);
    }
    os << buf;
  }
  return os.str();
}

}  // namespace lddm
