#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace winres {

// Long-format input row: event_type 0 is the follow-up row (status 0 censored,
// status 1 followed beyond the recorded end), event_type q >= 1 a component.
struct LongRow {
  std::string id;
  int arm = 0;
  double time = 0.0;
  int status = 0;
  int event_type = 0;
  Eigen::VectorXd covariates;
};

// One subject restricted at horizon tau. Vectors are indexed by priority level
// q = 0..Q-1 (highest priority first).
struct RestrictedRecord {
  std::string subject_id;
  int arm = 0;
  Eigen::VectorXd covariates;
  std::vector<double> y_tilde;    // T_q ^ C ^ tau
  std::vector<int> delta;         // 1{T_q <= C ^ tau}
  std::vector<int> bar_delta;     // prod_{k<q} (1 - delta_k), bar_delta[0] = 1
  std::vector<double> gate_u;     // C ^ tau while untriggered, tau otherwise
  double censor_time = 0.0;       // min(follow-up end, tau)
  int censor_status = 0;          // 1 when follow-up ended in censoring before tau

  int q_count() const { return static_cast<int>(y_tilde.size()); }
};

// Restrict long rows at tau with the given component priority order (highest
// first; entries are event_type codes).
std::vector<RestrictedRecord> restrict_records(const std::vector<LongRow>& rows,
                                               double tau,
                                               const std::vector<int>& priority);

}  // namespace winres
