#include "winres/records.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

namespace winres {

std::vector<RestrictedRecord> restrict_records(const std::vector<LongRow>& rows,
                                               double tau,
                                               const std::vector<int>& priority) {
  if (tau <= 0.0) throw std::invalid_argument("restrict: tau must be positive");
  if (priority.empty()) throw std::invalid_argument("restrict: empty priority order");
  const int q_count = static_cast<int>(priority.size());
  std::map<int, int> level_of;  // event_type -> priority level
  for (int q = 0; q < q_count; ++q) {
    if (priority[q] == 0) throw std::invalid_argument("restrict: event_type 0 is the follow-up row");
    if (!level_of.emplace(priority[q], q).second)
      throw std::invalid_argument("restrict: duplicate event_type in priority order");
  }

  struct Subject {
    int first_seen;
    const LongRow* followup = nullptr;
    std::vector<const LongRow*> comp;
  };
  std::map<std::string, Subject> subjects;
  int seen = 0;
  for (const auto& row : rows) {
    auto [it, inserted] = subjects.try_emplace(row.id);
    if (inserted) {
      it->second.first_seen = seen++;
      it->second.comp.assign(q_count, nullptr);
    }
    Subject& s = it->second;
    if (row.event_type == 0) {
      if (s.followup)
        throw std::invalid_argument("restrict: duplicate follow-up row for id " + row.id);
      s.followup = &row;
    } else {
      auto lv = level_of.find(row.event_type);
      if (lv == level_of.end()) continue;  // component outside the hierarchy
      if (s.comp[lv->second])
        throw std::invalid_argument("restrict: duplicate component row for id " + row.id);
      s.comp[lv->second] = &row;
    }
  }

  std::vector<const Subject*> ordered(subjects.size());
  std::vector<const std::string*> ids(subjects.size());
  for (const auto& [id, s] : subjects) {
    ordered[s.first_seen] = &s;
    ids[s.first_seen] = &id;
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<RestrictedRecord> out;
  out.reserve(subjects.size());
  for (size_t k = 0; k < ordered.size(); ++k) {
    const Subject& s = *ordered[k];
    if (!s.followup)
      throw std::invalid_argument("restrict: subject " + *ids[k] + " has no follow-up row");
    const LongRow& fu = *s.followup;

    // follow-up at or past tau is complete observation through tau whatever
    // the status code; status 1 means followed beyond the recorded end
    double censored_at = (fu.status == 0 && fu.time < tau) ? fu.time : inf;

    RestrictedRecord rec;
    rec.subject_id = *ids[k];
    rec.arm = fu.arm;
    rec.covariates = fu.covariates;
    rec.censor_time = std::min(fu.time, tau);
    rec.censor_status = censored_at < tau ? 1 : 0;
    rec.y_tilde.resize(q_count);
    rec.delta.resize(q_count);
    rec.bar_delta.resize(q_count);
    rec.gate_u.resize(q_count);
    for (int q = 0; q < q_count; ++q) {
      double ev = inf;
      if (s.comp[q]) {
        ev = s.comp[q]->time;
        if (ev > fu.time)
          throw std::invalid_argument("restrict: component event after follow-up end for id " +
                                      *ids[k]);
      }
      rec.y_tilde[q] = std::min({ev, censored_at, tau});
      rec.delta[q] = ev <= std::min(censored_at, tau) ? 1 : 0;
      rec.bar_delta[q] = 1;
      for (int b = 0; b < q; ++b)
        if (rec.delta[b]) rec.bar_delta[q] = 0;
      // u is the common event-free time on higher-priority components; for
      // q = 0 the gate is vacuous and u = tau keeps the tie ratios at one
      rec.gate_u[q] = (q == 0 || !rec.bar_delta[q]) ? tau : std::min(censored_at, tau);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace winres
