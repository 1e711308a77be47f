#include "winres/kaplan_meier.hpp"

#include <algorithm>
#include <stdexcept>

namespace winres {

double KaplanMeierCurve::eval(double t) const {
  // first jump strictly after t; the value in force is the one before it
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return 1.0;
  return survival_values[static_cast<size_t>(it - jump_times.begin()) - 1];
}

KaplanMeierCurve fit_km(const std::vector<SurvivalSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("fit_km: no samples");
  const int n = static_cast<int>(samples.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return samples[a].observed_time < samples[b].observed_time;
  });

  KaplanMeierCurve curve;
  double surv = 1.0;
  int i = 0;
  int at_risk = n;
  while (i < n) {
    const double t = samples[order[i]].observed_time;
    int events = 0, leaving = 0;
    while (i < n && samples[order[i]].observed_time == t) {
      events += samples[order[i]].indicator;
      ++leaving;
      ++i;
    }
    if (events > 0) {
      surv *= 1.0 - static_cast<double>(events) / at_risk;
      curve.jump_times.push_back(t);
      curve.survival_values.push_back(surv);
      curve.n_at_risk.push_back(at_risk);
    }
    at_risk -= leaving;
  }
  return curve;
}

KaplanMeierCurve fit_censoring_km(const std::vector<SurvivalSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("fit_censoring_km: no samples");
  return fit_km(samples);
}

}  // namespace winres
