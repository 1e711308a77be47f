#include "winres/reference.hpp"

#include <algorithm>
#include <cmath>

namespace winres {
namespace reference {

WinComponents estimate(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle) {
  std::vector<const RestrictedRecord*> trt, ctl;
  for (const auto& rec : records) (rec.arm == 1 ? trt : ctl).push_back(&rec);
  if (trt.empty() || ctl.empty())
    throw std::invalid_argument("reference::estimate: both arms must be nonempty");
  const int qn = records[0].q_count();
  const double eps2 = bundle.eps * bundle.eps;

  WinComponents out;
  out.method = method;
  out.tau = tau;
  out.pi_tq.assign(qn, 0.0);
  out.pi_cq.assign(qn, 0.0);

  for (const auto* ri : trt) {
    for (const auto* rj : ctl) {
      for (int q = 0; q < qn; ++q) {
        double win = 0.0, loss = 0.0;
        if (method == Method::raw) {
          bool tied = true;
          for (int k = 0; k < q; ++k)
            if (ri->y_tilde[k] != rj->y_tilde[k]) { tied = false; break; }
          if (tied && ri->y_tilde[q] > rj->y_tilde[q]) win = 1.0;
          if (tied && rj->y_tilde[q] > ri->y_tilde[q]) loss = 1.0;
        } else {
          auto ipcw_weight = [&](double t) {
            double denom = bundle.arm[1].censoring->survival(t, ri->covariates) *
                           bundle.arm[0].censoring->survival(t, rj->covariates);
            if (denom < eps2) { denom = eps2; out.floored_denominators++; }
            return 1.0 / denom;
          };
          if (q == 0) {
            if (ri->y_tilde[0] > rj->y_tilde[0] && rj->delta[0] == 1)
              win = ipcw_weight(rj->y_tilde[0]);
            if (rj->y_tilde[0] > ri->y_tilde[0] && ri->delta[0] == 1)
              loss = ipcw_weight(ri->y_tilde[0]);
          } else if (method == Method::ipcw) {
            bool gate = true;
            for (int k = 0; k < q; ++k)
              if (ri->y_tilde[k] != tau || rj->y_tilde[k] != tau) { gate = false; break; }
            if (gate) {
              if (ri->y_tilde[q] > rj->y_tilde[q] && rj->delta[q] == 1)
                win = ipcw_weight(tau);
              if (rj->y_tilde[q] > ri->y_tilde[q] && ri->delta[q] == 1)
                loss = ipcw_weight(tau);
            }
          } else {  // m-ipcw
            if (ri->bar_delta[q] && rj->bar_delta[q]) {
              if (ri->y_tilde[q] > rj->y_tilde[q] && rj->delta[q] == 1) {
                double t = rj->y_tilde[q];
                win = ratio_gt(bundle, tau, 1, q, ri->gate_u[q], t, ri->covariates) *
                      ratio_eq(bundle, tau, 0, q, rj->gate_u[q], t, rj->covariates) *
                      ipcw_weight(t);
              }
              if (rj->y_tilde[q] > ri->y_tilde[q] && ri->delta[q] == 1) {
                double t = ri->y_tilde[q];
                loss = ratio_eq(bundle, tau, 1, q, ri->gate_u[q], t, ri->covariates) *
                       ratio_gt(bundle, tau, 0, q, rj->gate_u[q], t, rj->covariates) *
                       ipcw_weight(t);
              }
            }
          }
        }
        out.pi_tq[q] += win;
        out.pi_cq[q] += loss;
      }
    }
  }

  const double scale = 1.0 / (static_cast<double>(trt.size()) * ctl.size());
  for (int q = 0; q < qn; ++q) {
    out.pi_tq[q] *= scale;
    out.pi_cq[q] *= scale;
    out.pi_t += out.pi_tq[q];
    out.pi_c += out.pi_cq[q];
  }
  out.pi_u = 1.0 - out.pi_t - out.pi_c;
  return out;
}

}  // namespace reference
}  // namespace winres
