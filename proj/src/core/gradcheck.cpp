#include "bee/core/gradcheck.hpp"

#include <cmath>

namespace bee {

GradCheckReport gradcheck(const std::vector<ParamTensor*>& params,
                          const std::function<double()>& loss, double h,
                          double floor) {
  GradCheckReport report;
  for (ParamTensor* p : params) {
    for (int j = 0; j < p->value.cols(); ++j) {
      for (int i = 0; i < p->value.rows(); ++i) {
        const double orig = p->value(i, j);
        p->value(i, j) = orig + h;
        const double lp = loss();
        p->value(i, j) = orig - h;
        const double lm = loss();
        p->value(i, j) = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = p->grad(i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), floor});
        const double rel = std::abs(fd - an) / denom;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_tensor = p->name;
          report.worst_row = i;
          report.worst_col = j;
        }
      }
    }
  }
  return report;
}

}  // namespace bee
