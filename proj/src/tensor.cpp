#include "adaloc/tensor.hpp"

#include <cmath>
#include <string>

namespace adaloc {

double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

double l1_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += std::fabs(v);
    return s;
}

void check_finite(const Tensor& t, const char* context) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in ") + context);
        }
    }
}

}  // namespace adaloc
