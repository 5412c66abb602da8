#pragma once

#include <optional>
#include <vector>

namespace adaloc {

// Spearman rank correlation with midranks for ties; nullopt when either side
// is constant (correlation undefined).
std::optional<double> spearman_rank(const std::vector<double>& xs, const std::vector<double>& ys);

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // population variance

}  // namespace adaloc
