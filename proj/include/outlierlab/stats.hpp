#pragma once

#include <vector>

#include "outlierlab/core.hpp"

namespace outlierlab::stats {

double mean(const std::vector<double>& x);
// Sample standard deviation (n - 1 denominator).
double stddev(const std::vector<double>& x);
double std_error(const std::vector<double>& x);

struct KsResult {
  double statistic;
  double p_value;
};

// Two-sample Kolmogorov-Smirnov test, asymptotic p-value with the
// Stephens small-sample correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct LineFit {
  double slope;
  double intercept;
  double slope_stderr;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Fisher z-score of an observed correlation r against rho with n pairs.
double fisher_z(double r, double rho, std::size_t n);

}  // namespace outlierlab::stats
