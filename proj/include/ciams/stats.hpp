#pragma once

#include "ciams/common.hpp"

#include <span>
#include <string>

namespace ciams::stats {

struct HotellingResult {
    double t2 = 0.0;
    double f_statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
};

/// Two-sample Hotelling T^2 with a ridge of 1e-6 * trace / p on the pooled covariance.
/// Throws ValidationError("rank deficient") when the covariance stays singular.
HotellingResult hotelling_t2(const Matrix& sample_a, const Matrix& sample_b, double alpha = 0.05);

enum class TestKind { T, Z };

struct MeanDiffTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestKind test_kind = TestKind::Z;
    bool pass = false;
};

/// One-sided test that |mean(expected) - mean(predicted)| is below delta.
/// statistic = (|x_e - x_p| - delta) / sqrt(var_e/n_e + var_p/n_p); pass when p < alpha.
MeanDiffTestResult meandiff_test(std::span<const double> expected, std::span<const double> predicted,
                                 double delta = 0.1, double alpha = 0.05);

/// Positive-class F1; zero denominators give 0.
double f1_score(std::span<const int> truth, std::span<const int> predicted);

/// Support-weighted mean of the per-class F1 scores.
double weighted_f1_score(std::span<const int> truth, std::span<const int> predicted);

double r2_score(std::span<const double> truth, std::span<const double> predicted);

/// Spearman rank correlation with averaged ties; 0 if either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

double mae(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);

/// Upper tail of the F distribution, via the regularized incomplete beta function.
double f_survival(double f, double df1, double df2);

}  // namespace ciams::stats
