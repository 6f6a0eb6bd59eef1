#include "ciams/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ciams::stats {

double f_survival(double f, double df1, double df2) {
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    // P(F > f) = I_{df2/(df2 + df1 f)}(df2/2, df1/2)
    const double x = df2 / (df2 + df1 * f);
    return std::clamp(boost::math::ibeta(df2 / 2.0, df1 / 2.0, x), 0.0, 1.0);
}

HotellingResult hotelling_t2(const Matrix& a, const Matrix& b, double alpha) {
    const auto na = a.rows();
    const auto nb = b.rows();
    const auto p = a.cols();
    if (b.cols() != p) throw ValidationError("samples have different dimensionality");
    if (na < 1 || nb < 1 || na + nb < p + 2) throw ValidationError("too few rows for Hotelling's T^2");
    if (!a.allFinite() || !b.allFinite()) throw ValidationError("non-finite values in Hotelling's T^2 input");

    const Vector mean_a = a.colwise().mean().transpose();
    const Vector mean_b = b.colwise().mean().transpose();
    const Matrix ca = a.rowwise() - mean_a.transpose();
    const Matrix cb = b.rowwise() - mean_b.transpose();
    Matrix pooled = (ca.transpose() * ca + cb.transpose() * cb) / static_cast<double>(na + nb - 2);
    const double ridge = 1e-6 * pooled.trace() / static_cast<double>(p);
    pooled.diagonal().array() += ridge;

    Eigen::LDLT<Matrix> ldlt(pooled);
    const Vector diag = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !(ridge > 0.0) || (diag.array() <= 0.0).any())
        throw ValidationError("rank deficient pooled covariance");

    const Vector diff = mean_a - mean_b;
    const double scale = static_cast<double>(na * nb) / static_cast<double>(na + nb);
    HotellingResult r;
    r.t2 = std::max(0.0, scale * diff.dot(ldlt.solve(diff)));
    const double df1 = static_cast<double>(p);
    const double df2 = static_cast<double>(na + nb - p - 1);
    r.f_statistic = r.t2 * df2 / (df1 * static_cast<double>(na + nb - 2));
    r.p_value = f_survival(r.f_statistic, df1, df2);
    r.reject = r.p_value < alpha;
    return r;
}

namespace {

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sample_variance(std::span<const double> x, double mean) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace

MeanDiffTestResult meandiff_test(std::span<const double> expected, std::span<const double> predicted, double delta,
                                 double alpha) {
    if (expected.empty() || predicted.empty()) throw ValidationError("mean-difference test needs non-empty samples");
    MeanDiffTestResult r;
    const auto ne = static_cast<double>(expected.size());
    const auto np = static_cast<double>(predicted.size());
    r.test_kind = std::min(expected.size(), predicted.size()) <= 30 ? TestKind::T : TestKind::Z;
    const double me = mean_of(expected);
    const double mp = mean_of(predicted);
    const double ve = sample_variance(expected, me);
    const double vp = sample_variance(predicted, mp);
    const double se = std::sqrt(ve / ne + vp / np);
    const double excess = std::abs(me - mp) - delta;
    if (se == 0.0) {
        r.statistic = excess < 0 ? -std::numeric_limits<double>::infinity()
                                 : (excess > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        r.p_value = excess < 0 ? 0.0 : (excess > 0 ? 1.0 : 0.5);
    } else {
        r.statistic = excess / se;
        if (r.test_kind == TestKind::Z) {
            r.p_value = boost::math::cdf(boost::math::normal(), r.statistic);
        } else {
            // Welch-Satterthwaite degrees of freedom.
            const double a = ve / ne;
            const double b = vp / np;
            double df = (a + b) * (a + b);
            const double denom = (ne > 1 ? a * a / (ne - 1) : 0.0) + (np > 1 ? b * b / (np - 1) : 0.0);
            df = denom > 0 ? df / denom : std::max(1.0, std::min(ne, np) - 1);
            df = std::max(df, 1.0);
            r.p_value = boost::math::cdf(boost::math::students_t(df), r.statistic);
        }
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    r.pass = r.p_value < alpha;
    return r;
}

double f1_score(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw ValidationError("f1_score: length mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] > 0 && truth[i] > 0) ++tp;
        else if (predicted[i] > 0) ++fp;
        else if (truth[i] > 0) ++fn;
    }
    const double denom = 2 * tp + fp + fn;
    return denom > 0 ? 2 * tp / denom : 0.0;
}

double weighted_f1_score(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw ValidationError("weighted_f1_score: length mismatch");
    std::vector<int> t_neg(truth.size());
    std::vector<int> p_neg(predicted.size());
    double positives = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        t_neg[i] = -truth[i];
        p_neg[i] = -predicted[i];
        if (truth[i] > 0) ++positives;
    }
    const double n = static_cast<double>(truth.size());
    if (n == 0) return 0.0;
    return (positives * f1_score(truth, predicted) + (n - positives) * f1_score(t_neg, p_neg)) / n;
}

double r2_score(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.size() != predicted.size() || truth.size() < 2) throw ValidationError("r2_score: need equal lengths >= 2");
    const double m = mean_of(truth);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        ss_tot += (truth[i] - m) * (truth[i] - m);
    }
    if (ss_tot <= 0.0) throw ValidationError("r2_score: zero-variance truth");
    return 1.0 - ss_res / ss_tot;
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw ValidationError("pearson: length mismatch");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) throw ValidationError("spearman: need equal lengths >= 3");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

double mae(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("mae: need equal non-empty lengths");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace ciams::stats
