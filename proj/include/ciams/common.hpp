#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ciams {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Binary labels in {-1, +1}.
using Labels = std::vector<int>;

/// Bad input: malformed files, violated preconditions, schema drift.
/// The CLI maps this to exit code 1 and the service to a 4xx response.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix_seed(seed ^ mix_seed(tag + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b) {
    return derive_seed(derive_seed(seed, tag_a), tag_b);
}

std::uint64_t hash_string(const std::string& s);

/// Copies the given rows of `x` into a new matrix.
Matrix select_rows(const Matrix& x, const std::vector<int>& rows);

Labels select_labels(const Labels& y, const std::vector<int>& rows);

}  // namespace ciams
