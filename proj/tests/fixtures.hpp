#pragma once

// Synthetic inputs shared by the test binaries.

#include "ciams/data.hpp"
#include "ciams/indices.hpp"
#include "ciams/mapper.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace fixture {

// Two Gaussian classes; positives shifted by `shift` along every feature.
inline ciams::data::Dataset gaussian_dataset(const std::string& name, int n_pos, int n_neg, int p, double shift,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ciams::data::Dataset d;
    d.name = name;
    d.label_name = "y";
    d.positive_symbol = "yes";
    d.negative_symbol = "no";
    d.features.resize(n_pos + n_neg, p);
    for (int j = 0; j < p; ++j) d.feature_names.push_back("f" + std::to_string(j));
    for (int i = 0; i < n_pos + n_neg; ++i) {
        const bool pos = i < n_pos;
        d.labels.push_back(pos ? 1 : -1);
        for (int j = 0; j < p; ++j) d.features(i, j) = g(rng) + (pos ? shift : 0.0);
    }
    return d;
}

inline std::string to_csv(const ciams::data::Dataset& d, bool with_label = true) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t j = 0; j < d.feature_names.size(); ++j) s << (j ? "," : "") << d.feature_names[j];
    if (with_label) s << ',' << d.label_name;
    s << '\n';
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = 0; j < d.cols(); ++j) s << (j ? "," : "") << d.features(i, j);
        if (with_label) s << ',' << (d.labels[static_cast<std::size_t>(i)] == 1 ? d.positive_symbol : d.negative_symbol);
        s << '\n';
    }
    return s.str();
}

// Bundle whose regressors are constants, over the full 160-feature schema.
inline ciams::mapper::MapperBundle constant_bundle(const std::array<double, 6>& values) {
    ciams::mapper::MapperBundle b;
    b.schema = ciams::indices::Schema::all().names();
    for (std::size_t c = 0; c < 6; ++c) {
        b.regressors[c].base_score = values[c];
        b.regressors[c].n_features = static_cast<int>(b.schema.size());
        b.regressors[c].feature_gain.assign(b.schema.size(), 0.0);
    }
    b.training_meta["seed"] = "0";
    return b;
}

}  // namespace fixture
