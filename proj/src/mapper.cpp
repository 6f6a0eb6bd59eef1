#include "ciams/mapper.hpp"

#include "ciams/parallel.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ciams::mapper {

namespace {

const char* const kMagic = "CIAMS-BUNDLE";

// Little-endian host layout is assumed for the payload.
class Writer {
public:
    template <class T>
    void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        bytes_.append(buf, sizeof(T));
    }
    [[nodiscard]] const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    template <class T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw ValidationError("truncated bundle payload");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void write_regressor(Writer& w, const learners::GBTRegressor& g, const ClassReport& report) {
    w.put<double>(g.base_score);
    w.put<double>(g.learning_rate);
    w.put<std::int32_t>(g.n_features);
    w.put<double>(report.cv_r2);
    w.put<std::int32_t>(report.best_depth);
    w.put<std::uint8_t>(report.degenerate ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.feature_gain.size()));
    for (double v : g.feature_gain) w.put<double>(v);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.trees.size()));
    for (const auto& t : g.trees) {
        w.put<std::int32_t>(t.max_depth_reached);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            w.put<std::int32_t>(n.feature);
            w.put<double>(n.threshold);
            w.put<std::int32_t>(n.left);
            w.put<std::int32_t>(n.right);
            w.put<double>(n.value);
            w.put<std::int32_t>(n.depth);
        }
    }
}

learners::GBTRegressor read_regressor(Reader& r, ClassReport& report) {
    learners::GBTRegressor g;
    g.base_score = r.get<double>();
    g.learning_rate = r.get<double>();
    g.n_features = r.get<std::int32_t>();
    report.cv_r2 = r.get<double>();
    report.best_depth = r.get<std::int32_t>();
    report.degenerate = r.get<std::uint8_t>() != 0;
    g.feature_gain.resize(r.get<std::uint32_t>());
    for (auto& v : g.feature_gain) v = r.get<double>();
    g.trees.resize(r.get<std::uint32_t>());
    for (auto& t : g.trees) {
        t.max_depth_reached = r.get<std::int32_t>();
        t.nodes.resize(r.get<std::uint32_t>());
        for (auto& n : t.nodes) {
            n.feature = r.get<std::int32_t>();
            n.threshold = r.get<double>();
            n.left = r.get<std::int32_t>();
            n.right = r.get<std::int32_t>();
            n.value = r.get<double>();
            n.depth = r.get<std::int32_t>();
        }
        const auto size = static_cast<int>(t.nodes.size());
        if (size == 0) throw ValidationError("corrupt bundle: empty tree");
        for (const auto& n : t.nodes) {
            if (n.feature >= g.n_features || (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)))
                throw ValidationError("corrupt bundle: bad tree node");
        }
    }
    return g;
}

std::uint32_t crc(const std::string& s) {
    return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

bool has_newline(const std::string& s) { return s.find('\n') != std::string::npos; }

}  // namespace

MapperBundle fit_mappers(const fitness::TrainingTable& table, int folds, std::uint64_t seed,
                         const MapperOptions& options) {
    if (table.rows.empty()) throw ValidationError("empty training table");
    if (table.parents().size() < 2) throw ValidationError("need at least two parent datasets for grouped CV");
    const Matrix x = table.feature_matrix();
    const std::vector<int> groups = table.parent_ids();
    MapperBundle bundle;
    bundle.schema = table.schema;
    parallel_for(learners::kModelClassCount, [&](std::size_t k) {
        const auto c = learners::kAllModelClasses[k];
        const Vector y = table.target(c);
        const auto fit = learners::fit_gbt_regressor(x, y, options.depth_grid, folds,
                                                     derive_seed(seed, static_cast<std::uint64_t>(k)), &groups,
                                                     options.regressor);
        bundle.regressors[k] = fit.model;
        bundle.reports[k] = ClassReport{fit.constant_target ? 0.0 : fit.cv_r2, fit.best_depth, fit.constant_target};
    });
    return bundle;
}

fitness::FitnessVector predict_fitness(const MapperBundle& bundle, const indices::IndexVector& iv) {
    if (iv.schema != bundle.schema) {
        std::string detail;
        if (iv.schema.size() != bundle.schema.size()) {
            detail = "expected " + std::to_string(bundle.schema.size()) + " features, got " + std::to_string(iv.schema.size());
        } else {
            const auto it = std::mismatch(iv.schema.begin(), iv.schema.end(), bundle.schema.begin());
            detail = "expected '" + *it.second + "', got '" + *it.first + "'";
        }
        throw ValidationError("schema mismatch: " + detail);
    }
    if (iv.values.size() != bundle.schema.size()) throw ValidationError("schema mismatch: value count");
    const Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(iv.values.data(), static_cast<Eigen::Index>(iv.values.size()));
    fitness::FitnessVector out{};
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = std::clamp(learners::predict_regressor(bundle.regressors[k], x), 0.0, 1.0);
    return out;
}

// Layout:
//   CIAMS-BUNDLE / version N / checksum HEX / meta lines / schema_count N / schema lines / payload BYTES / binary
// The checksum covers the meta lines, schema_count, payload line and binary; schema names are
// verified at prediction time so an edited name surfaces as a schema mismatch.
void write_bundle(const MapperBundle& bundle, std::ostream& out) {
    Writer w;
    for (std::size_t k = 0; k < bundle.regressors.size(); ++k) write_regressor(w, bundle.regressors[k], bundle.reports[k]);
    std::ostringstream covered;
    for (const auto& [key, value] : bundle.training_meta) {
        if (has_newline(key) || has_newline(value) || key.find(' ') != std::string::npos)
            throw ValidationError("bundle metadata must be single-line");
        covered << "meta " << key << ' ' << value << '\n';
    }
    covered << "schema_count " << bundle.schema.size() << '\n';
    std::ostringstream payload_line;
    payload_line << "payload " << w.bytes().size() << '\n';
    const std::string checked = covered.str() + payload_line.str() + w.bytes();

    out << kMagic << '\n' << "version " << bundle.version << '\n';
    out << "checksum " << std::hex << std::setw(8) << std::setfill('0') << crc(checked) << std::dec << '\n';
    out << covered.str();
    for (const auto& name : bundle.schema) {
        if (has_newline(name)) throw ValidationError("schema names must be single-line");
        out << "schema " << name << '\n';
    }
    out << payload_line.str();
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
}

MapperBundle read_bundle(std::istream& in) {
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) throw ValidationError(std::string("truncated bundle: missing ") + what);
        return line;
    };
    if (next("magic") != kMagic) throw ValidationError("not a model bundle");
    MapperBundle bundle;
    {
        const std::string v = next("version");
        if (v.rfind("version ", 0) != 0) throw ValidationError("malformed bundle version line");
        int version = 0;
        try {
            version = std::stoi(v.substr(8));
        } catch (const std::exception&) {
            throw ValidationError("malformed bundle version line");
        }
        if (version != kBundleVersion) throw ValidationError("unsupported version " + v.substr(8));
        bundle.version = version;
    }
    const std::string ck = next("checksum");
    if (ck.rfind("checksum ", 0) != 0) throw ValidationError("malformed bundle checksum line");
    std::uint32_t expected = 0;
    try {
        expected = static_cast<std::uint32_t>(std::stoul(ck.substr(9), nullptr, 16));
    } catch (const std::exception&) {
        throw ValidationError("malformed bundle checksum line");
    }

    std::string checked;
    std::size_t schema_count = 0;
    while (true) {
        next("header");
        if (line.rfind("meta ", 0) == 0) {
            checked += line + '\n';
            const auto sp = line.find(' ', 5);
            if (sp == std::string::npos) throw ValidationError("malformed bundle meta line");
            bundle.training_meta[line.substr(5, sp - 5)] = line.substr(sp + 1);
        } else if (line.rfind("schema_count ", 0) == 0) {
            checked += line + '\n';
            try {
                schema_count = std::stoul(line.substr(13));
            } catch (const std::exception&) {
                throw ValidationError("malformed bundle schema count");
            }
            break;
        } else {
            throw ValidationError("checksum mismatch: unexpected bundle header line");
        }
    }
    for (std::size_t i = 0; i < schema_count; ++i) {
        next("schema");
        if (line.rfind("schema ", 0) != 0) throw ValidationError("truncated bundle: schema list");
        bundle.schema.push_back(line.substr(7));
    }
    next("payload");
    if (line.rfind("payload ", 0) != 0) throw ValidationError("checksum mismatch: malformed payload line");
    checked += line + '\n';
    std::size_t size = 0;
    try {
        size = std::stoul(line.substr(8));
    } catch (const std::exception&) {
        throw ValidationError("checksum mismatch: malformed payload line");
    }
    std::string bytes(size, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size) throw ValidationError("truncated bundle payload");
    checked += bytes;
    if (crc(checked) != expected) throw ValidationError("checksum mismatch");
    if (in.peek() != std::char_traits<char>::eof()) throw ValidationError("checksum mismatch: trailing bytes");

    Reader r(bytes);
    for (std::size_t k = 0; k < bundle.regressors.size(); ++k) bundle.regressors[k] = read_regressor(r, bundle.reports[k]);
    if (!r.done()) throw ValidationError("corrupt bundle payload");
    return bundle;
}

void save_bundle(const MapperBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    write_bundle(bundle, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

MapperBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    return read_bundle(in);
}

}  // namespace ciams::mapper
