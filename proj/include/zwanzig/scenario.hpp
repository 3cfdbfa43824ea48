#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "json.hpp"

#include "zwanzig/master.hpp"
#include "zwanzig/measurement.hpp"
#include "zwanzig/random.hpp"

namespace zwanzig {

inline constexpr const char* version_string = "0.1.0";
inline constexpr const char* output_dir_env_var = "ZWANZIG_OUT_DIR";

// ---------------------------------------------------------------------------
// Config data. Parsed and semantically checked by validate_config; resolved
// into live objects by run_scenario.

struct FactorSpec {
    std::string label;
    int dim = 0;
};

struct HamiltonianSpec {
    std::string kind;  // matrix | random_hermitian | perturbed_diagonal |
                       // pure_dephasing | premeasurement_coupling | coupled_pair
    Matrix matrix;
    std::uint64_t seed = 0;
    double scale = 1.0;
    std::vector<double> diagonal;
    std::string system;
    std::string pointer;
    double coupling_scale = 0.0;
    double bath_scale = 0.0;
    double internal_scale = 0.0;
    double duration = 1.0;
    std::vector<std::string> first;
};

struct ProjectionSpec {
    std::string kind;  // dephase | block_dephase | coarse_grain_equipartition |
                       // product_of_marginals
    bool computational_basis = true;
    Matrix basis;
    std::vector<std::pair<std::string, std::vector<int>>> blocks;
    std::vector<std::string> first_side;
};

struct InitialStateSpec {
    std::string kind;  // basis | uniform_superposition | pure | density
    int index = 0;
    Vector amplitudes;
    Matrix matrix;
};

struct SolverSpec {
    std::string kind;  // exact | premaster | markov | alternating
    double t0 = 0.0;
    double dt = 0.0;
    int steps = 0;
    double epsilon = 1e-3;
    double coarse_dt = 0.0;
    double total_time = 0.0;
};

struct MeasurementSpec {
    bool present = false;
    std::vector<std::string> first_side;
    int samples = 0;
    std::uint64_t seed = 0;
    std::optional<double> time;  // default: end of the trajectory
    bool record_schmidt = false;
    bool record_overlap = false;
    std::vector<std::string> nested_split;  // second-level first region; empty = flat
};

struct ScenarioConfig {
    std::string name;
    std::vector<FactorSpec> space;
    HamiltonianSpec hamiltonian;
    ProjectionSpec projection;
    InitialStateSpec initial_state;
    SolverSpec solver;
    MeasurementSpec measurement;
    std::string output_dir = ".";
    std::string digest;  // 16 hex digits over the canonical config form
};

struct ValidationResult {
    std::vector<std::string> errors;
    std::optional<ScenarioConfig> config;
    bool ok() const { return errors.empty() && config.has_value(); }
};

struct RunCheck {
    std::string name;
    bool pass = false;
};

struct RunManifest {
    std::string config_digest;
    std::string tool_version;
    std::uint64_t seed = 0;
    double duration_seconds = 0.0;
    std::vector<RunCheck> checks;
    std::vector<std::string> outputs;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
};

// ---------------------------------------------------------------------------
// Parsing helpers. Every failure appends to the error list instead of
// throwing, so one validate pass reports all problems at once.

namespace detail {

using Json = nlohmann::json;

inline void check_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                               const std::string& where, std::vector<std::string>& errors) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed)
            if (it.key() == k) known = true;
        if (!known) errors.push_back(where + ": unknown key '" + it.key() + "'");
    }
}

inline const Json* req_object(const Json& j, const char* key, const std::string& where,
                              std::vector<std::string>& errors) {
    if (!j.contains(key)) {
        errors.push_back(where + ": missing required key '" + key + "'");
        return nullptr;
    }
    if (!j.at(key).is_object()) {
        errors.push_back(where + "." + key + ": expected an object");
        return nullptr;
    }
    return &j.at(key);
}

inline std::optional<std::string> req_string(const Json& j, const char* key,
                                             const std::string& where,
                                             std::vector<std::string>& errors) {
    if (!j.contains(key)) {
        errors.push_back(where + ": missing required key '" + key + "'");
        return std::nullopt;
    }
    if (!j.at(key).is_string()) {
        errors.push_back(where + "." + key + ": expected a string");
        return std::nullopt;
    }
    return j.at(key).get<std::string>();
}

inline std::optional<double> req_number(const Json& j, const char* key,
                                        const std::string& where,
                                        std::vector<std::string>& errors) {
    if (!j.contains(key)) {
        errors.push_back(where + ": missing required key '" + key + "'");
        return std::nullopt;
    }
    if (!j.at(key).is_number()) {
        errors.push_back(where + "." + key + ": expected a number");
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

inline std::optional<double> opt_number(const Json& j, const char* key, double fallback,
                                        const std::string& where,
                                        std::vector<std::string>& errors) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) {
        errors.push_back(where + "." + key + ": expected a number");
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

inline std::optional<int> req_int(const Json& j, const char* key, const std::string& where,
                                  std::vector<std::string>& errors) {
    if (!j.contains(key)) {
        errors.push_back(where + ": missing required key '" + key + "'");
        return std::nullopt;
    }
    if (!j.at(key).is_number_integer()) {
        errors.push_back(where + "." + key + ": expected an integer");
        return std::nullopt;
    }
    return j.at(key).get<int>();
}

inline std::optional<int> opt_int(const Json& j, const char* key, int fallback,
                                  const std::string& where,
                                  std::vector<std::string>& errors) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) {
        errors.push_back(where + "." + key + ": expected an integer");
        return std::nullopt;
    }
    return j.at(key).get<int>();
}

inline std::optional<std::uint64_t> opt_seed(const Json& j, const char* key,
                                             std::uint64_t fallback, const std::string& where,
                                             std::vector<std::string>& errors) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
        errors.push_back(where + "." + key + ": expected a non-negative integer");
        return std::nullopt;
    }
    return v.get<std::uint64_t>();
}

inline std::optional<bool> opt_bool(const Json& j, const char* key, bool fallback,
                                    const std::string& where,
                                    std::vector<std::string>& errors) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) {
        errors.push_back(where + "." + key + ": expected a boolean");
        return std::nullopt;
    }
    return j.at(key).get<bool>();
}

inline std::optional<std::vector<std::string>> req_string_list(const Json& j, const char* key,
                                                               const std::string& where,
                                                               std::vector<std::string>& errors) {
    if (!j.contains(key)) {
        errors.push_back(where + ": missing required key '" + key + "'");
        return std::nullopt;
    }
    if (!j.at(key).is_array()) {
        errors.push_back(where + "." + key + ": expected an array of strings");
        return std::nullopt;
    }
    std::vector<std::string> out;
    for (const auto& e : j.at(key)) {
        if (!e.is_string()) {
            errors.push_back(where + "." + key + ": expected an array of strings");
            return std::nullopt;
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline std::optional<Complex> parse_complex(const Json& j, const std::string& where,
                                            std::vector<std::string>& errors) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        errors.push_back(where + ": expected a [re, im] pair");
        return std::nullopt;
    }
    return Complex(j[0].get<double>(), j[1].get<double>());
}

inline std::optional<Vector> parse_complex_vector(const Json& j, const std::string& where,
                                                  std::vector<std::string>& errors) {
    if (!j.is_array() || j.empty()) {
        errors.push_back(where + ": expected a non-empty array of [re, im] pairs");
        return std::nullopt;
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto c = parse_complex(j[i], where + "[" + std::to_string(i) + "]", errors);
        if (!c) return std::nullopt;
        v(static_cast<Eigen::Index>(i)) = *c;
    }
    return v;
}

inline std::optional<Matrix> parse_complex_matrix(const Json& j, const std::string& where,
                                                  std::vector<std::string>& errors) {
    if (!j.is_array() || j.empty()) {
        errors.push_back(where + ": expected a non-empty array of rows");
        return std::nullopt;
    }
    const std::size_t rows = j.size();
    Matrix m;
    for (std::size_t r = 0; r < rows; ++r) {
        const Json& row = j[r];
        if (!row.is_array() || row.size() != rows) {
            errors.push_back(where + ": expected a square matrix of [re, im] pairs");
            return std::nullopt;
        }
        if (r == 0) m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
        for (std::size_t c = 0; c < rows; ++c) {
            const auto z = parse_complex(row[c],
                                         where + "[" + std::to_string(r) + "][" +
                                             std::to_string(c) + "]",
                                         errors);
            if (!z) return std::nullopt;
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *z;
        }
    }
    return m;
}

inline std::string fnv1a64_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

// Maps an operator assembled in (first, rest) regrouped order back to the
// space's original index order.
inline Matrix regrouped_to_original(const HilbertSpace& space,
                                    const std::vector<std::string>& first,
                                    const Matrix& regrouped) {
    const IndexSplit split = split_indices(space, first);
    const int d = space.total_dim();
    auto g = [&](int f) {
        return split.selected_of[static_cast<std::size_t>(f)] * split.rest_dim +
               split.rest_of[static_cast<std::size_t>(f)];
    };
    Matrix out(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out(r, c) = regrouped(g(r), g(c));
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Resolution of config specs into live objects. These assume a validated
// config; violations surface as exceptions that validate_config converts to
// error strings.

namespace detail {

inline HilbertSpace resolve_space(const ScenarioConfig& cfg,
                                  const NumericalPolicy& policy = default_policy()) {
    std::vector<Factor> factors;
    for (const auto& f : cfg.space) factors.push_back(Factor{f.label, f.dim});
    return HilbertSpace(std::move(factors), policy);
}

inline Hamiltonian resolve_hamiltonian(const ScenarioConfig& cfg, const HilbertSpace& space) {
    const HamiltonianSpec& spec = cfg.hamiltonian;
    const int d = space.total_dim();
    if (spec.kind == "matrix") return Hamiltonian(space, spec.matrix);
    if (spec.kind == "random_hermitian") {
        RandomStream rng(spec.seed);
        return Hamiltonian(space, random_hermitian(d, rng, spec.scale));
    }
    if (spec.kind == "perturbed_diagonal") {
        // Fixed spectrum plus a scaled random off-diagonal coupling. The scale
        // separation makes "weak coupling" an actual property of the model
        // rather than an accident of one random draw.
        if (static_cast<int>(spec.diagonal.size()) != d)
            throw InvalidArgument("perturbed_diagonal: diagonal length does not match the space");
        RandomStream rng(spec.seed);
        Matrix h = random_hermitian(d, rng, spec.scale);
        for (int i = 0; i < d; ++i) h(i, i) = spec.diagonal[static_cast<std::size_t>(i)];
        return Hamiltonian(space, std::move(h));
    }
    if (spec.kind == "pure_dephasing") {
        // sigma_z on the named two-level factor, coupled to a random bath
        // operator, plus free bath dynamics: H = Z (x) B + 1 (x) H_bath.
        const std::vector<std::string> first{spec.system};
        const IndexSplit split = split_indices(space, first);
        if (split.selected_dim != 2)
            throw InvalidArgument("pure_dephasing: factor '" + spec.system +
                                  "' must have dimension 2");
        if (split.rest_dim < 2)
            throw InvalidArgument("pure_dephasing: there is no bath to couple to");
        RandomStream root(spec.seed);
        RandomStream rb = root.substream(0);
        RandomStream rh = root.substream(1);
        const Matrix b = random_hermitian(split.rest_dim, rb, spec.coupling_scale);
        const Matrix hb = random_hermitian(split.rest_dim, rh, spec.bath_scale);
        Matrix z = Matrix::Zero(2, 2);
        z(0, 0) = 1.0;
        z(1, 1) = -1.0;
        const Matrix regrouped = Eigen::kroneckerProduct(z, b).eval() +
                                 Eigen::kroneckerProduct(Matrix::Identity(2, 2), hb).eval();
        return Hamiltonian(space, regrouped_to_original(space, first, regrouped));
    }
    if (spec.kind == "premeasurement_coupling") {
        // Generates an exact controlled flip at t = duration:
        // exp(-i T |1><1| (x) (pi/2T)(1 - sigma_x)) = |0><0| (x) 1 + |1><1| (x) sigma_x.
        const std::size_t si = space.factor_index(spec.system);
        const std::size_t pi_ = space.factor_index(spec.pointer);
        if (space.factors()[si].dim != 2 || space.factors()[pi_].dim != 2)
            throw InvalidArgument(
                "premeasurement_coupling: system and pointer must both have dimension 2");
        if (spec.duration <= 0.0)
            throw InvalidArgument("premeasurement_coupling: duration must be positive");
        Matrix p1 = Matrix::Zero(2, 2);
        p1(1, 1) = 1.0;
        Matrix k = Matrix::Zero(2, 2);
        const double w = 3.14159265358979323846 / (2.0 * spec.duration);
        k(0, 0) = w;
        k(1, 1) = w;
        k(0, 1) = -w;
        k(1, 0) = -w;
        return Hamiltonian(space, embed_factor(space, spec.system, p1) *
                                      embed_factor(space, spec.pointer, k));
    }
    if (spec.kind == "coupled_pair") {
        // Two halves with independent internal dynamics plus a scaled
        // cross-coupling: H = H1 (x) 1 + 1 (x) H2 + c * V.
        const IndexSplit split = split_indices(space, spec.first);
        if (split.rest_dim < 2)
            throw InvalidArgument("coupled_pair: the complement side is trivial");
        RandomStream root(spec.seed);
        RandomStream r1 = root.substream(0);
        RandomStream r2 = root.substream(1);
        RandomStream rv = root.substream(2);
        const Matrix h1 = random_hermitian(split.selected_dim, r1, spec.internal_scale);
        const Matrix h2 = random_hermitian(split.rest_dim, r2, spec.internal_scale);
        const Matrix v = random_hermitian(split.selected_dim * split.rest_dim, rv,
                                          spec.coupling_scale);
        const Matrix regrouped =
            Eigen::kroneckerProduct(h1, Matrix::Identity(split.rest_dim, split.rest_dim))
                .eval() +
            Eigen::kroneckerProduct(Matrix::Identity(split.selected_dim, split.selected_dim),
                                    h2)
                .eval() +
            v;
        return Hamiltonian(space, regrouped_to_original(space, spec.first, regrouped));
    }
    throw InvalidArgument("hamiltonian: unknown kind '" + spec.kind + "'");
}

inline ZwanzigProjection resolve_projection(const ScenarioConfig& cfg,
                                            const HilbertSpace& space) {
    const ProjectionSpec& spec = cfg.projection;
    const int d = space.total_dim();
    if (spec.kind == "dephase") {
        Matrix basis = spec.computational_basis ? Matrix::Identity(d, d) : spec.basis;
        return ZwanzigProjection::dephasing(space, std::move(basis));
    }
    if (spec.kind == "block_dephase")
        return ZwanzigProjection::block_dephasing(
            SubspacePartition::from_index_groups(space, spec.blocks));
    if (spec.kind == "coarse_grain_equipartition")
        return ZwanzigProjection::equipartition(
            SubspacePartition::from_index_groups(space, spec.blocks));
    if (spec.kind == "product_of_marginals")
        return ZwanzigProjection::marginal_product(space, spec.first_side);
    throw InvalidArgument("projection: unknown kind '" + spec.kind + "'");
}

struct ResolvedInitialState {
    DensityOperator density;
    std::optional<PureState> pure;
};

inline ResolvedInitialState resolve_initial(const ScenarioConfig& cfg,
                                            const HilbertSpace& space) {
    const InitialStateSpec& spec = cfg.initial_state;
    const int d = space.total_dim();
    if (spec.kind == "basis") {
        PureState psi = PureState::basis_state(space, spec.index);
        return ResolvedInitialState{DensityOperator::pure(psi), std::move(psi)};
    }
    if (spec.kind == "uniform_superposition") {
        Vector v = Vector::Constant(d, Complex(1.0 / std::sqrt(static_cast<double>(d)), 0.0));
        PureState psi(space, std::move(v));
        return ResolvedInitialState{DensityOperator::pure(psi), std::move(psi)};
    }
    if (spec.kind == "pure") {
        PureState psi(space, spec.amplitudes);
        return ResolvedInitialState{DensityOperator::pure(psi), std::move(psi)};
    }
    if (spec.kind == "density")
        return ResolvedInitialState{DensityOperator(space, spec.matrix), std::nullopt};
    throw InvalidArgument("initial_state: unknown kind '" + spec.kind + "'");
}

} // namespace detail

// ---------------------------------------------------------------------------
// validate_config: full structural and semantic validation, reporting every
// violation found rather than stopping at the first.

inline ValidationResult validate_config(const std::string& json_text) {
    ValidationResult result;
    auto& errors = result.errors;

    const detail::Json root = detail::Json::parse(json_text, nullptr, false);
    if (root.is_discarded()) {
        errors.push_back("config: not valid JSON");
        return result;
    }
    if (!root.is_object()) {
        errors.push_back("config: top level must be an object");
        return result;
    }

    ScenarioConfig cfg;
    cfg.digest = detail::fnv1a64_hex(root.dump());

    detail::check_unknown_keys(root,
                               {"name", "space", "hamiltonian", "projection", "initial_state",
                                "solver", "measurement", "output_dir"},
                               "config", errors);

    if (const auto name = detail::req_string(root, "name", "config", errors)) {
        cfg.name = *name;
        if (cfg.name.empty() ||
            cfg.name.find_first_not_of("abcdefghijklmnopqrstuvwxyz"
                                       "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-") !=
                std::string::npos)
            errors.push_back("name: must be non-empty and use only [A-Za-z0-9._-]");
    }

    if (root.contains("output_dir")) {
        if (!root.at("output_dir").is_string())
            errors.push_back("output_dir: expected a string");
        else
            cfg.output_dir = root.at("output_dir").get<std::string>();
    }

    // --- space ---
    int total_dim = 0;
    if (!root.contains("space") || !root.at("space").is_array() || root.at("space").empty()) {
        errors.push_back("space: expected a non-empty array of {label, dim}");
    } else {
        total_dim = 1;
        std::string factor_summary;
        for (std::size_t i = 0; i < root.at("space").size(); ++i) {
            const detail::Json& f = root.at("space")[i];
            const std::string where = "space[" + std::to_string(i) + "]";
            if (!f.is_object()) {
                errors.push_back(where + ": expected an object");
                continue;
            }
            detail::check_unknown_keys(f, {"label", "dim"}, where, errors);
            FactorSpec fs;
            if (const auto label = detail::req_string(f, "label", where, errors)) {
                fs.label = *label;
                if (fs.label.empty()) errors.push_back(where + ".label: must be non-empty");
                for (const auto& other : cfg.space)
                    if (other.label == fs.label)
                        errors.push_back(where + ".label: duplicate factor label '" + fs.label +
                                         "'");
            }
            if (const auto dim = detail::req_int(f, "dim", where, errors)) {
                fs.dim = *dim;
                if (fs.dim < 2) errors.push_back(where + ".dim: must be at least 2");
            }
            if (fs.dim >= 2 && total_dim > 0) total_dim *= fs.dim;
            if (!factor_summary.empty()) factor_summary += ", ";
            factor_summary += fs.label + "=" + std::to_string(fs.dim);
            cfg.space.push_back(std::move(fs));
        }
        const int cap = default_policy().max_total_dim;
        if (total_dim > cap)
            errors.push_back("space: total dimension " + std::to_string(total_dim) +
                             " exceeds the cap " + std::to_string(cap) + " (factors: " +
                             factor_summary + ")");
    }
    const bool space_ok = errors.empty();

    auto label_exists = [&](const std::string& label) {
        for (const auto& f : cfg.space)
            if (f.label == label) return true;
        return false;
    };

    // --- hamiltonian ---
    if (const detail::Json* h = detail::req_object(root, "hamiltonian", "config", errors)) {
        const std::string where = "hamiltonian";
        if (const auto kind = detail::req_string(*h, "kind", where, errors)) {
            cfg.hamiltonian.kind = *kind;
            if (*kind == "matrix") {
                detail::check_unknown_keys(*h, {"kind", "matrix"}, where, errors);
                if (!h->contains("matrix"))
                    errors.push_back(where + ": missing required key 'matrix'");
                else if (const auto m =
                             detail::parse_complex_matrix(h->at("matrix"), where + ".matrix",
                                                          errors)) {
                    cfg.hamiltonian.matrix = *m;
                    if (total_dim > 0 && m->rows() != total_dim)
                        errors.push_back(where + ".matrix: size " + std::to_string(m->rows()) +
                                         " does not match the space dimension " +
                                         std::to_string(total_dim));
                    else if (!is_hermitian(*m, default_policy().hermitian_input_tol))
                        errors.push_back(where + ".matrix: not Hermitian within tolerance");
                }
            } else if (*kind == "random_hermitian") {
                detail::check_unknown_keys(*h, {"kind", "seed", "scale"}, where, errors);
                if (const auto seed = detail::opt_seed(*h, "seed", 0, where, errors))
                    cfg.hamiltonian.seed = *seed;
                if (const auto scale = detail::opt_number(*h, "scale", 1.0, where, errors)) {
                    cfg.hamiltonian.scale = *scale;
                    if (*scale <= 0.0) errors.push_back(where + ".scale: must be positive");
                }
            } else if (*kind == "perturbed_diagonal") {
                detail::check_unknown_keys(*h, {"kind", "diagonal", "seed", "scale"}, where,
                                           errors);
                if (!h->contains("diagonal") || !h->at("diagonal").is_array()) {
                    errors.push_back(where + ": missing or non-array key 'diagonal'");
                } else {
                    bool numeric = true;
                    for (const auto& e : h->at("diagonal"))
                        if (!e.is_number()) numeric = false;
                    if (!numeric) {
                        errors.push_back(where + ".diagonal: entries must be numbers");
                    } else {
                        for (const auto& e : h->at("diagonal"))
                            cfg.hamiltonian.diagonal.push_back(e.get<double>());
                        if (total_dim > 0 &&
                            static_cast<int>(cfg.hamiltonian.diagonal.size()) != total_dim)
                            errors.push_back(where + ".diagonal: length " +
                                             std::to_string(cfg.hamiltonian.diagonal.size()) +
                                             " does not match the space dimension " +
                                             std::to_string(total_dim));
                    }
                }
                if (const auto seed = detail::opt_seed(*h, "seed", 0, where, errors))
                    cfg.hamiltonian.seed = *seed;
                if (const auto scale = detail::opt_number(*h, "scale", 0.1, where, errors)) {
                    cfg.hamiltonian.scale = *scale;
                    if (*scale < 0.0) errors.push_back(where + ".scale: must be non-negative");
                }
            } else if (*kind == "pure_dephasing") {
                detail::check_unknown_keys(
                    *h, {"kind", "system", "coupling_scale", "bath_scale", "seed"}, where,
                    errors);
                if (const auto system = detail::req_string(*h, "system", where, errors)) {
                    cfg.hamiltonian.system = *system;
                    if (space_ok && !label_exists(*system))
                        errors.push_back(where + ".system: unknown factor label '" + *system +
                                         "'");
                }
                if (const auto cs =
                        detail::opt_number(*h, "coupling_scale", 1.0, where, errors)) {
                    cfg.hamiltonian.coupling_scale = *cs;
                    if (*cs <= 0.0)
                        errors.push_back(where + ".coupling_scale: must be positive");
                }
                if (const auto bs = detail::opt_number(*h, "bath_scale", 1.0, where, errors)) {
                    cfg.hamiltonian.bath_scale = *bs;
                    if (*bs <= 0.0) errors.push_back(where + ".bath_scale: must be positive");
                }
                if (const auto seed = detail::opt_seed(*h, "seed", 0, where, errors))
                    cfg.hamiltonian.seed = *seed;
            } else if (*kind == "premeasurement_coupling") {
                detail::check_unknown_keys(*h, {"kind", "system", "pointer", "duration"}, where,
                                           errors);
                if (const auto system = detail::req_string(*h, "system", where, errors)) {
                    cfg.hamiltonian.system = *system;
                    if (space_ok && !label_exists(*system))
                        errors.push_back(where + ".system: unknown factor label '" + *system +
                                         "'");
                }
                if (const auto pointer = detail::req_string(*h, "pointer", where, errors)) {
                    cfg.hamiltonian.pointer = *pointer;
                    if (space_ok && !label_exists(*pointer))
                        errors.push_back(where + ".pointer: unknown factor label '" + *pointer +
                                         "'");
                }
                if (const auto dur = detail::opt_number(*h, "duration", 1.0, where, errors)) {
                    cfg.hamiltonian.duration = *dur;
                    if (*dur <= 0.0) errors.push_back(where + ".duration: must be positive");
                }
            } else if (*kind == "coupled_pair") {
                detail::check_unknown_keys(
                    *h, {"kind", "first", "internal_scale", "coupling_scale", "seed"}, where,
                    errors);
                if (const auto first = detail::req_string_list(*h, "first", where, errors)) {
                    cfg.hamiltonian.first = *first;
                    if (space_ok)
                        for (const auto& label : *first)
                            if (!label_exists(label))
                                errors.push_back(where + ".first: unknown factor label '" +
                                                 label + "'");
                }
                if (const auto is =
                        detail::opt_number(*h, "internal_scale", 1.0, where, errors)) {
                    cfg.hamiltonian.internal_scale = *is;
                    if (*is <= 0.0)
                        errors.push_back(where + ".internal_scale: must be positive");
                }
                if (const auto cs =
                        detail::opt_number(*h, "coupling_scale", 0.5, where, errors)) {
                    cfg.hamiltonian.coupling_scale = *cs;
                    if (*cs < 0.0)
                        errors.push_back(where + ".coupling_scale: must be non-negative");
                }
                if (const auto seed = detail::opt_seed(*h, "seed", 0, where, errors))
                    cfg.hamiltonian.seed = *seed;
            } else {
                errors.push_back(where + ".kind: unknown kind '" + *kind +
                                 "' (expected matrix, random_hermitian, perturbed_diagonal, "
                                 "pure_dephasing, premeasurement_coupling, or coupled_pair)");
            }
        }
    }

    // --- projection ---
    if (const detail::Json* p = detail::req_object(root, "projection", "config", errors)) {
        const std::string where = "projection";
        if (const auto kind = detail::req_string(*p, "kind", where, errors)) {
            cfg.projection.kind = *kind;
            if (*kind == "dephase") {
                detail::check_unknown_keys(*p, {"kind", "basis"}, where, errors);
                if (!p->contains("basis") ||
                    (p->at("basis").is_string() &&
                     p->at("basis").get<std::string>() == "computational")) {
                    cfg.projection.computational_basis = true;
                } else if (p->at("basis").is_array()) {
                    if (const auto m = detail::parse_complex_matrix(p->at("basis"),
                                                                    where + ".basis", errors)) {
                        cfg.projection.computational_basis = false;
                        cfg.projection.basis = *m;
                        if (total_dim > 0 && m->rows() != total_dim)
                            errors.push_back(where + ".basis: size does not match the space");
                        else if (max_abs(m->adjoint() * (*m) -
                                         Matrix::Identity(m->rows(), m->cols())) >
                                 default_policy().orthonormality_tol)
                            errors.push_back(where + ".basis: columns are not orthonormal");
                    }
                } else {
                    errors.push_back(where +
                                     ".basis: expected \"computational\" or a matrix literal");
                }
            } else if (*kind == "block_dephase" || *kind == "coarse_grain_equipartition") {
                detail::check_unknown_keys(*p, {"kind", "blocks"}, where, errors);
                if (!p->contains("blocks") || !p->at("blocks").is_array() ||
                    p->at("blocks").empty()) {
                    errors.push_back(where +
                                     ": missing required key 'blocks' (array of "
                                     "{label, indices})");
                } else {
                    std::vector<bool> seen(static_cast<std::size_t>(std::max(total_dim, 0)),
                                           false);
                    for (std::size_t i = 0; i < p->at("blocks").size(); ++i) {
                        const detail::Json& b = p->at("blocks")[i];
                        const std::string bw = where + ".blocks[" + std::to_string(i) + "]";
                        if (!b.is_object()) {
                            errors.push_back(bw + ": expected an object");
                            continue;
                        }
                        detail::check_unknown_keys(b, {"label", "indices"}, bw, errors);
                        std::pair<std::string, std::vector<int>> block;
                        if (const auto label = detail::req_string(b, "label", bw, errors))
                            block.first = *label;
                        if (!b.contains("indices") || !b.at("indices").is_array() ||
                            b.at("indices").empty()) {
                            errors.push_back(bw + ": missing non-empty integer array 'indices'");
                        } else {
                            for (const auto& e : b.at("indices")) {
                                if (!e.is_number_integer()) {
                                    errors.push_back(bw + ".indices: expected integers");
                                    break;
                                }
                                const int idx = e.get<int>();
                                block.second.push_back(idx);
                                if (total_dim > 0) {
                                    if (idx < 0 || idx >= total_dim)
                                        errors.push_back(bw + ".indices: index " +
                                                         std::to_string(idx) +
                                                         " out of range [0, " +
                                                         std::to_string(total_dim) + ")");
                                    else if (seen[static_cast<std::size_t>(idx)])
                                        errors.push_back(bw + ".indices: index " +
                                                         std::to_string(idx) +
                                                         " appears in more than one block");
                                    else
                                        seen[static_cast<std::size_t>(idx)] = true;
                                }
                            }
                        }
                        cfg.projection.blocks.push_back(std::move(block));
                    }
                    if (total_dim > 0)
                        for (int i = 0; i < total_dim; ++i)
                            if (!seen[static_cast<std::size_t>(i)]) {
                                errors.push_back(where +
                                                 ".blocks: blocks do not cover every basis "
                                                 "index");
                                break;
                            }
                }
            } else if (*kind == "product_of_marginals") {
                detail::check_unknown_keys(*p, {"kind", "first_side"}, where, errors);
                if (const auto fs = detail::req_string_list(*p, "first_side", where, errors)) {
                    cfg.projection.first_side = *fs;
                    if (fs->empty())
                        errors.push_back(where + ".first_side: must not be empty");
                    if (space_ok) {
                        for (const auto& label : *fs)
                            if (!label_exists(label))
                                errors.push_back(where + ".first_side: unknown factor label '" +
                                                 label + "'");
                        if (fs->size() >= cfg.space.size())
                            errors.push_back(where +
                                             ".first_side: the second side must be non-empty");
                    }
                }
            } else {
                errors.push_back(where + ".kind: unknown kind '" + *kind +
                                 "' (expected dephase, block_dephase, "
                                 "coarse_grain_equipartition, or product_of_marginals)");
            }
        }
    }

    // --- initial_state ---
    if (const detail::Json* s = detail::req_object(root, "initial_state", "config", errors)) {
        const std::string where = "initial_state";
        if (const auto kind = detail::req_string(*s, "kind", where, errors)) {
            cfg.initial_state.kind = *kind;
            if (*kind == "basis") {
                detail::check_unknown_keys(*s, {"kind", "index"}, where, errors);
                if (const auto idx = detail::req_int(*s, "index", where, errors)) {
                    cfg.initial_state.index = *idx;
                    if (total_dim > 0 && (*idx < 0 || *idx >= total_dim))
                        errors.push_back(where + ".index: out of range [0, " +
                                         std::to_string(total_dim) + ")");
                }
            } else if (*kind == "uniform_superposition") {
                detail::check_unknown_keys(*s, {"kind"}, where, errors);
            } else if (*kind == "pure") {
                detail::check_unknown_keys(*s, {"kind", "amplitudes"}, where, errors);
                if (!s->contains("amplitudes"))
                    errors.push_back(where + ": missing required key 'amplitudes'");
                else if (const auto v = detail::parse_complex_vector(s->at("amplitudes"),
                                                                     where + ".amplitudes",
                                                                     errors)) {
                    cfg.initial_state.amplitudes = *v;
                    if (total_dim > 0 && v->size() != total_dim)
                        errors.push_back(where + ".amplitudes: length does not match the "
                                                 "space dimension");
                    else if (std::abs(v->norm() - 1.0) > default_policy().unit_norm_tol)
                        errors.push_back(where + ".amplitudes: not normalized");
                }
            } else if (*kind == "density") {
                detail::check_unknown_keys(*s, {"kind", "matrix"}, where, errors);
                if (!s->contains("matrix"))
                    errors.push_back(where + ": missing required key 'matrix'");
                else if (const auto m = detail::parse_complex_matrix(s->at("matrix"),
                                                                     where + ".matrix",
                                                                     errors)) {
                    cfg.initial_state.matrix = *m;
                    if (total_dim > 0 && m->rows() != total_dim) {
                        errors.push_back(where + ".matrix: size does not match the space");
                    } else {
                        try {
                            DensityOperator probe(
                                HilbertSpace({Factor{"probe", static_cast<int>(m->rows())}}),
                                *m);
                        } catch (const Error& e) {
                            errors.push_back(where + ".matrix: " + std::string(e.what()));
                        }
                    }
                }
            } else {
                errors.push_back(where + ".kind: unknown kind '" + *kind +
                                 "' (expected basis, uniform_superposition, pure, or density)");
            }
        }
    }

    // --- solver ---
    if (const detail::Json* s = detail::req_object(root, "solver", "config", errors)) {
        const std::string where = "solver";
        if (const auto kind = detail::req_string(*s, "kind", where, errors)) {
            cfg.solver.kind = *kind;
            if (*kind == "exact" || *kind == "premaster" || *kind == "markov") {
                if (*kind == "markov")
                    detail::check_unknown_keys(*s, {"kind", "t0", "dt", "steps", "epsilon"},
                                               where, errors);
                else
                    detail::check_unknown_keys(*s, {"kind", "t0", "dt", "steps"}, where, errors);
                if (const auto t0 = detail::opt_number(*s, "t0", 0.0, where, errors))
                    cfg.solver.t0 = *t0;
                if (const auto dt = detail::req_number(*s, "dt", where, errors)) {
                    cfg.solver.dt = *dt;
                    if (*dt <= 0.0) errors.push_back(where + ".dt: must be positive");
                }
                if (const auto steps = detail::req_int(*s, "steps", where, errors)) {
                    cfg.solver.steps = *steps;
                    if (*steps < 1) errors.push_back(where + ".steps: must be at least 1");
                }
                if (*kind == "markov") {
                    if (const auto eps =
                            detail::opt_number(*s, "epsilon", 1e-3, where, errors)) {
                        cfg.solver.epsilon = *eps;
                        if (*eps <= 0.0) errors.push_back(where + ".epsilon: must be positive");
                    }
                }
                if ((*kind == "premaster" || *kind == "markov") &&
                    cfg.projection.kind == "product_of_marginals")
                    errors.push_back(where + ": the " + *kind +
                                     " solver requires a linear projection, but "
                                     "'product_of_marginals' is nonlinear");
            } else if (*kind == "alternating") {
                detail::check_unknown_keys(*s, {"kind", "coarse_dt", "total_time"}, where,
                                           errors);
                if (const auto cdt = detail::req_number(*s, "coarse_dt", where, errors)) {
                    cfg.solver.coarse_dt = *cdt;
                    if (*cdt <= 0.0) errors.push_back(where + ".coarse_dt: must be positive");
                }
                if (const auto tt = detail::req_number(*s, "total_time", where, errors)) {
                    cfg.solver.total_time = *tt;
                    if (*tt <= 0.0) errors.push_back(where + ".total_time: must be positive");
                }
                if (cfg.solver.coarse_dt > 0.0 && cfg.solver.total_time > 0.0) {
                    const double ratio = cfg.solver.total_time / cfg.solver.coarse_dt;
                    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
                        errors.push_back(where +
                                         ": total_time must be an integer multiple of "
                                         "coarse_dt");
                }
            } else {
                errors.push_back(where + ".kind: unknown kind '" + *kind +
                                 "' (expected exact, premaster, markov, or alternating)");
            }
        }
    }

    // --- measurement (optional) ---
    if (root.contains("measurement")) {
        const std::string where = "measurement";
        if (!root.at("measurement").is_object()) {
            errors.push_back(where + ": expected an object");
        } else {
            const detail::Json& m = root.at("measurement");
            cfg.measurement.present = true;
            detail::check_unknown_keys(m,
                                       {"first_side", "samples", "seed", "time",
                                        "record_schmidt", "record_overlap", "nested_split"},
                                       where, errors);
            if (const auto fs = detail::req_string_list(m, "first_side", where, errors)) {
                cfg.measurement.first_side = *fs;
                if (space_ok) {
                    for (const auto& label : *fs)
                        if (!label_exists(label))
                            errors.push_back(where + ".first_side: unknown factor label '" +
                                             label + "'");
                    if (fs->empty() || fs->size() >= cfg.space.size())
                        errors.push_back(where +
                                         ".first_side: must split the factors into two "
                                         "non-empty sides");
                }
            }
            if (const auto samples = detail::opt_int(m, "samples", 0, where, errors)) {
                cfg.measurement.samples = *samples;
                if (*samples < 0) errors.push_back(where + ".samples: must be non-negative");
            }
            if (const auto seed = detail::opt_seed(m, "seed", 0, where, errors))
                cfg.measurement.seed = *seed;
            if (m.contains("time")) {
                if (const auto t = detail::req_number(m, "time", where, errors)) {
                    cfg.measurement.time = *t;
                    if (*t < 0.0) errors.push_back(where + ".time: must be non-negative");
                }
            }
            if (const auto rs = detail::opt_bool(m, "record_schmidt", false, where, errors))
                cfg.measurement.record_schmidt = *rs;
            if (const auto ro = detail::opt_bool(m, "record_overlap", false, where, errors))
                cfg.measurement.record_overlap = *ro;
            if (m.contains("nested_split")) {
                if (const auto ns = detail::req_string_list(m, "nested_split", where, errors)) {
                    cfg.measurement.nested_split = *ns;
                    if (space_ok) {
                        for (const auto& label : *ns) {
                            if (!label_exists(label))
                                errors.push_back(where +
                                                 ".nested_split: unknown factor label '" +
                                                 label + "'");
                            for (const auto& f : cfg.measurement.first_side)
                                if (f == label)
                                    errors.push_back(where + ".nested_split: factor '" + label +
                                                     "' already belongs to first_side");
                        }
                        if (cfg.measurement.first_side.size() + ns->size() + 1 >
                            cfg.space.size())
                            errors.push_back(where +
                                             ".nested_split: the third region must be "
                                             "non-empty");
                    }
                }
            }
            if (cfg.initial_state.kind == "density")
                errors.push_back(where +
                                 ": requires a pure initial state (kind basis, "
                                 "uniform_superposition, or pure)");
        }
    }

    if (!errors.empty()) return result;

    // Structural validation passed; resolve everything once so that any
    // remaining semantic violation (non-Hermitian matrix, bad partition,
    // non-relevant initial state, ...) is also reported here, not at run time.
    try {
        const HilbertSpace space = detail::resolve_space(cfg);
        const Hamiltonian h = detail::resolve_hamiltonian(cfg, space);
        const ZwanzigProjection proj = detail::resolve_projection(cfg, space);
        const detail::ResolvedInitialState init = detail::resolve_initial(cfg, space);
        if (cfg.solver.kind == "premaster" &&
            max_abs(proj.apply(init.density.matrix()) - init.density.matrix()) >
                default_policy().idempotence_tol)
            errors.push_back(
                "solver: the premaster solver requires an initial state that is invariant "
                "under the projection");
        if (cfg.measurement.present) {
            bipartition_of(space, cfg.measurement.first_side);
            if (!cfg.measurement.nested_split.empty()) {
                std::vector<std::string> third;
                for (const auto& f : space.factors()) {
                    bool used = false;
                    for (const auto& l : cfg.measurement.first_side)
                        if (l == f.label) used = true;
                    for (const auto& l : cfg.measurement.nested_split)
                        if (l == f.label) used = true;
                    if (!used) third.push_back(f.label);
                }
                if (third.empty())
                    errors.push_back("measurement.nested_split: the third region is empty");
            }
        }
    } catch (const Error& e) {
        errors.push_back(std::string("config: ") + e.what());
    }

    if (errors.empty()) result.config = std::move(cfg);
    return result;
}

// ---------------------------------------------------------------------------
// Execution.

namespace detail {

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

inline Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
    return out;
}

} // namespace detail

// Runs a validated config: solves the trajectory, writes
// <name>.trajectory.csv, optionally <name>.branches.json, and
// <name>.manifest.json into the output directory. Output directory
// precedence: RunOptions.out_override, then the ZWANZIG_OUT_DIR environment
// variable, then the config's output_dir. All artifact bytes are a pure
// function of (config, seed); the manifest additionally records wall-clock
// duration.
inline RunManifest run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
    const auto t_start = std::chrono::steady_clock::now();

    const HilbertSpace space = detail::resolve_space(cfg);
    const Hamiltonian h = detail::resolve_hamiltonian(cfg, space);
    const ZwanzigProjection proj = detail::resolve_projection(cfg, space);
    const detail::ResolvedInitialState init = detail::resolve_initial(cfg, space);

    std::filesystem::path out_dir = cfg.output_dir;
    if (const char* env = std::getenv(output_dir_env_var)) out_dir = env;
    if (opts.out_override) out_dir = *opts.out_override;
    std::filesystem::create_directories(out_dir);

    const std::uint64_t seed =
        opts.seed_override ? *opts.seed_override : cfg.measurement.seed;

    Trajectory traj = [&]() {
        if (cfg.solver.kind == "exact")
            return exact_projected_reference(
                init.density, h, proj, TimeGrid(cfg.solver.t0, cfg.solver.dt, cfg.solver.steps));
        if (cfg.solver.kind == "premaster")
            return premaster_evolve(init.density, h, proj,
                                    TimeGrid(cfg.solver.t0, cfg.solver.dt, cfg.solver.steps));
        if (cfg.solver.kind == "markov")
            return markov_evolve(init.density, h, proj, cfg.solver.epsilon,
                                 TimeGrid(cfg.solver.t0, cfg.solver.dt, cfg.solver.steps));
        return alternating_evolve(init.density, h, proj, cfg.solver.coarse_dt,
                                  cfg.solver.total_time);
    }();

    const double end_time = traj.grid.time(traj.grid.steps);
    RunManifest manifest;
    manifest.config_digest = cfg.digest;
    manifest.tool_version = version_string;
    manifest.seed = seed;

    // Scenario-specific columns derived from the unitary pure-state flow
    // (the relevance-projected trajectory itself is mixed).
    std::vector<RealVector> schmidt_columns;  // per step, padded to fixed rank
    Eigen::Index schmidt_rank = 0;
    std::vector<double> overlap_column;
    std::optional<BranchEnsemble> ensemble;
    double measure_time = cfg.measurement.time.value_or(end_time);

    if (cfg.measurement.present) {
        const PureState& psi0 = *init.pure;
        if (cfg.measurement.record_schmidt) {
            const IndexSplit split = split_indices(space, cfg.measurement.first_side);
            schmidt_rank = std::min(split.selected_dim, split.rest_dim);
            for (int n = 0; n <= traj.grid.steps; ++n) {
                const PureState psi_t = propagate_unitary(psi0, h, traj.grid.time(n));
                const SchmidtDecomposition dec =
                    schmidt(psi_t, cfg.measurement.first_side);
                RealVector padded = RealVector::Zero(schmidt_rank);
                padded.head(std::min(schmidt_rank, dec.coefficients.size())) =
                    dec.coefficients.head(std::min(schmidt_rank, dec.coefficients.size()));
                schmidt_columns.push_back(std::move(padded));
            }
        }
        if (cfg.measurement.nested_split.empty()) {
            const PureState psi_m = propagate_unitary(psi0, h, measure_time);
            ensemble = branch_ensemble(psi_m, cfg.measurement.first_side);
        }
        if (cfg.measurement.record_overlap) {
            const PureState psi_m = propagate_unitary(psi0, h, measure_time);
            const BranchEnsemble be = ensemble ? *ensemble
                                               : branch_ensemble(psi_m,
                                                                 cfg.measurement.first_side);
            if (be.branches.size() < 2)
                throw InvalidArgument(
                    "measurement.record_overlap: the state has fewer than two branches at the "
                    "collapse time");
            const std::vector<Complex> series = interference_overlap_series(
                be.branches[0], be.branches[1], h, traj.grid);
            for (const Complex& z : series) overlap_column.push_back(std::abs(z));
        }
    }

    // --- trajectory CSV ---
    std::string csv = "step,t,trace_dev,entropy,positivity_margin";
    for (Eigen::Index k = 0; k < schmidt_rank; ++k)
        csv += ",schmidt_c" + std::to_string(k + 1);
    if (!overlap_column.empty()) csv += ",overlap_abs";
    csv += "\n";
    for (int n = 0; n <= traj.grid.steps; ++n) {
        const StepDiagnostics& d = traj.diagnostics[static_cast<std::size_t>(n)];
        csv += std::to_string(n);
        csv += ",";
        csv += detail::format_double(traj.grid.time(n));
        csv += ",";
        csv += detail::format_double(d.trace_dev);
        csv += ",";
        csv += detail::format_double(d.entropy);
        csv += ",";
        csv += detail::format_double(d.positivity_margin);
        if (schmidt_rank > 0) {
            const RealVector& sc = schmidt_columns[static_cast<std::size_t>(n)];
            for (Eigen::Index k = 0; k < schmidt_rank; ++k) {
                csv += ",";
                csv += detail::format_double(sc(k));
            }
        }
        if (!overlap_column.empty()) {
            csv += ",";
            csv += detail::format_double(overlap_column[static_cast<std::size_t>(n)]);
        }
        csv += "\n";
    }
    const std::filesystem::path csv_path = out_dir / (cfg.name + ".trajectory.csv");
    detail::write_atomic(csv_path, csv);
    manifest.outputs.push_back(csv_path.string());

    // --- branches JSON ---
    double branch_prob_sum = 1.0;
    if (cfg.measurement.present) {
        detail::Json doc;
        doc["scenario"] = cfg.name;
        doc["time"] = measure_time;
        const FactorBipartition split = bipartition_of(space, cfg.measurement.first_side);
        doc["bipartition"] = {{"first", split.first}, {"second", split.second}};
        detail::Json nodes = detail::Json::array();
        const PureState psi_m = propagate_unitary(*init.pure, h, measure_time);
        if (!cfg.measurement.nested_split.empty()) {
            std::vector<std::string> third;
            for (const auto& f : space.factors()) {
                bool used = false;
                for (const auto& l : cfg.measurement.first_side)
                    if (l == f.label) used = true;
                for (const auto& l : cfg.measurement.nested_split)
                    if (l == f.label) used = true;
                if (!used) third.push_back(f.label);
            }
            const BranchTree tree = nested_schmidt(psi_m, cfg.measurement.first_side,
                                                   cfg.measurement.nested_split, third);
            branch_prob_sum = 0.0;
            for (const auto& node : tree.nodes) {
                nodes.push_back({{"outcome", node.record.outcome},
                                 {"parent", node.parent_index},
                                 {"probability", node.record.probability},
                                 {"path_probability", node.path_probability},
                                 {"state", detail::vector_to_json(
                                               node.record.state.amplitudes())}});
                if (node.parent_index >= 0) branch_prob_sum += node.path_probability;
            }
        } else {
            branch_prob_sum = 0.0;
            for (const auto& b : ensemble->branches) {
                nodes.push_back({{"outcome", b.outcome},
                                 {"parent", -1},
                                 {"probability", b.probability},
                                 {"path_probability", b.probability},
                                 {"state", detail::vector_to_json(b.state.amplitudes())}});
                branch_prob_sum += b.probability;
            }
        }
        doc["nodes"] = std::move(nodes);
        // Samples always refer to the first split's outcomes; a nested tree
        // only refines what each of those outcomes contains.
        if (cfg.measurement.samples > 0) {
            RandomStream rng(seed);
            const SchmidtDecomposition dec = schmidt(psi_m, cfg.measurement.first_side);
            const std::vector<int> outcomes =
                sample_outcomes(dec, rng, cfg.measurement.samples);
            std::vector<int> counts(static_cast<std::size_t>(dec.coefficients.size()), 0);
            for (int o : outcomes) counts[static_cast<std::size_t>(o)]++;
            doc["samples"] = {{"seed", seed},
                              {"count", cfg.measurement.samples},
                              {"outcome_counts", counts}};
        }
        const std::filesystem::path branch_path = out_dir / (cfg.name + ".branches.json");
        detail::write_atomic(branch_path, doc.dump(2) + "\n");
        manifest.outputs.push_back(branch_path.string());
    }

    // --- checks ---
    double max_trace_dev = 0.0, min_margin = 0.0;
    for (const auto& d : traj.diagnostics) {
        max_trace_dev = std::max(max_trace_dev, d.trace_dev);
        min_margin = std::min(min_margin, d.positivity_margin);
    }
    manifest.checks.push_back(
        {"states_recorded",
         traj.states.size() == static_cast<std::size_t>(traj.grid.steps) + 1});
    manifest.checks.push_back(
        {"trace_within_solver_tolerance", max_trace_dev <= solver_policy().unit_trace_tol});
    // The resolvent-limit generator is trace preserving but not completely
    // positive, so transient negativity of approximation size is expected
    // there; the other solvers are held to quadrature accuracy.
    const double positivity_floor =
        cfg.solver.kind == "markov" ? -1e-3 : solver_policy().positivity_floor;
    manifest.checks.push_back(
        {"positivity_within_solver_tolerance", min_margin >= positivity_floor});
    if (cfg.solver.kind == "alternating") {
        bool monotone = true;
        for (std::size_t i = 1; i < traj.diagnostics.size(); ++i)
            if (traj.diagnostics[i].entropy < traj.diagnostics[i - 1].entropy - 1e-10)
                monotone = false;
        manifest.checks.push_back({"entropy_non_decreasing", monotone});
    }
    if (cfg.measurement.present)
        manifest.checks.push_back(
            {"branch_probabilities_sum_to_one", std::abs(branch_prob_sum - 1.0) <= 1e-8});

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    detail::Json mdoc;
    mdoc["config_digest"] = manifest.config_digest;
    mdoc["tool_version"] = manifest.tool_version;
    mdoc["seed"] = manifest.seed;
    mdoc["duration_seconds"] = manifest.duration_seconds;
    detail::Json checks = detail::Json::array();
    for (const auto& c : manifest.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}});
    mdoc["checks"] = std::move(checks);
    mdoc["outputs"] = manifest.outputs;
    const std::filesystem::path manifest_path = out_dir / (cfg.name + ".manifest.json");
    detail::write_atomic(manifest_path, mdoc.dump(2) + "\n");
    manifest.outputs.push_back(manifest_path.string());

    return manifest;
}

// ---------------------------------------------------------------------------
// Built-in scenarios. Registry order is fixed; each entry validates.

struct BuiltinScenario {
    std::string name;
    std::string description;
    std::string config_json;
};

inline const std::vector<BuiltinScenario>& list_scenarios() {
    static const std::vector<BuiltinScenario> registry = {
        {"dephasing-qubit-bath",
         "qubit dephased by a two-qubit bath; alternating projection dynamics, "
         "monotone entropy",
         R"({
  "name": "dephasing-qubit-bath",
  "space": [{"label": "sys", "dim": 2}, {"label": "b1", "dim": 2}, {"label": "b2", "dim": 2}],
  "hamiltonian": {"kind": "pure_dephasing", "system": "sys", "coupling_scale": 0.6, "bath_scale": 0.4, "seed": 11},
  "projection": {"kind": "block_dephase", "blocks": [
    {"label": "sys0", "indices": [0, 1, 2, 3]},
    {"label": "sys1", "indices": [4, 5, 6, 7]}]},
  "initial_state": {"kind": "uniform_superposition"},
  "solver": {"kind": "alternating", "coarse_dt": 0.1, "total_time": 6.0}
})"},
        {"pointer-measurement",
         "qubit premeasured by a pointer qubit through an exact controlled flip; "
         "branch statistics at the end of the coupling",
         R"({
  "name": "pointer-measurement",
  "space": [{"label": "sys", "dim": 2}, {"label": "pointer", "dim": 2}],
  "hamiltonian": {"kind": "premeasurement_coupling", "system": "sys", "pointer": "pointer", "duration": 1.0},
  "projection": {"kind": "product_of_marginals", "first_side": ["sys"]},
  "initial_state": {"kind": "pure", "amplitudes": [
    [0.7071067811865476, 0], [0, 0], [0.7071067811865476, 0], [0, 0]]},
  "solver": {"kind": "exact", "dt": 0.02, "steps": 50},
  "measurement": {"first_side": ["sys"], "samples": 100, "seed": 7, "record_schmidt": true}
})"},
        {"premaster-vs-exact",
         "memory-kernel integro-differential solver on a qubit plus two-qubit bath "
         "with full-basis dephasing relevance",
         R"({
  "name": "premaster-vs-exact",
  "space": [{"label": "sys", "dim": 2}, {"label": "b1", "dim": 2}, {"label": "b2", "dim": 2}],
  "hamiltonian": {"kind": "random_hermitian", "seed": 5, "scale": 0.35},
  "projection": {"kind": "dephase", "basis": "computational"},
  "initial_state": {"kind": "basis", "index": 0},
  "solver": {"kind": "premaster", "dt": 0.001, "steps": 5000}
})"},
        {"alternating-coarse-grain",
         "two-block equipartition coarse-graining alternated with unitary strides",
         R"({
  "name": "alternating-coarse-grain",
  "space": [{"label": "a", "dim": 2}, {"label": "b", "dim": 4}],
  "hamiltonian": {"kind": "random_hermitian", "seed": 17, "scale": 0.8},
  "projection": {"kind": "coarse_grain_equipartition", "blocks": [
    {"label": "low", "indices": [0, 1]},
    {"label": "high", "indices": [2, 3, 4, 5, 6, 7]}]},
  "initial_state": {"kind": "basis", "index": 0},
  "solver": {"kind": "alternating", "coarse_dt": 0.25, "total_time": 10.0}
})"},
        {"markov-weak-coupling",
         "resolvent-regularized Markov generator on the dephasing relevance: a "
         "fixed well-spaced spectrum with a weak random off-diagonal coupling",
         R"({
  "name": "markov-weak-coupling",
  "space": [{"label": "sys", "dim": 2}, {"label": "bath", "dim": 2}],
  "hamiltonian": {"kind": "perturbed_diagonal", "diagonal": [-1.1, -0.3, 0.55, 1.4], "seed": 9, "scale": 0.1},
  "projection": {"kind": "dephase", "basis": "computational"},
  "initial_state": {"kind": "basis", "index": 0},
  "solver": {"kind": "markov", "dt": 0.05, "steps": 400, "epsilon": 0.001}
})"},
        {"interference-revival",
         "two coupled two-level halves; branch pair formed at t = 0 and the "
         "revival of their interference amplitude recorded over the grid",
         R"({
  "name": "interference-revival",
  "space": [{"label": "left", "dim": 2}, {"label": "right", "dim": 2}],
  "hamiltonian": {"kind": "coupled_pair", "first": ["left"], "internal_scale": 1.0, "coupling_scale": 0.6, "seed": 21},
  "projection": {"kind": "product_of_marginals", "first_side": ["left"]},
  "initial_state": {"kind": "pure", "amplitudes": [
    [0.7071067811865476, 0], [0, 0], [0, 0], [0.7071067811865476, 0]]},
  "solver": {"kind": "exact", "dt": 0.05, "steps": 200},
  "measurement": {"first_side": ["left"], "seed": 1, "time": 0.0, "record_overlap": true}
})"}};
    return registry;
}

inline const BuiltinScenario* find_scenario(const std::string& name) {
    for (const auto& s : list_scenarios())
        if (s.name == name) return &s;
    return nullptr;
}

} // namespace zwanzig
