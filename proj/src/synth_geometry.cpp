#include "ncood/synth_geometry.hpp"

#include "ncood/error.hpp"
#include "ncood/rng.hpp"

#include <cmath>

namespace ncood {

namespace {

constexpr std::uint64_t kIdStream = 1;
constexpr std::uint64_t kOodStream = 2;

Vector normal_vector(Rng& rng, Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index j = 0; j < n; ++j) v[j] = rng.normal();
    return v;
}

}  // namespace

EtfFrame simplex_etf(int classes, int dim, double norm, std::uint64_t seed) {
    if (classes < 2) throw ContractError("simplex ETF needs at least 2 classes");
    if (dim < classes) {
        throw ContractError("simplex ETF construction requires D >= C, got D = " + std::to_string(dim) +
                            ", C = " + std::to_string(classes));
    }
    if (!(norm > 0.0)) throw ContractError("simplex ETF norm must be positive");

    Rng rng(seed);
    Matrix gaussian(dim, classes);
    for (Eigen::Index i = 0; i < gaussian.rows(); ++i) {
        for (Eigen::Index j = 0; j < gaussian.cols(); ++j) gaussian(i, j) = rng.normal();
    }
    const Eigen::HouseholderQR<Matrix> qr(gaussian);
    const Matrix basis = qr.householderQ() * Matrix::Identity(dim, classes);  // D x C, orthonormal columns

    const double c = static_cast<double>(classes);
    const Matrix centering = Matrix::Identity(classes, classes) - Matrix::Constant(classes, classes, 1.0 / c);
    EtfFrame frame;
    frame.norm = norm;
    frame.vectors = (norm * std::sqrt(c / (c - 1.0))) * (basis * centering).transpose();
    return frame;
}

OodMode parse_ood_mode(const std::string& name) {
    if (name == "near_origin") return OodMode::near_origin;
    if (name == "random_direction") return OodMode::random_direction;
    if (name == "in_cone_near_origin") return OodMode::in_cone_near_origin;
    throw ContractError("unknown OOD mode \"" + name +
                        "\" (expected near_origin, random_direction or in_cone_near_origin)");
}

const char* ood_mode_name(OodMode mode) {
    switch (mode) {
        case OodMode::near_origin: return "near_origin";
        case OodMode::random_direction: return "random_direction";
        case OodMode::in_cone_near_origin: return "in_cone_near_origin";
    }
    return "?";
}

void SynthSpec::validate() const {
    if (classes < 2) throw ContractError("synthetic world needs at least 2 classes");
    if (dim < classes) throw ContractError("synthetic world requires D >= C");
    if (n_per_class < 0 || n_ood < 0) throw ContractError("sample counts must be non-negative");
    if (!(scale > 0.0)) throw ContractError("scale must be positive");
    if (!(noise_sigma >= 0.0)) throw ContractError("noise sigma must be non-negative");
    if (!(ood_radius_fraction > 0.0)) throw ContractError("OOD radius fraction must be positive");
}

IdWorld gen_id_features(const EtfFrame& frame, const SynthSpec& spec) {
    spec.validate();
    const auto c_count = frame.vectors.rows();
    const auto d = frame.vectors.cols();
    if (c_count != spec.classes || d != spec.dim) {
        throw ContractError("ETF frame shape does not match the synthetic spec");
    }
    Rng rng(derive_seed(spec.seed, kIdStream));
    const auto n = c_count * spec.n_per_class;
    FeatureSet fs;
    fs.name = "synth_id";
    fs.features.resize(n, d);
    Labels labels(static_cast<std::size_t>(n));
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < c_count; ++c) {
        for (int i = 0; i < spec.n_per_class; ++i, ++row) {
            fs.features.row(row) = spec.scale * frame.vectors.row(c);
            if (spec.noise_sigma > 0.0) fs.features.row(row) += spec.noise_sigma * normal_vector(rng, d).transpose();
            labels[static_cast<std::size_t>(row)] = c;
        }
    }
    fs.labels = std::move(labels);
    return IdWorld{std::move(fs), ClassifierHead(frame.vectors, Vector::Zero(c_count))};
}

FeatureSet gen_ood_features(const EtfFrame& frame, const SynthSpec& spec) {
    spec.validate();
    const auto c_count = frame.vectors.rows();
    const auto d = frame.vectors.cols();
    Rng rng(derive_seed(spec.seed, kOodStream));
    const double id_radius = spec.scale * frame.norm;
    const double radius = spec.ood_radius_fraction * id_radius;

    FeatureSet fs;
    fs.name = std::string("synth_ood_") + ood_mode_name(spec.ood_mode);
    fs.features.resize(spec.n_ood, d);
    for (Eigen::Index i = 0; i < spec.n_ood; ++i) {
        switch (spec.ood_mode) {
            case OodMode::near_origin:
                fs.features.row(i) = (radius / std::sqrt(static_cast<double>(d))) * normal_vector(rng, d).transpose();
                break;
            case OodMode::random_direction: {
                Vector z = normal_vector(rng, d);
                while (z.norm() == 0.0) z = normal_vector(rng, d);
                fs.features.row(i) = (id_radius / z.norm()) * z.transpose();
                break;
            }
            case OodMode::in_cone_near_origin: {
                const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(c_count)));
                const double r = rng.uniform(0.5 * radius, radius);
                fs.features.row(i) = (r / frame.vectors.row(c).norm()) * frame.vectors.row(c);
                break;
            }
        }
    }
    return fs;
}

SynthWorld make_synth_world(const SynthSpec& spec, int n_eval_per_class) {
    spec.validate();
    if (n_eval_per_class < 0) throw ContractError("evaluation samples per class must be non-negative");
    EtfFrame frame = simplex_etf(spec.classes, spec.dim, 1.0, derive_seed(spec.seed, 100));

    auto variant = [&](std::uint64_t stream, int n_per_class) {
        SynthSpec s = spec;
        s.seed = derive_seed(spec.seed, stream);
        s.n_per_class = n_per_class;
        return s;
    };
    IdWorld train = gen_id_features(frame, spec);
    train.train.name = "train";
    FeatureSet id_test = gen_id_features(frame, variant(101, n_eval_per_class)).train;
    id_test.name = "id_test";
    FeatureSet id_val = gen_id_features(frame, variant(102, n_eval_per_class)).train;
    id_val.name = "id_val";
    FeatureSet ood_test = gen_ood_features(frame, spec);
    ood_test.name = std::string("ood_") + ood_mode_name(spec.ood_mode);
    FeatureSet noise_val = gen_ood_features(frame, variant(103, spec.n_per_class));
    noise_val.name = "noise_val";
    return SynthWorld{std::move(frame), std::move(train), std::move(id_test), std::move(id_val), std::move(ood_test),
                      std::move(noise_val)};
}

}  // namespace ncood
