#pragma once

#include "ncood/dataset_model.hpp"

#include <cstdint>
#include <string>

namespace ncood {

/// C equal-norm vectors in R^D with pairwise cosine -1/(C-1).
struct EtfFrame {
    Matrix vectors;  // C x D
    double norm;
};

inline constexpr std::uint64_t kDefaultEtfSeed = 0x5EEDE7F0ull;

/// Scaled, centered simplex embedded through D x C orthonormal columns
/// obtained by QR of a seeded Gaussian matrix. Requires 2 <= C <= D.
EtfFrame simplex_etf(int classes, int dim, double norm = 1.0, std::uint64_t seed = kDefaultEtfSeed);

enum class OodMode { near_origin, random_direction, in_cone_near_origin };

OodMode parse_ood_mode(const std::string& name);
const char* ood_mode_name(OodMode mode);

struct SynthSpec {
    int classes = 10;
    int dim = 32;
    int n_per_class = 100;
    double scale = 5.0;          // lambda: ID clusters sit at lambda * w_c
    double noise_sigma = 0.5;
    OodMode ood_mode = OodMode::near_origin;
    int n_ood = 1000;
    std::uint64_t seed = 7;
    double ood_radius_fraction = 0.3;  // OOD radius as a fraction of lambda * ||w||

    void validate() const;
};

struct IdWorld {
    FeatureSet train;
    ClassifierHead head;
};

/// Features lambda * w_c + sigma * z for every class, labels attached, head = frame with zero bias.
IdWorld gen_id_features(const EtfFrame& frame, const SynthSpec& spec);

/// OOD features for spec.ood_mode:
///  near_origin          isotropic normal with expected norm r = fraction * lambda * ||w||
///  random_direction     uniform directions at radius lambda * ||w||
///  in_cone_near_origin  along a random w_c at radius uniform in [r/2, r]
FeatureSet gen_ood_features(const EtfFrame& frame, const SynthSpec& spec);

/// A complete synthetic experiment: training set with head, held-out ID
/// test and validation sets, OOD test set, and a held-out OOD draw used as
/// the noise-validation set for choosing alpha. Every part has its own
/// sub-stream of spec.seed.
struct SynthWorld {
    EtfFrame frame;
    IdWorld train;
    FeatureSet id_test;
    FeatureSet id_val;
    FeatureSet ood_test;
    FeatureSet noise_val;
};

SynthWorld make_synth_world(const SynthSpec& spec, int n_eval_per_class);

}  // namespace ncood
