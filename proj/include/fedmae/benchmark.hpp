#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedmae/orchestrator.hpp"

namespace fedmae {

enum class BoundId { Lower, Upper, FedFound };

std::string bound_name(BoundId id);        // "lower" / "upper" / "fed"
BoundId parse_bound(const std::string&);   // throws ConfigError

struct BoundKind {
    BoundId id = BoundId::FedFound;
    Strategy strategy;  // used for FedFound; lower/upper are plain SGD
};

enum class ClassifierKind { LinearSoftmax, MlpOneHidden };

std::string classifier_name(ClassifierKind k);        // "linear" / "mlp"
ClassifierKind parse_classifier(const std::string&);  // throws ConfigError

struct ProbeOptions {
    ClassifierKind classifier = ClassifierKind::LinearSoftmax;
    double lr = 0.5;
    int epochs = 60;
    int batch = 32;
    int hidden = 16;  // MLP only

    void validate() const;  // throws ConfigError
    bool operator==(const ProbeOptions&) const = default;
};

struct ProbeResult {
    std::string bound;  // caller-supplied tag
    ClassifierKind classifier = ClassifierKind::LinearSoftmax;
    double accuracy = 0.0;                   // test accuracy at the best-val epoch
    std::vector<double> per_class_accuracy;  // test, indexed by label
    std::vector<int> confusion;              // C x C test counts, [true*C + predicted]
    int train_n = 0, val_n = 0, test_n = 0;
    std::uint64_t seed = 0;
};

// Train a softmax classifier on fixed feature vectors: stratified 70/15/15
// split per class (seeded), features standardized by train statistics,
// cross-entropy SGD, epoch chosen by validation accuracy, accuracy reported
// on test. Every class in [0, classes) needs >= 3 samples.
ProbeResult probe_features(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, int classes,
                           const ProbeOptions& opt, std::uint64_t seed);

// encode() every image with the frozen model, then probe_features.
ProbeResult probe(const MaeShape& shape, const ParamVector& theta,
                  std::span<const ImageSample> labeled, int classes,
                  const ProbeOptions& opt, std::uint64_t seed);

// Lower: the server shard only; upper: all training pools on one node; fed:
// the configured federation. All kinds run R rounds x K steps per node, so
// gradient-step budgets match.
ParamVector train_bound(const BoundKind& kind, const FederationConfig& cfg);

FederationResult train_bound_full(const BoundKind& kind, const FederationConfig& cfg,
                                  const Dataset& data, const ResumePoint* resume = nullptr,
                                  const RunHooks* hooks = nullptr);

struct SweepPoint {
    std::uint64_t round = 0;  // 0 = untrained initial model
    std::string bound;
    ProbeResult result;
};

// Run lower/fed/upper once each, snapshot the model after every listed round
// (0 allowed), and probe every snapshot on the held-out labeled set.
std::vector<SweepPoint> sweep_epochs(const FederationConfig& cfg,
                                     const std::vector<std::uint64_t>& checkpoints,
                                     const ProbeOptions& popt);

// CSV schemas: sweep.csv "round,kind,accuracy"; bounds.csv "kind,seed,accuracy".
void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points);

struct BoundScore {
    std::string bound;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
};

void write_bounds_csv(std::ostream& os, const std::vector<BoundScore>& scores);

}  // namespace fedmae
