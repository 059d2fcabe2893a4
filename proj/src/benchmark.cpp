#include "fedmae/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

// Softmax classifier (optionally with one tanh hidden layer) trained by
// minibatch SGD on cross-entropy.
struct Classifier {
    bool mlp = false;
    int in = 0, hid = 0, out = 0;
    std::vector<double> w1, b1, w2, b2;  // linear uses w2/b2 only

    static Classifier init(bool mlp, int in, int hid, int out, SeededRng& rng) {
        Classifier c;
        c.mlp = mlp;
        c.in = in;
        c.hid = mlp ? hid : 0;
        c.out = out;
        auto fill = [&](std::vector<double>& v, std::size_t n) {
            v.resize(n);
            for (double& x : v) x = rng.uniform(-0.1, 0.1);
        };
        if (mlp) {
            fill(c.w1, static_cast<std::size_t>(hid) * in);
            c.b1.assign(hid, 0.0);
            fill(c.w2, static_cast<std::size_t>(out) * hid);
            c.b2.assign(out, 0.0);
        } else {
            fill(c.w2, static_cast<std::size_t>(out) * in);
            c.b2.assign(out, 0.0);
        }
        return c;
    }

    void logits(const double* x, std::vector<double>& h, std::vector<double>& z) const {
        const double* inp = x;
        if (mlp) {
            h.resize(hid);
            for (int i = 0; i < hid; ++i) {
                double acc = b1[i];
                const double* row = w1.data() + static_cast<std::size_t>(i) * in;
                for (int j = 0; j < in; ++j) acc += row[j] * x[j];
                h[i] = std::tanh(acc);
            }
            inp = h.data();
        }
        const int cols = mlp ? hid : in;
        z.resize(out);
        for (int c = 0; c < out; ++c) {
            double acc = b2[c];
            const double* row = w2.data() + static_cast<std::size_t>(c) * cols;
            for (int j = 0; j < cols; ++j) acc += row[j] * inp[j];
            z[c] = acc;
        }
    }

    int predict(const double* x) const {
        std::vector<double> h, z;
        logits(x, h, z);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }
};

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// One SGD step on a minibatch; gradients averaged over the batch.
void train_batch(Classifier& c, const std::vector<std::vector<double>>& xs,
                 const std::vector<int>& ys, const std::vector<std::size_t>& batch,
                 double lr) {
    const int cols = c.mlp ? c.hid : c.in;
    std::vector<double> gw2(c.w2.size(), 0.0), gb2(c.b2.size(), 0.0);
    std::vector<double> gw1(c.w1.size(), 0.0), gb1(c.b1.size(), 0.0);
    std::vector<double> h, z, dh;
    for (std::size_t idx : batch) {
        const double* x = xs[idx].data();
        c.logits(x, h, z);
        softmax_inplace(z);
        z[ys[idx]] -= 1.0;  // dL/dlogits
        const double* inp = c.mlp ? h.data() : x;
        for (int k = 0; k < c.out; ++k) {
            gb2[k] += z[k];
            double* row = gw2.data() + static_cast<std::size_t>(k) * cols;
            for (int j = 0; j < cols; ++j) row[j] += z[k] * inp[j];
        }
        if (c.mlp) {
            dh.assign(c.hid, 0.0);
            for (int k = 0; k < c.out; ++k) {
                const double* row = c.w2.data() + static_cast<std::size_t>(k) * c.hid;
                for (int j = 0; j < c.hid; ++j) dh[j] += row[j] * z[k];
            }
            for (int i = 0; i < c.hid; ++i) {
                const double g = dh[i] * (1.0 - h[i] * h[i]);
                gb1[i] += g;
                double* row = gw1.data() + static_cast<std::size_t>(i) * c.in;
                for (int j = 0; j < c.in; ++j) row[j] += g * x[j];
            }
        }
    }
    const double scale = lr / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < c.w2.size(); ++i) c.w2[i] -= scale * gw2[i];
    for (std::size_t i = 0; i < c.b2.size(); ++i) c.b2[i] -= scale * gb2[i];
    for (std::size_t i = 0; i < c.w1.size(); ++i) c.w1[i] -= scale * gw1[i];
    for (std::size_t i = 0; i < c.b1.size(); ++i) c.b1[i] -= scale * gb1[i];
}

double accuracy_on(const Classifier& c, const std::vector<std::vector<double>>& xs,
                   const std::vector<int>& ys, const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i : idx)
        if (c.predict(xs[i].data()) == ys[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string bound_name(BoundId id) {
    switch (id) {
        case BoundId::Lower: return "lower";
        case BoundId::Upper: return "upper";
        case BoundId::FedFound: return "fed";
    }
    throw ConfigError("bound_name: bad enum value");
}

BoundId parse_bound(const std::string& name) {
    if (name == "lower") return BoundId::Lower;
    if (name == "upper") return BoundId::Upper;
    if (name == "fed") return BoundId::FedFound;
    throw ConfigError("unknown bound kind: " + name);
}

std::string classifier_name(ClassifierKind k) {
    return k == ClassifierKind::LinearSoftmax ? "linear" : "mlp";
}

ClassifierKind parse_classifier(const std::string& name) {
    if (name == "linear") return ClassifierKind::LinearSoftmax;
    if (name == "mlp") return ClassifierKind::MlpOneHidden;
    throw ConfigError("unknown classifier kind: " + name);
}

void ProbeOptions::validate() const {
    if (!(lr > 0.0)) throw ConfigError("probe: lr must be > 0");
    if (epochs < 1) throw ConfigError("probe: epochs must be >= 1");
    if (batch < 1) throw ConfigError("probe: batch must be >= 1");
    if (classifier == ClassifierKind::MlpOneHidden && hidden < 1)
        throw ConfigError("probe: hidden must be >= 1");
}

ProbeResult probe_features(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, int classes,
                           const ProbeOptions& opt, std::uint64_t seed) {
    opt.validate();
    if (classes < 2) throw std::invalid_argument("probe: need at least 2 classes");
    if (features.empty() || features.size() != labels.size())
        throw std::invalid_argument("probe: features and labels must align and be nonempty");
    const int dim = static_cast<int>(features[0].size());
    for (const auto& f : features)
        if (static_cast<int>(f.size()) != dim)
            throw std::invalid_argument("probe: ragged feature vectors");

    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw std::invalid_argument("probe: label out of range");
        by_class[labels[i]].push_back(i);
    }
    for (int c = 0; c < classes; ++c)
        if (by_class[c].size() < 3)
            throw std::invalid_argument("probe: class " + std::to_string(c) +
                                        " has fewer than 3 samples; cannot stratify");

    // Stratified 70/15/15.
    SeededRng root(seed, streams::kProbe);
    std::vector<std::size_t> train, val, test;
    for (int c = 0; c < classes; ++c) {
        auto idx = by_class[c];
        SeededRng crng = root.derive(0).derive(c);
        crng.shuffle(idx);
        const std::size_t n = idx.size();
        const std::size_t ntr = n * 70 / 100;
        const std::size_t nva = n * 15 / 100;
        train.insert(train.end(), idx.begin(), idx.begin() + ntr);
        val.insert(val.end(), idx.begin() + ntr, idx.begin() + ntr + nva);
        test.insert(test.end(), idx.begin() + ntr + nva, idx.end());
    }

    // Standardize by train statistics.
    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    for (std::size_t i : train)
        for (int j = 0; j < dim; ++j) mean[j] += features[i][j];
    for (int j = 0; j < dim; ++j) mean[j] /= static_cast<double>(train.size());
    for (std::size_t i : train)
        for (int j = 0; j < dim; ++j) {
            const double d = features[i][j] - mean[j];
            sd[j] += d * d;
        }
    for (int j = 0; j < dim; ++j)
        sd[j] = std::sqrt(sd[j] / static_cast<double>(train.size())) + 1e-12;
    std::vector<std::vector<double>> xs(features.size(), std::vector<double>(dim));
    for (std::size_t i = 0; i < features.size(); ++i)
        for (int j = 0; j < dim; ++j) xs[i][j] = (features[i][j] - mean[j]) / sd[j];

    SeededRng init_rng = root.derive(1);
    Classifier clf = Classifier::init(opt.classifier == ClassifierKind::MlpOneHidden, dim,
                                      opt.hidden, classes, init_rng);
    Classifier best = clf;
    double best_val = -1.0;

    std::vector<std::size_t> order = train;
    std::vector<std::size_t> batch;
    for (int e = 0; e < opt.epochs; ++e) {
        SeededRng erng = root.derive(2).derive(e);
        erng.shuffle(order);
        for (std::size_t pos = 0; pos < order.size(); pos += opt.batch) {
            const std::size_t end = std::min(order.size(), pos + opt.batch);
            batch.assign(order.begin() + pos, order.begin() + end);
            train_batch(clf, xs, labels, batch, opt.lr);
        }
        if (!val.empty()) {
            const double acc = accuracy_on(clf, xs, labels, val);
            if (acc > best_val) {
                best_val = acc;
                best = clf;
            }
        }
    }
    if (val.empty()) best = clf;  // nothing to select on; keep the last epoch

    ProbeResult res;
    res.classifier = opt.classifier;
    res.seed = seed;
    res.train_n = static_cast<int>(train.size());
    res.val_n = static_cast<int>(val.size());
    res.test_n = static_cast<int>(test.size());
    res.confusion.assign(static_cast<std::size_t>(classes) * classes, 0);
    for (std::size_t i : test)
        ++res.confusion[static_cast<std::size_t>(labels[i]) * classes +
                        best.predict(xs[i].data())];
    int hits = 0;
    res.per_class_accuracy.assign(classes, 0.0);
    for (int c = 0; c < classes; ++c) {
        int row = 0;
        for (int k = 0; k < classes; ++k) row += res.confusion[static_cast<std::size_t>(c) * classes + k];
        const int diag = res.confusion[static_cast<std::size_t>(c) * classes + c];
        hits += diag;
        res.per_class_accuracy[c] = row > 0 ? static_cast<double>(diag) / row : 0.0;
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
    return res;
}

ProbeResult probe(const MaeShape& shape, const ParamVector& theta,
                  std::span<const ImageSample> labeled, int classes,
                  const ProbeOptions& opt, std::uint64_t seed) {
    const MaeParams params = MaeParams::unflatten(shape, theta);
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    feats.reserve(labeled.size());
    labels.reserve(labeled.size());
    for (const auto& img : labeled) {
        feats.push_back(mae_encode(params, patchify(img, shape.patch)));
        labels.push_back(img.label);
    }
    return probe_features(feats, labels, classes, opt, seed);
}

FederationResult train_bound_full(const BoundKind& kind, const FederationConfig& cfg,
                                  const Dataset& data, const ResumePoint* resume,
                                  const RunHooks* hooks) {
    FederationConfig run_cfg = cfg;
    std::vector<std::vector<SampleId>> shards;
    switch (kind.id) {
        case BoundId::FedFound:
            run_cfg.strategy = kind.strategy;
            shards = build_shards(run_cfg, data);
            break;
        case BoundId::Lower: {
            run_cfg.num_clients = 0;
            run_cfg.strategy = Strategy{};  // plain FedAvg, eta_s = 1: sequential SGD
            shards = {build_shards(cfg, data).back()};
            break;
        }
        case BoundId::Upper: {
            run_cfg.num_clients = 0;
            run_cfg.strategy = Strategy{};
            std::vector<SampleId> pooled = data.pool_a.ids;
            pooled.insert(pooled.end(), data.pool_b.ids.begin(), data.pool_b.ids.end());
            shards = {std::move(pooled)};
            break;
        }
    }
    return run_federation(run_cfg, data, shards, resume, hooks);
}

ParamVector train_bound(const BoundKind& kind, const FederationConfig& cfg) {
    const Dataset data = assemble_dataset(cfg);
    return train_bound_full(kind, cfg, data).theta;
}

std::vector<SweepPoint> sweep_epochs(const FederationConfig& cfg,
                                     const std::vector<std::uint64_t>& checkpoints,
                                     const ProbeOptions& popt) {
    cfg.validate();
    for (std::uint64_t r : checkpoints)
        if (r > static_cast<std::uint64_t>(cfg.rounds))
            throw ConfigError("sweep: checkpoint round past the configured horizon");
    const Dataset data = assemble_dataset(cfg);
    if (data.probe_ids.empty()) throw ConfigError("sweep: probe_per_class must be positive");
    std::vector<ImageSample> labeled;
    labeled.reserve(data.probe_ids.size());
    for (SampleId id : data.probe_ids) labeled.push_back(data.images[id]);

    std::vector<std::uint64_t> wanted = checkpoints;
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

    std::vector<SweepPoint> out;
    const BoundId ids[] = {BoundId::Lower, BoundId::FedFound, BoundId::Upper};
    for (BoundId id : ids) {
        BoundKind kind{id, cfg.strategy};
        std::vector<std::pair<std::uint64_t, ParamVector>> snaps;
        if (!wanted.empty() && wanted.front() == 0)
            snaps.emplace_back(0, initial_theta(cfg));
        RunHooks hooks;
        hooks.on_round_end = [&](std::uint64_t t, const ParamVector& theta,
                                 const ServerOptState&) {
            if (std::binary_search(wanted.begin(), wanted.end(), t + 1))
                snaps.emplace_back(t + 1, theta);
        };
        train_bound_full(kind, cfg, data, nullptr, &hooks);
        for (auto& [round, theta] : snaps) {
            SweepPoint p;
            p.round = round;
            p.bound = bound_name(id);
            p.result = probe(cfg.trainer.shape, theta, labeled, cfg.synth.classes, popt,
                             cfg.master_seed);
            p.result.bound = p.bound;
            out.push_back(std::move(p));
        }
    }
    return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    os << "round,kind,accuracy\n";
    for (const auto& p : points)
        os << p.round << ',' << p.bound << ',' << fmt_double(p.result.accuracy) << '\n';
}

void write_bounds_csv(std::ostream& os, const std::vector<BoundScore>& scores) {
    os << "kind,seed,accuracy\n";
    for (const auto& s : scores)
        os << s.bound << ',' << s.seed << ',' << fmt_double(s.accuracy) << '\n';
}

}  // namespace fedmae
