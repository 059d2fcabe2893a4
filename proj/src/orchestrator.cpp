#include "fedmae/orchestrator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "fedmae/checksum.hpp"
#include "fedmae/errors.hpp"
#include "fedmae/mae.hpp"
#include "fedmae/wire.hpp"

namespace fedmae {
namespace {

std::vector<ImageSample> gather(const Dataset& data, const std::vector<SampleId>& ids) {
    std::vector<ImageSample> out;
    out.reserve(ids.size());
    for (SampleId id : ids) out.push_back(data.images[id]);
    return out;
}

struct EvalBatch {
    std::vector<PatchSet> patches;
    std::vector<MaskSet> masks;
    std::vector<MaeBatchItem> items;
};

// Fixed held-out batch with masks drawn once, so the per-round global loss
// is comparable across rounds.
EvalBatch build_eval_batch(const FederationConfig& cfg, const Dataset& data) {
    EvalBatch eb;
    SeededRng rng(cfg.master_seed, streams::kEval);
    const int patches = cfg.trainer.shape.patches_per_image();
    eb.patches.reserve(data.eval_ids.size());
    eb.masks.reserve(data.eval_ids.size());
    for (SampleId id : data.eval_ids) {
        eb.patches.push_back(patchify(data.images[id], cfg.trainer.shape.patch));
        SeededRng mrng = rng.derive(id);
        eb.masks.push_back(sample_mask(patches, cfg.trainer.mask_ratio, mrng));
    }
    eb.items.resize(eb.patches.size());
    for (std::size_t i = 0; i < eb.patches.size(); ++i)
        eb.items[i] = {&eb.patches[i], &eb.masks[i]};
    return eb;
}

void append_list(std::string& row, const std::vector<int>& xs) {
    row += ',';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) row += ';';
        row += std::to_string(xs[i]);
    }
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string split_name(SplitKind k) {
    switch (k) {
        case SplitKind::Homogeneous: return "homogeneous";
        case SplitKind::Heterogeneous: return "heterogeneous";
        case SplitKind::Custom: return "custom";
    }
    throw ConfigError("split_name: bad enum value");
}

SplitKind parse_split(const std::string& name) {
    if (name == "homogeneous") return SplitKind::Homogeneous;
    if (name == "heterogeneous") return SplitKind::Heterogeneous;
    if (name == "custom") return SplitKind::Custom;
    throw ConfigError("unknown split kind: " + name);
}

void FederationConfig::validate() const {
    if (num_clients < 0) throw ConfigError("federation: num_clients must be >= 0");
    if (num_clients > 5 && split != SplitKind::Custom)
        throw ConfigError("federation: built-in splits define at most 5 clients");
    if (rounds < 1) throw ConfigError("federation: rounds must be >= 1");
    if (eval_per_class < 1) throw ConfigError("federation: eval_per_class must be >= 1");
    if (probe_per_class < 0) throw ConfigError("federation: probe_per_class must be >= 0");
    if (!(init_scale > 0.0)) throw ConfigError("federation: init_scale must be > 0");
    if (!(fault.drop_prob >= 0.0 && fault.drop_prob <= 1.0) ||
        !(fault.corrupt_prob >= 0.0 && fault.corrupt_prob <= 1.0))
        throw ConfigError("federation: fault probabilities must lie in [0, 1]");
    if (split == SplitKind::Homogeneous && split_per_client == 0)
        throw ConfigError("federation: homogeneous split needs split_per_client > 0");
    if (split == SplitKind::Custom && manifest_path.empty())
        throw ConfigError("federation: custom split needs a manifest path");
    strategy.validate();
    trainer.validate();
    synth.validate();
    if (synth.height != trainer.shape.height || synth.width != trainer.shape.width)
        throw ConfigError("federation: synth image size must match the model image size");
}

Dataset assemble_dataset(const FederationConfig& cfg) {
    cfg.validate();
    Dataset data;
    SynthSpec spec = cfg.synth;
    const int train_n = cfg.synth.per_class;
    const int probe_n = cfg.probe_per_class;
    const int eval_n = cfg.eval_per_class;
    const int total = train_n + probe_n + eval_n;
    spec.per_class = total;
    data.images = generate_synth(spec);

    data.pool_a.domain = 'A';
    data.pool_b.domain = 'B';
    for (int dom = 0; dom < 2; ++dom)
        for (int c = 0; c < spec.classes; ++c) {
            const SampleId base =
                static_cast<SampleId>((static_cast<std::size_t>(dom) * spec.classes + c) * total);
            DatasetPool& pool = dom == 0 ? data.pool_a : data.pool_b;
            for (int i = 0; i < train_n; ++i) pool.ids.push_back(base + i);
            for (int i = 0; i < probe_n; ++i) data.probe_ids.push_back(base + train_n + i);
            for (int i = 0; i < eval_n; ++i) data.eval_ids.push_back(base + train_n + probe_n + i);
        }
    return data;
}

std::vector<std::vector<SampleId>> build_shards(const FederationConfig& cfg, const Dataset& data) {
    SplitAssignment sa;
    switch (cfg.split) {
        case SplitKind::Homogeneous:
            sa = homogeneous_split(data.pool_a, data.pool_b, cfg.split_per_client,
                                   cfg.split_server, SeededRng(cfg.master_seed, streams::kSplit));
            break;
        case SplitKind::Heterogeneous:
            sa = heterogeneous_split(data.pool_a, data.pool_b, cfg.split_server,
                                     SeededRng(cfg.master_seed, streams::kSplit));
            break;
        case SplitKind::Custom: {
            std::ifstream in(cfg.manifest_path);
            if (!in) throw NotFoundError("cannot open manifest: " + cfg.manifest_path);
            sa = read_manifest(in);
            break;
        }
    }
    std::vector<std::vector<SampleId>> shards;
    for (int c = 0; c < cfg.num_clients; ++c) shards.push_back(sa.clients[c]);
    shards.push_back(sa.server);
    return shards;
}

ParamVector initial_theta(const FederationConfig& cfg) {
    SeededRng rng(cfg.master_seed, streams::kInit);
    return MaeParams::init(cfg.trainer.shape, rng, cfg.init_scale).flatten();
}

FederationResult run_federation(const FederationConfig& cfg) {
    const Dataset data = assemble_dataset(cfg);
    return run_federation(cfg, data, build_shards(cfg, data));
}

FederationResult run_federation(const FederationConfig& cfg, const Dataset& data,
                                const std::vector<std::vector<SampleId>>& shards,
                                const ResumePoint* resume, const RunHooks* hooks) {
    cfg.validate();
    const int nodes = static_cast<int>(shards.size());
    if (nodes != cfg.num_clients + 1)
        throw ConfigError("run_federation: shard count must be num_clients + 1");
    for (const auto& s : shards)
        if (s.empty()) throw ConfigError("run_federation: a node has an empty shard");

    std::vector<std::vector<ImageSample>> node_data;
    node_data.reserve(shards.size());
    for (const auto& s : shards) node_data.push_back(gather(data, s));
    const EvalBatch eval = build_eval_batch(cfg, data);

    FederationResult res;
    if (resume) {
        if (resume->theta.values.size() != cfg.trainer.shape.param_count())
            throw ConfigError("run_federation: resume model length does not match shape");
        if (resume->start_round >= static_cast<std::uint64_t>(cfg.rounds))
            throw ConfigError("run_federation: resume round past the configured horizon");
        res.theta = resume->theta;
        res.state = resume->state;
    } else {
        res.theta = initial_theta(cfg);
        res.state = ServerOptState::zeros(res.theta.values.size());
    }
    const std::uint64_t start = resume ? resume->start_round : 0;

    SeededRng local_root(cfg.master_seed, streams::kLocal);
    SeededRng fault_root(cfg.master_seed, streams::kFault);
    const bool faults = cfg.fault.drop_prob > 0.0 || cfg.fault.corrupt_prob > 0.0;

    for (std::uint64_t t = start; t < static_cast<std::uint64_t>(cfg.rounds); ++t) {
        RoundRecord rec;
        rec.round = t;
        rec.node_losses.resize(nodes, 0.0);

        // Fan-out: every node (server included) trains from the same
        // broadcast model; updates travel through the wire format.
        std::vector<ClientUpdate> arrived;
        SeededRng round_rng = local_root.derive(t);
        for (int node = 0; node < nodes; ++node) {
            ClientUpdate upd = local_train(res.theta, node_data[node], cfg.trainer,
                                           round_rng.derive(node), node);
            rec.node_losses[node] = upd.loss_trace.back();
            std::vector<std::uint8_t> bytes = serialize_message(encode_update(upd, t));
            if (faults) {
                SeededRng frng = fault_root.derive(t).derive(node);
                if (frng.next_double() < cfg.fault.drop_prob) {
                    rec.dropped.push_back(node);
                    continue;
                }
                if (cfg.fault.corrupt_prob > 0.0 &&
                    frng.next_double() < cfg.fault.corrupt_prob) {
                    bytes[frng.next_below(bytes.size())] ^= 0xFF;
                }
            }
            try {
                arrived.push_back(decode_update(parse_message(bytes)));
            } catch (const ProtocolError&) {
                rec.corrupted.push_back(node);
            }
        }

        ParamVector delta_bar;
        if (arrived.empty()) {
            // Every update was lost this round; apply a zero delta so the
            // run completes deterministically.
            delta_bar.values.assign(res.theta.values.size(), 0.0);
        } else {
            delta_bar = combine_deltas(arrived, cfg.strategy.weighting);
        }
        rec.delta_norm = l2_norm(delta_bar);

        ServerStep next = step(cfg.strategy, res.state, res.theta, delta_bar);
        res.theta = std::move(next.theta);
        res.state = std::move(next.state);

        const MaeParams model = MaeParams::unflatten(cfg.trainer.shape, res.theta);
        rec.global_loss = mae_batch_loss(model, eval.items);
        if (!std::isfinite(rec.global_loss))
            throw NumericError("run_federation: non-finite eval loss at round " +
                               std::to_string(t));
        rec.theta_checksum = checksum(res.theta);
        res.records.push_back(std::move(rec));
        if (hooks && hooks->on_round_end) hooks->on_round_end(t, res.theta, res.state);
    }
    return res;
}

void write_rounds_csv(std::ostream& os, const std::vector<RoundRecord>& records) {
    os << "t,global_loss,delta_norm,theta_checksum,node_losses,dropped,corrupted\n";
    char cksum[24];
    for (const auto& r : records) {
        std::string row = std::to_string(r.round);
        row += ',';
        row += fmt_double(r.global_loss);
        row += ',';
        row += fmt_double(r.delta_norm);
        std::snprintf(cksum, sizeof(cksum), ",%016llx",
                      static_cast<unsigned long long>(r.theta_checksum));
        row += cksum;
        row += ',';
        for (std::size_t i = 0; i < r.node_losses.size(); ++i) {
            if (i) row += ';';
            row += fmt_double(r.node_losses[i]);
        }
        append_list(row, r.dropped);
        append_list(row, r.corrupted);
        os << row << '\n';
    }
}

}  // namespace fedmae
