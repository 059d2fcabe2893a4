#include "fedmae/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedmae/benchmark.hpp"
#include "fedmae/checksum.hpp"
#include "fedmae/errors.hpp"
#include "fedmae/persistence.hpp"

namespace fedmae {
namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NotFoundError("cannot write " + tmp);
        out << body;
        if (!out) throw NotFoundError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "run configuration file");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "override the master seed");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig c = o.config_path.empty() ? default_run_config() : load_config_file(o.config_path);
    if (o.seed) {
        c.fed.master_seed = *o.seed;
        c.fed.synth.seed = *o.seed;
        c.fed.trainer.seed = *o.seed;
    }
    return c;
}

std::string out_path(const CommonOpts& o, const std::string& name) {
    std::filesystem::create_directories(o.out_dir);
    return (std::filesystem::path(o.out_dir) / name).string();
}

Checkpoint make_checkpoint(const RunConfig& c, const FederationResult& r) {
    Checkpoint ck;
    ck.shape = c.fed.trainer.shape;
    ck.round = r.state.round;
    ck.master_seed = c.fed.master_seed;
    ck.theta = r.theta;
    ck.state = r.state;
    return ck;
}

int do_pretrain(const CommonOpts& o, const std::string& resume_path, int rounds_override,
                const std::string& bound_override, std::ostream& out) {
    RunConfig c = resolve_config(o);
    if (rounds_override > 0) c.fed.rounds = rounds_override;
    if (!bound_override.empty()) {
        parse_bound(bound_override);
        c.bound = bound_override;
    }
    const Dataset data = assemble_dataset(c.fed);
    const BoundKind kind{parse_bound(c.bound), c.fed.strategy};

    ResumePoint rp;
    const ResumePoint* rpp = nullptr;
    if (!resume_path.empty()) {
        const Checkpoint ck = load_checkpoint(resume_path);
        if (!(ck.shape == c.fed.trainer.shape))
            throw ConfigError("resume: checkpoint shape does not match the config");
        if (ck.master_seed != c.fed.master_seed)
            throw ConfigError("resume: checkpoint seed does not match the config");
        rp.theta = ck.theta;
        rp.state = ck.state;
        rp.start_round = ck.round;
        rpp = &rp;
    }

    const FederationResult res = train_bound_full(kind, c.fed, data, rpp);
    std::ostringstream csv;
    write_rounds_csv(csv, res.records);
    write_text_atomic(out_path(o, "rounds.csv"), csv.str());
    save_checkpoint(make_checkpoint(c, res), out_path(o, "ckpt_final.bin"));
    out << "pretrain " << c.bound << ": " << res.state.round << " rounds done, theta checksum "
        << hex64(checksum(res.theta)) << "\n";
    return 0;
}

int do_probe(const CommonOpts& o, const std::string& ckpt_path, std::ostream& out) {
    RunConfig c = resolve_config(o);
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (!(ck.shape == c.fed.trainer.shape))
        throw ConfigError("probe: checkpoint shape does not match the config");
    const Dataset data = assemble_dataset(c.fed);
    if (data.probe_ids.empty()) throw ConfigError("probe: fed.probe_per_class must be positive");
    std::vector<ImageSample> labeled;
    labeled.reserve(data.probe_ids.size());
    for (SampleId id : data.probe_ids) labeled.push_back(data.images[id]);

    ProbeResult res = probe(c.fed.trainer.shape, ck.theta, labeled, c.fed.synth.classes, c.probe,
                            c.fed.master_seed);
    res.bound = c.bound;

    std::ostringstream csv;
    csv << "bound,classifier,seed,round,accuracy,train_n,val_n,test_n,per_class_accuracy\n";
    csv << res.bound << ',' << classifier_name(res.classifier) << ',' << res.seed << ','
        << ck.round << ',' << res.accuracy << ',' << res.train_n << ',' << res.val_n << ','
        << res.test_n << ',';
    for (std::size_t i = 0; i < res.per_class_accuracy.size(); ++i) {
        if (i) csv << ';';
        csv << res.per_class_accuracy[i];
    }
    csv << '\n';
    write_text_atomic(out_path(o, "probe.csv"), csv.str());
    out << "probe " << res.bound << " round " << ck.round << ": accuracy " << res.accuracy
        << " (test n=" << res.test_n << ")\n";
    return 0;
}

int do_sweep(const CommonOpts& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    if (c.sweep_every == 0) throw ConfigError("sweep.every must be positive");
    std::vector<std::uint64_t> checkpoints;
    for (std::uint64_t r = 0; r < static_cast<std::uint64_t>(c.fed.rounds); r += c.sweep_every)
        checkpoints.push_back(r);
    checkpoints.push_back(c.fed.rounds);

    const std::vector<SweepPoint> points = sweep_epochs(c.fed, checkpoints, c.probe);
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    write_text_atomic(out_path(o, "sweep.csv"), csv.str());

    std::vector<BoundScore> scores;
    for (const auto& p : points)
        if (p.round == static_cast<std::uint64_t>(c.fed.rounds))
            scores.push_back({p.bound, c.fed.master_seed, p.result.accuracy});
    std::ostringstream bcsv;
    write_bounds_csv(bcsv, scores);
    write_text_atomic(out_path(o, "bounds.csv"), bcsv.str());

    out << "sweep: " << points.size() << " probes over " << checkpoints.size()
        << " checkpoints\n";
    for (const auto& s : scores)
        out << "  " << s.bound << " final accuracy " << s.accuracy << "\n";
    return 0;
}

int do_split(const std::string& mode, std::uint64_t pool_a, std::uint64_t pool_b,
             std::uint64_t per_client, std::uint64_t server, std::uint64_t seed,
             std::ostream& out) {
    DatasetPool a, b;
    a.domain = 'A';
    b.domain = 'B';
    for (std::uint64_t i = 0; i < pool_a; ++i) a.ids.push_back(static_cast<SampleId>(i));
    for (std::uint64_t i = 0; i < pool_b; ++i)
        b.ids.push_back(static_cast<SampleId>(pool_a + i));

    SplitAssignment sa;
    if (mode == "homogeneous")
        sa = homogeneous_split(a, b, per_client, server, SeededRng(seed, streams::kSplit));
    else if (mode == "heterogeneous")
        sa = heterogeneous_split(a, b, server, SeededRng(seed, streams::kSplit));
    else
        throw ConfigError("split: mode must be homogeneous or heterogeneous");
    std::ostringstream manifest;
    write_manifest(sa, manifest);
    out << manifest.str();
    return 0;
}

int do_synth(const CommonOpts& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    const std::vector<ImageSample> images = generate_synth(c.fed.synth);
    std::ostringstream csv;
    csv << "id,domain,label,pixel_checksum\n";
    std::uint64_t combined = kFnvOffset;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::uint64_t ck = checksum_doubles(images[i].pixels);
        combined = fnv1a64(&ck, sizeof(ck), combined);
        csv << i << ',' << images[i].domain << ',' << images[i].label << ',' << hex64(ck) << '\n';
    }
    write_text_atomic(out_path(o, "synth.csv"), csv.str());
    out << "synth: " << images.size() << " images, dataset checksum " << hex64(combined) << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"desk-scale federated masked-autoencoder pretraining simulator", "fedmae"};
    app.require_subcommand(1);

    CommonOpts pre_opts;
    std::string pre_resume, pre_bound;
    int pre_rounds = 0;
    CLI::App* pre = app.add_subcommand("pretrain", "run a federation or bound, write checkpoint");
    add_common(pre, pre_opts);
    pre->add_option("--resume", pre_resume, "resume from a checkpoint");
    pre->add_option("--rounds", pre_rounds, "override the round count");
    pre->add_option("--bound", pre_bound, "override the trained bound (fed|lower|upper)");

    CommonOpts probe_opts;
    std::string probe_ckpt;
    CLI::App* prb = app.add_subcommand("probe", "probe a checkpoint's frozen features");
    add_common(prb, probe_opts);
    prb->add_option("--checkpoint", probe_ckpt, "checkpoint to probe")->required();

    CommonOpts sweep_opts;
    CLI::App* swp = app.add_subcommand("sweep", "probe accuracy across pretraining rounds");
    add_common(swp, sweep_opts);

    std::string split_mode;
    std::uint64_t split_pool_a = 0, split_pool_b = 0, split_per_client = 0, split_server = 0,
                  split_seed = 1;
    CLI::App* spl = app.add_subcommand("split", "materialize and print a split manifest");
    spl->add_option("--mode", split_mode, "homogeneous|heterogeneous")->required();
    spl->add_option("--pool-a", split_pool_a, "pool A size")->required();
    spl->add_option("--pool-b", split_pool_b, "pool B size")->required();
    spl->add_option("--per-client", split_per_client, "images per client (homogeneous)");
    spl->add_option("--server", split_server, "server shard size")->required();
    spl->add_option("--seed", split_seed, "split seed");

    CommonOpts synth_opts;
    CLI::App* syn = app.add_subcommand("synth", "emit the synthetic dataset manifest");
    add_common(syn, synth_opts);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("fedmae");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (pre->parsed()) return do_pretrain(pre_opts, pre_resume, pre_rounds, pre_bound, out);
        if (prb->parsed()) return do_probe(probe_opts, probe_ckpt, out);
        if (swp->parsed()) return do_sweep(sweep_opts, out);
        if (spl->parsed())
            return do_split(split_mode, split_pool_a, split_pool_b, split_per_client,
                            split_server, split_seed, out);
        if (syn->parsed()) return do_synth(synth_opts, out);
        err << "error: no subcommand\n";
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {  // DimensionError, bad argument values
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {  // protocol, checkpoint, numeric, IO
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace fedmae
