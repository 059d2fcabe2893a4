#include "fedmae/persistence.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedmae/checksum.hpp"
#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

constexpr char kMagic[8] = {'F', 'M', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto r = std::from_chars(first, last, out);
    if (r.ec != std::errc{} || r.ptr != last)
        throw ConfigError("config: bad value for " + key + ": '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: bad value for " + key + ": '" + value + "' (want true|false)");
}

std::string format_double(double x) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define NUM_FIELD(KEY, EXPR, TYPE)                                                       \
    Field{KEY, [](const RunConfig& c) { return format_value(c.EXPR); },                  \
          [](RunConfig& c, const std::string& v) { c.EXPR = parse_number<TYPE>(KEY, v); }}

std::string format_value(double x) { return format_double(x); }
std::string format_value(bool b) { return b ? "true" : "false"; }
template <typename T>
std::string format_value(T x) {
    return std::to_string(x);
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"schema_version",
              [](const RunConfig& c) { return std::to_string(c.schema_version); },
              [](RunConfig& c, const std::string& v) {
                  c.schema_version = parse_number<int>("schema_version", v);
                  if (c.schema_version != kConfigSchemaVersion)
                      throw ConfigError("config: unsupported schema_version " + v);
              }},
        Field{"seed", [](const RunConfig& c) { return std::to_string(c.fed.master_seed); },
              [](RunConfig& c, const std::string& v) {
                  const auto s = parse_number<std::uint64_t>("seed", v);
                  c.fed.master_seed = s;
                  c.fed.synth.seed = s;
                  c.fed.trainer.seed = s;
              }},
        Field{"run.bound", [](const RunConfig& c) { return c.bound; },
              [](RunConfig& c, const std::string& v) {
                  parse_bound(v);  // validates
                  c.bound = v;
              }},
        NUM_FIELD("fed.clients", fed.num_clients, int),
        NUM_FIELD("fed.rounds", fed.rounds, int),
        NUM_FIELD("fed.eval_per_class", fed.eval_per_class, int),
        NUM_FIELD("fed.probe_per_class", fed.probe_per_class, int),
        Field{"strategy.kind",
              [](const RunConfig& c) { return strategy_name(c.fed.strategy.kind); },
              [](RunConfig& c, const std::string& v) { c.fed.strategy.kind = parse_strategy(v); }},
        NUM_FIELD("strategy.server_lr", fed.strategy.server_lr, double),
        NUM_FIELD("strategy.momentum", fed.strategy.momentum, double),
        NUM_FIELD("strategy.beta1", fed.strategy.beta1, double),
        NUM_FIELD("strategy.beta2", fed.strategy.beta2, double),
        NUM_FIELD("strategy.epsilon", fed.strategy.epsilon, double),
        Field{"strategy.weighting",
              [](const RunConfig& c) { return weighting_name(c.fed.strategy.weighting); },
              [](RunConfig& c, const std::string& v) {
                  c.fed.strategy.weighting = parse_weighting(v);
              }},
        Field{"strategy.literal_signs",
              [](const RunConfig& c) { return format_value(c.fed.strategy.literal_signs); },
              [](RunConfig& c, const std::string& v) {
                  c.fed.strategy.literal_signs = parse_bool("strategy.literal_signs", v);
              }},
        NUM_FIELD("trainer.steps", fed.trainer.local_steps, int),
        NUM_FIELD("trainer.lr", fed.trainer.learning_rate, double),
        NUM_FIELD("trainer.batch", fed.trainer.batch_size, int),
        NUM_FIELD("model.patch", fed.trainer.shape.patch, int),
        NUM_FIELD("model.hidden", fed.trainer.shape.hidden, int),
        NUM_FIELD("model.latent", fed.trainer.shape.latent, int),
        Field{"model.height",
              [](const RunConfig& c) { return std::to_string(c.fed.trainer.shape.height); },
              [](RunConfig& c, const std::string& v) {
                  c.fed.trainer.shape.height = parse_number<int>("model.height", v);
                  c.fed.synth.height = c.fed.trainer.shape.height;
              }},
        Field{"model.width",
              [](const RunConfig& c) { return std::to_string(c.fed.trainer.shape.width); },
              [](RunConfig& c, const std::string& v) {
                  c.fed.trainer.shape.width = parse_number<int>("model.width", v);
                  c.fed.synth.width = c.fed.trainer.shape.width;
              }},
        NUM_FIELD("model.mask_ratio", fed.trainer.mask_ratio, double),
        NUM_FIELD("model.init_scale", fed.init_scale, double),
        Field{"split.kind", [](const RunConfig& c) { return split_name(c.fed.split); },
              [](RunConfig& c, const std::string& v) { c.fed.split = parse_split(v); }},
        NUM_FIELD("split.per_client", fed.split_per_client, std::size_t),
        NUM_FIELD("split.server", fed.split_server, std::size_t),
        Field{"split.manifest", [](const RunConfig& c) { return c.fed.manifest_path; },
              [](RunConfig& c, const std::string& v) { c.fed.manifest_path = v; }},
        NUM_FIELD("synth.classes", fed.synth.classes, int),
        NUM_FIELD("synth.per_class", fed.synth.per_class, int),
        NUM_FIELD("synth.cell", fed.synth.cell, int),
        NUM_FIELD("synth.template_amp", fed.synth.template_amp, double),
        NUM_FIELD("synth.noise_sigma", fed.synth.noise_sigma, double),
        NUM_FIELD("synth.domain_shift", fed.synth.domain_shift, double),
        NUM_FIELD("synth.domain_contrast", fed.synth.domain_contrast, double),
        NUM_FIELD("synth.pattern_mix", fed.synth.pattern_mix, double),
        Field{"probe.classifier",
              [](const RunConfig& c) { return classifier_name(c.probe.classifier); },
              [](RunConfig& c, const std::string& v) { c.probe.classifier = parse_classifier(v); }},
        NUM_FIELD("probe.lr", probe.lr, double),
        NUM_FIELD("probe.epochs", probe.epochs, int),
        NUM_FIELD("probe.batch", probe.batch, int),
        NUM_FIELD("probe.hidden", probe.hidden, int),
        NUM_FIELD("sweep.every", sweep_every, std::uint64_t),
        NUM_FIELD("fault.drop_prob", fed.fault.drop_prob, double),
        NUM_FIELD("fault.corrupt_prob", fed.fault.corrupt_prob, double),
    };
    return table;
}

#undef NUM_FIELD

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size())
        throw CheckpointFormatError("checkpoint truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void put_doubles(std::vector<std::uint8_t>& out, const std::vector<double>& xs) {
    for (double x : xs) put(out, x);
}

std::vector<double> get_doubles(const std::vector<std::uint8_t>& in, std::size_t& pos,
                                std::uint64_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = get<double>(in, pos);
    return xs;
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.fed.master_seed = 1;
    c.fed.synth.seed = 1;
    c.fed.trainer.seed = 1;
    return c;
}

RunConfig load_config(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        if (!kv.emplace(key, value).second)
            throw ConfigError("config: duplicate key " + key);
    }
    for (const auto& [key, value] : kv) {
        (void)value;
        bool known = false;
        for (const auto& f : fields())
            if (key == f.key) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("config: unknown key " + key);
    }

    RunConfig c = default_run_config();
    // strategy.kind decides the server_lr default, so resolve it first.
    if (auto it = kv.find("strategy.kind"); it != kv.end())
        c.fed.strategy.kind = parse_strategy(it->second);
    c.fed.strategy.server_lr = default_server_lr(c.fed.strategy.kind);
    for (const auto& f : fields())
        if (auto it = kv.find(f.key); it != kv.end()) f.set(c, it->second);
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config: " + path);
    return load_config(in);
}

void save_config(const RunConfig& c, std::ostream& os) {
    for (const auto& f : fields()) os << f.key << " = " << f.get(c) << '\n';
}

void save_config_file(const RunConfig& c, const std::string& path) {
    std::ostringstream body;
    save_config(c, body);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NotFoundError("cannot write config: " + tmp);
        out << body.str();
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> checkpoint_bytes(const Checkpoint& c) {
    const std::uint64_t len = c.theta.values.size();
    if (len == 0) throw CheckpointFormatError("checkpoint: empty model");
    if (c.state.momentum_buf.values.size() != len ||
        c.state.first_moment.values.size() != len ||
        c.state.second_moment.values.size() != len)
        throw CheckpointFormatError("checkpoint: optimizer state length mismatch");
    if (c.shape.param_count() != len)
        throw CheckpointFormatError("checkpoint: shape does not match model length");

    std::vector<std::uint8_t> out;
    out.reserve(64 + 4 * len * sizeof(double));
    for (char ch : kMagic) out.push_back(static_cast<std::uint8_t>(ch));
    put(out, kCheckpointVersion);
    put(out, static_cast<std::int32_t>(c.shape.patch));
    put(out, static_cast<std::int32_t>(c.shape.hidden));
    put(out, static_cast<std::int32_t>(c.shape.latent));
    put(out, static_cast<std::int32_t>(c.shape.height));
    put(out, static_cast<std::int32_t>(c.shape.width));
    put(out, c.round);
    put(out, c.master_seed);
    put(out, len);
    put_doubles(out, c.theta.values);
    put_doubles(out, c.state.momentum_buf.values);
    put_doubles(out, c.state.first_moment.values);
    put_doubles(out, c.state.second_moment.values);
    put(out, fnv1a64(out.data(), out.size()));
    return out;
}

Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kMagic)) throw CheckpointFormatError("checkpoint too short");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointFormatError("checkpoint: bad magic bytes");
    std::size_t pos = sizeof(kMagic);
    const auto version = get<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                     ", expected " + std::to_string(kCheckpointVersion));
    Checkpoint c;
    c.shape.patch = get<std::int32_t>(bytes, pos);
    c.shape.hidden = get<std::int32_t>(bytes, pos);
    c.shape.latent = get<std::int32_t>(bytes, pos);
    c.shape.height = get<std::int32_t>(bytes, pos);
    c.shape.width = get<std::int32_t>(bytes, pos);
    c.round = get<std::uint64_t>(bytes, pos);
    c.master_seed = get<std::uint64_t>(bytes, pos);
    const auto len = get<std::uint64_t>(bytes, pos);
    // Divide instead of multiplying so a corrupted length cannot overflow.
    const std::uint64_t room = bytes.size() - pos;
    if (room < sizeof(std::uint64_t) ||
        len != (room - sizeof(std::uint64_t)) / (4 * sizeof(double)) ||
        room != 4 * len * sizeof(double) + sizeof(std::uint64_t))
        throw CheckpointFormatError("checkpoint size mismatch: truncated or trailing bytes");
    const std::uint64_t stored =
        fnv1a64(bytes.data(), bytes.size() - sizeof(std::uint64_t));
    std::uint64_t claimed;
    std::memcpy(&claimed, bytes.data() + bytes.size() - sizeof(std::uint64_t),
                sizeof(std::uint64_t));
    if (stored != claimed) throw CheckpointChecksumError("checkpoint checksum mismatch");

    c.theta.values = get_doubles(bytes, pos, len);
    c.state.round = c.round;
    c.state.momentum_buf.values = get_doubles(bytes, pos, len);
    c.state.first_moment.values = get_doubles(bytes, pos, len);
    c.state.second_moment.values = get_doubles(bytes, pos, len);
    try {
        c.shape.validate();
    } catch (const ConfigError& e) {
        throw CheckpointFormatError(std::string("checkpoint: bad shape header: ") + e.what());
    }
    if (c.shape.param_count() != len)
        throw CheckpointFormatError("checkpoint: shape does not match payload length");
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    const std::vector<std::uint8_t> bytes = checkpoint_bytes(c);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NotFoundError("cannot write checkpoint: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw NotFoundError("short write to checkpoint: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

}  // namespace fedmae
