#include "fedmae/partition.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

// Sizes of `parts` near-equal shares of `total`, remainder to the lowest
// indices.
std::vector<std::size_t> even_shares(std::size_t total, std::size_t parts) {
    std::vector<std::size_t> out(parts, total / parts);
    for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
    return out;
}

}  // namespace

void SplitAssignment::check(const DatasetPool& a, const DatasetPool& b) const {
    std::unordered_set<SampleId> seen;
    std::size_t assigned = 0;
    auto take = [&](const std::vector<SampleId>& ids) {
        for (SampleId id : ids) {
            if (!seen.insert(id).second)
                throw ConfigError("split: sample id assigned twice");
            ++assigned;
        }
    };
    for (const auto& c : clients) take(c);
    take(server);
    take(leftover);
    if (server.empty()) throw ConfigError("split: server shard is empty");
    if (assigned != a.ids.size() + b.ids.size())
        throw ConfigError("split: assignment does not cover the pools");
    for (SampleId id : a.ids)
        if (!seen.count(id)) throw ConfigError("split: pool-A id missing from assignment");
    for (SampleId id : b.ids)
        if (!seen.count(id)) throw ConfigError("split: pool-B id missing from assignment");
}

SplitAssignment homogeneous_split(const DatasetPool& a, const DatasetPool& b,
                                  std::size_t per_client, std::size_t server, SeededRng rng) {
    const std::size_t total = a.ids.size() + b.ids.size();
    if (per_client == 0 || server == 0)
        throw std::invalid_argument("homogeneous_split: per_client and server must be positive");
    if (5 * per_client + server > total)
        throw std::invalid_argument("homogeneous_split: pools too small for requested counts");

    std::vector<SampleId> all;
    all.reserve(total);
    all.insert(all.end(), a.ids.begin(), a.ids.end());
    all.insert(all.end(), b.ids.begin(), b.ids.end());
    rng.shuffle(all);

    SplitAssignment sa;
    sa.clients.resize(5);
    std::size_t pos = 0;
    for (int c = 0; c < 5; ++c) {
        sa.clients[c].assign(all.begin() + pos, all.begin() + pos + per_client);
        pos += per_client;
    }
    sa.server.assign(all.begin() + pos, all.begin() + pos + server);
    pos += server;
    sa.leftover.assign(all.begin() + pos, all.end());
    return sa;
}

SplitAssignment heterogeneous_split(const DatasetPool& a, const DatasetPool& b,
                                    std::size_t server, SeededRng rng) {
    if (server == 0 || a.ids.size() <= server)
        throw std::invalid_argument("heterogeneous_split: need |A| > server > 0");
    if (b.ids.size() < 2)
        throw std::invalid_argument("heterogeneous_split: need |B| >= 2");

    std::vector<SampleId> as = a.ids;
    std::vector<SampleId> bs = b.ids;
    rng.shuffle(bs);
    rng.shuffle(as);

    SplitAssignment sa;
    sa.clients.resize(5);
    const auto b_shares = even_shares(bs.size(), 2);
    std::size_t pos = 0;
    for (int c = 0; c < 2; ++c) {
        sa.clients[3 + c].assign(bs.begin() + pos, bs.begin() + pos + b_shares[c]);
        pos += b_shares[c];
    }
    sa.server.assign(as.begin(), as.begin() + server);
    const auto a_shares = even_shares(as.size() - server, 3);
    pos = server;
    for (int c = 0; c < 3; ++c) {
        sa.clients[c].assign(as.begin() + pos, as.begin() + pos + a_shares[c]);
        pos += a_shares[c];
    }
    return sa;
}

void write_manifest(const SplitAssignment& sa, std::ostream& os) {
    auto line = [&](const std::string& name, const std::vector<SampleId>& ids) {
        os << name << ":";
        for (SampleId id : ids) os << ' ' << id;
        os << '\n';
    };
    for (std::size_t c = 0; c < sa.clients.size(); ++c)
        line("client" + std::to_string(c + 1), sa.clients[c]);
    line("server", sa.server);
    line("leftover", sa.leftover);
}

SplitAssignment read_manifest(std::istream& is) {
    SplitAssignment sa;
    sa.clients.resize(5);
    std::string linebuf;
    bool saw_server = false;
    while (std::getline(is, linebuf)) {
        if (linebuf.empty() || linebuf[0] == '#') continue;
        const auto colon = linebuf.find(':');
        if (colon == std::string::npos)
            throw ConfigError("manifest: missing ':' in line: " + linebuf);
        const std::string name = linebuf.substr(0, colon);
        std::vector<SampleId>* target = nullptr;
        if (name.rfind("client", 0) == 0) {
            const int idx = std::stoi(name.substr(6));
            if (idx < 1 || idx > 5) throw ConfigError("manifest: bad client index: " + name);
            target = &sa.clients[idx - 1];
        } else if (name == "server") {
            target = &sa.server;
            saw_server = true;
        } else if (name == "leftover") {
            target = &sa.leftover;
        } else {
            throw ConfigError("manifest: unknown node name: " + name);
        }
        std::istringstream ids(linebuf.substr(colon + 1));
        std::uint64_t id;
        while (ids >> id) target->push_back(static_cast<SampleId>(id));
        if (!ids.eof()) throw ConfigError("manifest: non-numeric id in line: " + linebuf);
    }
    if (!saw_server) throw ConfigError("manifest: no server line");
    return sa;
}

}  // namespace fedmae
