#include <gransim/cluster/ClusterConfig.h>
#include <gransim/util/Errors.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace gransim::cluster {

namespace {

std::string trim(std::string_view s)
{
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template<typename T>
T parseNumber(const std::string& key, const std::string& value)
{
    T out{};
    auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("bad value '" + value + "' for " + key);
    }
    return out;
}

}

void ClusterConfig::validate() const
{
    if (nodeCount < 1) {
        throw ConfigError("node_count must be at least 1");
    }
    if (coresPerNode < 1) {
        throw ConfigError("cores_per_node must be at least 1");
    }
    if (placementPolicy != "binpack-locality" &&
        placementPolicy != "load-balance") {
        throw ConfigError("unknown placement policy '" + placementPolicy + "'");
    }
}

ClusterConfig parseClusterConfig(std::string_view text, ClusterConfig base)
{
    std::istringstream in{ std::string(text) };
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        lineNo++;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        if (trim(line).empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineNo) +
                              ": expected key=value");
        }
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));

        if (key == "node_count") {
            base.nodeCount = parseNumber<int>(key, value);
        } else if (key == "cores_per_node") {
            base.coresPerNode = parseNumber<int>(key, value);
        } else if (key == "intra_node_latency") {
            base.intraNodeLatency = parseNumber<Tick>(key, value);
        } else if (key == "cross_node_latency") {
            base.crossNodeLatency = parseNumber<Tick>(key, value);
        } else if (key == "snapshot_transfer_cost") {
            base.snapshotTransferCost = parseNumber<Tick>(key, value);
        } else if (key == "rng_seed") {
            base.rngSeed = parseNumber<uint64_t>(key, value);
        } else if (key == "placement_policy") {
            base.placementPolicy = value;
        } else {
            throw ConfigError("line " + std::to_string(lineNo) +
                              ": unknown key '" + key + "'");
        }
    }
    base.validate();
    return base;
}

ClusterConfig loadClusterConfig(const std::string& path, ClusterConfig base)
{
    std::ifstream f(path);
    if (!f) {
        throw IOError("cannot open config '" + path + "'");
    }
    std::stringstream buf;
    buf << f.rdbuf();
    return parseClusterConfig(buf.str(), base);
}

}
