#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gransim::cluster {

using Tick = uint64_t;

struct ClusterConfig
{
    int nodeCount = 1;
    int coresPerNode = 8;
    Tick intraNodeLatency = 1;
    Tick crossNodeLatency = 10;
    // Ticks per 4 KiB page moved between nodes
    Tick snapshotTransferCost = 1;
    uint64_t rngSeed = 0;
    std::string placementPolicy = "binpack-locality";

    void validate() const;
};

// key=value lines, '#' comments. Unknown keys are rejected.
ClusterConfig parseClusterConfig(std::string_view text,
                                 ClusterConfig base = {});
ClusterConfig loadClusterConfig(const std::string& path,
                                ClusterConfig base = {});

}
