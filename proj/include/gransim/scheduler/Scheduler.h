#pragma once

#include <gransim/util/Errors.h>

#include <cstdint>
#include <map>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

namespace gransim::scheduler {

using NodeId = int;
using AppId = uint64_t;

class NodeResources
{
  public:
    NodeResources(NodeId id, int coresTotal);

    NodeId nodeId() const { return id; }
    int coresTotal() const { return total; }
    int coresUsed() const { return used; }
    int freeCores() const { return total - used; }

    // Throws ReservationError if the node would be oversubscribed
    void reserve(int k, AppId app);
    // Throws ReservationError if more is released than is held by app
    void release(int k, AppId app);

    bool hostsApp(AppId app) const { return appCores.contains(app); }
    int coresFor(AppId app) const;
    std::set<AppId> appsHosted() const;

    // True the first time (app, version) is seen on this node, recording it
    bool cacheSnapshot(AppId app, uint64_t version);
    bool hasSnapshot(AppId app, uint64_t version) const;

  private:
    NodeId id;
    int total;
    int used = 0;
    std::map<AppId, int> appCores;
    std::set<std::pair<AppId, uint64_t>> snapshotsCached;
};

struct NodeCount
{
    NodeId node;
    int count;

    bool operator==(const NodeCount&) const = default;
};

enum class PlacementPolicy : uint8_t
{
    BinPackLocality,
    LoadBalance,
};

PlacementPolicy parsePolicy(std::string_view text);

class Scheduler
{
  public:
    Scheduler(int nodeCount,
              int coresPerNode,
              PlacementPolicy policy = PlacementPolicy::BinPackLocality);

    // Decides where n granules of app go when requested from origin, without
    // claiming anything. Throws PlacementError when the cluster lacks n free
    // cores.
    std::vector<NodeCount> place(AppId app, NodeId origin, int n) const;

    // place() followed by reserve() on every chosen node
    std::vector<NodeCount> placeAndReserve(AppId app, NodeId origin, int n);

    void reserve(NodeId node, int k, AppId app);
    void release(NodeId node, int k, AppId app);

    // Counts a snapshot transfer unless node already caches (app, version)
    bool transferSnapshot(NodeId node, AppId app, uint64_t version);
    uint64_t snapshotTransfers() const { return transfers; }

    int nodeCount() const { return static_cast<int>(nodes.size()); }
    int totalCores() const;
    int totalFree() const;
    int totalUsed() const { return totalCores() - totalFree(); }

    NodeResources& node(NodeId id);
    const NodeResources& node(NodeId id) const;
    const std::vector<NodeResources>& allNodes() const { return nodes; }

    PlacementPolicy policy() const { return placementPolicy; }

    // Node with the most free cores, ties to the lowest id
    NodeId mostAvailable() const;

  private:
    std::vector<NodeResources> nodes;
    PlacementPolicy placementPolicy;
    uint64_t transfers = 0;
};

}
