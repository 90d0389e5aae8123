#include <gransim/scheduler/Scheduler.h>

#include <algorithm>
#include <string>

namespace gransim::scheduler {

NodeResources::NodeResources(NodeId id, int coresTotal)
  : id(id)
  , total(coresTotal)
{
    if (coresTotal < 0) {
        throw ConfigError("negative core count");
    }
}

void NodeResources::reserve(int k, AppId app)
{
    if (k < 0 || used + k > total) {
        throw ReservationError("node " + std::to_string(id) + " cannot take " +
                               std::to_string(k) + " more core(s), " +
                               std::to_string(used) + "/" +
                               std::to_string(total) + " used");
    }
    if (k == 0) {
        return;
    }
    used += k;
    appCores[app] += k;
}

void NodeResources::release(int k, AppId app)
{
    auto it = appCores.find(app);
    int held = it == appCores.end() ? 0 : it->second;
    if (k < 0 || k > held) {
        throw ReservationError("node " + std::to_string(id) +
                               " cannot release " + std::to_string(k) +
                               " core(s) of app " + std::to_string(app) +
                               " holding " + std::to_string(held));
    }
    if (k == 0) {
        return;
    }
    used -= k;
    it->second -= k;
    if (it->second == 0) {
        appCores.erase(it);
    }
}

int NodeResources::coresFor(AppId app) const
{
    auto it = appCores.find(app);
    return it == appCores.end() ? 0 : it->second;
}

std::set<AppId> NodeResources::appsHosted() const
{
    std::set<AppId> out;
    for (const auto& [app, n] : appCores) {
        out.insert(app);
    }
    return out;
}

bool NodeResources::cacheSnapshot(AppId app, uint64_t version)
{
    return snapshotsCached.emplace(app, version).second;
}

bool NodeResources::hasSnapshot(AppId app, uint64_t version) const
{
    return snapshotsCached.contains({ app, version });
}

PlacementPolicy parsePolicy(std::string_view text)
{
    if (text == "binpack-locality") {
        return PlacementPolicy::BinPackLocality;
    }
    if (text == "load-balance") {
        return PlacementPolicy::LoadBalance;
    }
    throw ConfigError("unknown placement policy '" + std::string(text) + "'");
}

Scheduler::Scheduler(int nodeCount, int coresPerNode, PlacementPolicy policy)
  : placementPolicy(policy)
{
    if (nodeCount < 1) {
        throw ConfigError("cluster needs at least one node");
    }
    for (int i = 0; i < nodeCount; i++) {
        nodes.emplace_back(i, coresPerNode);
    }
}

std::vector<NodeCount> Scheduler::place(AppId app, NodeId origin, int n) const
{
    if (n < 1) {
        throw ConfigError("placement of fewer than one granule");
    }
    if (totalFree() < n) {
        throw PlacementError("requested " + std::to_string(n) +
                             " core(s), cluster has " +
                             std::to_string(totalFree()) + " free");
    }
    node(origin);

    std::vector<int> freeLeft;
    for (const auto& r : nodes) {
        freeLeft.push_back(r.freeCores());
    }
    std::map<NodeId, int> chosen;
    std::vector<NodeId> order;
    int remaining = n;
    auto take = [&](NodeId id, int k) {
        k = std::min(k, remaining);
        if (k <= 0) {
            return;
        }
        if (!chosen.contains(id)) {
            order.push_back(id);
        }
        chosen[id] += k;
        freeLeft[id] -= k;
        remaining -= k;
    };
    // Descending free cores, ties by id
    auto byFree = [&](std::vector<NodeId> ids) {
        std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
            return freeLeft[a] > freeLeft[b];
        });
        return ids;
    };

    if (placementPolicy == PlacementPolicy::LoadBalance) {
        while (remaining > 0) {
            std::vector<NodeId> all;
            for (const auto& r : nodes) {
                all.push_back(r.nodeId());
            }
            take(byFree(all).front(), 1);
        }
    } else {
        take(origin, freeLeft[origin]);

        std::vector<NodeId> hosting;
        for (const auto& r : nodes) {
            if (r.nodeId() != origin && r.hostsApp(app)) {
                hosting.push_back(r.nodeId());
            }
        }
        for (NodeId id : byFree(hosting)) {
            take(id, freeLeft[id]);
        }

        while (remaining > 0) {
            std::vector<NodeId> all;
            for (const auto& r : nodes) {
                all.push_back(r.nodeId());
            }
            NodeId best = byFree(all).front();
            take(best, freeLeft[best]);
        }
    }

    // In the order cores were handed out, so origin comes first
    std::vector<NodeCount> out;
    for (NodeId id : order) {
        out.push_back({ id, chosen[id] });
    }
    return out;
}

std::vector<NodeCount> Scheduler::placeAndReserve(AppId app,
                                                  NodeId origin,
                                                  int n)
{
    auto decision = place(app, origin, n);
    for (const auto& nc : decision) {
        reserve(nc.node, nc.count, app);
    }
    return decision;
}

void Scheduler::reserve(NodeId id, int k, AppId app)
{
    node(id).reserve(k, app);
}

void Scheduler::release(NodeId id, int k, AppId app)
{
    node(id).release(k, app);
}

bool Scheduler::transferSnapshot(NodeId id, AppId app, uint64_t version)
{
    bool fresh = node(id).cacheSnapshot(app, version);
    if (fresh) {
        transfers++;
    }
    return fresh;
}

int Scheduler::totalCores() const
{
    int total = 0;
    for (const auto& r : nodes) {
        total += r.coresTotal();
    }
    return total;
}

int Scheduler::totalFree() const
{
    int total = 0;
    for (const auto& r : nodes) {
        total += r.freeCores();
    }
    return total;
}

NodeResources& Scheduler::node(NodeId id)
{
    if (id < 0 || id >= nodeCount()) {
        throw ConfigError("unknown node " + std::to_string(id));
    }
    return nodes[id];
}

const NodeResources& Scheduler::node(NodeId id) const
{
    if (id < 0 || id >= nodeCount()) {
        throw ConfigError("unknown node " + std::to_string(id));
    }
    return nodes[id];
}

NodeId Scheduler::mostAvailable() const
{
    NodeId best = 0;
    for (const auto& r : nodes) {
        if (r.freeCores() > nodes[best].freeCores()) {
            best = r.nodeId();
        }
    }
    return best;
}

}
