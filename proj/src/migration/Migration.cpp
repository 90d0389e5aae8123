#include <gransim/migration/Migration.h>
#include <gransim/util/Errors.h>

#include <algorithm>
#include <optional>
#include <set>

namespace gransim::migration {

void MigrationDecision::validate() const
{
    std::set<GranuleId> seen;
    for (const auto& m : moves) {
        if (m.src == m.dst) {
            throw ContractViolation("move of granule " +
                                    std::to_string(m.granule) +
                                    " to its own node");
        }
        if (!seen.insert(m.granule).second) {
            throw ContractViolation("granule " + std::to_string(m.granule) +
                                    " moved twice in one decision");
        }
    }
}

std::vector<Move> ConsolidationPolicy::plan(const PlacementView& view)
{
    std::map<NodeId, std::vector<const GranuleLocation*>> byNode;
    for (const auto& g : view.granules) {
        byNode[g.node].push_back(&g);
    }
    auto freeCores = view.freeCores;

    std::vector<Move> moves;
    bool changed = true;
    while (changed && byNode.size() > 1) {
        changed = false;

        // Smallest population first, ties to the highest node id so that
        // granules drift towards low ids
        std::vector<NodeId> sources;
        for (const auto& [node, gs] : byNode) {
            sources.push_back(node);
        }
        std::sort(sources.begin(), sources.end(), [&](NodeId a, NodeId b) {
            if (byNode[a].size() != byNode[b].size()) {
                return byNode[a].size() < byNode[b].size();
            }
            return a > b;
        });

        for (NodeId src : sources) {
            int needed = static_cast<int>(byNode[src].size());
            std::optional<NodeId> best;
            for (const auto& [dst, gs] : byNode) {
                if (dst == src || freeCores[dst] < needed) {
                    continue;
                }
                if (!best || gs.size() > byNode[*best].size()) {
                    best = dst;
                }
            }
            if (!best) {
                continue;
            }
            for (const auto* g : byNode[src]) {
                byNode[*best].push_back(g);
            }
            freeCores[*best] -= needed;
            freeCores[src] += needed;
            byNode.erase(src);
            changed = true;
            break;
        }
    }
    // A granule can be carried along more than once; emit its net move
    std::map<GranuleId, NodeId> finalNode;
    for (const auto& [node, gs] : byNode) {
        for (const auto* g : gs) {
            finalNode[g->granule] = node;
        }
    }
    for (const auto& g : view.granules) {
        NodeId dst = finalNode.at(g.granule);
        if (dst != g.node) {
            moves.push_back({ g.granule, g.node, dst });
        }
    }
    return moves;
}

ScriptedPolicy::ScriptedPolicy(Script script)
  : script(std::move(script))
{}

std::vector<Move> ScriptedPolicy::plan(const PlacementView& view)
{
    return script(view);
}

MigrationDecision MigrationPlanner::planMigrations(MigrationPolicy& policy,
                                                   const PlacementView& view)
{
    MigrationDecision d;
    d.app = view.app;
    d.moves = policy.plan(view);
    d.epoch = ++issued;
    d.validate();
    return d;
}

bool MigrationPlanner::isCurrent(const MigrationDecision& decision) const
{
    return decision.epoch == issued && decision.epoch > committed;
}

void MigrationPlanner::markCommitted(const MigrationDecision& decision)
{
    if (!isCurrent(decision)) {
        throw ProtocolError("stale migration decision, epoch " +
                            std::to_string(decision.epoch));
    }
    committed = decision.epoch;
}

bool respectsThreadGrouping(const MigrationDecision& decision,
                            const PlacementView& view)
{
    std::map<GranuleId, NodeId> dstOf;
    for (const auto& m : decision.moves) {
        dstOf[m.granule] = m.dst;
    }
    // For each source node with a moving thread granule, every thread
    // granule there must move, and to the same place
    std::map<NodeId, std::set<std::optional<NodeId>>> outcomes;
    for (const auto& g : view.granules) {
        if (g.semantics != guest::Semantics::Thread) {
            continue;
        }
        auto it = dstOf.find(g.granule);
        outcomes[g.node].insert(it == dstOf.end()
                                  ? std::nullopt
                                  : std::optional<NodeId>(it->second));
    }
    for (const auto& [node, dsts] : outcomes) {
        if (dsts.size() > 1) {
            return false;
        }
    }
    return true;
}

bool reserveAll(const MigrationDecision& decision,
                const std::function<bool(NodeId)>& tryReserve,
                const std::function<void(NodeId)>& release)
{
    std::vector<NodeId> taken;
    for (const auto& m : decision.moves) {
        if (!tryReserve(m.dst)) {
            for (NodeId n : taken) {
                release(n);
            }
            return false;
        }
        taken.push_back(m.dst);
    }
    return true;
}

cluster::Tick transferDelay(const cluster::ClusterConfig& config,
                            size_t pages)
{
    return config.crossNodeLatency + config.snapshotTransferCost * pages;
}

}
