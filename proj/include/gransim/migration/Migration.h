#pragma once

#include <gransim/cluster/ClusterConfig.h>
#include <gransim/guest/Granule.h>

#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace gransim::migration {

using guest::AppId;
using guest::GranuleId;
using guest::NodeId;

struct Move
{
    GranuleId granule = 0;
    NodeId src = 0;
    NodeId dst = 0;

    bool operator==(const Move&) const = default;
};

struct MigrationDecision
{
    AppId app = 0;
    std::vector<Move> moves;
    uint64_t epoch = 0;

    bool empty() const { return moves.empty(); }

    // Throws ContractViolation if a granule repeats or dst == src
    void validate() const;
};

struct GranuleLocation
{
    GranuleId granule = 0;
    int groupIndex = 0;
    NodeId node = 0;
    guest::Semantics semantics = guest::Semantics::Process;
};

// What a policy gets to look at when the app sits at a barrier
struct PlacementView
{
    AppId app = 0;
    std::vector<GranuleLocation> granules;
    std::map<NodeId, int> freeCores;
    // Number of barrier-type checks this app has gone through, starting at 0
    uint64_t checkIndex = 0;
};

class MigrationPolicy
{
  public:
    virtual ~MigrationPolicy() = default;
    virtual std::vector<Move> plan(const PlacementView& view) = 0;
};

// Empties the app's least populated nodes into other nodes that already host
// it, as long as the receiving node has enough free cores for all of them
class ConsolidationPolicy : public MigrationPolicy
{
  public:
    std::vector<Move> plan(const PlacementView& view) override;
};

// Delegates to a callback, used for forced migrations
class ScriptedPolicy : public MigrationPolicy
{
  public:
    using Script = std::function<std::vector<Move>(const PlacementView&)>;

    explicit ScriptedPolicy(Script script);
    std::vector<Move> plan(const PlacementView& view) override;

  private:
    Script script;
};

// Hands out decisions with increasing epochs and refuses to commit the same
// epoch twice or an epoch older than the latest issued one
class MigrationPlanner
{
  public:
    MigrationDecision planMigrations(MigrationPolicy& policy,
                                     const PlacementView& view);

    bool isCurrent(const MigrationDecision& decision) const;

    // Throws ProtocolError for a stale or already committed decision
    void markCommitted(const MigrationDecision& decision);

    uint64_t latestEpoch() const { return issued; }

  private:
    uint64_t issued = 0;
    uint64_t committed = 0;
};

// Thread granules move only with every co-located sibling of the app, all to
// the same destination
bool respectsThreadGrouping(const MigrationDecision& decision,
                            const PlacementView& view);

// Reserves one core per move on its destination. On the first failure every
// reservation already taken is released and false is returned.
bool reserveAll(const MigrationDecision& decision,
                const std::function<bool(NodeId)>& tryReserve,
                const std::function<void(NodeId)>& release);

// Time to ship a snapshot of the given size between two nodes
cluster::Tick transferDelay(const cluster::ClusterConfig& config,
                            size_t pages);

}
