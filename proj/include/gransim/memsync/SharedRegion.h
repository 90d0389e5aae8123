#pragma once

#include <gransim/guest/Granule.h>
#include <gransim/snapshot/Snapshot.h>

#include <map>
#include <vector>

namespace gransim::memsync {

using guest::AppId;
using guest::NodeId;

// One node's view of the shared address space
struct NodeReplica
{
    // The buffer this node's thread granules map
    guest::MemoryView working;
    // The node's copy of the main snapshot as of its last sync
    Bytes base;
};

// Shared address space of one parallel section. The main snapshot lives on
// mainNode; every node running thread granules holds a replica.
class SharedRegion
{
  public:
    SharedRegion(AppId app, NodeId mainNode, snapshot::Snapshot main);

    AppId appId() const { return app; }
    NodeId mainNode() const { return mainNodeId; }

    snapshot::Snapshot& mainSnapshot() { return main; }
    const snapshot::Snapshot& mainSnapshot() const { return main; }

    // Replica built from the main snapshot's current memory
    NodeReplica& addReplica(NodeId node);
    // Replica whose working buffer is an existing view (the parent's memory
    // on the main node)
    NodeReplica& adoptReplica(NodeId node, guest::MemoryView working);
    void dropReplica(NodeId node);

    bool hasReplica(NodeId node) const { return replicas.contains(node); }
    NodeReplica& replica(NodeId node);
    const NodeReplica& replica(NodeId node) const;
    std::vector<NodeId> replicaNodes() const;

    // Overlap with an existing region throws ConfigError; re-registering an
    // identical region is a no-op
    void registerReduce(const snapshot::MergeRegion& region);
    const std::vector<snapshot::MergeRegion>& mergeRegions() const
    {
        return regions;
    }

    // Diffs of the node's working memory against its base over the dirty
    // pages. The base then absorbs them so the next interval starts clean.
    std::vector<snapshot::ByteDiff> collectDiffs(
      NodeId node,
      const snapshot::DirtyTracker& tracker);

    std::vector<snapshot::ByteRange> applyToMain(
      const std::vector<snapshot::ByteDiff>& diffs);

    std::vector<snapshot::ByteDiff> drainBroadcast();

    // Brings a replica (base and working) up to date with broadcast diffs
    void applyBroadcast(NodeId node,
                        const std::vector<snapshot::ByteDiff>& diffs);

    // Copies main-snapshot bytes of the given ranges into a replica
    void pullRanges(NodeId node, const std::vector<snapshot::ByteRange>& ranges);

    // Every replica's base and working buffer equal the main snapshot
    bool coherent() const;

    int activeChildren = 0;

  private:
    AppId app;
    NodeId mainNodeId;
    snapshot::Snapshot main;
    std::map<NodeId, NodeReplica> replicas;
    std::vector<snapshot::MergeRegion> regions;
};

struct BarrierStats
{
    size_t diffsExchanged = 0;
    size_t broadcastDiffs = 0;
};

// The whole barrier protocol in one step: every replica node ships its diffs
// (ascending node id) to the main snapshot, the main snapshot drains its
// updated ranges back to every replica, and all members are unblocked with
// clean trackers. Members must all be BlockedBarrier and use thread
// semantics.
BarrierStats barrierSync(SharedRegion& region,
                         const std::vector<guest::Granule*>& members);

// Union of the dirty trackers of the given granules on one node
snapshot::DirtyTracker nodeTracker(const std::vector<guest::Granule*>& members,
                                   NodeId node,
                                   size_t pageCount);

}
