#include <gransim/memsync/SharedRegion.h>
#include <gransim/util/Errors.h>

#include <algorithm>

namespace gransim::memsync {

using snapshot::ByteDiff;
using snapshot::ByteRange;
using snapshot::DirtyTracker;

SharedRegion::SharedRegion(AppId app, NodeId mainNode, snapshot::Snapshot main)
  : app(app)
  , mainNodeId(mainNode)
  , main(std::move(main))
{}

NodeReplica& SharedRegion::addReplica(NodeId node)
{
    auto mem = main.memory();
    NodeReplica r;
    r.working = std::make_shared<Bytes>(mem.begin(), mem.end());
    r.base.assign(mem.begin(), mem.end());
    return replicas[node] = std::move(r);
}

NodeReplica& SharedRegion::adoptReplica(NodeId node, guest::MemoryView working)
{
    auto mem = main.memory();
    if (working->size() != mem.size()) {
        throw ContractViolation("adopted memory does not match main snapshot");
    }
    NodeReplica r;
    r.working = std::move(working);
    r.base.assign(mem.begin(), mem.end());
    return replicas[node] = std::move(r);
}

void SharedRegion::dropReplica(NodeId node)
{
    replicas.erase(node);
}

NodeReplica& SharedRegion::replica(NodeId node)
{
    auto it = replicas.find(node);
    if (it == replicas.end()) {
        throw ProtocolError("no replica on node " + std::to_string(node));
    }
    return it->second;
}

const NodeReplica& SharedRegion::replica(NodeId node) const
{
    auto it = replicas.find(node);
    if (it == replicas.end()) {
        throw ProtocolError("no replica on node " + std::to_string(node));
    }
    return it->second;
}

std::vector<NodeId> SharedRegion::replicaNodes() const
{
    std::vector<NodeId> out;
    for (const auto& [node, r] : replicas) {
        out.push_back(node);
    }
    return out;
}

void SharedRegion::registerReduce(const snapshot::MergeRegion& region)
{
    if (std::find(regions.begin(), regions.end(), region) != regions.end()) {
        return;
    }
    auto candidate = regions;
    candidate.push_back(region);
    snapshot::validateMergeRegions(candidate, main.size());
    regions = std::move(candidate);
}

std::vector<ByteDiff> SharedRegion::collectDiffs(NodeId node,
                                                 const DirtyTracker& tracker)
{
    auto& r = replica(node);
    auto diffs = snapshot::computeDiffs(*r.working, tracker, r.base, regions);
    for (const auto& d : diffs) {
        std::copy(r.working->begin() + d.offset,
                  r.working->begin() + d.offset + d.payload.size(),
                  r.base.begin() + d.offset);
    }
    return diffs;
}

std::vector<ByteRange> SharedRegion::applyToMain(
  const std::vector<ByteDiff>& diffs)
{
    return main.applyDiffs(diffs);
}

std::vector<ByteDiff> SharedRegion::drainBroadcast()
{
    return main.drainBroadcastDiffs();
}

void SharedRegion::applyBroadcast(NodeId node, const std::vector<ByteDiff>& diffs)
{
    auto& r = replica(node);
    snapshot::applyDiffsTo(r.base, diffs);
    snapshot::applyDiffsTo(*r.working, diffs);
}

void SharedRegion::pullRanges(NodeId node, const std::vector<ByteRange>& ranges)
{
    auto& r = replica(node);
    auto mem = main.memory();
    for (const auto& range : ranges) {
        if (range.end() > mem.size()) {
            throw ProtocolError("pull outside snapshot");
        }
        std::copy(mem.begin() + range.offset,
                  mem.begin() + range.end(),
                  r.working->begin() + range.offset);
        std::copy(mem.begin() + range.offset,
                  mem.begin() + range.end(),
                  r.base.begin() + range.offset);
    }
}

bool SharedRegion::coherent() const
{
    auto mem = main.memory();
    for (const auto& [node, r] : replicas) {
        if (!std::equal(mem.begin(), mem.end(), r.base.begin(), r.base.end()) ||
            !std::equal(
              mem.begin(), mem.end(), r.working->begin(), r.working->end())) {
            return false;
        }
    }
    return true;
}

DirtyTracker nodeTracker(const std::vector<guest::Granule*>& members,
                         NodeId node,
                         size_t pageCount)
{
    DirtyTracker t(pageCount);
    for (const auto* g : members) {
        if (g->node == node) {
            t.merge(g->tracker);
        }
    }
    return t;
}

BarrierStats barrierSync(SharedRegion& region,
                         const std::vector<guest::Granule*>& members)
{
    for (const auto* g : members) {
        if (g->status != guest::GranuleStatus::BlockedBarrier) {
            throw ContractViolation("granule " + std::to_string(g->id) +
                                    " has not reached the barrier");
        }
        if (g->semantics != guest::Semantics::Thread) {
            throw ContractViolation("barrier sync on a process granule");
        }
    }

    BarrierStats stats;
    size_t pages = region.mainSnapshot().pageCount();

    // Each node ships the diffs of all its granules in one batch
    std::vector<ByteDiff> all;
    for (NodeId node : region.replicaNodes()) {
        auto diffs = region.collectDiffs(node, nodeTracker(members, node, pages));
        stats.diffsExchanged += diffs.size();
        all.insert(all.end(), diffs.begin(), diffs.end());
    }
    region.applyToMain(all);

    auto broadcast = region.drainBroadcast();
    stats.broadcastDiffs = broadcast.size();
    for (NodeId node : region.replicaNodes()) {
        region.applyBroadcast(node, broadcast);
    }

    for (auto* g : members) {
        g->tracker.reset();
        g->setStatus(guest::GranuleStatus::Runnable);
    }
    return stats;
}

}
