#include <gransim/guest/Granule.h>
#include <gransim/scheduler/Scheduler.h>

#include <array>

namespace gransim::guest {

std::string_view toString(GranuleStatus status)
{
    static constexpr std::array<std::string_view, 8> names = {
        "Runnable",       "AtControlPoint", "BlockedRecv", "BlockedBarrier",
        "BlockedMutex",   "BlockedLatch",   "Migrating",   "Finished",
    };
    return names.at(static_cast<size_t>(status));
}

void Granule::setStatus(GranuleStatus next)
{
    if (status == GranuleStatus::Finished && next != GranuleStatus::Finished) {
        throw ContractViolation("granule " + std::to_string(id) +
                                " cannot leave Finished");
    }
    status = next;
}

snapshot::Snapshot takeSnapshot(const Granule& granule)
{
    if (granule.status == GranuleStatus::Runnable) {
        throw ContractViolation("snapshot of granule " +
                                std::to_string(granule.id) +
                                " while it is running");
    }
    return snapshot::Snapshot(granule.mem(), granule.globals, granule.regs);
}

Granule instantiate(const snapshot::Snapshot& snap,
                    Semantics semantics,
                    NodeId node,
                    MemoryView memory)
{
    Granule g;
    g.semantics = semantics;
    g.node = node;
    g.memory = std::move(memory);
    g.regs = snap.execRegs();
    g.globals = snap.globals();
    g.globals.resize(GLOBAL_COUNT, 0);
    g.tracker = snapshot::DirtyTracker(snap.pageCount());
    g.status = GranuleStatus::Runnable;
    return g;
}

Granule restore(const snapshot::Snapshot& snap,
                Semantics semantics,
                scheduler::NodeResources& node,
                ThreadMemoryTable& threadMemories,
                AppId appId,
                GranuleId granuleId)
{
    if (node.freeCores() < 1) {
        throw PlacementError("node " + std::to_string(node.nodeId()) +
                             " has no free core");
    }

    MemoryView memory;
    auto source = snap.memory();
    if (semantics == Semantics::Thread) {
        auto& shared = threadMemories[{ appId, node.nodeId() }];
        if (!shared) {
            shared = std::make_shared<Bytes>(source.begin(), source.end());
        }
        memory = shared;
    } else {
        memory = std::make_shared<Bytes>(source.begin(), source.end());
    }

    node.reserve(1, appId);
    Granule g = instantiate(snap, semantics, node.nodeId(), std::move(memory));
    g.id = granuleId;
    g.appId = appId;
    return g;
}

}
