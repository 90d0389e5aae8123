#pragma once

#include <gransim/guest/Program.h>
#include <gransim/snapshot/Snapshot.h>

#include <map>
#include <memory>
#include <string_view>

namespace gransim::scheduler {
class NodeResources;
}

namespace gransim::guest {

using GranuleId = uint64_t;
using AppId = uint64_t;
using NodeId = int;

// Thread granules on one node point at the same buffer, process granules own
// theirs
using MemoryView = std::shared_ptr<Bytes>;

enum class Semantics : uint8_t
{
    Thread,
    Process,
};

enum class GranuleStatus : uint8_t
{
    Runnable,
    AtControlPoint,
    BlockedRecv,
    BlockedBarrier,
    BlockedMutex,
    BlockedLatch,
    Migrating,
    Finished,
};

std::string_view toString(GranuleStatus status);

struct Granule
{
    GranuleId id = 0;
    AppId appId = 0;
    int groupIndex = 0;
    int groupSize = 1;
    Semantics semantics = Semantics::Process;
    NodeId node = 0;
    MemoryView memory;
    snapshot::ExecRegs regs;
    std::vector<int64_t> globals = std::vector<int64_t>(GLOBAL_COUNT, 0);
    GranuleStatus status = GranuleStatus::Runnable;
    snapshot::DirtyTracker tracker;
    bool failed = false;

    Bytes& mem() { return *memory; }
    const Bytes& mem() const { return *memory; }

    // Moves through the status machine, rejecting transitions out of
    // Finished
    void setStatus(GranuleStatus next);
};

// Per (app, node) shared buffer for thread-semantics granules
using ThreadMemoryTable = std::map<std::pair<AppId, NodeId>, MemoryView>;

// Deep copy of memory, globals and registers. The granule must be paused at a
// control point (or freshly created and not yet run).
snapshot::Snapshot takeSnapshot(const Granule& granule);

// Builds a granule from a snapshot without touching any core accounting.
// memory must already hold the bytes the granule should see.
Granule instantiate(const snapshot::Snapshot& snap,
                    Semantics semantics,
                    NodeId node,
                    MemoryView memory);

// Restores a granule onto node, claiming one core. Thread semantics share the
// (app, node) buffer in threadMemories, creating it from the snapshot on first
// use; process semantics always get a private copy.
Granule restore(const snapshot::Snapshot& snap,
                Semantics semantics,
                scheduler::NodeResources& node,
                ThreadMemoryTable& threadMemories,
                AppId appId,
                GranuleId granuleId);

}
