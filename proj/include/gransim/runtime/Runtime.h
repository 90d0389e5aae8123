#pragma once

#include <gransim/cluster/ClusterConfig.h>
#include <gransim/cluster/EventQueue.h>
#include <gransim/cluster/Transport.h>
#include <gransim/guest/Program.h>
#include <gransim/migration/Migration.h>
#include <gransim/scheduler/Scheduler.h>

#include <functional>
#include <map>
#include <memory>
#include <string>

namespace gransim::runtime {

using cluster::Tick;
using guest::AppId;
using guest::NodeId;

struct LaunchOptions
{
    // 0 lets the runtime pick; otherwise a value from allocateAppId()
    AppId appId = 0;
    NodeId origin = 0;
    // Cores already set aside for the app, one entry per core, in the order
    // they should be handed to team indexes. With manageCores the origin
    // entry must come first; an empty pool means the runtime reserves the
    // main granule's core itself.
    std::vector<NodeId> pool;
    // When set, the runtime reserves and releases scheduler cores as
    // granules come and go. Otherwise the pool is a fixed list of slots the
    // caller owns, and nodes may be overcommitted.
    bool manageCores = true;
    // Consulted at every barrier-type control point; null disables
    // migration
    std::shared_ptr<migration::MigrationPolicy> migrationPolicy;
};

struct AppResult
{
    AppId app = 0;
    bool finished = false;
    bool failed = false;
    std::string error;
    Tick start = 0;
    Tick end = 0;
    // Undilated ticks spent executing guest instructions, summed over
    // granules
    uint64_t computeTicks = 0;
    // Memory of every granule at the moment it finished, by team index. The
    // main granule (index 0) is recorded at EXIT.
    std::map<int, Bytes> finalMemories;

    uint64_t migrationChecks = 0;
    uint64_t migrationsCommitted = 0;
    uint64_t migrationsAborted = 0;
    uint64_t granulesMigrated = 0;

    uint64_t messagesSent = 0;
    uint64_t messagesReceived = 0;
    // Point-to-point messages never consumed by the time the app ended
    uint64_t undelivered = 0;

    uint64_t barriers = 0;
};

// Called on every node when a barrier releases it: whether that node's
// replica (base and working memory) equals the main snapshot
using BarrierObserver =
  std::function<void(AppId app, NodeId node, bool coherent)>;

// Drives guest programs on the simulated cluster. Everything happens inside
// events of the shared queue; callers launch apps and then run the queue.
class Runtime
{
  public:
    Runtime(cluster::EventQueue& queue,
            cluster::Transport& transport,
            const cluster::ClusterConfig& config,
            scheduler::Scheduler& scheduler);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    // Starts the program's main granule on options.origin at the current
    // tick. Throws PlacementError if the runtime has to reserve the main
    // core and cannot.
    AppId launch(std::shared_ptr<const guest::GuestProgram> program,
                 LaunchOptions options = {},
                 std::function<void(const AppResult&)> onFinish = {});

    // Hands out an id ahead of launch so cores can be reserved under it
    AppId allocateAppId();

    const AppResult& result(AppId app) const;
    bool isDone(AppId app) const;
    size_t runningApps() const;

    // Cores with at least one live granule on them; an overcommitted node
    // counts each core once
    int busyCores() const;

    // Fails every app that has not finished, e.g. after the queue drained
    // with granules still blocked
    void failStuckApps();

    // Called whenever core reservations or granule residency change
    void setCoreListener(std::function<void()> listener);
    void setBarrierObserver(BarrierObserver observer);

    struct Impl;

  private:
    std::unique_ptr<Impl> impl;
};

// Runs one program to completion on a fresh simulated cluster
AppResult runProgram(const guest::GuestProgram& program,
                     const cluster::ClusterConfig& config,
                     LaunchOptions options = {},
                     BarrierObserver observer = {});

}
