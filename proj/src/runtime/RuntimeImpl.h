#pragma once

#include <gransim/guest/Interpreter.h>
#include <gransim/memsync/SharedRegion.h>
#include <gransim/memsync/SyncPrimitives.h>
#include <gransim/messaging/GranuleGroup.h>
#include <gransim/runtime/Runtime.h>

#include <deque>
#include <optional>
#include <set>

namespace gransim::runtime {

using guest::Granule;
using guest::GranuleId;
using guest::GranuleStatus;
using snapshot::ByteDiff;

// Node-level aggregation used by barriers and joins: once every member on a
// node has arrived, that node reports to the main node once
struct Gather
{
    std::map<NodeId, std::set<int>> arrived;
    std::map<NodeId, std::vector<ByteDiff>> reported;

    void clear()
    {
        arrived.clear();
        reported.clear();
    }
};

struct ReduceState
{
    bool active = false;
    size_t offset = 0;
    size_t length = 0;
    snapshot::MergeOp op;
    std::map<NodeId, std::map<int, Bytes>> local;
    std::map<NodeId, Bytes> partials;
};

struct RecvWait
{
    int srcIndex = 0;
    size_t offset = 0;
    bool collective = false;
    // Expected payload size for collectives
    size_t length = 0;
};

// The set of granules currently executing together. Outside a parallel
// section this is just the main granule with index 0.
struct Team
{
    uint64_t seq = 0;
    bool section = false;
    guest::Semantics semantics = guest::Semantics::Process;
    std::vector<GranuleId> members;
    messaging::GranuleGroup group;
    std::optional<memsync::SharedRegion> region;

    std::map<int, messaging::IndexQueueSet> queues;
    // Out-of-order arrivals held back per (dst, src) until the gap fills
    std::map<std::pair<int, int>, std::map<uint64_t, messaging::Message>>
      reorder;
    std::map<std::pair<int, int>, uint64_t> expectedSeq;
    std::map<int, RecvWait> waiting;

    Gather barrier;
    Gather join;
    ReduceState reduce;
    memsync::MutexTable mutexes;

    int size() const { return static_cast<int>(members.size()); }
};

struct App
{
    AppId id = 0;
    std::shared_ptr<const guest::GuestProgram> program;
    LaunchOptions options;
    std::function<void(const AppResult&)> onFinish;
    AppResult result;
    bool done = false;

    std::map<GranuleId, std::unique_ptr<Granule>> granules;
    GranuleId mainGranule = 0;
    std::deque<NodeId> spare;

    std::unique_ptr<Team> team;
    uint64_t teamSeq = 0;
    std::vector<snapshot::MergeRegion> pendingRegions;
    memsync::LatchTable latches;
    migration::MigrationPlanner planner;
    uint64_t inflight = 0;
};

struct Runtime::Impl
{
    Impl(cluster::EventQueue& queue,
         cluster::Transport& transport,
         const cluster::ClusterConfig& config,
         scheduler::Scheduler& scheduler);

    cluster::EventQueue& queue;
    cluster::Transport& transport;
    cluster::ClusterConfig config;
    scheduler::Scheduler& scheduler;

    std::map<AppId, std::unique_ptr<App>> apps;
    AppId nextApp = 1;
    GranuleId nextGranule = 1;
    std::map<NodeId, int> resident;
    std::function<void()> coreListener;
    BarrierObserver barrierObserver;

    // Lifecycle (Runtime.cpp)
    AppId launch(std::shared_ptr<const guest::GuestProgram> program,
                 LaunchOptions options,
                 std::function<void(const AppResult&)> onFinish);
    App* liveApp(AppId id);
    std::function<void()> guarded(AppId app, std::function<void(App&)> fn);
    void submit(AppId app,
                Tick delay,
                const std::string& tag,
                std::function<void(App&)> fn);
    void send(App& app,
              NodeId src,
              NodeId dst,
              size_t bytes,
              const std::string& tag,
              std::function<void(App&)> fn,
              Tick extraDelay = 0);
    void schedule(App& app, Granule& g, Tick delay = 0);
    void wake(App& app, Granule& g, Tick delay = 0);
    void step(App& app, GranuleId gid);
    void dispatch(App& app, Granule& g, const guest::ControlPointEvent& ev);
    Granule& granule(App& app, GranuleId gid);
    Team* currentTeam(App& app, uint64_t seq);
    Granule& member(App& app, int index);
    std::vector<Granule*> membersOn(App& app, NodeId node);
    void coresChanged();
    void releaseCore(App& app, NodeId node);
    void finishGranule(App& app, Granule& g);
    void failApp(App& app, const std::string& why);
    void completeApp(App& app);
    uint64_t queuedMessages(const Team& team) const;
    Tick dilate(NodeId node, uint64_t ticks) const;
    std::unique_ptr<Team> trivialTeam(App& app);

    // Parallel sections and local sync (Runtime.cpp)
    void spawn(App& app, Granule& parent, int count, uint32_t body,
               guest::Semantics semantics);
    void join(App& app, Granule& g);
    void endSection(App& app);
    void exitGranule(App& app, Granule& g);
    void registerRegion(App& app, const snapshot::MergeRegion& region);
    void lock(App& app, Granule& g, int64_t id);
    void unlock(App& app, Granule& g, int64_t id);
    void grant(App& app, int64_t id, GranuleId gid);
    void atomicUpdate(App& app, Granule& g, const guest::AtomicUpdate& ev);
    void latchInit(App& app, Granule& g, int64_t id, int64_t count);
    void latchDecrement(App& app, Granule& g, int64_t id);
    void latchWait(App& app, Granule& g, int64_t id);

    // Messaging (Messaging.cpp)
    void sendMessage(App& app, Granule& g, const guest::Send& ev);
    void deliverMessage(App& app,
                        uint64_t teamSeq,
                        messaging::Message msg,
                        NodeId at);
    void enqueueOrdered(App& app, Team& team, messaging::Message msg);
    void recvMessage(App& app, Granule& g, const guest::Recv& ev);
    bool tryCompleteRecv(App& app, Team& team, Granule& g);
    void broadcast(App& app, Granule& g, const guest::Broadcast& ev);
    void enqueueCollective(App& app, Team& team, int index, Bytes payload);

    // Barrier-type collectives (Collective.cpp)
    void gatherArrive(App& app, Granule& g, bool isJoin);
    void gatherComplete(App& app, bool isJoin);
    void releaseBarrier(App& app);
    void allReduce(App& app, Granule& g, const guest::AllReduce& ev);
    void reduceLocal(App& app, NodeId node, int index, Bytes contribution);
    void reducePartial(App& app, NodeId node, Bytes partial);
    void reduceResult(App& app, size_t offset, const Bytes& result);
    NodeId reportNode(const Team& team) const;

    // Migration (Migrate.cpp)
    void migrationCheck(App& app, std::function<void(App&)> then);
};

}
