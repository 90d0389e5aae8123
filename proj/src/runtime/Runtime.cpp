#include "RuntimeImpl.h"

#include <gransim/util/Errors.h>

#include <algorithm>

namespace gransim::runtime {

namespace {

template<class... Ts>
struct Overloaded : Ts...
{
    using Ts::operator()...;
};
template<class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}

Runtime::Impl::Impl(cluster::EventQueue& queue,
                    cluster::Transport& transport,
                    const cluster::ClusterConfig& config,
                    scheduler::Scheduler& scheduler)
  : queue(queue)
  , transport(transport)
  , config(config)
  , scheduler(scheduler)
{}

AppId Runtime::Impl::launch(std::shared_ptr<const guest::GuestProgram> program,
                            LaunchOptions options,
                            std::function<void(const AppResult&)> onFinish)
{
    if (!program) {
        throw ContractViolation("launch without a program");
    }
    auto app = std::make_unique<App>();
    app->id = options.appId != 0 ? options.appId : nextApp++;
    if (apps.contains(app->id)) {
        throw ContractViolation("app id " + std::to_string(app->id) +
                                " already launched");
    }
    app->program = std::move(program);
    app->onFinish = std::move(onFinish);
    app->result.app = app->id;
    app->result.start = queue.now();

    if (options.pool.empty()) {
        if (options.manageCores) {
            try {
                scheduler.reserve(options.origin, 1, app->id);
            } catch (const ReservationError& e) {
                throw PlacementError("no free core on node " +
                                     std::to_string(options.origin));
            }
        }
        options.pool.push_back(options.origin);
    }
    app->spare.assign(options.pool.begin(), options.pool.end());
    app->options = std::move(options);

    NodeId node = app->spare.front();
    app->spare.pop_front();

    auto g = std::make_unique<Granule>();
    g->id = nextGranule++;
    g->appId = app->id;
    g->groupIndex = 0;
    g->groupSize = 1;
    g->semantics = guest::Semantics::Process;
    g->node = node;
    g->memory = std::make_shared<Bytes>(app->program->initialMemory());
    g->regs.programCounter = app->program->entry;
    g->tracker = snapshot::DirtyTracker(app->program->memoryPages);
    app->mainGranule = g->id;
    resident[node]++;

    Granule& main = *g;
    app->granules.emplace(g->id, std::move(g));
    app->team = trivialTeam(*app);

    AppId id = app->id;
    App& ref = *app;
    apps.emplace(id, std::move(app));
    coresChanged();
    schedule(ref, main);
    return id;
}

std::unique_ptr<Team> Runtime::Impl::trivialTeam(App& app)
{
    auto t = std::make_unique<Team>();
    t->seq = ++app.teamSeq;
    t->members = { app.mainGranule };
    t->group = messaging::GranuleGroup(
      t->seq, app.id, { granule(app, app.mainGranule).node });
    return t;
}

App* Runtime::Impl::liveApp(AppId id)
{
    auto it = apps.find(id);
    if (it == apps.end() || it->second->done) {
        return nullptr;
    }
    return it->second.get();
}

Team* Runtime::Impl::currentTeam(App& app, uint64_t seq)
{
    if (!app.team || app.team->seq != seq) {
        return nullptr;
    }
    return app.team.get();
}

std::function<void()> Runtime::Impl::guarded(AppId id,
                                             std::function<void(App&)> fn)
{
    return [this, id, fn = std::move(fn)]() {
        App* app = liveApp(id);
        if (app == nullptr) {
            return;
        }
        try {
            fn(*app);
        } catch (const GransimError& e) {
            failApp(*app, e.what());
        }
    };
}

void Runtime::Impl::submit(AppId app,
                           Tick delay,
                           const std::string& tag,
                           std::function<void(App&)> fn)
{
    queue.submit(delay, tag, guarded(app, std::move(fn)));
}

void Runtime::Impl::send(App& app,
                         NodeId src,
                         NodeId dst,
                         size_t bytes,
                         const std::string& tag,
                         std::function<void(App&)> fn,
                         Tick extraDelay)
{
    transport.send(
      src, dst, bytes, tag, guarded(app.id, std::move(fn)), extraDelay);
}

void Runtime::Impl::schedule(App& app, Granule& g, Tick delay)
{
    GranuleId gid = g.id;
    submit(app.id, delay, "run", [this, gid](App& a) { step(a, gid); });
}

void Runtime::Impl::wake(App& app, Granule& g, Tick delay)
{
    g.setStatus(GranuleStatus::Runnable);
    schedule(app, g, delay);
}

Tick Runtime::Impl::dilate(NodeId node, uint64_t ticks) const
{
    auto it = resident.find(node);
    int cores = scheduler.node(node).coresTotal();
    if (it == resident.end() || it->second <= cores || cores <= 0) {
        return ticks;
    }
    uint64_t r = static_cast<uint64_t>(it->second);
    uint64_t c = static_cast<uint64_t>(cores);
    return (ticks * r + c - 1) / c;
}

void Runtime::Impl::step(App& app, GranuleId gid)
{
    Granule& g = granule(app, gid);
    if (g.status != GranuleStatus::Runnable) {
        return;
    }
    auto run = guest::runUntilControlPoint(g, *app.program);
    app.result.computeTicks += run.ticks;
    if (run.outcome == guest::RunOutcome::Trapped) {
        failApp(app,
                "granule " + std::to_string(g.groupIndex) +
                  " trapped: " + run.trap);
        return;
    }
    if (!run.event) {
        throw ContractViolation("interpreter returned without an event");
    }
    submit(app.id,
           dilate(g.node, run.ticks),
           "cp",
           [this, gid, ev = *run.event](App& a) {
               dispatch(a, granule(a, gid), ev);
           });
}

void Runtime::Impl::dispatch(App& app,
                             Granule& g,
                             const guest::ControlPointEvent& ev)
{
    using namespace guest;
    std::visit(
      Overloaded{
        [&](const SpawnThreads& e) {
            spawn(app, g, e.count, e.bodyLabel, Semantics::Thread);
        },
        [&](const Fork& e) {
            spawn(app, g, e.count, e.bodyLabel, Semantics::Process);
        },
        [&](const Join&) { join(app, g); },
        [&](const guest::Barrier&) {
            g.setStatus(GranuleStatus::BlockedBarrier);
            gatherArrive(app, g, false);
        },
        [&](const MutexLock& e) { lock(app, g, e.id); },
        [&](const MutexUnlock& e) { unlock(app, g, e.id); },
        [&](const AtomicUpdate& e) { atomicUpdate(app, g, e); },
        [&](const LatchInit& e) { latchInit(app, g, e.id, e.count); },
        [&](const LatchDecrement& e) { latchDecrement(app, g, e.id); },
        [&](const LatchWait& e) { latchWait(app, g, e.id); },
        [&](const guest::Send& e) { sendMessage(app, g, e); },
        [&](const Recv& e) { recvMessage(app, g, e); },
        [&](const AllReduce& e) { allReduce(app, g, e); },
        [&](const Broadcast& e) { broadcast(app, g, e); },
        [&](const RegisterReduce& e) {
            registerRegion(app, { e.offset, e.length, e.op });
            wake(app, g);
        },
        [&](const Exit&) { exitGranule(app, g); },
      },
      ev);
}

Granule& Runtime::Impl::granule(App& app, GranuleId gid)
{
    auto it = app.granules.find(gid);
    if (it == app.granules.end()) {
        throw ContractViolation("unknown granule " + std::to_string(gid));
    }
    return *it->second;
}

Granule& Runtime::Impl::member(App& app, int index)
{
    return granule(app, app.team->members.at(index));
}

std::vector<Granule*> Runtime::Impl::membersOn(App& app, NodeId node)
{
    std::vector<Granule*> out;
    for (int idx : app.team->group.indexesOn(node)) {
        out.push_back(&member(app, idx));
    }
    return out;
}

void Runtime::Impl::coresChanged()
{
    if (coreListener) {
        coreListener();
    }
}

void Runtime::Impl::releaseCore(App& app, NodeId node)
{
    if (app.options.manageCores) {
        scheduler.release(node, 1, app.id);
        coresChanged();
    } else {
        app.spare.push_back(node);
    }
}

void Runtime::Impl::finishGranule(App& app, Granule& g)
{
    if (g.status == GranuleStatus::Finished) {
        return;
    }
    g.setStatus(GranuleStatus::Finished);
    resident[g.node]--;
    releaseCore(app, g.node);
    coresChanged();
}

uint64_t Runtime::Impl::queuedMessages(const Team& team) const
{
    uint64_t n = 0;
    for (const auto& [idx, q] : team.queues) {
        n += q.pending();
    }
    for (const auto& [key, held] : team.reorder) {
        n += held.size();
    }
    return n;
}

void Runtime::Impl::failApp(App& app, const std::string& why)
{
    if (app.done) {
        return;
    }
    for (auto& [gid, g] : app.granules) {
        if (g->status != GranuleStatus::Finished) {
            g->failed = true;
            g->setStatus(GranuleStatus::Finished);
            resident[g->node]--;
            if (app.options.manageCores) {
                scheduler.release(g->node, 1, app.id);
            }
        }
    }
    app.result.failed = true;
    app.result.error = why;
    completeApp(app);
}

void Runtime::Impl::completeApp(App& app)
{
    app.done = true;
    app.result.finished = !app.result.failed;
    app.result.end = queue.now();
    if (app.team) {
        app.result.undelivered += queuedMessages(*app.team);
    }
    app.result.undelivered += app.inflight;
    if (app.options.manageCores) {
        for (NodeId n : app.spare) {
            scheduler.release(n, 1, app.id);
        }
    }
    app.spare.clear();
    app.team.reset();
    app.granules.clear();
    coresChanged();
    if (app.onFinish) {
        app.onFinish(app.result);
    }
}

void Runtime::Impl::spawn(App& app,
                          Granule& parent,
                          int count,
                          uint32_t body,
                          guest::Semantics semantics)
{
    if (app.team->section) {
        throw ConfigError("nested parallel sections are not supported");
    }
    if (count < 1) {
        throw ConfigError("team size must be at least 1");
    }

    // Slots: spare cores on the parent's node first, then the rest of the
    // pool in order, then fresh placements
    std::vector<NodeId> slots{ parent.node };
    int need = count - 1;
    for (int pass = 0; pass < 2 && need > 0; pass++) {
        for (auto it = app.spare.begin(); it != app.spare.end() && need > 0;) {
            if ((pass == 0) == (*it == parent.node)) {
                slots.push_back(*it);
                it = app.spare.erase(it);
                need--;
            } else {
                ++it;
            }
        }
    }
    if (need > 0) {
        if (!app.options.manageCores) {
            throw PlacementError("app has no slot left for " +
                                 std::to_string(need) + " granules");
        }
        for (const auto& nc :
             scheduler.placeAndReserve(app.id, parent.node, need)) {
            slots.insert(slots.end(), nc.count, nc.node);
        }
        coresChanged();
    }

    parent.regs.callStack.push_back(parent.regs.programCounter);
    parent.regs.stackPointer++;
    parent.regs.programCounter = body;
    auto snap = guest::takeSnapshot(parent);

    auto team = std::make_unique<Team>();
    team->seq = ++app.teamSeq;
    team->section = true;
    team->semantics = semantics;
    team->group = messaging::GranuleGroup(team->seq, app.id, slots);
    team->members.push_back(parent.id);

    if (semantics == guest::Semantics::Thread) {
        team->region.emplace(app.id, parent.node, snap);
        for (const auto& r : app.pendingRegions) {
            team->region->registerReduce(r);
        }
        team->region->adoptReplica(parent.node, parent.memory);
        for (NodeId n : team->group.nodes()) {
            if (n != parent.node) {
                team->region->addReplica(n);
            }
        }
    }
    app.pendingRegions.clear();

    parent.groupIndex = 0;
    parent.groupSize = count;
    parent.semantics = semantics;
    parent.tracker.reset();

    std::map<NodeId, std::vector<GranuleId>> children;
    for (int idx = 1; idx < count; idx++) {
        NodeId node = slots[idx];
        guest::MemoryView mem =
          team->region ? team->region->replica(node).working
                       : std::make_shared<Bytes>(snap.memory().begin(),
                                                 snap.memory().end());
        auto g = std::make_unique<Granule>(
          guest::instantiate(snap, semantics, node, mem));
        g->id = nextGranule++;
        g->appId = app.id;
        g->groupIndex = idx;
        g->groupSize = count;
        resident[node]++;
        team->members.push_back(g->id);
        children[node].push_back(g->id);
        app.granules.emplace(g->id, std::move(g));
    }
    app.team = std::move(team);
    coresChanged();
    wake(app, parent);

    size_t pages = snap.pageCount();
    for (const auto& [node, gids] : children) {
        auto start = [this, gids](App& a) {
            for (GranuleId gid : gids) {
                schedule(a, granule(a, gid));
            }
        };
        if (node == parent.node) {
            submit(app.id, config.intraNodeLatency, "spawn-local", start);
            continue;
        }
        bool fresh =
          scheduler.transferSnapshot(node, app.id, app.team->seq);
        size_t bytes = fresh ? pages * snapshot::PAGE_SIZE : 64;
        Tick extra = fresh ? config.snapshotTransferCost * pages : 0;
        send(app, parent.node, node, bytes, "snapshot", start, extra);
    }
}

void Runtime::Impl::join(App& app, Granule& g)
{
    Team& t = *app.team;
    if (!t.section) {
        throw ProtocolError("JOIN outside a parallel section");
    }
    if (g.groupIndex == 0) {
        g.setStatus(GranuleStatus::BlockedLatch);
    } else {
        if (t.semantics == guest::Semantics::Process) {
            app.result.finalMemories[g.groupIndex] = g.mem();
        }
        finishGranule(app, g);
    }
    gatherArrive(app, g, true);
}

void Runtime::Impl::endSection(App& app)
{
    Team& t = *app.team;
    Granule& parent = member(app, 0);
    if (t.region) {
        const auto& mem = t.region->mainSnapshot().memory();
        parent.memory = std::make_shared<Bytes>(mem.begin(), mem.end());
    }
    if (parent.regs.callStack.empty()) {
        throw ProtocolError("parallel section lost its return address");
    }
    parent.regs.programCounter = parent.regs.callStack.back();
    parent.regs.callStack.pop_back();
    parent.regs.stackPointer--;
    parent.groupIndex = 0;
    parent.groupSize = 1;
    parent.semantics = guest::Semantics::Process;
    parent.tracker.reset();

    app.result.undelivered += queuedMessages(t);
    for (size_t idx = 1; idx < t.members.size(); idx++) {
        app.granules.erase(t.members[idx]);
    }
    app.team = trivialTeam(app);
    wake(app, parent);
}

void Runtime::Impl::exitGranule(App& app, Granule& g)
{
    Team& t = *app.team;
    if (t.section) {
        if (g.groupIndex != 0) {
            join(app, g);
            return;
        }
        throw ProtocolError("main granule exited inside a parallel section");
    }
    app.result.finalMemories[0] = g.mem();
    finishGranule(app, g);
    completeApp(app);
}

void Runtime::Impl::registerRegion(App& app,
                                   const snapshot::MergeRegion& region)
{
    if (app.team->region) {
        app.team->region->registerReduce(region);
        return;
    }
    auto& pending = app.pendingRegions;
    if (std::find(pending.begin(), pending.end(), region) != pending.end()) {
        return;
    }
    auto candidate = pending;
    candidate.push_back(region);
    snapshot::validateMergeRegions(candidate, app.program->memorySize());
    pending = std::move(candidate);
}

void Runtime::Impl::lock(App& app, Granule& g, int64_t id)
{
    g.setStatus(GranuleStatus::BlockedMutex);
    GranuleId gid = g.id;
    uint64_t seq = app.team->seq;
    send(app,
         g.node,
         reportNode(*app.team),
         16,
         "mutex-lock",
         [this, gid, id, seq](App& a) {
             Team* t = currentTeam(a, seq);
             if (t != nullptr && t->mutexes.lock(id, gid)) {
                 grant(a, id, gid);
             }
         });
}

void Runtime::Impl::grant(App& app, int64_t id, GranuleId gid)
{
    Team& t = *app.team;
    Granule& g = granule(app, gid);
    auto ranges = t.mutexes.get(id).history.toVector();
    size_t bytes = 16 + t.mutexes.get(id).history.totalBytes();
    uint64_t seq = t.seq;
    send(app,
         reportNode(t),
         g.node,
         bytes,
         "mutex-grant",
         [this, gid, ranges, seq](App& a) {
             Team* tt = currentTeam(a, seq);
             if (tt == nullptr) {
                 return;
             }
             Granule& holder = granule(a, gid);
             if (tt->region && tt->region->hasReplica(holder.node)) {
                 tt->region->pullRanges(holder.node, ranges);
             }
             wake(a, holder);
         });
}

void Runtime::Impl::unlock(App& app, Granule& g, int64_t id)
{
    Team& t = *app.team;
    std::vector<ByteDiff> diffs;
    if (t.region && t.region->hasReplica(g.node)) {
        diffs = t.region->collectDiffs(g.node, g.tracker);
    }
    g.tracker.reset();
    size_t bytes = 16;
    for (const auto& d : diffs) {
        bytes += d.payload.size();
    }
    GranuleId gid = g.id;
    uint64_t seq = t.seq;
    send(app,
         g.node,
         reportNode(t),
         bytes,
         "mutex-unlock",
         [this, gid, id, seq, diffs](App& a) {
             Team* tt = currentTeam(a, seq);
             if (tt == nullptr) {
                 return;
             }
             if (tt->region) {
                 for (const auto& r : tt->region->applyToMain(diffs)) {
                     tt->mutexes.get(id).history.add(r.offset, r.length);
                 }
             }
             if (auto next = tt->mutexes.unlock(id, gid)) {
                 grant(a, id, *next);
             }
         });
    wake(app, g);
}

void Runtime::Impl::atomicUpdate(App& app,
                                 Granule& g,
                                 const guest::AtomicUpdate& ev)
{
    if (!ev.op.isArithmetic()) {
        throw ConfigError("atomic updates need an arithmetic merge op");
    }
    ev.op.validate();
    size_t width = snapshot::dtypeWidth(ev.op.dtype);
    if (ev.offset + width > g.mem().size()) {
        throw GuestTrap("atomic update out of bounds");
    }
    MutableByteSpan value(g.mem().data() + ev.offset, width);
    snapshot::applyImmediate(ev.op, value, ev.intImm, ev.floatImm);
    g.tracker.markWrite(ev.offset, width);
    registerRegion(app, { ev.offset, width, ev.op });
    wake(app, g, 1);
}

void Runtime::Impl::latchInit(App& app, Granule& g, int64_t id, int64_t count)
{
    g.setStatus(GranuleStatus::BlockedLatch);
    GranuleId gid = g.id;
    NodeId main = reportNode(*app.team);
    send(app, g.node, main, 16, "latch-init", [=, this](App& a) {
        a.latches.create(id, count);
        Granule& w = granule(a, gid);
        send(a, main, w.node, 16, "latch-ack", [this, gid](App& a2) {
            wake(a2, granule(a2, gid));
        });
    });
}

void Runtime::Impl::latchDecrement(App& app, Granule& g, int64_t id)
{
    NodeId main = reportNode(*app.team);
    send(app, g.node, main, 16, "latch-dec", [=, this](App& a) {
        for (GranuleId gid : a.latches.decrement(id)) {
            Granule& w = granule(a, gid);
            send(a, main, w.node, 16, "latch-release", [this, gid](App& a2) {
                wake(a2, granule(a2, gid));
            });
        }
    });
    wake(app, g);
}

void Runtime::Impl::latchWait(App& app, Granule& g, int64_t id)
{
    g.setStatus(GranuleStatus::BlockedLatch);
    GranuleId gid = g.id;
    NodeId main = reportNode(*app.team);
    send(app, g.node, main, 16, "latch-wait", [=, this](App& a) {
        if (a.latches.wait(id, gid)) {
            Granule& w = granule(a, gid);
            send(a, main, w.node, 16, "latch-release", [this, gid](App& a2) {
                wake(a2, granule(a2, gid));
            });
        }
    });
}

Runtime::Runtime(cluster::EventQueue& queue,
                 cluster::Transport& transport,
                 const cluster::ClusterConfig& config,
                 scheduler::Scheduler& scheduler)
  : impl(std::make_unique<Impl>(queue, transport, config, scheduler))
{}

Runtime::~Runtime() = default;

AppId Runtime::launch(std::shared_ptr<const guest::GuestProgram> program,
                      LaunchOptions options,
                      std::function<void(const AppResult&)> onFinish)
{
    return impl->launch(
      std::move(program), std::move(options), std::move(onFinish));
}

AppId Runtime::allocateAppId()
{
    return impl->nextApp++;
}

const AppResult& Runtime::result(AppId app) const
{
    auto it = impl->apps.find(app);
    if (it == impl->apps.end()) {
        throw ContractViolation("unknown app " + std::to_string(app));
    }
    return it->second->result;
}

bool Runtime::isDone(AppId app) const
{
    auto it = impl->apps.find(app);
    return it != impl->apps.end() && it->second->done;
}

size_t Runtime::runningApps() const
{
    size_t n = 0;
    for (const auto& [id, app] : impl->apps) {
        n += app->done ? 0 : 1;
    }
    return n;
}

void Runtime::failStuckApps()
{
    for (auto& [id, app] : impl->apps) {
        if (!app->done) {
            impl->failApp(*app, "deadlock: granules blocked with no pending "
                                "events");
        }
    }
}

int Runtime::busyCores() const
{
    int busy = 0;
    for (const auto& [node, count] : impl->resident) {
        busy += std::min(count, impl->scheduler.node(node).coresTotal());
    }
    return busy;
}

void Runtime::setCoreListener(std::function<void()> listener)
{
    impl->coreListener = std::move(listener);
}

void Runtime::setBarrierObserver(BarrierObserver observer)
{
    impl->barrierObserver = std::move(observer);
}

AppResult runProgram(const guest::GuestProgram& program,
                     const cluster::ClusterConfig& config,
                     LaunchOptions options,
                     BarrierObserver observer)
{
    config.validate();
    cluster::EventQueue queue;
    cluster::Transport transport(queue, config);
    scheduler::Scheduler scheduler(config.nodeCount,
                                   config.coresPerNode,
                                   scheduler::parsePolicy(
                                     config.placementPolicy));
    Runtime rt(queue, transport, config, scheduler);
    rt.setBarrierObserver(std::move(observer));
    AppId id = rt.launch(
      std::make_shared<guest::GuestProgram>(program), std::move(options));
    queue.runUntilIdle();
    rt.failStuckApps();
    return rt.result(id);
}

}
