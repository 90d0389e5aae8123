#include "RuntimeImpl.h"

#include <gransim/util/Errors.h>

#include <algorithm>

namespace gransim::runtime {

NodeId Runtime::Impl::reportNode(const Team& team) const
{
    return team.region ? team.region->mainNode() : team.group.nodeOf(0);
}

void Runtime::Impl::gatherArrive(App& app, Granule& g, bool isJoin)
{
    Team& t = *app.team;
    Gather& gather = isJoin ? t.join : t.barrier;
    NodeId node = g.node;
    auto& arrived = gather.arrived[node];
    arrived.insert(g.groupIndex);
    if (arrived.size() < t.group.indexesOn(node).size()) {
        return;
    }

    // Everyone on this node is in: ship the node's changes in one message
    std::vector<ByteDiff> diffs;
    size_t bytes = 16;
    if (t.region) {
        auto members = membersOn(app, node);
        auto tracker =
          memsync::nodeTracker(members, node, app.program->memoryPages);
        diffs = t.region->collectDiffs(node, tracker);
        for (auto* m : members) {
            m->tracker.reset();
        }
        for (const auto& d : diffs) {
            bytes += d.payload.size() + d.base.size();
        }
    }

    uint64_t seq = t.seq;
    send(app,
         node,
         reportNode(t),
         bytes,
         isJoin ? "join-report" : "barrier-report",
         [this, seq, node, isJoin, diffs = std::move(diffs)](App& a) {
             Team* tt = currentTeam(a, seq);
             if (tt == nullptr) {
                 return;
             }
             Gather& gg = isJoin ? tt->join : tt->barrier;
             gg.reported[node] = diffs;
             if (gg.reported.size() == tt->group.nodes().size()) {
                 gatherComplete(a, isJoin);
             }
         });
}

void Runtime::Impl::gatherComplete(App& app, bool isJoin)
{
    Team& t = *app.team;
    Gather& gather = isJoin ? t.join : t.barrier;
    if (t.region) {
        // Ascending node id keeps float merges reproducible
        for (const auto& [node, diffs] : gather.reported) {
            t.region->applyToMain(diffs);
        }
    }
    gather.clear();
    if (isJoin) {
        endSection(app);
        return;
    }
    app.result.barriers++;
    migrationCheck(app, [this](App& a) { releaseBarrier(a); });
}

void Runtime::Impl::releaseBarrier(App& app)
{
    Team& t = *app.team;
    std::vector<ByteDiff> drained;
    size_t bytes = 16;
    if (t.region) {
        drained = t.region->drainBroadcast();
        for (const auto& d : drained) {
            bytes += d.payload.size();
        }
    }
    uint64_t seq = t.seq;
    for (NodeId node : t.group.nodes()) {
        send(app,
             reportNode(t),
             node,
             bytes,
             "barrier-release",
             [this, seq, node, drained](App& a) {
                 Team* tt = currentTeam(a, seq);
                 if (tt == nullptr) {
                     return;
                 }
                 if (tt->region) {
                     tt->region->applyBroadcast(node, drained);
                     if (barrierObserver) {
                         const auto& main = tt->region->mainSnapshot().memory();
                         const auto& rep = tt->region->replica(node);
                         bool same = std::ranges::equal(rep.base, main) &&
                                     std::ranges::equal(*rep.working, main);
                         barrierObserver(a.id, node, same);
                     }
                 }
                 for (auto* m : membersOn(a, node)) {
                     if (m->status == GranuleStatus::BlockedBarrier) {
                         m->tracker.reset();
                         wake(a, *m);
                     }
                 }
             });
    }
}

void Runtime::Impl::allReduce(App& app, Granule& g, const guest::AllReduce& ev)
{
    using snapshot::MergeKind;
    if (ev.op.kind != MergeKind::Sum && ev.op.kind != MergeKind::Multiply) {
        throw ConfigError("all-reduce supports sum and multiply only");
    }
    ev.op.validate();
    size_t width = snapshot::dtypeWidth(ev.op.dtype);
    if (ev.length == 0 || ev.length % width != 0) {
        throw ConfigError("all-reduce length " + std::to_string(ev.length) +
                          " is not a multiple of the element width");
    }
    if (ev.offset + ev.length > g.mem().size()) {
        throw GuestTrap("all-reduce buffer out of bounds");
    }

    Team& t = *app.team;
    ReduceState& r = t.reduce;
    if (!r.active) {
        r.active = true;
        r.offset = ev.offset;
        r.length = ev.length;
        r.op = ev.op;
    } else if (r.offset != ev.offset || r.length != ev.length ||
               !(r.op == ev.op)) {
        throw ProtocolError("mismatched all-reduce arguments at index " +
                            std::to_string(g.groupIndex));
    }
    g.setStatus(GranuleStatus::BlockedBarrier);

    Bytes contribution(g.mem().begin() + ev.offset,
                       g.mem().begin() + ev.offset + ev.length);
    NodeId node = g.node;
    int index = g.groupIndex;
    if (t.group.leaderOf(node) == index) {
        reduceLocal(app, node, index, std::move(contribution));
        return;
    }
    uint64_t seq = t.seq;
    send(app,
         node,
         node,
         ev.length,
         "allreduce-local",
         [this, seq, node, index, c = std::move(contribution)](App& a) {
             if (currentTeam(a, seq) != nullptr) {
                 reduceLocal(a, node, index, c);
             }
         });
}

void Runtime::Impl::reduceLocal(App& app,
                                NodeId node,
                                int index,
                                Bytes contribution)
{
    Team& t = *app.team;
    auto& local = t.reduce.local[node];
    local[index] = std::move(contribution);
    if (local.size() < t.group.indexesOn(node).size()) {
        return;
    }
    std::vector<Bytes> ordered;
    for (auto& [idx, bytes] : local) {
        ordered.push_back(std::move(bytes));
    }
    Bytes partial = messaging::foldContributions(t.reduce.op, ordered);

    NodeId root = t.group.nodeOf(0);
    if (node == root) {
        reducePartial(app, node, std::move(partial));
        return;
    }
    uint64_t seq = t.seq;
    size_t bytes = partial.size();
    send(app,
         node,
         root,
         bytes,
         "allreduce-up",
         [this, seq, node, p = std::move(partial)](App& a) {
             if (currentTeam(a, seq) != nullptr) {
                 reducePartial(a, node, p);
             }
         });
}

void Runtime::Impl::reducePartial(App& app, NodeId node, Bytes partial)
{
    Team& t = *app.team;
    ReduceState& r = t.reduce;
    r.partials[node] = std::move(partial);
    if (r.partials.size() < t.group.nodes().size()) {
        return;
    }
    std::vector<Bytes> ordered;
    for (auto& [n, bytes] : r.partials) {
        ordered.push_back(std::move(bytes));
    }
    Bytes result = messaging::foldContributions(r.op, ordered);
    size_t offset = r.offset;
    r = ReduceState{};
    migrationCheck(app, [this, offset, result](App& a) {
        reduceResult(a, offset, result);
    });
}

void Runtime::Impl::reduceResult(App& app, size_t offset, const Bytes& result)
{
    Team& t = *app.team;
    uint64_t seq = t.seq;
    NodeId root = t.group.nodeOf(0);

    auto deliverTo = [this, seq, offset, result](App& a, int idx) {
        Granule& m = member(a, idx);
        guest::writeMemory(m, offset, result);
        wake(a, m);
    };
    for (NodeId node : t.group.nodes()) {
        // The leader takes the result and fans it out on its node
        auto atLeader = [this, seq, node, result, deliverTo](App& a) {
            Team* tt = currentTeam(a, seq);
            if (tt == nullptr) {
                return;
            }
            int leader = tt->group.leaderOf(node);
            deliverTo(a, leader);
            for (int idx : tt->group.indexesOn(node)) {
                if (idx == leader) {
                    continue;
                }
                send(a,
                     node,
                     node,
                     result.size(),
                     "allreduce-fanout",
                     [seq, idx, deliverTo, this](App& a2) {
                         if (currentTeam(a2, seq) != nullptr) {
                             deliverTo(a2, idx);
                         }
                     });
            }
        };
        if (node == root) {
            atLeader(app);
        } else {
            send(app, root, node, result.size(), "allreduce-down", atLeader);
        }
    }
}

}
