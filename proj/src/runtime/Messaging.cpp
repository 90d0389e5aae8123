#include "RuntimeImpl.h"

#include <gransim/util/Errors.h>

namespace gransim::runtime {

using messaging::Message;
using messaging::MessageKind;

void Runtime::Impl::sendMessage(App& app, Granule& g, const guest::Send& ev)
{
    Team& t = *app.team;
    if (!t.group.contains(ev.dstIndex)) {
        throw ProtocolError("send to unknown index " +
                            std::to_string(ev.dstIndex));
    }
    if (ev.offset + ev.length > g.mem().size()) {
        throw GuestTrap("send buffer out of bounds");
    }
    Message msg;
    msg.group = t.seq;
    msg.srcIndex = g.groupIndex;
    msg.dstIndex = ev.dstIndex;
    msg.kind = MessageKind::PointToPoint;
    msg.payload.assign(g.mem().begin() + ev.offset,
                       g.mem().begin() + ev.offset + ev.length);
    msg.seq = t.group.nextSeq(msg.srcIndex, msg.dstIndex);

    NodeId dstNode = t.group.tableOn(g.node).at(ev.dstIndex);
    app.inflight++;
    app.result.messagesSent++;
    uint64_t seq = t.seq;
    send(app,
         g.node,
         dstNode,
         ev.length,
         "p2p",
         [this, seq, msg, dstNode](App& a) {
             deliverMessage(a, seq, msg, dstNode);
         });
    wake(app, g);
}

void Runtime::Impl::deliverMessage(App& app,
                                   uint64_t teamSeq,
                                   Message msg,
                                   NodeId at)
{
    Team* t = currentTeam(app, teamSeq);
    if (t == nullptr) {
        app.inflight--;
        app.result.undelivered++;
        return;
    }
    // The index moved after the sender resolved it; follow the table
    NodeId current = t->group.nodeOf(msg.dstIndex);
    if (current != at) {
        size_t bytes = msg.payload.size();
        send(app,
             at,
             current,
             bytes,
             "p2p-forward",
             [this, teamSeq, msg = std::move(msg), current](App& a) {
                 deliverMessage(a, teamSeq, msg, current);
             });
        return;
    }
    app.inflight--;
    enqueueOrdered(app, *t, std::move(msg));
}

void Runtime::Impl::enqueueOrdered(App& app, Team& team, Message msg)
{
    std::pair<int, int> key{ msg.dstIndex, msg.srcIndex };
    uint64_t& expected = team.expectedSeq[key];
    int dst = msg.dstIndex;
    if (msg.seq != expected + 1) {
        team.reorder[key].emplace(msg.seq, std::move(msg));
        return;
    }
    team.queues[dst].enqueue(std::move(msg));
    expected++;
    auto held = team.reorder.find(key);
    while (held != team.reorder.end() && !held->second.empty() &&
           held->second.begin()->first == expected + 1) {
        team.queues[dst].enqueue(std::move(held->second.begin()->second));
        held->second.erase(held->second.begin());
        expected++;
    }
    if (held != team.reorder.end() && held->second.empty()) {
        team.reorder.erase(held);
    }

    auto w = team.waiting.find(dst);
    if (w != team.waiting.end() && !w->second.collective) {
        tryCompleteRecv(app, team, member(app, dst));
    }
}

void Runtime::Impl::recvMessage(App& app, Granule& g, const guest::Recv& ev)
{
    Team& t = *app.team;
    if (!t.group.contains(ev.srcIndex)) {
        throw ProtocolError("receive from unknown index " +
                            std::to_string(ev.srcIndex));
    }
    g.setStatus(GranuleStatus::BlockedRecv);
    t.waiting[g.groupIndex] = RecvWait{ ev.srcIndex, ev.offset, false, 0 };
    tryCompleteRecv(app, t, g);
}

bool Runtime::Impl::tryCompleteRecv(App& app, Team& team, Granule& g)
{
    auto w = team.waiting.find(g.groupIndex);
    if (w == team.waiting.end()) {
        return false;
    }
    auto& q = team.queues[g.groupIndex];
    auto msg = w->second.collective ? q.dequeueCollective()
                                    : q.dequeue(w->second.srcIndex);
    if (!msg) {
        return false;
    }
    if (w->second.collective && msg->payload.size() != w->second.length) {
        throw ProtocolError("broadcast length mismatch at index " +
                            std::to_string(g.groupIndex));
    }
    guest::writeMemory(g, w->second.offset, msg->payload);
    if (!w->second.collective) {
        app.result.messagesReceived++;
    }
    team.waiting.erase(w);
    wake(app, g);
    return true;
}

void Runtime::Impl::enqueueCollective(App& app,
                                      Team& team,
                                      int index,
                                      Bytes payload)
{
    Message msg;
    msg.group = team.seq;
    msg.dstIndex = index;
    msg.kind = MessageKind::Collective;
    msg.payload = std::move(payload);
    team.queues[index].enqueue(std::move(msg));
    auto w = team.waiting.find(index);
    if (w != team.waiting.end() && w->second.collective) {
        tryCompleteRecv(app, team, member(app, index));
    }
}

void Runtime::Impl::broadcast(App& app, Granule& g, const guest::Broadcast& ev)
{
    Team& t = *app.team;
    if (!t.group.contains(ev.rootIndex)) {
        throw ProtocolError("broadcast from unknown root " +
                            std::to_string(ev.rootIndex));
    }
    if (ev.offset + ev.length > g.mem().size()) {
        throw GuestTrap("broadcast buffer out of bounds");
    }
    if (g.groupIndex != ev.rootIndex) {
        g.setStatus(GranuleStatus::BlockedRecv);
        t.waiting[g.groupIndex] =
          RecvWait{ ev.rootIndex, ev.offset, true, ev.length };
        tryCompleteRecv(app, t, g);
        return;
    }

    Bytes payload(g.mem().begin() + ev.offset,
                  g.mem().begin() + ev.offset + ev.length);
    uint64_t seq = t.seq;
    for (NodeId node : t.group.nodes()) {
        std::vector<int> recipients;
        for (int idx : t.group.indexesOn(node)) {
            if (idx != ev.rootIndex) {
                recipients.push_back(idx);
            }
        }
        if (recipients.empty()) {
            continue;
        }
        // One message per node; the receiving side fans out locally
        auto fanOut = [this, seq, recipients, payload](App& a) {
            Team* tt = currentTeam(a, seq);
            if (tt == nullptr) {
                return;
            }
            for (int idx : recipients) {
                enqueueCollective(a, *tt, idx, payload);
            }
        };
        if (node == g.node) {
            submit(app.id, config.intraNodeLatency, "bcast-local", fanOut);
        } else {
            send(app, g.node, node, ev.length, "bcast", fanOut);
        }
    }
    wake(app, g);
}

}
