#include <gransim/messaging/GranuleGroup.h>
#include <gransim/util/Errors.h>

#include <set>

namespace gransim::messaging {

GranuleGroup::GranuleGroup(GroupId id,
                           AppId app,
                           const std::vector<NodeId>& placement)
  : id(id)
  , app(app)
{
    if (placement.empty()) {
        throw ConfigError("granule group with no members");
    }
    for (size_t i = 0; i < placement.size(); i++) {
        table[static_cast<int>(i)] = placement[i];
    }
    replicate();
}

void GranuleGroup::replicate()
{
    replicas.clear();
    for (const auto& [idx, node] : table) {
        replicas[node] = table;
    }
}

NodeId GranuleGroup::nodeOf(int index) const
{
    auto it = table.find(index);
    if (it == table.end()) {
        throw ProtocolError("index " + std::to_string(index) +
                            " not in group " + std::to_string(id));
    }
    return it->second;
}

const AddressTable& GranuleGroup::tableOn(NodeId node) const
{
    auto it = replicas.find(node);
    if (it == replicas.end()) {
        throw ProtocolError("node " + std::to_string(node) +
                            " holds no replica of group " + std::to_string(id));
    }
    return it->second;
}

bool GranuleGroup::tablesConverged() const
{
    std::set<NodeId> hosting;
    for (const auto& [idx, node] : table) {
        hosting.insert(node);
    }
    if (hosting.size() != replicas.size()) {
        return false;
    }
    for (const auto& [node, replica] : replicas) {
        if (!hosting.contains(node) || replica != table) {
            return false;
        }
    }
    return true;
}

std::vector<NodeId> GranuleGroup::nodes() const
{
    std::set<NodeId> s;
    for (const auto& [idx, node] : table) {
        s.insert(node);
    }
    return { s.begin(), s.end() };
}

std::vector<int> GranuleGroup::indexesOn(NodeId node) const
{
    std::vector<int> out;
    for (const auto& [idx, n] : table) {
        if (n == node) {
            out.push_back(idx);
        }
    }
    return out;
}

std::map<NodeId, int> GranuleGroup::leaders() const
{
    std::map<NodeId, int> out;
    for (const auto& [idx, node] : table) {
        out.try_emplace(node, idx);
    }
    return out;
}

int GranuleGroup::leaderOf(NodeId node) const
{
    for (const auto& [idx, n] : table) {
        if (n == node) {
            return idx;
        }
    }
    throw ProtocolError("node " + std::to_string(node) + " hosts no member");
}

bool GranuleGroup::isLeader(int index) const
{
    return leaderOf(nodeOf(index)) == index;
}

void GranuleGroup::move(int index, NodeId to)
{
    nodeOf(index);
    table[index] = to;
    replicate();
}

uint64_t GranuleGroup::nextSeq(int src, int dst)
{
    return ++seqs[{ src, dst }];
}

GranuleGroup createGroup(GroupId id,
                         const std::vector<const guest::Granule*>& granules)
{
    if (granules.empty()) {
        throw ConfigError("granule group with no members");
    }
    std::vector<NodeId> placement;
    for (const auto* g : granules) {
        if (g->appId != granules.front()->appId) {
            throw ConfigError("granule group spans applications");
        }
        placement.push_back(g->node);
    }
    return GranuleGroup(id, granules.front()->appId, placement);
}

void IndexQueueSet::enqueue(Message msg)
{
    if (msg.kind == MessageKind::Collective) {
        collective.push_back(std::move(msg));
        return;
    }
    auto& last = lastSeq[msg.srcIndex];
    if (msg.seq <= last) {
        throw ProtocolError("out of order message from index " +
                            std::to_string(msg.srcIndex));
    }
    last = msg.seq;
    bySender[msg.srcIndex].push_back(std::move(msg));
}

std::optional<Message> IndexQueueSet::dequeue(int srcIndex)
{
    auto it = bySender.find(srcIndex);
    if (it == bySender.end() || it->second.empty()) {
        return std::nullopt;
    }
    Message m = std::move(it->second.front());
    it->second.pop_front();
    return m;
}

std::optional<Message> IndexQueueSet::dequeueCollective()
{
    if (collective.empty()) {
        return std::nullopt;
    }
    Message m = std::move(collective.front());
    collective.pop_front();
    return m;
}

bool IndexQueueSet::hasFrom(int srcIndex) const
{
    auto it = bySender.find(srcIndex);
    return it != bySender.end() && !it->second.empty();
}

size_t IndexQueueSet::pending() const
{
    size_t n = collective.size();
    for (const auto& [src, q] : bySender) {
        n += q.size();
    }
    return n;
}

}
