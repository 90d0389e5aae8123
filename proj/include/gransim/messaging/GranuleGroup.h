#pragma once

#include <gransim/guest/Granule.h>

#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace gransim::messaging {

using guest::AppId;
using guest::NodeId;
using GroupId = uint64_t;

enum class MessageKind : uint8_t
{
    PointToPoint,
    Collective,
};

struct Message
{
    GroupId group = 0;
    int srcIndex = 0;
    int dstIndex = 0;
    MessageKind kind = MessageKind::PointToPoint;
    Bytes payload;
    uint64_t seq = 0;
};

using AddressTable = std::map<int, NodeId>;

// Index-addressed set of granules. Every node hosting a member keeps a replica
// of the address table; the leader of a node is its lowest hosted index.
class GranuleGroup
{
  public:
    GranuleGroup() = default;
    GranuleGroup(GroupId id, AppId app, const std::vector<NodeId>& placement);

    GroupId groupId() const { return id; }
    AppId appId() const { return app; }
    int size() const { return static_cast<int>(table.size()); }

    bool contains(int index) const { return table.contains(index); }
    // Throws ProtocolError for unknown indexes
    NodeId nodeOf(int index) const;
    const AddressTable& addressTable() const { return table; }

    // Replica held by a participating node
    const AddressTable& tableOn(NodeId node) const;
    bool tablesConverged() const;

    std::vector<NodeId> nodes() const;
    std::vector<int> indexesOn(NodeId node) const;
    std::map<NodeId, int> leaders() const;
    int leaderOf(NodeId node) const;
    bool isLeader(int index) const;

    // Rehomes index and refreshes every node's replica, creating replicas on
    // newly involved nodes and dropping them on nodes left with no member
    void move(int index, NodeId to);

    // Next per-(src, dst) sequence number
    uint64_t nextSeq(int src, int dst);

  private:
    void replicate();

    GroupId id = 0;
    AppId app = 0;
    AddressTable table;
    std::map<NodeId, AddressTable> replicas;
    std::map<std::pair<int, int>, uint64_t> seqs;
};

// Indexes follow list order (the spawning granule first). Throws ConfigError
// for an empty list or granules of different apps.
GranuleGroup createGroup(GroupId id,
                         const std::vector<const guest::Granule*>& granules);

// Buffered queues for one group index: one FIFO per sender plus a collective
// channel
class IndexQueueSet
{
  public:
    // Throws ProtocolError if seq does not increase for the sender
    void enqueue(Message msg);

    std::optional<Message> dequeue(int srcIndex);
    std::optional<Message> dequeueCollective();

    bool hasFrom(int srcIndex) const;
    bool hasCollective() const { return !collective.empty(); }
    size_t pending() const;

  private:
    std::map<int, std::deque<Message>> bySender;
    std::deque<Message> collective;
    std::map<int, uint64_t> lastSeq;
};

// Folds contributions in the given order with a Sum/Multiply reduction
Bytes foldContributions(const snapshot::MergeOp& op,
                        const std::vector<Bytes>& orderedContributions);

}
