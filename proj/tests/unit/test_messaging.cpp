#include <catch_amalgamated.hpp>

#include "common/Gen.h"

#include <gransim/messaging/GranuleGroup.h>

using namespace gransim;
using namespace gransim::messaging;
using gransim::test::Gen;

TEST_CASE("Groups index granules in list order", "[messaging]")
{
    GranuleGroup group(1, 9, { 2, 0, 2, 1, 0 });
    REQUIRE(group.size() == 5);
    REQUIRE(group.nodeOf(0) == 2);
    REQUIRE(group.nodes() == std::vector<NodeId>{ 0, 1, 2 });
    REQUIRE(group.indexesOn(0) == std::vector<int>{ 1, 4 });
    REQUIRE(group.leaderOf(0) == 1);
    REQUIRE(group.leaderOf(2) == 0);
    REQUIRE(group.isLeader(3));
    REQUIRE_FALSE(group.isLeader(4));
    REQUIRE(group.leaders() == std::map<NodeId, int>{ { 0, 1 }, { 1, 3 }, { 2, 0 } });
    REQUIRE_THROWS_AS(group.nodeOf(5), ProtocolError);
    REQUIRE(group.tablesConverged());
}

TEST_CASE("Moving an index refreshes every table replica", "[messaging]")
{
    GranuleGroup group(1, 9, { 0, 0, 1 });
    group.move(2, 0);
    REQUIRE(group.nodes() == std::vector<NodeId>{ 0 });
    REQUIRE(group.tableOn(0).at(2) == 0);
    REQUIRE_THROWS(group.tableOn(1));
    group.move(0, 3);
    REQUIRE(group.leaderOf(3) == 0);
    REQUIRE(group.leaderOf(0) == 1);
    REQUIRE(group.tablesConverged());

    // Property: after random moves every replica matches the table
    Gen gen(4);
    GranuleGroup g2(2, 9, { 0, 1, 2, 3, 0, 1 });
    for (int i = 0; i < 200; i++) {
        g2.move(static_cast<int>(gen.index(6)), static_cast<NodeId>(gen.index(4)));
        REQUIRE(g2.tablesConverged());
        for (NodeId n : g2.nodes()) {
            REQUIRE(g2.tableOn(n) == g2.addressTable());
            REQUIRE(!g2.indexesOn(n).empty());
        }
    }
}

TEST_CASE("Group creation checks its members", "[messaging]")
{
    guest::Granule a;
    a.appId = 1;
    a.node = 3;
    guest::Granule b;
    b.appId = 2;
    REQUIRE_THROWS_AS(createGroup(1, {}), ConfigError);
    REQUIRE_THROWS_AS(createGroup(1, { &a, &b }), ConfigError);
    auto g = createGroup(1, { &a });
    REQUIRE(g.nodeOf(0) == 3);
    REQUIRE(g.appId() == 1);
}

TEST_CASE("Sequence numbers are per sender and receiver", "[messaging]")
{
    GranuleGroup group(1, 1, { 0, 0, 0 });
    REQUIRE(group.nextSeq(0, 1) == 1);
    REQUIRE(group.nextSeq(0, 1) == 2);
    REQUIRE(group.nextSeq(0, 2) == 1);
    REQUIRE(group.nextSeq(1, 0) == 1);
}

TEST_CASE("Index queues keep per-sender FIFO order", "[messaging]")
{
    Gen gen(6);
    IndexQueueSet q;
    std::map<int, uint64_t> seqs;
    std::map<int, std::deque<Bytes>> model;
    for (int step = 0; step < 1000; step++) {
        int src = static_cast<int>(gen.index(4));
        if (gen.chance(0.55)) {
            Message m;
            m.srcIndex = src;
            m.seq = ++seqs[src];
            m.payload = gen.bytes(4);
            model[src].push_back(m.payload);
            q.enqueue(m);
        } else {
            auto m = q.dequeue(src);
            REQUIRE(m.has_value() == !model[src].empty());
            if (m) {
                REQUIRE(m->payload == model[src].front());
                model[src].pop_front();
            }
        }
    }
    size_t left = 0;
    for (auto& [src, d] : model) {
        left += d.size();
        REQUIRE(q.hasFrom(src) == !d.empty());
    }
    REQUIRE(q.pending() == left);

    Message stale;
    stale.srcIndex = 0;
    stale.seq = seqs[0];
    REQUIRE_THROWS_AS(q.enqueue(stale), ProtocolError);
}

TEST_CASE("Collective channel is separate", "[messaging]")
{
    IndexQueueSet q;
    Message c;
    c.kind = MessageKind::Collective;
    c.payload = { 1 };
    q.enqueue(c);
    REQUIRE_FALSE(q.hasFrom(0));
    REQUIRE(q.hasCollective());
    REQUIRE(q.dequeueCollective()->payload == Bytes{ 1 });
    REQUIRE_FALSE(q.dequeueCollective().has_value());
}

TEST_CASE("Contributions fold in order", "[messaging]")
{
    snapshot::MergeOp sum{ snapshot::MergeKind::Sum, snapshot::DataType::Int32 };
    snapshot::MergeOp mul{ snapshot::MergeKind::Multiply,
                           snapshot::DataType::Int64 };
    std::vector<Bytes> parts = { toBytes<int32_t>(3),
                                 toBytes<int32_t>(4),
                                 toBytes<int32_t>(-2) };
    REQUIRE(loadAs<int32_t>(foldContributions(sum, parts)) == 5);
    std::vector<Bytes> mparts = { toBytes<int64_t>(3), toBytes<int64_t>(-7) };
    REQUIRE(loadAs<int64_t>(foldContributions(mul, mparts)) == -21);
    snapshot::MergeOp bad{ snapshot::MergeKind::Divide,
                           snapshot::DataType::Int32 };
    REQUIRE_THROWS_AS(foldContributions(bad, parts), ConfigError);
}
