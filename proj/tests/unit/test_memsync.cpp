#include <catch_amalgamated.hpp>

#include "common/Gen.h"

#include <gransim/guest/Interpreter.h>
#include <gransim/memsync/SharedRegion.h>
#include <gransim/memsync/SyncPrimitives.h>

#include <deque>
#include <set>

using namespace gransim;
using namespace gransim::memsync;
using gransim::snapshot::PAGE_SIZE;
using gransim::test::Gen;

namespace {

constexpr size_t PAGES = 4;

struct Fixture
{
    SharedRegion region;
    std::vector<guest::Granule> granules;

    Fixture(const std::vector<NodeId>& placement)
      : region(1, placement.front(), snapshot::Snapshot(PAGES))
    {
        for (size_t i = 0; i < placement.size(); i++) {
            NodeId n = placement[i];
            if (!region.hasReplica(n)) {
                region.addReplica(n);
            }
            guest::Granule g;
            g.id = i;
            g.appId = 1;
            g.groupIndex = static_cast<int>(i);
            g.semantics = guest::Semantics::Thread;
            g.node = n;
            g.memory = region.replica(n).working;
            g.tracker = snapshot::DirtyTracker(PAGES);
            granules.push_back(std::move(g));
        }
    }

    std::vector<guest::Granule*> members()
    {
        std::vector<guest::Granule*> out;
        for (auto& g : granules) {
            out.push_back(&g);
        }
        return out;
    }

    void arriveAll()
    {
        for (auto& g : granules) {
            g.setStatus(guest::GranuleStatus::BlockedBarrier);
        }
    }
};

}

TEST_CASE("Replicas share a working buffer per node", "[memsync]")
{
    Fixture f({ 0, 0, 1 });
    REQUIRE(f.granules[0].memory == f.granules[1].memory);
    REQUIRE(f.granules[0].memory != f.granules[2].memory);
    REQUIRE(f.region.replicaNodes() == std::vector<NodeId>{ 0, 1 });
    REQUIRE(f.region.coherent());
}

TEST_CASE("Barrier sync merges plain writes and sums", "[memsync]")
{
    Fixture f({ 0, 0, 1, 2 });
    snapshot::MergeOp sum{ snapshot::MergeKind::Sum, snapshot::DataType::Int64 };
    f.region.registerReduce({ 0, 8, sum });

    // Every granule adds its index + 1 and writes its own slot
    for (auto& g : f.granules) {
        int64_t v = loadAs<int64_t>(g.mem(), 0);
        guest::writeMemory(g, 0, toBytes<int64_t>(v + g.groupIndex + 1));
        guest::writeMemory(g, 64 + 8 * g.groupIndex,
                           toBytes<int64_t>(100 + g.groupIndex));
    }
    f.arriveAll();
    auto stats = barrierSync(f.region, f.members());
    REQUIRE(stats.diffsExchanged > 0);
    REQUIRE(f.region.coherent());

    const auto& main = f.region.mainSnapshot().memory();
    REQUIRE(loadAs<int64_t>(main, 0) == 1 + 2 + 3 + 4);
    for (int i = 0; i < 4; i++) {
        REQUIRE(loadAs<int64_t>(main, 64 + 8 * i) == 100 + i);
    }
    for (auto& g : f.granules) {
        REQUIRE(g.status == guest::GranuleStatus::Runnable);
        REQUIRE(g.tracker.dirtyPages().empty());
    }
}

TEST_CASE("Randomized barrier rounds stay coherent", "[memsync]")
{
    Gen gen(17);
    snapshot::MergeOp sum{ snapshot::MergeKind::Sum, snapshot::DataType::Int64 };
    for (int round = 0; round < 40; round++) {
        int n = static_cast<int>(gen.intIn(1, 8));
        int nodes = static_cast<int>(gen.intIn(1, 4));
        std::vector<NodeId> placement;
        for (int i = 0; i < n; i++) {
            placement.push_back(static_cast<NodeId>(gen.intIn(0, nodes - 1)));
        }
        Fixture f(placement);
        f.region.registerReduce({ 0, 8, sum });
        Bytes expected(PAGES * PAGE_SIZE, 0);
        int64_t counter = 0;

        for (int barrier = 0; barrier < 3; barrier++) {
            for (auto& g : f.granules) {
                // Each granule owns a private 512-byte stripe
                size_t stripe = 4096 + 512 * g.groupIndex;
                int writes = static_cast<int>(gen.intIn(0, 4));
                for (int w = 0; w < writes; w++) {
                    size_t off = stripe + gen.index(500);
                    Bytes data = gen.bytes(gen.intIn(1, 12));
                    guest::writeMemory(g, off, data);
                    std::copy(data.begin(), data.end(), expected.begin() + off);
                }
                int64_t add = gen.intIn(-5, 5);
                int64_t v = loadAs<int64_t>(g.mem(), 0);
                guest::writeMemory(g, 0, toBytes<int64_t>(v + add));
                counter += add;
            }
            f.arriveAll();
            barrierSync(f.region, f.members());
            storeAs<int64_t>(expected, 0, counter);
            REQUIRE(f.region.coherent());
            REQUIRE(std::ranges::equal(f.region.mainSnapshot().memory(),
                                       expected));
        }
    }
}

TEST_CASE("Barrier sync rejects members not at the barrier", "[memsync]")
{
    Fixture f({ 0, 1 });
    f.granules[0].setStatus(guest::GranuleStatus::BlockedBarrier);
    REQUIRE_THROWS_AS(barrierSync(f.region, f.members()), ContractViolation);
}

TEST_CASE("Reduce regions must not overlap", "[memsync]")
{
    SharedRegion region(1, 0, snapshot::Snapshot(1));
    snapshot::MergeOp sum{ snapshot::MergeKind::Sum, snapshot::DataType::Int32 };
    region.registerReduce({ 0, 8, sum });
    REQUIRE_NOTHROW(region.registerReduce({ 0, 8, sum }));
    REQUIRE_THROWS_AS(region.registerReduce({ 4, 8, sum }), ConfigError);
    REQUIRE(region.mergeRegions().size() == 1);
}

TEST_CASE("Node trackers union member pages", "[memsync]")
{
    Fixture f({ 0, 0, 1 });
    f.granules[0].tracker.markPage(0);
    f.granules[1].tracker.markPage(2);
    f.granules[2].tracker.markPage(3);
    auto t = nodeTracker(f.members(), 0, PAGES);
    REQUIRE(t.dirtyPages() == std::vector<size_t>{ 0, 2 });
}

TEST_CASE("Mutex grants are FIFO", "[memsync]")
{
    MutexTable table;
    REQUIRE(table.lock(1, 10));
    REQUIRE_FALSE(table.lock(1, 11));
    REQUIRE_FALSE(table.lock(1, 12));
    REQUIRE_THROWS_AS(table.lock(1, 10), ProtocolError);
    REQUIRE_THROWS_AS(table.unlock(1, 11), ProtocolError);
    REQUIRE(table.unlock(1, 10) == GranuleId{ 11 });
    REQUIRE(table.holder(1) == GranuleId{ 11 });
    REQUIRE(table.unlock(1, 11) == GranuleId{ 12 });
    REQUIRE_FALSE(table.unlock(1, 12).has_value());
    REQUIRE_FALSE(table.holder(1).has_value());

    // Property: random lock/unlock sequences keep one holder and FIFO order
    Gen gen(8);
    MutexTable t2;
    std::deque<GranuleId> model;
    std::set<GranuleId> queued;
    for (int step = 0; step < 2000; step++) {
        GranuleId g = gen.index(6);
        if (!queued.contains(g) && gen.chance(0.6)) {
            bool granted = t2.lock(3, g);
            REQUIRE(granted == model.empty());
            model.push_back(g);
            queued.insert(g);
        } else if (!model.empty()) {
            GranuleId h = model.front();
            auto next = t2.unlock(3, h);
            model.pop_front();
            queued.erase(h);
            REQUIRE(next == (model.empty() ? std::optional<GranuleId>{}
                                           : model.front()));
        }
    }
}

TEST_CASE("Latches count down and release waiters", "[memsync]")
{
    LatchTable latches;
    latches.create(1, 2);
    REQUIRE_THROWS_AS(latches.create(1, 2), ProtocolError);
    REQUIRE_THROWS_AS(latches.create(2, -1), ProtocolError);
    REQUIRE_FALSE(latches.wait(1, 7));
    REQUIRE_FALSE(latches.wait(1, 8));
    REQUIRE(latches.decrement(1).empty());
    REQUIRE(latches.decrement(1) == std::vector<GranuleId>{ 7, 8 });
    REQUIRE(latches.counter(1) == 0);
    REQUIRE(latches.wait(1, 9));
    REQUIRE_THROWS_AS(latches.decrement(1), ProtocolError);
    REQUIRE_THROWS_AS(latches.decrement(5), ProtocolError);
}
