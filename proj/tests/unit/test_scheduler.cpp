#include <catch_amalgamated.hpp>

#include "common/Gen.h"

#include <gransim/scheduler/Scheduler.h>

using namespace gransim;
using namespace gransim::scheduler;
using gransim::test::Gen;

TEST_CASE("Node reservations are per app", "[scheduler]")
{
    NodeResources node(0, 4);
    node.reserve(3, 1);
    REQUIRE(node.freeCores() == 1);
    REQUIRE(node.coresFor(1) == 3);
    REQUIRE_THROWS_AS(node.reserve(2, 2), ReservationError);
    REQUIRE_THROWS_AS(node.release(1, 2), ReservationError);
    REQUIRE_THROWS_AS(node.release(4, 1), ReservationError);
    node.release(3, 1);
    REQUIRE_FALSE(node.hostsApp(1));
    REQUIRE(node.freeCores() == 4);
}

TEST_CASE("Bin-packing starts at the origin", "[scheduler]")
{
    Scheduler s(3, 4);
    s.reserve(0, 1, 9);
    auto placed = s.placeAndReserve(1, 0, 6);
    REQUIRE(placed == std::vector<NodeCount>{ { 0, 3 }, { 1, 3 } });

    // Nodes already hosting the app are preferred over emptier ones
    s.release(0, 1, 9);
    placed = s.place(1, 2, 6);
    REQUIRE(placed == std::vector<NodeCount>{ { 2, 4 }, { 0, 1 }, { 1, 1 } });

    REQUIRE_THROWS_AS(s.place(1, 0, 20), PlacementError);
    REQUIRE_THROWS_AS(s.place(1, 7, 1), ConfigError);
    REQUIRE_THROWS_AS(s.place(1, 0, 0), ConfigError);
}

TEST_CASE("Load balancing spreads granules", "[scheduler]")
{
    Scheduler s(3, 4, PlacementPolicy::LoadBalance);
    s.reserve(1, 2, 5);
    auto placed = s.place(1, 1, 5);
    int total = 0;
    std::map<NodeId, int> counts;
    for (const auto& nc : placed) {
        total += nc.count;
        counts[nc.node] = nc.count;
    }
    REQUIRE(total == 5);
    REQUIRE(counts == std::map<NodeId, int>{ { 0, 3 }, { 2, 2 } });
    REQUIRE(parsePolicy("load-balance") == PlacementPolicy::LoadBalance);
    REQUIRE_THROWS_AS(parsePolicy("random"), ConfigError);
}

TEST_CASE("Reservation storms match a ledger", "[scheduler]")
{
    Gen gen(31);
    Scheduler s(4, 6);
    std::map<std::pair<NodeId, AppId>, int> ledger;
    for (int step = 0; step < 3000; step++) {
        NodeId n = static_cast<NodeId>(gen.index(4));
        AppId app = gen.index(3);
        int k = static_cast<int>(gen.intIn(1, 4));
        int held = ledger[{ n, app }];
        int used = 0;
        for (AppId a = 0; a < 3; a++) {
            used += ledger[{ n, a }];
        }
        switch (gen.intIn(0, 2)) {
            case 0:
                if (used + k > 6) {
                    REQUIRE_THROWS_AS(s.reserve(n, k, app), ReservationError);
                } else {
                    s.reserve(n, k, app);
                    ledger[{ n, app }] += k;
                }
                break;
            case 1:
                if (k > held) {
                    REQUIRE_THROWS_AS(s.release(n, k, app), ReservationError);
                } else {
                    s.release(n, k, app);
                    ledger[{ n, app }] -= k;
                }
                break;
            default: {
                int want = static_cast<int>(gen.intIn(1, 10));
                if (want > s.totalFree()) {
                    REQUIRE_THROWS_AS(s.place(app, n, want), PlacementError);
                    break;
                }
                auto placed = s.placeAndReserve(app, n, want);
                int sum = 0;
                for (const auto& nc : placed) {
                    sum += nc.count;
                    ledger[{ nc.node, app }] += nc.count;
                }
                REQUIRE(sum == want);
            }
        }
        int total = 0;
        for (const auto& node : s.allNodes()) {
            int expect = 0;
            for (AppId a = 0; a < 3; a++) {
                expect += ledger[{ node.nodeId(), a }];
                REQUIRE(node.coresFor(a) == ledger[{ node.nodeId(), a }]);
            }
            REQUIRE(node.coresUsed() == expect);
            REQUIRE(node.freeCores() >= 0);
            total += expect;
        }
        REQUIRE(s.totalUsed() == total);
    }
}

TEST_CASE("Snapshot transfers are cached per version", "[scheduler]")
{
    Scheduler s(2, 2);
    REQUIRE(s.transferSnapshot(1, 3, 0));
    REQUIRE_FALSE(s.transferSnapshot(1, 3, 0));
    REQUIRE(s.transferSnapshot(1, 3, 1));
    REQUIRE(s.snapshotTransfers() == 2);
    REQUIRE(s.node(1).hasSnapshot(3, 1));
}

TEST_CASE("Most available node breaks ties by id", "[scheduler]")
{
    Scheduler s(3, 4);
    REQUIRE(s.mostAvailable() == 0);
    s.reserve(0, 1, 1);
    REQUIRE(s.mostAvailable() == 1);
}
