#pragma once

#include <gransim/cluster/ClusterConfig.h>

#include <optional>
#include <string>
#include <string_view>

namespace gransim::harness {

enum class BenchProfile : uint8_t
{
    Compute,
    Network,
};

BenchProfile parseProfile(std::string_view text);
std::string_view toString(BenchProfile profile);

struct MigrationBenchReport
{
    BenchProfile profile = BenchProfile::Network;
    // Unset when migration is disabled
    std::optional<double> migrateAt;
    // Fragmented 4+4 run that never migrates
    cluster::Tick referenceTicks = 0;
    cluster::Tick migratedTicks = 0;
    // All 8 granules on one node from the start
    cluster::Tick colocatedTicks = 0;
    double speedup = 1.0;
    double colocatedSpeedup = 1.0;
    uint64_t granulesMigrated = 0;
};

// Eight granules split 4+4 over two 8-core nodes while another tenant holds
// the remaining cores. At the first barrier past migrateAt of the run the
// tenant on the main node leaves and the app may consolidate. Throws
// ConfigError unless 0 < migrateAt < 1.
MigrationBenchReport runMigrationScenario(BenchProfile profile,
                                          std::optional<double> migrateAt);

std::string migrationReportCsv(const MigrationBenchReport& report);

}
