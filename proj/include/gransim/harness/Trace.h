#pragma once

#include <gransim/cluster/ClusterConfig.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gransim::harness {

enum class JobKind : uint8_t
{
    Mpi,
    Omp,
};

std::string_view toString(JobKind kind);
JobKind parseJobKind(std::string_view text);

struct Job
{
    uint64_t id = 0;
    JobKind kind = JobKind::Mpi;
    int parallelism = 1;
    // "builtin:<name>" or a path to a workload DSL file
    std::string program;
    uint64_t workUnits = 0;
    cluster::Tick arrival = 0;

    bool operator==(const Job&) const = default;
};

using JobTrace = std::vector<Job>;

struct TraceSpec
{
    size_t count = 100;
    JobKind kind = JobKind::Mpi;
    int minParallelism = 4;
    int maxParallelism = 16;
    uint64_t seed = 0;
    uint64_t minWork = 60000;
    uint64_t maxWork = 60000;
};

// Parallelism and work are uniform over their inclusive ranges; every job
// arrives at tick 0. Throws ConfigError for empty ranges.
JobTrace generateTrace(const TraceSpec& spec);

std::string traceToCsv(const JobTrace& trace);
// Throws ParseError on malformed rows
JobTrace traceFromCsv(std::string_view text);

void writeTrace(const JobTrace& trace, const std::string& path);
JobTrace readTrace(const std::string& path);

}
