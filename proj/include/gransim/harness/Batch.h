#pragma once

#include <gransim/cluster/ClusterConfig.h>
#include <gransim/harness/Trace.h>

#include <string>
#include <utility>
#include <vector>

namespace gransim::harness {

using cluster::Tick;

struct BatchMode
{
    bool granular = true;
    // Containers per node in fixed mode
    int containersPerNode = 1;

    std::string name() const;
    bool operator==(const BatchMode&) const = default;
};

// "granular" or "fixed-k" with k in {1, 2, 4, 8}
BatchMode parseMode(std::string_view text);

struct JobRecord
{
    uint64_t jobId = 0;
    Tick start = 0;
    Tick end = 0;
    uint64_t computeTicks = 0;
    bool failed = false;
};

struct IdleSample
{
    Tick tick = 0;
    int idleCores = 0;

    bool operator==(const IdleSample&) const = default;
};

struct BatchReport
{
    std::string mode;
    Tick makespan = 0;
    int totalCores = 0;
    // In trace order
    std::vector<JobRecord> jobs;
    // Cores running no granule, from each tick on, one sample per change
    std::vector<IdleSample> idle;
    // Ticks spent executing guest instructions; identical across modes
    uint64_t computeCoreTicks = 0;
    // Core-ticks with a live granule on the core, whether computing or
    // waiting on communication
    uint64_t occupiedCoreTicks = 0;
    uint64_t migrations = 0;
    uint64_t failedJobs = 0;
};

struct BatchOptions
{
    // Directory against which relative program paths resolve
    std::string programDir;
    // Granular mode consolidates fragmented apps at barrier points
    bool migration = true;
};

// Strict FIFO: the head job starts as soon as the capacity it needs is free
// under the mode's rules; later jobs wait behind it. Throws ConfigError up
// front if any job can never fit.
BatchReport runBatch(const JobTrace& trace,
                     const BatchMode& mode,
                     const cluster::ClusterConfig& config,
                     const BatchOptions& options = {});

// Idle fraction over [0, makespan), weighted by time
double medianIdleFraction(const std::vector<IdleSample>& idle,
                          int totalCores,
                          Tick makespan);

// Σ idle cores × ticks over [0, makespan)
uint64_t idleCoreTicks(const std::vector<IdleSample>& idle, Tick makespan);

std::string makespanCsv(const BatchReport& report);
std::string idleCsv(const BatchReport& report);
std::string execCsv(const BatchReport& report);

// Writes makespan.csv, idle.csv and exec.csv into dir (created if needed)
void emitMetrics(const BatchReport& report, const std::string& dir);

}
