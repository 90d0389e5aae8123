#pragma once

#include <gransim/guest/Program.h>
#include <gransim/harness/Trace.h>

#include <string>

namespace gransim::harness {

struct ProgramParams
{
    int parallelism = 1;
    // Total WORK ticks across all granules
    uint64_t workUnits = 0;
    int iterations = 10;
    // Bytes all-reduced each iteration, a multiple of 8
    size_t vectorBytes = 8;
    size_t memoryPages = 1;
};

// Processes that alternate WORK with an all-reduce of an int64 vector
std::string mpiComputeSource(const ProgramParams& params);

// Same shape with little WORK between all-reduces over a larger vector
std::string mpiNetworkSource(const ProgramParams& params);

// Threads that each fill their own tile, bump a shared Sum counter and meet
// at a barrier every iteration
std::string ompDgemmSource(const ProgramParams& params);

// Resolves a job's program: "builtin:mpi-compute", "builtin:mpi-network",
// "builtin:omp-dgemm", or a DSL file path (relative paths against baseDir)
guest::GuestProgram resolveProgram(const Job& job, const std::string& baseDir);

}
