#pragma once

#include <gransim/snapshot/MergeOp.h>

#include <cstdint>
#include <variant>

namespace gransim::guest {

struct SpawnThreads
{
    int count;
    uint32_t bodyLabel;
};
struct Fork
{
    int count;
    uint32_t bodyLabel;
};
struct Join
{};
struct Barrier
{};
struct MutexLock
{
    int64_t id;
};
struct MutexUnlock
{
    int64_t id;
};
struct AtomicUpdate
{
    size_t offset;
    snapshot::MergeOp op;
    int64_t intImm;
    double floatImm;
};
struct LatchInit
{
    int64_t id;
    int64_t count;
};
struct LatchDecrement
{
    int64_t id;
};
struct LatchWait
{
    int64_t id;
};
struct Send
{
    int dstIndex;
    size_t offset;
    size_t length;
};
struct Recv
{
    int srcIndex;
    size_t offset;
};
struct AllReduce
{
    size_t offset;
    size_t length;
    snapshot::MergeOp op;
};
struct Broadcast
{
    int rootIndex;
    size_t offset;
    size_t length;
};
struct RegisterReduce
{
    size_t offset;
    size_t length;
    snapshot::MergeOp op;
};
struct Exit
{};

using ControlPointEvent = std::variant<SpawnThreads,
                                       Fork,
                                       Join,
                                       Barrier,
                                       MutexLock,
                                       MutexUnlock,
                                       AtomicUpdate,
                                       LatchInit,
                                       LatchDecrement,
                                       LatchWait,
                                       Send,
                                       Recv,
                                       AllReduce,
                                       Broadcast,
                                       RegisterReduce,
                                       Exit>;

// Barrier-type events block every member of the group and are the only
// places a migration may run
inline bool isBarrierType(const ControlPointEvent& ev)
{
    return std::holds_alternative<Barrier>(ev) ||
           std::holds_alternative<AllReduce>(ev);
}

}
