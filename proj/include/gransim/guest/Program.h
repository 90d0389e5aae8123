#pragma once

#include <gransim/snapshot/MergeOp.h>
#include <gransim/util/Bytes.h>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gransim::guest {

// Number of 64-bit global registers every granule carries
inline constexpr size_t GLOBAL_COUNT = 16;

enum class Opcode : uint8_t
{
    // Pure compute
    Work,
    Write,
    Add,
    Copy,
    Idx,
    Nth,
    // Control flow over globals and the call stack
    SetGlobal,
    DecJumpNotZero,
    Jump,
    BranchIndex,
    Call,
    Ret,
    // Control points
    SpawnThreads,
    Fork,
    Join,
    Barrier,
    Lock,
    Unlock,
    Atomic,
    LatchInit,
    LatchDec,
    LatchWait,
    Send,
    Recv,
    AllReduce,
    Broadcast,
    Reduce,
    Exit,
};

std::string_view mnemonic(Opcode op);
bool isControlPoint(Opcode op);

struct Instruction
{
    Opcode op = Opcode::Exit;
    int64_t a = 0;
    int64_t b = 0;
    int64_t c = 0;
    int64_t intImm = 0;
    double floatImm = 0;
    snapshot::DataType dtype = snapshot::DataType::Raw;
    snapshot::MergeKind kind = snapshot::MergeKind::Overwrite;
    Bytes bytes;
    // Resolved branch target
    uint32_t target = 0;
    // Source text of the immediate, kept so serialization is lossless
    std::string immText;
    uint32_t line = 0;

    bool operator==(const Instruction& o) const
    {
        return op == o.op && a == o.a && b == o.b && c == o.c &&
               intImm == o.intImm && immText == o.immText &&
               dtype == o.dtype && kind == o.kind && bytes == o.bytes &&
               target == o.target;
    }
};

struct StaticData
{
    size_t offset = 0;
    Bytes bytes;

    bool operator==(const StaticData&) const = default;
};

struct GuestProgram
{
    std::vector<Instruction> instructions;
    uint32_t entry = 0;
    size_t memoryPages = 1;
    std::vector<StaticData> staticData;
    // instruction index -> label name, for diagnostics and serialization
    std::map<uint32_t, std::string> labels;

    size_t memorySize() const;
    Bytes initialMemory() const;

    bool operator==(const GuestProgram& o) const
    {
        return instructions == o.instructions && entry == o.entry &&
               memoryPages == o.memoryPages && staticData == o.staticData;
    }
};

// Parses the line-oriented workload DSL. Errors carry the 1-based line.
GuestProgram loadProgram(std::string_view source);
GuestProgram loadProgramFile(const std::string& path);

// Canonical text form; loadProgram(serializeProgram(p)) == p
std::string serializeProgram(const GuestProgram& program);

}
