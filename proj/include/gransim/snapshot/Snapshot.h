#pragma once

#include <gransim/snapshot/MergeOp.h>
#include <gransim/util/Bytes.h>

#include <cstdint>
#include <map>
#include <vector>

namespace gransim::snapshot {

inline constexpr size_t PAGE_SIZE = 4096;

struct ExecRegs
{
    uint32_t programCounter = 0;
    uint32_t stackPointer = 0;
    std::vector<uint32_t> callStack;

    bool operator==(const ExecRegs&) const = default;
};

struct ByteRange
{
    size_t offset = 0;
    size_t length = 0;

    size_t end() const { return offset + length; }
    bool operator==(const ByteRange&) const = default;
};

// Ordered set of disjoint, non-adjacent half-open ranges
class RangeSet
{
  public:
    void add(size_t offset, size_t length);
    void clear() { ranges.clear(); }
    bool empty() const { return ranges.empty(); }
    std::vector<ByteRange> toVector() const;
    size_t totalBytes() const;

  private:
    // start -> end
    std::map<size_t, size_t> ranges;
};

struct ByteDiff
{
    size_t offset = 0;
    // B1: the bytes after the update
    Bytes payload;
    // B0: the bytes before the update, only for arithmetic merges
    Bytes base;
    MergeOp op;

    bool operator==(const ByteDiff&) const = default;
};

class Snapshot
{
  public:
    Snapshot() = default;
    explicit Snapshot(size_t pageCount);
    Snapshot(Bytes memory, std::vector<int64_t> globals, ExecRegs regs);

    ByteSpan memory() const { return data; }
    size_t size() const { return data.size(); }
    size_t pageCount() const { return data.size() / PAGE_SIZE; }

    const std::vector<int64_t>& globals() const { return globalValues; }
    const ExecRegs& execRegs() const { return regs; }

    uint64_t version() const { return updateVersion; }
    const RangeSet& pendingBroadcast() const { return pending; }

    // Merges every diff into memory. Bumps the version once per call and
    // records the touched ranges for the next replica broadcast.
    std::vector<ByteRange> applyDiffs(const std::vector<ByteDiff>& diffs);

    // Overwrite diffs with the current bytes of everything updated since the
    // last drain
    std::vector<ByteDiff> drainBroadcastDiffs();

    // Direct write used when seeding snapshots in tests and tools
    void writeRaw(size_t offset, ByteSpan bytes);

  private:
    Bytes data;
    std::vector<int64_t> globalValues;
    ExecRegs regs;
    uint64_t updateVersion = 0;
    RangeSet pending;
};

class DirtyTracker
{
  public:
    DirtyTracker() = default;
    explicit DirtyTracker(size_t pageCount);

    void markWrite(size_t offset, size_t length);
    void markPage(size_t page);
    void merge(const DirtyTracker& other);
    void reset();

    bool isDirty(size_t page) const { return dirty.at(page); }
    std::vector<size_t> dirtyPages() const;
    size_t pageCount() const { return dirty.size(); }

  private:
    std::vector<bool> dirty;
};

struct MergeRegion
{
    size_t offset = 0;
    size_t length = 0;
    MergeOp op;

    size_t end() const { return offset + length; }
    bool operator==(const MergeRegion&) const = default;
};

// Throws ConfigError if any two regions overlap or a region is invalid
void validateMergeRegions(const std::vector<MergeRegion>& regions,
                          size_t memorySize);

// Byte-wise comparison of the dirty pages of current against base. Plain
// changes become maximal Overwrite runs; a merge region with any changed byte
// becomes a single diff carrying the region's op and its base bytes.
std::vector<ByteDiff> computeDiffs(ByteSpan current,
                                   const DirtyTracker& tracker,
                                   ByteSpan base,
                                   const std::vector<MergeRegion>& regions);

// Applies diffs directly to a byte buffer (replica update). Same merge rules
// as Snapshot::applyDiffs without the bookkeeping.
void applyDiffsTo(MutableByteSpan memory, const std::vector<ByteDiff>& diffs);

}
