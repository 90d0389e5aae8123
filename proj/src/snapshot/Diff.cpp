#include <gransim/snapshot/Snapshot.h>

#include <algorithm>

namespace gransim::snapshot {

void validateMergeRegions(const std::vector<MergeRegion>& regions,
                          size_t memorySize)
{
    std::vector<MergeRegion> sorted = regions;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.offset < b.offset;
    });
    for (size_t i = 0; i < sorted.size(); i++) {
        const auto& r = sorted[i];
        r.op.validate();
        if (r.length == 0 || r.end() > memorySize) {
            throw ConfigError("merge region out of bounds");
        }
        if (r.op.isArithmetic() && r.length % dtypeWidth(r.op.dtype) != 0) {
            throw ConfigError("merge region length not a multiple of " +
                              std::string(toString(r.op.dtype)));
        }
        if (i > 0 && sorted[i - 1].end() > r.offset) {
            throw ConfigError("overlapping merge regions at offset " +
                              std::to_string(r.offset));
        }
    }
}

std::vector<ByteDiff> computeDiffs(ByteSpan current,
                                   const DirtyTracker& tracker,
                                   ByteSpan base,
                                   const std::vector<MergeRegion>& regions)
{
    if (current.size() != base.size()) {
        throw ContractViolation("diffing memories of different sizes");
    }
    validateMergeRegions(regions, current.size());

    std::vector<MergeRegion> sorted = regions;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.offset < b.offset;
    });

    std::vector<ByteDiff> diffs;
    std::vector<bool> regionChanged(sorted.size(), false);

    // Index of the merge region containing byte i, or -1
    size_t regionCursor = 0;
    auto regionOf = [&](size_t i) -> long {
        while (regionCursor < sorted.size() &&
               sorted[regionCursor].end() <= i) {
            regionCursor++;
        }
        if (regionCursor < sorted.size() && sorted[regionCursor].offset <= i) {
            return static_cast<long>(regionCursor);
        }
        return -1;
    };

    auto flushRun = [&](size_t start, size_t end) {
        if (end > start) {
            ByteDiff d;
            d.offset = start;
            d.payload.assign(current.begin() + start, current.begin() + end);
            diffs.push_back(std::move(d));
        }
    };

    bool inRun = false;
    size_t runStart = 0;
    for (size_t page : tracker.dirtyPages()) {
        size_t pageStart = page * PAGE_SIZE;
        size_t pageEnd = std::min(pageStart + PAGE_SIZE, current.size());

        for (size_t i = pageStart; i < pageEnd; i++) {
            long region = regionOf(i);
            bool differs = current[i] != base[i];

            if (region >= 0) {
                if (differs) {
                    regionChanged[region] = true;
                }
                if (inRun) {
                    flushRun(runStart, i);
                    inRun = false;
                }
                continue;
            }

            if (differs && !inRun) {
                inRun = true;
                runStart = i;
            } else if (!differs && inRun) {
                flushRun(runStart, i);
                inRun = false;
            }
        }

        // A run touching the page end only carries on if the next page is
        // dirty too; otherwise close it here
        bool nextDirty =
          page + 1 < tracker.pageCount() && tracker.isDirty(page + 1);
        if (inRun && !nextDirty) {
            flushRun(runStart, pageEnd);
            inRun = false;
        }
    }
    if (inRun) {
        flushRun(runStart, current.size());
    }

    for (size_t r = 0; r < sorted.size(); r++) {
        if (!regionChanged[r]) {
            continue;
        }
        const auto& region = sorted[r];
        ByteDiff d;
        d.offset = region.offset;
        d.op = region.op;
        d.payload.assign(current.begin() + region.offset,
                         current.begin() + region.end());
        if (region.op.isArithmetic()) {
            d.base.assign(base.begin() + region.offset,
                          base.begin() + region.end());
        }
        diffs.push_back(std::move(d));
    }

    std::sort(diffs.begin(), diffs.end(), [](const auto& a, const auto& b) {
        return a.offset < b.offset;
    });
    return diffs;
}

void applyDiffsTo(MutableByteSpan memory, const std::vector<ByteDiff>& diffs)
{
    for (const auto& d : diffs) {
        if (d.offset > memory.size() ||
            d.payload.size() > memory.size() - d.offset) {
            throw ProtocolError("diff outside replica memory");
        }
        mergeBytes(
          d.op, memory.subspan(d.offset, d.payload.size()), d.base, d.payload);
    }
}

}
