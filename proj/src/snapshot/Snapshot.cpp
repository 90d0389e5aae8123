#include <gransim/snapshot/Snapshot.h>

#include <algorithm>

namespace gransim::snapshot {

void RangeSet::add(size_t offset, size_t length)
{
    if (length == 0) {
        return;
    }
    size_t start = offset;
    size_t end = offset + length;

    // Absorb any range that overlaps or touches [start, end)
    auto it = ranges.upper_bound(start);
    if (it != ranges.begin()) {
        auto prev = std::prev(it);
        if (prev->second >= start) {
            it = prev;
        }
    }
    while (it != ranges.end() && it->first <= end) {
        start = std::min(start, it->first);
        end = std::max(end, it->second);
        it = ranges.erase(it);
    }
    ranges.emplace(start, end);
}

std::vector<ByteRange> RangeSet::toVector() const
{
    std::vector<ByteRange> out;
    out.reserve(ranges.size());
    for (const auto& [start, end] : ranges) {
        out.push_back({ start, end - start });
    }
    return out;
}

size_t RangeSet::totalBytes() const
{
    size_t total = 0;
    for (const auto& [start, end] : ranges) {
        total += end - start;
    }
    return total;
}

Snapshot::Snapshot(size_t pageCount)
  : data(pageCount * PAGE_SIZE, 0)
{}

Snapshot::Snapshot(Bytes memory, std::vector<int64_t> globals, ExecRegs regs)
  : data(std::move(memory))
  , globalValues(std::move(globals))
  , regs(std::move(regs))
{
    if (data.size() % PAGE_SIZE != 0) {
        throw ContractViolation("snapshot memory not a whole number of pages");
    }
}

std::vector<ByteRange> Snapshot::applyDiffs(const std::vector<ByteDiff>& diffs)
{
    // Validate everything first so a bad batch leaves memory untouched
    for (const auto& d : diffs) {
        if (d.offset > data.size() || d.payload.size() > data.size() - d.offset) {
            throw ProtocolError("diff at offset " + std::to_string(d.offset) +
                                " outside snapshot of " +
                                std::to_string(data.size()) + " bytes");
        }
        d.op.validate();
    }

    std::vector<ByteRange> updated;
    updated.reserve(diffs.size());
    for (const auto& d : diffs) {
        MutableByteSpan target(data.data() + d.offset, d.payload.size());
        mergeBytes(d.op, target, d.base, d.payload);
        pending.add(d.offset, d.payload.size());
        updated.push_back({ d.offset, d.payload.size() });
    }

    updateVersion++;
    return updated;
}

std::vector<ByteDiff> Snapshot::drainBroadcastDiffs()
{
    std::vector<ByteDiff> out;
    for (const auto& r : pending.toVector()) {
        ByteDiff d;
        d.offset = r.offset;
        d.payload.assign(data.begin() + r.offset, data.begin() + r.end());
        out.push_back(std::move(d));
    }
    pending.clear();
    return out;
}

void Snapshot::writeRaw(size_t offset, ByteSpan bytes)
{
    if (offset + bytes.size() > data.size()) {
        throw ProtocolError("raw write outside snapshot");
    }
    std::copy(bytes.begin(), bytes.end(), data.begin() + offset);
}

DirtyTracker::DirtyTracker(size_t pageCount)
  : dirty(pageCount, false)
{}

void DirtyTracker::markWrite(size_t offset, size_t length)
{
    if (length == 0) {
        return;
    }
    size_t first = offset / PAGE_SIZE;
    size_t last = (offset + length - 1) / PAGE_SIZE;
    for (size_t p = first; p <= last; p++) {
        markPage(p);
    }
}

void DirtyTracker::markPage(size_t page)
{
    if (page >= dirty.size()) {
        throw ContractViolation("dirty page " + std::to_string(page) +
                                " beyond tracked memory");
    }
    dirty[page] = true;
}

void DirtyTracker::merge(const DirtyTracker& other)
{
    if (dirty.size() < other.dirty.size()) {
        dirty.resize(other.dirty.size(), false);
    }
    for (size_t p = 0; p < other.dirty.size(); p++) {
        if (other.dirty[p]) {
            dirty[p] = true;
        }
    }
}

void DirtyTracker::reset()
{
    std::fill(dirty.begin(), dirty.end(), false);
}

std::vector<size_t> DirtyTracker::dirtyPages() const
{
    std::vector<size_t> out;
    for (size_t p = 0; p < dirty.size(); p++) {
        if (dirty[p]) {
            out.push_back(p);
        }
    }
    return out;
}

}
