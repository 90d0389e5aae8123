#include <gransim/memsync/SyncPrimitives.h>
#include <gransim/util/Errors.h>

namespace gransim::memsync {

bool MutexTable::lock(int64_t id, GranuleId g)
{
    auto& m = mutexes[id];
    m.id = id;
    if (m.holder == g) {
        throw ProtocolError("granule " + std::to_string(g) +
                            " already holds mutex " + std::to_string(id));
    }
    if (!m.holder) {
        m.holder = g;
        return true;
    }
    m.waiters.push_back(g);
    return false;
}

std::optional<GranuleId> MutexTable::unlock(int64_t id, GranuleId g)
{
    auto it = mutexes.find(id);
    if (it == mutexes.end() || it->second.holder != g) {
        throw ProtocolError("granule " + std::to_string(g) +
                            " unlocking mutex " + std::to_string(id) +
                            " it does not hold");
    }
    auto& m = it->second;
    m.holder.reset();
    if (!m.waiters.empty()) {
        m.holder = m.waiters.front();
        m.waiters.pop_front();
    }
    return m.holder;
}

std::optional<GranuleId> MutexTable::holder(int64_t id) const
{
    auto it = mutexes.find(id);
    return it == mutexes.end() ? std::nullopt : it->second.holder;
}

const DistMutex& MutexTable::get(int64_t id) const
{
    auto it = mutexes.find(id);
    if (it == mutexes.end()) {
        throw ProtocolError("unknown mutex " + std::to_string(id));
    }
    return it->second;
}

DistMutex& MutexTable::get(int64_t id)
{
    auto it = mutexes.find(id);
    if (it == mutexes.end()) {
        throw ProtocolError("unknown mutex " + std::to_string(id));
    }
    return it->second;
}

void LatchTable::create(int64_t id, int64_t count)
{
    if (count < 0) {
        throw ProtocolError("latch " + std::to_string(id) +
                            " with negative count");
    }
    if (latches.contains(id)) {
        throw ProtocolError("latch " + std::to_string(id) + " already exists");
    }
    latches[id] = DistLatch{ id, count, {} };
}

DistLatch& LatchTable::get(int64_t id)
{
    auto it = latches.find(id);
    if (it == latches.end()) {
        throw ProtocolError("unknown latch " + std::to_string(id));
    }
    return it->second;
}

std::vector<GranuleId> LatchTable::decrement(int64_t id)
{
    auto& l = get(id);
    if (l.counter == 0) {
        throw ProtocolError("latch " + std::to_string(id) +
                            " decremented below zero");
    }
    if (--l.counter == 0) {
        return std::exchange(l.waiters, {});
    }
    return {};
}

bool LatchTable::wait(int64_t id, GranuleId g)
{
    auto& l = get(id);
    if (l.counter == 0) {
        return true;
    }
    l.waiters.push_back(g);
    return false;
}

int64_t LatchTable::counter(int64_t id) const
{
    auto it = latches.find(id);
    if (it == latches.end()) {
        throw ProtocolError("unknown latch " + std::to_string(id));
    }
    return it->second.counter;
}

}
