#pragma once

#include <gransim/guest/ControlPoint.h>
#include <gransim/guest/Granule.h>
#include <gransim/guest/Program.h>

#include <limits>
#include <optional>
#include <string>

namespace gransim::guest {

enum class RunOutcome : uint8_t
{
    ControlPoint,
    BudgetExhausted,
    Trapped,
};

struct RunResult
{
    RunOutcome outcome = RunOutcome::ControlPoint;
    std::optional<ControlPointEvent> event;
    // Simulated ticks consumed by this run
    uint64_t ticks = 0;
    std::string trap;
};

inline constexpr uint64_t UNLIMITED_BUDGET =
  std::numeric_limits<uint64_t>::max();

// Executes from the granule's program counter until it reaches a control
// point, runs out of budget, or traps. On a control point the pc is left on
// the instruction after it. Writes are recorded in the granule's tracker.
RunResult runUntilControlPoint(Granule& granule,
                               const GuestProgram& program,
                               uint64_t budget = UNLIMITED_BUDGET);

// Bounds-checked memory write that records dirty pages, shared with the
// runtime for writes it performs on a granule's behalf
void writeMemory(Granule& granule, size_t offset, ByteSpan bytes);

}
