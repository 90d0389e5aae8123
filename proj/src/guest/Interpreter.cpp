#include <gransim/guest/Interpreter.h>
#include <gransim/util/Errors.h>

#include <algorithm>

namespace gransim::guest {

using snapshot::MergeOp;

namespace {

// Zero-tick control flow could spin forever, cap the steps per run
constexpr uint64_t MAX_STEPS_PER_RUN = 1'000'000'000ULL;

void checkBounds(const Granule& g, int64_t offset, size_t length)
{
    if (offset < 0 || static_cast<size_t>(offset) + length > g.mem().size()) {
        throw GuestTrap("access [" + std::to_string(offset) + ", " +
                        std::to_string(offset + static_cast<int64_t>(length)) +
                        ") out of bounds");
    }
}

}

void writeMemory(Granule& granule, size_t offset, ByteSpan bytes)
{
    checkBounds(granule, static_cast<int64_t>(offset), bytes.size());
    std::copy(bytes.begin(), bytes.end(), granule.mem().begin() + offset);
    granule.tracker.markWrite(offset, bytes.size());
}

RunResult runUntilControlPoint(Granule& granule,
                               const GuestProgram& program,
                               uint64_t budget)
{
    if (granule.status != GranuleStatus::Runnable) {
        throw ContractViolation("granule " + std::to_string(granule.id) +
                                " run while " +
                                std::string(toString(granule.status)));
    }

    RunResult result;
    auto& pc = granule.regs.programCounter;
    uint64_t steps = 0;

    try {
        while (true) {
            if (result.ticks >= budget) {
                result.outcome = RunOutcome::BudgetExhausted;
                return result;
            }
            if (++steps > MAX_STEPS_PER_RUN) {
                throw GuestTrap("step limit exceeded");
            }
            if (pc >= program.instructions.size()) {
                throw GuestTrap("execution ran past the last instruction");
            }

            const Instruction& ins = program.instructions[pc];
            uint32_t next = pc + 1;

            switch (ins.op) {
                case Opcode::Work:
                    result.ticks += static_cast<uint64_t>(ins.a);
                    break;
                case Opcode::Write:
                    writeMemory(granule, ins.a, ins.bytes);
                    result.ticks++;
                    break;
                case Opcode::Add: {
                    size_t width = snapshot::dtypeWidth(ins.dtype);
                    checkBounds(granule, ins.a, width);
                    MutableByteSpan value(granule.mem().data() + ins.a, width);
                    snapshot::applyImmediate(
                      MergeOp{ snapshot::MergeKind::Sum, ins.dtype },
                      value,
                      ins.intImm,
                      ins.floatImm);
                    granule.tracker.markWrite(ins.a, width);
                    result.ticks++;
                    break;
                }
                case Opcode::Copy: {
                    size_t len = static_cast<size_t>(ins.c);
                    checkBounds(granule, ins.a, len);
                    checkBounds(granule, ins.b, len);
                    Bytes tmp(granule.mem().begin() + ins.b,
                              granule.mem().begin() + ins.b + len);
                    writeMemory(granule, ins.a, tmp);
                    result.ticks++;
                    break;
                }
                case Opcode::Idx:
                    writeMemory(granule,
                                ins.a,
                                toBytes<int32_t>(granule.groupIndex));
                    result.ticks++;
                    break;
                case Opcode::Nth:
                    writeMemory(
                      granule, ins.a, toBytes<int32_t>(granule.groupSize));
                    result.ticks++;
                    break;
                case Opcode::SetGlobal:
                    granule.globals.at(ins.a) = ins.intImm;
                    break;
                case Opcode::DecJumpNotZero:
                    if (--granule.globals.at(ins.a) != 0) {
                        next = ins.target;
                    }
                    break;
                case Opcode::Jump:
                    next = ins.target;
                    break;
                case Opcode::BranchIndex:
                    if (granule.groupIndex == ins.a) {
                        next = ins.target;
                    }
                    break;
                case Opcode::Call:
                    granule.regs.callStack.push_back(next);
                    granule.regs.stackPointer++;
                    next = ins.target;
                    break;
                case Opcode::Ret:
                    if (granule.regs.callStack.empty()) {
                        throw GuestTrap("RET with empty call stack");
                    }
                    next = granule.regs.callStack.back();
                    granule.regs.callStack.pop_back();
                    granule.regs.stackPointer--;
                    break;
                default: {
                    ControlPointEvent ev;
                    MergeOp op{ ins.kind, ins.dtype };
                    switch (ins.op) {
                        case Opcode::SpawnThreads:
                            ev = SpawnThreads{ static_cast<int>(ins.a),
                                               ins.target };
                            break;
                        case Opcode::Fork:
                            ev = Fork{ static_cast<int>(ins.a), ins.target };
                            break;
                        case Opcode::Join:
                            ev = Join{};
                            break;
                        case Opcode::Barrier:
                            ev = Barrier{};
                            break;
                        case Opcode::Lock:
                            ev = MutexLock{ ins.a };
                            break;
                        case Opcode::Unlock:
                            ev = MutexUnlock{ ins.a };
                            break;
                        case Opcode::Atomic:
                            ev = AtomicUpdate{ static_cast<size_t>(ins.a),
                                               op,
                                               ins.intImm,
                                               ins.floatImm };
                            break;
                        case Opcode::LatchInit:
                            ev = LatchInit{ ins.a, ins.b };
                            break;
                        case Opcode::LatchDec:
                            ev = LatchDecrement{ ins.a };
                            break;
                        case Opcode::LatchWait:
                            ev = LatchWait{ ins.a };
                            break;
                        case Opcode::Send:
                            ev = Send{ static_cast<int>(ins.a),
                                       static_cast<size_t>(ins.b),
                                       static_cast<size_t>(ins.c) };
                            break;
                        case Opcode::Recv:
                            ev = Recv{ static_cast<int>(ins.a),
                                       static_cast<size_t>(ins.b) };
                            break;
                        case Opcode::AllReduce:
                            ev = AllReduce{ static_cast<size_t>(ins.a),
                                            static_cast<size_t>(ins.b),
                                            op };
                            break;
                        case Opcode::Broadcast:
                            ev = Broadcast{ static_cast<int>(ins.a),
                                            static_cast<size_t>(ins.b),
                                            static_cast<size_t>(ins.c) };
                            break;
                        case Opcode::Reduce:
                            ev = RegisterReduce{ static_cast<size_t>(ins.a),
                                                 static_cast<size_t>(ins.b),
                                                 op };
                            break;
                        case Opcode::Exit:
                            ev = Exit{};
                            break;
                        default:
                            throw GuestTrap("unhandled opcode");
                    }
                    pc = next;
                    granule.setStatus(GranuleStatus::AtControlPoint);
                    result.outcome = RunOutcome::ControlPoint;
                    result.event = ev;
                    return result;
                }
            }
            pc = next;
        }
    } catch (const GuestTrap& trap) {
        result.outcome = RunOutcome::Trapped;
        result.trap = trap.what();
        granule.failed = true;
        granule.setStatus(GranuleStatus::Finished);
        return result;
    }
}

}
