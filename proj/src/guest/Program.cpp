#include <gransim/guest/Program.h>
#include <gransim/snapshot/Snapshot.h>
#include <gransim/util/Errors.h>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gransim::guest {

using snapshot::DataType;
using snapshot::MergeKind;

namespace {

struct OpInfo
{
    Opcode op;
    std::string_view name;
    bool controlPoint;
};

constexpr std::array<OpInfo, 28> opTable = { {
  { Opcode::Work, "WORK", false },
  { Opcode::Write, "WRITE", false },
  { Opcode::Add, "ADD", false },
  { Opcode::Copy, "COPY", false },
  { Opcode::Idx, "IDX", false },
  { Opcode::Nth, "NTH", false },
  { Opcode::SetGlobal, "SETG", false },
  { Opcode::DecJumpNotZero, "DJNZ", false },
  { Opcode::Jump, "JMP", false },
  { Opcode::BranchIndex, "BRIDX", false },
  { Opcode::Call, "CALL", false },
  { Opcode::Ret, "RET", false },
  { Opcode::SpawnThreads, "SPAWNT", true },
  { Opcode::Fork, "FORK", true },
  { Opcode::Join, "JOIN", true },
  { Opcode::Barrier, "BARRIER", true },
  { Opcode::Lock, "LOCK", true },
  { Opcode::Unlock, "UNLOCK", true },
  { Opcode::Atomic, "ATOMIC", true },
  { Opcode::LatchInit, "LATCH", true },
  { Opcode::LatchDec, "LATCHDEC", true },
  { Opcode::LatchWait, "LATCHWAIT", true },
  { Opcode::Send, "SEND", true },
  { Opcode::Recv, "RECV", true },
  { Opcode::AllReduce, "ALLREDUCE", true },
  { Opcode::Broadcast, "BCAST", true },
  { Opcode::Reduce, "REDUCE", true },
  { Opcode::Exit, "EXIT", true },
} };

const OpInfo& infoFor(Opcode op)
{
    return opTable.at(static_cast<size_t>(op));
}

class LineParser
{
  public:
    LineParser(std::vector<std::string> tokens, uint32_t line)
      : tokens(std::move(tokens))
      , line(line)
    {}

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw ParseError("line " + std::to_string(line) + ": " + msg);
    }

    void expectArgs(size_t n) const
    {
        if (tokens.size() != n + 1) {
            fail(tokens[0] + " expects " + std::to_string(n) +
                 " operand(s), got " + std::to_string(tokens.size() - 1));
        }
    }

    int64_t integer(size_t i) const
    {
        const std::string& t = tokens.at(i);
        int64_t value = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            fail("bad integer '" + t + "'");
        }
        return value;
    }

    int64_t nonNegative(size_t i) const
    {
        int64_t v = integer(i);
        if (v < 0) {
            fail("operand '" + tokens[i] + "' must be non-negative");
        }
        return v;
    }

    Bytes hexBytes(size_t i) const
    {
        std::string_view t = tokens.at(i);
        if (t.starts_with("0x") || t.starts_with("0X")) {
            t.remove_prefix(2);
        }
        if (t.empty() || t.size() % 2 != 0) {
            fail("byte literal needs an even number of hex digits");
        }
        Bytes out(t.size() / 2);
        for (size_t k = 0; k < out.size(); k++) {
            auto [ptr, ec] =
              std::from_chars(t.data() + 2 * k, t.data() + 2 * k + 2, out[k], 16);
            if (ec != std::errc() || ptr != t.data() + 2 * k + 2) {
                fail("bad hex byte literal '" + tokens[i] + "'");
            }
        }
        return out;
    }

    DataType dtype(size_t i) const
    {
        try {
            return snapshot::parseDataType(tokens.at(i));
        } catch (const ConfigError&) {
            fail("unknown data type '" + tokens[i] + "'");
        }
    }

    MergeKind kind(size_t i) const
    {
        try {
            return snapshot::parseMergeKind(tokens.at(i));
        } catch (const ConfigError&) {
            fail("unknown merge operation '" + tokens[i] + "'");
        }
    }

    void immediate(size_t i, DataType dt, Instruction& ins) const
    {
        const std::string& t = tokens.at(i);
        ins.immText = t;
        if (dt == DataType::Float32 || dt == DataType::Float64) {
            char* end = nullptr;
            ins.floatImm = std::strtod(t.c_str(), &end);
            if (end != t.c_str() + t.size()) {
                fail("bad float literal '" + t + "'");
            }
        } else if (dt == DataType::Raw) {
            fail("arithmetic on raw bytes");
        } else {
            ins.intImm = integer(i);
        }
    }

    const std::string& token(size_t i) const { return tokens.at(i); }
    size_t size() const { return tokens.size(); }

  private:
    std::vector<std::string> tokens;
    uint32_t line;
};

std::string hexString(ByteSpan bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

struct PendingLabel
{
    size_t instruction;
    std::string name;
    uint32_t line;
};

void checkRange(const LineParser& p,
                const GuestProgram& prog,
                int64_t offset,
                int64_t length)
{
    if (offset < 0 || length < 0 ||
        static_cast<size_t>(offset + length) > prog.memorySize()) {
        p.fail("memory operand [" + std::to_string(offset) + ", " +
               std::to_string(offset + length) + ") outside " +
               std::to_string(prog.memorySize()) + " bytes");
    }
}

}

std::string_view mnemonic(Opcode op)
{
    return infoFor(op).name;
}

bool isControlPoint(Opcode op)
{
    return infoFor(op).controlPoint;
}

size_t GuestProgram::memorySize() const
{
    return memoryPages * snapshot::PAGE_SIZE;
}

Bytes GuestProgram::initialMemory() const
{
    Bytes mem(memorySize(), 0);
    for (const auto& d : staticData) {
        std::copy(d.bytes.begin(), d.bytes.end(), mem.begin() + d.offset);
    }
    return mem;
}

GuestProgram loadProgram(std::string_view source)
{
    GuestProgram prog;
    std::unordered_map<std::string, uint32_t> labelIndex;
    std::vector<PendingLabel> references;
    std::string entryLabel;
    uint32_t entryLine = 0;

    // Instructions whose memory operands are checked once MEMORY is known
    std::vector<std::pair<LineParser, size_t>> deferred;

    std::istringstream in{ std::string(source) };
    std::string raw;
    uint32_t lineNo = 0;
    while (std::getline(in, raw)) {
        lineNo++;
        if (auto hash = raw.find('#'); hash != std::string::npos) {
            raw.erase(hash);
        }
        std::istringstream words(raw);
        std::vector<std::string> tokens;
        for (std::string w; words >> w;) {
            tokens.push_back(w);
        }

        // Leading "name:" labels
        while (!tokens.empty() && tokens.front().size() > 1 &&
               tokens.front().back() == ':') {
            std::string name = tokens.front().substr(0, tokens.front().size() - 1);
            if (labelIndex.contains(name)) {
                throw ParseError("line " + std::to_string(lineNo) +
                                 ": duplicate label '" + name + "'");
            }
            auto idx = static_cast<uint32_t>(prog.instructions.size());
            labelIndex[name] = idx;
            prog.labels.try_emplace(idx, name);
            tokens.erase(tokens.begin());
        }
        if (tokens.empty()) {
            continue;
        }

        LineParser p(tokens, lineNo);
        const std::string& head = tokens.front();

        if (head == "MEMORY") {
            p.expectArgs(1);
            int64_t pages = p.integer(1);
            if (pages < 1) {
                p.fail("MEMORY needs at least one page");
            }
            prog.memoryPages = static_cast<size_t>(pages);
            continue;
        }
        if (head == "DATA") {
            p.expectArgs(2);
            prog.staticData.push_back(
              { static_cast<size_t>(p.nonNegative(1)), p.hexBytes(2) });
            deferred.emplace_back(p, SIZE_MAX);
            continue;
        }
        if (head == "ENTRY") {
            p.expectArgs(1);
            entryLabel = tokens[1];
            entryLine = lineNo;
            continue;
        }

        const OpInfo* info = nullptr;
        for (const auto& candidate : opTable) {
            if (candidate.name == head) {
                info = &candidate;
            }
        }
        if (info == nullptr) {
            p.fail("unknown instruction '" + head + "'");
        }

        Instruction ins;
        ins.op = info->op;
        ins.line = lineNo;
        auto labelRef = [&](size_t tokenIdx) {
            references.push_back(
              { prog.instructions.size(), tokens.at(tokenIdx), lineNo });
        };

        switch (ins.op) {
            case Opcode::Work:
                p.expectArgs(1);
                ins.a = p.nonNegative(1);
                break;
            case Opcode::Write:
                p.expectArgs(2);
                ins.a = p.nonNegative(1);
                ins.bytes = p.hexBytes(2);
                break;
            case Opcode::Add:
                p.expectArgs(3);
                ins.a = p.nonNegative(1);
                ins.dtype = p.dtype(2);
                p.immediate(3, ins.dtype, ins);
                break;
            case Opcode::Copy:
                p.expectArgs(3);
                ins.a = p.nonNegative(1);
                ins.b = p.nonNegative(2);
                ins.c = p.nonNegative(3);
                break;
            case Opcode::Idx:
            case Opcode::Nth:
                p.expectArgs(1);
                ins.a = p.nonNegative(1);
                break;
            case Opcode::SetGlobal:
                p.expectArgs(2);
                ins.a = p.nonNegative(1);
                ins.intImm = p.integer(2);
                ins.immText = tokens[2];
                if (ins.a >= static_cast<int64_t>(GLOBAL_COUNT)) {
                    p.fail("global index out of range");
                }
                break;
            case Opcode::DecJumpNotZero:
                p.expectArgs(2);
                ins.a = p.nonNegative(1);
                if (ins.a >= static_cast<int64_t>(GLOBAL_COUNT)) {
                    p.fail("global index out of range");
                }
                labelRef(2);
                break;
            case Opcode::Jump:
            case Opcode::Call:
                p.expectArgs(1);
                labelRef(1);
                break;
            case Opcode::BranchIndex:
                p.expectArgs(2);
                ins.a = p.nonNegative(1);
                labelRef(2);
                break;
            case Opcode::SpawnThreads:
            case Opcode::Fork:
                p.expectArgs(2);
                ins.a = p.integer(1);
                if (ins.a < 1) {
                    p.fail("team size must be at least 1");
                }
                labelRef(2);
                break;
            case Opcode::Ret:
            case Opcode::Join:
            case Opcode::Barrier:
            case Opcode::Exit:
                p.expectArgs(0);
                break;
            case Opcode::Lock:
            case Opcode::Unlock:
            case Opcode::LatchDec:
            case Opcode::LatchWait:
                p.expectArgs(1);
                ins.a = p.integer(1);
                break;
            case Opcode::LatchInit:
                p.expectArgs(2);
                ins.a = p.integer(1);
                ins.b = p.nonNegative(2);
                break;
            case Opcode::Atomic:
                p.expectArgs(4);
                ins.a = p.nonNegative(1);
                ins.dtype = p.dtype(2);
                ins.kind = p.kind(3);
                p.immediate(4, ins.dtype, ins);
                break;
            case Opcode::Send:
            case Opcode::Broadcast:
                p.expectArgs(3);
                ins.a = p.nonNegative(1);
                ins.b = p.nonNegative(2);
                ins.c = p.nonNegative(3);
                break;
            case Opcode::Recv:
                p.expectArgs(2);
                ins.a = p.nonNegative(1);
                ins.b = p.nonNegative(2);
                break;
            case Opcode::AllReduce:
            case Opcode::Reduce:
                p.expectArgs(4);
                ins.a = p.nonNegative(1);
                ins.b = p.nonNegative(2);
                ins.kind = p.kind(3);
                ins.dtype = p.dtype(4);
                break;
        }

        deferred.emplace_back(p, prog.instructions.size());
        prog.instructions.push_back(std::move(ins));
    }

    // Labels pointing past the last instruction have nothing to execute
    for (const auto& [idx, name] : prog.labels) {
        if (idx >= prog.instructions.size()) {
            throw ParseError("label '" + name + "' has no instruction");
        }
    }

    for (const auto& ref : references) {
        auto it = labelIndex.find(ref.name);
        if (it == labelIndex.end()) {
            throw ParseError("line " + std::to_string(ref.line) +
                             ": unresolved label '" + ref.name + "'");
        }
        prog.instructions[ref.instruction].target = it->second;
    }

    if (!entryLabel.empty()) {
        auto it = labelIndex.find(entryLabel);
        if (it == labelIndex.end()) {
            throw ParseError("line " + std::to_string(entryLine) +
                             ": unresolved label '" + entryLabel + "'");
        }
        prog.entry = it->second;
    }

    size_t dataIdx = 0;
    for (const auto& [p, idx] : deferred) {
        if (idx == SIZE_MAX) {
            const auto& d = prog.staticData[dataIdx++];
            checkRange(p,
                       prog,
                       static_cast<int64_t>(d.offset),
                       static_cast<int64_t>(d.bytes.size()));
            continue;
        }
        const Instruction& ins = prog.instructions[idx];
        int64_t width = static_cast<int64_t>(snapshot::dtypeWidth(ins.dtype));
        switch (ins.op) {
            case Opcode::Write:
                checkRange(p, prog, ins.a, static_cast<int64_t>(ins.bytes.size()));
                break;
            case Opcode::Add:
            case Opcode::Atomic:
                checkRange(p, prog, ins.a, width);
                break;
            case Opcode::Copy:
                checkRange(p, prog, ins.a, ins.c);
                checkRange(p, prog, ins.b, ins.c);
                break;
            case Opcode::Idx:
            case Opcode::Nth:
                checkRange(p, prog, ins.a, 4);
                break;
            case Opcode::Send:
            case Opcode::Broadcast:
                checkRange(p, prog, ins.b, ins.c);
                break;
            case Opcode::Recv:
                checkRange(p, prog, ins.b, 0);
                break;
            case Opcode::AllReduce:
            case Opcode::Reduce:
                checkRange(p, prog, ins.a, ins.b);
                break;
            default:
                break;
        }
    }

    return prog;
}

GuestProgram loadProgramFile(const std::string& path)
{
    std::ifstream f(path);
    if (!f) {
        throw IOError("cannot open program '" + path + "'");
    }
    std::stringstream buf;
    buf << f.rdbuf();
    return loadProgram(buf.str());
}

std::string serializeProgram(const GuestProgram& program)
{
    auto labelFor = [&](uint32_t idx) {
        auto it = program.labels.find(idx);
        return it != program.labels.end() ? it->second
                                          : "L" + std::to_string(idx);
    };

    // Every branch target needs a label line, named or synthesized
    std::map<uint32_t, std::string> emitted = program.labels;
    for (const auto& ins : program.instructions) {
        switch (ins.op) {
            case Opcode::DecJumpNotZero:
            case Opcode::Jump:
            case Opcode::Call:
            case Opcode::BranchIndex:
            case Opcode::SpawnThreads:
            case Opcode::Fork:
                emitted.try_emplace(ins.target, labelFor(ins.target));
                break;
            default:
                break;
        }
    }
    if (program.entry != 0) {
        emitted.try_emplace(program.entry, labelFor(program.entry));
    }

    std::ostringstream out;
    out << "MEMORY " << program.memoryPages << "\n";
    if (program.entry != 0) {
        out << "ENTRY " << emitted.at(program.entry) << "\n";
    }
    for (const auto& d : program.staticData) {
        out << "DATA " << d.offset << " " << hexString(d.bytes) << "\n";
    }

    for (uint32_t i = 0; i < program.instructions.size(); i++) {
        if (auto it = emitted.find(i); it != emitted.end()) {
            out << it->second << ":\n";
        }
        const Instruction& ins = program.instructions[i];
        out << "    " << mnemonic(ins.op);
        auto target = [&] { return emitted.at(ins.target); };
        switch (ins.op) {
            case Opcode::Work:
            case Opcode::Idx:
            case Opcode::Nth:
            case Opcode::Lock:
            case Opcode::Unlock:
            case Opcode::LatchDec:
            case Opcode::LatchWait:
                out << " " << ins.a;
                break;
            case Opcode::Write:
                out << " " << ins.a << " " << hexString(ins.bytes);
                break;
            case Opcode::Add:
                out << " " << ins.a << " " << snapshot::toString(ins.dtype)
                    << " " << ins.immText;
                break;
            case Opcode::Copy:
            case Opcode::Send:
            case Opcode::Broadcast:
                out << " " << ins.a << " " << ins.b << " " << ins.c;
                break;
            case Opcode::SetGlobal:
                out << " " << ins.a << " " << ins.immText;
                break;
            case Opcode::DecJumpNotZero:
            case Opcode::BranchIndex:
            case Opcode::SpawnThreads:
            case Opcode::Fork:
                out << " " << ins.a << " " << target();
                break;
            case Opcode::Jump:
            case Opcode::Call:
                out << " " << target();
                break;
            case Opcode::LatchInit:
            case Opcode::Recv:
                out << " " << ins.a << " " << ins.b;
                break;
            case Opcode::Atomic:
                out << " " << ins.a << " " << snapshot::toString(ins.dtype)
                    << " " << snapshot::toString(ins.kind) << " "
                    << ins.immText;
                break;
            case Opcode::AllReduce:
            case Opcode::Reduce:
                out << " " << ins.a << " " << ins.b << " "
                    << snapshot::toString(ins.kind) << " "
                    << snapshot::toString(ins.dtype);
                break;
            case Opcode::Ret:
            case Opcode::Join:
            case Opcode::Barrier:
            case Opcode::Exit:
                break;
        }
        out << "\n";
    }
    return out.str();
}

}
