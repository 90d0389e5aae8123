#pragma once

#include <gransim/util/Bytes.h>
#include <gransim/util/Errors.h>

#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>

namespace gransim::snapshot {

enum class MergeKind : uint8_t
{
    Sum,
    Subtract,
    Multiply,
    Divide,
    Overwrite,
};

enum class DataType : uint8_t
{
    Int32,
    Int64,
    Float32,
    Float64,
    Raw,
};

struct MergeOp
{
    MergeKind kind = MergeKind::Overwrite;
    DataType dtype = DataType::Raw;

    bool isArithmetic() const { return kind != MergeKind::Overwrite; }

    // Throws ConfigError when the kind/dtype pairing is not allowed
    void validate() const;

    bool operator==(const MergeOp&) const = default;
};

inline constexpr MergeOp overwriteOp() { return {}; }

// Width in bytes of one element, 1 for raw bytes
size_t dtypeWidth(DataType dtype);

std::string_view toString(MergeKind kind);
std::string_view toString(DataType dtype);
MergeKind parseMergeKind(std::string_view text);
DataType parseDataType(std::string_view text);

namespace detail {

template<std::integral T>
T wrapAdd(T a, T b)
{
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
}

template<std::integral T>
T wrapSub(T a, T b)
{
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) - static_cast<U>(b));
}

template<std::integral T>
T wrapMul(T a, T b)
{
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
}

// Truncating division where MIN / -1 wraps to MIN instead of trapping
template<std::integral T>
T wrapDiv(T a, T b)
{
    if (b == -1) {
        return wrapSub(T{ 0 }, a);
    }
    return a / b;
}

}

// A1 from (A0, B0, B1) for a single typed element. Integers wrap in two's
// complement and divide with truncation.
template<typename T>
T mergeValue(MergeKind kind, T a0, T b0, T b1)
{
    switch (kind) {
        case MergeKind::Overwrite:
            return b1;
        case MergeKind::Sum:
            if constexpr (std::is_integral_v<T>) {
                return detail::wrapAdd(a0, detail::wrapSub(b1, b0));
            } else {
                return a0 + (b1 - b0);
            }
        case MergeKind::Subtract:
            if constexpr (std::is_integral_v<T>) {
                return detail::wrapSub(a0, detail::wrapSub(b0, b1));
            } else {
                return a0 - (b0 - b1);
            }
        case MergeKind::Multiply:
            if (b0 == T{ 0 }) {
                throw MergeArithmeticError("multiply merge with B0 = 0");
            }
            if constexpr (std::is_integral_v<T>) {
                return detail::wrapMul(a0, detail::wrapDiv(b1, b0));
            } else {
                return a0 * (b1 / b0);
            }
        case MergeKind::Divide: {
            if (b0 == T{ 0 }) {
                throw MergeArithmeticError("divide merge with B0 = 0");
            }
            if (b1 == T{ 0 }) {
                throw MergeArithmeticError("divide merge with B1 = 0");
            }
            if constexpr (std::is_integral_v<T>) {
                T ratio = detail::wrapDiv(b0, b1);
                if (ratio == 0) {
                    throw MergeArithmeticError(
                      "divide merge with B0 / B1 truncating to 0");
                }
                return detail::wrapDiv(a0, ratio);
            } else {
                return a0 / (b0 / b1);
            }
        }
    }
    throw ConfigError("unknown merge kind");
}

// Applies op element-wise over equally sized byte ranges, writing A1 into
// target (which holds A0 on entry). Overwrite copies b1 verbatim.
void mergeBytes(const MergeOp& op,
                MutableByteSpan target,
                ByteSpan b0,
                ByteSpan b1);

// Combines two contributions of a collective reduction, acc = acc (op) in.
// Only Sum and Multiply are meaningful folds.
void foldBytes(const MergeOp& op, MutableByteSpan acc, ByteSpan in);

// Applies a guest-side arithmetic update value = value (op) imm
void applyImmediate(const MergeOp& op,
                    MutableByteSpan value,
                    int64_t intImm,
                    double floatImm);

}
