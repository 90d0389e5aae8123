#include <gransim/snapshot/MergeOp.h>

#include <array>
#include <cmath>

namespace gransim::snapshot {

namespace {

template<typename T>
void mergeElements(MergeKind kind,
                   MutableByteSpan target,
                   ByteSpan b0,
                   ByteSpan b1)
{
    for (size_t i = 0; i < target.size(); i += sizeof(T)) {
        T a0 = loadAs<T>(target, i);
        T v0 = loadAs<T>(b0, i);
        T v1 = loadAs<T>(b1, i);
        storeAs<T>(target, i, mergeValue<T>(kind, a0, v0, v1));
    }
}

template<typename T>
void foldElements(MergeKind kind, MutableByteSpan acc, ByteSpan in)
{
    for (size_t i = 0; i < acc.size(); i += sizeof(T)) {
        T a = loadAs<T>(acc, i);
        T b = loadAs<T>(in, i);
        T out;
        if constexpr (std::is_integral_v<T>) {
            out = kind == MergeKind::Sum ? detail::wrapAdd(a, b)
                                         : detail::wrapMul(a, b);
        } else {
            out = kind == MergeKind::Sum ? a + b : a * b;
        }
        storeAs<T>(acc, i, out);
    }
}

template<typename T>
T immediateAs(int64_t intImm, double floatImm)
{
    if constexpr (std::is_integral_v<T>) {
        (void)floatImm;
        return static_cast<T>(intImm);
    } else {
        (void)intImm;
        return static_cast<T>(floatImm);
    }
}

template<typename T>
void applyImmediateTyped(MergeKind kind,
                         MutableByteSpan value,
                         int64_t intImm,
                         double floatImm)
{
    T current = loadAs<T>(value);
    T imm = immediateAs<T>(intImm, floatImm);
    T out{};
    switch (kind) {
        case MergeKind::Sum:
            if constexpr (std::is_integral_v<T>) {
                out = detail::wrapAdd(current, imm);
            } else {
                out = current + imm;
            }
            break;
        case MergeKind::Subtract:
            if constexpr (std::is_integral_v<T>) {
                out = detail::wrapSub(current, imm);
            } else {
                out = current - imm;
            }
            break;
        case MergeKind::Multiply:
            if constexpr (std::is_integral_v<T>) {
                out = detail::wrapMul(current, imm);
            } else {
                out = current * imm;
            }
            break;
        case MergeKind::Divide:
            if (imm == T{ 0 }) {
                throw GuestTrap("division by zero");
            }
            if constexpr (std::is_integral_v<T>) {
                out = detail::wrapDiv(current, imm);
            } else {
                out = current / imm;
            }
            break;
        case MergeKind::Overwrite:
            out = imm;
            break;
    }
    storeAs<T>(value, 0, out);
}

template<template<typename> class F, typename... Args>
void dispatchNumeric(DataType dtype, Args&&... args)
{
    switch (dtype) {
        case DataType::Int32:
            F<int32_t>{}(std::forward<Args>(args)...);
            return;
        case DataType::Int64:
            F<int64_t>{}(std::forward<Args>(args)...);
            return;
        case DataType::Float32:
            F<float>{}(std::forward<Args>(args)...);
            return;
        case DataType::Float64:
            F<double>{}(std::forward<Args>(args)...);
            return;
        case DataType::Raw:
            break;
    }
    throw ConfigError("arithmetic on raw bytes");
}

template<typename T>
struct MergeFn
{
    void operator()(MergeKind k, MutableByteSpan t, ByteSpan b0, ByteSpan b1)
    {
        mergeElements<T>(k, t, b0, b1);
    }
};

template<typename T>
struct FoldFn
{
    void operator()(MergeKind k, MutableByteSpan acc, ByteSpan in)
    {
        foldElements<T>(k, acc, in);
    }
};

template<typename T>
struct ImmFn
{
    void operator()(MergeKind k, MutableByteSpan v, int64_t i, double f)
    {
        applyImmediateTyped<T>(k, v, i, f);
    }
};

constexpr std::array<std::string_view, 5> kindNames = {
    "sum", "sub", "mul", "div", "overwrite"
};
constexpr std::array<std::string_view, 5> dtypeNames = {
    "i32", "i64", "f32", "f64", "raw"
};

}

void MergeOp::validate() const
{
    if (dtype == DataType::Raw && kind != MergeKind::Overwrite) {
        throw ConfigError("raw bytes only support overwrite merges");
    }
}

size_t dtypeWidth(DataType dtype)
{
    switch (dtype) {
        case DataType::Int32:
        case DataType::Float32:
            return 4;
        case DataType::Int64:
        case DataType::Float64:
            return 8;
        case DataType::Raw:
            return 1;
    }
    return 1;
}

std::string_view toString(MergeKind kind)
{
    return kindNames.at(static_cast<size_t>(kind));
}

std::string_view toString(DataType dtype)
{
    return dtypeNames.at(static_cast<size_t>(dtype));
}

MergeKind parseMergeKind(std::string_view text)
{
    for (size_t i = 0; i < kindNames.size(); i++) {
        if (kindNames[i] == text) {
            return static_cast<MergeKind>(i);
        }
    }
    throw ConfigError("unknown merge operation '" + std::string(text) + "'");
}

DataType parseDataType(std::string_view text)
{
    for (size_t i = 0; i < dtypeNames.size(); i++) {
        if (dtypeNames[i] == text) {
            return static_cast<DataType>(i);
        }
    }
    throw ConfigError("unknown data type '" + std::string(text) + "'");
}

void mergeBytes(const MergeOp& op,
                MutableByteSpan target,
                ByteSpan b0,
                ByteSpan b1)
{
    op.validate();
    if (b1.size() != target.size()) {
        throw ProtocolError("merge payload length mismatch");
    }
    if (op.kind == MergeKind::Overwrite) {
        std::copy(b1.begin(), b1.end(), target.begin());
        return;
    }
    if (b0.size() != target.size() || target.size() % dtypeWidth(op.dtype)) {
        throw ProtocolError("merge payload not a whole number of elements");
    }
    dispatchNumeric<MergeFn>(op.dtype, op.kind, target, b0, b1);
}

void foldBytes(const MergeOp& op, MutableByteSpan acc, ByteSpan in)
{
    if (op.kind != MergeKind::Sum && op.kind != MergeKind::Multiply) {
        throw ConfigError("collective reductions support sum and mul only");
    }
    if (acc.size() != in.size() || acc.size() % dtypeWidth(op.dtype)) {
        throw ConfigError("reduction buffer length mismatch");
    }
    dispatchNumeric<FoldFn>(op.dtype, op.kind, acc, in);
}

void applyImmediate(const MergeOp& op,
                    MutableByteSpan value,
                    int64_t intImm,
                    double floatImm)
{
    if (value.size() != dtypeWidth(op.dtype)) {
        throw ConfigError("immediate update must cover exactly one element");
    }
    dispatchNumeric<ImmFn>(op.dtype, op.kind, value, intImm, floatImm);
}

}
