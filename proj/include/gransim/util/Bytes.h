#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace gransim {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;
using MutableByteSpan = std::span<uint8_t>;

template<typename T>
T loadAs(ByteSpan bytes, size_t offset = 0)
{
    T value;
    std::memcpy(&value, bytes.data() + offset, sizeof(T));
    return value;
}

template<typename T>
void storeAs(MutableByteSpan bytes, size_t offset, T value)
{
    std::memcpy(bytes.data() + offset, &value, sizeof(T));
}

template<typename T>
Bytes toBytes(T value)
{
    Bytes out(sizeof(T));
    std::memcpy(out.data(), &value, sizeof(T));
    return out;
}

}
