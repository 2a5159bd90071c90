#pragma once

#include <optional>

#include "kintsugi/bytes.hpp"
#include "kintsugi/wire.hpp"

namespace kintsugi {

// 4-byte little-endian length || envelope bytes
Bytes frame_message(ByteSpan envelope); // throws FrameTooLarge above the cap

// Incremental splitter for a byte-stream transport. feed() accepts arbitrary
// chunk boundaries; next() yields complete envelopes in order.
class FrameReader {
public:
    void feed(ByteSpan data);
    std::optional<Bytes> next(); // throws FrameTooLarge on an oversize declared length

    size_t buffered() const { return buf_.size() - at_; }

private:
    Bytes buf_;
    size_t at_ = 0; // consumed prefix, compacted lazily
};

} // namespace kintsugi
