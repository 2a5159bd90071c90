#include "kintsugi/frame.hpp"

#include "kintsugi/errors.hpp"

namespace kintsugi {

Bytes frame_message(ByteSpan envelope) {
    if (envelope.size() > kMaxFrame)
        fail(Errc::frame_too_large, "frame of " + std::to_string(envelope.size()) + " bytes");
    Bytes out;
    out.reserve(4 + envelope.size());
    append_le32(out, uint32_t(envelope.size()));
    append(out, envelope);
    return out;
}

void FrameReader::feed(ByteSpan data) {
    if (at_ > 0 && at_ == buf_.size()) {
        buf_.clear();
        at_ = 0;
    }
    append(buf_, data);
}

std::optional<Bytes> FrameReader::next() {
    if (buf_.size() - at_ < 4) return std::nullopt;
    uint32_t len = load_le32(buf_.data() + at_);
    if (len > kMaxFrame)
        fail(Errc::frame_too_large, "declared frame length " + std::to_string(len));
    if (buf_.size() - at_ < 4 + size_t(len)) return std::nullopt;
    Bytes out(buf_.begin() + at_ + 4, buf_.begin() + at_ + 4 + len);
    at_ += 4 + len;
    if (at_ == buf_.size()) {
        buf_.clear();
        at_ = 0;
    } else if (at_ > kMaxFrame) {
        buf_.erase(buf_.begin(), buf_.begin() + at_);
        at_ = 0;
    }
    return out;
}

} // namespace kintsugi
