#pragma once

// Binary frame codec for the coordinator / computation-server wire protocol.
// 24-byte little-endian header followed by a UTF-8 JSON payload.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dca/errors.hpp"

namespace dca {

enum class MessageType : uint8_t {
  Init = 0x01,
  InitAck = 0x02,
  StartRound = 0x03,
  BoundaryData = 0x04,
  DataAck = 0x05,
  ViolationReport = 0x06,
  Stop = 0x07,
  Done = 0x08,
  Error = 0x09,
};

inline bool is_known_message_type(uint8_t t) {
  return t >= 0x01 && t <= 0x09;
}

inline std::string to_string(MessageType t) {
  switch (t) {
    case MessageType::Init: return "INIT";
    case MessageType::InitAck: return "INIT_ACK";
    case MessageType::StartRound: return "START_ROUND";
    case MessageType::BoundaryData: return "BOUNDARY_DATA";
    case MessageType::DataAck: return "DATA_ACK";
    case MessageType::ViolationReport: return "VIOLATION_REPORT";
    case MessageType::Stop: return "STOP";
    case MessageType::Done: return "DONE";
    case MessageType::Error: return "ERROR";
  }
  return "?";
}

struct Frame {
  static constexpr std::array<uint8_t, 4> kMagic{0x44, 0x43, 0x41, 0x31};  // "DCA1"
  static constexpr uint8_t kVersion = 1;
  static constexpr size_t kHeaderSize = 24;
  static constexpr uint32_t kMaxPayload = 16u * 1024 * 1024;

  uint8_t version = kVersion;
  MessageType msg_type = MessageType::Init;
  uint16_t flags = 0;
  uint32_t session_id = 0;
  uint32_t slot_id = 0;
  uint32_t seq = 0;
  std::string payload;  // UTF-8 JSON

  bool operator==(const Frame&) const = default;
};

namespace detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > Frame::kMaxPayload)
    throw OversizePayload("payload of " + std::to_string(f.payload.size()) +
                          " bytes exceeds 16 MiB");
  std::vector<uint8_t> out;
  out.reserve(Frame::kHeaderSize + f.payload.size());
  out.insert(out.end(), Frame::kMagic.begin(), Frame::kMagic.end());
  out.push_back(f.version);
  out.push_back(static_cast<uint8_t>(f.msg_type));
  detail::put_u16(out, f.flags);
  detail::put_u32(out, f.session_id);
  detail::put_u32(out, f.slot_id);
  detail::put_u32(out, f.seq);
  detail::put_u32(out, static_cast<uint32_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

struct DecodedFrame {
  Frame frame;
  size_t consumed = 0;
};

// Decodes one frame from the head of `data`; consumes exactly header +
// payload_len bytes.
inline DecodedFrame decode_frame(const uint8_t* data, size_t size) {
  if (size < Frame::kHeaderSize)
    throw TruncatedFrame("need " + std::to_string(Frame::kHeaderSize) +
                         " header bytes, have " + std::to_string(size));
  if (!std::equal(Frame::kMagic.begin(), Frame::kMagic.end(), data))
    throw BadMagic("bad frame magic");
  Frame f;
  f.version = data[4];
  if (f.version != Frame::kVersion)
    throw UnknownVersion("unknown protocol version " + std::to_string(f.version));
  if (!is_known_message_type(data[5]))
    throw UnknownType("unknown message type " + std::to_string(data[5]));
  f.msg_type = static_cast<MessageType>(data[5]);
  f.flags = detail::get_u16(data + 6);
  f.session_id = detail::get_u32(data + 8);
  f.slot_id = detail::get_u32(data + 12);
  f.seq = detail::get_u32(data + 16);
  uint32_t payload_len = detail::get_u32(data + 20);
  if (payload_len > Frame::kMaxPayload)
    throw OversizePayload("payload length " + std::to_string(payload_len) +
                          " exceeds 16 MiB");
  if (size < Frame::kHeaderSize + payload_len)
    throw TruncatedFrame("payload truncated: need " + std::to_string(payload_len) +
                         " bytes");
  f.payload.assign(reinterpret_cast<const char*>(data + Frame::kHeaderSize), payload_len);
  return DecodedFrame{std::move(f), Frame::kHeaderSize + payload_len};
}

inline DecodedFrame decode_frame(const std::vector<uint8_t>& data) {
  return decode_frame(data.data(), data.size());
}

}  // namespace dca
