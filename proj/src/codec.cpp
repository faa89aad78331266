#include "quicfed/codec.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "quicfed/error.hpp"

namespace quicfed::codec {

namespace {

constexpr std::string_view kModelMagic = "QFMODEL1";
constexpr std::string_view kDistMagic = "QFDIST01";
constexpr std::string_view kSelectMagic = "QFSELEC1";
constexpr std::string_view kRowsMagic = "QFROWS01";

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }
  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void magic(std::string_view m) {
    need(m.size());
    if (!std::equal(m.begin(), m.end(), in_.begin() + static_cast<std::ptrdiff_t>(pos_)))
      throw ParseError("codec: bad magic, expected " + std::string(m), 0);
    pos_ += m.size();
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  void finish() const {
    if (pos_ != in_.size()) throw ParseError("codec: trailing bytes", 0);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ParseError("codec: truncated message", 0);
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t model_size(std::size_t m_in, std::size_t hidden) {
  return kHeaderBytes + 8 * MlpParams::count_for(m_in, hidden);
}

Bytes encode_model(const MlpParams& params) {
  Writer w(model_size(params.inputs(), params.hidden()));
  w.magic(kModelMagic);
  w.u32(static_cast<std::uint32_t>(params.inputs()));
  w.u32(static_cast<std::uint32_t>(params.hidden()));
  for (double v : params.values()) w.f64(v);
  return w.take();
}

MlpParams decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kModelMagic);
  std::size_t m_in = r.u32();
  std::size_t h = r.u32();
  if (m_in == 0 || h == 0 || bytes.size() != model_size(m_in, h))
    throw ParseError("codec: model size does not match its header", 0);
  MlpParams p(m_in, h);
  for (auto& v : p.values()) v = r.f64();
  r.finish();
  return p;
}

void write_model_file(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path.string());
  auto bytes = encode_model(params);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MlpParams read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

Bytes encode_distribution(const SelectionDistribution& p) {
  Writer w(kHeaderBytes + 8 * p.size());
  w.magic(kDistMagic);
  w.u32(static_cast<std::uint32_t>(p.size()));
  w.u32(0);
  for (double v : p.p) w.f64(v);
  return w.take();
}

SelectionDistribution decode_distribution(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kDistMagic);
  std::size_t m = r.u32();
  r.u32();
  SelectionDistribution p;
  p.p.resize(m);
  for (auto& v : p.p) v = r.f64();
  r.finish();
  return p;
}

Bytes encode_selection(const SelectionBroadcast& msg) {
  const std::size_t m = msg.distribution.size();
  if (msg.mask.size() != m) throw ContractError("encode_selection: mask width mismatch");
  Writer w(kHeaderBytes + 9 * m);
  w.magic(kSelectMagic);
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(1);
  for (double v : msg.distribution.p) w.f64(v);
  for (bool b : msg.mask) w.u8(b ? 1 : 0);
  return w.take();
}

SelectionBroadcast decode_selection(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kSelectMagic);
  std::size_t m = r.u32();
  r.u32();
  SelectionBroadcast msg;
  msg.distribution.p.resize(m);
  for (auto& v : msg.distribution.p) v = r.f64();
  msg.mask.resize(m);
  for (std::size_t i = 0; i < m; ++i) msg.mask[i] = r.u8() != 0;
  r.finish();
  return msg;
}

Bytes encode_rows(const Matrix& rows) {
  Writer w(kHeaderBytes + 8 * rows.rows() * rows.cols());
  w.magic(kRowsMagic);
  w.u32(static_cast<std::uint32_t>(rows.rows()));
  w.u32(static_cast<std::uint32_t>(rows.cols()));
  for (double v : rows.data()) w.f64(v);
  return w.take();
}

Matrix decode_rows(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic(kRowsMagic);
  std::size_t n = r.u32();
  std::size_t c = r.u32();
  Matrix m(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = r.f64();
  r.finish();
  return m;
}

}  // namespace quicfed::codec
