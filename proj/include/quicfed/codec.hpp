#pragma once

// Wire/file encodings. Every message starts with a 16-byte header
// (8-byte magic, two little-endian uint32 fields) followed by little-endian
// IEEE-754 doubles. Message sizes are what the federation charges as
// control traffic.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "quicfed/featsel.hpp"
#include "quicfed/matrix.hpp"
#include "quicfed/regressor.hpp"

namespace quicfed::codec {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kHeaderBytes = 16;

// Model: header (magic "QFMODEL1", m_in, h), then w1 row-major, b1, w2, b2.
Bytes encode_model(const MlpParams& params);
MlpParams decode_model(std::span<const std::uint8_t> bytes);
std::size_t model_size(std::size_t m_in, std::size_t hidden);

void write_model_file(const std::filesystem::path& path, const MlpParams& params);
MlpParams read_model_file(const std::filesystem::path& path);

// Local selection distribution p^l (uplink): header (m, 0), m doubles.
Bytes encode_distribution(const SelectionDistribution& p);
SelectionDistribution decode_distribution(std::span<const std::uint8_t> bytes);

// Global distribution plus derived mask (downlink): header (m, 1), m doubles, m mask bytes.
struct SelectionBroadcast {
  SelectionDistribution distribution;
  FeatureMask mask;
};
Bytes encode_selection(const SelectionBroadcast& msg);
SelectionBroadcast decode_selection(std::span<const std::uint8_t> bytes);

// Feature rows (centralized upload): header (rows, cols), row-major doubles.
Bytes encode_rows(const Matrix& rows);
Matrix decode_rows(std::span<const std::uint8_t> bytes);

}  // namespace quicfed::codec
