#ifndef XQMAP_COMMON_HPP_
#define XQMAP_COMMON_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xqmap {

// Every library error derives from Error. kind() is a stable machine-readable
// tag used by the CLI error line and the HTTP layer.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define XQMAP_DEFINE_ERROR(Name, tag)                         \
  class Name : public Error {                                 \
   public:                                                    \
    using Error::Error;                                       \
    const char* kind() const noexcept override { return tag; } \
  }

XQMAP_DEFINE_ERROR(BoundsError, "bounds");
XQMAP_DEFINE_ERROR(ContractError, "contract");
XQMAP_DEFINE_ERROR(PlacementError, "placement_failure");
XQMAP_DEFINE_ERROR(EpisodeFinishedError, "episode_finished");
XQMAP_DEFINE_ERROR(SelectionError, "selection");
XQMAP_DEFINE_ERROR(DimensionError, "dimension_mismatch");
XQMAP_DEFINE_ERROR(MissingPairError, "missing_pair");
XQMAP_DEFINE_ERROR(FormatError, "format");
XQMAP_DEFINE_ERROR(ConfigError, "config");
XQMAP_DEFINE_ERROR(DivergenceError, "nan_loss");
XQMAP_DEFINE_ERROR(IoError, "io");

#undef XQMAP_DEFINE_ERROR

// Grid coordinate: u is the column, v is the row.
struct Pixel {
  int u = 0;
  int v = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// SplitMix64 step; used to derive independent seeds from one root seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t state = 14695981039346656037ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string to_hex(std::uint64_t value);
std::uint64_t from_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian 64-bit float packing for parameter payloads.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view base64);

// Fixed three-decimal rendering; never prints "-0.000".
std::string format3(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace xqmap

#endif  // XQMAP_COMMON_HPP_
