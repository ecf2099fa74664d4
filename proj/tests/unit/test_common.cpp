#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "xqmap/common.hpp"

using namespace xqmap;

TEST_CASE("base64 matches the RFC 4648 vectors") {
  auto enc = [](std::string_view s) {
    return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foob") == "Zm9vYg==");
  CHECK(enc("fooba") == "Zm9vYmE=");
  CHECK(enc("foobar") == "Zm9vYmFy");
  auto dec = base64_decode("Zm9vYmE=");
  CHECK(std::string(dec.begin(), dec.end()) == "fooba");
  CHECK_THROWS_AS(base64_decode("Zm9"), FormatError);
  CHECK_THROWS_AS(base64_decode("Zm9v!A=="), FormatError);
}

TEST_CASE("double payloads are little-endian and lossless") {
  std::vector<double> values = {0.0, -0.0, 1.0, -2.5, 1e-300, std::numeric_limits<double>::max(), 0.1 + 0.2};
  auto back = decode_doubles(encode_doubles(values));
  REQUIRE(back.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(std::memcmp(&back[i], &values[i], sizeof(double)) == 0);
  }
  // 1.0 is 0x3FF0000000000000; little-endian puts 0xF0 0x3F last.
  auto bytes = base64_decode(encode_doubles(std::vector<double>{1.0}));
  REQUIRE(bytes.size() == 8);
  CHECK(bytes[6] == 0xF0);
  CHECK(bytes[7] == 0x3F);
  CHECK_THROWS_AS(decode_doubles(base64_encode(std::vector<std::uint8_t>{1, 2, 3})), FormatError);
}

TEST_CASE("format3 rounds to three decimals without negative zero") {
  CHECK(format3(0.5574) == "0.557");
  CHECK(format3(-0.02) == "-0.020");
  CHECK(format3(-0.0004) == "0.000");
  CHECK(format3(0.0) == "0.000");
  CHECK(format3(1.0725) == "1.073");
}

TEST_CASE("seed mixing and hashing are stable") {
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(from_hex(to_hex(0x0123456789abcdefULL)) == 0x0123456789abcdefULL);
  CHECK(to_hex(255).size() == 16);
}

TEST_CASE("errors carry machine-readable kinds") {
  CHECK(std::string(BoundsError("x").kind()) == "bounds");
  CHECK(std::string(PlacementError("x").kind()) == "placement_failure");
  CHECK(std::string(EpisodeFinishedError("x").kind()) == "episode_finished");
  CHECK(std::string(MissingPairError("x").kind()) == "missing_pair");
}
