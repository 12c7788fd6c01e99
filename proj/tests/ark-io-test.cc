// tests/ark-io-test.cc

// Copyright 2024-2026  Chainforge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "chainforge/ark-io.h"
#include "doctest.h"
#include "testing-util.h"

namespace chainforge {
namespace {

using testing::FillGaussian;
using testing::TempPath;
using testing::ThrownMessage;

std::vector<ArkRecord> RandomRecords(int32 count, Rng *rng) {
  std::vector<ArkRecord> records(count);
  for (int32 i = 0; i < count; i++) {
    records[i].key = "utt-" + std::to_string(i);
    records[i].value.Resize(1 + int32(rng->UniformInt(6)),
                            1 + int32(rng->UniformInt(9)));
    FillGaussian(&records[i].value, rng);
  }
  return records;
}

std::string Serialize(const std::vector<ArkRecord> &records,
                      std::vector<int64> *offsets = nullptr) {
  std::ostringstream os;
  WriteMatrixArk(records, os, offsets);
  return os.str();
}

// Little-endian encoding helpers for handcrafting streams.
void AppendU32(std::string *s, std::uint32_t v) {
  for (int i = 0; i < 4; i++) s->push_back(char((v >> (8 * i)) & 0xff));
}

void AppendF64(std::string *s, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; i++) s->push_back(char((v >> (8 * i)) & 0xff));
}

TEST_SUITE("ark-io") {

TEST_CASE("worked record: one-by-one zero matrix under key 'a'") {
  ArkRecord rec;
  rec.key = "a";
  rec.value.Resize(1, 1);
  std::vector<int64> offsets;
  std::string bytes = Serialize({rec}, &offsets);

  const unsigned char expected[21] = {
      0x61, 0x20, 0x00, 0x42, 0x46, 0x4d, 0x20, 0x04, 0x01, 0x00, 0x00,
      0x00, 0x04, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
  REQUIRE(bytes.size() == 21);
  for (int i = 0; i < 21; i++)
    CHECK(static_cast<unsigned char>(bytes[i]) == expected[i]);
  // The scp offset points at the 0x00 binary marker, after "a ".
  REQUIRE(offsets.size() == 1);
  CHECK(offsets[0] == 2);
}

TEST_CASE("archive round-trips byte-identically") {
  Rng rng(21);
  std::vector<ArkRecord> records = RandomRecords(50, &rng);
  std::string bytes = Serialize(records);

  std::istringstream is(bytes);
  std::vector<ArkRecord> read = ReadMatrixArk(is);
  REQUIRE(read.size() == records.size());
  for (size_t i = 0; i < read.size(); i++) {
    CHECK(read[i].key == records[i].key);
    CHECK(read[i].value == records[i].value);
  }
  CHECK(Serialize(read) == bytes);
}

TEST_CASE("empty matrices and empty archives survive the round trip") {
  ArkRecord rec;
  rec.key = "nothing";
  rec.value.Resize(0, 0);
  std::string bytes = Serialize({rec});
  std::istringstream is(bytes);
  std::vector<ArkRecord> read = ReadMatrixArk(is);
  REQUIRE(read.size() == 1);
  CHECK(read[0].value.NumRows() == 0);
  CHECK(read[0].value.NumCols() == 0);

  std::istringstream empty("");
  CHECK(ReadMatrixArk(empty).empty());
}

TEST_CASE("float64 payloads are accepted on read and narrowed") {
  std::string bytes = "d ";
  bytes.push_back('\0');
  bytes += "BDM ";
  bytes.push_back('\x04');
  AppendU32(&bytes, 1);
  bytes.push_back('\x04');
  AppendU32(&bytes, 2);
  AppendF64(&bytes, 1.5);
  AppendF64(&bytes, -0.25);

  std::istringstream is(bytes);
  std::vector<ArkRecord> read = ReadMatrixArk(is);
  REQUIRE(read.size() == 1);
  CHECK(read[0].key == "d");
  REQUIRE(read[0].value.NumRows() == 1);
  REQUIRE(read[0].value.NumCols() == 2);
  CHECK(read[0].value(0, 0) == 1.5f);
  CHECK(read[0].value(0, 1) == -0.25f);
}

TEST_CASE("random access agrees with sequential reading") {
  Rng rng(22);
  std::vector<ArkRecord> records = RandomRecords(20, &rng);
  std::string ark = TempPath("ra.ark"), scp = TempPath("ra.scp");
  WriteArkWithScp(records, ark, scp);

  std::vector<ArkRecord> sequential = ReadMatrixArkFile(ark);
  RandomAccessMatrixReader reader(scp);
  REQUIRE(reader.Entries().size() == records.size());
  CHECK(reader.HasKey("utt-0"));
  CHECK_FALSE(reader.HasKey("utt-999"));
  // Walk backwards so no access is in file order.
  for (size_t i = records.size(); i-- > 0;) {
    Mat m = reader.Read(records[i].key);
    CHECK(m == sequential[i].value);
  }
  CHECK(ThrownMessage([&] { reader.Read("utt-999"); })
            .find("key not present in scp") != std::string::npos);
  std::remove(ark.c_str());
  std::remove(scp.c_str());
}

TEST_CASE("keys are checked on write") {
  ArkRecord rec;
  rec.value.Resize(1, 1);
  rec.key = "";
  CHECK(ThrownMessage([&] { Serialize({rec}); }).find("empty archive key") !=
        std::string::npos);
  rec.key = "bad key";
  CHECK(ThrownMessage([&] { Serialize({rec}); })
            .find("contains whitespace") != std::string::npos);
  rec.key = std::string("nu\0l", 4);
  CHECK_THROWS_AS(Serialize({rec}), std::invalid_argument);
}

TEST_CASE("corrupted streams fail with located errors") {
  ArkRecord rec;
  rec.key = "k";
  rec.value.Resize(2, 2);
  rec.value(1, 1) = 3.0f;
  std::string good = Serialize({rec});

  auto read_err = [](std::string bytes) {
    return ThrownMessage([&] {
      std::istringstream is(bytes);
      ReadMatrixArk(is);
    });
  };

  std::string truncated = good.substr(0, good.size() - 2);
  CHECK(read_err(truncated).find("truncated matrix data") !=
        std::string::npos);

  std::string bad_marker = good;
  bad_marker[2] = 'X';  // was 0x00
  CHECK(read_err(bad_marker).find("bad binary marker") != std::string::npos);

  std::string bad_magic = good;
  bad_magic[4] = 'X';  // was 'F'
  CHECK(read_err(bad_magic).find("bad matrix magic") != std::string::npos);

  std::string bad_size = good;
  bad_size[7] = '\x08';  // was the 0x04 size marker before the row count
  CHECK(read_err(bad_size).find("bad size marker") != std::string::npos);

  std::string no_key_end = "justakey";
  CHECK(read_err(no_key_end).find("truncated record key") !=
        std::string::npos);

  // Offsets in the message locate the failure.
  CHECK(read_err(bad_marker).find("at offset 2") != std::string::npos);
}

TEST_CASE("scp files round-trip and reject malformed lines") {
  std::vector<ScpEntry> entries = {{"a", "/tmp/x.ark", 2},
                                   {"b", "dir/y.ark", 1234567890123LL}};
  std::ostringstream os;
  WriteScp(entries, os);
  CHECK(os.str() == "a /tmp/x.ark:2\nb dir/y.ark:1234567890123\n");

  std::istringstream is(os.str());
  std::vector<ScpEntry> read = ReadScp(is);
  REQUIRE(read.size() == 2);
  CHECK(read[1].key == "b");
  CHECK(read[1].path == "dir/y.ark");
  CHECK(read[1].offset == 1234567890123LL);

  auto scp_err = [](const std::string &text) {
    return ThrownMessage([&] {
      std::istringstream ss(text);
      ReadScp(ss);
    });
  };
  CHECK(scp_err("a\n").find("scp parse error at line 1") != std::string::npos);
  CHECK(scp_err("ok x.ark:0\nb x.ark\n").find("line 2") != std::string::npos);
  CHECK(scp_err("a x.ark:0 extra\n").find("trailing tokens") !=
        std::string::npos);
  CHECK(scp_err("a x.ark:\n").find("missing ':<offset>'") !=
        std::string::npos);
  CHECK(scp_err("a x.ark:12junk\n").find("bad offset") != std::string::npos);
  CHECK(scp_err("a x.ark:-3\n").find("bad offset") != std::string::npos);
  // Blank lines are tolerated; numbering still counts them.
  CHECK(scp_err("\n\nc bad\n").find("line 3") != std::string::npos);
}

}  // TEST_SUITE

}  // namespace
}  // namespace chainforge
