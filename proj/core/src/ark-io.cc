// core/src/ark-io.cc

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

#include "chainforge/ark-io.h"

#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace chainforge {

namespace {

void PutU32(std::ostream &os, std::uint32_t v) {
  // Explicit little-endian encoding keeps archives byte-identical across
  // hosts.
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void PutF32(std::ostream &os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  PutU32(os, v);
}

[[noreturn]] void Fail(const std::string &what, int64 offset) {
  throw std::runtime_error(what + " at offset " + std::to_string(offset));
}

// Reads n bytes or dies with a truncation error.
void GetBytes(std::istream &is, char *buf, size_t n, int64 *pos,
              const char *what) {
  is.read(buf, std::streamsize(n));
  if (size_t(is.gcount()) != n) Fail(std::string("truncated ") + what, *pos);
  *pos += int64(n);
}

std::uint32_t GetU32(std::istream &is, int64 *pos, const char *what) {
  char b[4];
  GetBytes(is, b, 4, pos, what);
  return (std::uint32_t(std::uint8_t(b[0]))) |
         (std::uint32_t(std::uint8_t(b[1])) << 8) |
         (std::uint32_t(std::uint8_t(b[2])) << 16) |
         (std::uint32_t(std::uint8_t(b[3])) << 24);
}

void CheckKey(const std::string &key) {
  if (key.empty()) throw std::invalid_argument("empty archive key");
  for (char c : key)
    if (std::isspace(static_cast<unsigned char>(c)) || c == '\0')
      throw std::invalid_argument("archive key '" + key +
                                  "' contains whitespace or NUL");
}

}  // namespace

void WriteMatrixValue(const Mat &m, std::ostream &os) {
  os.put('\0');
  os.put('B');
  os.write("FM ", 3);
  os.put('\x04');
  PutU32(os, std::uint32_t(m.NumRows()));
  os.put('\x04');
  PutU32(os, std::uint32_t(m.NumCols()));
  for (size_t i = 0; i < m.NumElements(); i++) PutF32(os, m.Data()[i]);
}

Mat ReadMatrixValue(std::istream &is, int64 base) {
  int64 pos = base;
  char marker[2];
  GetBytes(is, marker, 2, &pos, "binary marker");
  if (marker[0] != '\0' || marker[1] != 'B')
    Fail("bad binary marker", base);
  char magic[3];
  int64 magic_at = pos;
  GetBytes(is, magic, 3, &pos, "matrix magic");
  bool is_double;
  if (std::memcmp(magic, "FM ", 3) == 0) {
    is_double = false;
  } else if (std::memcmp(magic, "DM ", 3) == 0) {
    is_double = true;
  } else {
    Fail("bad matrix magic", magic_at);
  }

  auto get_dim = [&](const char *what) {
    char size_byte;
    GetBytes(is, &size_byte, 1, &pos, what);
    if (size_byte != '\x04') Fail(std::string("bad size marker for ") + what,
                                  pos - 1);
    std::int32_t v = std::int32_t(GetU32(is, &pos, what));
    if (v < 0) Fail(std::string("negative matrix dimension in ") + what,
                    pos - 4);
    return v;
  };
  std::int32_t rows = get_dim("row count");
  std::int32_t cols = get_dim("column count");

  Mat m(rows, cols);
  if (!is_double) {
    for (size_t i = 0; i < m.NumElements(); i++) {
      std::uint32_t v = GetU32(is, &pos, "matrix data");
      float f;
      std::memcpy(&f, &v, 4);
      m.Data()[i] = f;
    }
  } else {
    for (size_t i = 0; i < m.NumElements(); i++) {
      char b[8];
      GetBytes(is, b, 8, &pos, "matrix data");
      std::uint64_t v = 0;
      for (int k = 7; k >= 0; k--)
        v = (v << 8) | std::uint64_t(std::uint8_t(b[k]));
      double d;
      std::memcpy(&d, &v, 8);
      m.Data()[i] = float(d);
    }
  }
  return m;
}

void WriteMatrixArk(const std::vector<ArkRecord> &records, std::ostream &os,
                    std::vector<int64> *offsets) {
  if (offsets != nullptr) offsets->clear();
  int64 pos = 0;
  for (const ArkRecord &rec : records) {
    CheckKey(rec.key);
    os.write(rec.key.data(), std::streamsize(rec.key.size()));
    os.put(' ');
    pos += int64(rec.key.size()) + 1;
    if (offsets != nullptr) offsets->push_back(pos);
    WriteMatrixValue(rec.value, os);
    pos += 2 + 3 + 5 + 5 + int64(rec.value.NumElements()) * 4;
  }
  if (!os) throw std::runtime_error("archive write failed");
}

std::vector<ArkRecord> ReadMatrixArk(std::istream &is) {
  std::vector<ArkRecord> records;
  int64 pos = 0;
  for (;;) {
    std::string key;
    int c = is.get();
    if (c == EOF) break;  // clean end between records
    int64 key_at = pos;
    while (c != EOF && c != ' ') {
      if (c == '\0')
        Fail("NUL byte inside record key", key_at + int64(key.size()));
      key.push_back(char(c));
      c = is.get();
    }
    if (c == EOF) Fail("truncated record key", key_at);
    pos += int64(key.size()) + 1;
    if (key.empty()) Fail("empty record key", key_at);
    ArkRecord rec;
    rec.key = std::move(key);
    rec.value = ReadMatrixValue(is, pos);
    pos += 2 + 3 + 5 + 5 + int64(rec.value.NumElements()) * 4;
    records.push_back(std::move(rec));
  }
  return records;
}

void WriteMatrixArkFile(const std::vector<ArkRecord> &records,
                        const std::string &path, std::vector<int64> *offsets) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WriteMatrixArk(records, os, offsets);
}

std::vector<ArkRecord> ReadMatrixArkFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadMatrixArk(is);
}

void WriteScp(const std::vector<ScpEntry> &entries, std::ostream &os) {
  for (const ScpEntry &e : entries) {
    CheckKey(e.key);
    os << e.key << ' ' << e.path << ':' << e.offset << '\n';
  }
}

std::vector<ScpEntry> ReadScp(std::istream &is) {
  std::vector<ScpEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    if (line.empty()) continue;
    auto fail = [line_no](const std::string &what) {
      throw std::runtime_error("scp parse error at line " +
                               std::to_string(line_no) + ": " + what);
    };
    std::istringstream ss(line);
    ScpEntry e;
    std::string target;
    if (!(ss >> e.key >> target)) fail("expected '<key> <path>:<offset>'");
    std::string rest;
    if (ss >> rest) fail("trailing tokens");
    size_t colon = target.rfind(':');
    if (colon == std::string::npos || colon == 0 ||
        colon + 1 == target.size())
      fail("missing ':<offset>' suffix");
    e.path = target.substr(0, colon);
    try {
      size_t used = 0;
      e.offset = std::stoll(target.substr(colon + 1), &used);
      if (used != target.size() - colon - 1 || e.offset < 0)
        fail("bad offset");
    } catch (const std::logic_error &) {
      fail("bad offset");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void WriteScpFile(const std::vector<ScpEntry> &entries,
                  const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WriteScp(entries, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<ScpEntry> ReadScpFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadScp(is);
}

void WriteArkWithScp(const std::vector<ArkRecord> &records,
                     const std::string &ark_path,
                     const std::string &scp_path) {
  std::vector<int64> offsets;
  WriteMatrixArkFile(records, ark_path, &offsets);
  std::vector<ScpEntry> entries(records.size());
  for (size_t i = 0; i < records.size(); i++)
    entries[i] = {records[i].key, ark_path, offsets[i]};
  WriteScpFile(entries, scp_path);
}

RandomAccessMatrixReader::RandomAccessMatrixReader(const std::string &scp_path)
    : entries_(ReadScpFile(scp_path)) {
  for (size_t i = 0; i < entries_.size(); i++) by_key_[entries_[i].key] = i;
}

bool RandomAccessMatrixReader::HasKey(const std::string &key) const {
  return by_key_.count(key) != 0;
}

Mat RandomAccessMatrixReader::Read(const std::string &key) const {
  auto it = by_key_.find(key);
  if (it == by_key_.end())
    throw std::runtime_error("key not present in scp: " + key);
  const ScpEntry &e = entries_[it->second];
  std::ifstream is(e.path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + e.path);
  is.seekg(e.offset);
  if (!is) throw std::runtime_error("cannot seek to offset " +
                                    std::to_string(e.offset) + " in " + e.path);
  return ReadMatrixValue(is, e.offset);
}

}  // namespace chainforge
