// chainforge/ark-io.h

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

#ifndef CHAINFORGE_ARK_IO_H_
#define CHAINFORGE_ARK_IO_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "chainforge/matrix.h"

namespace chainforge {

// One keyed matrix of a binary archive.
struct ArkRecord {
  std::string key;
  Mat value;
};

// Binary archive record layout (byte-compatible with the common speech
// toolchain format):
//
//   <key bytes> 0x20 0x00 'B' "FM " 0x04 <rows:int32 LE> 0x04 <cols:int32 LE>
//   <rows*cols float32 LE, row-major>
//
// "DM " (float64 payload) is accepted on read and converted to float32;
// it is never written.  Keys must be non-empty and contain no whitespace
// or NUL bytes.

// Writes records in order; if `offsets` is non-null it receives, per
// record, the stream offset of the 0x00 binary marker (the value an scp
// line points at).
void WriteMatrixArk(const std::vector<ArkRecord> &records, std::ostream &os,
                    std::vector<int64> *offsets = nullptr);
std::vector<ArkRecord> ReadMatrixArk(std::istream &is);

void WriteMatrixArkFile(const std::vector<ArkRecord> &records,
                        const std::string &path,
                        std::vector<int64> *offsets = nullptr);
std::vector<ArkRecord> ReadMatrixArkFile(const std::string &path);

// Reads one matrix value starting at the 0x00 'B' marker.  `base` is the
// absolute offset of the marker, used only for error messages.
Mat ReadMatrixValue(std::istream &is, int64 base);

// Writes one binary matrix value (the part after the "<key> " prefix of an
// archive record) to `os`.
void WriteMatrixValue(const Mat &m, std::ostream &os);

// Script-file lines are "<key> <path>:<offset>".
struct ScpEntry {
  std::string key;
  std::string path;
  int64 offset = 0;
};

void WriteScp(const std::vector<ScpEntry> &entries, std::ostream &os);
std::vector<ScpEntry> ReadScp(std::istream &is);
void WriteScpFile(const std::vector<ScpEntry> &entries,
                  const std::string &path);
std::vector<ScpEntry> ReadScpFile(const std::string &path);

// Writes the archive and its companion script file in one go.
void WriteArkWithScp(const std::vector<ArkRecord> &records,
                     const std::string &ark_path, const std::string &scp_path);

// Random access through a script file; each Read opens the target archive
// and seeks, so iteration order is free.
class RandomAccessMatrixReader {
 public:
  explicit RandomAccessMatrixReader(const std::string &scp_path);

  bool HasKey(const std::string &key) const;
  Mat Read(const std::string &key) const;
  const std::vector<ScpEntry> &Entries() const { return entries_; }

 private:
  std::vector<ScpEntry> entries_;
  std::map<std::string, size_t> by_key_;
};

}  // namespace chainforge

#endif  // CHAINFORGE_ARK_IO_H_
