// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef USERDP_IO_HPP
#define USERDP_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "userdp/common.hpp"

namespace userdp {

// Floats are printed with 12 significant digits so tabulated values
// round-trip through text without visible drift.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Comment-style metadata header embedded in every output file: toolkit
// version, the full invocation, and the sampling caveat.
inline std::string metadata_header(const std::string& invocation) {
  std::ostringstream out;
  out << "# userdp " << kVersion << "\n";
  out << "# invocation: " << invocation << "\n";
  out << "# caveat: " << kSamplingCaveat << "\n";
  return out.str();
}

// Writes content to path via a temp file and rename, so readers never see a
// partial file.
inline void write_file_atomic(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open for writing: " + tmp);
    }
    out << content;
    if (!out) {
      throw std::runtime_error("short write to: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("rename failed for: " + path);
  }
}

inline std::string join_csv(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace userdp

#endif  // USERDP_IO_HPP
