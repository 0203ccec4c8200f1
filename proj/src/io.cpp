// Copyright 2026 PronScore contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pronscore/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "pronscore/errors.hpp"

namespace pronscore {

namespace {

constexpr char kFmatMagic[4] = {'F', 'M', 'A', 'T'};
constexpr std::uint32_t kFmatVersion = 1;

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32le(out, bits);
}

float get_f32le(const unsigned char* p) {
  std::uint32_t bits = get_u32le(p);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw ValidationError("error while reading file: " + path);
  }
  return buf.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open file for writing: " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) {
    throw ValidationError("error while writing file: " + path);
  }
}

// Splits a text blob into lines, tolerating a trailing newline and CRLF.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t') return false;
  }
  return true;  // all whitespace
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string loc(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

int parse_int(const std::string& tok, const std::string& path,
              std::size_t line_no, const std::string& what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ValidationError(loc(path, line_no) + ": bad " + what + " '" + tok +
                          "'");
  }
  return value;
}

double parse_double(const std::string& tok, const std::string& path,
                    std::size_t line_no, const std::string& what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ValidationError(loc(path, line_no) + ": bad " + what + " '" + tok +
                          "'");
  }
  return value;
}

int require_phone(const PhoneSet& phones, const std::string& symbol,
                  const std::string& path, std::size_t line_no) {
  auto idx = phones.find(symbol);
  if (!idx) {
    throw ValidationError(loc(path, line_no) + ": unknown phone '" + symbol +
                          "'");
  }
  return *idx;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

FrameMatrix decode_frame_matrix(std::string_view bytes,
                                const std::string& name) {
  constexpr std::size_t kHeaderSize = 4 + 4 * sizeof(std::uint32_t);
  if (bytes.size() < kHeaderSize) {
    throw ValidationError(name + ": truncated header (" +
                          std::to_string(bytes.size()) + " bytes)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kFmatMagic, 4) != 0) {
    throw ValidationError(name + ": bad magic, not a frame-matrix file");
  }
  const std::uint32_t version = get_u32le(p + 4);
  if (version != kFmatVersion) {
    throw ValidationError(name + ": unsupported format version " +
                          std::to_string(version));
  }
  const std::uint32_t kind_tag = get_u32le(p + 8);
  if (kind_tag != 0 && kind_tag != 1) {
    throw ValidationError(name + ": bad kind tag " + std::to_string(kind_tag));
  }
  const std::uint32_t n_frames = get_u32le(p + 12);
  const std::uint32_t dim = get_u32le(p + 16);
  if (dim == 0) {
    throw ValidationError(name + ": dimension must be positive");
  }
  const std::size_t n_values =
      static_cast<std::size_t>(n_frames) * static_cast<std::size_t>(dim);
  const std::size_t expected = kHeaderSize + n_values * sizeof(float);
  if (bytes.size() != expected) {
    throw ValidationError(name + ": payload size mismatch, expected " +
                          std::to_string(expected) + " bytes but file has " +
                          std::to_string(bytes.size()));
  }

  FrameMatrix m;
  m.kind = kind_tag == 0 ? FrameKind::kActivations : FrameKind::kPosteriors;
  m.values = Matrix(n_frames, dim);
  const unsigned char* payload = p + kHeaderSize;
  for (std::size_t t = 0; t < n_frames; ++t) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const std::size_t offset =
          kHeaderSize + (t * dim + c) * sizeof(float);
      const float v = get_f32le(payload + (t * dim + c) * sizeof(float));
      if (!std::isfinite(v)) {
        throw ValidationError(name + ": non-finite value at frame " +
                              std::to_string(t) + ", column " +
                              std::to_string(c) + " (byte offset " +
                              std::to_string(offset) + ")");
      }
      if (m.kind == FrameKind::kPosteriors && v < 0.0f) {
        throw ValidationError(name + ": negative posterior at frame " +
                              std::to_string(t) + ", column " +
                              std::to_string(c));
      }
      m.values(t, c) = static_cast<double>(v);
      row_sum += static_cast<double>(v);
    }
    if (m.kind == FrameKind::kPosteriors && std::fabs(row_sum - 1.0) > 1e-4) {
      throw ValidationError(name + ": posterior row at frame " +
                            std::to_string(t) + " sums to " +
                            fmt_double(row_sum) + ", expected 1 within 1e-4");
    }
  }
  return m;
}

std::string encode_frame_matrix(const FrameMatrix& m) {
  std::string bytes;
  bytes.reserve(20 + m.values.size() * sizeof(float));
  bytes.append(kFmatMagic, 4);
  put_u32le(bytes, kFmatVersion);
  put_u32le(bytes, m.kind == FrameKind::kActivations ? 0u : 1u);
  put_u32le(bytes, static_cast<std::uint32_t>(m.values.rows()));
  put_u32le(bytes, static_cast<std::uint32_t>(m.values.cols()));
  for (std::size_t t = 0; t < m.values.rows(); ++t) {
    for (std::size_t c = 0; c < m.values.cols(); ++c) {
      put_f32le(bytes, static_cast<float>(m.values(t, c)));
    }
  }
  return bytes;
}

FrameMatrix read_frame_matrix(const std::string& path) {
  return decode_frame_matrix(read_file_bytes(path), path);
}

void write_frame_matrix(const std::string& path, const FrameMatrix& m) {
  write_file_bytes(path, encode_frame_matrix(m));
}

PhoneSet read_phone_set(const std::string& path) {
  const auto lines = split_lines(read_file_bytes(path));
  std::vector<std::string> symbols;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 1) {
      throw ValidationError(loc(path, i + 1) +
                            ": expected one phone symbol per line");
    }
    if (!seen.insert(tokens[0]).second) {
      throw ValidationError(loc(path, i + 1) + ": duplicate phone symbol '" +
                            tokens[0] + "'");
    }
    symbols.push_back(tokens[0]);
  }
  if (symbols.empty()) {
    throw ValidationError(path + ": phone set is empty");
  }
  try {
    return PhoneSet(std::move(symbols));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_phone_set(const std::string& path, const PhoneSet& phones) {
  std::string out;
  for (const auto& s : phones.symbols()) {
    out += s;
    out += '\n';
  }
  write_file_bytes(path, out);
}

SenonePhoneMap read_senone_map(const std::string& path,
                               const PhoneSet& phones) {
  const auto lines = split_lines(read_file_bytes(path));
  std::vector<std::pair<int, int>> entries;  // (senone, phone)
  int max_index = -1;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 2) {
      throw ValidationError(loc(path, i + 1) +
                            ": expected 'senone_index phone'");
    }
    const int senone = parse_int(tokens[0], path, i + 1, "senone index");
    if (senone < 0) {
      throw ValidationError(loc(path, i + 1) + ": senone index " +
                            std::to_string(senone) + " is negative");
    }
    const int phone = require_phone(phones, tokens[1], path, i + 1);
    entries.emplace_back(senone, phone);
    if (senone > max_index) max_index = senone;
  }
  if (entries.empty()) {
    throw ValidationError(path + ": senone map is empty");
  }
  SenonePhoneMap map;
  map.phone_of.assign(static_cast<std::size_t>(max_index) + 1, -1);
  for (const auto& [senone, phone] : entries) {
    if (map.phone_of[senone] != -1) {
      throw ValidationError(path + ": duplicate senone index " +
                            std::to_string(senone));
    }
    map.phone_of[senone] = phone;
  }
  for (std::size_t s = 0; s < map.phone_of.size(); ++s) {
    if (map.phone_of[s] == -1) {
      throw ValidationError(path + ": senone index " + std::to_string(s) +
                            " is missing (indices must cover 0.." +
                            std::to_string(max_index) + ")");
    }
  }
  return map;
}

void write_senone_map(const std::string& path, const SenonePhoneMap& map,
                      const PhoneSet& phones) {
  std::string out;
  for (std::size_t s = 0; s < map.phone_of.size(); ++s) {
    out += std::to_string(s);
    out += ' ';
    out += phones.symbol(map.phone_of[s]);
    out += '\n';
  }
  write_file_bytes(path, out);
}

std::map<std::string, Alignment> read_alignments(const std::string& path,
                                                 const PhoneSet& phones) {
  const auto lines = split_lines(read_file_bytes(path));
  std::map<std::string, Alignment> alignments;
  std::map<std::string, int> last_end;  // exclusive end of previous segment
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 4) {
      throw ValidationError(loc(path, i + 1) +
                            ": expected 'utt_id phone start_frame duration'");
    }
    const std::string& utt = tokens[0];
    AlignSegment seg;
    seg.phone = require_phone(phones, tokens[1], path, i + 1);
    seg.start_frame = parse_int(tokens[2], path, i + 1, "start frame");
    seg.duration = parse_int(tokens[3], path, i + 1, "duration");
    if (seg.start_frame < 0) {
      throw ValidationError(loc(path, i + 1) + ": negative start frame");
    }
    if (seg.duration <= 0) {
      throw ValidationError(loc(path, i + 1) + ": duration must be positive");
    }
    auto it = last_end.find(utt);
    if (it != last_end.end() && seg.start_frame < it->second) {
      throw ValidationError(
          loc(path, i + 1) + ": segment for utterance '" + utt +
          "' starts at frame " + std::to_string(seg.start_frame) +
          " before the previous segment ends at frame " +
          std::to_string(it->second) + " (segments must be ordered and "
          "non-overlapping)");
    }
    last_end[utt] = seg.start_frame + seg.duration;
    alignments[utt].segments.push_back(seg);
  }
  return alignments;
}

void write_alignments(const std::string& path,
                      const std::map<std::string, Alignment>& alignments,
                      const PhoneSet& phones) {
  std::string out;
  for (const auto& [utt, alignment] : alignments) {
    for (const auto& seg : alignment.segments) {
      out += utt;
      out += ' ';
      out += phones.symbol(seg.phone);
      out += ' ';
      out += std::to_string(seg.start_frame);
      out += ' ';
      out += std::to_string(seg.duration);
      out += '\n';
    }
  }
  write_file_bytes(path, out);
}

std::vector<PhoneInstanceLabel> read_labels(const std::string& path,
                                            const PhoneSet& phones) {
  const auto lines = split_lines(read_file_bytes(path));
  std::vector<PhoneInstanceLabel> labels;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_comment_or_blank(lines[i])) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 4) {
      throw ValidationError(loc(path, i + 1) +
                            ": expected 'utt_id segment_index phone label'");
    }
    PhoneInstanceLabel entry;
    entry.utterance_id = tokens[0];
    entry.segment_index = parse_int(tokens[1], path, i + 1, "segment index");
    if (entry.segment_index < 0) {
      throw ValidationError(loc(path, i + 1) + ": negative segment index");
    }
    entry.phone = require_phone(phones, tokens[2], path, i + 1);
    entry.label = parse_int(tokens[3], path, i + 1, "label");
    if (entry.label != 0 && entry.label != 1) {
      throw ValidationError(loc(path, i + 1) + ": label must be 0 or 1, got " +
                            tokens[3]);
    }
    const std::string key =
        entry.utterance_id + "\x1f" + std::to_string(entry.segment_index);
    if (!seen.insert(key).second) {
      throw ValidationError(loc(path, i + 1) +
                            ": duplicate label for utterance '" +
                            entry.utterance_id + "' segment " +
                            std::to_string(entry.segment_index));
    }
    labels.push_back(std::move(entry));
  }
  return labels;
}

void write_labels(const std::string& path,
                  const std::vector<PhoneInstanceLabel>& labels,
                  const PhoneSet& phones) {
  std::string out;
  for (const auto& entry : labels) {
    out += entry.utterance_id;
    out += ' ';
    out += std::to_string(entry.segment_index);
    out += ' ';
    out += phones.symbol(entry.phone);
    out += ' ';
    out += std::to_string(entry.label);
    out += '\n';
  }
  write_file_bytes(path, out);
}

void write_scores_csv(const std::string& path,
                      const std::vector<InstanceScore>& scores,
                      const PhoneSet& phones) {
  std::string out = "utt_id,segment_index,phone,score,label\n";
  for (const auto& s : scores) {
    out += s.utterance_id;
    out += ',';
    out += std::to_string(s.segment_index);
    out += ',';
    out += phones.symbol(s.phone);
    out += ',';
    out += fmt_double(s.score);
    out += ',';
    out += std::to_string(s.label);
    out += '\n';
  }
  write_file_bytes(path, out);
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  const auto lines = split_lines(read_file_bytes(path));
  if (lines.empty()) {
    throw ValidationError(path + ": empty scores file");
  }
  if (lines[0] != "utt_id,segment_index,phone,score,label") {
    throw ValidationError(path + ": bad header '" + lines[0] + "'");
  }
  std::vector<ScoreRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = lines[i].find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(lines[i].substr(start));
        break;
      }
      fields.push_back(lines[i].substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 5) {
      throw ValidationError(loc(path, i + 1) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
    }
    ScoreRow row;
    row.utterance_id = fields[0];
    row.segment_index = parse_int(fields[1], path, i + 1, "segment index");
    row.phone = fields[2];
    if (row.phone.empty()) {
      throw ValidationError(loc(path, i + 1) + ": empty phone field");
    }
    row.score = parse_double(fields[3], path, i + 1, "score");
    if (!std::isfinite(row.score)) {
      throw ValidationError(loc(path, i + 1) + ": non-finite score");
    }
    row.label = parse_int(fields[4], path, i + 1, "label");
    if (row.label != 0 && row.label != 1) {
      throw ValidationError(loc(path, i + 1) + ": label must be 0 or 1");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pronscore
