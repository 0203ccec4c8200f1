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

#include "pronscore/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "pronscore/errors.hpp"
#include "pronscore/io.hpp"

using nlohmann::json;

namespace pronscore {

namespace {

constexpr const char* kFormatName = "pronscore-checkpoint";
constexpr int kFormatVersion = 1;

Matrix vector_as_row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return m;
}

std::vector<double> row_as_vector(const Matrix& m, const std::string& name) {
  if (m.rows() != 1) {
    throw ValidationError("checkpoint tensor '" + name +
                          "' must have exactly one row");
  }
  std::vector<double> v(m.cols());
  for (std::size_t i = 0; i < m.cols(); ++i) v[i] = m(0, i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  checkpoint.config.validate();
  const auto& c = checkpoint.config;
  const auto& p = checkpoint.params;

  std::vector<std::pair<std::string, Matrix>> tensors;
  if (c.use_hidden) {
    tensors.emplace_back("hidden_w", p.hidden_w);
  }
  if (c.use_batchnorm) {
    tensors.emplace_back("bn_gamma", vector_as_row(p.bn_gamma));
    tensors.emplace_back("bn_beta", vector_as_row(p.bn_beta));
    tensors.emplace_back("bn_running_mean", vector_as_row(p.bn_running_mean));
    tensors.emplace_back("bn_running_var", vector_as_row(p.bn_running_var));
  }
  tensors.emplace_back("w", p.w);
  tensors.emplace_back("b", vector_as_row(p.b));

  std::string payload;
  json table = json::array();
  for (const auto& [name, matrix] : tensors) {
    FrameMatrix block;
    block.kind = FrameKind::kActivations;
    block.values = matrix;
    const std::string bytes = encode_frame_matrix(block);
    table.push_back({{"name", name},
                     {"offset", payload.size()},
                     {"size", bytes.size()},
                     {"rows", matrix.rows()},
                     {"cols", matrix.cols()}});
    payload += bytes;
  }

  json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["config"] = {{"input_dim", c.input_dim},
                      {"use_hidden", c.use_hidden},
                      {"hidden_dim", c.hidden_dim},
                      {"use_batchnorm", c.use_batchnorm},
                      {"dropout_rate", c.dropout_rate},
                      {"n_phones", c.n_phones}};
  header["seed"] = checkpoint.seed;
  header["stage"] = checkpoint.stage;
  header["tensors"] = table;
  const std::string header_bytes = header.dump();

  std::string out;
  const std::uint32_t header_len =
      static_cast<std::uint32_t>(header_bytes.size());
  out.push_back(static_cast<char>(header_len & 0xff));
  out.push_back(static_cast<char>((header_len >> 8) & 0xff));
  out.push_back(static_cast<char>((header_len >> 16) & 0xff));
  out.push_back(static_cast<char>((header_len >> 24) & 0xff));
  out += header_bytes;
  out += payload;

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw ValidationError("cannot open file for writing: " + path);
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  file.flush();
  if (!file.good()) {
    throw ValidationError("error while writing file: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw ValidationError("cannot open checkpoint: " + path);
  }
  std::ostringstream buf;
  buf << file.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 4) {
    throw ValidationError(path + ": truncated checkpoint");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t header_len =
      static_cast<std::uint32_t>(raw[0]) |
      (static_cast<std::uint32_t>(raw[1]) << 8) |
      (static_cast<std::uint32_t>(raw[2]) << 16) |
      (static_cast<std::uint32_t>(raw[3]) << 24);
  if (bytes.size() < 4 + static_cast<std::size_t>(header_len)) {
    throw ValidationError(path + ": truncated checkpoint header");
  }

  json header;
  try {
    header = json::parse(bytes.substr(4, header_len));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid checkpoint header: " + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormatName) {
    throw ValidationError(path + ": not a checkpoint file");
  }
  if (header.value("version", 0) != kFormatVersion) {
    throw ValidationError(path + ": unsupported checkpoint version");
  }

  Checkpoint checkpoint;
  try {
    const json& c = header.at("config");
    checkpoint.config.input_dim = c.at("input_dim").get<int>();
    checkpoint.config.use_hidden = c.at("use_hidden").get<bool>();
    checkpoint.config.hidden_dim = c.at("hidden_dim").get<int>();
    checkpoint.config.use_batchnorm = c.at("use_batchnorm").get<bool>();
    checkpoint.config.dropout_rate = c.at("dropout_rate").get<double>();
    checkpoint.config.n_phones = c.at("n_phones").get<int>();
    checkpoint.seed = header.at("seed").get<std::uint64_t>();
    checkpoint.stage = header.at("stage").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed checkpoint header: " + e.what());
  }
  checkpoint.config.validate();

  const std::string payload = bytes.substr(4 + header_len);
  auto read_tensor = [&](const std::string& name) -> Matrix {
    for (const auto& entry : header.at("tensors")) {
      if (entry.at("name").get<std::string>() != name) continue;
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t size = entry.at("size").get<std::size_t>();
      if (offset + size > payload.size()) {
        throw ValidationError(path + ": tensor '" + name +
                              "' extends past the end of the file");
      }
      const FrameMatrix block = decode_frame_matrix(
          std::string_view(payload).substr(offset, size),
          path + " tensor '" + name + "'");
      if (block.values.rows() != entry.at("rows").get<std::size_t>() ||
          block.values.cols() != entry.at("cols").get<std::size_t>()) {
        throw ValidationError(path + ": tensor '" + name +
                              "' shape does not match the header table");
      }
      return block.values;
    }
    throw ValidationError(path + ": missing tensor '" + name + "'");
  };

  const auto& c = checkpoint.config;
  auto& p = checkpoint.params;
  if (c.use_hidden) {
    p.hidden_w = read_tensor("hidden_w");
    if (p.hidden_w.rows() != static_cast<std::size_t>(c.hidden_dim) ||
        p.hidden_w.cols() != static_cast<std::size_t>(c.input_dim)) {
      throw ValidationError(path + ": hidden weight shape does not match "
                            "the config");
    }
  }
  const std::size_t d_f = static_cast<std::size_t>(c.feature_dim());
  if (c.use_batchnorm) {
    p.bn_gamma = row_as_vector(read_tensor("bn_gamma"), "bn_gamma");
    p.bn_beta = row_as_vector(read_tensor("bn_beta"), "bn_beta");
    p.bn_running_mean =
        row_as_vector(read_tensor("bn_running_mean"), "bn_running_mean");
    p.bn_running_var =
        row_as_vector(read_tensor("bn_running_var"), "bn_running_var");
    if (p.bn_gamma.size() != d_f || p.bn_beta.size() != d_f ||
        p.bn_running_mean.size() != d_f || p.bn_running_var.size() != d_f) {
      throw ValidationError(path + ": batchnorm parameter sizes do not "
                            "match the config");
    }
  }
  p.w = read_tensor("w");
  if (p.w.rows() != static_cast<std::size_t>(c.n_phones) ||
      p.w.cols() != d_f) {
    throw ValidationError(path + ": output weight shape does not match the "
                          "config");
  }
  p.b = row_as_vector(read_tensor("b"), "b");
  if (p.b.size() != static_cast<std::size_t>(c.n_phones)) {
    throw ValidationError(path + ": output bias size does not match the "
                          "config");
  }
  return checkpoint;
}

}  // namespace pronscore
