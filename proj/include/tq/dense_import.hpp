#pragma once

// Dense import directory: manifest.json plus one raw little-endian file per
// tensor.
//
//   {"tensors": [{"name": "block.0.linear1", "shape": [256, 64],
//                 "width": 4, "file": "block.0.linear1.bin"}, ...]}
//
// width is bytes per element: 2 (bf16), 4 (f32) or 8 (f64). Tensors keep
// their width when converted to dense TQCK records.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "tq/checkpoint.hpp"
#include "tq/error.hpp"
#include "tq/real_width.hpp"

namespace tq {

inline TensorMap import_dense_directory(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + manifest_path.string() + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::corrupt_data, "manifest is not valid JSON: " + std::string(e.what()));
  }

  TensorMap out;
  try {
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      DenseTensor t;
      t.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      t.width = entry.value("width", 4u);
      if (!is_supported_width(t.width))
        throw Error(ErrorKind::corrupt_data, "tensor '" + name + "' has unsupported width " + std::to_string(t.width));
      const auto file = dir / entry.at("file").get<std::string>();
      std::ifstream raw(file, std::ios::binary);
      if (!raw) throw Error(ErrorKind::io, "cannot open '" + file.string() + "'");
      t.bytes.assign(std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>());
      if (t.bytes.size() != t.numel() * t.width)
        throw Error(ErrorKind::truncated_region, "'" + file.string() + "' holds " + std::to_string(t.bytes.size()) +
                                                     " bytes, expected " + std::to_string(t.numel() * t.width));
      for (double v : t.values())
        if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "tensor '" + name + "' holds non-finite values");
      if (!out.emplace(name, std::move(t)).second)
        throw Error(ErrorKind::name_collision, "duplicate tensor name '" + name + "' in manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::corrupt_data, "malformed manifest: " + std::string(e.what()));
  }
  return out;
}

/// Writes tensors in the import layout (used to bootstrap tests and demos).
inline void export_dense_directory(const TensorMap& tensors, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : tensors) {
    const auto* d = std::get_if<DenseTensor>(&tensor);
    if (d == nullptr) throw Error(ErrorKind::invalid_input, "'" + name + "' is packed; only dense tensors export");
    const std::string file = name + ".bin";
    write_bytes(dir / file, d->bytes);
    manifest["tensors"].push_back({{"name", name}, {"shape", d->shape}, {"width", d->width}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "cannot write manifest in '" + dir.string() + "'");
}

}  // namespace tq
