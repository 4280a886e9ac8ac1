#pragma once

// TQCK checkpoint container.
//
// All integers little-endian. Layout (version 1):
//
//   offset  size  field
//   0       4     magic "TQCK"
//   4       4     format version (u32) = 1
//   8       8     record count (u64)
//   16      8     index length in bytes (u64)
//   24      32    SHA-256 of the index region
//   56      ...   index: one entry per record, sorted by name
//
// Index entry:
//   u32 name length, UTF-8 name bytes
//   u8  encoding        0 = packed-ternary, 1 = dense-real
//   u8  granularity     packed: 0 = per-row, 1 = per-tensor; dense: 0
//   u8  element width   dense: 2 (bf16), 4 (f32), 8 (f64); packed: 0
//   u32 rank, then rank x u64 dims (packed tensors are rank 2: rows, cols)
//   u64 data offset, u64 data length
//   u64 scale offset, u64 scale length   (dense: 0, 0)
//   32  SHA-256 of data bytes followed by scale bytes
//
// Payload regions start on 64-byte boundaries after the index, in record
// order, data before scales; gaps are zero-filled. Packed data uses the
// bitpack layout; scales are f32.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tq/bitpack.hpp"
#include "tq/compression.hpp"
#include "tq/error.hpp"
#include "tq/real_width.hpp"
#include "tq/ternary.hpp"

namespace tq {

inline constexpr std::array<std::uint8_t, 4> kCheckpointMagic = {'T', 'Q', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kHeaderBytes = 56;
inline constexpr std::size_t kPayloadAlignment = 64;

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b = {}) {
  Digest out{};
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  unsigned len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, a.data(), a.size()) == 1 && EVP_DigestUpdate(ctx, b.data(), b.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, out.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != out.size()) throw std::runtime_error("SHA-256 computation failed");
  return out;
}

enum class Encoding : std::uint8_t { packed_ternary = 0, dense_real = 1 };

inline std::string to_string(Encoding e) { return e == Encoding::packed_ternary ? "packed-ternary" : "dense-real"; }

/// Full-precision tensor kept at its stored width (bf16/f32/f64).
struct DenseTensor {
  std::vector<std::uint64_t> shape;
  unsigned width = kDefaultBaselineWidth;
  std::vector<std::uint8_t> bytes;

  std::uint64_t numel() const noexcept {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::vector<double> values() const { return decode_reals(bytes, width); }

  /// Rank-2 tensors map directly; rank-1 becomes a single row.
  WeightMatrix to_matrix() const {
    if (shape.size() == 2) return WeightMatrix(shape[0], shape[1], values());
    if (shape.size() == 1) return WeightMatrix(1, shape[0], values());
    throw Error(ErrorKind::invalid_input, "tensor of rank " + std::to_string(shape.size()) + " is not a matrix");
  }

  static DenseTensor from_values(std::vector<std::uint64_t> shape, std::span<const double> values,
                                 unsigned width = kDefaultBaselineWidth) {
    DenseTensor t{std::move(shape), width, {}};
    if (t.numel() != values.size()) throw Error(ErrorKind::invalid_input, "dense value count does not match shape");
    t.bytes = encode_reals(values, width);
    return t;
  }

  static DenseTensor from_matrix(const WeightMatrix& w, unsigned width = kDefaultBaselineWidth) {
    return from_values({w.rows(), w.cols()}, w.values(), width);
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

using Tensor = std::variant<PackedTensor, DenseTensor>;
using TensorMap = std::map<std::string, Tensor>;
using NamedTensor = std::pair<std::string, Tensor>;

inline std::uint64_t tensor_params(const Tensor& t) {
  if (const auto* p = std::get_if<PackedTensor>(&t)) return static_cast<std::uint64_t>(p->rows) * p->cols;
  return std::get<DenseTensor>(t).numel();
}

struct TensorRecord {
  std::string name;
  Encoding encoding = Encoding::dense_real;
  Granularity granularity = Granularity::per_row;
  unsigned width = 0;
  std::vector<std::uint64_t> shape;
  std::uint64_t data_offset = 0;
  std::uint64_t data_length = 0;
  std::uint64_t scale_offset = 0;
  std::uint64_t scale_length = 0;
  Digest payload_digest{};

  std::uint64_t numel() const noexcept {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

/// Accounting straight from tensors; identical arithmetic to the file-based
/// report so the two agree exactly.
inline CompressionReport compression_report(const TensorMap& tensors, unsigned baseline_width = kDefaultBaselineWidth) {
  CompressionReport report;
  report.baseline_width = baseline_width;
  for (const auto& [name, tensor] : tensors) {
    if (const auto* p = std::get_if<PackedTensor>(&tensor)) {
      report.add_packed(tensor_params(tensor), p->bytes.size(), p->scale_bytes());
    } else {
      report.add_passthrough(tensor_params(tensor), std::get<DenseTensor>(tensor).bytes.size());
    }
  }
  return report;
}

inline CompressionReport compression_report(std::span<const TensorRecord> records,
                                            unsigned baseline_width = kDefaultBaselineWidth) {
  CompressionReport report;
  report.baseline_width = baseline_width;
  for (const TensorRecord& r : records) {
    if (r.encoding == Encoding::packed_ternary) {
      report.add_packed(r.numel(), r.data_length, r.scale_length);
    } else {
      report.add_passthrough(r.numel(), r.data_length);
    }
  }
  return report;
}

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += extra + 1;
  }
  return true;
}

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a) noexcept { return (v + a - 1) / a * a; }

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    const std::size_t at = out_.size();
    out_.resize(at + sizeof(T));
    store_le(out_.data() + at, v);
  }
  void put_bytes(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = load_le<T>(in_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorKind::corrupt_data, "index entry runs past the end of the index region");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void validate_tensor(const std::string& name, const Tensor& tensor) {
  if (name.empty()) throw Error(ErrorKind::invalid_input, "tensor names must be non-empty");
  if (!valid_utf8(name)) throw Error(ErrorKind::invalid_input, "tensor name is not valid UTF-8");
  if (const auto* p = std::get_if<PackedTensor>(&tensor)) {
    validate(*p);
  } else {
    const auto& d = std::get<DenseTensor>(tensor);
    if (!is_supported_width(d.width))
      throw Error(ErrorKind::invalid_input, "tensor '" + name + "' has unsupported width " + std::to_string(d.width));
    if (d.bytes.size() != d.numel() * d.width)
      throw Error(ErrorKind::invalid_input, "tensor '" + name + "' byte count does not match its shape");
  }
}

inline std::vector<std::uint8_t> serialize_sorted(std::span<const NamedTensor* const> tensors) {
  std::vector<std::uint8_t> index;
  std::vector<TensorRecord> records;
  records.reserve(tensors.size());

  // Offsets depend on the index length, which does not depend on offsets.
  std::uint64_t index_length = 0;
  for (const NamedTensor* nt : tensors) {
    const std::size_t rank = std::holds_alternative<PackedTensor>(nt->second)
                                 ? 2
                                 : std::get<DenseTensor>(nt->second).shape.size();
    index_length += 4 + nt->first.size() + 3 + 4 + 8 * rank + 32 + 32;
  }
  std::uint64_t cursor = align_up(kHeaderBytes + index_length, kPayloadAlignment);

  auto place = [&cursor](std::uint64_t length) {
    if (length == 0) return std::uint64_t{0};
    const std::uint64_t at = cursor;
    cursor = align_up(at + length, kPayloadAlignment);
    return at;
  };

  std::uint64_t file_end = kHeaderBytes + index_length;
  for (const NamedTensor* nt : tensors) {
    TensorRecord rec;
    rec.name = nt->first;
    if (const auto* p = std::get_if<PackedTensor>(&nt->second)) {
      rec.encoding = Encoding::packed_ternary;
      rec.granularity = p->granularity;
      rec.width = 0;
      rec.shape = {p->rows, p->cols};
      rec.data_length = p->bytes.size();
      rec.scale_length = p->scale_bytes();
      std::vector<std::uint8_t> scale_bytes(rec.scale_length);
      for (std::size_t i = 0; i < p->scales.size(); ++i) store_le(scale_bytes.data() + 4 * i, p->scales[i]);
      rec.payload_digest = sha256(p->bytes, scale_bytes);
    } else {
      const auto& d = std::get<DenseTensor>(nt->second);
      rec.encoding = Encoding::dense_real;
      rec.width = d.width;
      rec.shape = d.shape;
      rec.data_length = d.bytes.size();
      rec.payload_digest = sha256(d.bytes);
    }
    rec.data_offset = place(rec.data_length);
    if (rec.data_length) file_end = rec.data_offset + rec.data_length;
    rec.scale_offset = place(rec.scale_length);
    if (rec.scale_length) file_end = rec.scale_offset + rec.scale_length;
    records.push_back(std::move(rec));
  }

  ByteWriter iw(index);
  for (const TensorRecord& rec : records) {
    iw.put(static_cast<std::uint32_t>(rec.name.size()));
    iw.put_bytes({reinterpret_cast<const std::uint8_t*>(rec.name.data()), rec.name.size()});
    iw.put(static_cast<std::uint8_t>(rec.encoding));
    iw.put(static_cast<std::uint8_t>(rec.granularity));
    iw.put(static_cast<std::uint8_t>(rec.width));
    iw.put(static_cast<std::uint32_t>(rec.shape.size()));
    for (auto d : rec.shape) iw.put(d);
    iw.put(rec.data_offset);
    iw.put(rec.data_length);
    iw.put(rec.scale_offset);
    iw.put(rec.scale_length);
    iw.put_bytes(rec.payload_digest);
  }
  if (index.size() != index_length) throw std::logic_error("index length precomputation is inconsistent");

  std::vector<std::uint8_t> file(file_end, 0);
  std::copy(kCheckpointMagic.begin(), kCheckpointMagic.end(), file.begin());
  store_le(file.data() + 4, kCheckpointVersion);
  store_le(file.data() + 8, static_cast<std::uint64_t>(records.size()));
  store_le(file.data() + 16, index_length);
  const Digest index_digest = sha256(index);
  std::copy(index_digest.begin(), index_digest.end(), file.begin() + 24);
  std::copy(index.begin(), index.end(), file.begin() + kHeaderBytes);

  for (std::size_t i = 0; i < records.size(); ++i) {
    const TensorRecord& rec = records[i];
    if (const auto* p = std::get_if<PackedTensor>(&tensors[i]->second)) {
      std::copy(p->bytes.begin(), p->bytes.end(), file.begin() + static_cast<std::ptrdiff_t>(rec.data_offset));
      for (std::size_t k = 0; k < p->scales.size(); ++k) store_le(file.data() + rec.scale_offset + 4 * k, p->scales[k]);
    } else {
      const auto& d = std::get<DenseTensor>(tensors[i]->second);
      std::copy(d.bytes.begin(), d.bytes.end(), file.begin() + static_cast<std::ptrdiff_t>(rec.data_offset));
    }
  }
  return file;
}

}  // namespace detail

/// Serializes to the exact on-disk byte image. Records are sorted by name;
/// duplicate names raise name-collision.
inline std::vector<std::uint8_t> serialize_checkpoint(std::span<const NamedTensor> tensors) {
  std::vector<const NamedTensor*> sorted;
  sorted.reserve(tensors.size());
  for (const NamedTensor& nt : tensors) {
    detail::validate_tensor(nt.first, nt.second);
    sorted.push_back(&nt);
  }
  std::sort(sorted.begin(), sorted.end(), [](const NamedTensor* a, const NamedTensor* b) { return a->first < b->first; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1]->first == sorted[i]->first)
      throw Error(ErrorKind::name_collision, "duplicate tensor name '" + sorted[i]->first + "'");
  return detail::serialize_sorted(sorted);
}

inline std::vector<std::uint8_t> serialize_checkpoint(const TensorMap& tensors) {
  std::vector<NamedTensor> flat(tensors.begin(), tensors.end());
  return serialize_checkpoint(std::span<const NamedTensor>(flat));
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write to '" + path.string() + "' failed");
}

inline void write_checkpoint(std::span<const NamedTensor> tensors, const std::filesystem::path& path) {
  write_bytes(path, serialize_checkpoint(tensors));
}

inline void write_checkpoint(const TensorMap& tensors, const std::filesystem::path& path) {
  write_bytes(path, serialize_checkpoint(tensors));
}

/// Validates header, index digest and region bounds on construction; payloads
/// are read and digest-checked per tensor, so a single tensor can be loaded
/// without touching the others. Each read opens its own stream, which makes
/// concurrent reads of distinct tensors safe.
class CheckpointReader {
 public:
  explicit CheckpointReader(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path_.string() + "'");
    in.seekg(0, std::ios::end);
    file_size_ = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    std::array<std::uint8_t, kHeaderBytes> header{};
    const std::size_t head_len = static_cast<std::size_t>(std::min<std::uint64_t>(file_size_, kHeaderBytes));
    in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(head_len));
    if (head_len < 4) throw Error(ErrorKind::truncated_region, "file shorter than the magic bytes");
    if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), header.begin()))
      throw Error(ErrorKind::bad_magic, "'" + path_.string() + "' is not a TQCK checkpoint");
    if (head_len < kHeaderBytes) throw Error(ErrorKind::truncated_region, "header truncated");
    version_ = load_le<std::uint32_t>(header.data() + 4);
    if (version_ != kCheckpointVersion)
      throw Error(ErrorKind::unsupported_version, "format version " + std::to_string(version_) + " is not supported");
    const auto record_count = load_le<std::uint64_t>(header.data() + 8);
    const auto index_length = load_le<std::uint64_t>(header.data() + 16);
    Digest stored{};
    std::copy_n(header.begin() + 24, 32, stored.begin());

    if (index_length > file_size_ - kHeaderBytes) throw Error(ErrorKind::truncated_region, "index region truncated");
    std::vector<std::uint8_t> index(index_length);
    in.read(reinterpret_cast<char*>(index.data()), static_cast<std::streamsize>(index_length));
    if (!in) throw Error(ErrorKind::io, "failed reading index of '" + path_.string() + "'");
    if (sha256(index) != stored) throw Error(ErrorKind::digest_mismatch, "index digest does not match");

    parse_index(index, record_count, kHeaderBytes + index_length);
  }

  std::uint32_t version() const noexcept { return version_; }
  std::uint64_t file_size() const noexcept { return file_size_; }
  const std::vector<TensorRecord>& records() const noexcept { return records_; }

  const TensorRecord& record(const std::string& name) const {
    auto it = std::lower_bound(records_.begin(), records_.end(), name,
                               [](const TensorRecord& r, const std::string& n) { return r.name < n; });
    if (it == records_.end() || it->name != name)
      throw Error(ErrorKind::invalid_input, "no tensor named '" + name + "'");
    return *it;
  }

  bool contains(const std::string& name) const {
    return std::any_of(records_.begin(), records_.end(), [&](const TensorRecord& r) { return r.name == name; });
  }

  Tensor read(const std::string& name) const { return load(record(name)); }

  TensorMap read_all() const {
    TensorMap out;
    for (const TensorRecord& rec : records_) out.emplace(rec.name, load(rec));
    return out;
  }

 private:
  void parse_index(std::span<const std::uint8_t> index, std::uint64_t record_count, std::uint64_t index_end) {
    detail::ByteReader r(index);
    for (std::uint64_t i = 0; i < record_count; ++i) {
      TensorRecord rec;
      const auto name_len = r.get<std::uint32_t>();
      auto name = r.get_bytes(name_len);
      rec.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
      const auto enc = r.get<std::uint8_t>();
      const auto gran = r.get<std::uint8_t>();
      rec.width = r.get<std::uint8_t>();
      if (enc > 1) throw Error(ErrorKind::corrupt_data, "record '" + rec.name + "' has unknown encoding");
      if (gran > 1) throw Error(ErrorKind::corrupt_data, "record '" + rec.name + "' has unknown granularity");
      rec.encoding = static_cast<Encoding>(enc);
      rec.granularity = static_cast<Granularity>(gran);
      const auto rank = r.get<std::uint32_t>();
      if (rank > 64) throw Error(ErrorKind::corrupt_data, "record '" + rec.name + "' has implausible rank");
      for (std::uint32_t k = 0; k < rank; ++k) rec.shape.push_back(r.get<std::uint64_t>());
      rec.data_offset = r.get<std::uint64_t>();
      rec.data_length = r.get<std::uint64_t>();
      rec.scale_offset = r.get<std::uint64_t>();
      rec.scale_length = r.get<std::uint64_t>();
      auto digest = r.get_bytes(32);
      std::copy(digest.begin(), digest.end(), rec.payload_digest.begin());
      check_record(rec);
      if (!records_.empty() && !(records_.back().name < rec.name))
        throw Error(ErrorKind::corrupt_data, "index records are not sorted by unique name");
      records_.push_back(std::move(rec));
    }
    if (!r.done()) throw Error(ErrorKind::corrupt_data, "trailing bytes in index region");

    // Regions must lie after the index, within the file and never overlap.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> regions;
    for (const TensorRecord& rec : records_) {
      for (auto [off, len] : {std::pair{rec.data_offset, rec.data_length}, std::pair{rec.scale_offset, rec.scale_length}}) {
        if (len == 0) continue;
        if (off % kPayloadAlignment != 0)
          throw Error(ErrorKind::corrupt_data, "record '" + rec.name + "' region is not 64-byte aligned");
        if (off < index_end) throw Error(ErrorKind::corrupt_data, "record '" + rec.name + "' region overlaps the index");
        if (off > file_size_ || len > file_size_ - off)
          throw Error(ErrorKind::truncated_region, "record '" + rec.name + "' region extends past end of file");
        regions.emplace_back(off, len);
      }
    }
    std::sort(regions.begin(), regions.end());
    for (std::size_t i = 1; i < regions.size(); ++i)
      if (regions[i - 1].first + regions[i - 1].second > regions[i].first)
        throw Error(ErrorKind::corrupt_data, "payload regions overlap");
  }

  static void check_record(const TensorRecord& rec) {
    const std::string who = "record '" + rec.name + "'";
    if (rec.name.empty() || !detail::valid_utf8(rec.name)) throw Error(ErrorKind::corrupt_data, "invalid tensor name");
    if (rec.encoding == Encoding::packed_ternary) {
      if (rec.shape.size() != 2) throw Error(ErrorKind::corrupt_data, who + " is packed but not rank 2");
      if (rec.data_length != packed_size_bytes(rec.shape[0], rec.shape[1]))
        throw Error(ErrorKind::corrupt_data, who + " data length does not match its packed size");
      if (rec.scale_length != scale_count(rec.granularity, rec.shape[0]) * sizeof(float))
        throw Error(ErrorKind::corrupt_data, who + " scale length does not match its granularity");
    } else {
      if (!is_supported_width(rec.width)) throw Error(ErrorKind::corrupt_data, who + " has unsupported element width");
      if (rec.data_length != rec.numel() * rec.width)
        throw Error(ErrorKind::corrupt_data, who + " data length does not match its shape");
      if (rec.scale_length != 0) throw Error(ErrorKind::corrupt_data, who + " is dense but carries scales");
    }
  }

  std::vector<std::uint8_t> read_region(std::ifstream& in, std::uint64_t off, std::uint64_t len) const {
    std::vector<std::uint8_t> buf(len);
    if (len == 0) return buf;
    in.seekg(static_cast<std::streamoff>(off));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
    if (!in) throw Error(ErrorKind::truncated_region, "short read at offset " + std::to_string(off));
    return buf;
  }

  Tensor load(const TensorRecord& rec) const {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path_.string() + "'");
    std::vector<std::uint8_t> data = read_region(in, rec.data_offset, rec.data_length);
    std::vector<std::uint8_t> scale_bytes = read_region(in, rec.scale_offset, rec.scale_length);
    if (sha256(data, scale_bytes) != rec.payload_digest)
      throw Error(ErrorKind::digest_mismatch, "payload of '" + rec.name + "' does not match its digest");

    if (rec.encoding == Encoding::dense_real) return DenseTensor{rec.shape, rec.width, std::move(data)};

    PackedTensor p;
    p.rows = rec.shape[0];
    p.cols = rec.shape[1];
    p.granularity = rec.granularity;
    try {
      check_packed_codes(data, p.rows, p.cols);
    } catch (const CorruptDataError& e) {
      throw CorruptDataError(rec.data_offset + e.byte_offset(), e.slot(), "tensor '" + rec.name + "'");
    }
    p.bytes = std::move(data);
    p.scales.resize(scale_bytes.size() / sizeof(float));
    for (std::size_t i = 0; i < p.scales.size(); ++i) p.scales[i] = load_le<float>(scale_bytes.data() + 4 * i);
    for (float s : p.scales)
      if (!(s > 0.0f) || !std::isfinite(s))
        throw Error(ErrorKind::corrupt_data, "tensor '" + rec.name + "' holds a non-positive scale");
    return p;
  }

  std::filesystem::path path_;
  std::uint64_t file_size_ = 0;
  std::uint32_t version_ = 0;
  std::vector<TensorRecord> records_;
};

inline TensorMap read_checkpoint(const std::filesystem::path& path) { return CheckpointReader(path).read_all(); }

/// Verifies every payload, then reports from the index.
inline CompressionReport checkpoint_stats(const std::filesystem::path& path,
                                          unsigned baseline_width = kDefaultBaselineWidth) {
  CheckpointReader reader(path);
  for (const TensorRecord& rec : reader.records()) (void)reader.read(rec.name);
  return compression_report(std::span<const TensorRecord>(reader.records()), baseline_width);
}

}  // namespace tq
