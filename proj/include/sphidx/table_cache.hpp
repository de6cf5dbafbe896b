#pragma once

// Binary cache for SphereTables.
//
// Layout, all integers little-endian:
//   "SPHGRD01"
//   u32 bits_x, bits_y, bits_z, cyclic bitfield, sample_grid,
//       offset count, ring count
//   offsets:      i32 dx, dy, dz, u64 encoded, u32 b_sq      (offset count)
//   entry ends:   u32 b_sq, u32 end    one pair per distinct b_sq
//   ring slices:  u32 begin, u32 end   ring count * 64 pairs
//   expected:     f64                  max b_sq + 1 values
//   u32 CRC-32 of every preceding byte

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphidx/sphere_tables.hpp"

namespace sphidx {

enum class TableFileErrc {
  io,
  bad_magic,
  version_mismatch,
  config_mismatch,
  truncated,
  checksum,
  inconsistent,
};

inline const char* to_string(TableFileErrc e) {
  switch (e) {
    case TableFileErrc::io: return "i/o error";
    case TableFileErrc::bad_magic: return "not a table file";
    case TableFileErrc::version_mismatch: return "unsupported table file version";
    case TableFileErrc::config_mismatch: return "table file was built for another grid";
    case TableFileErrc::truncated: return "table file is truncated";
    case TableFileErrc::checksum: return "table file checksum mismatch";
    case TableFileErrc::inconsistent: return "table file contents are inconsistent";
  }
  return "unknown";
}

class TableFileError : public std::runtime_error {
 public:
  TableFileError(TableFileErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code) {}
  TableFileErrc code() const { return code_; }

 private:
  TableFileErrc code_;
};

namespace detail {

inline constexpr char kTableMagic[8] = {'S', 'P', 'H', 'G', 'R', 'D', '0', '1'};
inline constexpr std::size_t kMagicPrefix = 6;  // "SPHGRD"

class ByteWriter {
 public:
  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{p_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{p_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  void skip(std::size_t k) {
    need(k);
    pos_ += k;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw TableFileError(TableFileErrc::truncated, "at byte " + std::to_string(pos_));
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<unsigned char> serialize_tables(const SphereTables& t) {
  detail::ByteWriter w;
  const GridConfig& g = t.config();
  w.put_raw(detail::kTableMagic, sizeof detail::kTableMagic);
  w.put_u32(g.bits(kX));
  w.put_u32(g.bits(kY));
  w.put_u32(g.bits(kZ));
  w.put_u32(g.cyclic_bits());
  w.put_u32(t.sample_grid());
  w.put_u32(static_cast<std::uint32_t>(t.table().size()));
  w.put_u32(t.shaved().ring_count());
  for (const CellOffset& o : t.table().offsets()) {
    for (int a = 0; a < 3; ++a) w.put_i32(o.delta[a]);
    w.put_u64(o.encoded);
    w.put_u32(o.b_sq);
  }
  for (std::uint32_t n = 0; n <= t.table().max_entry(); ++n) {
    if (!t.table().has_entry(n)) continue;
    w.put_u32(n);
    w.put_u32(static_cast<std::uint32_t>(t.table().entry_end(n)));
  }
  for (const auto& e : t.shaved().extents()) {
    w.put_u32(e.begin);
    w.put_u32(e.end);
  }
  for (double v : t.expected().values()) w.put_f64(v);
  auto& bytes = w.bytes();
  w.put_u32(detail::crc32_of(bytes.data(), bytes.size()));
  return std::move(bytes);
}

inline SphereTables deserialize_tables(const std::vector<unsigned char>& bytes, const GridConfig& g) {
  using detail::ByteReader;
  ByteReader r(bytes.data(), bytes.size());
  r.need(sizeof detail::kTableMagic);
  if (std::memcmp(bytes.data(), detail::kTableMagic, detail::kMagicPrefix) != 0) {
    throw TableFileError(TableFileErrc::bad_magic, "");
  }
  if (std::memcmp(bytes.data(), detail::kTableMagic, sizeof detail::kTableMagic) != 0) {
    throw TableFileError(TableFileErrc::version_mismatch,
                         std::string(reinterpret_cast<const char*>(bytes.data()) + detail::kMagicPrefix, 2));
  }
  r.skip(sizeof detail::kTableMagic);

  const std::uint32_t bx = r.u32(), by = r.u32(), bz = r.u32(), cyc = r.u32();
  const std::uint32_t sample_grid = r.u32();
  const std::uint32_t offset_count = r.u32();
  const std::uint32_t ring_count = r.u32();
  if (bx != g.bits(kX) || by != g.bits(kY) || bz != g.bits(kZ) || cyc != g.cyclic_bits()) {
    throw TableFileError(TableFileErrc::config_mismatch,
                         "file has bits " + std::to_string(bx) + "," + std::to_string(by) + "," +
                             std::to_string(bz) + " cyclic " + std::to_string(cyc));
  }
  // Body sizes are only known after reading the offsets; check the obvious
  // lower bound first so a truncated file never allocates from garbage.
  if (offset_count == 0) throw TableFileError(TableFileErrc::inconsistent, "no offsets");
  r.need(static_cast<std::size_t>(offset_count) * 24);

  std::vector<CellOffset> offsets;
  offsets.reserve(offset_count);
  std::uint32_t distinct = 0;
  for (std::uint32_t i = 0; i < offset_count; ++i) {
    Delta delta{};
    for (int a = 0; a < 3; ++a) delta[a] = r.i32();
    const std::uint64_t encoded = r.u64();
    const std::uint32_t b_sq = r.u32();
    if (!offset_representable(delta, g)) throw TableFileError(TableFileErrc::inconsistent, "offset out of range");
    CellOffset o = encode_offset(delta, g);
    if (o.encoded != encoded || o.b_sq != b_sq) {
      throw TableFileError(TableFileErrc::inconsistent, "offset " + std::to_string(i));
    }
    if (offsets.empty() || offsets.back().b_sq != b_sq) ++distinct;
    offsets.push_back(o);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ends(distinct);
  for (auto& [n, end] : ends) {
    n = r.u32();
    end = r.u32();
  }
  r.need(static_cast<std::size_t>(ring_count) * kMaskCount * 8);
  std::vector<ShavedTableSet::Extent> extents(static_cast<std::size_t>(ring_count) * kMaskCount);
  for (auto& e : extents) {
    e.begin = r.u32();
    e.end = r.u32();
  }
  const std::uint32_t max_entry = offsets.empty() ? 0 : offsets.back().b_sq;
  std::vector<double> expected(static_cast<std::size_t>(max_entry) + 1);
  for (double& v : expected) v = r.f64();
  const std::size_t body = r.pos();
  const std::uint32_t stored_crc = r.u32();
  if (r.remaining() != 0) throw TableFileError(TableFileErrc::inconsistent, "trailing bytes");
  if (detail::crc32_of(bytes.data(), body) != stored_crc) throw TableFileError(TableFileErrc::checksum, "");

  if (!std::is_sorted(offsets.begin(), offsets.end(), offset_order)) {
    throw TableFileError(TableFileErrc::inconsistent, "offsets not sorted");
  }
  OffsetTable table(g, std::move(offsets));
  for (const auto& [n, end] : ends) {
    if (!table.has_entry(n) || table.entry_end(n) != end) {
      throw TableFileError(TableFileErrc::inconsistent, "entry " + std::to_string(n));
    }
  }
  ShavedTableSet shaved = build_shaved_tables(table);
  if (shaved.ring_count() != ring_count || shaved.extents() != extents) {
    throw TableFileError(TableFileErrc::inconsistent, "shaved slice extents");
  }
  return SphereTables(std::move(table), std::move(shaved), ExpectedCountTable(std::move(expected)), sample_grid);
}

inline void save_tables(const SphereTables& t, const std::filesystem::path& path) {
  const auto bytes = serialize_tables(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TableFileError(TableFileErrc::io, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TableFileError(TableFileErrc::io, "write failed for " + path.string());
}

inline SphereTables load_tables(const std::filesystem::path& path, const GridConfig& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableFileError(TableFileErrc::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_tables(bytes, g);
}

}  // namespace sphidx
