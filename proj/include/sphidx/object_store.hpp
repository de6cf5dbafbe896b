#pragma once

// Dynamic point objects bucketed by cell.
//
// The cell array is one allocation of 2^packed_width + 1 cells indexed by
// packed location; the last slot is the outside cell of bounded grids.
// Occupied cells are threaded on a doubly-linked list so sparse worlds can
// be scanned without touching empty cells.

#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sphidx/grid.hpp"

namespace sphidx {

struct ObjectHandle {
  std::uint32_t slot = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t generation = 0;
  friend bool operator==(ObjectHandle, ObjectHandle) = default;
};

class StaleHandle : public std::invalid_argument {
 public:
  StaleHandle() : std::invalid_argument("stale or invalid object handle") {}
};

template <class Payload>
class ObjectStore {
 public:
  static constexpr PackedIndex kNil = std::numeric_limits<PackedIndex>::max();

  /// Object as seen from its cell.  `slot` indexes the record table.
  struct Entry {
    Vec3 position;
    std::uint32_t slot;
  };

  struct Cell {
    std::vector<Entry> entries;
    PackedIndex prev = kNil;
    PackedIndex next = kNil;
  };

  explicit ObjectStore(const GridConfig& g) : config_(g), cells_(g.cell_slots()) {}

  const GridConfig& config() const { return config_; }

  ObjectHandle insert(const Vec3& position, Payload payload) {
    const Location loc = locate(position, config_);
    std::uint32_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      slot = static_cast<std::uint32_t>(records_.size());
      records_.emplace_back();
    }
    Record& r = records_[slot];
    r.payload.emplace(std::move(payload));
    r.position = position;
    r.cell = loc.cell;
    add_to_cell(slot);
    ++size_;
    return {slot, r.generation};
  }

  void remove(ObjectHandle h) {
    Record& r = checked(h);
    remove_from_cell(h.slot);
    r.payload.reset();
    ++r.generation;
    free_.push_back(h.slot);
    --size_;
  }

  void relocate(ObjectHandle h, const Vec3& position) {
    Record& r = checked(h);
    const Location loc = locate(position, config_);
    r.position = position;
    if (loc.cell == r.cell) {
      cells_[r.cell].entries[r.index_in_cell].position = position;
      return;
    }
    remove_from_cell(h.slot);
    r.cell = loc.cell;
    add_to_cell(h.slot);
  }

  bool contains(ObjectHandle h) const {
    return h.slot < records_.size() && records_[h.slot].payload && records_[h.slot].generation == h.generation;
  }

  const Payload& payload(ObjectHandle h) const { return *checked(h).payload; }
  Payload& payload(ObjectHandle h) { return *checked(h).payload; }
  const Vec3& position(ObjectHandle h) const { return checked(h).position; }
  PackedIndex cell_of(ObjectHandle h) const { return checked(h).cell; }

  /// Unchecked access by slot for query loops.
  const Payload& payload_at(std::uint32_t slot) const { return *records_[slot].payload; }
  ObjectHandle handle_at(std::uint32_t slot) const { return {slot, records_[slot].generation}; }

  std::span<const Entry> cell(PackedIndex p) const { return cells_[p].entries; }
  std::size_t cell_size(PackedIndex p) const { return cells_[p].entries.size(); }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t nonempty_size() const { return nonempty_; }
  std::size_t cell_slots() const { return cells_.size(); }

  template <class F>
  void for_each_object(F&& f) const {
    for (std::uint32_t s = 0; s < records_.size(); ++s) {
      if (records_[s].payload) f(ObjectHandle{s, records_[s].generation}, records_[s].position, *records_[s].payload);
    }
  }

  class NonEmptyIterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = std::pair<PackedIndex, std::span<const Entry>>;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = value_type;

    NonEmptyIterator() = default;
    NonEmptyIterator(const std::vector<Cell>* cells, PackedIndex at) : cells_(cells), at_(at) {}
    value_type operator*() const { return {at_, std::span<const Entry>((*cells_)[at_].entries)}; }
    NonEmptyIterator& operator++() {
      at_ = (*cells_)[at_].next;
      return *this;
    }
    NonEmptyIterator operator++(int) {
      auto t = *this;
      ++*this;
      return t;
    }
    friend bool operator==(const NonEmptyIterator& a, const NonEmptyIterator& b) { return a.at_ == b.at_; }

   private:
    const std::vector<Cell>* cells_ = nullptr;
    PackedIndex at_ = kNil;
  };

  struct NonEmptyRange {
    NonEmptyIterator b, e;
    NonEmptyIterator begin() const { return b; }
    NonEmptyIterator end() const { return e; }
  };

  /// Occupied cells, each once.  Invalidated by any mutation.
  NonEmptyRange nonempty() const { return {NonEmptyIterator(&cells_, head_), NonEmptyIterator(&cells_, kNil)}; }

 private:
  struct Record {
    std::optional<Payload> payload;
    Vec3 position{};
    PackedIndex cell = 0;
    std::uint32_t index_in_cell = 0;
    std::uint32_t generation = 0;
  };

  Record& checked(ObjectHandle h) {
    if (!contains(h)) throw StaleHandle();
    return records_[h.slot];
  }
  const Record& checked(ObjectHandle h) const {
    if (!contains(h)) throw StaleHandle();
    return records_[h.slot];
  }

  void add_to_cell(std::uint32_t slot) {
    Record& r = records_[slot];
    Cell& c = cells_[r.cell];
    if (c.entries.empty()) link(r.cell);
    r.index_in_cell = static_cast<std::uint32_t>(c.entries.size());
    c.entries.push_back({r.position, slot});
  }

  void remove_from_cell(std::uint32_t slot) {
    Record& r = records_[slot];
    Cell& c = cells_[r.cell];
    const std::uint32_t i = r.index_in_cell;
    if (i + 1 != c.entries.size()) {
      c.entries[i] = c.entries.back();
      records_[c.entries[i].slot].index_in_cell = i;
    }
    c.entries.pop_back();
    if (c.entries.empty()) unlink(r.cell);
  }

  void link(PackedIndex p) {
    Cell& c = cells_[p];
    c.prev = kNil;
    c.next = head_;
    if (head_ != kNil) cells_[head_].prev = p;
    head_ = p;
    ++nonempty_;
  }

  void unlink(PackedIndex p) {
    Cell& c = cells_[p];
    if (c.prev != kNil) cells_[c.prev].next = c.next;
    else head_ = c.next;
    if (c.next != kNil) cells_[c.next].prev = c.prev;
    c.prev = c.next = kNil;
    --nonempty_;
  }

  GridConfig config_;
  std::vector<Cell> cells_;
  std::vector<Record> records_;
  std::vector<std::uint32_t> free_;
  PackedIndex head_ = kNil;
  std::size_t size_ = 0;
  std::size_t nonempty_ = 0;
};

}  // namespace sphidx
