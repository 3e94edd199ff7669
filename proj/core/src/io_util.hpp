#pragma once

// Internal IO helpers shared by the core sources. Not installed.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "retav/error.hpp"

namespace retav::detail {

/// Writes through a temp file in the target directory, then renames into
/// place, so readers never observe a partial file.
class AtomicWriter {
 public:
  explicit AtomicWriter(const std::string& path)
      : final_path_(path), tmp_path_(path + ".tmp-retav") {
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open for writing: " + path);
  }
  ~AtomicWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_path_, ec);
    }
  }
  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw Error("write failed: " + final_path_);
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_path_, final_path_, ec);
    if (ec) throw Error("rename failed: " + final_path_ + " (" + ec.message() + ")");
    committed_ = true;
  }

 private:
  std::string final_path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Little-endian scalar encoding, independent of host byte order.

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

/// Cursor over an in-memory byte buffer; any short read is a data error.
class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }
  void expect_end() const {
    if (!at_end()) throw Error(what_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error(what_ + ": truncated or corrupt");
  }
  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Shortest decimal form that round-trips a double (printed values feed
/// byte-identical re-runs, so formatting must be deterministic).
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  // Prefer shorter forms when they parse back exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    std::sscanf(probe, "%lf", &back);
    if (back == v) return probe;
  }
  return buf;
}

}  // namespace retav::detail
