#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "swefixer/error.hpp"
#include "swefixer/text.hpp"

namespace swefixer::archive {

struct Entry {
  std::string path;
  std::string data;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

inline bool is_zip(std::string_view bytes) {
  return bytes.size() >= 4 && bytes.substr(0, 4) == std::string_view("PK\x03\x04", 4);
}

/// Inflates a gzip stream (all members).
inline std::string gunzip(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) fail(ErrorKind::Io, "inflateInit failed");
  std::string out;
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  char buf[1 << 15];
  int rc = Z_OK;
  while (true) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_STREAM_END) {
      if (zs.avail_in == 0) break;
      inflateReset(&zs);
      continue;
    }
    if (rc != Z_OK) {
      inflateEnd(&zs);
      fail(ErrorKind::Io, "corrupt gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

inline std::string inflate_raw(std::string_view bytes, std::size_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorKind::Io, "inflateInit failed");
  std::string out(expected, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) fail(ErrorKind::Io, "corrupt zip member");
  return out;
}

namespace detail {

inline std::uint64_t parse_octal(std::string_view field) {
  std::uint64_t v = 0;
  for (char c : field) {
    if (c == '\0' || c == ' ') {
      if (v) break;
      continue;
    }
    if (c < '0' || c > '7') break;
    v = v * 8 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

inline std::string cstr(std::string_view field) {
  auto nul = field.find('\0');
  return std::string(field.substr(0, nul));
}

inline std::uint32_t le32(std::string_view b, std::size_t off) {
  if (off + 4 > b.size()) fail(ErrorKind::Io, "truncated zip");
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

inline std::uint16_t le16(std::string_view b, std::size_t off) {
  if (off + 2 > b.size()) fail(ErrorKind::Io, "truncated zip");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    static_cast<unsigned char>(b[off + 1]) << 8);
}

}  // namespace detail

/// Regular-file members of a ustar/GNU/pax tar stream.
inline std::vector<Entry> read_tar(std::string_view bytes) {
  std::vector<Entry> entries;
  std::size_t off = 0;
  std::string long_name;
  std::string pax_path;
  while (off + 512 <= bytes.size()) {
    auto header = bytes.substr(off, 512);
    if (header.find_first_not_of('\0') == std::string_view::npos) break;
    std::string name = detail::cstr(header.substr(0, 100));
    std::string prefix = detail::cstr(header.substr(345, 155));
    auto size = detail::parse_octal(header.substr(124, 12));
    char type = header[156];
    off += 512;
    if (off + size > bytes.size()) fail(ErrorKind::Io, "truncated tar member " + name);
    auto data = bytes.substr(off, size);
    off += (size + 511) / 512 * 512;

    if (type == 'L') {
      long_name = detail::cstr(data);
      continue;
    }
    if (type == 'x') {
      // pax records: "<len> key=value\n"
      std::size_t p = 0;
      while (p < data.size()) {
        auto space = data.find(' ', p);
        if (space == std::string_view::npos) break;
        auto len = std::stoul(std::string(data.substr(p, space - p)));
        if (len == 0 || p + len > data.size()) break;
        auto record = data.substr(space + 1, len - (space - p) - 2);
        if (text::starts_with(record, "path=")) pax_path = std::string(record.substr(5));
        p += len;
      }
      continue;
    }
    if (type == 'g') continue;

    std::string path = !pax_path.empty()   ? pax_path
                       : !long_name.empty() ? long_name
                       : prefix.empty()     ? name
                                            : prefix + "/" + name;
    long_name.clear();
    pax_path.clear();
    if (type == '0' || type == '\0' || type == '7') entries.push_back({path, std::string(data)});
  }
  return entries;
}

/// Stored and deflated members of a zip archive, read via the central directory.
inline std::vector<Entry> read_zip(std::string_view bytes) {
  std::size_t eocd = std::string_view::npos;
  for (std::size_t i = bytes.size() >= 22 ? bytes.size() - 22 : 0;; --i) {
    if (detail::le32(bytes, i) == 0x06054b50) {
      eocd = i;
      break;
    }
    if (i == 0 || bytes.size() - i > 22 + 65535) break;
  }
  if (eocd == std::string_view::npos) fail(ErrorKind::Io, "zip end-of-central-directory not found");
  std::size_t count = detail::le16(bytes, eocd + 10);
  std::size_t cd = detail::le32(bytes, eocd + 16);
  std::vector<Entry> entries;
  for (std::size_t n = 0; n < count; ++n) {
    if (detail::le32(bytes, cd) != 0x02014b50) fail(ErrorKind::Io, "bad zip central directory");
    auto method = detail::le16(bytes, cd + 10);
    std::size_t csize = detail::le32(bytes, cd + 20);
    std::size_t usize = detail::le32(bytes, cd + 24);
    std::size_t name_len = detail::le16(bytes, cd + 28);
    std::size_t extra_len = detail::le16(bytes, cd + 30);
    std::size_t comment_len = detail::le16(bytes, cd + 32);
    std::size_t local = detail::le32(bytes, cd + 42);
    std::string name(bytes.substr(cd + 46, name_len));
    cd += 46 + name_len + extra_len + comment_len;
    if (name.empty() || name.back() == '/') continue;

    if (detail::le32(bytes, local) != 0x04034b50) fail(ErrorKind::Io, "bad zip local header");
    std::size_t data_off =
        local + 30 + detail::le16(bytes, local + 26) + detail::le16(bytes, local + 28);
    if (data_off + csize > bytes.size()) fail(ErrorKind::Io, "truncated zip member " + name);
    auto raw = bytes.substr(data_off, csize);
    if (method == 0) {
      entries.push_back({name, std::string(raw)});
    } else if (method == 8) {
      entries.push_back({name, inflate_raw(raw, usize)});
    } else {
      fail(ErrorKind::Io, "unsupported zip compression method for " + name);
    }
  }
  return entries;
}

inline bool looks_like_archive(const std::string& path) {
  return text::ends_with(path, ".tar") || text::ends_with(path, ".tar.gz") ||
         text::ends_with(path, ".tgz") || text::ends_with(path, ".zip");
}

/// Reads a tar, tar.gz or zip archive, detected by magic bytes.
inline std::vector<Entry> read_archive(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (is_zip(bytes)) return read_zip(bytes);
  if (is_gzip(bytes)) bytes = gunzip(bytes);
  return read_tar(bytes);
}

}  // namespace swefixer::archive
