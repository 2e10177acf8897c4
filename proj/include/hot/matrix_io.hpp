#pragma once

// Dense matrix files: NPY (v1-v3, little-endian f4/f8, C order) and
// headerless comma-separated text. Rows are stimuli, columns are neurons.

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hot/error.hpp"

namespace hot::io {

namespace detail {

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_input("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Extracts the python literal following 'key': in an NPY header dict.
inline std::string npy_field(std::string_view header, std::string_view key,
                             const std::filesystem::path& path) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string_view::npos) {
    fail_input("malformed npy header (no " + std::string(key) + "): " + path.string());
  }
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) fail_input("malformed npy header: " + path.string());
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string_view::npos) fail_input("malformed npy shape: " + path.string());
    ++end;
  } else {
    while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  }
  std::string value(header.substr(pos, end - pos));
  while (!value.empty() && value.back() == ' ') value.pop_back();
  return value;
}

inline std::vector<std::size_t> parse_shape(const std::string& text,
                                            const std::filesystem::path& path) {
  std::vector<std::size_t> dims;
  std::size_t i = 1;  // skip '('
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == ',')) ++i;
    if (i >= text.size() || text[i] == ')') break;
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), value);
    if (ec != std::errc{}) fail_input("malformed npy shape " + text + ": " + path.string());
    dims.push_back(value);
    i = static_cast<std::size_t>(ptr - text.data());
  }
  return dims;
}

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char first = 0;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

}  // namespace detail

inline Eigen::MatrixXd read_npy(const std::filesystem::path& path) {
  const std::string blob = detail::read_all(path);
  if (blob.size() < 10 || std::memcmp(blob.data(), "\x93NUMPY", 6) != 0) {
    fail_input("not an npy file: " + path.string());
  }
  const auto major = static_cast<unsigned char>(blob[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(blob[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(blob[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (blob.size() < 12) fail_input("truncated npy file: " + path.string());
    for (int b = 3; b >= 0; --b) {
      header_len = (header_len << 8) | static_cast<unsigned char>(blob[8 + b]);
    }
    offset = 12;
  } else {
    fail_input("unsupported npy version: " + path.string());
  }
  if (blob.size() < offset + header_len) fail_input("truncated npy header: " + path.string());
  const std::string_view header(blob.data() + offset, header_len);
  offset += header_len;

  const std::string descr = detail::npy_field(header, "descr", path);
  const std::string fortran = detail::npy_field(header, "fortran_order", path);
  const auto dims = detail::parse_shape(detail::npy_field(header, "shape", path), path);

  if (fortran != "False") fail_input("fortran-order npy not supported: " + path.string());
  std::size_t width = 0;
  if (descr == "'<f8'" || descr == "'|f8'") {
    width = 8;
  } else if (descr == "'<f4'" || descr == "'|f4'") {
    width = 4;
  } else {
    fail_input("unsupported npy dtype " + descr + " (need little-endian f4/f8): " + path.string());
  }
  if (!detail::host_is_little_endian()) fail_input("big-endian host not supported");

  std::size_t rows = 0, cols = 0;
  if (dims.size() == 2) {
    rows = dims[0];
    cols = dims[1];
  } else if (dims.size() == 1) {
    rows = dims[0];
    cols = 1;
  } else {
    fail_input("npy array must be 1-D or 2-D: " + path.string());
  }
  const std::size_t count = rows * cols;
  if (blob.size() < offset + count * width) fail_input("truncated npy data: " + path.string());

  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const char* data = blob.data() + offset;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = r * cols + c;
      double v;
      if (width == 8) {
        std::memcpy(&v, data + k * 8, 8);
      } else {
        float f;
        std::memcpy(&f, data + k * 4, 4);
        v = f;
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

inline Eigen::MatrixXd read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_input("missing file: " + path.string());
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      std::string_view cell(line.data() + start,
                            (comma == std::string::npos ? line.size() : comma) - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        fail_input("non-numeric csv cell '" + std::string(cell) + "' at row " +
                   std::to_string(rows + 1) + ": " + path.string());
      }
      values.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      fail_input("ragged csv (row " + std::to_string(rows + 1) + "): " + path.string());
    }
    ++rows;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    }
  }
  return out;
}

/// Dispatches on extension: .npy binary, anything else headerless CSV.
inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail_input("missing file: " + path.string());
  if (path.extension() == ".npy") return read_npy(path);
  return read_csv(path);
}

/// Serializes as NPY v1.0, '<f8', C order.
inline std::string npy_bytes(const Eigen::MatrixXd& m) {
  std::ostringstream hs;
  hs << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << m.rows() << ", " << m.cols()
     << "), }";
  std::string header = hs.str();
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out = "\x93NUMPY";
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  out += header;
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(m.size()) * 8);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c, ++k) {
      const double v = m(r, c);
      std::memcpy(out.data() + base + k * 8, &v, 8);
    }
  }
  return out;
}

/// Row-major text with round-trip precision.
inline std::string csv_text(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  return out.str();
}

/// Writes via a sibling temp file and rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_input("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_input("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_npy(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_file_atomic(path, npy_bytes(m));
}

inline void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_file_atomic(path, csv_text(m));
}

}  // namespace hot::io
