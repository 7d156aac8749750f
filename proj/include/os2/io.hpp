#ifndef OS2_IO_HPP
#define OS2_IO_HPP

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Binary containers used across the toolkit. All payloads are little-endian:
// float64 for coordinates/fields, uint32 for indices. Mesh files start with
// the magic "OS2M", generic dense arrays with "OS2A", integer lists with
// "OS2I". Facets are packed as 4*element+edge (2*element+side in 1d).

namespace os2 {

static_assert(std::endian::native == std::endian::little,
              "persistence layer assumes a little-endian host");

inline void io_fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of stream");
  return v;
}

inline void write_magic(std::ostream& os, const char tag[4]) {
  os.write(tag, 4);
}

inline void expect_magic(std::istream& is, const char tag[4], const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, tag, 4) != 0) io_fail("bad magic", path);
}

}  // namespace detail

inline void save_array(const std::string& path, const Eigen::MatrixXd& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) io_fail("cannot open for write", path);
  detail::write_magic(os, "OS2A");
  detail::write_pod<std::uint32_t>(os, 1);  // version
  detail::write_pod<std::uint32_t>(os, 2);  // rank
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.rows()));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) detail::write_pod<double>(os, a(i, j));
}

inline Eigen::MatrixXd load_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail("cannot open", path);
  detail::expect_magic(is, "OS2A", path);
  auto version = detail::read_pod<std::uint32_t>(is);
  if (version != 1) io_fail("unsupported version", path);
  auto rank = detail::read_pod<std::uint32_t>(is);
  if (rank != 2) io_fail("expected rank-2 array", path);
  auto rows = detail::read_pod<std::uint32_t>(is);
  auto cols = detail::read_pod<std::uint32_t>(is);
  Eigen::MatrixXd a(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) a(i, j) = detail::read_pod<double>(is);
  return a;
}

inline void save_vector(const std::string& path, const Eigen::VectorXd& v) {
  save_array(path, v);
}

inline Eigen::VectorXd load_vector(const std::string& path) {
  Eigen::MatrixXd a = load_array(path);
  if (a.cols() != 1) io_fail("expected a column vector", path);
  return a.col(0);
}

inline void save_indices(const std::string& path, const std::vector<int>& idx) {
  std::ofstream os(path, std::ios::binary);
  if (!os) io_fail("cannot open for write", path);
  detail::write_magic(os, "OS2I");
  detail::write_pod<std::uint32_t>(os, 1);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(idx.size()));
  for (int i : idx) detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(i));
}

inline std::vector<int> load_indices(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail("cannot open", path);
  detail::expect_magic(is, "OS2I", path);
  auto version = detail::read_pod<std::uint32_t>(is);
  if (version != 1) io_fail("unsupported version", path);
  auto n = detail::read_pod<std::uint32_t>(is);
  std::vector<int> idx(n);
  for (auto& i : idx) i = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  return idx;
}

}  // namespace os2

#endif  // OS2_IO_HPP
