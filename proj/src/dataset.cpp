#include "hvi/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace hvi {

static_assert(std::endian::native == std::endian::little,
              "binary dataset format assumes a little-endian host");

Dataset::Dataset(Mat rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1) throw ConfigError("dataset needs at least one row");
  mean_ = rows_.colwise().mean();
  sum_sq_ = rows_.array().square().colwise().sum();
}

Dataset Dataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> parsed;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const char* b = cell.data();
      const char* e = b + cell.size();
      while (b < e && (*b == ' ' || *b == '\t')) ++b;
      auto res = std::from_chars(b, e, v);
      if (res.ec != std::errc()) throw IoError(path + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (!parsed.empty() && row.size() != parsed.front().size())
      throw IoError(path + ": ragged rows");
    parsed.push_back(std::move(row));
  }
  if (parsed.empty()) throw IoError(path + ": empty dataset");
  Mat m(static_cast<Eigen::Index>(parsed.size()),
        static_cast<Eigen::Index>(parsed.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = parsed[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return Dataset(std::move(m));
}

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
      if (j) out << ',';
      out << rows_(i, j);
    }
    out << '\n';
  }
}

namespace {
constexpr char kMagic[4] = {'H', 'V', 'I', 'D'};
}

Dataset Dataset::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + ": not an HVID file");
  std::uint32_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || n == 0 || d == 0) throw IoError(path + ": bad HVID header");
  Mat m(n, d);
  std::vector<double> buf(static_cast<size_t>(n) * d);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!in) throw IoError(path + ": truncated HVID payload");
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) m(i, j) = buf[size_t(i) * d + j];
  return Dataset(std::move(m));
}

void Dataset::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  const std::uint32_t n = static_cast<std::uint32_t>(rows_.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(rows_.cols());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  for (Eigen::Index i = 0; i < rows_.rows(); ++i)
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
      const double v = rows_(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

}  // namespace hvi
