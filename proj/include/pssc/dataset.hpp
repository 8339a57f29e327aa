#pragma once

// Dataset ingestion (CSV, IDX, matbin) and the synthetic union-of-subspaces
// generator. Files store one sample per row; in memory samples are columns.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pssc/binio.hpp"
#include "pssc/errors.hpp"
#include "pssc/linalg.hpp"

namespace pssc {

struct Dataset {
  Mat X;  // d x n
  std::optional<std::vector<std::size_t>> labels;
  std::string name;

  std::size_t n() const noexcept { return X.cols(); }
  std::size_t dim() const noexcept { return X.rows(); }
};

enum class DataFormat { csv, idx, matbin };

inline DataFormat parse_format(std::string_view s) {
  if (s == "csv") return DataFormat::csv;
  if (s == "idx") return DataFormat::idx;
  if (s == "matbin") return DataFormat::matbin;
  throw ConfigError("unknown data format '" + std::string(s) + "' (expected csv, idx or matbin)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view tok, std::size_t offset) {
  tok = trim(tok);
  if (tok.empty()) throw IngestionError("empty field", offset);
  // strtod handles the full textual range; require that it consumes the token.
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) throw IngestionError("not a number: '" + buf + "'", offset);
  if (!std::isfinite(v)) throw IngestionError("non-finite value '" + buf + "'", offset);
  return v;
}

inline std::size_t parse_label(std::string_view tok, std::size_t offset) {
  tok = trim(tok);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
    throw IngestionError("label is not a non-negative integer: '" + std::string(tok) + "'", offset);
  return v;
}

}  // namespace detail

// One sample per line, comma separated. With `labels_col`, the last field of
// each row is an integer class label.
inline Dataset parse_csv(std::string_view text, bool labels_col, std::string name = "csv") {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::size_t width = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;

    std::vector<std::pair<std::string_view, std::size_t>> fields;
    std::size_t f = 0;
    while (true) {
      const std::size_t comma = line.find(',', f);
      const std::size_t stop = comma == std::string_view::npos ? line.size() : comma;
      fields.emplace_back(line.substr(f, stop - f), line_start + f);
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw IngestionError("row has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(width),
                           line_start);
    const std::size_t nfeat = labels_col ? width - 1 : width;
    if (nfeat == 0) throw IngestionError("row has no feature columns", line_start);
    std::vector<double> r(nfeat);
    for (std::size_t j = 0; j < nfeat; ++j) r[j] = detail::parse_double(fields[j].first, fields[j].second);
    if (labels_col) labels.push_back(detail::parse_label(fields.back().first, fields.back().second));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IngestionError("no data rows", text.size());

  Dataset ds;
  ds.name = std::move(name);
  ds.X = Mat(rows.front().size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) ds.X(j, i) = rows[i][j];
  if (labels_col) ds.labels = std::move(labels);
  return ds;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open " + path, 0);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline Dataset load_csv(const std::string& path, bool labels_col) {
  return parse_csv(read_file(path), labels_col, path);
}

// ---------------------------------------------------------------------------
// IDX: big-endian magic 0x00000800 | type<<8 | ndims, then ndims u32 sizes,
// then unsigned bytes. Images (type 0x08, 3 dims) become columns scaled by
// 1/255; label files have a single dimension.

namespace detail {

inline std::uint32_t be32(const std::string& buf, std::size_t at) {
  if (at + 4 > buf.size()) throw IngestionError("truncated IDX header", buf.size());
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(buf[at + i]);
  return v;
}

}  // namespace detail

inline Mat parse_idx_images(const std::string& buf) {
  const std::uint32_t magic = detail::be32(buf, 0);
  if (magic != 0x00000803u) throw IngestionError("IDX images: bad magic (expected 0x00000803)", 0);
  const std::size_t n = detail::be32(buf, 4);
  const std::size_t h = detail::be32(buf, 8);
  const std::size_t w = detail::be32(buf, 12);
  const std::size_t d = h * w;
  if (d == 0 || n == 0) throw IngestionError("IDX images: zero-sized dimension", 4);
  if (buf.size() < 16 + n * d)
    throw IngestionError("IDX images: payload shorter than header dims", buf.size());
  Mat x(d, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p)
      x(p, i) = static_cast<unsigned char>(buf[16 + i * d + p]) / 255.0;
  return x;
}

inline std::vector<std::size_t> parse_idx_labels(const std::string& buf) {
  const std::uint32_t magic = detail::be32(buf, 0);
  if (magic != 0x00000801u) throw IngestionError("IDX labels: bad magic (expected 0x00000801)", 0);
  const std::size_t n = detail::be32(buf, 4);
  if (buf.size() < 8 + n) throw IngestionError("IDX labels: payload shorter than header count", buf.size());
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<unsigned char>(buf[8 + i]);
  return y;
}

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path = {}) {
  Dataset ds;
  ds.name = images_path;
  ds.X = parse_idx_images(read_file(images_path));
  if (!labels_path.empty()) {
    auto y = parse_idx_labels(read_file(labels_path));
    if (y.size() != ds.n())
      throw IngestionError("IDX label count " + std::to_string(y.size()) + " does not match " +
                               std::to_string(ds.n()) + " images",
                           4);
    ds.labels = std::move(y);
  }
  return ds;
}

// matbin stores samples as rows, like CSV.
inline Dataset load_matbin_dataset(const std::string& path) {
  Dataset ds;
  ds.name = path;
  ds.X = transpose(binio::load_matbin(path));
  return ds;
}

// Labels from a CSV: one integer per line (optional header "label"); rows
// with several fields contribute their last field, so a labeled data file
// works too.
inline std::vector<std::size_t> parse_label_csv(std::string_view text) {
  std::vector<std::size_t> y;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = detail::trim(text.substr(pos, eol - pos));
    const std::size_t at = pos;
    pos = eol + 1;
    if (line.empty() || line == "label" || line.front() == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos)
      y.push_back(detail::parse_label(line, at));
    else
      y.push_back(detail::parse_label(line.substr(comma + 1), at + comma + 1));
  }
  return y;
}

inline void write_csv(std::ostream& os, const Dataset& ds) {
  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.X(j, i));
      if (j) os << ',';
      os << buf;
    }
    if (ds.labels) os << ',' << (*ds.labels)[i];
    os << '\n';
  }
}

inline void write_labels_csv(std::ostream& os, std::span<const std::size_t> labels) {
  os << "label\n";
  for (auto l : labels) os << l << '\n';
}

// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t k = 3;            // subspaces
  std::size_t q = 4;            // subspace dimension
  std::size_t d = 30;           // ambient dimension
  std::size_t per_cluster = 60;
  double noise = 0.01;          // isotropic Gaussian sigma
  std::uint64_t seed = 0;
};

// Orthonormal columns by modified Gram-Schmidt (re-orthogonalized once).
inline Mat orthonormalize(Mat a) {
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) dot += a(i, p) * a(i, j);
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, j) -= dot * a(i, p);
      }
    double nrm = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) nrm += a(i, j) * a(i, j);
    nrm = std::sqrt(nrm);
    detail::require(nrm > 1e-12, "orthonormalize: rank-deficient input");
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, j) /= nrm;
  }
  return a;
}

// Points on k random q-dimensional linear subspaces of R^d, grouped by
// cluster, labels 0..k-1.
inline Dataset make_subspace_data(const SynthSpec& s) {
  if (s.k < 1 || s.q < 1 || s.per_cluster < 1) throw ConfigError("synth: k, q and per_cluster must be positive");
  if (s.q > s.d) throw ConfigError("synth: q exceeds d");
  if (!(s.noise >= 0.0)) throw ConfigError("synth: noise must be non-negative");
  SeededRng rng(s.seed);
  Dataset ds;
  ds.name = "synth";
  const std::size_t n = s.k * s.per_cluster;
  ds.X = Mat(s.d, n);
  ds.labels = std::vector<std::size_t>(n);
  std::vector<double> coeff(s.q);
  for (std::size_t c = 0; c < s.k; ++c) {
    const Mat basis = orthonormalize(random_normal(s.d, s.q, rng));
    for (std::size_t t = 0; t < s.per_cluster; ++t) {
      const std::size_t col = c * s.per_cluster + t;
      for (double& v : coeff) v = rng.normal();
      for (std::size_t i = 0; i < s.d; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < s.q; ++j) v += basis(i, j) * coeff[j];
        ds.X(i, col) = v;
      }
      if (s.noise > 0.0)
        for (std::size_t i = 0; i < s.d; ++i) ds.X(i, col) += s.noise * rng.normal();
      (*ds.labels)[col] = c;
    }
  }
  return ds;
}

}  // namespace pssc
