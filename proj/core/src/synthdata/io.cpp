// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "f3/numcore/errors.hpp"
#include "f3/numcore/matrix_io.hpp"
#include "f3/synthdata/dataset.hpp"

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

namespace f3 {

namespace {

constexpr char kMagic[4] = {'F', '3', 'D', 'S'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof v);
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class T>
  T get(const char* what) {
    T v;
    take(&v, sizeof v, what);
    return v;
  }
  void take(void* out, std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw FormatError(std::string("dataset file truncated while reading ") + what, pos_);
    }
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void export_dataset(const Dataset& d, const std::filesystem::path& path) {
  const std::size_t n = d.clients(), m = d.samples();
  nlohmann::json header = {{"spec", d.spec.to_json()},
                           {"clients", n},
                           {"samples", m},
                           {"input_dims", d.input_dims},
                           {"permutations", !d.permutations.empty()}};
  std::vector<std::string> kinds;
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i < n; ++i) {
    kinds.emplace_back(to_string(d.kinds[i]));
    widths.push_back(d.shards[i].features());
  }
  header["kinds"] = kinds;
  header["widths"] = widths;
  const std::string h = header.dump();

  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint64_t>(h.size());
  w.bytes(h.data(), h.size());
  for (int y : d.labels) w.put<std::int32_t>(y);
  for (double v : d.graph.values()) w.put<double>(v);
  for (const ClientShard& s : d.shards) {
    const auto mask = s.present_mask();
    w.bytes(mask.data(), mask.size());
    for (double v : s.rows().values()) w.put<double>(v);
  }
  for (const auto& p : d.permutations)
    for (std::size_t v : p) w.put<std::int32_t>(static_cast<std::int32_t>(v));
  for (const auto& row : d.shown)
    for (int v : row) w.put<std::int32_t>(v);
  w.bytes(d.conflicted.data(), d.conflicted.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
}

Dataset import_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  char magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not an F3DS dataset file", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDatasetVersion) {
    throw FormatError("dataset format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kDatasetVersion) + ")", 4);
  }
  const auto hlen = r.get<std::uint64_t>("header length");
  std::string htext(hlen, '\0');
  const std::size_t hpos = r.pos();
  r.take(htext.data(), hlen, "header");

  Dataset d;
  std::size_t n = 0, m = 0;
  std::vector<std::size_t> widths;
  try {
    const auto header = nlohmann::json::parse(htext);
    d.spec = SyntheticSpec::from_json(header.at("spec"));
    n = header.at("clients").get<std::size_t>();
    m = header.at("samples").get<std::size_t>();
    d.input_dims = header.at("input_dims").get<std::vector<std::size_t>>();
    widths = header.at("widths").get<std::vector<std::size_t>>();
    for (const auto& k : header.at("kinds")) d.kinds.push_back(embedding_kind_from_string(k.get<std::string>()));
    if (header.at("permutations").get<bool>()) d.permutations.assign(n, std::vector<std::size_t>(d.spec.latent_dim));
  } catch (const std::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what(), hpos);
  }
  if (d.kinds.size() != n || widths.size() != n || d.input_dims.size() != n) {
    throw FormatError("dataset header: per-client lists do not match the client count", hpos);
  }

  d.labels.resize(m);
  for (int& y : d.labels) y = r.get<std::int32_t>("labels");
  d.graph = Matrix(n, n);
  for (double& v : d.graph.values()) v = r.get<double>("graph");
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint8_t> mask(m);
    r.take(mask.data(), m, "presence mask");
    std::vector<std::size_t> index;
    for (std::size_t k = 0; k < m; ++k)
      if (mask[k]) index.push_back(k);
    Matrix rows(index.size(), widths[i]);
    for (double& v : rows.values()) v = r.get<double>("feature rows");
    d.shards.emplace_back(m, std::move(index), std::move(rows));
  }
  for (auto& p : d.permutations)
    for (std::size_t& v : p) v = static_cast<std::size_t>(r.get<std::int32_t>("permutations"));
  d.shown.assign(n, std::vector<int>(m));
  for (auto& row : d.shown)
    for (int& v : row) v = r.get<std::int32_t>("shown templates");
  d.conflicted.resize(m);
  r.take(d.conflicted.data(), m, "conflict flags");
  if (!r.done()) throw FormatError("trailing bytes after dataset payload", r.pos());
  return d;
}

void export_dataset_csv(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "labels.csv");
    out << "sample,label,conflicted\n";
    for (std::size_t k = 0; k < d.samples(); ++k) {
      out << k << ',' << d.labels[k] << ',' << int(d.conflicted[k]) << '\n';
    }
  }
  {
    std::ofstream out(dir / "graph.csv");
    out << matrix_to_csv(d.graph);
  }
  for (std::size_t i = 0; i < d.clients(); ++i) {
    std::ofstream out(dir / ("client_" + std::to_string(i) + ".csv"));
    const ClientShard& s = d.shards[i];
    out << "sample";
    for (std::size_t f = 0; f < s.features(); ++f) out << ",x" << f;
    out << '\n';
    const Matrix& rows = s.rows();
    char buf[32];
    for (std::size_t r = 0; r < s.present_count(); ++r) {
      out << s.index()[r];
      for (double v : rows.row_span(r)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace f3
