#include "xai/bundle.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "xai/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace xai::bundle {

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("bad numeric field '" + s + "' in " + where);
  }
}

long parse_long(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("bad integer field '" + s + "' in " + where);
  }
}

// manifest and other key = value text files
std::map<std::string, std::string> read_kv(const fs::path& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("malformed line in " + path.string() + ": " + line);
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const fs::path& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    throw ValidationError("missing key '" + key + "' in " + path.string());
  }
  return it->second;
}

std::string activation_name(nnet::Activation a) {
  switch (a) {
    case nnet::Activation::Relu: return "relu";
    case nnet::Activation::Tanh: return "tanh";
    case nnet::Activation::Identity: return "identity";
  }
  throw ValidationError("unknown activation");
}

nnet::Activation activation_from(const std::string& name) {
  if (name == "relu") return nnet::Activation::Relu;
  if (name == "tanh") return nnet::Activation::Tanh;
  if (name == "identity") return nnet::Activation::Identity;
  throw ValidationError("unknown activation name: " + name);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& rows, const std::string& where) {
  if (!rows.is_array()) throw ValidationError("expected array at " + where);
  const long R = static_cast<long>(rows.size());
  if (R == 0) return Eigen::MatrixXd(0, 0);
  const long C = static_cast<long>(rows[0].size());
  Eigen::MatrixXd m(R, C);
  for (long r = 0; r < R; ++r) {
    if (static_cast<long>(rows[r].size()) != C) {
      throw ValidationError("ragged matrix at " + where);
    }
    for (long c = 0; c < C; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ValidationError("expected array at " + where);
  Eigen::VectorXd v(arr.size());
  for (long i = 0; i < v.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

json net_json(const nnet::MLPParams& net) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.spec[l];
    layers.push_back({{"width_in", spec.width_in},
                      {"width_out", spec.width_out},
                      {"activation", activation_name(spec.activation)},
                      {"dropout_keep", spec.dropout_keep},
                      {"W", matrix_json(net.layers[l].W)},
                      {"b", vector_json(net.layers[l].b)}});
  }
  return layers;
}

nnet::MLPParams net_from(const json& layers, const std::string& where) {
  nnet::MLPParams net;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& jl = layers[l];
    nnet::LayerSpec spec;
    spec.width_in = jl.at("width_in").get<int>();
    spec.width_out = jl.at("width_out").get<int>();
    spec.activation = activation_from(jl.at("activation").get<std::string>());
    spec.dropout_keep = jl.at("dropout_keep").get<double>();
    nnet::Layer layer;
    layer.W = matrix_from(jl.at("W"), where + ".W");
    layer.b = vector_from(jl.at("b"), where + ".b");
    if (layer.W.rows() != spec.width_out || layer.W.cols() != spec.width_in ||
        layer.b.size() != spec.width_out) {
      throw ValidationError("layer shape mismatch at " + where);
    }
    net.spec.push_back(spec);
    net.layers.push_back(std::move(layer));
  }
  nnet::validate_spec(net.spec);
  return net;
}

void dump_json(const json& j, const fs::path& path) {
  auto out = open_out(path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json slurp_json(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
  if (static_cast<long>(header.size()) != rows.cols()) {
    throw ValidationError("write_csv: header width mismatch for " +
                          path.string());
  }
  auto out = open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  out << '\n';
  for (long r = 0; r < rows.rows(); ++r) {
    for (long c = 0; c < rows.cols(); ++c) {
      out << (c ? "," : "") << format_double(rows(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> read_csv(
    const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("empty csv: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(path.string() + " row " + std::to_string(line_no) +
                            ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      row[c] = parse_double(fields[c],
                            path.string() + " row " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<long>(rows.size()),
                    static_cast<long>(header.size()));
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return {header, m};
}

DatasetBundle from_truth(const simgen::SyntheticTruth& truth) {
  DatasetBundle b;
  b.case_label = truth.spec.label;
  b.seed = truth.spec.seed;
  b.data = truth.dataset;
  b.g_dim = truth.spec.g_dim;
  for (const auto& net : truth.networks) b.networks.push_back(net);
  b.has_truth = true;
  b.truth_beta = truth.beta;
  b.truth_h = truth.h;
  b.truth_g = truth.g;
  b.truth_tau2 = truth.spec.tau2;
  b.empirical_snr = truth.empirical_snr;
  return b;
}

void validate_bundle(const DatasetBundle& b) {
  model::validate_dataset(b.data);
  const int n = b.data.n(), V = b.data.V;
  if (!b.networks.empty()) {
    if (static_cast<int>(b.networks.size()) != n) {
      throw ValidationError("networks: expected " + std::to_string(n) +
                            " matrices, found " +
                            std::to_string(b.networks.size()));
    }
    for (int i = 0; i < n; ++i) {
      if (b.networks[i].rows() != V || b.networks[i].cols() != V) {
        throw ValidationError("networks: matrix " + std::to_string(i) +
                              " is not " + std::to_string(V) + "x" +
                              std::to_string(V));
      }
    }
  }
  if (b.has_truth) {
    if (b.truth_beta.rows() != b.data.J() || b.truth_beta.cols() != b.data.Q()) {
      throw ValidationError("truth beta table: shape mismatch");
    }
    if (b.truth_h.rows() != n || b.truth_h.cols() != V) {
      throw ValidationError("truth h table: shape mismatch");
    }
    if (b.truth_g.rows() != static_cast<long>(n) * V ||
        b.truth_g.cols() != b.g_dim) {
      throw ValidationError("truth g table: shape mismatch");
    }
  }
}

void save_bundle(const DatasetBundle& b, const fs::path& dir) {
  validate_bundle(b);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const int n = b.data.n(), J = b.data.J(), Q = b.data.Q(), d = b.data.d();
  const int V = b.data.V;

  {
    auto out = open_out(dir / "manifest.txt");
    out << "bundle_version = " << kBundleVersion << '\n'
        << "case_label = " << b.case_label << '\n'
        << "seed = " << b.seed << '\n'
        << "n = " << n << '\n'
        << "V = " << V << '\n'
        << "J = " << J << '\n'
        << "Q = " << Q << '\n'
        << "R = " << b.g_dim << '\n'
        << "d = " << d << '\n'
        << "has_networks = " << (b.networks.empty() ? 0 : 1) << '\n'
        << "has_truth = " << (b.has_truth ? 1 : 0) << '\n';
    if (!out) throw IoError("write failed: manifest.txt");
  }

  {
    std::vector<std::string> header = {"roi"};
    for (int k = 0; k < d; ++k) header.push_back("s" + std::to_string(k + 1));
    Eigen::MatrixXd rows(J, 1 + d);
    for (int j = 0; j < J; ++j) {
      rows(j, 0) = j;
      rows.row(j).segment(1, d) = b.data.coords.row(j);
    }
    write_csv(dir / "coords.csv", header, rows);
  }
  {
    Eigen::MatrixXd rows(J, 2);
    for (int j = 0; j < J; ++j) {
      rows(j, 0) = j;
      rows(j, 1) = b.data.node_of[j];
    }
    write_csv(dir / "nodes.csv", {"roi", "node"}, rows);
  }
  {
    std::vector<std::string> header = {"subject", "roi"};
    for (int q = 0; q < Q; ++q) header.push_back("x" + std::to_string(q + 1));
    Eigen::MatrixXd rows(static_cast<long>(n) * J, 2 + Q);
    long r = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < J; ++j, ++r) {
        rows(r, 0) = i;
        rows(r, 1) = j;
        for (int q = 0; q < Q; ++q) rows(r, 2 + q) = b.data.X[q](i, j);
      }
    }
    write_csv(dir / "x.csv", header, rows);
  }
  {
    Eigen::MatrixXd rows(static_cast<long>(n) * J, 3);
    long r = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < J; ++j, ++r) {
        rows(r, 0) = i;
        rows(r, 1) = j;
        rows(r, 2) = b.data.Y(i, j);
      }
    }
    write_csv(dir / "y.csv", {"subject", "roi", "y"}, rows);
  }
  {
    // split codes: 0 train, 1 val, 2 test
    Eigen::MatrixXd rows(n, 2);
    std::vector<int> code(n, -1);
    for (int i : b.data.train_idx) code[i] = 0;
    for (int i : b.data.val_idx) code[i] = 1;
    for (int i : b.data.test_idx) code[i] = 2;
    for (int i = 0; i < n; ++i) {
      rows(i, 0) = i;
      rows(i, 1) = code[i];
    }
    write_csv(dir / "splits.csv", {"subject", "split"}, rows);
  }

  if (!b.networks.empty()) {
    fs::create_directories(dir / "networks", ec);
    if (ec) throw IoError("cannot create networks dir: " + ec.message());
    std::vector<std::string> header;
    for (int v = 0; v < V; ++v) header.push_back("c" + std::to_string(v));
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "net_%04d.csv", i);
      write_csv(dir / "networks" / name, header, b.networks[i]);
    }
  }

  if (b.has_truth) {
    fs::create_directories(dir / "truth", ec);
    if (ec) throw IoError("cannot create truth dir: " + ec.message());
    {
      std::vector<std::string> header = {"roi"};
      for (int q = 0; q < Q; ++q) {
        header.push_back("beta" + std::to_string(q + 1));
      }
      Eigen::MatrixXd rows(J, 1 + Q);
      for (int j = 0; j < J; ++j) {
        rows(j, 0) = j;
        rows.row(j).segment(1, Q) = b.truth_beta.row(j);
      }
      write_csv(dir / "truth" / "beta.csv", header, rows);
    }
    {
      Eigen::MatrixXd rows(static_cast<long>(n) * V, 3);
      long r = 0;
      for (int i = 0; i < n; ++i) {
        for (int v = 0; v < V; ++v, ++r) {
          rows(r, 0) = i;
          rows(r, 1) = v;
          rows(r, 2) = b.truth_h(i, v);
        }
      }
      write_csv(dir / "truth" / "h.csv", {"subject", "node", "h"}, rows);
    }
    {
      std::vector<std::string> header = {"subject", "node"};
      for (int k = 0; k < b.g_dim; ++k) {
        header.push_back("g" + std::to_string(k + 1));
      }
      Eigen::MatrixXd rows(static_cast<long>(n) * V, 2 + b.g_dim);
      long r = 0;
      for (int i = 0; i < n; ++i) {
        for (int v = 0; v < V; ++v, ++r) {
          rows(r, 0) = i;
          rows(r, 1) = v;
          rows.row(r).segment(2, b.g_dim) =
              b.truth_g.row(static_cast<long>(i) * V + v);
        }
      }
      write_csv(dir / "truth" / "g.csv", header, rows);
    }
    {
      auto out = open_out(dir / "truth" / "meta.txt");
      out << "tau2 = " << format_double(b.truth_tau2) << '\n'
          << "empirical_snr = " << format_double(b.empirical_snr) << '\n';
      if (!out) throw IoError("write failed: truth/meta.txt");
    }
  }
}

DatasetBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  const auto kv = read_kv(manifest_path);
  const int version =
      static_cast<int>(parse_long(require(kv, "bundle_version", manifest_path),
                                  "manifest bundle_version"));
  if (version != kBundleVersion) {
    throw ValidationError("unsupported bundle_version " +
                          std::to_string(version));
  }

  DatasetBundle b;
  b.case_label = require(kv, "case_label", manifest_path);
  b.seed = static_cast<std::uint64_t>(
      std::stoull(require(kv, "seed", manifest_path)));
  const int n = static_cast<int>(parse_long(require(kv, "n", manifest_path), "manifest n"));
  const int V = static_cast<int>(parse_long(require(kv, "V", manifest_path), "manifest V"));
  const int J = static_cast<int>(parse_long(require(kv, "J", manifest_path), "manifest J"));
  const int Q = static_cast<int>(parse_long(require(kv, "Q", manifest_path), "manifest Q"));
  const int d = static_cast<int>(parse_long(require(kv, "d", manifest_path), "manifest d"));
  b.g_dim = static_cast<int>(parse_long(require(kv, "R", manifest_path), "manifest R"));
  const bool has_networks =
      parse_long(require(kv, "has_networks", manifest_path), "manifest") != 0;
  b.has_truth =
      parse_long(require(kv, "has_truth", manifest_path), "manifest") != 0;
  b.data.V = V;

  {
    auto [header, rows] = read_csv(dir / "coords.csv");
    if (rows.rows() != J || rows.cols() != 1 + d) {
      throw ValidationError("coords.csv: expected " + std::to_string(J) +
                            " rows of " + std::to_string(1 + d) + " fields");
    }
    b.data.coords.resize(J, d);
    for (int j = 0; j < J; ++j) {
      if (static_cast<int>(rows(j, 0)) != j) {
        throw ValidationError("coords.csv row " + std::to_string(j + 2) +
                              ": roi index out of order");
      }
      b.data.coords.row(j) = rows.row(j).segment(1, d);
    }
  }
  {
    auto [header, rows] = read_csv(dir / "nodes.csv");
    if (rows.rows() != J) {
      throw ValidationError("nodes.csv: expected " + std::to_string(J) +
                            " rows");
    }
    b.data.node_of.resize(J);
    for (int j = 0; j < J; ++j) {
      if (static_cast<int>(rows(j, 0)) != j) {
        throw ValidationError("nodes.csv row " + std::to_string(j + 2) +
                              ": roi index out of order");
      }
      b.data.node_of[j] = static_cast<int>(rows(j, 1));
    }
  }
  {
    auto [header, rows] = read_csv(dir / "x.csv");
    if (rows.rows() != static_cast<long>(n) * J || rows.cols() != 2 + Q) {
      throw ValidationError("x.csv: expected " + std::to_string(n * J) +
                            " rows of " + std::to_string(2 + Q) + " fields");
    }
    b.data.X.assign(Q, Eigen::MatrixXd(n, J));
    for (long r = 0; r < rows.rows(); ++r) {
      const int i = static_cast<int>(rows(r, 0));
      const int j = static_cast<int>(rows(r, 1));
      if (i != r / J || j != r % J) {
        throw ValidationError("x.csv row " + std::to_string(r + 2) +
                              ": subject/roi index out of order");
      }
      for (int q = 0; q < Q; ++q) b.data.X[q](i, j) = rows(r, 2 + q);
    }
  }
  {
    auto [header, rows] = read_csv(dir / "y.csv");
    if (rows.rows() != static_cast<long>(n) * J || rows.cols() != 3) {
      throw ValidationError("y.csv: expected " + std::to_string(n * J) +
                            " rows of 3 fields");
    }
    b.data.Y.resize(n, J);
    for (long r = 0; r < rows.rows(); ++r) {
      const int i = static_cast<int>(rows(r, 0));
      const int j = static_cast<int>(rows(r, 1));
      if (i != r / J || j != r % J) {
        throw ValidationError("y.csv row " + std::to_string(r + 2) +
                              ": subject/roi index out of order");
      }
      b.data.Y(i, j) = rows(r, 2);
    }
  }
  {
    auto [header, rows] = read_csv(dir / "splits.csv");
    if (rows.rows() != n) {
      throw ValidationError("splits.csv: expected " + std::to_string(n) +
                            " rows");
    }
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows(i, 0)) != i) {
        throw ValidationError("splits.csv row " + std::to_string(i + 2) +
                              ": subject index out of order");
      }
      const int code = static_cast<int>(rows(i, 1));
      if (code == 0) b.data.train_idx.push_back(i);
      else if (code == 1) b.data.val_idx.push_back(i);
      else if (code == 2) b.data.test_idx.push_back(i);
      else {
        throw ValidationError("splits.csv row " + std::to_string(i + 2) +
                              ": unknown split code " + std::to_string(code));
      }
    }
  }

  if (has_networks) {
    b.networks.reserve(n);
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "net_%04d.csv", i);
      auto [header, rows] = read_csv(dir / "networks" / name);
      if (rows.rows() != V || rows.cols() != V) {
        throw ValidationError(std::string("networks/") + name +
                              ": expected " + std::to_string(V) + "x" +
                              std::to_string(V));
      }
      b.networks.push_back(rows);
    }
  }

  if (b.has_truth) {
    {
      auto [header, rows] = read_csv(dir / "truth" / "beta.csv");
      if (rows.rows() != J || rows.cols() != 1 + Q) {
        throw ValidationError("truth/beta.csv: shape mismatch");
      }
      b.truth_beta.resize(J, Q);
      for (int j = 0; j < J; ++j) {
        b.truth_beta.row(j) = rows.row(j).segment(1, Q);
      }
    }
    {
      auto [header, rows] = read_csv(dir / "truth" / "h.csv");
      if (rows.rows() != static_cast<long>(n) * V || rows.cols() != 3) {
        throw ValidationError("truth/h.csv: shape mismatch");
      }
      b.truth_h.resize(n, V);
      for (long r = 0; r < rows.rows(); ++r) {
        b.truth_h(static_cast<int>(rows(r, 0)), static_cast<int>(rows(r, 1))) =
            rows(r, 2);
      }
    }
    {
      auto [header, rows] = read_csv(dir / "truth" / "g.csv");
      if (rows.rows() != static_cast<long>(n) * V ||
          rows.cols() != 2 + b.g_dim) {
        throw ValidationError("truth/g.csv: shape mismatch");
      }
      b.truth_g.resize(static_cast<long>(n) * V, b.g_dim);
      for (long r = 0; r < rows.rows(); ++r) {
        const long i = static_cast<long>(rows(r, 0));
        const long v = static_cast<long>(rows(r, 1));
        b.truth_g.row(i * V + v) = rows.row(r).segment(2, b.g_dim);
      }
    }
    const auto meta = read_kv(dir / "truth" / "meta.txt");
    b.truth_tau2 = parse_double(require(meta, "tau2", dir / "truth" / "meta.txt"),
                                "truth meta tau2");
    b.empirical_snr = parse_double(
        require(meta, "empirical_snr", dir / "truth" / "meta.txt"),
        "truth meta empirical_snr");
  }

  validate_bundle(b);
  return b;
}

void save_features(const model::FeatureTable& features,
                   const Eigen::VectorXd& eta_hat, const fs::path& path) {
  const int V = features.V;
  if (V <= 0 || features.values.rows() % V != 0) {
    throw ValidationError("save_features: row count not a multiple of V");
  }
  const long n = features.values.rows() / V;
  if (eta_hat.size() != n) {
    throw ValidationError("save_features: eta length mismatch");
  }
  const int R = features.dim();
  std::vector<std::string> header = {"subject", "node"};
  for (int k = 0; k < R; ++k) header.push_back("u" + std::to_string(k + 1));
  header.push_back("eta");
  Eigen::MatrixXd rows(features.values.rows(), 3 + R);
  long r = 0;
  for (long i = 0; i < n; ++i) {
    for (int v = 0; v < V; ++v, ++r) {
      rows(r, 0) = static_cast<double>(i);
      rows(r, 1) = v;
      rows.row(r).segment(2, R) = features.values.row(r);
      rows(r, 2 + R) = eta_hat(i);
    }
  }
  write_csv(path, header, rows);
}

std::pair<model::FeatureTable, Eigen::VectorXd> load_features(
    const fs::path& path) {
  auto [header, rows] = read_csv(path);
  if (header.size() < 4 || header[0] != "subject" || header[1] != "node" ||
      header.back() != "eta") {
    throw ValidationError("features table: unexpected header in " +
                          path.string());
  }
  const int R = static_cast<int>(header.size()) - 3;
  if (rows.rows() == 0) throw ValidationError("features table: no rows");
  int V = 0;
  for (long r = 0; r < rows.rows(); ++r) {
    V = std::max(V, static_cast<int>(rows(r, 1)) + 1);
  }
  if (rows.rows() % V != 0) {
    throw ValidationError("features table: rows not a multiple of node count");
  }
  const long n = rows.rows() / V;
  model::FeatureTable features;
  features.V = V;
  features.values.resize(rows.rows(), R);
  Eigen::VectorXd eta(n);
  for (long r = 0; r < rows.rows(); ++r) {
    const long i = static_cast<long>(rows(r, 0));
    const long v = static_cast<long>(rows(r, 1));
    if (i * V + v != r) {
      throw ValidationError("features table row " + std::to_string(r + 2) +
                            ": subject/node index out of order");
    }
    features.values.row(r) = rows.row(r).segment(2, R);
    eta(i) = rows(r, 2 + R);
  }
  return {features, eta};
}

void save_checkpoint(const model::TrainedModel& model, const fs::path& path) {
  json j;
  j["checkpoint_version"] = kCheckpointVersion;
  const auto& cfg = model.config;
  j["config"] = {{"beta_hidden", cfg.beta_hidden},
                 {"h_hidden", cfg.h_hidden},
                 {"hidden_activation", activation_name(cfg.hidden_activation)},
                 {"dropout_keep", cfg.dropout_keep},
                 {"dropout_hidden_keep", cfg.dropout_hidden_keep},
                 {"learning_rate", cfg.learning_rate},
                 {"lr_decay", cfg.lr_decay},
                 {"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"F", cfg.F},
                 {"prior_sigma2", cfg.prior_sigma2},
                 {"use_network", cfg.use_network},
                 {"seed", cfg.seed}};
  j["beta0"] = model.beta0;
  j["tau2_hat"] = model.tau2_hat;
  j["has_h"] = model.has_h;
  j["coord_center"] = vector_json(model.coord_center);
  json deg_x = json::array();
  for (const auto& [roi, q] : model.stand.degenerate_x) {
    deg_x.push_back({roi, q});
  }
  j["standardization"] = {{"y_mean", vector_json(model.stand.y_mean)},
                          {"y_sd", vector_json(model.stand.y_sd)},
                          {"x_mean", matrix_json(model.stand.x_mean)},
                          {"x_sd", matrix_json(model.stand.x_sd)},
                          {"degenerate_y", model.stand.degenerate_y},
                          {"degenerate_x", deg_x}};
  json beta_nets = json::array();
  for (const auto& net : model.beta_nets) beta_nets.push_back(net_json(net));
  j["beta_nets"] = std::move(beta_nets);
  j["h_net"] = net_json(model.h_net);
  j["loss_trace"] = model.loss_trace;
  dump_json(j, path);
}

model::TrainedModel load_checkpoint(const fs::path& path) {
  const json j = slurp_json(path);
  if (j.at("checkpoint_version").get<int>() != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint_version in " + path.string());
  }
  model::TrainedModel m;
  const json& jc = j.at("config");
  m.config.beta_hidden = jc.at("beta_hidden").get<std::vector<int>>();
  m.config.h_hidden = jc.at("h_hidden").get<std::vector<int>>();
  m.config.hidden_activation =
      activation_from(jc.at("hidden_activation").get<std::string>());
  m.config.dropout_keep = jc.at("dropout_keep").get<double>();
  m.config.dropout_hidden_keep = jc.at("dropout_hidden_keep").get<double>();
  m.config.learning_rate = jc.at("learning_rate").get<double>();
  m.config.lr_decay = jc.at("lr_decay").get<double>();
  m.config.epochs = jc.at("epochs").get<int>();
  m.config.batch_size = jc.at("batch_size").get<int>();
  m.config.F = jc.at("F").get<int>();
  m.config.prior_sigma2 = jc.at("prior_sigma2").get<double>();
  m.config.use_network = jc.at("use_network").get<bool>();
  m.config.seed = jc.at("seed").get<std::uint64_t>();
  m.beta0 = j.at("beta0").get<double>();
  m.tau2_hat = j.at("tau2_hat").get<double>();
  m.has_h = j.at("has_h").get<bool>();
  m.coord_center = vector_from(j.at("coord_center"), "coord_center");
  const json& js = j.at("standardization");
  m.stand.y_mean = vector_from(js.at("y_mean"), "y_mean");
  m.stand.y_sd = vector_from(js.at("y_sd"), "y_sd");
  m.stand.x_mean = matrix_from(js.at("x_mean"), "x_mean");
  m.stand.x_sd = matrix_from(js.at("x_sd"), "x_sd");
  m.stand.degenerate_y = js.at("degenerate_y").get<std::vector<int>>();
  for (const auto& pair : js.at("degenerate_x")) {
    m.stand.degenerate_x.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  for (std::size_t q = 0; q < j.at("beta_nets").size(); ++q) {
    m.beta_nets.push_back(
        net_from(j.at("beta_nets")[q], "beta_net " + std::to_string(q)));
  }
  m.h_net = net_from(j.at("h_net"), "h_net");
  m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  return m;
}

void save_draws(const model::PosteriorDraws& draws,
                const std::vector<int>& node_of, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const int F = static_cast<int>(draws.beta_draws.size());
  if (F == 0) throw ValidationError("save_draws: no draws");
  const int J = static_cast<int>(draws.beta_draws[0].rows());
  const int Q = static_cast<int>(draws.beta_draws[0].cols());
  if (static_cast<int>(node_of.size()) != J) {
    throw ValidationError("save_draws: node map length mismatch");
  }

  {
    json j;
    j["F"] = F;
    j["V"] = draws.V;
    j["mask_seed_base"] = draws.mask_seed_base;
    j["tau2"] = vector_json(draws.tau2);
    json beta = json::array();
    for (const auto& m : draws.beta_draws) beta.push_back(matrix_json(m));
    j["beta_draws"] = std::move(beta);
    j["h_draws"] = matrix_json(draws.h_draws);
    dump_json(j, dir / "draws.json");
  }

  {
    Eigen::MatrixXd rows(static_cast<long>(F) * J * Q, 5);
    long r = 0;
    for (int f = 0; f < F; ++f) {
      for (int q = 0; q < Q; ++q) {
        for (int j = 0; j < J; ++j, ++r) {
          rows(r, 0) = f;
          rows(r, 1) = q;
          rows(r, 2) = node_of[j];
          rows(r, 3) = j;
          rows(r, 4) = draws.beta_draws[f](j, q);
        }
      }
    }
    write_csv(dir / "draws_beta.csv", {"f", "q", "v", "j", "beta"}, rows);
  }
  {
    const long NV = draws.h_draws.cols();
    Eigen::MatrixXd rows(static_cast<long>(F) * NV, 4);
    long r = 0;
    for (int f = 0; f < F; ++f) {
      for (long t = 0; t < NV; ++t, ++r) {
        rows(r, 0) = f;
        rows(r, 1) = static_cast<double>(t / draws.V);
        rows(r, 2) = static_cast<double>(t % draws.V);
        rows(r, 3) = draws.h_draws(f, t);
      }
    }
    write_csv(dir / "draws_h.csv", {"f", "i", "v", "h"}, rows);
  }
  {
    Eigen::MatrixXd rows(F, 2);
    for (int f = 0; f < F; ++f) {
      rows(f, 0) = f;
      rows(f, 1) = draws.tau2(f);
    }
    write_csv(dir / "draws_tau2.csv", {"f", "tau2"}, rows);
  }
}

model::PosteriorDraws load_draws(const fs::path& dir) {
  const json j = slurp_json(dir / "draws.json");
  model::PosteriorDraws draws;
  draws.V = j.at("V").get<int>();
  draws.mask_seed_base = j.at("mask_seed_base").get<std::uint64_t>();
  draws.tau2 = vector_from(j.at("tau2"), "tau2");
  for (const auto& m : j.at("beta_draws")) {
    draws.beta_draws.push_back(matrix_from(m, "beta_draws"));
  }
  draws.h_draws = matrix_from(j.at("h_draws"), "h_draws");
  if (draws.tau2.size() != static_cast<long>(draws.beta_draws.size())) {
    throw ValidationError("draws.json: tau2 length mismatch");
  }
  return draws;
}

}  // namespace xai::bundle
