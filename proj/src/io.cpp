#include "smartcpd/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace smartcpd {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, const std::string& context) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (token.empty() || res.ec != std::errc() || res.ptr != last) {
    throw FormatError(context + ": bad number '" + std::string(token) + "'");
  }
  return v;
}

namespace {

std::size_t parse_index(std::string_view token, const std::string& context) {
  std::size_t v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw FormatError(context + ": bad integer '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  return in;
}

}  // namespace

CooTensor read_tensor(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  auto next_content = [&](std::vector<std::string_view>& tokens) {
    while (std::getline(in, line)) {
      ++line_no;
      tokens = split_ws(line);
      if (tokens.empty() || tokens[0].front() == '#') continue;
      return true;
    }
    return false;
  };
  auto where = [&] { return name + ":" + std::to_string(line_no); };
  std::vector<std::string_view> tokens;
  if (!next_content(tokens) || tokens.size() != 1) throw FormatError(name + ": expected the tensor order on the first line");
  const std::size_t order = parse_index(tokens[0], where());
  if (!next_content(tokens) || tokens.size() != order) {
    throw FormatError(name + ": expected " + std::to_string(order) + " dimensions on the second line");
  }
  Shape shape(order);
  for (std::size_t k = 0; k < order; ++k) shape[k] = parse_index(tokens[k], where());
  try {
    validate_shape(shape);
  } catch (const std::exception& e) {
    throw FormatError(name + ": " + e.what());
  }
  std::vector<std::size_t> indices;
  std::vector<double> values;
  while (next_content(tokens)) {
    if (tokens.size() != order + 1) {
      throw FormatError(where() + ": expected " + std::to_string(order) + " indices and a value");
    }
    for (std::size_t k = 0; k < order; ++k) {
      const std::size_t idx = parse_index(tokens[k], where());
      if (idx < 1 || idx > shape[k]) {
        throw FormatError(where() + ": index " + std::to_string(idx) + " out of range 1.." + std::to_string(shape[k]));
      }
      indices.push_back(idx - 1);
    }
    values.push_back(parse_double(tokens[order], where()));
  }
  try {
    return CooTensor(std::move(shape), std::move(indices), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw FormatError(name + ": " + e.what());
  }
}

CooTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return read_tensor(in, path.string());
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  const Shape& shape = shape_of(tensor);
  out << shape.size() << '\n';
  for (std::size_t k = 0; k < shape.size(); ++k) out << (k ? " " : "") << shape[k];
  out << '\n';
  auto emit = [&](std::span<const std::size_t> idx, double v) {
    for (std::size_t k = 0; k < idx.size(); ++k) out << idx[k] + 1 << ' ';
    out << format_double(v) << '\n';
  };
  if (const auto* coo = std::get_if<CooTensor>(&tensor)) {
    for (std::size_t k = 0; k < coo->nnz(); ++k) emit(coo->index(k), coo->value(k));
  } else {
    const auto& dense = std::get<DenseTensor>(tensor);
    std::vector<std::size_t> idx(shape.size(), 0);
    const auto values = dense.values();
    for (std::uint64_t off = 0; off < values.size(); ++off) {
      if (values[off] != 0.0) emit(idx, values[off]);
      for (std::size_t k = 0; k < shape.size(); ++k) {
        if (++idx[k] < shape[k]) break;
        idx[k] = 0;
      }
    }
  }
  if (!out) throw FormatError("write failed");
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out = open_out(path);
  write_tensor(out, tensor);
  out.flush();
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view tok = std::string_view(line).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const auto trimmed = split_ws(tok);
      if (trimmed.size() != 1) throw FormatError(where + ": bad field");
      row.push_back(parse_double(trimmed[0], where));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError(where + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t r = 0; r < rows[i].size(); ++r) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = rows[i][r];
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index r = 0; r < m.cols(); ++r) out << (r ? "," : "") << format_double(m(i, r));
    out << '\n';
  }
  out.flush();
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

std::filesystem::path factor_path(const std::filesystem::path& stem, std::size_t mode) {
  return std::filesystem::path(stem.string() + "_" + std::to_string(mode + 1) + ".csv");
}

FactorModel read_factors(const std::filesystem::path& stem) {
  std::vector<Matrix> factors;
  while (std::filesystem::exists(factor_path(stem, factors.size()))) {
    factors.push_back(read_matrix_csv(factor_path(stem, factors.size())));
  }
  if (factors.size() < 2) throw FormatError("expected at least two factor files " + stem.string() + "_<n>.csv");
  try {
    return FactorModel(std::move(factors));
  } catch (const std::invalid_argument& e) {
    throw FormatError(stem.string() + ": " + e.what());
  }
}

void write_factors(const std::filesystem::path& stem, const FactorModel& model) {
  for (std::size_t n = 0; n < model.order(); ++n) write_matrix_csv(factor_path(stem, n), model.factor(n));
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(open_out(path)), path_(path) {
  out_ << header() << '\n';
  out_.flush();
}

void TraceWriter::write(const TraceRecord& rec) {
  out_ << rec.iteration << ',' << rec.samples << ',' << format_double(rec.seconds) << ',' << format_double(rec.cost)
       << ',' << (rec.mse ? format_double(*rec.mse) : "") << ','
       << (rec.stationarity ? format_double(*rec.stationarity) : "") << '\n';
  out_.flush();
  if (!out_) throw FormatError("write to '" + path_.string() + "' failed");
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != TraceWriter::header()) throw FormatError(path.string() + ": bad trace header");
  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    // A final line without its newline is a row cut off mid-write; skip it.
    const bool unterminated = in.eof();
    TraceRecord rec;
    try {
      if (fields.size() != 6) throw FormatError(where + ": expected 6 fields");
      rec.iteration = parse_index(fields[0], where);
      rec.samples = parse_index(fields[1], where);
      rec.seconds = parse_double(fields[2], where);
      rec.cost = parse_double(fields[3], where);
      if (!fields[4].empty()) rec.mse = parse_double(fields[4], where);
      if (!fields[5].empty()) rec.stationarity = parse_double(fields[5], where);
    } catch (const FormatError&) {
      if (unterminated) break;
      throw;
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace smartcpd
