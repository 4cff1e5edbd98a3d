#pragma once

// File formats.
//   Tensor: FROSTT-style COO text. Line 1 is N, line 2 the N dimensions,
//           then one entry per line: N 1-based indices and the value.
//           Lines starting with '#' and blank lines are skipped.
//   Factors: one CSV per mode, <stem>_<n>.csv with n 1-based, R columns, no header.
//   Trace:   CSV with header iter,samples,seconds,cost,mse,stationarity,
//            flushed after every row.

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>

#include "smartcpd/solver.hpp"
#include "smartcpd/tensor.hpp"

namespace smartcpd {

/// Raised for unreadable or malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
std::string format_double(double v);
/// Strict parse of a whole token; throws FormatError.
double parse_double(std::string_view token, const std::string& context);

CooTensor read_tensor(std::istream& in, const std::string& name = "<stream>");
CooTensor read_tensor(const std::filesystem::path& path);
/// Dense tensors are written as COO with zeros omitted.
void write_tensor(std::ostream& out, const Tensor& tensor);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

std::filesystem::path factor_path(const std::filesystem::path& stem, std::size_t mode);
/// Reads <stem>_1.csv, <stem>_2.csv, ... until the next file is missing.
FactorModel read_factors(const std::filesystem::path& stem);
void write_factors(const std::filesystem::path& stem, const FactorModel& model);

class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void write(const TraceRecord& record);

  static const char* header() { return "iter,samples,seconds,cost,mse,stationarity"; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

}  // namespace smartcpd
