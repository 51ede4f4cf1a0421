#include "fslab/sequence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fslab/error.hpp"

namespace fslab {

ArithmeticSequence::ArithmeticSequence(std::vector<cplx> values, std::string label,
                                       std::map<std::string, std::string> params)
    : values_(std::move(values)), label_(std::move(label)), params_(std::move(params)) {
  require(!values_.empty(), ErrorKind::InvalidArgument, "sequence must have length >= 1");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double m = std::abs(values_[i]);
    if (!(m <= 1.0 + kModulusSlack)) {
      fail(ErrorKind::InvalidArgument,
           "|u(" + std::to_string(i + 1) + ")| = " + std::to_string(m) + " exceeds 1");
    }
  }
}

ArithmeticSequence ArithmeticSequence::prefix(std::size_t n) const {
  require(n >= 1 && n <= size(), ErrorKind::InvalidArgument,
          "prefix length " + std::to_string(n) + " outside [1, " + std::to_string(size()) + "]");
  return ArithmeticSequence(std::vector<cplx>(values_.begin(), values_.begin() + n), label_,
                            params_);
}

ArithmeticSequence ArithmeticSequence::rotated(double theta) const {
  const cplx w = std::polar(1.0, theta);
  std::vector<cplx> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w * values_[i];
  return ArithmeticSequence(std::move(out), label_, params_);
}

std::uint64_t ArithmeticSequence::content_hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  unsigned char buf[16];
  for (const cplx& z : values_) {
    const auto re = std::bit_cast<std::uint64_t>(z.real());
    const auto im = std::bit_cast<std::uint64_t>(z.imag());
    for (int b = 0; b < 8; ++b) {
      buf[b] = static_cast<unsigned char>(re >> (8 * b));
      buf[8 + b] = static_cast<unsigned char>(im >> (8 * b));
    }
    h = io::fnv1a(buf, h);
  }
  return h;
}

namespace io {

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
  out.write(buf, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) fail(ErrorKind::IoError, "unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | buf[b];
  return v;
}

void write_f64_le(std::ostream& out, double v) { write_u64_le(out, std::bit_cast<std::uint64_t>(v)); }

double read_f64_le(std::istream& in) { return std::bit_cast<double>(read_u64_le(in)); }

void write_sequence_csv(const ArithmeticSequence& u, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << "n,re,im\n";
  char line[96];
  for (std::size_t n = 1; n <= u.size(); ++n) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", n, u(n).real(), u(n).imag());
    out << line;
  }
}

ArithmeticSequence read_sequence_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "n,re,im") fail(ErrorKind::IoError, path.string() + ": expected header n,re,im");
  std::vector<cplx> values;
  std::size_t expect = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string n_s, re_s, im_s;
    if (!std::getline(row, n_s, ',') || !std::getline(row, re_s, ',') || !std::getline(row, im_s)) {
      fail(ErrorKind::IoError, path.string() + ": malformed row '" + line + "'");
    }
    if (std::stoull(n_s) != expect) {
      fail(ErrorKind::IoError, path.string() + ": indices must run 1,2,3,... (row " + n_s + ")");
    }
    values.emplace_back(std::stod(re_s), std::stod(im_s));
    ++expect;
  }
  return ArithmeticSequence(std::move(values), path.stem().string(),
                            {{"source", path.string()}});
}

void write_complex_binary(std::span<const cplx> values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(kSequenceMagic, 8);
  for (const cplx& z : values) {
    write_f64_le(out, z.real());
    write_f64_le(out, z.imag());
  }
}

std::vector<cplx> read_complex_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSequenceMagic, 8) != 0) {
    fail(ErrorKind::IoError, path.string() + ": bad magic (expected FSLAB001)");
  }
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(in.tellg()) - 8;
  if (bytes % 16 != 0) fail(ErrorKind::IoError, path.string() + ": truncated float pair");
  in.seekg(8);
  std::vector<cplx> values(bytes / 16);
  for (auto& z : values) {
    const double re = read_f64_le(in);
    const double im = read_f64_le(in);
    z = {re, im};
  }
  return values;
}

void write_sequence_binary(const ArithmeticSequence& u, const std::filesystem::path& path) {
  write_complex_binary(u.values(), path);
}

ArithmeticSequence read_sequence_binary(const std::filesystem::path& path) {
  return ArithmeticSequence(read_complex_binary(path), path.stem().string(),
                            {{"source", path.string()}});
}

ArithmeticSequence read_sequence(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return read_sequence_binary(path);
  return read_sequence_csv(path);
}

}  // namespace io
}  // namespace fslab
