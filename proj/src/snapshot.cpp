#include "pvalert/snapshot.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "pvalert/error.hpp"
#include "pvalert/text.hpp"

namespace pvalert {

namespace {

std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw InputError(std::string("snapshot truncated reading ") + what);
  return tok;
}

void expect(std::istream& in, std::string_view word) {
  const auto tok = next_token(in, std::string(word).c_str());
  if (tok != word) throw InputError("snapshot: expected '" + std::string(word) + "', got '" + tok + "'");
}

std::uint64_t read_uint(std::istream& in, const char* what) {
  const auto tok = next_token(in, what);
  auto v = parse_uint(tok);
  if (!v) throw InputError(std::string("snapshot: bad integer for ") + what);
  return *v;
}

double read_double(std::istream& in, const char* what) {
  const auto tok = next_token(in, what);
  auto v = parse_double(tok);
  if (!v) throw InputError(std::string("snapshot: bad number for ") + what);
  return *v;
}

}  // namespace

void write_multinomials(std::ostream& out, std::vector<MultinomialEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out << "pvalert-multinomials 1\n" << entries.size() << '\n';
  for (const auto& [key, det] : entries) {
    out << key.entity.to_string() << ' ' << to_string(key.feature) << ' ' << det.size();
    for (auto c : det.counts()) out << ' ' << c;
    out << '\n';
  }
}

std::vector<MultinomialEntry> read_multinomials(std::istream& in) {
  expect(in, "pvalert-multinomials");
  if (read_uint(in, "version") != 1) throw InputError("unsupported multinomial snapshot version");
  const auto n = read_uint(in, "entry count");
  std::vector<MultinomialEntry> entries;
  entries.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto ip = IpAddress::parse(next_token(in, "address"));
    if (!ip) throw InputError("snapshot: bad address");
    const auto feature = parse_feature(next_token(in, "feature"));
    if (!feature) throw InputError("snapshot: bad feature");
    const auto k = read_uint(in, "bin count");
    if (k > (1u << 24)) throw InputError("snapshot: implausible bin count");
    std::vector<std::uint64_t> counts(k);
    for (auto& c : counts) c = read_uint(in, "count");
    entries.emplace_back(DetectorKey{*ip, *feature}, StreamingMultinomial::from_counts(std::move(counts)));
  }
  return entries;
}

void write_gaussian_detector(std::ostream& out, const StreamingGaussianDetector& det) {
  const auto& o = det.options();
  out << "pvalert-gaussian 1\n";
  out << "dim " << det.dim() << '\n';
  out << "options " << o.warmup << ' ' << o.refit_every << ' ' << o.history_capacity << ' '
      << format_double(o.mcd.trim_fraction) << ' ' << o.mcd.starts << ' ' << o.mcd.max_iter << ' '
      << o.mcd.seed << ' ' << format_double(o.mcd.ridge) << '\n';
  out << "state " << det.since_refit() << ' ' << det.refits() << '\n';
  if (const auto& m = det.model()) {
    out << "model";
    for (Eigen::Index i = 0; i < m->dim(); ++i) out << ' ' << format_double(m->mean()(i));
    for (Eigen::Index i = 0; i < m->dim(); ++i) {
      for (Eigen::Index j = 0; j < m->dim(); ++j) out << ' ' << format_double(m->covariance()(i, j));
    }
    out << '\n';
  } else {
    out << "model none\n";
  }
  out << "history " << det.history().size() << '\n';
  for (const auto& v : det.history()) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v(i));
    out << '\n';
  }
}

StreamingGaussianDetector read_gaussian_detector(std::istream& in) {
  expect(in, "pvalert-gaussian");
  if (read_uint(in, "version") != 1) throw InputError("unsupported gaussian snapshot version");
  expect(in, "dim");
  const auto d = static_cast<Eigen::Index>(read_uint(in, "dim"));
  if (d < 1 || d > 4096) throw InputError("snapshot: implausible dimension");

  expect(in, "options");
  GaussianDetectorOptions o;
  o.warmup = read_uint(in, "warmup");
  o.refit_every = read_uint(in, "refit_every");
  o.history_capacity = read_uint(in, "history_capacity");
  o.mcd.trim_fraction = read_double(in, "trim_fraction");
  o.mcd.starts = static_cast<int>(read_uint(in, "starts"));
  o.mcd.max_iter = static_cast<int>(read_uint(in, "max_iter"));
  o.mcd.seed = read_uint(in, "seed");
  o.mcd.ridge = read_double(in, "ridge");

  expect(in, "state");
  const auto since_refit = read_uint(in, "since_refit");
  const auto refits = read_uint(in, "refits");

  expect(in, "model");
  std::optional<MultivariateGaussian> model;
  const auto first = next_token(in, "model");
  if (first != "none") {
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd cov(d, d);
    auto v = parse_double(first);
    if (!v) throw InputError("snapshot: bad model mean");
    mean(0) = *v;
    for (Eigen::Index i = 1; i < d; ++i) mean(i) = read_double(in, "mean");
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) cov(i, j) = read_double(in, "covariance");
    }
    model.emplace(std::move(mean), std::move(cov));
  }

  expect(in, "history");
  const auto count = read_uint(in, "history size");
  std::deque<Eigen::VectorXd> history;
  for (std::uint64_t n = 0; n < count; ++n) {
    Eigen::VectorXd x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = read_double(in, "history value");
    history.push_back(std::move(x));
  }
  return StreamingGaussianDetector::restore(d, o, std::move(history), std::move(model), since_refit,
                                            refits);
}

}  // namespace pvalert
