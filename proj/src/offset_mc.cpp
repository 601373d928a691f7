#include "tfb/offset_mc.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tfb/parallel.hpp"

namespace tfb {

FunctionClassSample FunctionClassSample::from_matrix(Mat G) {
  if (G.rows() < 1 || G.cols() < 1)
    throw InvalidParameter("FunctionClassSample: matrix must be nonempty");
  if (!G.allFinite()) throw InvalidParameter("FunctionClassSample: non-finite entries");
  FunctionClassSample fc;
  fc.value_cap = G.array().abs().maxCoeff();
  fc.values = std::move(G);
  return fc;
}

namespace {

// Quadratic penalties (beta/n) sum_i G_ji^2 per row.
Vec row_penalties(const FunctionClassSample& fc, double beta) {
  const double inv_n = 1.0 / static_cast<double>(fc.sample_size());
  return beta * inv_n * fc.values.rowwise().squaredNorm();
}

// max_j [ (1/n) s_j - q_j ] for the current signed row sums s.
double inner_max(const Vec& s, const Vec& q, double inv_n) {
  double best = s(0) * inv_n - q(0);
  for (Index j = 1; j < s.size(); ++j) best = std::max(best, s(j) * inv_n - q(j));
  return best;
}

}  // namespace

OffsetEstimate offset_complexity_exact(const FunctionClassSample& fc, double beta, int workers) {
  if (!(beta > 0.0)) throw InvalidParameter("offset_complexity_exact: beta must be > 0");
  const Index n = fc.sample_size();
  if (n > 20)
    throw SizeLimitError(
        "offset_complexity_exact: n > 20 enumerates more than 2^20 sign vectors; "
        "use offset_complexity_mc");
  const Index nf = fc.class_size();
  const Vec q = row_penalties(fc, beta);
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::uint64_t total = 1ull << n;
  // Fixed-size chunks walked in Gray-code order; chunk sums combine in chunk
  // order, so the result does not depend on the worker count.
  constexpr std::uint64_t kChunk = 4096;
  const std::size_t n_chunks = static_cast<std::size_t>((total + kChunk - 1) / kChunk);
  std::vector<long double> chunk_sums(n_chunks, 0.0L);
  parallel_for(n_chunks, workers, [&](std::size_t chunk) {
    const std::uint64_t begin = chunk * kChunk;
    const std::uint64_t end = std::min(begin + kChunk, total);
    std::vector<double> sign(static_cast<std::size_t>(n));
    const std::uint64_t gray0 = begin ^ (begin >> 1);
    for (Index i = 0; i < n; ++i) sign[static_cast<std::size_t>(i)] = (gray0 >> i) & 1ull ? -1.0 : 1.0;
    Vec s = Vec::Zero(nf);
    for (Index j = 0; j < nf; ++j)
      for (Index i = 0; i < n; ++i) s(j) += sign[static_cast<std::size_t>(i)] * fc.values(j, i);
    long double acc = 0.0L;
    for (std::uint64_t c = begin; c < end; ++c) {
      acc += inner_max(s, q, inv_n);
      if (c + 1 == end) break;
      const int flip = std::countr_zero(c + 1);  // gray(c) ^ gray(c+1) == 1 << flip
      const double delta = -2.0 * sign[static_cast<std::size_t>(flip)];
      sign[static_cast<std::size_t>(flip)] = -sign[static_cast<std::size_t>(flip)];
      s += delta * fc.values.col(flip);
    }
    chunk_sums[chunk] = acc;
  });
  long double sum = 0.0L;
  for (const long double c : chunk_sums) sum += c;
  OffsetEstimate est;
  est.value = static_cast<double>(sum / static_cast<long double>(total));
  est.std_error = 0.0;
  est.method = OffsetMethod::exact;
  est.n_draws = static_cast<long>(total);
  est.beta = beta;
  return est;
}

OffsetEstimate offset_complexity_mc(const FunctionClassSample& fc, double beta, long n_draws,
                                    RngStream stream, int workers) {
  if (!(beta > 0.0)) throw InvalidParameter("offset_complexity_mc: beta must be > 0");
  if (n_draws < 100) throw InvalidParameter("offset_complexity_mc: n_draws must be >= 100");
  const Index n = fc.sample_size();
  const Index nf = fc.class_size();
  const Vec q = row_penalties(fc, beta);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> draws(static_cast<std::size_t>(n_draws));
  parallel_for(draws.size(), workers, [&](std::size_t t) {
    Rng rng(substream(stream, t));
    // 64 sign bits per word
    std::uint64_t word = 0;
    int bits_left = 0;
    Vec s = Vec::Zero(nf);
    for (Index i = 0; i < n; ++i) {
      if (bits_left == 0) {
        word = rng.next_u64();
        bits_left = 64;
      }
      const double tau = (word & 1ull) ? -1.0 : 1.0;
      word >>= 1;
      --bits_left;
      s += tau * fc.values.col(i);
    }
    draws[t] = inner_max(s, q, inv_n);
  });
  long double sum = 0.0L;
  for (const double v : draws) sum += v;
  const double mean = static_cast<double>(sum / static_cast<long double>(n_draws));
  long double ss = 0.0L;
  for (const double v : draws) ss += static_cast<long double>(v - mean) * (v - mean);
  const double sd = n_draws > 1 ? std::sqrt(static_cast<double>(ss) / (n_draws - 1)) : 0.0;
  OffsetEstimate est;
  est.value = mean;
  est.std_error = sd / std::sqrt(static_cast<double>(n_draws));
  est.method = OffsetMethod::monte_carlo;
  est.n_draws = n_draws;
  est.beta = beta;
  return est;
}

FunctionClassSample build_class_sample(const ArchSpec& spec, const ParamBudget& budget, Loss loss,
                                       const TransformerParams& teacher,
                                       const std::vector<Mat>& X_sample, long grid_size,
                                       RngStream stream, double noise_sd, bool include_teacher) {
  if (grid_size < 1) throw InvalidParameter("build_class_sample: grid_size must be >= 1");
  if (X_sample.empty()) throw InvalidParameter("build_class_sample: empty input sample");
  validate_shapes(teacher, spec);
  const Index n = static_cast<Index>(X_sample.size());
  std::vector<double> teacher_out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    teacher_out[static_cast<std::size_t>(i)] = forward(teacher, X_sample[static_cast<std::size_t>(i)], spec);
  const Index rows = grid_size + (include_teacher ? 1 : 0);
  Mat G(rows, n);
  Index row = 0;
  if (include_teacher) {
    G.row(row++).setZero();  // g(.; f*) == 0
  }
  for (long j = 0; j < grid_size; ++j, ++row) {
    const TransformerParams f =
        project_params(sample_params(spec, substream(stream, static_cast<std::uint64_t>(j))),
                       budget, spec);
    for (Index i = 0; i < n; ++i) {
      const double yhat = forward(f, X_sample[static_cast<std::size_t>(i)], spec);
      G(row, i) = conditional_excess(loss, noise_sd, yhat, teacher_out[static_cast<std::size_t>(i)]);
    }
  }
  return FunctionClassSample::from_matrix(std::move(G));
}

MatrixSeriesBounds matrix_series_bounds(const std::vector<Mat>& series) {
  if (series.empty()) throw InvalidParameter("matrix_series_bounds: empty series");
  const Index d1 = series.front().rows();
  const Index d2 = series.front().cols();
  Mat left = Mat::Zero(d1, d1);   // sum B B^T
  Mat right = Mat::Zero(d2, d2);  // sum B^T B
  for (const auto& B : series) {
    if (B.rows() != d1 || B.cols() != d2)
      throw InvalidParameter("matrix_series_bounds: matrices must share a shape");
    left.noalias() += B * B.transpose();
    right.noalias() += B.transpose() * B;
  }
  MatrixSeriesBounds out;
  out.d1 = d1;
  out.d2 = d2;
  out.variance = std::max(spectral_norm(left), spectral_norm(right));
  out.mean_bound = std::sqrt(2.0 * out.variance * std::log(static_cast<double>(d1 + d2)));
  return out;
}

void write_class_sample_csv(const FunctionClassSample& fc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_class_sample_csv: cannot open " + path);
  char buf[64];
  for (Index j = 0; j < fc.values.rows(); ++j) {
    for (Index i = 0; i < fc.values.cols(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", fc.values(j, i));
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write_class_sample_csv: write failed for " + path);
}

FunctionClassSample read_class_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_class_sample_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("read_class_sample_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("read_class_sample_csv: empty file " + path);
  Mat G(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index j = 0; j < G.rows(); ++j)
    for (Index i = 0; i < G.cols(); ++i)
      G(j, i) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return FunctionClassSample::from_matrix(std::move(G));
}

}  // namespace tfb
