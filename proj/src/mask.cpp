#include "cpsaa/mask.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace cpsaa {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'S', 'A', 'M', 'S', 'K', '1'};

uint64_t splitmix(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

MaskMatrix binarize(const FixedPointMatrix& m, double theta) {
  MaskMatrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++)
      if (m.value_at(r, c) >= theta) out.set(r, c, true);
  return out;
}

MaskMatrix generate_mask(const FixedPointMatrix& x, const IntMatrix& ws_quant,
                         const QuantConfig& q) {
  q.validate();
  if (x.cols != ws_quant.rows || ws_quant.rows != ws_quant.cols)
    throw std::invalid_argument("generate_mask: Ws_quant must be d_model x d_model");
  IntMatrix qx = quantize(x, q);
  IntMatrix scores = int_matmul(int_matmul(qx, ws_quant), int_transpose(qx));
  FixedPointMatrix approx = dequantize(scores, q, 3);  // three quantized factors
  RealMatrix scaled = to_real(approx);
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.d));
  for (double& v : scaled.data) v *= inv;
  FixedPointMatrix probs = softmax_rows(extract_exponent(scaled));
  return binarize(probs, q.theta);
}

FixedPointMatrix masked_softmax_rows(const FixedPointMatrix& m, const MaskMatrix& mask,
                                     double scale) {
  if (m.rows != mask.rows || m.cols != mask.cols)
    throw std::invalid_argument("masked_softmax_rows: mask shape mismatch");
  RealMatrix vals = to_real(m);
  RealMatrix out(m.rows, m.cols, 0.0);
  for (int r = 0; r < m.rows; r++) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < m.cols; c++)
      if (mask.get(r, c)) mx = std::max(mx, vals.at(r, c) * scale);
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully pruned row
    double sum = 0.0;
    for (int c = 0; c < m.cols; c++) {
      if (!mask.get(r, c)) continue;
      double e = std::exp(vals.at(r, c) * scale - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < m.cols; c++)
      if (mask.get(r, c)) out.at(r, c) /= sum;
  }
  return extract_exponent(out);
}

FixedPointMatrix masked_attention_oracle(const FixedPointMatrix& x,
                                         const FixedPointMatrix& wq,
                                         const FixedPointMatrix& wk,
                                         const FixedPointMatrix& wv,
                                         const MaskMatrix& mask, int d) {
  FixedPointMatrix qm = fp_matmul(x, wq);
  FixedPointMatrix km = fp_matmul(x, wk);
  FixedPointMatrix vm = fp_matmul(x, wv);
  FixedPointMatrix scores = fp_matmul(qm, fp_transpose(km));
  FixedPointMatrix p = masked_softmax_rows(scores, mask, 1.0 / std::sqrt(static_cast<double>(d)));
  return fp_matmul(p, vm);
}

RecamSearchResult recam_search(const MaskMatrix& mask) {
  RecamSearchResult out;
  for (int r = 0; r < mask.rows; r++) {
    RowMatch match;
    match.alpha = r;
    for (int c = 0; c < mask.cols; c++)
      if (mask.get(r, c)) match.betas.push_back(c);
    if (match.betas.empty())
      out.empty_rows++;
    else
      out.matches.push_back(std::move(match));
  }
  return out;
}

MaskStats mask_stats(const MaskMatrix& mask) {
  MaskStats s;
  s.density = mask.density();
  s.per_row_nnz.assign(mask.rows, 0);
  s.per_col_nnz.assign(mask.cols, 0);
  for (int r = 0; r < mask.rows; r++)
    for (int c = 0; c < mask.cols; c++)
      if (mask.get(r, c)) {
        s.per_row_nnz[r]++;
        s.per_col_nnz[c]++;
      }
  for (int v : s.per_row_nnz) s.max_row_nnz = std::max(s.max_row_nnz, v);
  for (int v : s.per_col_nnz) s.max_col_nnz = std::max(s.max_col_nnz, v);
  return s;
}

// ---- generators ------------------------------------------------------------

MaskMatrix random_mask(int rows, int cols, double density, uint64_t seed) {
  MaskMatrix out(rows, cols);
  uint64_t state = seed;
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++) {
      double u = static_cast<double>(splitmix(state) >> 11) * (1.0 / 9007199254740992.0);
      if (u < density) out.set(r, c, true);
    }
  return out;
}

MaskMatrix banded_mask(int n, int band) {
  MaskMatrix out(n, n);
  for (int r = 0; r < n; r++)
    for (int t = 0; t < band; t++) out.set(r, (r + t) % n, true);
  return out;
}

MaskMatrix lower_triangular_mask(int n) {
  MaskMatrix out(n, n);
  for (int r = 0; r < n; r++)
    for (int c = 0; c <= r; c++) out.set(r, c, true);
  return out;
}

MaskMatrix full_mask(int rows, int cols) { return MaskMatrix(rows, cols, true); }

// ---- file I/O --------------------------------------------------------------

void save_mask_text(const MaskMatrix& mask, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw FileError("cannot open mask file for writing: " + path);
  f << mask.rows << ' ' << mask.cols << '\n';
  for (int r = 0; r < mask.rows; r++) {
    for (int c = 0; c < mask.cols; c++) f << (mask.get(r, c) ? '1' : '0');
    f << '\n';
  }
  if (!f) throw FileError("short write on mask file: " + path);
}

void save_mask_binary(const MaskMatrix& mask, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open mask file for writing: " + path);
  f.write(kMagic, 8);
  int32_t dims[2] = {mask.rows, mask.cols};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<uint8_t> packed((mask.bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < mask.bits.size(); i++)
    if (mask.bits[i]) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  f.write(reinterpret_cast<const char*>(packed.data()),
          static_cast<std::streamsize>(packed.size()));
  if (!f) throw FileError("short write on mask file: " + path);
}

MaskMatrix load_mask(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open mask file: " + path);
  char magic[8] = {};
  f.read(magic, 8);
  if (f.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0) {
    int32_t dims[2];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f || dims[0] < 0 || dims[1] < 0)
      throw FileError("truncated binary mask header: " + path);
    MaskMatrix out(dims[0], dims[1]);
    std::vector<uint8_t> packed((out.bits.size() + 7) / 8);
    f.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (static_cast<size_t>(f.gcount()) != packed.size())
      throw FileError("truncated binary mask payload: " + path);
    for (size_t i = 0; i < out.bits.size(); i++)
      if (packed[i / 8] & (1u << (i % 8))) out.set(static_cast<int>(i) / out.cols,
                                                   static_cast<int>(i) % out.cols, true);
    return out;
  }

  // Not the binary magic: parse as text.
  f.clear();
  f.seekg(0);
  std::string header;
  if (!std::getline(f, header)) throw FileError("empty mask file: " + path);
  std::istringstream hs(header);
  int rows = -1, cols = -1;
  if (!(hs >> rows >> cols) || rows < 0 || cols < 0)
    throw FileError("bad mask header (want \"rows cols\"): " + path);
  MaskMatrix out(rows, cols);
  std::string line;
  for (int r = 0; r < rows; r++) {
    if (!std::getline(f, line)) throw FileError("mask file ends early: " + path);
    if (static_cast<int>(line.size()) < cols)
      throw FileError("mask row shorter than declared width: " + path);
    for (int c = 0; c < cols; c++) {
      if (line[c] == '1')
        out.set(r, c, true);
      else if (line[c] != '0')
        throw FileError("mask rows must be 0/1 digits: " + path);
    }
  }
  return out;
}

}  // namespace cpsaa
