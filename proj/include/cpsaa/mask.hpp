#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpsaa/fixed_point.hpp"

namespace cpsaa {

// ---- sparsity mask --------------------------------------------------------

// Dense 0/1 matrix with a maintained popcount so density queries are O(1).
struct MaskMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> bits;  // row-major, one byte per position
  int64_t ones = 0;

  MaskMatrix() = default;
  MaskMatrix(int r, int c, bool fill = false)
      : rows(r), cols(c), bits(static_cast<size_t>(r) * c, fill ? 1 : 0),
        ones(fill ? static_cast<int64_t>(r) * c : 0) {}

  bool get(int r, int c) const { return bits[static_cast<size_t>(r) * cols + c] != 0; }

  void set(int r, int c, bool v) {
    uint8_t& slot = bits[static_cast<size_t>(r) * cols + c];
    ones += (v ? 1 : 0) - (slot ? 1 : 0);
    slot = v ? 1 : 0;
  }

  double density() const {
    return rows && cols ? static_cast<double>(ones) / (static_cast<double>(rows) * cols) : 0.0;
  }
};

// One scheduler hit: the retained key/value positions of a query row.
struct RowMatch {
  int alpha = 0;            // query row index
  std::vector<int> betas;   // retained column indices, ascending
};

struct RecamSearchResult {
  std::vector<RowMatch> matches;  // one entry per row with at least one hit
  int empty_rows = 0;             // fully pruned rows
};

struct MaskStats {
  double density = 0.0;
  std::vector<int> per_row_nnz;
  std::vector<int> per_col_nnz;
  int max_row_nnz = 0;
  int max_col_nnz = 0;
};

// ---- mask construction -----------------------------------------------------

// 1 where value >= theta (boundary inclusive).
MaskMatrix binarize(const FixedPointMatrix& m, double theta);

// Full low-precision pruning path:
//   binarize(softmax(dequantize(Q(X) * Ws_quant * Q(X)^T, power 3) / sqrt(d)), theta).
// Ws_quant must be quantize(Ws, q) for the same config.
MaskMatrix generate_mask(const FixedPointMatrix& x, const IntMatrix& ws_quant,
                         const QuantConfig& q);

// Row-wise softmax over the unmasked entries only; masked entries are exact
// zeros and a fully masked row stays all-zero. `scale` multiplies scores first.
FixedPointMatrix masked_softmax_rows(const FixedPointMatrix& m, const MaskMatrix& mask,
                                     double scale = 1.0);

// Dense reference: softmax with masked scores hard-set to -inf, then times V.
// Matches masked_softmax_rows + masked accumulation by construction.
FixedPointMatrix masked_attention_oracle(const FixedPointMatrix& x,
                                         const FixedPointMatrix& wq,
                                         const FixedPointMatrix& wk,
                                         const FixedPointMatrix& wv,
                                         const MaskMatrix& mask, int d);

// Content-addressable row scan: one RowMatch per row that retains columns.
RecamSearchResult recam_search(const MaskMatrix& mask);

MaskStats mask_stats(const MaskMatrix& mask);

// ---- generators ------------------------------------------------------------

MaskMatrix random_mask(int rows, int cols, double density, uint64_t seed);
MaskMatrix banded_mask(int n, int band);             // cyclic band, every row/col has `band` hits
MaskMatrix lower_triangular_mask(int n);             // causal pattern
MaskMatrix full_mask(int rows, int cols);

// ---- file I/O --------------------------------------------------------------

// Text format: "rows cols" header then one 0/1 digit row per line.
// Binary format: 8-byte magic "CPSAMSK1", int32 rows, int32 cols, packed bits.
void save_mask_text(const MaskMatrix& mask, const std::string& path);
void save_mask_binary(const MaskMatrix& mask, const std::string& path);
MaskMatrix load_mask(const std::string& path);  // sniffs the format; throws FileError

// Thrown for unreadable or malformed mask files.
struct FileError : std::runtime_error {
  explicit FileError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpsaa
