#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/matrix.hpp"

// Text formats.
//   SMF1: "SMF1 <rows> <cols> <nnz>" then nnz lines "<row> <col> <value>",
//         0-indexed integers, sorted by column then row.
//   DMF1: "DMF1 <rows> <cols>" then <rows> lines of <cols> doubles printed
//         with 17 significant digits (lossless round-trip).
// Both end with a trailing newline; writers are byte-deterministic.

namespace sparsefact {

inline std::string to_smf1(const SparseIntMatrix& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.nnz()) * 12 + 32);
    char buf[64];
    std::snprintf(buf, sizeof buf, "SMF1 %d %d %" PRId64 "\n", m.rows(), m.cols(), m.nnz());
    out += buf;
    for (int j = 0; j < m.cols(); ++j)
        for (std::int64_t k = m.col_begin(j); k < m.col_end(j); ++k) {
            std::snprintf(buf, sizeof buf, "%d %d %d\n", m.entry_row(k), j,
                          static_cast<int>(m.entry_value(k)));
            out += buf;
        }
    return out;
}

inline SparseIntMatrix smf1_from_string(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    std::string magic;
    int rows = 0, cols = 0;
    std::int64_t nnz = 0;
    if (!(in >> magic >> rows >> cols >> nnz) || magic != "SMF1")
        throw IoError(what + ": not an SMF1 header");
    if (rows < 0 || cols < 0 || nnz < 0) throw IoError(what + ": negative SMF1 dimensions");
    std::vector<Triplet> ts;
    ts.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t k = 0; k < nnz; ++k) {
        int r, c;
        long long v;
        if (!(in >> r >> c >> v)) throw IoError(what + ": truncated SMF1 body");
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw IoError(what + ": SMF1 entry out of range");
        if (v == 0) throw IoError(what + ": SMF1 stores explicit zero");
        ts.push_back({r, c, static_cast<std::int32_t>(v)});
    }
    return SparseIntMatrix::from_triplets(rows, cols, std::move(ts));
}

inline std::string to_dmf1(const DenseMatrix& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.rows()) * m.cols() * 10 + 32);
    char buf[64];
    std::snprintf(buf, sizeof buf, "DMF1 %d %d\n", m.rows(), m.cols());
    out += buf;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) out += ' ';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline DenseMatrix dmf1_from_string(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    std::string magic;
    int rows = 0, cols = 0;
    if (!(in >> magic >> rows >> cols) || magic != "DMF1")
        throw IoError(what + ": not a DMF1 header");
    if (rows < 0 || cols < 0) throw IoError(what + ": negative DMF1 dimensions");
    DenseMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (!(in >> m(i, j))) throw IoError(what + ": truncated DMF1 body");
    return m;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_smf1(const std::string& path, const SparseIntMatrix& m) {
    write_file(path, to_smf1(m));
}
inline SparseIntMatrix read_smf1(const std::string& path) {
    return smf1_from_string(read_file(path), path);
}
inline void write_dmf1(const std::string& path, const DenseMatrix& m) {
    write_file(path, to_dmf1(m));
}
inline DenseMatrix read_dmf1(const std::string& path) {
    return dmf1_from_string(read_file(path), path);
}

}  // namespace sparsefact
