#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "rtplan/model.hpp"
#include "rtplan/upper.hpp"

namespace rtplan {

/// Text triplet format: first line "rows cols nnz", then nnz lines
/// "i j value" with 0-based indices.
void write_sparse(std::ostream& os, const SpMat& A);
SpMat read_sparse(std::istream& is);
void write_sparse_file(const std::string& path, const SpMat& A);
SpMat read_sparse_file(const std::string& path);

/// Value-surface CSV: header "N1,...,NM,V", one sample per row.
std::string surface_to_csv(const ValueSurface& surface);
ValueSurface surface_from_csv(std::istream& is);

/// Label grid for plotting: "# id name" legend lines, then rows of
/// comma-separated integer labels (0 = unassigned).
void write_phantom_labels(std::ostream& os, const Phantom& phantom);

/// Flat "key = value" files (plan summaries, manifests).
void write_kv(std::ostream& os, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_kv(std::istream& is);

std::string format_double(double v);

}  // namespace rtplan
