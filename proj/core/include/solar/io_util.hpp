#pragma once

#include <string>
#include <vector>

#include "solar/matrix.hpp"
#include "solar/randsvd.hpp"
#include "solar/theory.hpp"

namespace solar {

// Writes via a temp file in the same directory plus rename, so a partial
// file is never observable under the target path.
void write_file_atomic(const std::string &path, const std::string &content);

std::string format_real(double v);  // %.17g

// Matrix CSV: header "rows,cols", then one comma-separated line per row.
std::string matrix_to_csv(const Matrix &m);
Matrix matrix_from_csv_file(const std::string &path);
void write_matrix_csv(const std::string &path, const Matrix &m);

// Factor file: line 1 holds the singular values, then V row-major.
std::string factors_to_csv(const SvdFactors &f);
SvdFactors factors_from_csv_file(const std::string &path);

std::string reports_to_csv(const std::vector<VerificationReport> &reports);

}  // namespace solar
