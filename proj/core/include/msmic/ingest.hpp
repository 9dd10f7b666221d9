#pragma once

#include <string>
#include <vector>

#include "msmic/frame.hpp"

namespace msmic {

// Column roles for delimited ingestion. Assignment comes either as a single
// integer arm column (1..H) or as one-hot columns, one per arm. Regressors are
// either shared across arms or listed per arm.
struct ColumnSchema {
  std::string outcome;
  std::string arm_column;              // exclusive with one_hot
  std::vector<std::string> one_hot;    // exclusive with arm_column
  std::vector<std::string> confounders;
  std::vector<std::string> shared_regressors;
  std::vector<std::vector<std::string>> per_arm_regressors;
  int arms = 0;  // optional; inferred from one_hot/per_arm lists or the data
};

// Header-row CSV into a validated frame. Errors name the offending column and
// 1-based data row.
TreatmentFrame ingest_csv(const std::string& path, const ColumnSchema& schema,
                          char delimiter = ',');

// Canonical frame layout: arm,y,z1..zs,x1_a1..,x1_a2.. with full double
// precision, so write -> read reproduces the frame exactly.
void write_frame_csv(const std::string& path, const TreatmentFrame& frame,
                     char delimiter = ',');
TreatmentFrame read_frame_csv(const std::string& path, char delimiter = ',');

}  // namespace msmic
