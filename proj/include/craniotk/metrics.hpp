#pragma once

#include "craniotk/volume.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace craniotk {

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.0.
/// Throws GeometryMismatch.
double dice(const VoxelGrid& a, const VoxelGrid& b);

/// Symmetric Hausdorff distance in mm between the face-adjacency surfaces of
/// a and b. percentile = 100 gives the maximum of both directed distances;
/// other values take that percentile (linear interpolation between order
/// statistics) of each directed set, then the larger of the two.
/// A nonempty mask without a surface (it fills the grid) uses all of its
/// voxels. Throws EmptyMask if either mask is empty, GeometryMismatch.
double hausdorff(const VoxelGrid& a, const VoxelGrid& b, double percentile = 100.0);

/// Distances in mm from every surface voxel of `from` to the nearest surface
/// voxel of `to`, in ascending linear-index order of the `from` voxels.
std::vector<double> directed_surface_distances(const VoxelGrid& from, const VoxelGrid& to);

/// Report subsets. Manifest "train" cases evaluate as train-val.
enum class Subset { Test, TestExtra, TrainVal };

std::string to_string(Subset s);
Subset subset_from_string(const std::string& name);

struct EvaluationRow {
    std::string case_id;
    Subset subset = Subset::Test;
    double dice = 0.0;
    /// Missing when HD is undefined (an empty prediction or ground truth).
    std::optional<double> hd_mm;

    friend bool operator==(const EvaluationRow&, const EvaluationRow&) = default;
};

struct Aggregate {
    int n = 0;
    /// Rows contributing to the HD statistics.
    int n_hd = 0;
    double mean_dice = 0.0;
    double std_dice = 0.0;
    std::optional<double> mean_hd;
    std::optional<double> std_hd;

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

/// Mean and population standard deviation (divide by N).
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

struct EvaluationReport {
    std::vector<EvaluationRow> rows;
    /// Keyed by subset name plus "overall".
    std::map<std::string, Aggregate> aggregates;
    double hd_percentile = 100.0;

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Aggregates per subset present in `rows` and overall.
EvaluationReport aggregate(std::vector<EvaluationRow> rows, double hd_percentile = 100.0);

/// JSON text: {"meta":{...},"rows":[...],"aggregates":{...}}.
std::string report_to_json(const EvaluationReport& report);
/// Throws SchemaViolation.
EvaluationReport report_from_json(const std::string& text);

/// One row per case under the fixed header "case_id,subset,dice,hd_mm";
/// an undefined HD is an empty field.
std::string report_to_csv(const EvaluationReport& report);

/// "mean (std)" with three decimals, the tabulated format.
std::string format_mean_std(double mean, double std);

} // namespace craniotk
