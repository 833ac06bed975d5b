#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsk/tensor.hpp"

namespace tsk {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scores and 0/1 labels, both [N x C]. Row order is the example-id order
/// used to break score ties.
struct PredictionSet {
  Tensor scores;
  Tensor labels;

  void validate() const;
};

/// Non-interpolated average precision: rank by descending score (ties keep
/// input order) and average precision@k over the ranks of the positives.
/// Undefined (nullopt) when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels);

struct MapResult {
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
  std::size_t defined_classes = 0;
};

/// Mean AP over classes that have at least one positive. Throws MetricError
/// if no class does.
MapResult clip_map(const PredictionSet& predictions);

/// AP per class over the frames of all videos pooled together, then the mean.
MapResult per_frame_map(std::span<const PredictionSet> videos);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

struct SpeedError {
  double mae = 0.0;
  double rmse = 0.0;
};
SpeedError speed_error(std::span<const double> predictions, std::span<const double> targets);

/// {"mAP": m, "per_class_ap": {name: ap or null}, "defined_classes": n}
nlohmann::json map_report(const MapResult& result, std::span<const std::string> class_names);

/// Method rows x class columns of AP, plus a trailing mAP column.
struct ApTableRow {
  std::string method;
  MapResult result;
};
void write_ap_table_csv(std::ostream& out, std::span<const std::string> class_names, std::span<const ApTableRow> rows);

}  // namespace tsk
