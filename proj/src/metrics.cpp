#include "tsk/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>

namespace tsk {

void PredictionSet::validate() const {
  if (scores.rank() != 2 || scores.shape() != labels.shape()) {
    throw MetricError("scores " + to_string(scores.shape()) + " and labels " + to_string(labels.shape()) +
                      " must be matching [N x C] matrices");
  }
  for (double z : labels.data()) {
    if (z != 0.0 && z != 1.0) throw MetricError("labels must be 0 or 1");
  }
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("average_precision: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1.0));
  if (positives == 0) return std::nullopt;
  // short rankings stay off the heap
  std::array<std::size_t, 32> small;
  std::vector<std::size_t> large;
  std::span<std::size_t> order;
  if (scores.size() <= small.size()) {
    order = std::span<std::size_t>(small.data(), scores.size());
  } else {
    large.resize(scores.size());
    order = large;
  }
  std::iota(order.begin(), order.end(), std::size_t{0});
  // ties rank by index; same order as a stable sort, without its scratch buffer
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1.0) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

namespace {

MapResult map_over_columns(const Tensor& scores, const Tensor& labels) {
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  MapResult result;
  std::vector<double> s(n), z(n);
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores.at(i, c);
      z[i] = labels.at(i, c);
    }
    auto ap = average_precision(s, z);
    if (ap) {
      total += *ap;
      ++result.defined_classes;
    }
    result.per_class.push_back(ap);
  }
  if (result.defined_classes == 0) throw MetricError("no class has a positive example; mAP is undefined");
  result.mean = total / static_cast<double>(result.defined_classes);
  return result;
}

}  // namespace

MapResult clip_map(const PredictionSet& predictions) {
  predictions.validate();
  return map_over_columns(predictions.scores, predictions.labels);
}

MapResult per_frame_map(std::span<const PredictionSet> videos) {
  if (videos.empty()) throw MetricError("per_frame_map: no videos");
  std::size_t frames = 0;
  const std::size_t classes = videos.front().scores.rank() == 2 ? videos.front().scores.dim(1) : 0;
  for (const auto& v : videos) {
    v.validate();
    if (v.scores.dim(1) != classes) throw MetricError("per_frame_map: videos disagree on class count");
    frames += v.scores.dim(0);
  }
  Tensor scores({frames, classes}), labels({frames, classes});
  std::size_t offset = 0;
  for (const auto& v : videos) {
    std::copy(v.scores.data().begin(), v.scores.data().end(), scores.data().begin() + static_cast<std::ptrdiff_t>(offset));
    std::copy(v.labels.data().begin(), v.labels.data().end(), labels.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.scores.size();
  }
  return map_over_columns(scores, labels);
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw MetricError("accuracy: prediction and truth lengths differ");
  if (predicted.empty()) throw MetricError("accuracy: no examples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

SpeedError speed_error(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw MetricError("speed_error: prediction and target lengths differ");
  if (predictions.empty()) throw MetricError("speed_error: no examples");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    abs_sum += std::abs(r);
    sq_sum += r * r;
  }
  const auto n = static_cast<double>(predictions.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

nlohmann::json map_report(const MapResult& result, std::span<const std::string> class_names) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    per_class[name] = result.per_class[c] ? nlohmann::json(*result.per_class[c]) : nlohmann::json(nullptr);
  }
  return {{"mAP", result.mean}, {"per_class_ap", per_class}, {"defined_classes", result.defined_classes}};
}

void write_ap_table_csv(std::ostream& out, std::span<const std::string> class_names, std::span<const ApTableRow> rows) {
  out << "method";
  for (const auto& name : class_names) out << ',' << name;
  out << ",mAP\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& row : rows) {
    out << row.method;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      out << ',';
      if (c < row.result.per_class.size() && row.result.per_class[c]) out << *row.result.per_class[c];
    }
    out << ',' << row.result.mean << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace tsk
