#pragma once

// Serialization of results: JSON blocks for the scores file, ground truth,
// plan statistics and the SVG heatmap of an outer plan.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hot/baselines.hpp"
#include "hot/error.hpp"
#include "hot/hot_core.hpp"
#include "hot/rotation.hpp"
#include "hot/synth.hpp"

namespace hot {

inline constexpr int kSchemaVersion = 1;

using nlohmann::json;

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) fail_input(what + ": expected a nested array");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) fail_input(what + ": ragged rows");
    for (Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) fail_input(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline json hot_block(const HotResult& r) {
  return {{"per_layer", to_json(r.per_layer_scores)},
          {"hot_score", r.hot_score},
          {"excluded_neurons", r.excluded_neurons},
          {"outer_objective", r.outer_plan.objective}};
}

inline json hot_r_block(const HotRResult& r) {
  json block = hot_block(r.base);
  std::size_t converged = 0, monotone = 0, rank_deficient = 0, steps = 0;
  for (const auto& t : r.traces) {
    converged += t.converged;
    monotone += t.monotone;
    rank_deficient += t.rank_deficient;
    steps += t.alternations;
  }
  block["pairs"] = r.traces.size();
  block["pairs_converged"] = converged;
  block["pairs_monotone"] = monotone;
  block["pairs_rank_deficient"] = rank_deficient;
  block["alternations"] = steps;
  return block;
}

inline json baseline_block(const BaselineResult& b) {
  return {{"assignment", b.assignment},
          {"per_layer", to_json(b.per_layer_scores)},
          {"mean_score", b.mean_score},
          {"excluded_neurons", b.excluded_neurons}};
}

inline json perm_p_block(const PermPSummary& s, std::uint64_t base_seed) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"seeds", s.scores.size()}, {"base_seed", base_seed},
          {"scores", s.scores}};
}

inline json truth_to_json(const GroundTruth& truth, SynthKind kind) {
  json out;
  out["kind"] = std::string(to_string(kind));
  out["layer_map"] = to_json(truth.layer_map);
  out["neuron_maps"] = truth.neuron_maps;
  json rot = json::array();
  for (const auto& r : truth.rotations) rot.push_back(to_json(r));
  out["rotations"] = std::move(rot);
  return out;
}

inline GroundTruth truth_from_json(const json& j) {
  if (!j.is_object() || !j.contains("layer_map")) fail_input("truth: missing \"layer_map\"");
  GroundTruth truth;
  truth.layer_map = matrix_from_json(j["layer_map"], "truth layer_map");
  if (j.contains("neuron_maps")) truth.neuron_maps = j["neuron_maps"].get<std::vector<std::vector<Index>>>();
  if (j.contains("rotations")) {
    for (const auto& r : j["rotations"]) truth.rotations.push_back(matrix_from_json(r, "truth rotation"));
  }
  return truth;
}

/// Truth for the reverse comparison: the support transposed, rows rescaled to 1/M.
inline GroundTruth transposed_truth(const GroundTruth& truth) {
  GroundTruth out;
  out.layer_map = truth.layer_map.transpose();
  for (Index r = 0; r < out.layer_map.rows(); ++r) {
    const double s = out.layer_map.row(r).sum();
    if (s > 0.0) out.layer_map.row(r) *= 1.0 / (s * static_cast<double>(out.layer_map.rows()));
  }
  return out;
}

/// Shannon entropy (nats) of each row renormalized to a distribution.
inline Eigen::VectorXd row_entropy(const Eigen::MatrixXd& plan) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(plan.rows());
  for (Index r = 0; r < plan.rows(); ++r) {
    const double s = plan.row(r).sum();
    if (s <= 0.0) continue;
    for (Index c = 0; c < plan.cols(); ++c) {
      const double p = plan(r, c) / s;
      if (p > 0.0) h(r) -= p * std::log(p);
    }
  }
  return h;
}

namespace detail {

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace detail

/// Outer plan as an SVG heatmap: source layers on rows, target layers on
/// columns, white-to-blue linear scale from 0 to the largest entry. Cell masses
/// are printed when both depths are at most 40.
inline std::string heatmap_svg(const Eigen::MatrixXd& plan, const std::string& title,
                               const std::vector<std::string>& row_labels = {},
                               const std::vector<std::string>& col_labels = {}) {
  const Index L = plan.rows();
  const Index M = plan.cols();
  const bool labels = L <= 40 && M <= 40;
  const int cell = labels ? 44 : 12;
  const int left = 90, top = 60, bottom = 50, right = 20;
  const int width = left + static_cast<int>(M) * cell + right;
  const int height = top + static_cast<int>(L) * cell + bottom;
  const double vmax = plan.size() ? std::max(plan.maxCoeff(), 1e-300) : 1.0;

  auto label = [](const std::vector<std::string>& names, Index i) {
    return static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)] : std::to_string(i);
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(left) + "\" y=\"24\" font-size=\"16\">" + detail::xml_escape(title) +
       "</text>\n";
  for (Index r = 0; r < L; ++r) {
    for (Index c = 0; c < M; ++c) {
      const double t = std::clamp(plan(r, c) / vmax, 0.0, 1.0);
      const int red = static_cast<int>(std::lround(255.0 - t * (255.0 - 8.0)));
      const int green = static_cast<int>(std::lround(255.0 - t * (255.0 - 48.0)));
      const int blue = static_cast<int>(std::lround(255.0 - t * (255.0 - 107.0)));
      const int x = left + static_cast<int>(c) * cell;
      const int y = top + static_cast<int>(r) * cell;
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" +
           std::to_string(red) + "," + std::to_string(green) + "," + std::to_string(blue) +
           ")\" stroke=\"#cccccc\"/>\n";
      if (labels) {
        s += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
             "\" font-size=\"10\" text-anchor=\"middle\" fill=\"" + (t > 0.5 ? "white" : "black") + "\">" +
             detail::fmt("%.3f", plan(r, c)) + "</text>\n";
      }
    }
  }
  const int font = labels ? 11 : 8;
  for (Index r = 0; r < L; ++r) {
    s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" +
         std::to_string(top + static_cast<int>(r) * cell + cell / 2 + 4) + "\" font-size=\"" +
         std::to_string(font) + "\" text-anchor=\"end\">" + detail::xml_escape(label(row_labels, r)) +
         "</text>\n";
  }
  for (Index c = 0; c < M; ++c) {
    s += "<text x=\"" + std::to_string(left + static_cast<int>(c) * cell + cell / 2) + "\" y=\"" +
         std::to_string(top - 6) + "\" font-size=\"" + std::to_string(font) +
         "\" text-anchor=\"middle\">" + detail::xml_escape(label(col_labels, c)) + "</text>\n";
  }
  s += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(height - 18) +
       "\" font-size=\"12\">rows: source layers, columns: target layers, max mass " +
       detail::fmt("%.4g", vmax) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace hot
