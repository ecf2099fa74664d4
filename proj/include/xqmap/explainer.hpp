#ifndef XQMAP_EXPLAINER_HPP_
#define XQMAP_EXPLAINER_HPP_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/qmap.hpp"
#include "xqmap/scene.hpp"

namespace xqmap {

inline constexpr const char* kSelectedLabel = "Selected";

// An action of interest with its weighted component values.
struct Candidate {
  std::string label;
  Action action;
  std::vector<double> values;
  double overall = 0.0;
  std::string object;
  // Component whose map this candidate maximises; -1 for Selected and user-picked pixels.
  int component = -1;
};

// Selected (composite argmax) plus one argmax per component map: K + 1 candidates,
// followed by any user-picked pixels.
struct CandidateSet {
  std::vector<std::string> component_names;
  std::vector<double> weights;
  Candidate selected;
  std::vector<Candidate> per_component;
  std::vector<Candidate> extra;

  const Candidate* find(const std::string& label) const;
  // Chart order: per-component candidates, extras, then Selected.
  std::vector<const Candidate*> ordered() const;
};

struct ShallowExplanation {
  Action action;
  std::vector<double> component_values;
  std::size_t dominant = 0;
  std::string dominant_name;
};

// Delta_k = w_k Q_k(a_i) - w_k Q_k(a_j).
struct Rdx {
  std::string first;
  std::string second;
  Action a_i;
  Action a_j;
  std::vector<double> deltas;
};

struct ChartBar {
  std::string name;
  double value = 0.0;
};

struct ChartGroup {
  std::string label;
  std::string caption;
  std::vector<ChartBar> bars;
};

struct ChartData {
  std::vector<std::string> component_names;
  std::vector<ChartGroup> candidates;  // component bars followed by an "overall" bar
  std::vector<ChartGroup> rdx;         // one signed bar per component
};

struct ChartRender {
  ChartData data;
  std::string values_svg;
  std::string rdx_svg;
};

struct ContrastiveText {
  std::string first;
  std::string second;
  std::string text;
};

struct ExplanationBundle {
  std::string scene_id;
  Scenario scenario = Scenario::Grasp;
  CandidateSet candidates;
  ShallowExplanation shallow;
  std::vector<Rdx> rdx;
  ChartData chart;
  std::string shallow_text;
  std::vector<ContrastiveText> contrastive_texts;

  const Rdx* find_pair(const std::string& first, const std::string& second) const;
};

struct ExplainOptions {
  // Additional pixels to explain, labelled P1, P2, ...
  std::vector<Pixel> extra_pixels;
  // Additional label pairs to contrast beyond the default set.
  std::vector<std::pair<std::string, std::string>> extra_pairs;
};

CandidateSet candidates(const QMapSet& q, const GridScene& scene, std::span<const Pixel> extra_pixels = {});
ShallowExplanation shallow(const QMapSet& q, const Action& a);
Rdx rdx(const QMapSet& q, const Action& a_i, const Action& a_j);
Rdx rdx(const QMapSet& q, const Candidate& first, const Candidate& second);

ChartData chart_data(const CandidateSet& cands, std::span<const Rdx> pairs);
ChartRender render_chart(const CandidateSet& cands, std::span<const Rdx> pairs);

std::string template_shallow(const ExplanationBundle& bundle);
// Throws MissingPairError when (first, second) is not one of the bundle's RDX pairs.
std::string template_contrastive(const ExplanationBundle& bundle, const std::string& first, const std::string& second);

// Candidates, shallow answer, RDX over Selected-vs-each and all sub-optimal cross pairs, chart and texts,
// all drawn from the one QMapSet snapshot.
ExplanationBundle explain(const QMapSet& q, const GridScene& scene, const ExplainOptions& options = {});

nlohmann::json bundle_to_json(const ExplanationBundle& bundle);
ExplanationBundle bundle_from_json(const nlohmann::json& j);
nlohmann::json chart_to_json(const ChartData& chart);

}  // namespace xqmap

#endif  // XQMAP_EXPLAINER_HPP_
