#include "xqmap/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace xqmap {

namespace {

using json = nlohmann::json;

std::string component_label(std::size_t k) {
  if (k < 26) return std::string(1, static_cast<char>('A' + k));
  return "C" + std::to_string(k + 1);
}

std::vector<double> weighted_values(const QMapSet& q, Pixel p) {
  std::vector<double> out;
  out.reserve(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) out.push_back(q.weights[k] * q.maps[k].at(p));
  return out;
}

double sum_of(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

Candidate make_candidate(const QMapSet& q, const GridScene& scene, std::string label, Action action, int component) {
  Candidate c;
  c.label = std::move(label);
  c.action = action;
  c.values = weighted_values(q, action.pixel);
  c.overall = sum_of(c.values);
  c.object = describe_pixel(scene, action.pixel);
  c.component = component;
  return c;
}

std::string join_names(const std::vector<std::string>& names, const char* last_sep) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += (i + 1 == names.size()) ? std::string(" ") + last_sep + " " : ", ";
    out += names[i];
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* bar_color(std::size_t k, bool overall) {
  static const char* kColors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1"};
  if (overall) return "#555555";
  return kColors[k % (sizeof(kColors) / sizeof(kColors[0]))];
}

// Grouped bar chart with a zero axis; negative values hang below it.
std::string grouped_bars_svg(const std::string& id, const std::string& title, const std::vector<ChartGroup>& groups,
                             std::size_t series) {
  constexpr double kBar = 22.0, kGap = 26.0, kLeft = 60.0, kTop = 50.0, kPlot = 220.0, kBottom = 70.0;
  double pos = 0.0, neg = 0.0;
  for (const auto& g : groups)
    for (const auto& b : g.bars) {
      pos = std::max(pos, b.value);
      neg = std::max(neg, -b.value);
    }
  if (pos + neg == 0.0) pos = 1.0;
  const double scale = kPlot / (pos + neg);
  const double zero_y = kTop + pos * scale;
  const double group_w = static_cast<double>(series) * kBar + kGap;
  const double width = kLeft + static_cast<double>(groups.size()) * group_w + 20.0;
  const double height = kTop + kPlot + kBottom;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" id=\"" << id << "\" width=\"" << fmt("%.0f", width)
      << "\" height=\"" << fmt("%.0f", height) << "\" viewBox=\"0 0 " << fmt("%.0f", width) << " "
      << fmt("%.0f", height) << "\">\n";
  svg << "  <title>" << xml_escape(title) << "</title>\n";
  svg << "  <text id=\"" << id << "-title\" x=\"" << fmt("%.3f", width / 2) << "\" y=\"24\" text-anchor=\"middle\""
      << " font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  svg << "  <line id=\"" << id << "-axis\" x1=\"" << fmt("%.3f", kLeft - 10) << "\" y1=\"" << fmt("%.3f", zero_y)
      << "\" x2=\"" << fmt("%.3f", width - 10) << "\" y2=\"" << fmt("%.3f", zero_y)
      << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    const double x0 = kLeft + static_cast<double>(g) * group_w;
    svg << "  <g id=\"" << id << "-group-" << g << "\" data-label=\"" << xml_escape(group.label) << "\">\n";
    for (std::size_t b = 0; b < group.bars.size(); ++b) {
      const auto& bar = group.bars[b];
      const bool overall = bar.name == "overall";
      const double h = std::abs(bar.value) * scale;
      const double y = bar.value >= 0.0 ? zero_y - h : zero_y;
      const double x = x0 + static_cast<double>(b) * kBar;
      svg << "    <rect id=\"" << id << "-bar-" << g << "-" << b << "\" x=\"" << fmt("%.3f", x) << "\" y=\""
          << fmt("%.3f", y) << "\" width=\"" << fmt("%.3f", kBar - 2) << "\" height=\"" << fmt("%.3f", h)
          << "\" fill=\"" << bar_color(b, overall) << "\" data-name=\"" << xml_escape(bar.name) << "\" data-value=\""
          << fmt("%.17g", bar.value) << "\"/>\n";
      const double ty = bar.value >= 0.0 ? y - 4 : y + h + 12;
      svg << "    <text x=\"" << fmt("%.3f", x + (kBar - 2) / 2) << "\" y=\"" << fmt("%.3f", ty)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" << format3(bar.value)
          << "</text>\n";
    }
    const double label_x = x0 + (static_cast<double>(group.bars.size()) * kBar) / 2;
    svg << "    <text x=\"" << fmt("%.3f", label_x) << "\" y=\"" << fmt("%.3f", kTop + kPlot + 24)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(group.label)
        << "</text>\n";
    if (!group.caption.empty()) {
      svg << "    <text x=\"" << fmt("%.3f", label_x) << "\" y=\"" << fmt("%.3f", kTop + kPlot + 40)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(group.caption)
          << "</text>\n";
    }
    svg << "  </g>\n";
  }
  if (!groups.empty()) {
    svg << "  <g id=\"" << id << "-legend\">\n";
    for (std::size_t b = 0; b < groups.front().bars.size(); ++b) {
      const auto& name = groups.front().bars[b].name;
      const double lx = kLeft + static_cast<double>(b) * 90.0;
      svg << "    <rect x=\"" << fmt("%.3f", lx) << "\" y=\"" << fmt("%.3f", height - 18) << "\" width=\"10\""
          << " height=\"10\" fill=\"" << bar_color(b, name == "overall") << "\"/>\n";
      svg << "    <text x=\"" << fmt("%.3f", lx + 14) << "\" y=\"" << fmt("%.3f", height - 9)
          << "\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(name) << "</text>\n";
    }
    svg << "  </g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

json values_object(const std::vector<std::string>& names, const std::vector<double>& values) {
  json out = json::object();
  for (std::size_t k = 0; k < names.size(); ++k) out[names[k]] = values[k];
  return out;
}

std::vector<double> values_from(const json& obj, const std::vector<std::string>& names) {
  std::vector<double> out;
  for (const auto& n : names) out.push_back(obj.at(n).get<double>());
  return out;
}

json candidate_to_json(const Candidate& c, const std::vector<std::string>& names) {
  return {{"label", c.label},
          {"component", c.component >= 0 ? json(names[static_cast<std::size_t>(c.component)]) : json(nullptr)},
          {"pixel", {c.action.pixel.u, c.action.pixel.v}},
          {"object", c.object},
          {"values", values_object(names, c.values)},
          {"overall", c.overall}};
}

Candidate candidate_from_json(const json& j, const std::vector<std::string>& names, Primitive prim) {
  Candidate c;
  c.label = j.at("label").get<std::string>();
  c.action = {prim, {j.at("pixel").at(0).get<int>(), j.at("pixel").at(1).get<int>()}};
  c.object = j.at("object").get<std::string>();
  c.values = values_from(j.at("values"), names);
  c.overall = j.at("overall").get<double>();
  c.component = -1;
  if (!j.at("component").is_null()) {
    auto it = std::find(names.begin(), names.end(), j.at("component").get<std::string>());
    if (it == names.end()) throw FormatError("candidate names an unknown component");
    c.component = static_cast<int>(it - names.begin());
  }
  return c;
}

json group_to_json(const ChartGroup& g) {
  json bars = json::array();
  for (const auto& b : g.bars) bars.push_back({{"name", b.name}, {"value", b.value}});
  return {{"label", g.label}, {"caption", g.caption}, {"bars", bars}};
}

ChartGroup group_from_json(const json& j) {
  ChartGroup g;
  g.label = j.at("label").get<std::string>();
  g.caption = j.at("caption").get<std::string>();
  for (const auto& b : j.at("bars")) g.bars.push_back({b.at("name").get<std::string>(), b.at("value").get<double>()});
  return g;
}

}  // namespace

const Candidate* CandidateSet::find(const std::string& label) const {
  if (selected.label == label) return &selected;
  for (const auto& c : per_component)
    if (c.label == label) return &c;
  for (const auto& c : extra)
    if (c.label == label) return &c;
  return nullptr;
}

std::vector<const Candidate*> CandidateSet::ordered() const {
  std::vector<const Candidate*> out;
  for (const auto& c : per_component) out.push_back(&c);
  for (const auto& c : extra) out.push_back(&c);
  out.push_back(&selected);
  return out;
}

const Rdx* ExplanationBundle::find_pair(const std::string& first, const std::string& second) const {
  for (const auto& r : rdx)
    if (r.first == first && r.second == second) return &r;
  return nullptr;
}

CandidateSet candidates(const QMapSet& q, const GridScene& scene, std::span<const Pixel> extra_pixels) {
  q.validate();
  if (q.width() != scene.width || q.height() != scene.height) {
    throw DimensionError("Q-Maps are " + std::to_string(q.width()) + "x" + std::to_string(q.height()) +
                         " but the scene is " + std::to_string(scene.width) + "x" + std::to_string(scene.height));
  }
  const Primitive prim = primitive_for(scene.scenario);
  CandidateSet set;
  set.component_names = q.names;
  set.weights = q.weights;
  set.selected = make_candidate(q, scene, kSelectedLabel, select_global(q, prim), -1);
  for (std::size_t k = 0; k < q.size(); ++k) {
    set.per_component.push_back(
        make_candidate(q, scene, component_label(k), select_component(q, k, prim), static_cast<int>(k)));
  }
  for (std::size_t i = 0; i < extra_pixels.size(); ++i) {
    set.extra.push_back(make_candidate(q, scene, "P" + std::to_string(i + 1), {prim, extra_pixels[i]}, -1));
  }
  return set;
}

ShallowExplanation shallow(const QMapSet& q, const Action& a) {
  q.validate();
  ShallowExplanation s;
  s.action = a;
  s.component_values = weighted_values(q, a.pixel);
  for (std::size_t k = 1; k < s.component_values.size(); ++k)
    if (s.component_values[k] > s.component_values[s.dominant]) s.dominant = k;
  s.dominant_name = q.names[s.dominant];
  return s;
}

Rdx rdx(const QMapSet& q, const Action& a_i, const Action& a_j) {
  q.validate();
  Rdx r;
  r.a_i = a_i;
  r.a_j = a_j;
  auto vi = weighted_values(q, a_i.pixel);
  auto vj = weighted_values(q, a_j.pixel);
  for (std::size_t k = 0; k < vi.size(); ++k) r.deltas.push_back(vi[k] - vj[k]);
  return r;
}

Rdx rdx(const QMapSet& q, const Candidate& first, const Candidate& second) {
  Rdx r = rdx(q, first.action, second.action);
  r.first = first.label;
  r.second = second.label;
  return r;
}

ChartData chart_data(const CandidateSet& cands, std::span<const Rdx> pairs) {
  ChartData chart;
  chart.component_names = cands.component_names;
  for (const Candidate* c : cands.ordered()) {
    ChartGroup g{c->label, c->object, {}};
    for (std::size_t k = 0; k < c->values.size(); ++k) g.bars.push_back({cands.component_names[k], c->values[k]});
    g.bars.push_back({"overall", c->overall});
    chart.candidates.push_back(std::move(g));
  }
  for (const auto& r : pairs) {
    ChartGroup g{r.first + " vs. " + r.second, "", {}};
    for (std::size_t k = 0; k < r.deltas.size(); ++k) g.bars.push_back({cands.component_names[k], r.deltas[k]});
    chart.rdx.push_back(std::move(g));
  }
  return chart;
}

ChartRender render_chart(const CandidateSet& cands, std::span<const Rdx> pairs) {
  ChartRender out;
  out.data = chart_data(cands, pairs);
  out.values_svg = grouped_bars_svg("qvalues", "Q-value decomposition", out.data.candidates,
                                    cands.component_names.size() + 1);
  out.rdx_svg = grouped_bars_svg("rdx", "Reward difference (RDX)", out.data.rdx, cands.component_names.size());
  return out;
}

std::string template_shallow(const ExplanationBundle& bundle) {
  return bundle.candidates.selected.object + " owns the highest Q-value in the current scene, with " +
         bundle.shallow.dominant_name + " component contributing most to the selection";
}

std::string template_contrastive(const ExplanationBundle& bundle, const std::string& first, const std::string& second) {
  const Rdx* r = bundle.find_pair(first, second);
  if (r == nullptr) throw MissingPairError("no RDX pair (" + first + ", " + second + ") in this explanation");
  const Candidate* chosen = bundle.candidates.find(first);
  const Candidate* other = bundle.candidates.find(second);
  if (chosen == nullptr || other == nullptr) throw MissingPairError("pair names an unknown candidate");
  std::vector<std::string> due, not_due;
  for (std::size_t k = 0; k < r->deltas.size(); ++k) {
    (r->deltas[k] > 0.0 ? due : not_due).push_back(bundle.candidates.component_names[k]);
  }
  const bool all_zero = std::all_of(r->deltas.begin(), r->deltas.end(), [](double d) { return d == 0.0; });
  if (all_zero) {
    return "No component distinguishes pixel " + first + " (" + chosen->object + ") from pixel " + second + " (" +
           other->object + ")";
  }
  std::string text = "In contrast to pixel " + second + " (" + other->object + "), " + chosen->object + " is chosen";
  if (!due.empty()) text += " due to its " + join_names(due, "and");
  if (!not_due.empty()) text += std::string(due.empty() ? "" : ",") + " not due to its " + join_names(not_due, "or");
  return text;
}

ExplanationBundle explain(const QMapSet& q, const GridScene& scene, const ExplainOptions& options) {
  ExplanationBundle b;
  b.scene_id = to_hex(scene.digest());
  b.scenario = scene.scenario;
  b.candidates = candidates(q, scene, options.extra_pixels);
  b.shallow = shallow(q, b.candidates.selected.action);

  const auto& cs = b.candidates;
  auto add_pair = [&](const Candidate& x, const Candidate& y) {
    if (b.find_pair(x.label, y.label) == nullptr) b.rdx.push_back(rdx(q, x, y));
  };
  for (const auto& c : cs.per_component) add_pair(cs.selected, c);
  for (std::size_t i = 0; i < cs.per_component.size(); ++i)
    for (std::size_t j = i + 1; j < cs.per_component.size(); ++j) add_pair(cs.per_component[i], cs.per_component[j]);
  for (const auto& c : cs.extra) add_pair(cs.selected, c);
  for (std::size_t i = 0; i < cs.extra.size(); ++i)
    for (std::size_t j = i + 1; j < cs.extra.size(); ++j) add_pair(cs.extra[i], cs.extra[j]);
  for (const auto& [first, second] : options.extra_pairs) {
    const Candidate* x = cs.find(first);
    const Candidate* y = cs.find(second);
    if (x == nullptr || y == nullptr) throw MissingPairError("pair (" + first + ", " + second + ") names an absent candidate");
    add_pair(*x, *y);
  }

  b.chart = chart_data(cs, b.rdx);
  b.shallow_text = template_shallow(b);
  for (const auto& r : b.rdx) b.contrastive_texts.push_back({r.first, r.second, template_contrastive(b, r.first, r.second)});
  return b;
}

json chart_to_json(const ChartData& chart) {
  json cands = json::array(), pairs = json::array();
  for (const auto& g : chart.candidates) cands.push_back(group_to_json(g));
  for (const auto& g : chart.rdx) pairs.push_back(group_to_json(g));
  return {{"components", chart.component_names}, {"candidates", cands}, {"rdx", pairs}};
}

json bundle_to_json(const ExplanationBundle& b) {
  const auto& names = b.candidates.component_names;
  json cands = json::array();
  for (const auto& c : b.candidates.per_component) cands.push_back(candidate_to_json(c, names));
  for (const auto& c : b.candidates.extra) cands.push_back(candidate_to_json(c, names));
  json pairs = json::array();
  for (const auto& r : b.rdx) pairs.push_back({{"pair", {r.first, r.second}}, {"deltas", values_object(names, r.deltas)}});
  json contrastive = json::array();
  for (const auto& t : b.contrastive_texts) contrastive.push_back({{"pair", {t.first, t.second}}, {"text", t.text}});
  return {{"format_version", 1},
          {"scene_id", b.scene_id},
          {"scenario", to_string(b.scenario)},
          {"components", names},
          {"weights", b.candidates.weights},
          {"selected", candidate_to_json(b.candidates.selected, names)},
          {"candidates", cands},
          {"shallow",
           {{"label", kSelectedLabel},
            {"pixel", {b.shallow.action.pixel.u, b.shallow.action.pixel.v}},
            {"values", values_object(names, b.shallow.component_values)},
            {"dominant", b.shallow.dominant_name},
            {"dominant_index", b.shallow.dominant}}},
          {"rdx", pairs},
          {"chart", chart_to_json(b.chart)},
          {"texts", {{"shallow", b.shallow_text}, {"contrastive", contrastive}}}};
}

ExplanationBundle bundle_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw FormatError("unsupported bundle format_version");
    ExplanationBundle b;
    b.scene_id = j.at("scene_id").get<std::string>();
    b.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    const Primitive prim = primitive_for(b.scenario);
    auto names = j.at("components").get<std::vector<std::string>>();
    b.candidates.component_names = names;
    b.candidates.weights = j.at("weights").get<std::vector<double>>();
    b.candidates.selected = candidate_from_json(j.at("selected"), names, prim);
    for (const auto& c : j.at("candidates")) {
      Candidate cand = candidate_from_json(c, names, prim);
      (cand.component >= 0 ? b.candidates.per_component : b.candidates.extra).push_back(std::move(cand));
    }
    const auto& sh = j.at("shallow");
    b.shallow.action = {prim, {sh.at("pixel").at(0).get<int>(), sh.at("pixel").at(1).get<int>()}};
    b.shallow.component_values = values_from(sh.at("values"), names);
    b.shallow.dominant = sh.at("dominant_index").get<std::size_t>();
    b.shallow.dominant_name = sh.at("dominant").get<std::string>();
    for (const auto& r : j.at("rdx")) {
      Rdx x;
      x.first = r.at("pair").at(0).get<std::string>();
      x.second = r.at("pair").at(1).get<std::string>();
      const Candidate* a = b.candidates.find(x.first);
      const Candidate* c = b.candidates.find(x.second);
      if (a == nullptr || c == nullptr) throw FormatError("RDX pair names an unknown candidate");
      x.a_i = a->action;
      x.a_j = c->action;
      x.deltas = values_from(r.at("deltas"), names);
      b.rdx.push_back(std::move(x));
    }
    const auto& chart = j.at("chart");
    b.chart.component_names = chart.at("components").get<std::vector<std::string>>();
    for (const auto& g : chart.at("candidates")) b.chart.candidates.push_back(group_from_json(g));
    for (const auto& g : chart.at("rdx")) b.chart.rdx.push_back(group_from_json(g));
    b.shallow_text = j.at("texts").at("shallow").get<std::string>();
    for (const auto& t : j.at("texts").at("contrastive")) {
      b.contrastive_texts.push_back(
          {t.at("pair").at(0).get<std::string>(), t.at("pair").at(1).get<std::string>(), t.at("text").get<std::string>()});
    }
    return b;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed explanation bundle: ") + e.what());
  }
}

}  // namespace xqmap
