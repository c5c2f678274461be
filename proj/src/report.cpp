#include "partgait/evalkit/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "partgait/data/png_io.hpp"
#include "partgait/errors.hpp"

namespace partgait::evalkit {
namespace {

using nlohmann::json;

std::string percent_string(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return buf;
}

json metric_json(double fraction) {
  return json{{"fraction", fraction}, {"percent", percent_string(fraction)}};
}

json retrieval_json(const retrieval_block& r) {
  json j;
  for (const auto& [k, v] : r.rank_k)
    j["rank_" + std::to_string(k)] = metric_json(v);
  j["mAP"] = metric_json(r.mean_ap);
  j["mINP"] = metric_json(r.mean_inp);
  return j;
}

retrieval_block retrieval_from_json(const json& j) {
  retrieval_block r;
  for (const auto& [key, value] : j.items()) {
    if (key.rfind("rank_", 0) == 0)
      r.rank_k[std::stoi(key.substr(5))] = value.at("fraction").get<double>();
  }
  r.mean_ap = j.at("mAP").at("fraction").get<double>();
  r.mean_inp = j.at("mINP").at("fraction").get<double>();
  return r;
}

std::string heatmap_path(const std::string& report_path) {
  std::filesystem::path p(report_path);
  p.replace_extension();
  return p.string() + "_heatmap.png";
}

void write_heatmap(const tensord& matrix, const std::string& path) {
  const auto p = matrix.dim(0);
  const int scale = 16;
  data::gray_image img;
  img.height = static_cast<int>(p) * scale;
  img.width = static_cast<int>(p) * scale;
  img.pixels.resize(static_cast<std::size_t>(img.height) *
                    static_cast<std::size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = matrix.at(y / scale, x / scale);  // cosine in [-1,1]
      const double u = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
      img.pixels[static_cast<std::size_t>(y) * img.width + x] =
          static_cast<uint8_t>(std::lround(u * 255.0));
    }
  }
  data::write_png_gray(path, img);
}

}  // namespace

void emit_report(const evaluation_report& report, const std::string& path) {
  json j;
  if (report.has_retrieval) {
    j["retrieval"] = retrieval_json(report.retrieval);
    if (!report.per_condition.empty()) {
      json conds;
      for (const auto& [tag, block] : report.per_condition)
        conds[tag] = retrieval_json(block);
      j["retrieval"]["conditions"] = std::move(conds);
    }
  }
  if (report.has_classification) {
    const auto& c = report.classification;
    j["classification"] = {{"accuracy", metric_json(c.accuracy)},
                           {"precision", metric_json(c.precision)},
                           {"recall", metric_json(c.recall)},
                           {"f1", metric_json(c.f1)},
                           {"mA", metric_json(c.mean_attr_accuracy)}};
  }
  if (report.has_diversity) {
    json m = json::array();
    const auto p = report.diversity.matrix.dim(0);
    for (int64_t i = 0; i < p; ++i) {
      json row = json::array();
      for (int64_t k = 0; k < p; ++k) row.push_back(report.diversity.matrix.at(i, k));
      m.push_back(std::move(row));
    }
    j["diversity"] = {{"scalar", report.diversity.diversity},
                      {"matrix", std::move(m)}};
  }
  std::ofstream out(path);
  if (!out) throw io_error("cannot write report " + path);
  out << j.dump(2) << '\n';
  if (!out) throw io_error("failed writing report " + path);
  if (report.has_diversity)
    write_heatmap(report.diversity.matrix, heatmap_path(path));
}

evaluation_report parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read report " + path);
  json j;
  in >> j;
  evaluation_report rep;
  if (j.contains("retrieval")) {
    rep.has_retrieval = true;
    rep.retrieval = retrieval_from_json(j["retrieval"]);
    if (j["retrieval"].contains("conditions"))
      for (const auto& [tag, block] : j["retrieval"]["conditions"].items())
        rep.per_condition[tag] = retrieval_from_json(block);
  }
  if (j.contains("classification")) {
    rep.has_classification = true;
    const auto& c = j["classification"];
    rep.classification.accuracy = c.at("accuracy").at("fraction").get<double>();
    rep.classification.precision = c.at("precision").at("fraction").get<double>();
    rep.classification.recall = c.at("recall").at("fraction").get<double>();
    rep.classification.f1 = c.at("f1").at("fraction").get<double>();
    rep.classification.mean_attr_accuracy = c.at("mA").at("fraction").get<double>();
  }
  if (j.contains("diversity")) {
    rep.has_diversity = true;
    rep.diversity.diversity = j["diversity"].at("scalar").get<double>();
    const auto& m = j["diversity"].at("matrix");
    const auto p = static_cast<int64_t>(m.size());
    rep.diversity.matrix = tensord({p, p});
    for (int64_t i = 0; i < p; ++i)
      for (int64_t k = 0; k < p; ++k)
        rep.diversity.matrix.at(i, k) =
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]
                .get<double>();
  }
  return rep;
}

}  // namespace partgait::evalkit
