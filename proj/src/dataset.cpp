#include "xmodal/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace xmodal {

using nlohmann::json;

static double round6(double v) {
  return std::round(v * 1e6) / 1e6 + 0.0;  // + 0.0 normalizes -0
}

static json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["q"] = s.q;
  j["y"] = s.y;
  j["split"] = s.split;
  if (s.yhat) j["yhat"] = *s.yhat;
  if (s.frames) {
    const Tensor& f = *s.frames;
    json rows = json::array();
    for (int r = 0; r < f.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < f.cols(); ++c) row.push_back(round6(f.at(r, c)));
      rows.push_back(std::move(row));
    }
    j["frames"] = std::move(rows);
  }
  return j;
}

static Sample sample_from_json(const json& j, const std::string& where) {
  Sample s;
  try {
    s.id = j.at("id").get<int64_t>();
    s.q = j.at("q").get<std::vector<int>>();
    s.y = j.at("y").get<std::vector<int>>();
    s.split = j.at("split").get<std::string>();
    if (j.contains("yhat")) s.yhat = j.at("yhat").get<std::vector<int>>();
    if (j.contains("frames")) {
      const json& rows = j.at("frames");
      if (!rows.is_array() || rows.empty()) throw std::runtime_error("frames must be a non-empty array");
      const int n = static_cast<int>(rows.size());
      const int w = static_cast<int>(rows.at(0).size());
      Tensor f({n, w});
      for (int r = 0; r < n; ++r) {
        const json& row = rows.at(static_cast<size_t>(r));
        if (static_cast<int>(row.size()) != w) throw std::runtime_error("ragged frames array");
        for (int c = 0; c < w; ++c) f.at(r, c) = row.at(static_cast<size_t>(c)).get<double>();
      }
      if (!f.all_finite()) throw std::runtime_error("non-finite frame values");
      s.frames = std::move(f);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(where + ": bad sample record: " + e.what());
  }
  if (s.q.empty()) throw std::runtime_error(where + ": sample " + std::to_string(s.id) + " has an empty question");
  if (s.y.empty() || s.y.back() != Vocab::kEos) {
    throw std::runtime_error(where + ": sample " + std::to_string(s.id) + " answer must end with EOS");
  }
  return s;
}

std::vector<Sample> load_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "'");
  std::vector<Sample> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": invalid JSON: " + e.what());
    }
    samples.push_back(sample_from_json(j, where));
  }
  return samples;
}

void save_jsonl(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  for (const Sample& s : samples) f << sample_to_json(s).dump() << '\n';
  if (!f) throw std::runtime_error("dataset: write failed for '" + path + "'");
}

void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("vocab: cannot open '" + path + "' for writing");
  json j;
  j["tokens"] = vocab.tokens;
  f << j.dump(2) << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("vocab: cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("vocab: '" + path + "' is not valid JSON: " + e.what());
  }
  Vocab v;
  try {
    v.tokens = j.at("tokens").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("vocab: '" + path + "' missing tokens array: " + e.what());
  }
  v.validate();
  return v;
}

}  // namespace xmodal
