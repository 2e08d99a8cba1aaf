#include "xmodal/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

using nlohmann::json;

TrainConfig preset_config(const std::string& name) {
  TrainConfig cfg;
  if (name == "paper-default") {
    cfg.lr = 5e-6;
    cfg.epochs = 2;
  } else if (name == "desk-scale") {
    cfg.lr = 3e-4;
    cfg.epochs = 5;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (expected paper-default|desk-scale)");
  }
  return cfg;
}

TrainConfig pretrain_preset_config(const std::string& name) {
  TrainConfig cfg = preset_config(name);
  if (name == "desk-scale") {
    // The teacher has to memorize the whole fact table before anything else
    // makes sense; give it a longer, hotter run.
    cfg.lr = 1e-3;
    cfg.epochs = 80;
  }
  if (const char* e = std::getenv("XMODAL_PRETRAIN_EPOCHS")) cfg.epochs = std::atoi(e);   // TODO calibration only
  if (const char* e = std::getenv("XMODAL_PRETRAIN_LR")) cfg.lr = std::atof(e);           // TODO calibration only
  return cfg;
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("trainer: cannot open '" + path + "' for writing");
  for (const StepRecord& r : log.steps) {
    json j;
    j["step"] = r.step;
    j["channel"] = channel_name(r.channel);
    j["ce"] = r.ce;
    j["kl"] = r.kl;
    j["total"] = r.total;
    f << j.dump() << '\n';
  }
  for (const auto& [epoch, report] : log.snapshots) {
    json j;
    j["epoch"] = epoch;
    j["report"] = report_json(report);
    f << j.dump() << '\n';
  }
  if (!f) throw std::runtime_error("trainer: write failed for '" + path + "'");
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.push_back(Tensor(p.shape));
      state.v.push_back(Tensor(p.shape));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam: state does not match params");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i])) {
      throw std::invalid_argument("adam: shape mismatch at tensor " + std::to_string(i) + ": " +
                                  shape_str(params[i].shape) + " vs " + shape_str(grads[i].shape));
    }
    for (size_t j = 0; j < params[i].data.size(); ++j) {
      const double g = grads[i].data[j];
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in tensor " + std::to_string(i));
      }
      double& m = state.m[i].data[j];
      double& v = state.v[i].data[j];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      params[i].data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double clip_grad_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.data) v *= s;
    }
  }
  return norm;
}

static void validate_mix(const ModelParams& model, const ModelParams* teacher, const TrainConfig& cfg) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("trainer: learning rate must be > 0");
  if (cfg.epochs < 0) throw std::invalid_argument("trainer: epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("trainer: batch size must be >= 1");
  if (cfg.mix.empty()) throw std::invalid_argument("trainer: empty channel mix");

  for (size_t k = 0; k < cfg.mix.size(); ++k) {
    const MixEntry& e = cfg.mix[k];
    const std::string where = "trainer: mix entry " + std::to_string(k);
    e.cfg.validate();
    if (e.weight <= 0.0) throw std::invalid_argument(where + ": weight must be > 0");
    if (e.data == nullptr || e.data->empty()) throw std::invalid_argument(where + ": no samples");
    if (e.cfg.use_kl && teacher == nullptr) throw std::invalid_argument(where + ": KL term needs a teacher model");
    if (e.cfg.channel == Channel::s2t && model.role != Role::student) {
      throw std::invalid_argument(where + ": speech channel needs a student model");
    }
    for (const Sample& s : *e.data) {
      if (e.cfg.target_source == TargetSource::teacher && !s.yhat) {
        throw std::invalid_argument(where + ": sample " + std::to_string(s.id) +
                                    " lacks cached teacher labels (yhat) required by this variant");
      }
      if (e.cfg.channel == Channel::s2t && !s.frames) {
        throw std::invalid_argument(where + ": sample " + std::to_string(s.id) +
                                    " lacks synthesized frames required by the speech channel");
      }
    }
  }
}

TrainLog train(ModelParams& model, const ModelParams* teacher, const TrainConfig& cfg, const EvalHook* eval_hook) {
  validate_mix(model, teacher, cfg);
  if (teacher != nullptr && teacher->role != Role::teacher) {
    throw std::invalid_argument("trainer: supervision model must have the teacher role");
  }

  TrainLog log;
  AdamState adam;
  int64_t step = 0;
  const size_t n_entries = cfg.mix.size();
  double weight_sum = 0.0;
  for (const MixEntry& e : cfg.mix) weight_sum += e.weight;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Per-entry sample order for this epoch.
    std::vector<std::vector<size_t>> order(n_entries);
    std::vector<size_t> cursor(n_entries, 0);
    for (size_t k = 0; k < n_entries; ++k) {
      order[k].resize(cfg.mix[k].data->size());
      for (size_t i = 0; i < order[k].size(); ++i) order[k][i] = i;
      Rng rng(derive_seed(derive_seed(cfg.seed, static_cast<uint64_t>(epoch)), k));
      rng.shuffle(order[k]);
    }

    // Deterministic weighted round-robin over remaining batches: at each slot
    // pick the entry with the largest scheduling deficit (ties to the lowest
    // index).
    std::vector<int64_t> issued(n_entries, 0);
    int64_t scheduled = 0;
    auto pick_entry = [&]() -> int {
      int best = -1;
      double best_deficit = 0.0;
      for (size_t k = 0; k < n_entries; ++k) {
        if (cursor[k] >= order[k].size()) continue;
        const double deficit =
            cfg.mix[k].weight / weight_sum * static_cast<double>(scheduled + 1) - static_cast<double>(issued[k]);
        if (best < 0 || deficit > best_deficit) {
          best = static_cast<int>(k);
          best_deficit = deficit;
        }
      }
      return best;
    };

    for (int k = pick_entry(); k >= 0; k = pick_entry()) {
      const MixEntry& entry = cfg.mix[static_cast<size_t>(k)];
      const size_t batch_begin = cursor[static_cast<size_t>(k)];
      const size_t batch_end = std::min(batch_begin + static_cast<size_t>(cfg.batch_size),
                                        order[static_cast<size_t>(k)].size());
      cursor[static_cast<size_t>(k)] = batch_end;
      issued[static_cast<size_t>(k)] += 1;
      scheduled += 1;

      const BoundModel bound = bind(model);
      BoundModel teacher_bound;
      if (entry.cfg.use_kl) teacher_bound = bind(*teacher);
      const BoundModel* tb = entry.cfg.use_kl ? &teacher_bound : nullptr;

      Var batch_total;
      StepRecord rec;
      rec.step = step;
      rec.channel = entry.cfg.channel;
      const int batch_n = static_cast<int>(batch_end - batch_begin);
      for (size_t i = batch_begin; i < batch_end; ++i) {
        const Sample& sample = (*entry.data)[order[static_cast<size_t>(k)][i]];
        const LossGraph g = entry.cfg.channel == Channel::t2t ? t2t_loss(tb, bound, sample, entry.cfg)
                                                              : s2t_loss(tb, bound, sample, entry.cfg);
        batch_total = batch_total.defined() ? add(batch_total, g.total) : g.total;
        rec.ce += g.breakdown.ce / batch_n;
        rec.kl += g.breakdown.kl / batch_n;
        rec.total += g.breakdown.total / batch_n;
      }

      backward(scale(batch_total, 1.0 / batch_n));
      std::vector<Tensor> grads = collect_grads(bound);
      for (size_t gi = 0; gi < grads.size(); ++gi) {
        if (!grads[gi].all_finite()) {
          throw NumericError("trainer: non-finite gradient at step " + std::to_string(step));
        }
      }
      clip_grad_norm(grads, cfg.max_grad_norm);
      adam_step(model.tensors, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

      log.steps.push_back(rec);
      ++step;
    }

    if (eval_hook != nullptr && *eval_hook) {
      log.snapshots.emplace_back(epoch, (*eval_hook)(model));
    }
  }
  return log;
}

}  // namespace xmodal
