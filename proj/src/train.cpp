#include "drmn/train.hpp"

#include <cmath>
#include <numeric>

#include "drmn/errors.hpp"
#include "drmn/format.hpp"

namespace drmn {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  loss.validate();
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const std::vector<double> g = p.grad();
    std::vector<double> x = p.to_vector();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      x[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
    p.assign(x);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

SampleLoss sample_loss(Tape& tape, const Model& model, const Sample& sample, const LossConfig& cfg,
                       RngState& rng, bool training) {
  SampleLoss out;
  out.forward = forward(tape, model, sample.pyramid, sample.scene.phrase_embeddings, rng, training);
  out.loss = total_loss(tape, supervised_maps(out.forward.history), sample.scene.masks, cfg);
  return out;
}

std::vector<StepRecord> train(Model& model, std::span<const Sample> data, const TrainConfig& cfg,
                              const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw ContractError("train: empty dataset");
  Adam opt(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  const RngState root(cfg.seed);
  std::vector<StepRecord> trace;
  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngState shuffle = root.fork(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      const RngState step_root = root.fork((std::uint64_t{1} << 32) + step);
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      opt.zero_grad();
      try {
        for (std::size_t b = begin; b < end; ++b) {
          Tape tape;
          RngState rng = step_root.fork(b - begin);
          SampleLoss sl = sample_loss(tape, model, data[order[b]], cfg.loss, rng, true);
          const double value = sl.loss.total.item();
          if (!std::isfinite(value)) {
            throw DivergenceError(step, "non-finite loss at step " + std::to_string(step) + " (epoch " +
                                            std::to_string(epoch) + ", scene " + std::to_string(order[b]) + ")");
          }
          tape.backward(scale(tape, sl.loss.total, inv_b));
          rec.total += value * inv_b;
          rec.bce += sl.loss.bce * inv_b;
          rec.dice += sl.loss.dice * inv_b;
          if (rec.per_map.empty()) {
            rec.per_map.assign(sl.loss.per_map.size(), 0.0);
            rec.first_round = sl.forward.history.size() > 1 ? 1 : 0;
          }
          for (std::size_t r = 0; r < sl.loss.per_map.size(); ++r) rec.per_map[r] += sl.loss.per_map[r] * inv_b;
        }
        opt.step();
      } catch (const DivergenceError&) {
        throw;
      } catch (const NumericError& e) {
        throw DivergenceError(step, "step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                                        "): " + e.what());
      }
      if (on_step) on_step(rec);
      trace.push_back(std::move(rec));
      ++step;
    }
  }
  opt.zero_grad();
  return trace;
}

std::vector<std::vector<EvalRecord>> evaluate(const Model& model, std::span<const Sample> data,
                                              double threshold) {
  std::vector<std::vector<EvalRecord>> rounds(model.config.rounds + 1);
  for (std::size_t si = 0; si < data.size(); ++si) {
    const Sample& s = data[si];
    Tape tape = Tape::inference();
    RngState rng(0);
    ForwardResult fr = forward(tape, model, s.pyramid, s.scene.phrase_embeddings, rng, false);
    const std::size_t hw = s.scene.height * s.scene.width;
    for (std::size_t j = 0; j < s.scene.phrases.size(); ++j) {
      const Phrase& ph = s.scene.phrases[j];
      std::vector<std::vector<double>> parts;
      for (std::size_t o : ph.objects) {
        auto row = s.scene.object_masks.data().subspan(o * hw, hw);
        parts.emplace_back(row.begin(), row.end());
      }
      const std::vector<double> gt = merge_plural(parts);
      for (std::size_t r = 0; r < fr.history.size(); ++r) {
        auto h = fr.history[r].data().subspan(j * hw, hw);
        std::vector<double> pred(hw);
        for (std::size_t i = 0; i < hw; ++i) pred[i] = h[i] >= threshold ? 1.0 : 0.0;
        rounds[r].push_back({iou(pred, gt), ph.stuff, ph.plural, si, j});
      }
    }
  }
  return rounds;
}

std::string loss_trace_csv(std::span<const StepRecord> trace) {
  std::size_t maps = 0;
  for (const auto& r : trace) maps = std::max(maps, r.per_map.size());
  std::string out = "step,epoch,total,bce,dice";
  const std::size_t first = trace.empty() ? 0 : trace.front().first_round;
  for (std::size_t r = 0; r < maps; ++r) out += ",round_" + std::to_string(first + r);
  out += "\n";
  for (const auto& rec : trace) {
    out += std::to_string(rec.step) + "," + std::to_string(rec.epoch) + "," + format_double(rec.total) + "," +
           format_double(rec.bce) + "," + format_double(rec.dice);
    for (std::size_t r = 0; r < maps; ++r) {
      out += "," + (r < rec.per_map.size() ? format_double(rec.per_map[r]) : std::string());
    }
    out += "\n";
  }
  return out;
}

}  // namespace drmn
