#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drmn/dataset.hpp"
#include "drmn/losses.hpp"
#include "drmn/metrics.hpp"
#include "drmn/model.hpp"

namespace drmn {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 20;
  std::size_t batch_size = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

/// Adam over a fixed parameter list; reads and clears their gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps);

  void step();
  void zero_grad();
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double total = 0.0;  // batch means
  double bce = 0.0;
  double dice = 0.0;
  std::vector<double> per_map;  // supervised rounds, starting at first_round
  std::size_t first_round = 0;
};

struct SampleLoss {
  LossBreakdown loss;
  ForwardResult forward;
};

/// Forward plus loss on one scene.
SampleLoss sample_loss(Tape& tape, const Model& model, const Sample& sample, const LossConfig& cfg,
                       RngState& rng, bool training);

using StepCallback = std::function<void(const StepRecord&)>;

/// Mini-batch Adam over shuffled epochs. Deterministic in (model, data,
/// cfg). Throws DivergenceError on a non-finite loss.
std::vector<StepRecord> train(Model& model, std::span<const Sample> data, const TrainConfig& cfg,
                              const StepCallback& on_step = {});

/// Per-phrase IoU records for every map in ℋ (index = round). Predictions
/// are H >= threshold; plural targets are the union of their objects' masks.
std::vector<std::vector<EvalRecord>> evaluate(const Model& model, std::span<const Sample> data,
                                              double threshold = 0.5);

/// step,epoch,total,bce,dice, then one column per supervised round
std::string loss_trace_csv(std::span<const StepRecord> trace);

}  // namespace drmn
