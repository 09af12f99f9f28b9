#pragma once

#include <functional>
#include <random>
#include <vector>

#include "fgd/losses.hpp"
#include "fgd/metrics.hpp"
#include "fgd/network.hpp"
#include "fgd/params.hpp"
#include "fgd/synthdata.hpp"

namespace fgd {

struct TrainConfig {
  int steps = 500;
  int window = 4;
  double lr = 1e-4;
  uint64_t seed = 1;
  Ablation ablation;

  void validate() const {
    if (steps < 1) throw numeric_error("TrainConfig: steps must be >= 1");
    if (window < 1) throw numeric_error("TrainConfig: window must be >= 1");
    if (!(lr >= 0)) throw numeric_error("TrainConfig: lr must be >= 0");
  }
};

template <typename T>
using OptimizerState = std::map<std::string, AdamState<T>>;

template <typename T>
struct TrainResult {
  std::vector<double> loss_trace;                 // total loss per step
  std::vector<std::map<std::string, double>> term_trace;
};

namespace detail {

template <typename T>
OptimizerState<T> make_optimizer(double lr) {
  OptimizerState<T> opt;
  for (const char* g : {"spatial", "temporal", "memory", "decoder", "flow_refine"}) {
    AdamState<T> a;
    a.lr = static_cast<T>(lr);
    opt.emplace(g, std::move(a));
  }
  return opt;
}

}  // namespace detail

/// One optimization step over a single window. Returns the per-term losses.
template <typename T>
std::map<std::string, double> train_step(
    ModelParams<T>& params, OptimizerState<T>& opt,
    const std::vector<Tensor<T>>& frames, const std::vector<Tensor<T>>& flows,
    const std::vector<Tensor<T>>& depths_gt, const ModelConfig& mcfg,
    const LossConfig& lcfg, const Ablation& abl = {}) {
  Tape<T> tape;
  ModelParamRefs<T> refs = load_model(tape, params);
  std::vector<StepOutput<T>> steps =
      forward_sequence(tape, frames, flows, refs, mcfg, abl);
  WindowLoss<T> loss = total_loss(tape, steps, frames, depths_gt, lcfg);
  tape.backward(loss.total);
  adam_step(params.spatial, collect_grads(tape, refs.spatial), opt.at("spatial"));
  adam_step(params.temporal, collect_grads(tape, refs.temporal), opt.at("temporal"));
  adam_step(params.memory, collect_grads(tape, refs.memory), opt.at("memory"));
  adam_step(params.decoder, collect_grads(tape, refs.decoder), opt.at("decoder"));
  adam_step(params.flow_refine, collect_grads(tape, refs.flow_refine),
            opt.at("flow_refine"));
  return loss.terms;
}

/// Windowed training over a pool of sequences: each step draws a sequence and
/// a window start uniformly at random, forwards the window, and applies one
/// Adam update per parameter group.
template <typename T>
TrainResult<T> train(ModelParams<T>& params, OptimizerState<T>& opt,
                     const std::vector<SequenceSample<T>>& sequences,
                     const ModelConfig& mcfg, const LossConfig& lcfg,
                     const TrainConfig& tcfg,
                     const std::function<void(int, double)>& progress = {}) {
  tcfg.validate();
  if (sequences.empty()) throw shape_error("train: no sequences");
  for (const auto& s : sequences)
    if (static_cast<int>(s.frames.size()) < tcfg.window)
      throw shape_error("train: sequence shorter than the window");
  std::mt19937_64 rng(tcfg.seed);
  TrainResult<T> result;
  for (int step = 0; step < tcfg.steps; ++step) {
    const SequenceSample<T>& seq =
        sequences[std::uniform_int_distribution<size_t>(0, sequences.size() - 1)(rng)];
    const int max_start = static_cast<int>(seq.frames.size()) - tcfg.window;
    const int start =
        max_start > 0 ? std::uniform_int_distribution<int>(0, max_start)(rng) : 0;
    std::vector<Tensor<T>> frames(seq.frames.begin() + start,
                                  seq.frames.begin() + start + tcfg.window);
    std::vector<Tensor<T>> depths(seq.depths.begin() + start,
                                  seq.depths.begin() + start + tcfg.window);
    // input flow t pairs frames t-1 and t; for window frame k that is
    // sequence index start + k - 1
    std::vector<Tensor<T>> flows(seq.flows_input.begin() + start,
                                 seq.flows_input.begin() + start + tcfg.window - 1);
    std::map<std::string, double> terms = train_step(
        params, opt, frames, flows, depths, mcfg, lcfg, tcfg.ablation);
    result.loss_trace.push_back(terms.at("total"));
    result.term_trace.push_back(std::move(terms));
    if (progress) progress(step, result.loss_trace.back());
  }
  return result;
}

/// Inference over a full sequence; returns one depth map per frame.
template <typename T>
std::vector<Tensor<T>> predict_sequence(const ModelParams<T>& params,
                                        const std::vector<Tensor<T>>& frames,
                                        const std::vector<Tensor<T>>& flows,
                                        const ModelConfig& mcfg,
                                        const Ablation& abl = {}) {
  Tape<T> tape;
  ModelParamRefs<T> refs = load_model(tape, params);
  std::vector<StepOutput<T>> steps =
      forward_sequence(tape, frames, flows, refs, mcfg, abl);
  std::vector<Tensor<T>> depths;
  for (const auto& s : steps) depths.push_back(s.depth.val());
  return depths;
}

struct SequenceEval {
  MetricReport depth;   // averaged per-frame depth metrics
  double tdt = std::numeric_limits<double>::quiet_NaN();
  double tdt_lt1 = 0, tdt_lt2 = 0, tdt_lt3 = 0;
  long frames_evaluated = 0;
  long tdt_pairs = 0;
};

/// Depth metrics for every frame plus TDT for every consecutive pair, both
/// averaged. TDT uses the ground-truth flow of the sample.
template <typename T>
SequenceEval evaluate_sequence(const std::vector<Tensor<T>>& predicted,
                               const SequenceSample<T>& seq,
                               const MetricConfig& cfg,
                               bool median_align = true) {
  if (predicted.size() != seq.frames.size())
    throw shape_error("evaluate_sequence: prediction count mismatch");
  SequenceEval ev;
  for (size_t t = 0; t < predicted.size(); ++t) {
    Tensor<T> d = predicted[t];
    if (median_align) d = median_scale(d, seq.depths[t]);
    const MetricReport r = depth_metrics(d, seq.depths[t], cfg);
    ev.depth.abs_rel += r.abs_rel;
    ev.depth.sq_rel += r.sq_rel;
    ev.depth.rmse += r.rmse;
    ev.depth.rmse_log += r.rmse_log;
    ev.depth.delta1 += r.delta1;
    ev.depth.delta2 += r.delta2;
    ev.depth.delta3 += r.delta3;
    ++ev.frames_evaluated;
    if (t == 0) continue;
    Tensor<T> dt = predicted[t], dp = predicted[t - 1];
    if (median_align) {
      dt = median_scale(dt, seq.depths[t]);
      dp = median_scale(dp, seq.depths[t - 1]);
    }
    const TdtResult tr = tdt(dt, dp, seq.flows_gt[t - 1], seq.frames[t],
                             seq.frames[t - 1], cfg);
    if (!tr.valid()) continue;
    ev.tdt = (std::isnan(ev.tdt) ? 0.0 : ev.tdt) + tr.tdt;
    ev.tdt_lt1 += tr.lt1;
    ev.tdt_lt2 += tr.lt2;
    ev.tdt_lt3 += tr.lt3;
    ++ev.tdt_pairs;
  }
  const double nf = static_cast<double>(ev.frames_evaluated);
  ev.depth.abs_rel /= nf;
  ev.depth.sq_rel /= nf;
  ev.depth.rmse /= nf;
  ev.depth.rmse_log /= nf;
  ev.depth.delta1 /= nf;
  ev.depth.delta2 /= nf;
  ev.depth.delta3 /= nf;
  if (ev.tdt_pairs > 0) {
    ev.tdt /= static_cast<double>(ev.tdt_pairs);
    ev.tdt_lt1 /= static_cast<double>(ev.tdt_pairs);
    ev.tdt_lt2 /= static_cast<double>(ev.tdt_pairs);
    ev.tdt_lt3 /= static_cast<double>(ev.tdt_pairs);
  }
  return ev;
}

template <typename T>
SequenceEval evaluate_model(const ModelParams<T>& params,
                            const std::vector<SequenceSample<T>>& sequences,
                            const ModelConfig& mcfg, const MetricConfig& cfg,
                            const Ablation& abl = {}) {
  if (sequences.empty()) throw shape_error("evaluate_model: no sequences");
  SequenceEval mean;
  long tdt_seqs = 0;
  for (const auto& seq : sequences) {
    const std::vector<Tensor<T>> pred =
        predict_sequence(params, seq.frames, seq.flows_input, mcfg, abl);
    const SequenceEval ev = evaluate_sequence(pred, seq, cfg);
    mean.depth.abs_rel += ev.depth.abs_rel;
    mean.depth.sq_rel += ev.depth.sq_rel;
    mean.depth.rmse += ev.depth.rmse;
    mean.depth.rmse_log += ev.depth.rmse_log;
    mean.depth.delta1 += ev.depth.delta1;
    mean.depth.delta2 += ev.depth.delta2;
    mean.depth.delta3 += ev.depth.delta3;
    mean.frames_evaluated += ev.frames_evaluated;
    if (ev.tdt_pairs > 0) {
      mean.tdt = (std::isnan(mean.tdt) ? 0.0 : mean.tdt) + ev.tdt;
      mean.tdt_lt1 += ev.tdt_lt1;
      mean.tdt_lt2 += ev.tdt_lt2;
      mean.tdt_lt3 += ev.tdt_lt3;
      mean.tdt_pairs += ev.tdt_pairs;
      ++tdt_seqs;
    }
  }
  const double ns = static_cast<double>(sequences.size());
  mean.depth.abs_rel /= ns;
  mean.depth.sq_rel /= ns;
  mean.depth.rmse /= ns;
  mean.depth.rmse_log /= ns;
  mean.depth.delta1 /= ns;
  mean.depth.delta2 /= ns;
  mean.depth.delta3 /= ns;
  if (tdt_seqs > 0) {
    mean.tdt /= static_cast<double>(tdt_seqs);
    mean.tdt_lt1 /= static_cast<double>(tdt_seqs);
    mean.tdt_lt2 /= static_cast<double>(tdt_seqs);
    mean.tdt_lt3 /= static_cast<double>(tdt_seqs);
  }
  return mean;
}

}  // namespace fgd
