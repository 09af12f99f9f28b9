// Command-line front end: synthetic data generation, training, evaluation,
// temporal-consistency reporting, gradient checking, and checkpoint demos.
// Metric reports are flat "key value" lines on stdout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fgd/dataset.hpp"
#include "fgd/gradcheck.hpp"
#include "fgd/train.hpp"

namespace fs = std::filesystem;
using Scalar = float;

namespace {

std::string default_data_dir() {
  const char* env = std::getenv("FGD_DATA_DIR");
  return env ? env : "data";
}

struct Report {
  std::vector<std::pair<std::string, std::string>> lines;

  void add(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    lines.emplace_back(key, buf);
  }
  void add(const std::string& key, const std::string& v) {
    lines.emplace_back(key, v);
  }
  void emit(const std::string& path) const {
    std::ostringstream ss;
    for (const auto& [k, v] : lines) ss << k << " " << v << "\n";
    std::cout << ss.str();
    if (!path.empty()) {
      std::ofstream f(path);
      if (!f) throw fgd::io_error("cannot open report file " + path);
      f << ss.str();
    }
  }
};

void add_depth_metrics(Report& rep, const fgd::SequenceEval& ev) {
  rep.add("abs_rel", ev.depth.abs_rel);
  rep.add("sq_rel", ev.depth.sq_rel);
  rep.add("rmse", ev.depth.rmse);
  rep.add("rmse_log", ev.depth.rmse_log);
  rep.add("delta1", ev.depth.delta1);
  rep.add("delta2", ev.depth.delta2);
  rep.add("delta3", ev.depth.delta3);
}

void add_tdt_metrics(Report& rep, const fgd::SequenceEval& ev) {
  rep.add("tdt", ev.tdt);
  rep.add("tdt_lt1", ev.tdt_lt1);
  rep.add("tdt_lt2", ev.tdt_lt2);
  rep.add("tdt_lt3", ev.tdt_lt3);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw fgd::io_error("config: bad numeric value for " + key + ": " + v);
  }
}

// applies a key = value config file on top of the defaults; CLI flags are
// applied afterwards by CLI11 and win
struct Settings {
  fgd::ModelConfig model;
  fgd::LossConfig loss;
  fgd::MetricConfig metric;
  fgd::TrainConfig train;
  fgd::SceneConfig scene;

  void apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
      if (k == "channel_scale") model.channel_scale = int(to_double(v, k));
      else if (k == "height") { model.height = int(to_double(v, k)); scene.height = model.height; }
      else if (k == "width") { model.width = int(to_double(v, k)); scene.width = model.width; }
      else if (k == "confidence_eps") { model.confidence_eps = to_double(v, k); loss.epsilon = model.confidence_eps; }
      else if (k == "alpha") loss.alpha = to_double(v, k);
      else if (k == "beta") loss.beta = to_double(v, k);
      else if (k == "gamma") loss.gamma = to_double(v, k);
      else if (k == "lambda_d") loss.lambda_d = to_double(v, k);
      else if (k == "lambda_o") loss.lambda_o = to_double(v, k);
      else if (k == "lambda") loss.lambda = to_double(v, k);
      else if (k == "cap_min") metric.cap_min = to_double(v, k);
      else if (k == "cap_max") metric.cap_max = to_double(v, k);
      else if (k == "tdt_eps1") metric.tdt_eps1 = to_double(v, k);
      else if (k == "tdt_th") metric.tdt_th = to_double(v, k);
      else if (k == "steps") train.steps = int(to_double(v, k));
      else if (k == "window") train.window = int(to_double(v, k));
      else if (k == "lr") train.lr = to_double(v, k);
      else if (k == "seed") train.seed = uint64_t(to_double(v, k));
      else if (k == "frames") scene.frames = int(to_double(v, k));
      else if (k == "sprites") scene.sprite_count = int(to_double(v, k));
      else if (k == "flow_noise") scene.flow_noise = to_double(v, k);
      else if (k == "focal") scene.focal = to_double(v, k);
      else if (k == "t_x") scene.t_x = to_double(v, k);
      else throw fgd::io_error("config: unknown key " + k);
    }
  }
  void validate() const {
    model.validate();
    loss.validate();
    metric.validate();
    train.validate();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-guided recurrent depth pipeline"};
  app.require_subcommand(1);

  Settings st;
  std::string data_dir = default_data_dir();
  std::string config_path, ckpt_path, out_path, report_path, pred_dir;
  uint64_t seed = 1;
  int count = 8;
  fgd::Ablation abl;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "key = value config file");
    c->add_option("--data", data_dir, "dataset directory (default $FGD_DATA_DIR)");
    c->add_option("--report", report_path, "also write the report to this file");
    c->add_option("--seed", seed, "random seed");
    c->add_option("--channel-scale", st.model.channel_scale);
    c->add_option("--height", st.model.height);
    c->add_option("--width", st.model.width);
  };
  auto add_ablation = [&](CLI::App* c) {
    c->add_flag("--no-memory", abl.disable_memory, "zero the recurrent state");
    c->add_flag("--no-flow", abl.disable_flow, "plain ConvGRU alignment");
    c->add_flag("--no-confidence", abl.disable_confidence, "skip the confidence gate");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate synthetic sequences");
  add_common(gen);
  gen->add_option("--count", count, "number of sequences");
  gen->add_option("--frames", st.scene.frames);
  gen->add_option("--sprites", st.scene.sprite_count);
  gen->add_option("--flow-noise", st.scene.flow_noise);

  CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset");
  add_common(train_cmd);
  add_ablation(train_cmd);
  train_cmd->add_option("--steps", st.train.steps);
  train_cmd->add_option("--window", st.train.window);
  train_cmd->add_option("--lr", st.train.lr);
  train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
  train_cmd->add_option("--init", ckpt_path, "checkpoint to continue from");

  CLI::App* eval_cmd = app.add_subcommand("eval", "depth metrics over a dataset");
  add_common(eval_cmd);
  add_ablation(eval_cmd);
  eval_cmd->add_option("--ckpt", ckpt_path)->required();

  CLI::App* tdt_cmd = app.add_subcommand("tdt", "temporal consistency over a dataset");
  add_common(tdt_cmd);
  add_ablation(tdt_cmd);
  tdt_cmd->add_option("--ckpt", ckpt_path);
  tdt_cmd->add_option("--pred", pred_dir,
                      "directory of predicted depth_NNN.pfm per seq_* instead of a checkpoint");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference suite");
  gc->add_option("--seed", seed);
  gc->add_option("--report", report_path);

  CLI::App* demo = app.add_subcommand("demo", "run a checkpoint over one sequence");
  add_common(demo);
  add_ablation(demo);
  demo->add_option("--ckpt", ckpt_path)->required();
  demo->add_option("--out", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      st.apply(fgd::parse_config_file(config_path));
      seed = st.train.seed;
      // re-parse so explicit flags override the config file
      app.clear();
      CLI11_PARSE(app, argc, argv);
    }
    st.train.seed = seed;
    st.train.ablation = abl;
    st.scene.height = st.model.height;
    st.scene.width = st.model.width;
    st.validate();
    Report rep;

    if (*gen) {
      st.scene.validate();
      for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%04d", i);
        fgd::write_sequence(fs::path(data_dir) / name,
                            fgd::generate_sequence<Scalar>(st.scene, seed + i));
      }
      rep.add("sequences", double(count));
      rep.emit(report_path);
      return 0;
    }

    if (*gc) {
      const fgd::GradCheckReport r = fgd::run_gradcheck(seed);
      for (const auto& c : r.cases)
        rep.add("gradcheck." + c.name + ".max_err", c.max_err);
      rep.add("gradcheck.pass", r.all_pass() ? 1.0 : 0.0);
      rep.emit(report_path);
      return r.all_pass() ? 0 : 1;
    }

    if (*train_cmd) {
      auto sequences = fgd::read_dataset<Scalar>(data_dir);
      fgd::Checkpoint<Scalar> ck;
      fgd::OptimizerState<Scalar> opt;
      if (!ckpt_path.empty()) {
        ck = fgd::load_checkpoint<Scalar>(ckpt_path);
        st.model = ck.config;
        opt = ck.optimizer;
        if (opt.empty()) opt = fgd::detail::make_optimizer<Scalar>(st.train.lr);
      } else {
        ck.config = st.model;
        ck.params = fgd::init_model_params<Scalar>(st.model, seed);
        opt = fgd::detail::make_optimizer<Scalar>(st.train.lr);
      }
      const fgd::TrainResult<Scalar> res = fgd::train(
          ck.params, opt, sequences, st.model, st.loss, st.train,
          [](int step, double loss) {
            if (step % 25 == 0)
              std::cerr << "step " << step << " loss " << loss << "\n";
          });
      ck.step += st.train.steps;
      ck.optimizer = std::move(opt);
      fgd::save_checkpoint(out_path, ck);
      const int head = std::min<size_t>(10, res.loss_trace.size());
      double first = 0, last = 0;
      for (int i = 0; i < head; ++i) first += res.loss_trace[i];
      for (size_t i = res.loss_trace.size() - head; i < res.loss_trace.size(); ++i)
        last += res.loss_trace[i];
      rep.add("steps", double(res.loss_trace.size()));
      rep.add("loss_first10_mean", first / head);
      rep.add("loss_last10_mean", last / head);
      rep.add("loss_final", res.loss_trace.back());
      rep.emit(report_path);
      return 0;
    }

    if (*eval_cmd) {
      auto sequences = fgd::read_dataset<Scalar>(data_dir);
      const auto ck = fgd::load_checkpoint<Scalar>(ckpt_path);
      const fgd::SequenceEval ev =
          fgd::evaluate_model(ck.params, sequences, ck.config, st.metric, abl);
      add_depth_metrics(rep, ev);
      add_tdt_metrics(rep, ev);
      rep.emit(report_path);
      return 0;
    }

    if (*tdt_cmd) {
      auto dirs = fgd::list_sequences(data_dir);
      double tdt_sum = 0, lt1 = 0, lt2 = 0, lt3 = 0;
      long n = 0;
      for (size_t si = 0; si < dirs.size(); ++si) {
        const auto seq = fgd::read_sequence<Scalar>(dirs[si]);
        std::vector<fgd::Tensor<Scalar>> pred;
        if (!pred_dir.empty()) {
          const fs::path pdir = fs::path(pred_dir) / dirs[si].filename();
          for (size_t t = 0; t < seq.frames.size(); ++t)
            pred.push_back(fgd::read_pfm<Scalar>(
                (pdir / fgd::detail::index_name("depth", int(t), ".pfm")).string()));
        } else if (!ckpt_path.empty()) {
          const auto ck = fgd::load_checkpoint<Scalar>(ckpt_path);
          pred = fgd::predict_sequence(ck.params, seq.frames, seq.flows_input,
                                       ck.config, abl);
        } else {
          throw fgd::io_error("tdt: need --ckpt or --pred");
        }
        for (size_t t = 1; t < pred.size(); ++t) {
          const fgd::TdtResult r =
              fgd::tdt(pred[t], pred[t - 1], seq.flows_gt[t - 1], seq.frames[t],
                       seq.frames[t - 1], st.metric);
          if (!r.valid()) continue;
          tdt_sum += r.tdt;
          lt1 += r.lt1;
          lt2 += r.lt2;
          lt3 += r.lt3;
          ++n;
        }
      }
      if (n == 0) throw fgd::io_error("tdt: no confident pixels in any pair");
      rep.add("tdt", tdt_sum / n);
      rep.add("tdt_lt1", lt1 / n);
      rep.add("tdt_lt2", lt2 / n);
      rep.add("tdt_lt3", lt3 / n);
      rep.add("pairs", double(n));
      rep.emit(report_path);
      return 0;
    }

    if (*demo) {
      const auto ck = fgd::load_checkpoint<Scalar>(ckpt_path);
      // accept either a dataset root or a single sequence directory
      const bool single = fs::exists(fs::path(data_dir) / "frame_000.ppm");
      const auto seq = fgd::read_sequence<Scalar>(
          single ? fs::path(data_dir) : fgd::list_sequences(data_dir).front());
      const auto pred = fgd::predict_sequence(ck.params, seq.frames,
                                              seq.flows_input, ck.config, abl);
      fs::create_directories(out_path);
      for (size_t t = 0; t < pred.size(); ++t) {
        const std::string stem = fgd::detail::index_name("depth", int(t), "");
        fgd::write_pfm((fs::path(out_path) / (stem + ".pfm")).string(), pred[t]);
        fgd::write_ppm((fs::path(out_path) / (stem + ".ppm")).string(),
                       fgd::colorize_depth(pred[t], std::max(st.metric.cap_min, 0.1),
                                           st.metric.cap_max));
      }
      rep.add("frames", double(pred.size()));
      rep.emit(report_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
