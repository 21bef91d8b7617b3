#include "sarfsl/ssl/pretrain.hpp"

#include <numeric>
#include <sstream>

#include "sarfsl/core/io.hpp"
#include "sarfsl/nn/optim.hpp"
#include "sarfsl/ssl/losses.hpp"

namespace sarfsl::ssl {

using nn::Matrix;
using nn::Sequential;

void SSLConfig::validate() const {
  require(algorithm == "simclr" || algorithm == "byol", ErrorKind::kConfig,
          "ssl.algorithm must be simclr or byol, got '" + algorithm + "'");
  require(nt_xent_temperature > 0.0, ErrorKind::kConfig, "ssl.nt_xent_temperature must be positive");
  require(byol_ema_momentum >= 0.0 && byol_ema_momentum < 1.0, ErrorKind::kConfig,
          "ssl.byol_ema_momentum must lie in [0, 1)");
  require(epochs >= 0, ErrorKind::kConfig, "ssl.epochs must be >= 0");
  require(batch_size >= 2, ErrorKind::kConfig, "ssl.batch_size must be >= 2");
  require(learning_rate > 0.0, ErrorKind::kConfig, "ssl.learning_rate must be positive");
  require(weight_decay >= 0.0, ErrorKind::kConfig, "ssl.weight_decay must be >= 0");
  require(lr_schedule == "cosine" || lr_schedule == "constant", ErrorKind::kConfig,
          "ssl.lr_schedule must be cosine or constant");
  require(proj_dim >= 1 && projector_hidden >= 0 && predictor_hidden >= 1, ErrorKind::kConfig,
          "ssl: projector/predictor widths must be positive");
  encoder.validate();
}

double SSLConfig::lr_at(std::int64_t step, std::int64_t total_steps) const {
  return lr_schedule == "cosine" ? nn::cosine_lr(learning_rate, step, total_steps) : learning_rate;
}

Json to_json(const SSLConfig& cfg) {
  return Json{{"algorithm", cfg.algorithm},
              {"nt_xent_temperature", cfg.nt_xent_temperature},
              {"byol_ema_momentum", cfg.byol_ema_momentum},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"weight_decay", cfg.weight_decay},
              {"lr_schedule", cfg.lr_schedule},
              {"seed", cfg.seed},
              {"encoder", to_json(cfg.encoder)},
              {"proj_dim", cfg.proj_dim},
              {"projector_hidden", cfg.projector_hidden},
              {"projector_batchnorm", cfg.projector_batchnorm},
              {"predictor_hidden", cfg.predictor_hidden}};
}

SSLConfig ssl_config_from_json(const Json& j, const std::string& path) {
  SSLConfig cfg;
  JsonReader r(j, path);
  r.get("algorithm", cfg.algorithm);
  r.get("nt_xent_temperature", cfg.nt_xent_temperature);
  r.get("byol_ema_momentum", cfg.byol_ema_momentum);
  r.get("epochs", cfg.epochs);
  r.get("batch_size", cfg.batch_size);
  r.get("learning_rate", cfg.learning_rate);
  r.get("weight_decay", cfg.weight_decay);
  r.get("lr_schedule", cfg.lr_schedule);
  r.get("seed", cfg.seed);
  if (const Json* e = r.child("encoder")) cfg.encoder = encoder_spec_from_json(*e, r.key_path("encoder"));
  r.get("proj_dim", cfg.proj_dim);
  r.get("projector_hidden", cfg.projector_hidden);
  r.get("projector_batchnorm", cfg.projector_batchnorm);
  r.get("predictor_hidden", cfg.predictor_hidden);
  r.finish();
  return cfg;
}

std::string training_log_jsonl(const TrainingLog& log) {
  std::ostringstream out;
  for (const EpochRecord& r : log) {
    out << "{\"epoch\":" << r.epoch << ",\"mean_loss\":" << format_real(r.mean_loss)
        << ",\"lr\":" << format_real(r.lr) << "}\n";
  }
  return out.str();
}

Sequential<float> build_projector(int feat_dim, const SSLConfig& cfg, Rng& rng) {
  const int hidden = cfg.projector_hidden > 0 ? cfg.projector_hidden : feat_dim;
  Sequential<float> net(nn::Shape{feat_dim, 1, 1});
  for (int layer = 0; layer < 2; ++layer) {
    net.add<nn::Linear>(hidden, rng);
    if (cfg.projector_batchnorm) net.add<nn::BatchNorm1d>();
    net.add<nn::ReLU>();
  }
  net.add<nn::Linear>(cfg.proj_dim, rng);
  return net;
}

Sequential<float> build_predictor(const SSLConfig& cfg, Rng& rng) {
  Sequential<float> net(nn::Shape{cfg.proj_dim, 1, 1});
  net.add<nn::Linear>(cfg.predictor_hidden, rng);
  if (cfg.projector_batchnorm) net.add<nn::BatchNorm1d>();
  net.add<nn::ReLU>();
  net.add<nn::Linear>(cfg.proj_dim, rng);
  return net;
}

void ema_update(Sequential<float>& target, const Sequential<float>& online, double momentum) {
  auto tp = target.parameters();
  auto op = online.parameters();
  require(tp.size() == op.size(), ErrorKind::kShape, "ema_update: networks differ in structure");
  const float m = static_cast<float>(momentum);
  const float rest = static_cast<float>(1.0 - momentum);
  for (std::size_t i = 0; i < tp.size(); ++i) {
    require(tp[i]->value.rows() == op[i]->value.rows() && tp[i]->value.cols() == op[i]->value.cols(),
            ErrorKind::kShape, "ema_update: parameter shapes differ");
    tp[i]->value = m * tp[i]->value + rest * op[i]->value;
  }
}

namespace {

struct Schedule {
  std::int64_t steps_per_epoch;
  std::int64_t total_steps;
};

Schedule check_inputs(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                      const SSLConfig& cfg) {
  cfg.validate();
  aug.validate();
  require(!pool.empty(), ErrorKind::kEmptyPool, "pretraining pool is empty");
  require(static_cast<std::size_t>(cfg.batch_size) <= pool.size(), ErrorKind::kConfig,
          "ssl.batch_size (" + std::to_string(cfg.batch_size) + ") exceeds the pool size (" +
              std::to_string(pool.size()) + ")");
  require(aug.crop_out_size == cfg.encoder.input_size, ErrorKind::kConfig,
          "augment.crop_out_size must equal ssl.encoder.input_size");
  const std::int64_t per_epoch = static_cast<std::int64_t>(pool.size()) / cfg.batch_size;
  return {per_epoch, per_epoch * cfg.epochs};
}

// Views for one step, laid out [a_1..a_B, b_1..b_B]. Each chip's pair draws
// from its own stream keyed by (seed, global step, slot), so batches are
// reproducible irrespective of how they are produced.
Matrix<float> view_batch(const DatasetPool& pool, const std::vector<std::size_t>& idx,
                         const augment::AugmentationConfig& aug, std::uint64_t view_seed,
                         std::int64_t step) {
  const std::size_t b = idx.size();
  std::vector<Chip> views(2 * b);
  const std::uint64_t step_seed = derive_seed(view_seed, static_cast<std::uint64_t>(step));
  for (std::size_t i = 0; i < b; ++i) {
    Rng rng(derive_seed(step_seed, i));
    augment::ViewPair pair = augment::make_view_pair(pool.chips[idx[i]], aug, rng);
    views[i] = std::move(pair.view_a);
    views[b + i] = std::move(pair.view_b);
  }
  return chips_to_batch(views, aug.crop_out_size);
}

template <typename Fn>
TrainingLog run_epochs(const DatasetPool& pool, const SSLConfig& cfg, const Schedule& sched, Fn&& step_fn) {
  Rng order_rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> order(pool.size());
  TrainingLog log;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = cfg.lr_at(step, sched.total_steps);
    double sum = 0.0;
    for (std::int64_t s = 0; s < sched.steps_per_epoch; ++s, ++step) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(s * cfg.batch_size);
      std::vector<std::size_t> idx(first, first + cfg.batch_size);
      sum += step_fn(idx, step, cfg.lr_at(step, sched.total_steps));
    }
    rec.mean_loss = sched.steps_per_epoch > 0 ? sum / static_cast<double>(sched.steps_per_epoch) : 0.0;
    log.push_back(rec);
  }
  return log;
}

std::vector<nn::Param<float>*> concat(std::initializer_list<std::vector<nn::Param<float>*>> lists) {
  std::vector<nn::Param<float>*> out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  return out;
}

}  // namespace

PretrainResult pretrain_simclr(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                               const SSLConfig& cfg) {
  const Schedule sched = check_inputs(pool, aug, cfg);
  PretrainResult result;
  result.encoder = Encoder(cfg.encoder, derive_seed(cfg.seed, 1));
  Rng head_rng(derive_seed(cfg.seed, 2));
  result.projector = build_projector(result.encoder.feat_dim(), cfg, head_rng);
  Sequential<float>& enc = result.encoder.net();
  Sequential<float>& proj = result.projector;
  nn::Adam<float> opt(nn::AdamOptions{.weight_decay = cfg.weight_decay});
  const auto params = concat({enc.parameters(), proj.parameters()});
  const std::uint64_t view_seed = derive_seed(cfg.seed, 4);

  result.log = run_epochs(pool, cfg, sched, [&](const std::vector<std::size_t>& idx, std::int64_t step,
                                                double lr) {
    const Matrix<float> x = view_batch(pool, idx, aug, view_seed, step);
    const Matrix<float> z = proj.forward(enc.forward(x));
    const nn::LossAndGrad<double> lg =
        nt_xent_loss_and_grad(z.transpose().cast<double>(), cfg.nt_xent_temperature);
    enc.zero_grad();
    proj.zero_grad();
    enc.backward(proj.backward(lg.grad.transpose().cast<float>()));
    opt.step(params, lr);
    return lg.loss;
  });
  return result;
}

PretrainResult pretrain_byol(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                             const SSLConfig& cfg, const ByolObserver& observer) {
  const Schedule sched = check_inputs(pool, aug, cfg);
  PretrainResult result;
  result.encoder = Encoder(cfg.encoder, derive_seed(cfg.seed, 1));
  Rng head_rng(derive_seed(cfg.seed, 2));
  result.projector = build_projector(result.encoder.feat_dim(), cfg, head_rng);
  Sequential<float> predictor = build_predictor(cfg, head_rng);
  Sequential<float>& enc = result.encoder.net();
  Sequential<float>& proj = result.projector;
  Sequential<float> target_enc = enc;
  Sequential<float> target_proj = proj;
  nn::Adam<float> opt(nn::AdamOptions{.weight_decay = cfg.weight_decay});
  const auto params = concat({enc.parameters(), proj.parameters(), predictor.parameters()});
  const std::uint64_t view_seed = derive_seed(cfg.seed, 4);

  result.log = run_epochs(pool, cfg, sched, [&](const std::vector<std::size_t>& idx, std::int64_t step,
                                                double lr) {
    const Matrix<float> x = view_batch(pool, idx, aug, view_seed, step);
    const Matrix<float> q = predictor.forward(proj.forward(enc.forward(x)));
    const Matrix<float> t = target_proj.infer(target_enc.infer(x));
    const nn::LossAndGrad<double> lg =
        byol_loss_and_grad(q.transpose().cast<double>(), t.transpose().cast<double>());
    enc.zero_grad();
    proj.zero_grad();
    predictor.zero_grad();
    enc.backward(proj.backward(predictor.backward(lg.grad.transpose().cast<float>())));
    opt.step(params, lr);
    ema_update(target_enc, enc, cfg.byol_ema_momentum);
    ema_update(target_proj, proj, cfg.byol_ema_momentum);
    if (observer) observer(step + 1, ByolNetworks{enc, proj, target_enc, target_proj});
    return lg.loss;
  });
  return result;
}

PretrainResult pretrain(const DatasetPool& pool, const augment::AugmentationConfig& aug,
                        const SSLConfig& cfg) {
  cfg.validate();
  return cfg.algorithm == "byol" ? pretrain_byol(pool, aug, cfg) : pretrain_simclr(pool, aug, cfg);
}

}  // namespace sarfsl::ssl
