#include "smc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "binary_io.hpp"

namespace smc {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'M', 'C', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kPoolGuard = 1e-8;
constexpr double kProbClamp = 1e-7;

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

std::string layer_name(const char* kind, std::size_t i, const char* field) {
  return std::string(kind) + "." + std::to_string(i) + "." + field;
}

std::string gru_name(std::size_t layer, bool reverse, const char* field) {
  return "gru." + std::to_string(layer) + (reverse ? ".bwd." : ".fwd.") + field;
}

ad::Tensor uniform(std::mt19937_64& rng, ad::Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v), true);
}

ad::Tensor add_row_bias(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& bias) {
  return ad::add_bias(tape, x, bias, 1);
}

// Feature width after the conv2d stack, flattened as channels x freq.
std::size_t conv2d_output_width(const ModelConfig& cfg) {
  if (cfg.conv2d_channels.empty()) return cfg.freq_bins;
  std::size_t f = cfg.freq_bins;
  for (auto p : cfg.conv2d_freq_pool) f /= p;
  return cfg.conv2d_channels.back() * f;
}

std::size_t cnn_output_width(const ModelConfig& cfg) {
  return cfg.conv1d_channels.empty() ? conv2d_output_width(cfg) : cfg.conv1d_channels.back();
}

std::size_t rnn_output_width(const ModelConfig& cfg) {
  return cfg.rnn_layers == 0 ? cnn_output_width(cfg) : 2 * cfg.rnn_hidden;
}

SMCParams smc_params_of(const ModelParams& params, const ModelConfig& cfg) {
  SMCParams p;
  p.weights = params.get("smc.weights");
  if (cfg.smc.use_bias) p.bias = params.get("smc.bias");
  return p;
}

}  // namespace

SMCPlacement parse_placement(std::string_view name) {
  if (name == "none") return SMCPlacement::none;
  if (name == "after_cnn") return SMCPlacement::after_cnn;
  if (name == "after_rnn") return SMCPlacement::after_rnn;
  if (name == "probabilities_global") return SMCPlacement::probabilities_global;
  if (name == "probabilities_per_class") return SMCPlacement::probabilities_per_class;
  fail(ErrorCode::invalid_argument,
       "unknown SMC placement '" + std::string(name) +
           "' (expected none|after_cnn|after_rnn|probabilities_global|probabilities_per_class)");
}

std::string_view to_string(SMCPlacement placement) {
  switch (placement) {
    case SMCPlacement::none: return "none";
    case SMCPlacement::after_cnn: return "after_cnn";
    case SMCPlacement::after_rnn: return "after_rnn";
    case SMCPlacement::probabilities_global: return "probabilities_global";
    case SMCPlacement::probabilities_per_class: return "probabilities_per_class";
  }
  return "none";
}

// ---- config ----------------------------------------------------------------

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_argument, "model: " + what); };
  if (num_classes == 0) bad("num_classes must be positive");
  if (freq_bins == 0) bad("freq_bins must be positive");
  if (conv2d_time_pool.size() != conv2d_channels.size() || conv2d_freq_pool.size() != conv2d_channels.size()) {
    bad("conv2d pool lists must have one entry per conv2d layer");
  }
  for (auto c : conv2d_channels)
    if (c == 0) bad("conv2d channels must be positive");
  for (auto c : conv1d_channels)
    if (c == 0) bad("conv1d channels must be positive");
  for (auto p : conv2d_time_pool)
    if (p == 0) bad("pool factors must be positive");
  std::size_t f = freq_bins;
  for (auto p : conv2d_freq_pool) {
    if (p == 0) bad("pool factors must be positive");
    f /= p;
  }
  if (f == 0) bad("frequency pooling leaves no bins");
  if (conv2d_kernel % 2 == 0 || conv1d_kernel % 2 == 0) bad("kernel sizes must be odd");
  if (rnn_layers > 0 && rnn_hidden == 0) bad("rnn_hidden must be positive");
  if (smc_placement != SMCPlacement::none) smc.validate();
}

std::size_t ModelConfig::time_pool_factor() const {
  std::size_t p = 1;
  for (auto v : conv2d_time_pool) p *= v;
  return p;
}

std::size_t ModelConfig::output_frames(std::size_t input_frames) const {
  std::size_t t = input_frames;
  for (auto p : conv2d_time_pool) t /= p;
  return t;
}

std::size_t ModelConfig::smc_channels() const {
  switch (smc_placement) {
    case SMCPlacement::after_cnn: return cnn_output_width(*this);
    case SMCPlacement::after_rnn: return rnn_output_width(*this);
    case SMCPlacement::probabilities_global:
    case SMCPlacement::probabilities_per_class: return num_classes;
    case SMCPlacement::none: return 0;
  }
  return 0;
}

SMCConfig ModelConfig::effective_smc() const {
  SMCConfig out = smc;
  if (smc_placement == SMCPlacement::probabilities_global) out.weight_sharing = WeightSharing::shared_scalar;
  if (smc_placement == SMCPlacement::probabilities_per_class) out.weight_sharing = WeightSharing::per_channel;
  return out;
}

// ---- params ----------------------------------------------------------------

const ad::Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.tensor;
  fail(ErrorCode::invalid_argument, "model params: no tensor named '" + std::string(name) + "'");
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries.begin(), entries.end(), [&](const NamedTensor& e) { return e.name == name; });
}

std::vector<ad::Tensor> ModelParams::tensors() const {
  std::vector<ad::Tensor> out;
  for (const auto& e : entries) out.push_back(e.tensor);
  return out;
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.tensor.numel();
  return n;
}

void ModelParams::zero_grads() {
  for (auto& e : entries) e.tensor.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& e : entries) out.entries.push_back({e.name, e.tensor.detach().set_requires_grad(true)});
  return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  auto add = [&](std::string name, ad::Shape shape, double bound) {
    p.entries.push_back({std::move(name), uniform(rng, std::move(shape), bound)});
  };

  std::size_t cin = 1;
  const std::size_t k2 = cfg.conv2d_kernel;
  for (std::size_t i = 0; i < cfg.conv2d_channels.size(); ++i) {
    const auto cout = cfg.conv2d_channels[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k2 * k2));
    add(layer_name("conv2d", i, "weight"), {cout, cin, k2, k2}, bound);
    add(layer_name("conv2d", i, "bias"), {cout}, bound);
    cin = cout;
  }
  cin = conv2d_output_width(cfg);
  for (std::size_t i = 0; i < cfg.conv1d_channels.size(); ++i) {
    const auto cout = cfg.conv1d_channels[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * cfg.conv1d_kernel));
    add(layer_name("conv1d", i, "weight"), {cfg.conv1d_kernel, cin, cout}, bound);
    add(layer_name("conv1d", i, "bias"), {cout}, bound);
    cin = cout;
  }

  auto add_smc = [&](std::size_t channels) {
    const auto smc_cfg = cfg.effective_smc();
    const auto sp = smc_init(smc_cfg, channels, rng());
    p.entries.push_back({"smc.weights", sp.weights});
    if (smc_cfg.use_bias) p.entries.push_back({"smc.bias", sp.bias});
  };
  if (cfg.smc_placement == SMCPlacement::after_cnn) add_smc(cin);

  const std::size_t H = cfg.rnn_hidden;
  for (std::size_t l = 0; l < cfg.rnn_layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    for (bool reverse : {false, true}) {
      add(gru_name(l, reverse, "w_input"), {cin, 3 * H}, bound);
      add(gru_name(l, reverse, "w_hidden"), {H, 3 * H}, bound);
      add(gru_name(l, reverse, "b_input"), {3 * H}, bound);
      add(gru_name(l, reverse, "b_hidden"), {3 * H}, bound);
    }
    cin = 2 * H;
  }
  if (cfg.smc_placement == SMCPlacement::after_rnn) add_smc(cin);

  const double bound = 1.0 / std::sqrt(static_cast<double>(cin));
  add("classifier.weight", {cin, cfg.num_classes}, bound);
  add("classifier.bias", {cfg.num_classes}, bound);
  if (cfg.smc_placement == SMCPlacement::probabilities_global ||
      cfg.smc_placement == SMCPlacement::probabilities_per_class) {
    add_smc(cfg.num_classes);
  }
  return p;
}

void check_params(const ModelParams& params, const ModelConfig& cfg) {
  const auto expected = init_params(cfg, 0);
  if (expected.entries.size() != params.entries.size()) {
    fail(ErrorCode::shape_mismatch, "model params hold " + std::to_string(params.entries.size()) +
                                        " tensors, config expects " + std::to_string(expected.entries.size()));
  }
  for (std::size_t i = 0; i < expected.entries.size(); ++i) {
    const auto& want = expected.entries[i];
    const auto& got = params.entries[i];
    if (want.name != got.name || want.tensor.shape() != got.tensor.shape()) {
      fail(ErrorCode::shape_mismatch, "model params: expected " + want.name + " " + ad::to_string(want.tensor.shape()) +
                                          ", found " + got.name + " " + ad::to_string(got.tensor.shape()));
    }
  }
}

// ---- GRU -------------------------------------------------------------------

ad::Tensor gru_layer(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& w_input, const ad::Tensor& w_hidden,
                     const ad::Tensor& b_input, const ad::Tensor& b_hidden, bool reverse) {
  if (x.rank() != 2 || w_input.rank() != 2 || w_hidden.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "gru: expected rank-2 input and weights");
  }
  const std::size_t T = x.extent(0), I = x.extent(1), H = w_hidden.extent(0);
  if (w_input.shape() != ad::Shape{I, 3 * H} || w_hidden.shape() != ad::Shape{H, 3 * H} ||
      b_input.shape() != ad::Shape{3 * H} || b_hidden.shape() != ad::Shape{3 * H}) {
    fail(ErrorCode::shape_mismatch, "gru: shape mismatch input " + ad::to_string(x.shape()) + " vs w_input " +
                                        ad::to_string(w_input.shape()) + ", w_hidden " +
                                        ad::to_string(w_hidden.shape()));
  }
  tape.check_inputs("gru", {&x, &w_input, &w_hidden, &b_input, &b_hidden});

  const auto xv = x.data(), wi = w_input.data(), wh = w_hidden.data(), bi = b_input.data(), bh = b_hidden.data();
  const std::size_t G = 3 * H;
  // per original time index
  std::vector<double> r(T * H), z(T * H), n(T * H), ghn(T * H), hprev(T * H), out(T * H);
  std::vector<double> gi(G), gh(G), h(H, 0.0);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    std::copy(bi.begin(), bi.end(), gi.begin());
    for (std::size_t i = 0; i < I; ++i) {
      const double v = xv[t * I + i];
      const double* row = wi.data() + i * G;
      for (std::size_t g = 0; g < G; ++g) gi[g] += v * row[g];
    }
    std::copy(bh.begin(), bh.end(), gh.begin());
    for (std::size_t j = 0; j < H; ++j) {
      const double v = h[j];
      const double* row = wh.data() + j * G;
      for (std::size_t g = 0; g < G; ++g) gh[g] += v * row[g];
    }
    for (std::size_t j = 0; j < H; ++j) {
      const std::size_t o = t * H + j;
      r[o] = sigmoid(gi[j] + gh[j]);
      z[o] = sigmoid(gi[H + j] + gh[H + j]);
      ghn[o] = gh[2 * H + j];
      n[o] = std::tanh(gi[2 * H + j] + r[o] * ghn[o]);
      hprev[o] = h[j];
      out[o] = (1.0 - z[o]) * n[o] + z[o] * h[j];
    }
    for (std::size_t j = 0; j < H; ++j) h[j] = out[t * H + j];
  }

  return tape.record(
      "gru", {x, w_input, w_hidden, b_input, b_hidden}, {T, H}, std::move(out),
      [x, w_input, w_hidden, r = std::move(r), z = std::move(z), n = std::move(n), ghn = std::move(ghn),
       hprev = std::move(hprev), T, I, H, reverse](std::span<const double>, std::span<const double> g,
                                                   std::span<std::vector<double>*> grads) {
        const std::size_t G = 3 * H;
        const auto xv = x.data(), wi = w_input.data(), wh = w_hidden.data();
        std::vector<double> dh_next(H, 0.0), dgi(G), dgh(G);
        for (std::size_t step = T; step-- > 0;) {
          const std::size_t t = reverse ? T - 1 - step : step;
          for (std::size_t j = 0; j < H; ++j) {
            const std::size_t o = t * H + j;
            const double dh = g[o] + dh_next[j];
            const double dn = dh * (1.0 - z[o]);
            const double dz = dh * (hprev[o] - n[o]);
            const double dan = dn * (1.0 - n[o] * n[o]);
            const double dr = dan * ghn[o];
            const double dar = dr * r[o] * (1.0 - r[o]);
            const double daz = dz * z[o] * (1.0 - z[o]);
            dgi[j] = dar;
            dgi[H + j] = daz;
            dgi[2 * H + j] = dan;
            dgh[j] = dar;
            dgh[H + j] = daz;
            dgh[2 * H + j] = dan * r[o];
            dh_next[j] = dh * z[o];
          }
          if (grads[0]) {
            auto& dx = *grads[0];
            for (std::size_t i = 0; i < I; ++i) {
              double acc = 0.0;
              const double* row = wi.data() + i * G;
              for (std::size_t k = 0; k < G; ++k) acc += dgi[k] * row[k];
              dx[t * I + i] += acc;
            }
          }
          if (grads[1]) {
            auto& dw = *grads[1];
            for (std::size_t i = 0; i < I; ++i) {
              const double v = xv[t * I + i];
              for (std::size_t k = 0; k < G; ++k) dw[i * G + k] += v * dgi[k];
            }
          }
          if (grads[3])
            for (std::size_t k = 0; k < G; ++k) (*grads[3])[k] += dgi[k];
          if (grads[4])
            for (std::size_t k = 0; k < G; ++k) (*grads[4])[k] += dgh[k];
          for (std::size_t j = 0; j < H; ++j) {
            const double hp = hprev[t * H + j];
            const double* row = wh.data() + j * G;
            double acc = 0.0;
            for (std::size_t k = 0; k < G; ++k) acc += dgh[k] * row[k];
            dh_next[j] += acc;
            if (grads[2]) {
              auto& dw = *grads[2];
              for (std::size_t k = 0; k < G; ++k) dw[j * G + k] += hp * dgh[k];
            }
          }
        }
      });
}

// ---- forward ---------------------------------------------------------------

ad::Tensor linear_softmax_pool(ad::Tape& tape, const ad::Tensor& strong) {
  if (strong.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "linear_softmax_pool: expected [T x C], got " + ad::to_string(strong.shape()));
  }
  const auto C = strong.extent(1);
  auto num = ad::sum(tape, ad::square(tape, strong), 0);
  auto den = ad::add_scalar(tape, ad::sum(tape, strong, 0), kPoolGuard);
  return ad::reshape(tape, ad::div(tape, num, den), {C});
}

ModelOutput model_forward(ad::Tape& tape, const ad::Tensor& features, const ModelParams& params,
                          const ModelConfig& cfg) {
  cfg.validate();
  if (features.rank() != 2 || features.extent(1) != cfg.freq_bins) {
    fail(ErrorCode::shape_mismatch, "model_forward: expected features [T x " + std::to_string(cfg.freq_bins) +
                                        "], got " + ad::to_string(features.shape()));
  }
  const std::size_t T = features.extent(0);
  if (T < cfg.min_frames()) {
    fail(ErrorCode::shape_mismatch, "model_forward: " + std::to_string(T) + " frames is too short; the conv/pool stack needs at least " +
                                        std::to_string(cfg.min_frames()));
  }
  const auto smc_cfg = cfg.effective_smc();

  ad::Tensor h = features;
  if (!cfg.conv2d_channels.empty()) {
    h = ad::reshape(tape, h, {1, T, cfg.freq_bins});
    const std::size_t pad = cfg.conv2d_kernel / 2;
    for (std::size_t i = 0; i < cfg.conv2d_channels.size(); ++i) {
      const auto& w = params.get(layer_name("conv2d", i, "weight"));
      const auto& b = params.get(layer_name("conv2d", i, "bias"));
      h = ad::conv2d(tape, h, w, {.pad_h = pad, .pad_w = pad});
      h = ad::add_bias(tape, h, b, 0);
      h = ad::relu(tape, h);
      h = ad::max_pool2d(tape, h, cfg.conv2d_time_pool[i], cfg.conv2d_freq_pool[i]);
    }
    // [C x T' x F'] -> [T' x C*F']
    const std::size_t C = h.extent(0), Tp = h.extent(1), Fp = h.extent(2);
    std::vector<std::size_t> index(C * Tp * Fp);
    for (std::size_t t = 0; t < Tp; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < Fp; ++f) index[(t * C + c) * Fp + f] = (c * Tp + t) * Fp + f;
    h = ad::gather(tape, h, std::move(index), {Tp, C * Fp});
  }
  for (std::size_t i = 0; i < cfg.conv1d_channels.size(); ++i) {
    const auto& w = params.get(layer_name("conv1d", i, "weight"));
    const auto& b = params.get(layer_name("conv1d", i, "bias"));
    h = ad::conv1d(tape, h, w, {.stride = 1, .padding = cfg.conv1d_kernel / 2});
    h = ad::relu(tape, add_row_bias(tape, h, b));
  }
  if (cfg.smc_placement == SMCPlacement::after_cnn) h = smc_forward(tape, h, smc_params_of(params, cfg), smc_cfg);

  for (std::size_t l = 0; l < cfg.rnn_layers; ++l) {
    std::vector<ad::Tensor> dirs;
    for (bool reverse : {false, true}) {
      dirs.push_back(gru_layer(tape, h, params.get(gru_name(l, reverse, "w_input")),
                               params.get(gru_name(l, reverse, "w_hidden")), params.get(gru_name(l, reverse, "b_input")),
                               params.get(gru_name(l, reverse, "b_hidden")), reverse));
    }
    h = ad::concat(tape, dirs, 1);
  }
  if (cfg.smc_placement == SMCPlacement::after_rnn) h = smc_forward(tape, h, smc_params_of(params, cfg), smc_cfg);

  auto logits = add_row_bias(tape, ad::matmul(tape, h, params.get("classifier.weight")), params.get("classifier.bias"));
  auto strong = ad::sigmoid(tape, logits);
  if (cfg.smc_placement == SMCPlacement::probabilities_global ||
      cfg.smc_placement == SMCPlacement::probabilities_per_class) {
    strong = ad::clamp(tape, smc_forward(tape, strong, smc_params_of(params, cfg), smc_cfg), kProbClamp,
                       1.0 - kProbClamp);
  }
  return {strong, linear_softmax_pool(tape, strong)};
}

ad::Tensor sed_loss(ad::Tape& tape, const ad::Tensor& strong_pred, const ad::Tensor& strong_ref,
                    const ad::Tensor& weak_pred, const ad::Tensor& weak_ref, double weak_weight) {
  if (strong_pred.shape() != strong_ref.shape() || weak_pred.shape() != weak_ref.shape()) {
    fail(ErrorCode::shape_mismatch, "sed_loss: shape mismatch " + ad::to_string(strong_pred.shape()) + " vs " +
                                        ad::to_string(strong_ref.shape()) + " / " + ad::to_string(weak_pred.shape()) +
                                        " vs " + ad::to_string(weak_ref.shape()));
  }
  auto bce = [&tape](const ad::Tensor& pred, const ad::Tensor& ref) {
    auto p = ad::clamp(tape, pred, kProbClamp, 1.0 - kProbClamp);
    auto one_minus_p = ad::add_scalar(tape, ad::mul_scalar(tape, p, -1.0), 1.0);
    std::vector<double> inv(ref.numel());
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - ref[i];
    const ad::Tensor ref_neg(ref.shape(), std::move(inv));
    auto ll = ad::add(tape, ad::mul(tape, ref, ad::log(tape, p)), ad::mul(tape, ref_neg, ad::log(tape, one_minus_p)));
    return ad::mul_scalar(tape, ad::mean_all(tape, ll), -1.0);
  };
  auto loss = bce(strong_pred, strong_ref);
  if (weak_weight != 0.0) loss = ad::add(tape, loss, ad::mul_scalar(tape, bce(weak_pred, weak_ref), weak_weight));
  return loss;
}

// ---- checkpoints -----------------------------------------------------------

std::string encode_checkpoint(const ModelParams& params) {
  std::string bytes(kCheckpointMagic, 4);
  binary::put_u32(bytes, kCheckpointVersion);
  binary::put_u32(bytes, static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    binary::put_u32(bytes, static_cast<std::uint32_t>(e.name.size()));
    bytes += e.name;
    binary::put_u32(bytes, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto ext : e.tensor.shape()) binary::put_u32(bytes, static_cast<std::uint32_t>(ext));
    for (double v : e.tensor.data()) binary::put_f64(bytes, v);
  }
  return bytes;
}

ModelParams decode_checkpoint(std::string_view bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.take(4, "magic") != std::string_view(kCheckpointMagic, 4)) {
    fail(ErrorCode::format, source + ": bad magic (not an SMCM checkpoint)");
  }
  const auto version = in.u32("version");
  if (version != kCheckpointVersion) fail(ErrorCode::format, source + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = in.u32("record count");
  ModelParams params;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = in.u32("name length");
    std::string name(in.take(name_len, "name"));
    const auto rank = in.u32("rank");
    if (rank > 8) fail(ErrorCode::format, source + ": implausible rank " + std::to_string(rank) + " for " + name);
    ad::Shape shape(rank);
    for (auto& ext : shape) {
      ext = in.u32("extent");
      if (ext == 0) fail(ErrorCode::format, source + ": zero extent in " + name);
    }
    const std::size_t n = ad::numel(shape);
    if (in.remaining() / 8 < n) fail(ErrorCode::format, source + ": truncated payload for " + name);
    std::vector<double> values(n);
    for (auto& v : values) v = in.f64("value");
    params.entries.push_back({std::move(name), ad::Tensor(std::move(shape), std::move(values), true)});
  }
  if (in.remaining() != 0) fail(ErrorCode::format, source + ": trailing bytes after last record");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, path.string());
}

}  // namespace smc
