#include "p23d/latent.hpp"

#include <cmath>

#include "p23d/error.hpp"

namespace p23d {

using num::Tensor;

namespace {

constexpr double kBceEps = 1e-7;

int ilog2_exact(int v, const char* what) {
  int s = 0, x = v;
  while (x > 1) {
    if (x % 2 != 0) throw DataError(std::string(what) + " must be a power of two");
    x /= 2;
    ++s;
  }
  return s;
}

// He-style init scaled by fan-in.
Tensor init_weight(num::Shape shape, Rng& rng, int fan_in) {
  Tensor w = Tensor::randn(shape, rng, true);
  const double s = std::sqrt(2.0 / double(fan_in));
  for (auto& v : w.mutable_data()) v *= s;
  return w;
}

Tensor conv_block(const Tensor& x, const NamedTensors& params,
                  const std::string& prefix, int stride, int pad) {
  return num::conv3d(x, find_tensor(params, prefix + "/w"),
                     find_tensor(params, prefix + "/b"), stride, pad);
}

std::vector<Tensor> collect(const NamedTensors& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

void push_meta(NamedTensors& ts, const std::string& key, double value) {
  ts.emplace_back("meta/" + key, Tensor::from_data({1}, {value}));
}

double get_meta(const NamedTensors& ts, const std::string& key) {
  return find_tensor(ts, "meta/" + key).scalar();
}

NamedTensors meta_entries(const LatentConfig& c, uint32_t config_hash) {
  NamedTensors ts;
  push_meta(ts, "n", c.n);
  push_meta(ts, "r", c.r);
  push_meta(ts, "c_s", c.c_s);
  push_meta(ts, "c_m", c.c_m);
  push_meta(ts, "vae_hidden", c.vae_hidden);
  push_meta(ts, "width", c.width);
  push_meta(ts, "blocks", c.blocks);
  push_meta(ts, "time_embed", c.time_embed);
  push_meta(ts, "cond_dim", c.cond_dim);
  push_meta(ts, "rng_algo", Rng::kAlgoId);
  // 32-bit hash split into two exactly representable 16-bit halves
  push_meta(ts, "config_hash_hi", double(config_hash >> 16));
  push_meta(ts, "config_hash_lo", double(config_hash & 0xffffu));
  return ts;
}

LatentConfig config_from_meta(const NamedTensors& ts) {
  LatentConfig c;
  c.n = int(get_meta(ts, "n"));
  c.r = int(get_meta(ts, "r"));
  c.c_s = int(get_meta(ts, "c_s"));
  c.c_m = int(get_meta(ts, "c_m"));
  c.vae_hidden = int(get_meta(ts, "vae_hidden"));
  c.width = int(get_meta(ts, "width"));
  c.blocks = int(get_meta(ts, "blocks"));
  c.time_embed = int(get_meta(ts, "time_embed"));
  c.cond_dim = int(get_meta(ts, "cond_dim"));
  c.validate();
  return c;
}

NamedTensors strip_meta(NamedTensors ts, bool mark_trainable) {
  NamedTensors out;
  for (auto& [name, t] : ts) {
    if (name.rfind("meta/", 0) == 0) continue;
    if (mark_trainable) t.node_->requires_grad = true;
    out.emplace_back(name, t);
  }
  return out;
}

}  // namespace

int LatentConfig::stages() const { return ilog2_exact(n / r, "n/r"); }

void LatentConfig::validate() const {
  if (n < 2 || r < 2) throw DataError("latent config: n and r must be >= 2");
  if (n % r != 0) throw DataError("latent config: n must be divisible by r");
  ilog2_exact(n / r, "n/r");
  if (c_s < 1 || c_m != 1) throw DataError("latent config: bad channel counts");
  if (width < 1 || blocks < 1 || time_embed < 1 || cond_dim < 1)
    throw DataError("latent config: bad network sizes");
}

// --- parameter initialization ----------------------------------------------

VaeParams VaeParams::init(const LatentConfig& config, Rng& rng) {
  config.validate();
  VaeParams vae;
  vae.config = config;
  const int stages = config.stages();
  const int h = config.vae_hidden;
  // encoder: strided 3x3x3 convs n -> r, channels 1 -> h -> ... -> c_s
  for (int s = 0; s < stages; ++s) {
    const int cin = s == 0 ? 1 : h;
    const int cout = s == stages - 1 ? config.c_s : h;
    vae.params.emplace_back(
        "enc" + std::to_string(s) + "/w",
        init_weight({cout, cin, 3, 3, 3}, rng, cin * 27));
    vae.params.emplace_back("enc" + std::to_string(s) + "/b",
                            Tensor::zeros({cout}, true));
  }
  // decoder: mirrored upsample + conv stages, then 1x1x1 head to occupancy
  for (int s = 0; s < stages; ++s) {
    const int cin = s == 0 ? config.c_s : h;
    vae.params.emplace_back(
        "dec" + std::to_string(s) + "/w",
        init_weight({h, cin, 3, 3, 3}, rng, cin * 27));
    vae.params.emplace_back("dec" + std::to_string(s) + "/b",
                            Tensor::zeros({h}, true));
  }
  vae.params.emplace_back("head/w", init_weight({1, h, 1, 1, 1}, rng, h));
  vae.params.emplace_back("head/b", Tensor::zeros({1}, true));
  // per-channel log-variance, used only in variational mode
  vae.params.emplace_back("enc/logvar", Tensor::full({config.c_s}, -4.0, true));
  return vae;
}

std::vector<Tensor> VaeParams::trainable() const { return collect(params); }

InpaintNet InpaintNet::init(const LatentConfig& config, Rng& rng) {
  config.validate();
  InpaintNet net;
  net.config = config;
  const int w = config.width;
  const int cin = config.c_s + config.c_m;
  net.params.emplace_back("proj/w", init_weight({w, cin, 1, 1, 1}, rng, cin));
  net.params.emplace_back("proj/b", Tensor::zeros({w}, true));
  for (int b = 0; b < config.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    net.params.emplace_back(p + "/conv1/w",
                            init_weight({w, w, 3, 3, 3}, rng, w * 27));
    net.params.emplace_back(p + "/conv1/b", Tensor::zeros({w}, true));
    net.params.emplace_back(p + "/conv2/w",
                            init_weight({w, w, 3, 3, 3}, rng, w * 27));
    net.params.emplace_back(p + "/conv2/b", Tensor::zeros({w}, true));
  }
  // two-layer time-embedding net; condition is mapped into the same space
  net.params.emplace_back(
      "temb/w1", init_weight({w, config.time_embed}, rng, config.time_embed));
  net.params.emplace_back("temb/b1", Tensor::zeros({w}, true));
  net.params.emplace_back("temb/w2", init_weight({w, w}, rng, w));
  net.params.emplace_back("temb/b2", Tensor::zeros({w}, true));
  net.params.emplace_back(
      "cond/w", init_weight({config.time_embed, config.cond_dim}, rng,
                            config.cond_dim));
  net.params.emplace_back("head/w",
                          init_weight({config.c_s, w, 1, 1, 1}, rng, w));
  net.params.emplace_back("head/b", Tensor::zeros({config.c_s}, true));
  return net;
}

std::vector<Tensor> InpaintNet::trainable() const { return collect(params); }

// --- grid bridges -----------------------------------------------------------

num::Tensor grid_to_tensor(const OccupancyGrid& grid) {
  const int n = grid.n();
  std::vector<double> data(size_t(n) * n * n);
  size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++idx)
        data[idx] = grid.get(i, j, k) ? 1.0 : 0.0;
  return Tensor::from_data({1, n, n, n}, std::move(data));
}

num::Tensor mask_to_tensor(const OccupancyGrid& latent_mask) {
  return grid_to_tensor(latent_mask);
}

// --- autoencoder ------------------------------------------------------------

num::Tensor encode_ss(const OccupancyGrid& grid, const VaeParams& vae) {
  if (grid.n() != vae.config.n) {
    throw DataError("encode_ss: grid resolution " + std::to_string(grid.n()) +
                    " does not match model n=" + std::to_string(vae.config.n));
  }
  Tensor x = grid_to_tensor(grid);
  const int stages = vae.config.stages();
  for (int s = 0; s < stages; ++s) {
    x = conv_block(x, vae.params, "enc" + std::to_string(s), 2, 1);
    if (s != stages - 1) x = num::silu(x);
  }
  return x;
}

num::Tensor decode_probs(const num::Tensor& latent, const VaeParams& vae) {
  const auto& c = vae.config;
  if (latent.shape() != num::Shape{c.c_s, c.r, c.r, c.r}) {
    throw DataError("decode: latent shape mismatch");
  }
  Tensor x = latent;
  for (int s = 0; s < c.stages(); ++s) {
    x = num::upsample_nearest3(x, 2);
    x = num::silu(conv_block(x, vae.params, "dec" + std::to_string(s), 1, 1));
  }
  x = conv_block(x, vae.params, "head", 1, 0);
  return num::sigmoid(x);
}

OccupancyGrid decode_ss(const num::Tensor& latent, const VaeParams& vae,
                        double threshold) {
  num::NoGradGuard ng;
  const Tensor probs = decode_probs(latent, vae);
  const int n = vae.config.n;
  OccupancyGrid grid(n);
  size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++idx)
        if (probs.at(int64_t(idx)) > threshold) grid.set(i, j, k);
  return grid;
}

num::Tensor vae_loss(const OccupancyGrid& grid, const VaeParams& vae,
                     double beta, bool variational, Rng* rng) {
  Tensor q = encode_ss(grid, vae);
  Tensor reg;
  if (variational) {
    if (rng == nullptr) throw DataError("variational vae_loss needs an rng");
    const auto& c = vae.config;
    const Tensor mu = q;
    const Tensor logvar = find_tensor(vae.params, "enc/logvar");  // {c_s}
    const double spatial = double(c.r) * c.r * c.r;
    // q = mu + exp(logvar/2) * eps, logvar shared per channel
    const Tensor eps = Tensor::randn({c.c_s, c.r, c.r, c.r}, *rng);
    const Tensor std_full = num::exp_t(num::add_channel_bias(
        Tensor::zeros({c.c_s, c.r, c.r, c.r}), num::scale(logvar, 0.5)));
    q = num::add(mu, num::mul(std_full, eps));
    // KL(N(mu, sigma^2) || N(0, 1)) summed over all latent entries:
    // 0.5 * sum(mu^2) + 0.5 * spatial * sum_c(exp(logvar) - 1 - logvar)
    const Tensor var_term = num::sub(num::exp_t(logvar), logvar);
    reg = num::scale(
        num::add(num::sum_all(num::mul(mu, mu)),
                 num::scale(num::sum_all(num::affine(var_term, 1.0, -1.0)),
                            spatial)),
        0.5 * beta);
  } else {
    reg = num::scale(num::sum_all(num::mul(q, q)), beta);
  }
  Tensor probs = num::clamp(decode_probs(q, vae), kBceEps, 1.0 - kBceEps);
  const Tensor target = grid_to_tensor(grid);
  const Tensor one_minus_target = num::affine(target, -1.0, 1.0);
  Tensor bce = num::scale(
      num::mean_all(num::add(
          num::mul(target, num::log_t(probs)),
          num::mul(one_minus_target,
                   num::log_t(num::affine(probs, -1.0, 1.0))))),
      -1.0);
  return num::add(bce, reg);
}

// --- latent algebra ---------------------------------------------------------

num::Tensor mix_latent(const num::Tensor& q_vis, const num::Tensor& m,
                       const num::Tensor& eps) {
  if (q_vis.shape() != eps.shape()) {
    throw DataError("mix_latent: latent shapes differ");
  }
  if (m.shape().size() != 4 || m.shape()[0] != 1 ||
      m.shape()[1] != q_vis.shape()[1] || m.shape()[2] != q_vis.shape()[2] ||
      m.shape()[3] != q_vis.shape()[3]) {
    throw DataError("mix_latent: mask shape mismatch");
  }
  for (double v : m.data()) {
    if (v != 0.0 && v != 1.0) throw DataError("mix_latent: non-binary mask");
  }
  const Tensor me = num::expand_channels(m, q_vis.shape()[0]);
  return num::add(num::mul(me, q_vis),
                  num::mul(num::affine(me, -1.0, 1.0), eps));
}

num::Tensor concat_mask(const num::Tensor& q, const num::Tensor& m) {
  return num::concat_channels(q, m);
}

num::Tensor bridge_state(const num::Tensor& q_gt, const num::Tensor& q_comb,
                         double sigma) {
  if (sigma < 0.0 || sigma > 1.0) {
    throw DataError("bridge_state: sigma must be in [0, 1]");
  }
  if (sigma == 0.0) return q_gt;
  if (sigma == 1.0) return q_comb;
  return num::add(num::scale(q_gt, 1.0 - sigma), num::scale(q_comb, sigma));
}

// --- inpainting network ------------------------------------------------------

namespace {

Tensor time_condition_bias(const InpaintNet& net, double sigma,
                           const std::vector<double>& cond) {
  const auto& c = net.config;
  // sinusoidal embedding of sigma, geometric frequency ladder
  std::vector<double> emb(size_t(c.time_embed));
  const int half = c.time_embed / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(1000.0, double(i) / double(half));
    emb[size_t(i)] = std::sin(sigma * freq);
    emb[size_t(half + i)] = std::cos(sigma * freq);
  }
  if (c.time_embed % 2) emb[size_t(c.time_embed - 1)] = sigma;
  Tensor e = Tensor::from_data({c.time_embed}, std::move(emb));
  if (int(cond.size()) != c.cond_dim) {
    throw DataError("inpaint_forward: condition length mismatch");
  }
  const Tensor cvec = Tensor::from_data({c.cond_dim}, cond);
  e = num::add(e, num::matmul(find_tensor(net.params, "cond/w"), cvec));
  Tensor h = num::silu(
      num::add(num::matmul(find_tensor(net.params, "temb/w1"), e),
               find_tensor(net.params, "temb/b1")));
  return num::add(num::matmul(find_tensor(net.params, "temb/w2"), h),
                  find_tensor(net.params, "temb/b2"));
}

}  // namespace

num::Tensor inpaint_forward(const InpaintNet& net, const num::Tensor& x_inp,
                            double sigma, const std::vector<double>& cond) {
  const auto& c = net.config;
  if (x_inp.shape() != num::Shape{c.c_s + c.c_m, c.r, c.r, c.r}) {
    throw DataError("inpaint_forward: input must have c_s + c_m channels");
  }
  const Tensor bias = time_condition_bias(net, sigma, cond);
  Tensor x = conv_block(x_inp, net.params, "proj", 1, 0);
  for (int b = 0; b < c.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    Tensor h = conv_block(x, net.params, p + "/conv1", 1, 1);
    h = num::silu(num::add_channel_bias(h, bias));
    h = conv_block(h, net.params, p + "/conv2", 1, 1);
    x = num::add(x, h);
  }
  return conv_block(num::silu(x), net.params, "head", 1, 0);
}

num::Tensor cfm_loss(const InpaintNet& net, const num::Tensor& q_gt,
                     const num::Tensor& q_comb, const num::Tensor& m,
                     const std::vector<double>& cond, double sigma) {
  const Tensor x_sigma = bridge_state(q_gt, q_comb, sigma);
  const Tensor pred = inpaint_forward(net, concat_mask(x_sigma, m), sigma, cond);
  const Tensor target = num::sub(q_comb, q_gt).detach();
  const Tensor diff = num::sub(pred, target);
  return num::mean_all(num::mul(diff, diff));
}

std::vector<double> zero_condition(const LatentConfig& config) {
  return std::vector<double>(size_t(config.cond_dim), 0.0);
}

// --- checkpoints -------------------------------------------------------------

namespace {

void save_model(const NamedTensors& params, const LatentConfig& c,
                const std::string& path, uint32_t config_hash,
                const char* kind) {
  NamedTensors ts = meta_entries(c, config_hash);
  push_meta(ts, std::string("kind_") + kind, 1.0);
  for (const auto& [name, t] : params) ts.emplace_back(name, t);
  save_checkpoint(path, ts);
}

}  // namespace

void save_vae(const VaeParams& vae, const std::string& path,
              uint32_t config_hash) {
  save_model(vae.params, vae.config, path, config_hash, "vae");
}

VaeParams load_vae(const std::string& path) {
  NamedTensors ts = load_checkpoint(path);
  if (!has_tensor(ts, "meta/kind_vae")) {
    throw DataError("checkpoint is not an autoencoder: " + path);
  }
  VaeParams vae;
  vae.config = config_from_meta(ts);
  vae.params = strip_meta(std::move(ts), true);
  return vae;
}

void save_inpaint(const InpaintNet& net, const std::string& path,
                  uint32_t config_hash) {
  save_model(net.params, net.config, path, config_hash, "inpaint");
}

InpaintNet load_inpaint(const std::string& path) {
  NamedTensors ts = load_checkpoint(path);
  if (!has_tensor(ts, "meta/kind_inpaint")) {
    throw DataError("checkpoint is not an inpainting model: " + path);
  }
  InpaintNet net;
  net.config = config_from_meta(ts);
  net.params = strip_meta(std::move(ts), true);
  return net;
}

uint32_t checkpoint_config_hash(const std::string& path) {
  NamedTensors ts = load_checkpoint(path);
  const uint32_t hi = uint32_t(get_meta(ts, "config_hash_hi"));
  const uint32_t lo = uint32_t(get_meta(ts, "config_hash_lo"));
  return (hi << 16) | lo;
}

}  // namespace p23d
