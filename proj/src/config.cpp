#include "p23d/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "p23d/error.hpp"

namespace p23d {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    throw UsageError("config key '" + key + "': bad number '" + value + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    throw UsageError("config key '" + key + "': bad integer '" + value + "'");
  }
}

}  // namespace

void Config::validate() const {
  if (n < 2 || r < 2 || n % r != 0) {
    throw UsageError("config: n must be >= 2 and divisible by r (n=" +
                     std::to_string(n) + ", r=" + std::to_string(r) + ")");
  }
  if (inpaint_steps < 0 || inpaint_steps > steps) {
    throw UsageError("config: inpaint_steps must be in [0, steps]");
  }
  if (steps < 1) throw UsageError("config: steps must be >= 1");
  if (tau_fraction < 0) throw UsageError("config: tau_fraction must be >= 0");
  if (fscore_threshold <= 0)
    throw UsageError("config: fscore_threshold must be > 0");
  if (chamfer_mode != "mean" && chamfer_mode != "sum") {
    throw UsageError("config: chamfer_mode must be 'mean' or 'sum'");
  }
  if (threads < 1) throw UsageError("config: threads must be >= 1");
  if (batch < 1 || vae_batch < 1) throw UsageError("config: batch must be >= 1");
  if (surface_samples < 1)
    throw UsageError("config: surface_samples must be >= 1");
}

uint32_t Config::model_hash() const {
  std::ostringstream os;
  os << "n=" << n << ";r=" << r << ";c_s=" << c_s << ";c_m=" << c_m
     << ";vae_hidden=" << vae_hidden << ";width=" << width
     << ";blocks=" << blocks << ";time_embed=" << time_embed
     << ";cond_dim=" << cond_dim << ";tau_fraction=" << fmt(tau_fraction)
     << ";train_views=" << train_views << ";image_size=" << image_size
     << ";surface_samples=" << surface_samples;
  return fnv1a(os.str());
}

std::string Config::to_string() const {
  std::ostringstream os;
  os << "batch=" << batch << "\n"
     << "beta=" << fmt(beta) << "\n"
     << "blocks=" << blocks << "\n"
     << "c_m=" << c_m << "\n"
     << "c_s=" << c_s << "\n"
     << "chamfer_mode=" << chamfer_mode << "\n"
     << "chamfer_squared=" << chamfer_squared << "\n"
     << "cond_dim=" << cond_dim << "\n"
     << "decode_threshold=" << fmt(decode_threshold) << "\n"
     << "fscore_threshold=" << fmt(fscore_threshold) << "\n"
     << "image_size=" << image_size << "\n"
     << "inpaint_steps=" << inpaint_steps << "\n"
     << "iterations=" << iterations << "\n"
     << "lr=" << fmt(lr) << "\n"
     << "mask_dropout=" << fmt(mask_dropout) << "\n"
     << "n=" << n << "\n"
     << "r=" << r << "\n"
     << "reanchor=" << reanchor << "\n"
     << "repair_k=" << repair_k << "\n"
     << "repair_strength=" << fmt(repair_strength) << "\n"
     << "ring_pitch=" << fmt(ring_pitch) << "\n"
     << "ring_radius=" << fmt(ring_radius) << "\n"
     << "ring_views=" << ring_views << "\n"
     << "seed=" << seed << "\n"
     << "steps=" << steps << "\n"
     << "surface_samples=" << surface_samples << "\n"
     << "tau_fraction=" << fmt(tau_fraction) << "\n"
     << "threads=" << threads << "\n"
     << "time_embed=" << time_embed << "\n"
     << "train_views=" << train_views << "\n"
     << "vae_batch=" << vae_batch << "\n"
     << "vae_hidden=" << vae_hidden << "\n"
     << "vae_iterations=" << vae_iterations << "\n"
     << "vae_lr=" << fmt(vae_lr) << "\n"
     << "vae_target_iou=" << fmt(vae_target_iou) << "\n"
     << "variational=" << variational << "\n"
     << "width=" << width << "\n";
  return os.str();
}

void apply_key_value(Config& c, const std::string& key,
                     const std::string& value) {
  if (key == "n") c.n = int(parse_int(key, value));
  else if (key == "r") c.r = int(parse_int(key, value));
  else if (key == "c_s") c.c_s = int(parse_int(key, value));
  else if (key == "c_m") c.c_m = int(parse_int(key, value));
  else if (key == "vae_hidden") c.vae_hidden = int(parse_int(key, value));
  else if (key == "width") c.width = int(parse_int(key, value));
  else if (key == "blocks") c.blocks = int(parse_int(key, value));
  else if (key == "time_embed") c.time_embed = int(parse_int(key, value));
  else if (key == "cond_dim") c.cond_dim = int(parse_int(key, value));
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "batch") c.batch = int(parse_int(key, value));
  else if (key == "iterations") c.iterations = int(parse_int(key, value));
  else if (key == "vae_lr") c.vae_lr = parse_double(key, value);
  else if (key == "vae_batch") c.vae_batch = int(parse_int(key, value));
  else if (key == "vae_iterations")
    c.vae_iterations = int(parse_int(key, value));
  else if (key == "vae_target_iou") c.vae_target_iou = parse_double(key, value);
  else if (key == "beta") c.beta = parse_double(key, value);
  else if (key == "variational") c.variational = int(parse_int(key, value));
  else if (key == "seed") c.seed = uint64_t(parse_int(key, value));
  else if (key == "mask_dropout") c.mask_dropout = parse_double(key, value);
  else if (key == "steps") c.steps = int(parse_int(key, value));
  else if (key == "inpaint_steps") c.inpaint_steps = int(parse_int(key, value));
  else if (key == "repair_k") c.repair_k = int(parse_int(key, value));
  else if (key == "repair_strength")
    c.repair_strength = parse_double(key, value);
  else if (key == "decode_threshold")
    c.decode_threshold = parse_double(key, value);
  else if (key == "reanchor") c.reanchor = int(parse_int(key, value));
  else if (key == "tau_fraction") c.tau_fraction = parse_double(key, value);
  else if (key == "train_views") c.train_views = int(parse_int(key, value));
  else if (key == "image_size") c.image_size = int(parse_int(key, value));
  else if (key == "surface_samples")
    c.surface_samples = parse_int(key, value);
  else if (key == "ring_views") c.ring_views = int(parse_int(key, value));
  else if (key == "ring_pitch") c.ring_pitch = parse_double(key, value);
  else if (key == "ring_radius") c.ring_radius = parse_double(key, value);
  else if (key == "fscore_threshold")
    c.fscore_threshold = parse_double(key, value);
  else if (key == "chamfer_mode") c.chamfer_mode = value;
  else if (key == "chamfer_squared")
    c.chamfer_squared = int(parse_int(key, value));
  else if (key == "threads") c.threads = int(parse_int(key, value));
  else throw UsageError("unknown config key: " + key);
}

Config load_config(const std::string& path, Config base) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    // trim
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    apply_key_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

uint32_t fnv1a(const std::string& text) {
  uint32_t h = 2166136261u;
  for (unsigned char c : text) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace p23d
