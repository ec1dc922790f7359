#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "mlkrim/dataset.hpp"
#include "mlkrim/manifold.hpp"
#include "mlkrim/metrics.hpp"
#include "mlkrim/parallel.hpp"
#include "mlkrim/sampling.hpp"
#include "mlkrim/solver.hpp"

namespace mlkrim::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter hyper(T Hyperparams::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.hp.*field = parse_number<T>(k, v);
  };
}

Setter path(fs::path RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_f", number(&RunConfig::n_f)},
      {"n_p", number(&RunConfig::n_p)},
      {"n_fr", number(&RunConfig::n_fr)},
      {"ring_period", number(&RunConfig::ring_period)},
      {"ring_amplitude", number(&RunConfig::ring_amplitude)},
      {"noise_std", number(&RunConfig::noise_std)},
      {"phantom_seed", number(&RunConfig::phantom_seed)},
      {"mask_kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "cartesian" && v != "radial") {
           throw ConfigError("config key '" + k + "' must be cartesian or radial");
         }
         c.mask_kind = v;
       }},
      {"acceleration", number(&RunConfig::acceleration)},
      {"spokes", number(&RunConfig::spokes)},
      {"upsilon", number(&RunConfig::upsilon)},
      {"mask_seed", number(&RunConfig::mask_seed)},
      {"kspace", path(&RunConfig::kspace)},
      {"mask", path(&RunConfig::mask)},
      {"truth", path(&RunConfig::truth)},
      {"estimate",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.estimates.clear();
         for (const auto& p : split_list(v)) c.estimates.emplace_back(p);
       }},
      {"output_dir", path(&RunConfig::output_dir)},
      {"kernels", number(&RunConfig::kernels)},
      {"depth", number(&RunConfig::depth)},
      {"inner_dims",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.inner_dims.clear();
         for (const auto& p : split_list(v)) c.inner_dims.push_back(parse_number<std::size_t>(k, p));
       }},
      {"landmarks", number(&RunConfig::landmarks)},
      {"lambda1", hyper(&Hyperparams::lambda1)},
      {"lambda2", hyper(&Hyperparams::lambda2)},
      {"lambda3", hyper(&Hyperparams::lambda3)},
      {"lambda4", hyper(&Hyperparams::lambda4)},
      {"tau_x", hyper(&Hyperparams::tau_x)},
      {"tau_z", hyper(&Hyperparams::tau_z)},
      {"tau_a", hyper(&Hyperparams::tau_a)},
      {"tau_b", hyper(&Hyperparams::tau_b)},
      {"gamma0", hyper(&Hyperparams::gamma0)},
      {"zeta", hyper(&Hyperparams::zeta)},
      {"max_outer", hyper(&Hyperparams::max_outer)},
      {"tol_rel", hyper(&Hyperparams::tol_rel)},
      {"b_inner_tol", hyper(&Hyperparams::b_inner_tol)},
      {"b_inner_max", hyper(&Hyperparams::b_inner_max)},
      {"seeds",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seeds.clear();
         for (const auto& p : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(k, p));
         if (c.seeds.empty()) throw ConfigError("config key 'seeds' is empty");
       }},
      {"emit",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.emit.clear();
         for (const auto& p : split_list(v)) {
           if (p != "png" && p != "csv" && p != "trace" && p != "timing") {
             throw ConfigError("config key '" + k + "': unknown artifact '" + p + "'");
           }
           c.emit.insert(p);
         }
       }},
      {"workers", number(&RunConfig::workers)},
  };
  return table;
}

DataDims config_dims(const RunConfig& c) { return DataDims(c.n_f, c.n_p, c.n_fr); }

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError("no " + what + " path configured");
  if (!fs::exists(p)) throw IoError(what + " file " + p.string() + " does not exist");
}

fs::path or_default(const fs::path& p, const fs::path& fallback) { return p.empty() ? fallback : p; }

void prepare_output(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec || !fs::is_directory(c.output_dir)) {
    throw IoError("cannot create output directory " + c.output_dir.string());
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  return os;
}

void write_manifest(const RunConfig& c, const std::string& command,
                    const std::vector<std::string>& extra = {}) {
  auto os = open_out(c.output_dir / ("manifest_" + command + ".txt"));
  os << "# mlkrim " << MLKRIM_VERSION << "\n";
  os << "command = " << command << "\n";
  os << "seeds =";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : " ") << c.seeds[i];
  os << "\n";
  for (const auto& line : extra) os << line << "\n";
  os << "# configuration\n" << c.echo();
}

PhantomSpec phantom_spec(const RunConfig& c) {
  PhantomSpec spec = default_phantom(config_dims(c));
  if (c.ring_period > 0.0) spec.ring.period = c.ring_period;
  if (c.ring_amplitude >= 0.0) spec.ring.amplitude = c.ring_amplitude;
  spec.noise_std = c.noise_std;
  spec.seed = c.phantom_seed;
  return spec;
}

SamplingMask build_mask(const RunConfig& c, const DataDims& dims) {
  if (c.mask_kind == "radial") {
    const std::size_t spokes =
        c.spokes > 0 ? c.spokes : radial_spokes_for_rate(dims, c.acceleration, c.upsilon, c.mask_seed);
    return radial_mask(dims, spokes, c.upsilon, c.mask_seed);
  }
  return cartesian_mask(dims, c.acceleration, c.upsilon, c.mask_seed);
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

}  // namespace

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig c;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    it->second(c, key, value);
    c.entries.emplace_back(key, value);
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read config file " + p.string());
  return parse(in);
}

std::vector<std::size_t> RunConfig::resolved_inner_dims() const {
  if (!inner_dims.empty() || depth <= 1) return inner_dims;
  switch (depth) {
    case 2: return {6};
    case 3: return {2, 6};
    case 4: return {2, 4, 6};
    default: throw ConfigError("depth > 4 needs explicit inner_dims");
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n_f = " << n_f << "\nn_p = " << n_p << "\nn_fr = " << n_fr
     << "\nring_period = " << ring_period << "\nring_amplitude = " << ring_amplitude
     << "\nnoise_std = " << noise_std << "\nphantom_seed = " << phantom_seed
     << "\nmask_kind = " << mask_kind << "\nacceleration = " << acceleration
     << "\nspokes = " << spokes << "\nupsilon = " << upsilon << "\nmask_seed = " << mask_seed
     << "\nkspace = " << kspace.string() << "\nmask = " << mask.string()
     << "\ntruth = " << truth.string() << "\nestimate = ";
  for (std::size_t i = 0; i < estimates.size(); ++i) os << (i ? "," : "") << estimates[i].string();
  os << "\noutput_dir = " << output_dir.string() << "\nkernels = " << kernels
     << "\ndepth = " << depth << "\ninner_dims = ";
  const auto dims = inner_dims;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << "\nlandmarks = " << landmarks << "\nlambda1 = " << hp.lambda1
     << "\nlambda2 = " << hp.lambda2 << "\nlambda3 = " << hp.lambda3
     << "\nlambda4 = " << hp.lambda4 << "\ntau_x = " << hp.tau_x << "\ntau_z = " << hp.tau_z
     << "\ntau_a = " << hp.tau_a << "\ntau_b = " << hp.tau_b << "\ngamma0 = " << hp.gamma0
     << "\nzeta = " << hp.zeta << "\nmax_outer = " << hp.max_outer
     << "\ntol_rel = " << hp.tol_rel << "\nb_inner_tol = " << hp.b_inner_tol
     << "\nb_inner_max = " << hp.b_inner_max << "\nseeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\nemit = ";
  bool first = true;
  for (const auto& e : emit) {
    os << (first ? "" : ",") << e;
    first = false;
  }
  os << "\n";
  return os.str();
}

void cmd_generate(const RunConfig& c, std::ostream& out) {
  const PhantomSpec spec = phantom_spec(c);
  // Validates geometry before anything touches the disk.
  Phantom ph = generate_phantom(spec);
  prepare_output(c);
  save_tensor(c.output_dir / "image.ckt", ph.image);
  save_tensor(c.output_dir / "kspace.ckt", ph.kspace);
  if (c.emit.count("png")) write_png_series(ph.image, c.output_dir / "png", "phantom");
  write_manifest(c, "generate");
  out << "wrote " << (c.output_dir / "image.ckt").string() << " and "
      << (c.output_dir / "kspace.ckt").string() << " (" << spec.dims.n_f << "x" << spec.dims.n_p
      << "x" << spec.dims.n_fr << ")\n";
}

void cmd_mask(const RunConfig& c, std::ostream& out) {
  DataDims dims = config_dims(c);
  if (!c.kspace.empty()) {
    require_file(c.kspace, "k-space");
    dims = load_tensor(c.kspace).dims();
  }
  const SamplingMask mask = build_mask(c, dims);
  prepare_output(c);
  const fs::path dest = or_default(c.mask, c.output_dir / "mask.ckt");
  save_mask(dest, mask);
  std::ostringstream rate;
  rate << std::setprecision(17) << acceleration_rate(mask);
  write_manifest(c, "mask", {"acceleration_rate = " + rate.str()});
  out << "wrote " << dest.string() << "\nacceleration_rate = " << rate.str() << "\n";
}

void cmd_reconstruct(const RunConfig& c, std::ostream& out) {
  const fs::path kpath = or_default(c.kspace, c.output_dir / "kspace.ckt");
  const fs::path mpath = or_default(c.mask, c.output_dir / "mask.ckt");
  require_file(kpath, "k-space");
  require_file(mpath, "mask");
  if (!c.truth.empty()) require_file(c.truth, "truth");

  const ComplexTensor3 kspace = load_tensor(kpath);
  const SamplingMask mask = load_mask(mpath);
  if (!(kspace.dims() == mask.dims())) throw ShapeError("k-space and mask shapes differ");
  const ComplexTensor3 y = apply_sampling(mask, kspace);
  std::optional<ComplexTensor3> truth;
  if (!c.truth.empty()) {
    truth = load_tensor(c.truth);
    if (!(truth->dims() == y.dims())) throw ShapeError("truth and k-space shapes differ");
  }

  ModelConfig model;
  model.m = c.kernels;
  model.q = c.depth;
  model.inner_dims = c.resolved_inner_dims();
  model.n_l = c.landmarks;
  model.dims = y.dims();
  model.validate();

  Hyperparams hp = c.hp;
  const double rms = y.norm() / std::sqrt(static_cast<double>(y.dims().size()));
  if (rms > 0.0) hp.lambda3 *= rms;
  hp.validate();

  if (!mask.navigator_complete(c.upsilon)) {
    throw ConfigError("mask does not fully acquire the navigator band of width " +
                      std::to_string(c.upsilon));
  }
  const LandmarkSet landmarks = select_landmarks(extract_navigator(y, c.upsilon), c.landmarks);
  const KernelDictionary dict = build_dictionary(landmarks, default_specs(landmarks, c.kernels));

  prepare_output(c);
  const RestartSummary summary =
      multi_restart(model, dict, mask, y, hp, c.seeds, truth ? &*truth : nullptr);

  const ComplexTensor3 baseline = zero_filled(mask, y);
  save_tensor(c.output_dir / "zero_filled.ckt", baseline);
  const bool csv = c.emit.count("csv") > 0;
  for (const auto& run : summary.runs) {
    const ComplexTensor3 est = matrix_to_tensor(run.result.state.x, y.dims());
    save_tensor(c.output_dir / ("recon_" + seed_tag(run.seed) + ".ckt"), est);
    if (c.emit.count("trace")) {
      auto os = open_out(c.output_dir / ("trace_" + seed_tag(run.seed) + ".csv"));
      write_trace_csv(os, run.result.trace, c.emit.count("timing") > 0);
    }
    if (c.emit.count("png")) write_png_series(est, c.output_dir / "png", "recon_" + seed_tag(run.seed));
  }
  const auto& best = summary.runs[summary.best];
  save_tensor(c.output_dir / "recon_best.ckt", matrix_to_tensor(best.result.state.x, y.dims()));

  if (csv) {
    auto os = open_out(c.output_dir / "reconstruction.csv");
    os << "seed,iterations,final_objective,best\n" << std::setprecision(17);
    for (std::size_t i = 0; i < summary.runs.size(); ++i) {
      const auto& run = summary.runs[i];
      os << run.seed << ',' << run.result.trace.back().n << ','
         << run.result.trace.back().objective << ',' << (i == summary.best ? 1 : 0) << '\n';
    }
    auto ds = open_out(c.output_dir / "dictionary.csv");
    ds << "kernel,spec\n";
    for (std::size_t m = 0; m < dict.size(); ++m) ds << m << ',' << dict.specs[m].describe() << '\n';
    ds << "landmark_frames";
    for (auto i : landmarks.indices) ds << ',' << i;
    ds << '\n';
    if (truth) {
      auto ms = open_out(c.output_dir / "metrics.csv");
      write_metrics_header(ms);
      write_metrics_row(ms, "zero_filled", evaluate(*truth, baseline));
      for (const auto& run : summary.runs) write_metrics_row(ms, "recon_" + seed_tag(run.seed), *run.metrics);
      write_metrics_row(ms, "mean", *summary.mean);
    }
  }

  const auto pc = parameter_count(model);
  write_manifest(c, "reconstruct",
                 {"best_seed = " + std::to_string(best.seed),
                  "parameters_general = " + std::to_string(pc.general),
                  "parameters_single_layer = " + std::to_string(pc.single_layer)});
  out << "reconstructed " << summary.runs.size() << " run(s); best seed " << best.seed
      << " (objective " << best.result.trace.back().objective << ")\n";
  if (summary.mean) {
    out << "mean NRMSE " << summary.mean->nrmse << ", mean SSIM " << summary.mean->ssim << "\n";
  }
}

void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  require_file(c.truth, "truth");
  std::vector<fs::path> estimates = c.estimates;
  if (estimates.empty()) {
    // Default to whatever reconstruct left in the output directory.
    if (fs::is_directory(c.output_dir)) {
      for (const auto& e : fs::directory_iterator(c.output_dir)) {
        const auto name = e.path().filename().string();
        if (e.path().extension() == ".ckt" && (name.rfind("recon_", 0) == 0 || name == "zero_filled.ckt")) {
          estimates.push_back(e.path());
        }
      }
      std::sort(estimates.begin(), estimates.end());
    }
    if (estimates.empty()) throw ConfigError("no estimate tensors configured or found");
  }
  for (const auto& e : estimates) require_file(e, "estimate");

  const ComplexTensor3 truth = load_tensor(c.truth);
  prepare_output(c);
  auto os = open_out(c.output_dir / "evaluation.csv");
  write_metrics_header(os);
  for (const auto& e : estimates) {
    const ComplexTensor3 est = load_tensor(e);
    if (!(est.dims() == truth.dims())) throw ShapeError("estimate " + e.string() + " shape differs from truth");
    const MetricReport r = evaluate(truth, est);
    write_metrics_row(os, e.stem().string(), r);
    write_metrics_row(out, e.stem().string(), r);
    if (c.emit.count("png")) write_png_series(est, c.output_dir / "png", e.stem().string());
  }
  write_manifest(c, "evaluate");
}

void cmd_report(const RunConfig& c, std::ostream& out) {
  if (!fs::is_directory(c.output_dir)) throw IoError("output directory " + c.output_dir.string() + " does not exist");
  auto dump = [&](const fs::path& p) {
    if (!fs::exists(p)) return;
    std::ifstream in(p);
    out << "== " << p.filename().string() << "\n" << in.rdbuf();
  };
  for (const char* name : {"manifest_reconstruct.txt", "reconstruction.csv", "dictionary.csv",
                           "metrics.csv", "evaluation.csv"}) {
    dump(c.output_dir / name);
  }
  for (std::uint64_t seed : c.seeds) {
    const fs::path p = c.output_dir / ("trace_" + seed_tag(seed) + ".csv");
    if (!fs::exists(p)) continue;
    std::ifstream in(p);
    std::string line, last;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) last = line;
      ++rows;
    }
    out << "== " << p.filename().string() << " (" << (rows > 0 ? rows - 1 : 0)
        << " rows), last: " << last << "\n";
  }
  ModelConfig model;
  model.m = c.kernels;
  model.q = c.depth;
  model.inner_dims = c.resolved_inner_dims();
  model.n_l = c.landmarks;
  model.dims = config_dims(c);
  const auto pc = parameter_count(model);
  out << "== unknowns for configured model: " << pc.general << " (Q=" << c.depth << "), "
      << pc.single_layer << " (Q=1)\n";
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out,
                std::ostream& err) {
  static const std::map<std::string, void (*)(const RunConfig&, std::ostream&)> commands = {
      {"generate", &cmd_generate}, {"mask", &cmd_mask},     {"reconstruct", &cmd_reconstruct},
      {"evaluate", &cmd_evaluate}, {"report", &cmd_report},
  };
  const auto it = commands.find(name);
  if (it == commands.end()) {
    err << "error: unknown command '" << name << "'\n";
    return kConfigError;
  }
  try {
    set_worker_count(cfg.workers);
    it->second(cfg, out);
    return kOk;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  }
}

}  // namespace mlkrim::cli
