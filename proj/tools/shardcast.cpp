// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html
//
// Experiment runner: simulate | loss-sweep | grad-check | codec-bench |
// trace-tools | media-tools. Configs are JSON with unknown keys rejected;
// every run writes a manifest with the config hash and seed so outputs can
// be regenerated exactly.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shardcast/experiment.hpp"
#include "shardcast/losslab.hpp"
#include "shardcast/metrics.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace shardcast;

namespace {

constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.count(it.key()) == 0) {
      throw ConfigError("unknown config key \"" + (path.empty() ? it.key() : path + "." + it.key()) +
                        "\"");
    }
  }
}

Scheme parse_scheme(const std::string& s) {
  if (s == "shard") return Scheme::kShard;
  if (s == "fec") return Scheme::kFec;
  if (s == "svc") return Scheme::kSvc;
  if (s == "skip") return Scheme::kSkip;
  throw ConfigError("unknown scheme \"" + s + "\" (shard|fec|svc|skip)");
}

std::vector<Scheme> parse_schemes(const json& cfg) {
  std::vector<Scheme> out;
  if (cfg.contains("scheme")) {
    out.push_back(parse_scheme(cfg.at("scheme").get<std::string>()));
  } else if (cfg.contains("schemes")) {
    for (const auto& s : cfg.at("schemes")) out.push_back(parse_scheme(s.get<std::string>()));
  } else {
    out.push_back(Scheme::kShard);
  }
  if (out.empty()) throw ConfigError("no schemes selected");
  return out;
}

SynthPattern parse_pattern(const std::string& s) {
  if (s == "gradient") return SynthPattern::kMovingGradient;
  if (s == "checkerboard") return SynthPattern::kCheckerboard;
  if (s == "noise") return SynthPattern::kTexturedNoise;
  throw ConfigError("unknown pattern \"" + s + "\" (gradient|checkerboard|noise)");
}

VideoSource parse_source(const json& cfg, uint32_t* frame_count) {
  check_keys(cfg, {"synthetic", "y4m"}, "source");
  if (cfg.contains("y4m")) {
    auto src = VideoSource::from_y4m(cfg.at("y4m").get<std::string>());
    *frame_count = src.frame_count();
    return src;
  }
  if (!cfg.contains("synthetic")) throw ConfigError("source needs \"synthetic\" or \"y4m\"");
  const json& s = cfg.at("synthetic");
  check_keys(s, {"pattern", "width", "height", "mono", "vx", "vy", "seed", "frames"},
             "source.synthetic");
  SyntheticSpec spec;
  spec.pattern = parse_pattern(s.value("pattern", std::string("checkerboard")));
  spec.width = s.value("width", 640);
  spec.height = s.value("height", 352);
  spec.mono = s.value("mono", true);
  spec.vx = s.value("vx", 2);
  spec.vy = s.value("vy", 0);
  spec.seed = s.value("seed", 1);
  uint32_t frames = s.value("frames", 250u);
  *frame_count = frames;
  return VideoSource::synthetic(spec, frames);
}

BandwidthTrace parse_trace(const json& cfg) {
  if (cfg.is_string()) return load_trace(cfg.get<std::string>());
  check_keys(cfg, {"constant_mbps", "duration_s", "steps"}, "trace");
  double duration = cfg.value("duration_s", 20.0);
  if (cfg.contains("constant_mbps")) {
    return BandwidthTrace::constant(
        static_cast<int64_t>(cfg.at("constant_mbps").get<double>() * 1e6), duration);
  }
  if (cfg.contains("steps")) {
    BandwidthTrace t;
    auto steps = cfg.at("steps");
    size_t n = static_cast<size_t>(duration / 0.1 + 1e-9) + 1;
    for (size_t k = 0; k < n; ++k) {
      double tt = 0.1 * static_cast<double>(k);
      double mbps = 0;
      for (const auto& s : steps) {
        if (tt >= s.at(0).get<double>()) mbps = s.at(1).get<double>();
      }
      t.sample_bps.push_back(static_cast<int64_t>(mbps * 1e6));
    }
    return t;
  }
  throw ConfigError("trace needs a path, constant_mbps, or steps");
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kShard: return "shard";
    case Scheme::kFec: return "fec";
    case Scheme::kSvc: return "svc";
    case Scheme::kSkip: return "skip";
  }
  return "?";
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return json::parse(in, nullptr, true, true);  // allow comments
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

void write_manifest(const fs::path& out_dir, const json& config, uint64_t seed,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = seed;
  std::string canonical = config.dump();
  manifest["config"] = config;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical);
  manifest["config_hash"] = hash.str();
  manifest["outputs"] = outputs;
  std::ofstream out(out_dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

int cmd_simulate(const std::string& config_path, const std::string& out_override,
                 int64_t seed_override, const std::vector<std::string>& scheme_override) {
  json cfg = load_config(config_path);
  check_keys(cfg,
             {"scheme", "schemes", "source", "trace", "net", "transport", "controller",
              "duration_s", "seed", "ssim", "out"},
             "");

  auto schemes = scheme_override.empty() ? parse_schemes(cfg) : [&] {
    std::vector<Scheme> v;
    for (const auto& s : scheme_override) v.push_back(parse_scheme(s));
    return v;
  }();

  uint32_t frames = 0;
  if (!cfg.contains("source")) throw ConfigError("missing \"source\"");
  VideoSource source = parse_source(cfg.at("source"), &frames);
  if (!cfg.contains("trace")) throw ConfigError("missing \"trace\"");
  BandwidthTrace trace = parse_trace(cfg.at("trace"));

  SimConfig sim;
  sim.net.trace = trace;
  if (cfg.contains("net")) {
    const json& n = cfg.at("net");
    check_keys(n, {"one_way_delay_ms", "queue_capacity", "mtu", "iid_loss"}, "net");
    sim.net.one_way_delay_us = static_cast<int64_t>(n.value("one_way_delay_ms", 100.0) * 1000);
    sim.net.queue_capacity = n.value("queue_capacity", 25);
    sim.net.mtu = n.value("mtu", kDefaultMtu);
    sim.net.iid_loss = n.value("iid_loss", 0.0);
  }
  if (cfg.contains("transport")) {
    const json& t = cfg.at("transport");
    check_keys(t,
               {"fps", "ipatch_k", "iframe_interval", "cache_window", "decode_timeout_ms",
                "svc_layers", "search_range"},
               "transport");
    sim.transport.fps = t.value("fps", 25);
    sim.transport.ipatch_k = t.value("ipatch_k", 30);
    sim.transport.iframe_interval = t.value("iframe_interval", 1000u);
    sim.transport.cache_window = t.value("cache_window", 32u);
    sim.transport.decode_timeout_us =
        static_cast<int64_t>(t.value("decode_timeout_ms", 400.0) * 1000);
    sim.transport.svc_layers = t.value("svc_layers", 4);
    sim.transport.codec.search_range = t.value("search_range", 8);
  }
  sim.transport.mtu = sim.net.mtu;
  std::string controller = cfg.value("controller", std::string("oracle"));
  if (controller == "oracle") {
    sim.controller = ControllerKind::kOracleTrace;
  } else if (controller == "aimd") {
    sim.controller = ControllerKind::kDelayAimd;
  } else {
    throw ConfigError("unknown controller \"" + controller + "\" (oracle|aimd)");
  }
  sim.duration_s = cfg.value("duration_s", 10.0);
  sim.seed = cfg.value("seed", 1u);
  if (seed_override >= 0) sim.seed = static_cast<uint64_t>(seed_override);
  sim.compute_ssim = cfg.value("ssim", true);
  sim.net.seed = sim.seed;

  fs::path out_dir = out_override.empty() ? fs::path(cfg.value("out", std::string("out"))) : fs::path(out_override);
  fs::create_directories(out_dir);

  std::vector<std::string> outputs;
  std::vector<fs::path> written;
  try {
    std::ofstream reports(out_dir / "reports.csv");
    reports << QualityReport::csv_header() << "\n";
    written.push_back(out_dir / "reports.csv");
    for (Scheme scheme : schemes) {
      sim.transport.scheme = scheme;
      SessionTimeline timeline = run_session(source, sim);
      QualityReport report = make_report(timeline);

      auto base = scheme_name(scheme);
      std::ofstream fcsv(out_dir / (base + "_frames.csv"));
      timeline.write_frames_csv(fcsv);
      written.push_back(out_dir / (base + "_frames.csv"));
      std::ofstream ejsonl(out_dir / (base + "_events.jsonl"));
      timeline.write_events_jsonl(ejsonl);
      written.push_back(out_dir / (base + "_events.jsonl"));
      std::ofstream rjson(out_dir / (base + "_report.json"));
      rjson << report.to_json() << "\n";
      written.push_back(out_dir / (base + "_report.json"));
      reports << report.to_csv_row() << "\n";

      outputs.push_back(base + "_frames.csv");
      outputs.push_back(base + "_events.jsonl");
      outputs.push_back(base + "_report.json");
      std::cout << base << ": " << report.to_json() << "\n";
    }
    outputs.push_back("reports.csv");
  } catch (...) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw;
  }
  write_manifest(out_dir, cfg, sim.seed, outputs);
  return 0;
}

int cmd_loss_sweep(const std::string& config_path, const std::string& out_override,
                   int64_t seed_override, const std::vector<std::string>& scheme_override) {
  json cfg = load_config(config_path);
  check_keys(cfg,
             {"scheme", "schemes", "source", "frames", "rates", "seeds", "frame_budget_bytes",
              "seed", "ssim", "out", "ipatch_k"},
             "");
  auto schemes = scheme_override.empty() ? parse_schemes(cfg) : [&] {
    std::vector<Scheme> v;
    for (const auto& s : scheme_override) v.push_back(parse_scheme(s));
    return v;
  }();

  uint32_t source_frames = 0;
  if (!cfg.contains("source")) throw ConfigError("missing \"source\"");
  VideoSource source = parse_source(cfg.at("source"), &source_frames);
  uint32_t frames = cfg.value("frames", source_frames);

  SweepConfig sweep;
  if (cfg.contains("rates")) {
    const json& r = cfg.at("rates");
    if (r.is_array()) {
      for (const auto& v : r) sweep.rates.push_back(v.get<double>());
    } else {
      check_keys(r, {"from", "to", "step"}, "rates");
      for (double x = r.value("from", 0.0); x <= r.value("to", 0.8) + 1e-9;
           x += r.value("step", 0.1)) {
        sweep.rates.push_back(x);
      }
    }
  } else {
    sweep.rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  }
  sweep.seeds = cfg.value("seeds", 20);
  sweep.root_seed = cfg.value("seed", 1u);
  if (seed_override >= 0) sweep.root_seed = static_cast<uint64_t>(seed_override);
  sweep.frame_budget_bytes = cfg.value("frame_budget_bytes", 15000u);
  sweep.compute_ssim = cfg.value("ssim", false);
  sweep.ipatch_k = cfg.value("ipatch_k", 30);

  fs::path out_dir = out_override.empty() ? fs::path(cfg.value("out", std::string("out"))) : fs::path(out_override);
  fs::create_directories(out_dir);

  std::vector<std::string> outputs;
  for (Scheme scheme : schemes) {
    auto result = run_loss_sweep(scheme, source, frames, sweep);
    auto name = "sweep_" + result.scheme + ".csv";
    std::ofstream out(out_dir / name);
    out << "rate,mean_psnr_db,mean_ssim_db,rendered_frac,undecodable\n";
    for (const auto& p : result.points) {
      out << p.rate << "," << p.mean_psnr_db << "," << p.mean_ssim_db << "," << p.rendered_frac
          << "," << (p.undecodable ? 1 : 0) << "\n";
      std::cout << result.scheme << " rate=" << p.rate << " psnr="
                << (p.undecodable ? std::string("undecodable") : std::to_string(p.mean_psnr_db))
                << "\n";
    }
    outputs.push_back(name);
  }
  write_manifest(out_dir, cfg, sweep.root_seed, outputs);
  return 0;
}

int cmd_grad_check(uint64_t seed, const std::string& out_path) {
  auto report = run_grad_check(seed);
  json j;
  j["relative_error"] = report.relative_error;
  j["slope"] = report.slope;
  j["sample_sizes"] = report.sample_sizes;
  j["errors"] = report.errors;
  j["pass"] = report.pass;
  std::string text = j.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << text << "\n";
  }
  std::cout << text << "\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << ": estimator error "
            << report.relative_error * 100 << "% (<=5%), slope " << report.slope
            << " (-0.5 +- 0.1)\n";
  return report.pass ? 0 : 1;
}

int cmd_codec_bench(int width, int height, uint32_t frames, const std::string& out_path) {
  SyntheticSpec spec;
  spec.pattern = SynthPattern::kTexturedNoise;
  spec.width = width;
  spec.height = height;
  spec.vx = 2;
  spec.vy = 1;
  spec.seed = 7;

  Frame ref = synth_frame(spec, 0);
  auto q = QualityLevel::rung(8);
  auto start = std::chrono::steady_clock::now();
  auto enc0 = encode_i(ref, q);
  Frame recon = decode_frame_full(enc0.frame, nullptr);

  double encode_s = 0, decode_s = 0;
  for (uint32_t i = 1; i <= frames; ++i) {
    Frame cur = synth_frame(spec, i);
    auto t0 = std::chrono::steady_clock::now();
    auto enc = encode_p(cur, recon, q);
    auto t1 = std::chrono::steady_clock::now();
    Frame out = decode_frame_full(enc.frame, &recon);
    auto t2 = std::chrono::steady_clock::now();
    encode_s += std::chrono::duration<double>(t1 - t0).count();
    decode_s += std::chrono::duration<double>(t2 - t1).count();
    recon = std::move(out);
  }
  (void)start;

  // rung table on one P-frame
  Frame cur = synth_frame(spec, 1);
  auto enc = encode_p(cur, decode_frame_full(enc0.frame, nullptr), QualityLevel::rung(10));
  std::ostringstream table;
  table << "rung,step,coded_bytes,psnr_db\n";
  Frame base = decode_frame_full(enc0.frame, nullptr);
  for (int r = 0; r < kNumRungs; ++r) {
    auto re = requantize_residual(enc.frame, enc.raw_residual_q8, QualityLevel::rung(r));
    size_t sz = detail::estimate_tensor_wire_bytes(re.residual, kDefaultMtu) +
                detail::estimate_tensor_wire_bytes(re.mv, kDefaultMtu);
    Frame out = decode_frame_full(re, &base);
    table << r << "," << (QualityLevel::rung(r).residual_step_q8 / 256.0) << "," << sz << ","
          << psnr(cur, out) << "\n";
  }

  json j;
  j["width"] = width;
  j["height"] = height;
  j["frames"] = frames;
  j["encode_fps"] = frames / encode_s;
  j["decode_fps"] = frames / decode_s;
  std::cout << j.dump(2) << "\n" << table.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shardcast: loss-resilient video transport laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path;
  int64_t seed_override = -1;
  std::vector<std::string> scheme_override;

  auto* sim = app.add_subcommand("simulate", "trace-driven packet-level session");
  sim->add_option("--config", config_path, "JSON experiment config")->required();
  sim->add_option("--out", out_dir, "output directory (overrides config)");
  sim->add_option("--seed", seed_override, "root seed (overrides config)");
  sim->add_option("--scheme", scheme_override, "scheme override (repeatable)");

  auto* sweep = app.add_subcommand("loss-sweep", "quality versus packet loss at fixed bitrate");
  sweep->add_option("--config", config_path, "JSON sweep config")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides config)");
  sweep->add_option("--seed", seed_override, "root seed (overrides config)");
  sweep->add_option("--scheme", scheme_override, "scheme override (repeatable)");

  uint64_t gc_seed = 7;
  auto* grad = app.add_subcommand("grad-check", "masked-loss gradient estimator checks");
  grad->add_option("--seed", gc_seed, "seed");
  grad->add_option("--out", out_path, "JSON report path");

  int bw = 1280, bh = 720;
  uint32_t bframes = 30;
  auto* bench = app.add_subcommand("codec-bench", "encode/decode throughput and rung table");
  bench->add_option("--width", bw, "frame width");
  bench->add_option("--height", bh, "frame height");
  bench->add_option("--frames", bframes, "frames to time");
  bench->add_option("--out", out_path, "rung table CSV path");

  auto* tt = app.add_subcommand("trace-tools", "bandwidth trace utilities");
  tt->require_subcommand(1);
  std::string tt_in, tt_out;
  double tt_mbps = 8.0, tt_duration = 20.0;
  auto* tt_validate = tt->add_subcommand("validate", "parse and sanity-check a trace");
  tt_validate->add_option("input", tt_in)->required();
  auto* tt_resample = tt->add_subcommand("resample", "resample onto the 0.1 s grid");
  tt_resample->add_option("input", tt_in)->required();
  tt_resample->add_option("output", tt_out)->required();
  auto* tt_constant = tt->add_subcommand("constant", "emit a constant-rate trace");
  tt_constant->add_option("output", tt_out)->required();
  tt_constant->add_option("--mbps", tt_mbps);
  tt_constant->add_option("--duration", tt_duration);

  auto* mt = app.add_subcommand("media-tools", "video file utilities");
  mt->require_subcommand(1);
  std::string mt_in, mt_out;
  auto* mt_pad = mt->add_subcommand("pad", "pad a Y4M to multiple-of-16 dimensions");
  mt_pad->add_option("input", mt_in)->required();
  mt_pad->add_option("output", mt_out)->required();
  auto* mt_probe = mt->add_subcommand("probe", "print Y4M stream parameters");
  mt_probe->add_option("input", mt_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed_override, scheme_override);
    if (sweep->parsed()) return cmd_loss_sweep(config_path, out_dir, seed_override, scheme_override);
    if (grad->parsed()) return cmd_grad_check(gc_seed, out_path);
    if (bench->parsed()) return cmd_codec_bench(bw, bh, bframes, out_path);
    if (tt->parsed()) {
      if (tt_validate->parsed()) {
        auto t = load_trace(tt_in);
        std::cout << "OK: " << t.sample_bps.size() << " grid samples, "
                  << (static_cast<double>(t.duration_us()) / 1e6) << " s\n";
        return 0;
      }
      if (tt_resample->parsed()) {
        save_trace(tt_out, load_trace(tt_in));
        std::cout << "wrote " << tt_out << "\n";
        return 0;
      }
      if (tt_constant->parsed()) {
        save_trace(tt_out,
                   BandwidthTrace::constant(static_cast<int64_t>(tt_mbps * 1e6), tt_duration));
        std::cout << "wrote " << tt_out << "\n";
        return 0;
      }
    }
    if (mt->parsed()) {
      if (mt_pad->parsed()) {
        pad_y4m_file(mt_in, mt_out);
        std::cout << "wrote " << mt_out << "\n";
        return 0;
      }
      if (mt_probe->parsed()) {
        auto seq = load_y4m(mt_in);
        std::cout << seq.width << "x" << seq.height << " " << (seq.mono ? "mono" : "420") << " "
                  << seq.fps_num << "/" << seq.fps_den << " fps, " << seq.frames.size()
                  << " frames\n";
        return 0;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
