// spikedec command-line tool.
//
// Exit codes: 0 success, 2 invalid config or argument, 3 malformed file,
// 4 file not readable/writable, 5 shape mismatch, 1 unexpected failure.
// Command-line syntax errors use CLI11's own codes (nonzero).

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikedec/spikedec.hpp"

using namespace spikedec;
using nlohmann::json;

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void row(const std::string& key, const std::string& value) {
  std::cout << std::left << std::setw(22) << key << value << "\n";
}

bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

SpikeStream read_spikes(const std::string& path, double bin_ms) {
  std::size_t saturated = 0;
  auto s = io::load_spike_input(path, bin_ms, &saturated);
  if (saturated > 0)
    std::cerr << "warning: " << saturated << " cell(s) in '" << path << "' exceeded 255 and were saturated\n";
  return s;
}

void check_input(const NetworkConfig& cfg, const SpikeStream& s, const std::string& path) {
  if (s.channels != cfg.input_channels && s.steps() > 0)
    throw ShapeError("input '" + path + "' has " + std::to_string(s.channels) + " channels, config expects " +
                     std::to_string(cfg.input_channels));
  if (s.bin_ms != cfg.step_ms)
    std::cerr << "warning: input bin width " << s.bin_ms << " ms differs from config step " << cfg.step_ms << " ms\n";
}

json plan_json(const bufcalc::BufferPlan& p, const bufcalc::RealtimeVerdict& v) {
  return {{"receptive_field", p.receptive_field},
          {"r_list", p.r_list},
          {"b_update_list", p.b_update_list},
          {"b_keypoints", p.b_keypoints},
          {"b_new_data_update", p.b_new_data_update},
          {"b_new_data", p.b_new_data},
          {"interpolation_factor", p.interpolation_factor},
          {"latency_steps", p.latency_steps},
          {"latency_ms", p.latency_ms},
          {"execution_rate_hz", p.execution_rate_hz},
          {"realtime_capable", v.capable},
          {"reasons", v.reasons}};
}

void print_equivalence(const EquivalenceReport& rep) {
  if (rep.empty) {
    std::cout << "equivalence: empty overlap (input shorter than the receptive field)\n";
    return;
  }
  std::cout << "equivalence: keypoints_compared=" << rep.keypoints_compared
            << " samples_compared=" << rep.samples_compared << " max_abs_diff=" << num(rep.max_abs_diff)
            << " max_rel_diff=" << num(rep.max_rel_diff) << " exact=" << (rep.exact ? "yes" : "no") << "\n";
}

struct ModelArgs {
  std::string config;
  std::string weights;
};

std::shared_ptr<const NetworkModel> load(const ModelArgs& a) {
  const auto cfg = load_config(a.config);
  return std::make_shared<const NetworkModel>(io::load_model(cfg, a.weights));
}

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--config,-c", a.config, "Network config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--weights,-w", a.weights, "Weight file (SNNW)")->required()->check(CLI::ExistingFile);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"spikedec: streaming inference and analysis for hybrid conv/LIF spike decoders"};
  app.require_subcommand(1);

  // analyze
  std::string an_config;
  std::string an_format = "text";
  std::vector<std::size_t> sweep_kernels;
  std::size_t sweep_layers = 2;
  auto* analyze = app.add_subcommand("analyze", "Buffer sizes, latency, execution rate and realtime verdict");
  analyze->add_option("--config,-c", an_config, "Network config (JSON)")->check(CLI::ExistingFile);
  analyze->add_option("--format", an_format, "text or json")->check(CLI::IsMember({"text", "json"}));
  analyze->add_option("--sweep", sweep_kernels, "First-layer kernel sizes for a latency sweep")->delimiter(',');
  analyze->add_option("--sweep-layers", sweep_layers, "Conv layers in the sweep")->check(CLI::Range(1, 8));

  // init-weights
  std::string iw_config, iw_output;
  std::uint64_t iw_seed = 1;
  double iw_gain = 1.0;
  auto* init = app.add_subcommand("init-weights", "Write seeded random weights for a config");
  init->add_option("--config,-c", iw_config, "Network config (JSON)")->required()->check(CLI::ExistingFile);
  init->add_option("--output,-o", iw_output, "Weight file to write")->required();
  init->add_option("--seed", iw_seed, "Random seed");
  init->add_option("--gain", iw_gain, "Scale of the uniform init relative to 1/sqrt(fan_in)");

  // gen-synth
  synth::SynthSpec ss;
  std::string gs_output, gs_truth;
  auto* gen = app.add_subcommand("gen-synth", "Generate synthetic spikes and the latent velocity");
  gen->add_option("--channels", ss.channels, "Input channels")->check(CLI::PositiveNumber);
  gen->add_option("--steps", ss.duration_steps, "Number of bins");
  gen->add_option("--rate-scale", ss.rate_scale, "Expected spikes per bin at unit drive");
  gen->add_option("--smoothness-hz", ss.smoothness_hz, "Latent low-pass cutoff (Hz)");
  gen->add_option("--bin-ms", ss.bin_ms, "Bin width (ms)");
  gen->add_option("--seed", ss.seed, "Random seed");
  gen->add_option("--output,-o", gs_output, "Spike file (.snns, or .csv)")->required();
  gen->add_option("--truth", gs_truth, "Ground-truth trajectory CSV");

  // run-offline / run-stream
  ModelArgs ro_model, rs_model;
  std::string ro_input, ro_output, rs_input, rs_output;
  double ro_bin = 4.0, rs_bin = 4.0;
  bool ro_equiv = false, rs_equiv = false;
  auto* offline = app.add_subcommand("run-offline", "Whole-sequence inference");
  add_model_options(offline, ro_model);
  offline->add_option("--input,-i", ro_input, "Spike file (.snns or .csv)")->required()->check(CLI::ExistingFile);
  offline->add_option("--output,-o", ro_output, "Trajectory CSV to write")->required();
  offline->add_option("--bin-ms", ro_bin, "Bin width for CSV input (ms)");
  offline->add_flag("--report-equivalence", ro_equiv, "Compare with streaming inference");
  auto* stream = app.add_subcommand("run-stream", "Bin-by-bin streaming inference");
  add_model_options(stream, rs_model);
  stream->add_option("--input,-i", rs_input, "Spike file (.snns or .csv)")->required()->check(CLI::ExistingFile);
  stream->add_option("--output,-o", rs_output, "Trajectory CSV to write")->required();
  stream->add_option("--bin-ms", rs_bin, "Bin width for CSV input (ms)");
  stream->add_flag("--report-equivalence", rs_equiv, "Compare with offline inference");

  // bench
  ModelArgs b_model;
  std::vector<std::string> b_inputs, b_truths;
  double b_bin = 4.0;
  auto* bench = app.add_subcommand("bench", "Resource report and R^2 per input file");
  add_model_options(bench, b_model);
  bench->add_option("--input,-i", b_inputs, "Spike files")->required()->check(CLI::ExistingFile);
  bench->add_option("--truth,-t", b_truths, "Ground-truth trajectory CSVs, one per input")->check(CLI::ExistingFile);
  bench->add_option("--bin-ms", b_bin, "Bin width for CSV input (ms)");

  // quantize
  ModelArgs q_model;
  std::string q_wfmt = "1-1-7", q_bfmt = "1-1-4", q_out_weights, q_out_config;
  auto* quant = app.add_subcommand("quantize", "Convert float weights to fixed point");
  add_model_options(quant, q_model);
  quant->add_option("--weight-format", q_wfmt, "Weight format s-i-f");
  quant->add_option("--buffer-format", q_bfmt, "Buffer format s-i-f, or float");
  quant->add_option("--output-weights", q_out_weights, "Quantized weight file")->required();
  quant->add_option("--output-config", q_out_config, "Config for the quantized model")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      if (an_config.empty() && sweep_kernels.empty()) throw Error("analyze needs --config and/or --sweep");
      json out;
      if (!an_config.empty()) {
        const auto cfg = load_config(an_config);
        const auto plan = bufcalc::make_plan(cfg);
        const auto verdict = bufcalc::realtime_check(plan);
        out = plan_json(plan, verdict);
        if (an_format == "text") {
          std::string stack;
          for (std::size_t l = 0; l < plan.spec.num_layers(); ++l)
            stack += std::string(l ? " " : "") + (l % 2 == 0 ? "conv" : "pool") + std::to_string(plan.spec.kernel(l)) +
                     "/s" + std::to_string(plan.spec.stride(l));
          row("stack", stack);
          row("receptive field", std::to_string(plan.receptive_field));
          row("r list", join(plan.r_list));
          row("b_update list", join(plan.b_update_list));
          row("b_keypoints", join(plan.b_keypoints));
          row("b_new_data_update", join(plan.b_new_data_update));
          row("b_new_data", join(plan.b_new_data));
          row("interpolation factor", std::to_string(plan.interpolation_factor));
          row("latency", std::to_string(plan.latency_steps) + " steps, " + num(plan.latency_ms) + " ms");
          row("execution rate", num(plan.execution_rate_hz) + " Hz");
          row("verdict", verdict.capable ? "realtime-capable" : "not realtime-capable");
          for (const auto& r : verdict.reasons) row("  reason", r);
        }
      }
      if (!sweep_kernels.empty()) {
        const double step = an_config.empty() ? 4.0 : load_config(an_config).step_ms;
        const auto rows = bufcalc::latency_vs_kernel_sweep(sweep_kernels, sweep_layers, step);
        json sweep = json::array();
        if (an_format == "text") std::cout << "\nkernel  receptive_field  latency_ms\n";
        for (const auto& r : rows) {
          sweep.push_back({{"kernel", r.first_kernel}, {"receptive_field", r.receptive_field}, {"latency_ms", r.latency_ms}});
          if (an_format == "text")
            std::cout << std::left << std::setw(8) << r.first_kernel << std::setw(17) << r.receptive_field
                      << num(r.latency_ms) << "\n";
        }
        out["sweep"] = sweep;
      }
      if (an_format == "json") std::cout << out.dump(2) << "\n";
    } else if (init->parsed()) {
      const auto cfg = load_config(iw_config);
      const auto m = NetworkModel::random(cfg, iw_seed, iw_gain);
      io::save_weights(m, iw_output);
      std::cout << "wrote " << m.parameter_count() << " parameters to " << iw_output << "\n";
    } else if (gen->parsed()) {
      const auto data = synth::gen_synth(ss);
      if (has_csv_extension(gs_output)) {
        std::ofstream out(gs_output);
        if (!out) throw IoError("cannot open '" + gs_output + "' for writing");
        io::write_spike_csv(data.spikes, out);
      } else {
        io::save_spikes(data.spikes, gs_output);
      }
      if (!gs_truth.empty()) io::save_trajectory_csv(data.velocity, gs_truth);
      std::cout << "wrote " << data.spikes.steps() << " bins x " << data.spikes.channels << " channels to "
                << gs_output << "\n";
    } else if (offline->parsed()) {
      const auto model = load(ro_model);
      const auto spikes = read_spikes(ro_input, ro_bin);
      check_input(model->config(), spikes, ro_input);
      const auto res = offline_forward(*model, spikes);
      io::save_trajectory_csv(res.trajectory, ro_output);
      std::cout << "keypoints " << res.keypoints.size() << ", samples " << res.trajectory.size() << "\n";
      if (res.saturations > 0) std::cerr << "warning: " << res.saturations << " fixed-point saturation(s)\n";
      if (ro_equiv) print_equivalence(equivalence_report(model, spikes));
    } else if (stream->parsed()) {
      const auto model = load(rs_model);
      const auto spikes = read_spikes(rs_input, rs_bin);
      check_input(model->config(), spikes, rs_input);
      StreamEngine engine(model);
      const auto res = run_stream(engine, spikes);
      io::save_trajectory_csv(res.trajectory, rs_output);
      std::cout << "keypoints " << res.keypoints.size() << ", samples " << res.trajectory.size() << "\n";
      const auto& t = res.timing;
      std::cerr << "push latency (us): p50 " << num(t.p50_us) << "  p90 " << num(t.p90_us) << "  p99 "
                << num(t.p99_us) << "  max " << num(t.max_us) << "  mean " << num(t.mean_us) << "  over " << t.pushes
                << " pushes\n";
      if (engine.saturations() > 0) std::cerr << "warning: " << engine.saturations() << " fixed-point saturation(s)\n";
      if (rs_equiv) print_equivalence(equivalence_report(model, spikes));
    } else if (bench->parsed()) {
      if (!b_truths.empty() && b_truths.size() != b_inputs.size())
        throw Error("bench: got " + std::to_string(b_truths.size()) + " --truth files for " +
                    std::to_string(b_inputs.size()) + " inputs");
      const auto model = load(b_model);
      std::vector<double> scores;
      json files = json::array();
      for (std::size_t i = 0; i < b_inputs.size(); ++i) {
        const auto spikes = read_spikes(b_inputs[i], b_bin);
        check_input(model->config(), spikes, b_inputs[i]);
        const auto r = metrics::resource_report(*model, spikes);
        json j = {{"file", b_inputs[i]},
                  {"footprint_bytes", r.footprint_bytes},
                  {"footprint_nonzero_bytes", r.footprint_nonzero_bytes},
                  {"macs_per_inference_step", r.macs_per_inference_step},
                  {"acs_per_inference_step", r.acs_per_inference_step},
                  {"macs_per_keypoint", r.macs_per_keypoint},
                  {"acs_per_keypoint", r.acs_per_keypoint},
                  {"connection_sparsity", r.connection_sparsity},
                  {"activation_sparsity", r.activation_sparsity},
                  {"weight_reg", r.weight_reg},
                  {"spike_reg", r.spike_reg},
                  {"op_counting_convention", metrics::kOpCountingConvention}};
        std::cout << "file " << b_inputs[i] << "\n";
        row("  footprint", std::to_string(r.footprint_bytes) + " B (" + std::to_string(r.footprint_nonzero_bytes) +
                               " B nonzero)");
        row("  MACs / step", num(r.macs_per_inference_step));
        row("  ACs / step", num(r.acs_per_inference_step));
        row("  MACs / keypoint", num(r.macs_per_keypoint));
        row("  ACs / keypoint", num(r.acs_per_keypoint));
        row("  conn. sparsity", num(r.connection_sparsity));
        row("  act. sparsity", num(r.activation_sparsity));
        if (!b_truths.empty()) {
          const auto pred = offline_forward(*model, spikes).trajectory;
          const double r2 = metrics::r2_score(pred, io::load_trajectory_csv(b_truths[i]));
          scores.push_back(r2);
          j["r2"] = r2;
          row("  R^2", num(r2));
        }
        files.push_back(j);
      }
      json summary = {{"files", files}};
      if (!scores.empty()) {
        const auto agg = metrics::aggregate(scores);
        summary["r2_mean"] = agg.mean;
        summary["r2_std"] = agg.stddev;
        row("R^2 mean (std)", num(agg.mean) + " (" + num(agg.stddev) + ")");
      }
      std::cout << summary.dump() << "\n";
    } else if (quant->parsed()) {
      auto cfg = load_config(q_model.config);
      if (cfg.weight_format)
        throw Error("quantize: config '" + q_model.config + "' already declares fixed-point weights (" +
                    fxp::to_string(cfg.weight_format) + ")");
      auto model = io::load_model(cfg, q_model.weights);
      const auto before = metrics::footprint(model);
      const auto sat = model.quantize_weights(fxp::Format::parse(q_wfmt));
      model.set_buffer_format(fxp::parse_optional(q_bfmt));
      const auto after = metrics::footprint(model);
      io::save_weights(model, q_out_weights);
      save_config(model.config(), q_out_config);
      row("weight format", q_wfmt);
      row("buffer format", q_bfmt);
      row("saturated weights", std::to_string(sat.count));
      row("footprint", std::to_string(before.bytes) + " B -> " + std::to_string(after.bytes) + " B");
      row("nonzero footprint", std::to_string(before.nonzero_bytes) + " B -> " + std::to_string(after.nonzero_bytes) + " B");
      row("connection sparsity", num(metrics::connection_sparsity(model)));
    }
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 5;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
