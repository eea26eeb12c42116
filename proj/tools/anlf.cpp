// anlf: train, forecast, verify and synthesize data from the command line.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anlf/cli.hpp"

namespace {

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const anlf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return anlf::exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return anlf::kExitInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based neural load forecasting"};
  app.set_version_flag("--version", std::string(anlf::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a model from a run configuration");
  train->add_option("--config", config_path, "Run configuration file (key = value)")->required();
  bool synthetic = false;
  std::vector<std::string> sets;
  train->add_flag("--synthetic", synthetic, "Train on the seeded synthetic series instead of CSV inputs");
  train->add_option("--set", sets, "Override one config entry, KEY=VALUE (repeatable)");

  std::string checkpoint, data;
  anlf::ForecastOptions forecast_opt;
  auto* forecast = app.add_subcommand("forecast", "Forecast every complete day of a CSV with a trained model");
  forecast->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  forecast->add_option("--data", data, "CSV with timestamp,load,temperature")->required();
  forecast->add_flag("--dump-attention", forecast_opt.dump_attention, "Write alpha.csv, beta.csv and gamma.csv");
  forecast->add_option("--holidays", forecast_opt.holidays, "Holiday calendar overriding the checkpoint's");
  forecast->add_option("--out", forecast_opt.out_dir, "Output directory")->capture_default_str();

  std::string fault = "none";
  auto* verify = app.add_subcommand("verify", "Run the built-in oracle suite");
  verify->add_option("--inject-fault", fault, "Negate one gradient rule to exercise the suite")
      ->check(CLI::IsMember({"none", "matmul", "sigmoid", "tanh", "relu", "add", "hadamard", "softmax", "concat"}));

  std::size_t days = 0;
  std::uint64_t seed = 0;
  std::string out, holidays_out;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic load series");
  synth->add_option("--days", days, "Number of days")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Random seed")->required();
  synth->add_option("--out", out, "Output CSV")->required();
  synth->add_option("--holidays-out", holidays_out, "Also write the matching holiday calendar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? anlf::kExitOk : anlf::kExitInternal;
  }

  if (*train) {
    return guarded([&] {
      anlf::ConfigOverrides overrides;
      if (synthetic) overrides.emplace_back("data.synthetic", "true");
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw anlf::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        overrides.emplace_back(std::string(anlf::trim(kv.substr(0, eq))), std::string(anlf::trim(kv.substr(eq + 1))));
      }
      anlf::cmd_train(config_path, std::cout, overrides);
      return anlf::kExitOk;
    });
  }
  if (*forecast) {
    return guarded([&] {
      anlf::cmd_forecast(checkpoint, data, forecast_opt, std::cout);
      return anlf::kExitOk;
    });
  }
  if (*verify) {
    return guarded([&] {
      const auto rule = fault == "none" ? anlf::GradRule::none : *anlf::parse_grad_rule(fault);
      return anlf::cmd_verify(std::cout, rule) ? anlf::kExitOk : anlf::kExitVerification;
    });
  }
  return guarded([&] {
    anlf::cmd_synth(days, seed, out, holidays_out);
    return anlf::kExitOk;
  });
}
