// dnls: command-line front end. Exit codes: 0 ok, 1 other failure,
// 2 configuration, 3 numerical instability, 4 negative verdict under --strict.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "dnls/app.hpp"
#include "dnls/grid.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Damped variable-coefficient cubic NLS simulator and verification workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dnls::dnls_version);

  dnls::CliOptions opts;
  std::string out, resume, manifest;
  int threads = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "run configuration file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides [run] output)");
    sub->add_flag("--strict", opts.strict, "exit 4 on a negative verdict");
    sub->add_flag("--quiet", opts.quiet, "suppress progress and summary output");
    sub->add_option("--threads", threads, "FFT threads (default: DNLS_THREADS or 1)");
  };

  auto* simulate = app.add_subcommand("simulate", "advance the equation and record every observable");
  add_common(simulate, true);
  simulate->add_option("--resume", resume, "continue from a snapshot file")->check(CLI::ExistingFile);

  auto* rays = app.add_subcommand("rays", "classify a ray ensemble against the damping region");
  add_common(rays, true);

  auto* geometry = app.add_subcommand("check-geometry", "validate coefficients and the control condition");
  add_common(geometry, true);

  auto* scatter = app.add_subcommand("scatter", "Cauchy scan of free pullbacks from a simulate run");
  add_common(scatter, false);
  scatter->add_option("--manifest", manifest, "manifest.json of a simulate run")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dnls::exit_config;
  }

  if (!out.empty()) opts.out = out;
  if (!resume.empty()) opts.resume = resume;
  if (!manifest.empty()) opts.manifest = manifest;
  if (threads > 0) dnls::set_fft_threads(threads);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return dnls::run_subcommand(name, opts);
  } catch (const std::exception& e) {
    std::cerr << "dnls " << name << ": " << e.what() << "\n";
    return dnls::exit_code_for(e);
  }
}
