#include <iostream>

#include "CLI11.hpp"
#include "lrm/job.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lrm: index, search, train, fuse, rerank, eval and profile retrieval jobs"};
  app.require_subcommand(1, 1);

  lrm::cli::Options options;
  long long k = 0;
  unsigned long long seed = 0;

  for (const char* name : {"index", "search", "train", "fuse", "rerank", "eval", "profile"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "job configuration file")->required();
    sub->add_option("--output", options.output_path, "output path");
    sub->add_option("--k", k, "result depth");
    sub->add_option("--seed", seed, "random seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lrm::cli::kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--k") > 0) options.k = k;
  if (sub->count("--seed") > 0) options.seed = seed;
  return lrm::cli::run_command(sub->get_name(), options);
}
