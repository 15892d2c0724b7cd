// Writes a clustered synthetic behavior log as TSV, for trying the toolkit
// without an external dataset.
#include <iostream>

#include "CLI11.hpp"
#include "croloss/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a clustered synthetic behavior log (TSV)"};
  croloss::SynthConfig cfg;
  std::string out = "synth.tsv";
  app.add_option("--users", cfg.users, "number of users");
  app.add_option("--items", cfg.items, "catalog size");
  app.add_option("--clusters", cfg.clusters, "latent clusters (must divide items)");
  app.add_option("--min-events", cfg.min_events, "min events per user");
  app.add_option("--max-events", cfg.max_events, "max events per user");
  app.add_option("--in-cluster-prob", cfg.in_cluster_prob,
                 "probability an event stays in the user's home cluster");
  app.add_option("--pop-exponent", cfg.popularity_exponent,
                 "within-cluster popularity decay exponent");
  app.add_option("--seed", cfg.seed, "generator seed");
  app.add_option("--out", out, "output path");
  CLI11_PARSE(app, argc, argv);

  try {
    const croloss::BehaviorLog log = croloss::make_clustered_log(cfg);
    croloss::write_tsv(log, out);
    std::cout << "wrote " << log.events.size() << " events (" << log.num_users()
              << " users, " << log.num_items() << " items) to " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
