// Writes the two-clique toy dataset used by the CLI tests.
//   make_toy_dataset <out_dir> [--no-labels]

#include <cstring>
#include <iostream>

#include "mgccn/dataset_io.hpp"
#include "toy_graphs.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_toy_dataset <out_dir> [--no-labels]\n";
    return 1;
  }
  auto g = mgccn::toy::two_clique_graph();
  if (argc > 2 && std::strcmp(argv[2], "--no-labels") == 0) g.labels.reset();
  mgccn::save_multilayer_graph(g, argv[1]);
  return 0;
}
