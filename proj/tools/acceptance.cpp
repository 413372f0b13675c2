#include <string>
#include <vector>

#include "cli.hpp"

// Runs every suite and prints one line per acceptance criterion; flags as for `oscillab all`.
int main(int argc, char** argv) {
  std::vector<std::string> args{argc > 0 ? argv[0] : "oscillab_acceptance", "all"};
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  std::vector<char*> ptrs;
  for (auto& a : args) ptrs.push_back(a.data());
  return oscillab::cli::run(static_cast<int>(ptrs.size()), ptrs.data());
}
