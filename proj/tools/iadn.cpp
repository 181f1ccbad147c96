#include "iadn/cli/cli.hpp"
#include "iadn/numerics/allocator.hpp"

int main(int argc, char** argv) {
  iadn::tune_allocator();
  return iadn::run_cli(argc, argv);
}
