#include "fairreg/cli.hpp"

int main(int argc, char** argv) {
  return fairreg::run_cli({argv + 1, argv + argc});
}
