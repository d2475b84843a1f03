#include <iostream>
#include <string>
#include <vector>

#include "csctm/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return csctm::run_cli(args, std::cout, std::cerr);
}
