#include <vector>

#include "lpnsr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lpnsr::run_cli(args);
}
