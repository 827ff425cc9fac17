#include <string>
#include <vector>

#include "cfinsler/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cfinsler::run_cli(std::move(args));
}
