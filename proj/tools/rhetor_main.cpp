#include <string>
#include <vector>

#include "rhetor/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return rhetor::cli::run(std::move(args));
}
