#include <string>
#include <vector>

#include "carclust/cli.hpp"

int main(int argc, char** argv) {
    return carclust::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
