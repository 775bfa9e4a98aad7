#include "longrec/experiment_config.hpp"

int main(int argc, char** argv) {
    return longrec::cli_main(argc, argv);
}
