#include "rearsim/cli.hpp"

int main(int argc, char** argv) { return rearsim::cli::run(argc, argv); }
