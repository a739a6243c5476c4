#include "cli/commands.hpp"

int main(int argc, char** argv) { return svcflm::cli::run(argc, argv); }
