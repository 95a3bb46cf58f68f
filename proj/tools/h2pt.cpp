#include "h2pt/cli_io.hpp"

int main(int argc, char** argv) { return h2pt::cli::run(argc, argv); }
