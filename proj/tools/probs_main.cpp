#include "probs/cli.hpp"

int main(int argc, char** argv) { return probs::cli::run_cli(argc, argv); }
