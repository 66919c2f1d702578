#include "ssrk/cli.hpp"

int main(int argc, char** argv) { return ssrk::cli::run_cli(argc, argv); }
