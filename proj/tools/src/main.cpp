#include "rsddp_cli/cli.hpp"

int main(int argc, char** argv) { return rsddp::cli::cli_main(argc, argv); }
