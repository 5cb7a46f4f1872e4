#include "cli.hpp"

int main(int argc, char** argv) { return wmcm::cli::run_cli(argc, argv); }
