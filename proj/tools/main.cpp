#include "cli.hpp"

int main(int argc, char** argv) { return pa::cli::run_cli(argc, argv); }
