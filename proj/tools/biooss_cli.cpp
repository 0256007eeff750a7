// Command-line entry point; all behavior lives in the library's run_cli.
#include "biooss/cli.hpp"

int main(int argc, char** argv) { return biooss::run_cli(argc, argv); }
