#include "mafl/cli.hpp"

int main(int argc, char** argv) { return mafl::run_cli(argc, argv); }
