#include "qising/cli.hpp"

int main(int argc, char** argv) { return qising::cli_main(argc, argv); }
