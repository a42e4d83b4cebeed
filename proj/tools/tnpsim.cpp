#include "tnp/cli.hpp"

int main(int argc, char** argv) { return tnp::cli_main(argc, argv); }
