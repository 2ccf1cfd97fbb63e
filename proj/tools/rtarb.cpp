#include "rtarb/cli.hpp"

int main(int argc, char **argv) { return rtarb::cli::run(argc, argv); }
