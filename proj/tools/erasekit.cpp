#include "erasekit/cli.hpp"

int main(int argc, char** argv) { return erasekit::cli::run(argc, argv); }
