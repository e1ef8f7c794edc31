#include "routekg/cli/app.hpp"

int main(int argc, char** argv) { return routekg::cli::run(argc, argv); }
