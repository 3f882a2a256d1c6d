#include "cli.hpp"

int main(int argc, char** argv) { return screenaudit::cli::run(argc, argv); }
