#include "novact/cli.hpp"

int main(int argc, char** argv) { return novact::cli::run(argc, argv); }
