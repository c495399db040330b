#include "partmix/cli.hpp"

int main(int argc, char** argv) { return partmix::cli::run(argc, argv); }
