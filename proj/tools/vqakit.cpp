#include "vqakit/cli.hpp"

int main(int argc, char** argv) { return vqakit::run(argc, argv); }
