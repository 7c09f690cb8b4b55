#include "wtlab/app/cli.hpp"

int main(int argc, char** argv) { return wtlab::app::run(argc, argv); }
