#include <iostream>

#include "demo_store.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: collagen-demo-store <dir>\n";
        return 2;
    }
    std::cout << collagen::demo::write_demo_store(argv[1]).string() << "\n";
    return 0;
}
