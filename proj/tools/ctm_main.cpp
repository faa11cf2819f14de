#include <cstdio>

int main() {
    std::printf("ctm: placeholder\n");
    return 0;
}
