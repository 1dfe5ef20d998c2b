int main() {
    return incompatible_mode;
}
