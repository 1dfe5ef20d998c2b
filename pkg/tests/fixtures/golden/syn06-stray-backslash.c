int main(void) {
    int x\y = 4;
    return x;
}
