int main() {
    return undeclared_sum;
}
