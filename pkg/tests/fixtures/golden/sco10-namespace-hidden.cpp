namespace vault {
int hidden = 1;
}
int main() {
    return hidden;
}
