int first() {
    int secret = 7;
    return secret;
}
int second() {
    return secret;
}
