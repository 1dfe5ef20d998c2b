void h(badtype t) {
}
