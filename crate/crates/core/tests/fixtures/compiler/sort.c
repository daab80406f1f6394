void sort(int *a, unsigned n) {
    for (unsigned i = 1; i < n; i++) {
        int v = a[i];
        unsigned j = i;
        while (j > 0 && a[j - 1] > v) {
            a[j] = a[j - 1];
            j--;
        }
        a[j] = v;
    }
}

int values[10] = {9, -4, 7, 0, 3, 3, -8, 12, 1, 5};

int main(void) {
    sort(values, 10);
    return values[0] * values[9];
}
