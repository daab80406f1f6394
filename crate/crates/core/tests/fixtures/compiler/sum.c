int data[8] = {5, 3, 9, 1, 7, 2, 8, 4};

int sum(int *a, int n) {
    int s = 0;
    for (int i = 0; i < n; i++)
        s += a[i];
    return s;
}

int main(void) {
    return sum(data, 8);
}
