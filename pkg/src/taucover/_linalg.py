"""Small exact-rational matrix helpers (lists of lists of Fractions)."""
from fractions import Fraction


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(a, b):
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0]))]
            for i in range(len(a))]


def matvec(a, x):
    return [sum((a[i][k] * x[k] for k in range(len(x))), Fraction(0)) for i in range(len(a))]


def inverse(a):
    """Gauss-Jordan inverse; returns None when singular."""
    n = len(a)
    m = [list(map(Fraction, row)) + identity(n)[i] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [row[n:] for row in m]


def transpose(a):
    return [list(r) for r in zip(*a)]
