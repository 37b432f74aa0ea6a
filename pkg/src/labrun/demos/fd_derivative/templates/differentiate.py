"""Central finite differences on a cubic, the smallest end-to-end example.

p(x) = x**3 - 2*x**2 + x - 1 has the exact derivative 3*x**2 - 4*x + 1, so
every approximation error is known in closed form. Halving DELTA_X should
shrink the error by about a factor of four (second-order scheme), which
makes this study a quick self-check for the whole toolchain.
"""

DELTA_X = float("{{DELTA_X}}")
X_MIN = float("{{X_MIN}}")
X_MAX = float("{{X_MAX}}")


def p(x: float) -> float:
    return x**3 - 2.0 * x**2 + x - 1.0


def dp_exact(x: float) -> float:
    return 3.0 * x**2 - 4.0 * x + 1.0


def main() -> None:
    steps = round((X_MAX - X_MIN) / DELTA_X)
    rows = []
    for i in range(1, steps):
        x = X_MIN + i * DELTA_X
        fd = (p(x + DELTA_X) - p(x - DELTA_X)) / (2.0 * DELTA_X)
        exact = dp_exact(x)
        rows.append((x, fd, exact, abs(fd - exact)))
    with open("derivative.csv", "w", encoding="ascii") as fh:
        fh.write("X,FD_DERIVATIVE,EXACT_DERIVATIVE,ABS_ERROR\n")
        for x, fd, exact, err in rows:
            fh.write(f"{x!r},{fd!r},{exact!r},{err!r}\n")
    # stand-in for bulky per-case primary data; kept out of archives
    with open("samples.raw", "wb") as fh:
        fh.write(b"\x00" * 2048)


if __name__ == "__main__":
    main()
