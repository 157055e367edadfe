"""Random expression generator shared by the calculus tests."""
import random

VARS = ("x", "y", "z")


def random_expr(rng: random.Random, depth: int = 4, allow_pow: bool = True) -> str:
    """Smooth expression text on all of R^3 (no log/sqrt/division hazards).

    Powers are not nested, which keeps derivatives moderate for finite
    differences.
    """
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.6:
            return rng.choice(VARS)
        if r < 0.9:
            return repr(round(rng.uniform(-3, 3), 3))
        return "pi"
    kinds = ["add", "sub", "mul", "div", "neg", "call", "call"] + (["pow"] if allow_pow else [])
    kind = rng.choice(kinds)
    a = random_expr(rng, depth - 1, allow_pow and kind != "pow")
    if kind == "neg":
        return f"-({a})"
    if kind == "call":
        f = rng.choice(["sin", "cos", "exp"])
        if f == "exp":
            return f"exp(sin({a}))"
        return f"{f}({a})"
    if kind == "pow":
        return f"({a})^{rng.randint(0, 3)}"
    b = random_expr(rng, depth - 1, allow_pow)
    if kind == "div":
        return f"({a})/(2 + sin({b}))"
    sym = {"add": "+", "sub": "-", "mul": "*"}[kind]
    return f"({a}) {sym} ({b})"


def corpus(n: int = 200, seed: int = 12345) -> list[str]:
    rng = random.Random(seed)
    return [random_expr(rng) for _ in range(n)]
