"""Prime-field arithmetic, polynomials, rational interpolation and root finding.

Field elements are plain ints in ``[0, p)``. The library-wide modulus is the
Mersenne prime ``2^61 - 1``, large enough to hold reduced 64-bit identifiers
while keeping products inside native big-int fast paths. Every function
accepts an explicit ``p`` so small prime fields can be used in tests.

Polynomials are coefficient lists, lowest degree first, with no trailing
zeros; the zero polynomial is the empty list.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import InterpolationError, NotSplittableError

MODULUS = (1 << 61) - 1  # 2305843009213693951, prime


def ff_add(a: int, b: int, p: int = MODULUS) -> int:
    return (a + b) % p


def ff_sub(a: int, b: int, p: int = MODULUS) -> int:
    return (a - b) % p


def ff_mul(a: int, b: int, p: int = MODULUS) -> int:
    return (a * b) % p


def ff_inv(a: int, p: int = MODULUS) -> int:
    if a % p == 0:
        raise ZeroDivisionError("inverse of 0 is undefined in GF(p)")
    return pow(a, p - 2, p)


def char_poly_eval(elements, z: int, p: int = MODULUS) -> int:
    """Evaluate the characteristic polynomial of a set at ``z``.

    Returns the product of ``(z - x)`` over all elements, 1 for the empty
    set. Elements are reduced mod ``p`` implicitly by the arithmetic.
    """
    acc = 1
    for x in elements:
        acc = acc * (z - x) % p
    return acc


# ---------------------------------------------------------------------------
# polynomial helpers


def poly_trim(coeffs: list[int]) -> list[int]:
    n = len(coeffs)
    while n and coeffs[n - 1] == 0:
        n -= 1
    return coeffs[:n]


def poly_deg(coeffs: list[int]) -> int:
    """Degree of a trimmed polynomial; -1 for the zero polynomial."""
    return len(coeffs) - 1


def poly_add(a: list[int], b: list[int], p: int = MODULUS) -> list[int]:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % p
    return poly_trim(out)


def poly_sub(a: list[int], b: list[int], p: int = MODULUS) -> list[int]:
    out = list(a) + [0] * (len(b) - len(a))
    for i, c in enumerate(b):
        out[i] = (out[i] - c) % p
    return poly_trim(out)


def poly_scale(a: list[int], s: int, p: int = MODULUS) -> list[int]:
    s %= p
    if s == 0:
        return []
    return poly_trim([c * s % p for c in a])


def poly_mul(a: list[int], b: list[int], p: int = MODULUS) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] = (out[i + j] + ai * bj) % p
    return poly_trim(out)


def poly_eval(coeffs: list[int], x: int, p: int = MODULUS) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def poly_divmod(a: list[int], b: list[int], p: int = MODULUS):
    """Quotient and remainder of ``a / b``; ``b`` must be nonzero."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(a)
    db = len(b) - 1
    if len(rem) - 1 < db:
        return [], poly_trim(rem)
    inv_lead = ff_inv(b[-1], p)
    quot = [0] * (len(rem) - db)
    for i in range(len(rem) - 1, db - 1, -1):
        c = rem[i]
        if c == 0:
            continue
        q = c * inv_lead % p
        quot[i - db] = q
        for j in range(db + 1):
            rem[i - db + j] = (rem[i - db + j] - q * b[j]) % p
    return poly_trim(quot), poly_trim(rem)


def poly_mod(a: list[int], b: list[int], p: int = MODULUS) -> list[int]:
    return poly_divmod(a, b, p)[1]


def poly_monic(a: list[int], p: int = MODULUS) -> list[int]:
    a = poly_trim(a)
    if not a or a[-1] == 1:
        return a
    return poly_scale(a, ff_inv(a[-1], p), p)


def poly_gcd(a: list[int], b: list[int], p: int = MODULUS) -> list[int]:
    """Monic greatest common divisor."""
    a, b = poly_trim(a), poly_trim(b)
    while b:
        a, b = b, poly_mod(a, b, p)
    return poly_monic(a, p)


def poly_powmod(base: list[int], exp: int, mod: list[int], p: int = MODULUS) -> list[int]:
    """Compute ``base^exp`` modulo the polynomial ``mod``."""
    result = poly_mod([1], mod, p)
    base = poly_mod(base, mod, p)
    while exp > 0:
        if exp & 1:
            result = poly_mod(poly_mul(result, base, p), mod, p)
        exp >>= 1
        if exp:
            base = poly_mod(poly_mul(base, base, p), mod, p)
    return result


def poly_from_roots(roots, p: int = MODULUS) -> list[int]:
    """Expand the monic polynomial with the given roots."""
    coeffs = [1]
    for r in roots:
        r %= p
        coeffs = [0] + coeffs
        for i in range(len(coeffs) - 1):
            coeffs[i] = (coeffs[i] - r * coeffs[i + 1]) % p
    return coeffs


# ---------------------------------------------------------------------------
# rational interpolation


@dataclass
class RationalFn:
    """Reduced rational function; denominator is monic and nonzero."""

    numerator: list[int]
    denominator: list[int]

    def eval_pair(self, z: int, p: int = MODULUS):
        """Evaluate numerator and denominator at ``z`` without dividing."""
        return poly_eval(self.numerator, z, p), poly_eval(self.denominator, z, p)


def _nullspace_vector(rows: list[list[int]], ncols: int, p: int):
    """One nonzero nullspace vector of the row-major matrix, or None.

    Forward elimination with first-nonzero pivoting, deterministic in the
    input row order; exact field arithmetic requires no pivot strategy.
    """
    pivots = []  # (row, col) with row normalized to a leading 1
    r = 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, len(rows)):
            if rows[i][c]:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = pow(rows[r][c], p - 2, p)
        rows[r] = [v * inv % p for v in rows[r]]
        for i in range(r + 1, len(rows)):
            f = rows[i][c]
            if f:
                ri, rr = rows[i], rows[r]
                rows[i] = [(ri[j] - f * rr[j]) % p for j in range(ncols)]
        pivots.append((r, c))
        r += 1
        if r == len(rows):
            break
    pivot_cols = {c for _, c in pivots}
    free = next((c for c in range(ncols) if c not in pivot_cols), None)
    if free is None:
        return None
    vec = [0] * ncols
    vec[free] = 1
    for row, col in reversed(pivots):
        acc = 0
        rr = rows[row]
        for j in range(col + 1, ncols):
            if vec[j]:
                acc = (acc + rr[j] * vec[j]) % p
        vec[col] = (-acc) % p
    return vec


def rational_interpolate(points, deg_num: int, deg_den: int, p: int = MODULUS) -> RationalFn:
    """Fit ``P/Q`` with ``deg P <= deg_num``, ``deg Q <= deg_den`` through points.

    ``points`` is a sequence of ``(z, value)`` pairs with distinct ``z``.
    Solves the homogeneous system ``P(z_i) - value_i * Q(z_i) = 0`` and
    reduces the result, returning ``P/Q`` with a monic denominator.
    """
    points = list(points)
    need = deg_num + deg_den + 1
    if len(points) < need:
        raise InterpolationError(
            f"need at least {need} points for degrees {deg_num}/{deg_den}, got {len(points)}"
        )
    zs = [z for z, _ in points]
    if len(set(zs)) != len(zs):
        raise InterpolationError("sample points must be distinct")

    ncols = deg_num + deg_den + 2
    rows = []
    for z, v in points:
        z %= p
        v %= p
        row = [0] * ncols
        zp = 1
        for j in range(deg_num + 1):
            row[j] = zp
            zp = zp * z % p
        zp = p - v if v else 0
        for j in range(deg_den + 1):
            row[deg_num + 1 + j] = zp
            zp = zp * z % p
        rows.append(row)

    vec = _nullspace_vector(rows, ncols, p)
    if vec is None:
        raise InterpolationError("singular system admits only the trivial solution")
    num = poly_trim(vec[: deg_num + 1])
    den = poly_trim(vec[deg_num + 1 :])
    if not den:
        raise InterpolationError("denominator vanished; sample values inconsistent")
    g = poly_gcd(num, den, p) if num else []
    if g and poly_deg(g) > 0:
        num = poly_divmod(num, g, p)[0]
        den = poly_divmod(den, g, p)[0]
    inv_lead = ff_inv(den[-1], p)
    return RationalFn(poly_scale(num, inv_lead, p), poly_scale(den, inv_lead, p))


# ---------------------------------------------------------------------------
# root extraction


def _quadratic_roots(f: list[int], p: int):
    # Monic x^2 + bx + c with p = 3 (mod 4); the discriminant of a
    # split squarefree quadratic is a nonzero square.
    b, c = f[1], f[0]
    disc = (b * b - 4 * c) % p
    s = pow(disc, (p + 1) // 4, p)
    if s * s % p != disc:
        raise NotSplittableError("quadratic discriminant is a non-residue")
    inv2 = ff_inv(2, p)
    return {(-b + s) * inv2 % p, (-b - s) * inv2 % p}


def find_roots(poly: list[int], p: int = MODULUS) -> set[int]:
    """All roots of ``poly`` iff it splits into distinct linear factors.

    Probabilistic equal-degree splitting (gcd with
    ``(x + delta)^((p-1)/2) - 1`` for seeded random ``delta``) recurses to
    linear factors; degree-2 pieces take the direct square-root shortcut
    when ``p = 3 (mod 4)``. The result is verified by re-expanding the
    product of ``(x - r)`` terms, which rejects any input that does not
    split into distinct linear factors.
    """
    f = poly_monic(poly_trim(list(poly)), p)
    if not f:
        raise ValueError("zero polynomial has no defined root set")
    if poly_deg(f) == 0:
        return set()

    rng = random.Random(0x9C0FFEE ^ len(f))
    roots: set[int] = set()
    stack = [f]
    half = (p - 1) // 2
    while stack:
        g = stack.pop()
        d = poly_deg(g)
        if d == 1:
            roots.add((-g[0]) % p)
            continue
        if d == 2 and p % 4 == 3:
            roots |= _quadratic_roots(g, p)
            continue
        for _ in range(32):
            delta = rng.randrange(p)
            h = poly_powmod([delta, 1], half, g, p)
            h = poly_sub(h, [1], p)
            w = poly_gcd(h, g, p)
            if 0 < poly_deg(w) < d:
                stack.append(w)
                stack.append(poly_divmod(g, w, p)[0])
                break
        else:
            # an irreducible factor never splits; linear-splittable inputs
            # fail 32 fair coin flips with probability ~2^-32
            raise NotSplittableError("equal-degree splitting failed to converge")

    if poly_from_roots(sorted(roots), p) != f:
        raise NotSplittableError("extracted roots do not reproduce the polynomial")
    return roots
