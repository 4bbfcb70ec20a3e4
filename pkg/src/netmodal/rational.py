"""Complex-coefficient polynomials, rational functions and matrices of them.

These are the carriers for every transfer-function quantity in the package:
network admittance matrices, whole-system impedance matrices and their
determinants.  All values are immutable and all operations are pure, so they
can be shared and evaluated concurrently without locking.

Polynomials are stored monic-scaled (ascending coefficients whose leading
term is exactly 1) together with a separate complex gain.  Keeping the gain
out of the coefficient array limits the dynamic range that builds up when
determinants of larger matrices are expanded.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

# Addition drops leading coefficients this small relative to what the two
# addends carried at the same position: they are cancellation residue, not
# signal.  A global relative cutoff would be wrong here, because coefficient
# arrays legitimately span many orders of magnitude once root magnitudes
# spread (products of large branch poles).
ADD_TRIM_REL = 1e-9
# Two roots closer than CANCEL_REL * (1 + |root|) are treated as common.
CANCEL_REL = 1e-9
# Matching tolerance when cancelling known denominator factors out of
# determinant/adjugate numerators.  Roots of those high-degree polynomials
# carry errors around 1e-8, so the generic 1e-9 tolerance would miss true
# cancellations; 1e-6 matches the near-repeated-mode threshold and a true
# mode would have to sit within the factor root's own error to be stolen.
DET_CANCEL_REL = 1e-6
# Imaginary parts below this (relative to the largest coefficient) are
# dropped when a polynomial is rebuilt from a conjugate-closed root set.
REALIFY_REL = 1e-12

__all__ = [
    "Polynomial",
    "RationalFunction",
    "RationalMatrix",
    "poly_roots",
    "rat_det",
    "rat_derivative",
]


class Polynomial:
    """Univariate polynomial with complex coefficients, ascending degree.

    A polynomial constructed from its roots remembers them (``factors``);
    evaluation then runs in product form, whose relative accuracy does not
    degrade with the coefficient dynamic range.  Products of factored
    polynomials stay factored; sums and derivatives fall back to plain
    coefficient form.
    """

    __slots__ = ("gain", "monic", "factors")

    def __init__(self, coeffs: Iterable[complex]):
        c = np.atleast_1d(np.asarray(list(coeffs) if not hasattr(coeffs, "__len__") else coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        self.factors = None
        nonzero = np.nonzero(c)[0]
        if nonzero.size == 0:
            self.gain = 0j
            self.monic = np.array([1.0 + 0j])
            return
        c = c[: nonzero[-1] + 1]
        gain = complex(c[-1])
        monic = c / gain
        monic[-1] = 1.0 + 0j
        self.gain = gain
        self.monic = monic

    @classmethod
    def _raw(cls, gain: complex, monic: np.ndarray, factors=None) -> "Polynomial":
        out = object.__new__(cls)
        out.gain = complex(gain)
        out.monic = monic
        out.factors = factors
        return out

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls._raw(0j, np.array([1.0 + 0j]))

    @classmethod
    def one(cls) -> "Polynomial":
        return cls._raw(1.0 + 0j, np.array([1.0 + 0j]), factors=())

    @classmethod
    def variable(cls) -> "Polynomial":
        """The polynomial ``s``."""
        return cls._raw(1.0 + 0j, np.array([0j, 1.0 + 0j]), factors=(0j,))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], gain: complex = 1.0) -> "Polynomial":
        """Monic product of ``(s - r)`` over the roots, times ``gain``.

        When the root set is conjugate-closed the tiny imaginary residue
        left by complex multiplication is removed, so real-coefficient
        polynomials stay exactly real through a cancel/rebuild cycle.
        """
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            return cls._raw(gain, np.array([1.0 + 0j]), factors=())
        coeffs = np.array([1.0 + 0j])
        for r in roots:
            coeffs = np.convolve(coeffs, np.array([-r, 1.0 + 0j]))
        top = np.abs(coeffs).max()
        if np.abs(coeffs.imag).max() <= REALIFY_REL * top:
            coeffs = coeffs.real.astype(complex)
            coeffs[-1] = 1.0 + 0j
        return cls._raw(gain, coeffs, factors=tuple(complex(r) for r in roots))

    # -- basic queries ----------------------------------------------------

    @property
    def coeffs(self) -> np.ndarray:
        """Plain ascending coefficient array (gain folded back in)."""
        return self.gain * self.monic

    @property
    def degree(self) -> int:
        return len(self.monic) - 1

    @property
    def is_zero(self) -> bool:
        return self.gain == 0

    @property
    def is_real(self) -> bool:
        return self.gain.imag == 0.0 and bool(np.all(self.monic.imag == 0.0))

    def __call__(self, s):
        if self.factors is not None and not self.is_zero:
            out = np.multiply(np.ones_like(np.asarray(s, dtype=complex)), self.gain)
            for r in self.factors:
                out = out * (s - r)
            return out if out.ndim else complex(out)
        return self.gain * np.polyval(self.monic[::-1], s)

    def __repr__(self) -> str:
        return f"Polynomial(degree={self.degree}, gain={self.gain:.6g})"

    # -- arithmetic -------------------------------------------------------

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(-self.gain, self.monic, self.factors)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        out = np.zeros(n, dtype=complex)
        ref = np.zeros(n)
        out[: len(a)] += a
        out[: len(b)] += b
        ref[: len(a)] = np.abs(a)
        ref[: len(b)] = np.maximum(ref[: len(b)], np.abs(b))
        significant = np.nonzero(np.abs(out) > ADD_TRIM_REL * ref)[0]
        if significant.size == 0:
            return Polynomial.zero()
        return Polynomial(out[: significant[-1] + 1])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero or other.is_zero:
                return Polynomial.zero()
            factors = None
            if self.factors is not None and other.factors is not None:
                factors = self.factors + other.factors
            return Polynomial._raw(
                self.gain * other.gain, np.convolve(self.monic, other.monic), factors
            )
        if isinstance(other, (int, float, complex)):
            if other == 0:
                return Polynomial.zero()
            return Polynomial._raw(self.gain * other, self.monic, self.factors)
        return NotImplemented

    __rmul__ = __mul__

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial.zero()
        c = self.coeffs
        return Polynomial(c[1:] * np.arange(1, len(c)))

    def divide_exact(self, divisor: "Polynomial") -> "Polynomial":
        """Long division, discarding the (assumed negligible) remainder.

        Used by the fraction-free determinant elimination, where divisions
        are exact in exact arithmetic.
        """
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero:
            return Polynomial.zero()
        num = self.monic.copy()
        den = divisor.monic
        dn, dd = len(num) - 1, len(den) - 1
        if dn < dd:
            return Polynomial.zero()
        quot = np.zeros(dn - dd + 1, dtype=complex)
        for k in range(dn - dd, -1, -1):
            q = num[k + dd]
            quot[k] = q
            if q != 0:
                num[k : k + dd + 1] -= q * den
        return Polynomial(quot) * (self.gain / divisor.gain)

    def magnitude_bound(self, radius: float) -> float:
        """Sum of |coefficient| * radius^k; bounds |p| on that circle."""
        return float(np.polyval(np.abs(self.coeffs)[::-1], radius))

    # -- roots ------------------------------------------------------------

    def roots(self, polish: bool = True) -> np.ndarray:
        """All roots (with multiplicity) via companion-matrix eigenvalues.

        Each eigenvalue is refined with up to 10 damped Newton steps, which
        gives local accuracy on top of the robust global baseline.
        """
        if self.is_zero:
            raise ValueError("undefined roots: zero polynomial")
        n = self.degree
        if n == 0:
            return np.array([], dtype=complex)
        if self.factors is not None:
            return np.asarray(self.factors, dtype=complex)
        monic = self.monic
        comp_col = -monic[:-1]
        if self.is_real:
            comp = np.zeros((n, n))
            comp[1:, :-1] = np.eye(n - 1)
            comp[:, -1] = comp_col.real
        else:
            comp = np.zeros((n, n), dtype=complex)
            comp[1:, :-1] = np.eye(n - 1)
            comp[:, -1] = comp_col
        roots = np.linalg.eigvals(comp).astype(complex)
        if polish:
            roots = self._polish(roots)
        return roots

    def _polish(self, roots: np.ndarray) -> np.ndarray:
        pd = self.monic[::-1]
        dd = (self.monic[1:] * np.arange(1, len(self.monic)))[::-1]
        x = roots.copy()
        fx = np.abs(np.polyval(pd, x))
        for _ in range(10):
            dfx = np.polyval(dd, x)
            safe = np.abs(dfx) > 0
            step = np.zeros_like(x)
            step[safe] = np.polyval(pd, x[safe]) / dfx[safe]
            trial = x - step
            ft = np.abs(np.polyval(pd, trial))
            accept = ft <= fx
            x = np.where(accept, trial, x)
            fx = np.where(accept, ft, fx)
            if np.all(np.abs(step[accept]) <= 1e-15 * (1.0 + np.abs(x[accept]))):
                break
        return x


class RationalFunction:
    """Ratio of two polynomials in ``s``; denominator kept monic."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1.0,)):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")
        self.num = Polynomial._raw(num.gain / den.gain, num.monic, num.factors)
        self.den = Polynomial._raw(1.0 + 0j, den.monic, den.factors)

    @classmethod
    def constant(cls, value: complex) -> "RationalFunction":
        return cls(Polynomial([value]), Polynomial.one())

    @classmethod
    def zero(cls) -> "RationalFunction":
        return cls.constant(0.0)

    @classmethod
    def one(cls) -> "RationalFunction":
        return cls.constant(1.0)

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_constant(self) -> bool:
        return self.num.degree == 0 and self.den.degree == 0

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def __repr__(self) -> str:
        return f"RationalFunction({self.num.degree}/{self.den.degree})"

    # -- arithmetic -------------------------------------------------------

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalFunction(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero:
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def reciprocal(self) -> "RationalFunction":
        if self.is_zero:
            raise ZeroDivisionError("reciprocal of zero rational function")
        return RationalFunction(self.den, self.num)

    @staticmethod
    def _coerce(value):
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, (int, float, complex)):
            return RationalFunction.constant(value)
        return NotImplemented

    # -- calculus and simplification ---------------------------------------

    def derivative(self) -> "RationalFunction":
        """Quotient-rule derivative (not normalized)."""
        return RationalFunction(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    def derivative_at(self, s: complex) -> complex:
        """Derivative value at a point without forming the symbolic quotient."""
        n, d = self.num, self.den
        dv = d(s)
        return (n.derivative()(s) * dv - n(s) * d.derivative()(s)) / (dv * dv)

    def normalized(self, cancel_rel: float = CANCEL_REL) -> "RationalFunction":
        """Cancel numerator/denominator roots that agree within tolerance.

        Roots are matched greedily; a pair is common when its distance is
        below ``cancel_rel * (1 + |root|)``, a relative test that survives
        badly scaled circuits.
        """
        if self.num.is_zero:
            return RationalFunction.zero()
        if self.num.degree == 0 or self.den.degree == 0:
            return self
        num_roots = list(self.num.roots())
        den_roots = self.den.roots()
        keep_den = []
        cancelled = False
        for dr in den_roots:
            tol = cancel_rel * (1.0 + abs(dr))
            best, best_dist = -1, tol
            for i, nr in enumerate(num_roots):
                dist = abs(nr - dr)
                if dist < best_dist:
                    best, best_dist = i, dist
            if best >= 0:
                num_roots.pop(best)
                cancelled = True
            else:
                keep_den.append(dr)
        if not cancelled:
            return self
        return RationalFunction(
            Polynomial.from_roots(num_roots, self.num.gain),
            Polynomial.from_roots(keep_den, 1.0),
        )

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()


class MatrixStructureHints:
    """Known denominator structure of a rational matrix.

    Assemblers that know how their matrix was built (e.g. each component
    admittance enters through a rank-one stamp, making the determinant
    affine in it) can state the exact denominator root multiset of the
    determinant and of every first minor.  Reduction then needs no value
    judgements at all: the spare factors are guaranteed divisors.
    """

    __slots__ = ("det_den_roots", "minor_den_roots")

    def __init__(self, det_den_roots, minor_den_roots):
        self.det_den_roots = tuple(det_den_roots)
        self.minor_den_roots = minor_den_roots  # (removed_row, removed_col) -> roots


class RationalMatrix:
    """Square matrix of rational functions."""

    __slots__ = ("dim", "entries", "hints")

    def __init__(self, entries: Sequence[Sequence[RationalFunction]], hints=None):
        rows = tuple(tuple(self._coerce(e) for e in row) for row in entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("entries must form a non-empty square grid")
        self.dim = n
        self.entries = rows
        self.hints = hints

    @staticmethod
    def _coerce(value) -> RationalFunction:
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, (int, float, complex)):
            return RationalFunction.constant(value)
        raise TypeError(f"cannot use {type(value).__name__} as a matrix entry")

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        one, zero = RationalFunction.one(), RationalFunction.zero()
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int) -> "RationalMatrix":
        zero = RationalFunction.zero()
        return cls([[zero] * n for _ in range(n)])

    @classmethod
    def diagonal(cls, diag: Sequence[RationalFunction]) -> "RationalMatrix":
        n = len(diag)
        zero = RationalFunction.zero()
        return cls(
            [[diag[i] if i == j else zero for j in range(n)] for i in range(n)]
        )

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def __call__(self, s: complex) -> np.ndarray:
        """Pointwise evaluation to an ``(n, n)`` complex array."""
        n = self.dim
        out = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.entries[i][j](s)
        return out

    def eval_grid(self, s_values: np.ndarray) -> np.ndarray:
        """Evaluate on a 1-D grid of points, returning ``(len(s), n, n)``."""
        s_values = np.asarray(s_values, dtype=complex)
        n = self.dim
        out = np.empty((s_values.size, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[:, i, j] = self.entries[i][j](s_values)
        return out

    def transpose(self) -> "RationalMatrix":
        n = self.dim
        return RationalMatrix(
            [[self.entries[j][i] for j in range(n)] for i in range(n)]
        )

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check_dim(other)
        return RationalMatrix(
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check_dim(other)
        return RationalMatrix(
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ]
        )

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check_dim(other)
        n = self.dim
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = RationalFunction.zero()
                for k in range(n):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a.is_zero or b.is_zero:
                        continue
                    acc = acc + a * b
                row.append(acc)
            rows.append(row)
        return RationalMatrix(rows)

    def scale(self, factor) -> "RationalMatrix":
        return RationalMatrix(
            [[e * factor for e in row] for row in self.entries]
        )

    def _check_dim(self, other: "RationalMatrix") -> None:
        if not isinstance(other, RationalMatrix) or other.dim != self.dim:
            raise ValueError("dimension mismatch")

    # -- determinant, adjugate, inverse -------------------------------------

    def det(self) -> RationalFunction:
        """Determinant as a normalized rational function.

        Each row is cleared by its denominator LCM first and a polynomial
        determinant is taken.  With structure hints the spare factors are
        guaranteed divisors and are deflated outright; otherwise common
        factors are identified by an argument-principle survey around the
        accurately-known denominator roots.
        """
        cleared, row_factors = _cleared_rows(self.entries)
        det_poly = _poly_det(cleared, tuple(range(self.dim)), tuple(range(self.dim)), {})
        all_roots = [r for row in row_factors for r in row]
        if self.hints is not None:
            den_roots = list(self.hints.det_den_roots)
            extra = _multiset_subtract(all_roots, den_roots)
            num = _deflate_guaranteed(
                det_poly, extra, self._exact_minor_eval(tuple(range(self.dim)),
                                                        tuple(range(self.dim)),
                                                        row_factors)
            )
            return RationalFunction(num, Polynomial.from_roots(den_roots, 1.0))
        num, kept = _cancel_known_roots(det_poly, all_roots)
        return RationalFunction(num, Polynomial.from_roots(kept, 1.0))

    def _exact_minor_eval(self, rows, cols, row_factors):
        """Evaluator for a cleared minor with an LU-determinant noise floor.

        Probing can land on an entry pole; the resulting non-finite value is
        handled by the caller's guards, so the division warnings are muted.
        """
        multipliers = [Polynomial.from_roots(row_factors[r], 1.0) for r in rows]
        rows = np.asarray(rows)
        cols = np.asarray(cols)

        def base(s: complex) -> complex:
            with np.errstate(divide="ignore", invalid="ignore"):
                full = self(s)
                value = np.linalg.det(full[np.ix_(rows, cols)])
            for p in multipliers:
                value *= p(s)
            return value

        return base

    def adjugate(self) -> "RationalMatrix":
        """Symbolic adjugate via cofactors with memoized polynomial minors."""
        n = self.dim
        if n == 1:
            return RationalMatrix([[RationalFunction.one()]])
        if n > 8:
            raise NotImplementedError(
                "symbolic adjugate beyond dimension 8; evaluate pointwise instead"
            )
        cleared, row_factors = _cleared_rows(self.entries)
        cache: dict = {}
        all_idx = tuple(range(n))
        adj = [[None] * n for _ in range(n)]
        for i in range(n):
            rows = tuple(r for r in all_idx if r != i)
            all_roots = [r for k in rows for r in row_factors[k]]
            for j in range(n):
                cols = tuple(c for c in all_idx if c != j)
                minor = _poly_det(cleared, rows, cols, cache)
                if self.hints is not None:
                    den_roots = list(self.hints.minor_den_roots(i, j))
                    extra = _multiset_subtract(all_roots, den_roots)
                    num = _deflate_guaranteed(
                        minor, extra, self._exact_minor_eval(rows, cols, row_factors)
                    )
                    entry = RationalFunction(num, Polynomial.from_roots(den_roots, 1.0))
                else:
                    num, kept = _cancel_known_roots(minor, all_roots)
                    entry = RationalFunction(num, Polynomial.from_roots(kept, 1.0))
                adj[j][i] = entry if (i + j) % 2 == 0 else -entry
        return RationalMatrix(adj)

    def inverse(self) -> "RationalMatrix":
        """Symbolic inverse ``adj / det``.  Entries are left unnormalized;
        call :meth:`normalized` if cancelled entries are needed."""
        d = self.det()
        if d.is_zero:
            raise ZeroDivisionError("matrix of rational functions is singular")
        adj = self.adjugate()
        return RationalMatrix(
            [[e / d for e in row] for row in adj.entries]
        )

    def normalized(self) -> "RationalMatrix":
        return RationalMatrix(
            [[e.normalized() for e in row] for row in self.entries]
        )


def _merge_root_multiset(pool: list, roots) -> None:
    """Grow ``pool`` to the multiset union (max multiplicity per cluster)."""
    taken = [False] * len(pool)
    for r in roots:
        tol = CANCEL_REL * (1.0 + abs(r)) * 100.0
        best, best_d = -1, tol
        for k, existing in enumerate(pool):
            if taken[k]:
                continue
            d = abs(existing - r)
            if d < best_d:
                best, best_d = k, d
        if best >= 0:
            taken[best] = True
        else:
            pool.append(complex(r))
            taken.append(True)


def _multiset_without(pool: list, remove) -> list:
    """Pool minus one matched copy of each root in ``remove``."""
    out = list(pool)
    for r in remove:
        tol = CANCEL_REL * (1.0 + abs(r)) * 100.0
        best, best_d = -1, tol
        for k, existing in enumerate(out):
            d = abs(existing - r)
            if d < best_d:
                best, best_d = k, d
        if best >= 0:
            out.pop(best)
    return out


def _cleared_rows(entries):
    """Clear denominators row-wise using the row LCM.

    Returns the polynomial grid and, per row, the LCM roots that were
    multiplied in.  Denominators are monic, so roots fully describe them.
    """
    n = len(entries)
    cleared = []
    row_factors = []
    for i in range(n):
        den_roots = [
            list(entries[i][j].den.roots()) if entries[i][j].den.degree > 0 else []
            for j in range(n)
        ]
        lcm: list = []
        for roots in den_roots:
            _merge_root_multiset(lcm, roots)
        row = []
        for j in range(n):
            entry = entries[i][j]
            if entry.num.is_zero:
                row.append(Polynomial.zero())
                continue
            extra = _multiset_without(lcm, den_roots[j])
            row.append(entry.num * Polynomial.from_roots(extra, 1.0))
        cleared.append(row)
        row_factors.append(lcm)
    return cleared, row_factors


def _poly_det(grid, rows, cols, cache) -> Polynomial:
    """Determinant of a polynomial matrix over the given index subsets.

    Memoized cofactor expansion: division-free, so coefficient accuracy
    survives the wide dynamic ranges these polynomials develop.  (Fraction-
    free elimination loses the small cancelling factors in double precision
    and is kept only as a fallback for matrices too large to expand.)
    """
    n = len(rows)
    if n > 8:
        return _poly_det_bareiss([[grid[i][j] for j in cols] for i in rows])
    key = (rows, cols)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if n == 1:
        out = grid[rows[0]][cols[0]]
    elif n == 2:
        out = (
            grid[rows[0]][cols[0]] * grid[rows[1]][cols[1]]
            - grid[rows[0]][cols[1]] * grid[rows[1]][cols[0]]
        )
    else:
        out = Polynomial.zero()
        sub_rows = rows[1:]
        for k, c in enumerate(cols):
            pivot = grid[rows[0]][c]
            if pivot.is_zero:
                continue
            sub_cols = cols[:k] + cols[k + 1 :]
            term = pivot * _poly_det(grid, sub_rows, sub_cols, cache)
            out = out + term if k % 2 == 0 else out - term
    cache[key] = out
    return out


def _poly_det_bareiss(m) -> Polynomial:
    n = len(m)
    m = [row[:] for row in m]
    sign = 1.0
    prev = Polynomial.one()
    for k in range(n - 1):
        if m[k][k].is_zero:
            pivot = next((r for r in range(k + 1, n) if not m[r][k].is_zero), None)
            if pivot is None:
                return Polynomial.zero()
            m[k], m[pivot] = m[pivot], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[k][k] * m[i][j] - m[i][k] * m[k][j]).divide_exact(prev)
        prev = m[k][k]
    return m[n - 1][n - 1] * sign


# A certified factor root may claim the nearest computed root this far away
# (clustered roots smear well beyond the plain matching tolerance).
_CLUSTER_WINDOW = 1e-3


class _DeflatedQuotient:
    """Stable evaluation of ``base(x) / prod(x - cancelled)``.

    ``base`` defaults to polynomial evaluation; callers that can evaluate
    the underlying function more stably (e.g. an LU determinant of the
    original matrix) supply their own callable.  The cancelled roots are
    exact low-degree factor roots, so the quotient form sidesteps
    re-expanding coefficients after each deflation.
    """

    def __init__(self, poly: Polynomial, base=None):
        self.poly = poly
        self.base = base if base is not None else poly
        self.cancelled = []

    def value(self, x: complex) -> complex:
        q = 1.0 + 0j
        for r in self.cancelled:
            q *= x - r
        return self.base(x) / q

    def survey_circle(self, center: complex, radius: float, points: int = 32):
        """Argument-principle survey of the circle: net zero count and the
        first moment (sum of zero positions minus deflated copies inside).

        Returns ``(count, moment)`` or ``None`` when evaluation noise drowns
        the winding signal.
        """
        theta = 2.0 * np.pi * (np.arange(points) + 0.5) / points
        ring = center + radius * np.exp(1j * theta)
        vals = np.array([self.value(x) for x in ring])
        if np.any(vals == 0):
            return None
        noise = 16.0 * np.finfo(float).eps * self.poly.magnitude_bound(abs(center) + radius)
        q_min = 1.0
        for r in self.cancelled:
            q_min *= max(float(np.min(np.abs(ring - r))), 1e-300)
        if float(np.min(np.abs(vals))) * q_min <= 30.0 * noise:
            return None
        ratios = np.roll(vals, -1) / vals
        steps = np.log(np.abs(ratios)) + 1j * np.angle(ratios)
        count = int(round(float(np.sum(steps.imag)) / (2.0 * np.pi)))
        mid = center + radius * np.exp(1j * (theta + np.pi / points))
        moment = complex(np.sum(mid * steps) / (2j * np.pi))
        return count, moment

    def newton_polish(self, x0: complex, steps: int = 8) -> complex:
        """Damped Newton refinement of a quotient root, with the slope taken
        by central differences (the analytic quotient-rule slope cancels
        catastrophically next to a deflated root)."""
        x = x0
        if self.cancelled and min(abs(x - r) for r in self.cancelled) \
                < 1e-12 * (1.0 + abs(x)):
            x = x + 1e-9 * (1.0 + abs(x))
        fx = abs(self.value(x))
        if not np.isfinite(fx):
            return x0
        for _ in range(steps):
            h = 1e-6 * (1.0 + abs(x))
            slope = (self.value(x + h) - self.value(x - h)) / (2.0 * h)
            if slope == 0 or not np.isfinite(slope):
                break
            trial = x - self.value(x) / slope
            if not np.isfinite(trial):
                break
            if self.cancelled and min(abs(trial - r) for r in self.cancelled) \
                    < 1e-13 * (1.0 + abs(trial)):
                break
            ft = abs(self.value(trial))
            if not np.isfinite(ft) or ft >= fx:
                break
            x, fx = trial, ft
        return x


def _multiset_subtract(pool, remove):
    """Pool minus one proximity-matched copy per root in ``remove``.

    Both sides come from accurately-rooted low-degree factors, so matching
    at a tight relative tolerance is exact in practice.
    """
    out = list(pool)
    for r in remove:
        best, best_dist = -1, np.inf
        for i, candidate in enumerate(out):
            dist = abs(candidate - r)
            if dist < best_dist:
                best, best_dist = i, dist
        if best < 0 or best_dist > 1e-6 * (1.0 + abs(r)):
            raise ValueError("denominator hint root not present in the row factors")
        out.pop(best)
    return out


def _deflate_guaranteed(poly: Polynomial, extra_roots, base_eval=None):
    """Divide out factor roots that are known divisors by construction.

    Each guaranteed root claims the nearest computed root of ``poly``; the
    survivors are Newton-polished against the stably evaluated quotient and
    the result is rebuilt from them.
    """
    if poly.is_zero or poly.degree == 0:
        return poly
    remaining = list(poly.roots())
    quotient = _DeflatedQuotient(poly, base=base_eval)
    for e in extra_roots:
        if not remaining:
            break
        best = min(range(len(remaining)), key=lambda i: abs(remaining[i] - e))
        remaining.pop(best)
        quotient.cancelled.append(complex(e))
    polished = [complex(quotient.newton_polish(x)) for x in remaining]
    return Polynomial.from_roots(polished, poly.gain)


def _cancel_known_roots(poly: Polynomial, den_roots):
    """Remove denominator roots from ``poly`` where it shares them.

    Each factor root is known accurately (it comes from a low-degree entry
    denominator).  Whether it still divides the running quotient is decided
    by the argument principle on a tiny circle around the root: the winding
    number counts remaining zeros there, so repeated copies and clustered
    neighbours resolve correctly and no derivative is needed.  Certified
    roots claim the nearest computed root of the original polynomial; the
    survivors are Newton-polished against the final quotient and the
    numerator is rebuilt from them, which keeps every coefficient accurate
    across wide magnitude ranges.
    """
    if poly.is_zero or poly.degree == 0 or not den_roots:
        return poly, list(den_roots)
    remaining = list(poly.roots())
    quotient = _DeflatedQuotient(poly)
    kept = []
    for r in den_roots:
        window = _CLUSTER_WINDOW * (1.0 + abs(r))
        floor = DET_CANCEL_REL * (1.0 + abs(r))
        dists = sorted((abs(pr - r), i) for i, pr in enumerate(remaining))
        if not dists or dists[0][0] >= window:
            kept.append(r)
            continue
        certified = _certify_factor_root(quotient, r, window, floor, dists[0][0])
        if certified:
            remaining.pop(dists[0][1])
            quotient.cancelled.append(complex(r))
        else:
            kept.append(r)
    if not quotient.cancelled:
        return poly, kept
    polished = [complex(quotient.newton_polish(x)) for x in remaining]
    return Polynomial.from_roots(polished, poly.gain), kept


def _certify_factor_root(quotient: _DeflatedQuotient, r: complex, window: float,
                         floor: float, nearest_dist: float) -> bool:
    """Does the deflated quotient vanish at ``r``?

    Surveys circles around ``r``: when exactly one net zero lies inside, the
    winding moment locates it and the test is whether it sits on ``r``.
    Several zeros inside prompt a shrink; an empty circle settles the answer
    negatively.  When noise or unresolvable clustering defeats the survey,
    falls back to plain matching at the tight tolerance.
    """
    radius = window
    for _ in range(4):
        if radius < max(floor, 4.0 * np.finfo(float).eps * (1.0 + abs(r))):
            break
        survey = quotient.survey_circle(r, radius)
        if survey is None:
            break
        count, moment = survey
        if count <= 0 and not any(abs(rc - r) < radius for rc in quotient.cancelled):
            return False
        poles_inside = [rc for rc in quotient.cancelled if abs(rc - r) < radius]
        n_zeros = count + len(poles_inside)
        if n_zeros <= 0:
            return False
        if n_zeros == 1:
            position = moment + sum(poles_inside)
            return abs(position - r) <= max(floor, 1e-3 * radius)
        radius *= 0.02
    return nearest_dist < floor


def poly_roots(p: Polynomial) -> np.ndarray:
    """All roots of ``p`` (with multiplicity), companion matrix + polishing."""
    return p.roots()


def rat_det(matrix: RationalMatrix) -> RationalFunction:
    """Determinant of a rational matrix, common factors cancelled."""
    return matrix.det()


def rat_derivative(f: RationalFunction) -> RationalFunction:
    """Quotient-rule derivative of a rational function."""
    return f.derivative()
