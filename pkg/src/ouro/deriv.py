"""Derivatives of idempotent candidates: forward-mode duals, central
differences, and the unity checks.

An idempotent f: A^n -> A satisfies f(f(x),...,f(x)) = f(x).  Where f is C^1
and the gradient at x does not vanish, differentiating that identity forces
the partials of f at the diagonal point (f(x),...,f(x)) to sum to exactly 1;
for n = 1 this reads f'(f(x)) = 1.  Whether those partials are furthermore
all equal to 1/n is a separate claim: it holds for symmetric candidates but
fails for, say, a weighted mean, so the two claims are always reported
separately.

Points where the hypotheses fail are never counted as violations: a vanishing
gradient (|grad f(x)| below GRADIENT_FLOOR) or a non-smooth diagonal point
yields DEGENERATE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .expr import (
    BinOp, Call, Const, EvalDomainError, EvaluationError, Expr, Neg,
    UnboundVariableError, Var, evaluate, free_variables, pow_value,
)
from .verify import DomainBox, SamplePlan, Status

__all__ = [
    "Dual", "KinkPointError", "UnityReport", "UnitySweep",
    "dual_eval", "fd_partial", "gradient", "ouroboros_gradient",
    "check_unity", "check_univariate_unity", "unity_sweep",
    "GRADIENT_FLOOR", "TOL_UNITY", "KINK_RETRY_LIMIT",
]

# Identity checks run at 1e-6 with exact forward-mode derivatives and at a
# looser 1e-4 when both sides come from finite differences.
TOL_UNITY = {"dual": 1e-6, "fd": 1e-4}

# Below this max-norm of grad f(x) the differentiated identity is vacuous
# (0 = 0), so the point is reported DEGENERATE rather than checked.
GRADIENT_FLOOR = 1e-8

# How many fresh points to try when a sample lands within kink_margin of a
# non-smooth locus before giving up on that sample.
KINK_RETRY_LIMIT = 16


class KinkPointError(ValueError):
    """Evaluation touched a non-differentiable locus (jump or corner)."""

    def __init__(self, site: str):
        super().__init__(f"derivative undefined: {site}")
        self.site = site


@dataclass(frozen=True)
class Dual:
    """Forward-mode pair (value, d value / d x_i)."""

    value: float
    deriv: float


def _near(a: float, b: float, margin: float) -> bool:
    return abs(a - b) <= margin


def _dual(node: Expr, env: Mapping[str, Dual], margin: float) -> Dual:
    # The value channel repeats expr._eval branch for branch so that
    # dual_eval(...)[0] is bit-identical to evaluate(...).
    if isinstance(node, Const):
        return Dual(node.value, 0.0)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Neg):
        a = _dual(node.operand, env, margin)
        return Dual(-a.value, -a.deriv)
    if isinstance(node, BinOp):
        a = _dual(node.left, env, margin)
        b = _dual(node.right, env, margin)
        inputs = (a.value, b.value)
        if node.op == "+":
            out = Dual(a.value + b.value, a.deriv + b.deriv)
        elif node.op == "-":
            out = Dual(a.value - b.value, a.deriv - b.deriv)
        elif node.op == "*":
            out = Dual(a.value * b.value,
                       a.deriv * b.value + a.value * b.deriv)
        elif node.op == "/":
            if b.value == 0.0:
                raise EvalDomainError(node, inputs, "division by zero")
            v = a.value / b.value
            out = Dual(v, (a.deriv - v * b.deriv) / b.value)
        else:
            out = _dual_pow(a, b, node)
        if not math.isfinite(out.value):
            raise EvalDomainError(node, inputs, "result is not finite")
        if not math.isfinite(out.deriv):
            raise EvalDomainError(node, inputs, "derivative is not finite")
        return out
    if isinstance(node, Call):
        args = tuple(_dual(arg, env, margin) for arg in node.args)
        out = _dual_builtin(node, args, margin)
        if not math.isfinite(out.value):
            raise EvalDomainError(node, tuple(a.value for a in args),
                                  "result is not finite")
        if not math.isfinite(out.deriv):
            raise EvalDomainError(node, tuple(a.value for a in args),
                                  "derivative is not finite")
        return out
    raise TypeError(f"not an Expr: {node!r}")


def _dual_pow(a: Dual, b: Dual, node: Expr) -> Dual:
    inputs = (a.value, b.value)
    v = pow_value(a.value, b.value, node, inputs)
    if b.deriv == 0.0:
        # constant exponent: d(a^c) = c * a^(c-1) * a'
        c = b.value
        if a.deriv == 0.0 or c == 0.0:
            return Dual(v, 0.0)
        base = pow_value(a.value, c - 1.0, node, inputs)
        return Dual(v, c * base * a.deriv)
    if a.value <= 0.0:
        raise EvalDomainError(node, inputs,
                              "varying exponent needs a positive base")
    d = v * (b.deriv * math.log(a.value) + b.value * a.deriv / a.value)
    return Dual(v, d)


def _dual_min(a: Dual, b: Dual, margin: float, site: str) -> Dual:
    if _near(a.value, b.value, margin):
        raise KinkPointError(f"{site} tie at {a.value!r}")
    return a if a.value <= b.value else b


def _dual_max(a: Dual, b: Dual, margin: float, site: str) -> Dual:
    if _near(a.value, b.value, margin):
        raise KinkPointError(f"{site} tie at {a.value!r}")
    return a if a.value >= b.value else b


def _dual_builtin(node: Call, args: tuple[Dual, ...], margin: float) -> Dual:
    func = node.func
    vals = tuple(a.value for a in args)
    if func == "abs":
        a = args[0]
        if _near(a.value, 0.0, margin):
            raise KinkPointError("abs at its corner 0")
        return Dual(abs(a.value), a.deriv if a.value > 0.0 else -a.deriv)
    if func in ("floor", "ceil"):
        a = args[0]
        frac = a.value - math.floor(a.value)
        if frac <= margin or 1.0 - frac <= margin:
            raise KinkPointError(f"{func} at a jump near {a.value!r}")
        v = float(math.floor(a.value)) if func == "floor" else float(math.ceil(a.value))
        return Dual(v, 0.0)
    if func == "sign":
        a = args[0]
        if _near(a.value, 0.0, margin):
            raise KinkPointError("sign at its jump 0")
        return Dual(1.0 if a.value > 0.0 else -1.0, 0.0)
    if func == "relu":
        a = args[0]
        if _near(a.value, 0.0, margin):
            raise KinkPointError("relu at its corner 0")
        return Dual(a.value, a.deriv) if a.value > 0.0 else Dual(0.0, 0.0)
    if func == "exp":
        a = args[0]
        try:
            v = math.exp(a.value)
        except OverflowError:
            raise EvalDomainError(node, vals, "exp overflows") from None
        return Dual(v, a.deriv * v)
    if func == "ln":
        a = args[0]
        if a.value <= 0.0:
            raise EvalDomainError(node, vals, "ln of a non-positive number")
        return Dual(math.log(a.value), a.deriv / a.value)
    if func == "sqrt":
        a = args[0]
        if a.value < 0.0:
            raise EvalDomainError(node, vals, "sqrt of a negative number")
        v = math.sqrt(a.value)
        if a.value == 0.0:
            if a.deriv == 0.0:
                return Dual(0.0, 0.0)
            raise EvalDomainError(node, vals, "derivative of sqrt at zero")
        return Dual(v, a.deriv * 0.5 / v)
    if func == "min":
        return _dual_min(args[0], args[1], margin, "min")
    if func == "max":
        return _dual_max(args[0], args[1], margin, "max")
    if func == "clamp":
        v, lo, hi = args
        inner = _dual_max(v, lo, margin, "clamp lower corner")
        return _dual_min(inner, hi, margin, "clamp upper corner")
    raise AssertionError(func)


def dual_eval(f: Expr, env: Mapping[str, float], i: int, *,
              kink_margin: float = 0.0) -> tuple[float, float]:
    """Value and exact partial d f / d x_i at `env` by forward mode.

    Coordinates are indexed by first appearance, matching free_variables(f).
    The value half is bit-identical to evaluate(f, env).  KinkPointError is
    raised when any non-smooth builtin is evaluated within kink_margin of
    its jump or corner (and always when exactly on it).
    """
    names = free_variables(f)
    if not 0 <= i < len(names):
        raise ValueError(f"coordinate {i} out of range for {len(names)} variable(s)")
    for name in names:
        if name not in env:
            raise UnboundVariableError(name)
        if not math.isfinite(env[name]):
            raise EvaluationError(f"non-finite binding {name}={env[name]!r}")
    duals = {name: Dual(env[name], 1.0 if j == i else 0.0)
             for j, name in enumerate(names)}
    out = _dual(f, duals, kink_margin)
    return out.value, out.deriv


def fd_partial(f: Expr, env: Mapping[str, float], i: int,
               h: float | None = None) -> float:
    """Central-difference estimate of d f / d x_i at `env`.

    Default step is 1e-6 * max(1, |x_i|).  Both probe points must stay
    inside the candidate's domain and away from kinks; this is the caller's
    responsibility (the step is not validated against the box).
    """
    names = free_variables(f)
    if not 0 <= i < len(names):
        raise ValueError(f"coordinate {i} out of range for {len(names)} variable(s)")
    name = names[i]
    x = env[name]
    if h is None:
        h = 1e-6 * max(1.0, abs(x))
    hi_env = dict(env)
    lo_env = dict(env)
    hi_env[name] = x + h
    lo_env[name] = x - h
    return (evaluate(f, hi_env) - evaluate(f, lo_env)) / (2.0 * h)


def _scan_kinks(f: Expr, env: Mapping[str, float], margin: float) -> None:
    """Raise KinkPointError if evaluating f at env touches a non-smooth
    locus within `margin`.  Used to guard finite differencing, which cannot
    see kinks on its own."""
    names = free_variables(f)
    duals = {name: Dual(env[name], 0.0) for name in names}
    _dual(f, duals, margin)


def gradient(f: Expr, env: Mapping[str, float], method: str = "dual", *,
             kink_margin: float = 0.0) -> tuple[float, ...]:
    """All partials of f at `env` by the chosen method."""
    names = free_variables(f)
    if method == "dual":
        return tuple(dual_eval(f, env, i, kink_margin=kink_margin)[1]
                     for i in range(len(names)))
    if method == "fd":
        _scan_kinks(f, env, kink_margin)
        return tuple(fd_partial(f, env, i) for i in range(len(names)))
    raise ValueError(f"unknown method {method!r}")


def ouroboros_gradient(f: Expr, env: Mapping[str, float],
                       method: str = "dual", *,
                       kink_margin: float = 0.0) -> tuple[float, ...]:
    """Partials of f at the diagonal point (f(x), ..., f(x)).

    These are the quantities the unity checks constrain.  Raises
    KinkPointError when the diagonal point sits on a non-smooth locus; the
    unity checks translate that into a DEGENERATE marker.
    """
    names = free_variables(f)
    if not names:
        raise ValueError("candidate has no free variables")
    t = evaluate(f, env)
    diag = {name: t for name in names}
    return gradient(f, diag, method, kink_margin=kink_margin)


@dataclass(frozen=True)
class UnityReport:
    """Outcome of the derivative identity checks at one point.

    sum_to_one constrains the sum of the diagonal partials to 1;
    equal_shares additionally constrains every partial to 1/n.  The two are
    independent claims and are always reported side by side.
    """

    n: int
    point: tuple[float, ...]
    value: float
    outer_gradient: tuple[float, ...]
    shares: tuple[float, ...] | None
    share_sum: float | None
    sum_to_one: Status
    equal_shares: Status
    method: str
    tol: float
    degenerate_reason: str | None = None


@dataclass(frozen=True)
class UnitySweep:
    reports: tuple[UnityReport, ...]
    points_skipped: int


def check_unity(f: Expr, env: Mapping[str, float], plan: SamplePlan,
                method: str = "dual", *, tol: float | None = None,
                gradient_floor: float = GRADIENT_FLOOR) -> UnityReport:
    """Evaluate both unity claims for f at one point.

    DEGENERATE (for both claims) when |grad f(x)| is below the floor --
    there the differentiated identity is vacuous -- or when the diagonal
    point is a kink, where the partials do not exist.  Raises
    KinkPointError if x itself sits on a kink of the outer gradient.
    """
    if method not in TOL_UNITY:
        raise ValueError(f"unknown method {method!r}")
    if tol is None:
        tol = TOL_UNITY[method]
    names = free_variables(f)
    n = len(names)
    if n == 0:
        raise ValueError("candidate has no free variables")
    point = tuple(env[name] for name in names)
    value = evaluate(f, env)
    outer = gradient(f, env, method, kink_margin=plan.kink_margin)
    zero_grad = max(abs(g) for g in outer) <= gradient_floor

    shares: tuple[float, ...] | None
    try:
        diag = {name: value for name in names}
        shares = gradient(f, diag, method, kink_margin=plan.kink_margin)
        share_sum = sum(shares)
    except KinkPointError:
        shares = None
        share_sum = None

    if zero_grad:
        reason = "zero_gradient"
    elif shares is None:
        reason = "kink_diagonal"
    else:
        reason = None

    if reason is not None:
        sum_status = equal_status = Status.DEGENERATE
    else:
        sum_status = Status.PASS if abs(share_sum - 1.0) <= tol else Status.FAIL
        target = 1.0 / n
        worst = max(abs(s - target) for s in shares)
        equal_status = Status.PASS if worst <= tol else Status.FAIL

    return UnityReport(n, point, value, outer, shares, share_sum,
                       sum_status, equal_status, method, tol, reason)


def check_univariate_unity(f: Expr, x: float, plan: SamplePlan,
                           method: str = "dual", *, tol: float | None = None,
                           gradient_floor: float = GRADIENT_FLOOR) -> UnityReport:
    """Univariate form: checks f'(f(x)) = 1 wherever |f'(x)| clears the
    gradient floor."""
    names = free_variables(f)
    if len(names) != 1:
        raise ValueError("univariate unity check needs exactly one variable")
    return check_unity(f, {names[0]: x}, plan, method,
                       tol=tol, gradient_floor=gradient_floor)


def unity_sweep(f: Expr, domain: DomainBox, plan: SamplePlan,
                method: str = "dual", *, tol: float | None = None,
                gradient_floor: float = GRADIENT_FLOOR) -> UnitySweep:
    """Run check_unity at plan.sample_count sampled points.

    A point whose outer gradient touches a kink is replaced by up to
    KINK_RETRY_LIMIT fresh draws; if all retries land on kinks too, the
    sample is counted in points_skipped.  Results are independent of
    evaluation order: candidate j for sample i depends only on (seed, i, j).
    """
    names = free_variables(f)
    if domain.n != len(names):
        raise ValueError(
            f"domain has {domain.n} interval(s) for {len(names)} variable(s)")
    reports = []
    skipped = 0
    stride = KINK_RETRY_LIMIT + 1
    for i in range(plan.sample_count):
        placed = False
        for r in range(stride):
            point = domain.sample_point(plan.seed, i * stride + r)
            env = dict(zip(names, point))
            try:
                reports.append(check_unity(f, env, plan, method, tol=tol,
                                           gradient_floor=gradient_floor))
                placed = True
                break
            except KinkPointError:
                continue
        if not placed:
            skipped += 1
    return UnitySweep(tuple(reports), skipped)
