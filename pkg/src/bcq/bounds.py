"""Both sides of every conditional Borel-Cantelli inequality, blockwise.

Each check returns a :class:`~bcq.report.BoundReport`. Rational quantities
are compared exactly; anything involving exp or log goes through rational
enclosures and is only declared when the enclosure separates the sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from bcq.enclosure import (
    DEFAULT_WIDTH,
    RationalEnclosure,
    enclose,
    exp_enclosure,
    exp_interval,
    log_enclosure,
    power_of_two,
)
from bcq.errors import InvalidInput, UndefinedCoefficient
from bcq.measure import BlockFunction
from bcq.models import (
    ExplicitModel,
    MixtureBernoulli,
    MixtureMarkov,
    SequenceModel,
    block_count,
    cond_marginal,
    divergence_class,
    family_length,
    iter_marginals,
    iter_moments,
    iter_union_prefix,
    marginals_vanish,
    null_blocks,
    pattern_probability,
    run_absent,
    tail_bound,
    union_probability,
    word_probability,
)
from bcq.rates import CorrelationRate, RateFunction, divergence_rate
from bcq.report import (
    HOLDS,
    INAPPLICABLE,
    INCONCLUSIVE,
    BlockRow,
    BoundReport,
    decide,
    inapplicable,
    row,
)

ZERO = Fraction(0)
DEFAULT_SEARCH_BUDGET = 10_000


def _blocks(model):
    nulls = null_blocks(model)
    return [(b, b in nulls) for b in range(block_count(model))]


def _moments(model, block: int, n: int) -> tuple[Fraction, Fraction]:
    """(sum of marginals, double sum of pairwise joints) up to index n."""
    for j, s1, s2 in iter_moments(model, block):
        if j == n:
            return s1, s2
    raise InvalidInput(f"index {n} outside the explicit family")


def _sum_marginals(model, block: int, start: int, stop: int) -> Fraction:
    total = ZERO
    for i, p in enumerate(iter_marginals(model, block), start=1):
        if i > stop:
            break
        if i >= start:
            total += p
    return total


def _check_explicit_range(model, last: int) -> None:
    length = family_length(model)
    if length is not None and last > length:
        raise InvalidInput(f"index {last} outside the explicit family 1..{length}")


# -- series and identities ---------------------------------------------------


def generalized_bc_series(model: SequenceModel, m: int, H: int) -> tuple[BlockFunction, BoundReport]:
    """Partial sums S_H = sum_{n<=H} P(A_n^c ... A_{n+m-1}^c A_{n+m} | F).

    A block holds when the marginals vanish (decided from the family
    parameters) and a rigorous rational bound on the remaining tail exists;
    the row then certifies that the whole series is at most lhs + tail.
    """
    if m < 0 or H < 1:
        raise InvalidInput("need m >= 0 and H >= 1")
    _check_explicit_range(model, H + m)
    terms = [pattern_probability(model, n, m) for n in range(1, H + 1)]
    sums = []
    rows = []
    premise, tails = {}, {}
    for b, null in _blocks(model):
        s = sum((t[b] for t in terms), ZERO)
        sums.append(s)
        if null:
            rows.append(inapplicable(b, "null block"))
            continue
        vanish = marginals_vanish(model, b)
        tail = _pattern_tail(model, b, m, H)
        premise[str(b)] = vanish
        tails[str(b)] = tail
        if vanish is not True:
            why = "P(A_n|F)->0 fails" if vanish is False else "P(A_n|F)->0 undecidable for a finite family"
            rows.append(inapplicable(b, why, lhs=s, relation="<="))
        elif tail is None:
            rows.append(inapplicable(b, "no closed-form tail bound", lhs=s, relation="<="))
        else:
            rows.append(row(b, s, s + tail, "<=", note=f"tail bound {tail}"))
    bf = BlockFunction(tuple(sums), null_blocks(model))
    report = BoundReport("generalized-bc", tuple(rows), {"m": m, "H": H},
                         {"premise_vanishing": premise, "tail_bound": tails})
    return bf, report


def _pattern_tail(model, block, m, H) -> Fraction | None:
    """Upper bound on sum_{n>H} of the pattern terms.

    Each pattern term is at most P(A_{n+m}|F), so the marginal tail from
    H+m+1 bounds it. A Markov block with q0 = 0 never moves 0 -> 1, so any
    pattern with m >= 1 has probability 0.
    """
    if isinstance(model, MixtureMarkov) and m >= 1 and model.components[block].q0 == 0:
        return ZERO
    return tail_bound(model, block, H + m + 1)


def switch_identity_check(model: SequenceModel, N: int) -> BoundReport:
    """sum_{n<=N} P(A_n A_{n+1}^c|F) - sum_{n<=N} P(A_n^c A_{n+1}|F) = P(A_1|F) - P(A_{N+1}|F)."""
    if N < 1:
        raise InvalidInput("N must be >= 1")
    _check_explicit_range(model, N + 1)
    down = [word_probability(model, n, (1, 0)) for n in range(1, N + 1)]
    up = [word_probability(model, n, (0, 1)) for n in range(1, N + 1)]
    first, last = cond_marginal(model, 1), cond_marginal(model, N + 1)
    rows = []
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block", relation="=="))
            continue
        lhs = sum((d[b] for d in down), ZERO) - sum((u[b] for u in up), ZERO)
        rows.append(row(b, lhs, first[b] - last[b], "=="))
    return BoundReport("switch-identity", tuple(rows), {"N": N})


# -- power coefficients --------------------------------------------------------


def _log_quotient(num: Fraction, base: Fraction, width) -> RationalEnclosure:
    """Enclosure of log(num) / log(base) for positive rationals, base != 1."""
    if num == base:
        return RationalEnclosure.exact(1)
    if num == 1:
        return RationalEnclosure.exact(0)
    width = Fraction(width)
    inner = width / 4
    while True:
        enc = log_enclosure(num, inner) / log_enclosure(base, inner)
        if enc.width <= width:
            return enc
        inner /= 64


@dataclass(frozen=True)
class CoefficientRow:
    """alpha with joint = complement**alpha * tail on one block."""

    block: int
    alpha: RationalEnclosure
    joint: Fraction
    tail: Fraction
    complement: Fraction

    @property
    def unit_residual(self) -> Fraction:
        return self.joint - self.complement * self.tail

    def relation_holds(self, alpha) -> bool:
        """Exact test of joint == complement**alpha * tail for rational alpha >= 0.

        With alpha = p/q this is joint**q == complement**p * tail**q.
        """
        alpha = Fraction(alpha)
        if alpha < 0:
            raise InvalidInput("power coefficients are nonnegative")
        p, q = alpha.numerator, alpha.denominator
        return self.joint ** q == self.complement ** p * self.tail ** q


def _coefficient(block, joint, tail, comp, width, names) -> CoefficientRow:
    joint_name, tail_name, comp_name = names
    if comp == 0:
        raise UndefinedCoefficient(f"block {block}: {comp_name} = 0")
    if comp == 1:
        raise UndefinedCoefficient(f"block {block}: {comp_name} = 1, log is 0")
    if tail == 0:
        raise UndefinedCoefficient(f"block {block}: {tail_name} = 0")
    if joint == 0:
        raise UndefinedCoefficient(f"block {block}: {joint_name} = 0")
    if joint == comp * tail:
        alpha = RationalEnclosure.exact(1)
    else:
        alpha = _log_quotient(joint / tail, comp, width)
    return CoefficientRow(block, alpha, joint, tail, comp)


def _truncated_coefficient(model, block, n, H, width, cache=None) -> CoefficientRow:
    def absent(a):
        if cache is not None and a in cache:
            return cache[a]
        v = run_absent(model, a, H)[block]
        if cache is not None:
            cache[a] = v
        return v

    joint = absent(n)
    tail = absent(n + 1)
    comp = 1 - cond_marginal(model, n)[block]
    names = (f"P(A_{n}^c A*_{n + 1}|F)", f"P(A*_{n + 1}|F)", f"P(A_{n}^c|F)")
    return _coefficient(block, joint, tail, comp, width, names)


@dataclass(frozen=True)
class PowerCoefficient:
    n: int
    H: int
    rows: tuple

    def report(self) -> BoundReport:
        out = []
        for r in self.rows:
            if r.alpha.is_exact and r.alpha.lower == 1:
                rhs = r.complement * r.tail
            else:
                power = exp_interval(r.alpha * log_enclosure(r.complement, DEFAULT_WIDTH / 16))
                rhs = power * r.tail
            out.append(row(r.block, r.joint, rhs, "==", note=f"alpha in {r.alpha}"))
        return BoundReport("power-coefficient", tuple(out), {"n": self.n, "H": self.H},
                           {"alpha": {str(r.block): r.alpha for r in self.rows}})


def power_coefficient(model: SequenceModel, n: int, H: int, width=DEFAULT_WIDTH) -> PowerCoefficient:
    """Truncated power-A_n^c coefficient with A*_{n+1} = A_{n+1}^c ... A_H^c.

    Raises :class:`UndefinedCoefficient` naming the vanishing quantity.
    """
    if n < 1 or H <= n:
        raise InvalidInput("need n >= 1 and H > n")
    _check_explicit_range(model, H)
    rows = tuple(_truncated_coefficient(model, b, n, H, width)
                 for b, null in _blocks(model) if not null)
    return PowerCoefficient(n, H, rows)


@dataclass(frozen=True)
class MarkovCoefficientRow:
    block: int
    complement_form: RationalEnclosure | None
    displayed_form: RationalEnclosure | None
    complement_error: str = ""
    displayed_error: str = ""

    @property
    def disagree(self) -> bool:
        if self.complement_form is None or self.displayed_form is None:
            return False
        return not self.complement_form.overlaps(self.displayed_form)


def markov_power_coefficient(model: MixtureMarkov, n: int, width=DEFAULT_WIDTH) -> tuple:
    """Two closed forms of the one-step coefficient on each Markov block.

    complement form: [log P(A_n^c A_{n+1}^c) - log P(A_{n+1}^c)] / log P(A_n^c)
    displayed form:  [log P(A_n^c A_{n+1}) - log P(A_{n+1})] / log P(A_n^c)
    They coincide only in special cases; ``disagree`` flags the rest.
    """
    if not isinstance(model, MixtureMarkov):
        raise InvalidInput("markov_power_coefficient needs a MixtureMarkov model")
    if n < 1:
        raise InvalidInput("n must be >= 1")
    out = []
    for b, comp in enumerate(model.components):
        pn = comp.marginal(n)
        pn1 = comp.marginal(n + 1)
        c = 1 - pn
        forms = []
        for joint, other, jname, oname in (
                (comp.word(n, (0, 0)), 1 - pn1, f"P(A_{n}^c A_{n + 1}^c|F)", f"P(A_{n + 1}^c|F)"),
                (comp.word(n, (0, 1)), pn1, f"P(A_{n}^c A_{n + 1}|F)", f"P(A_{n + 1}|F)")):
            try:
                forms.append((_coefficient(b, joint, other, c, width,
                                           (jname, oname, f"P(A_{n}^c|F)")).alpha, ""))
            except UndefinedCoefficient as exc:
                if c in (0, 1):
                    raise
                forms.append((None, str(exc)))
        out.append(MarkovCoefficientRow(b, forms[0][0], forms[1][0], forms[0][1], forms[1][1]))
    return tuple(out)


def markov_coefficient_report(model: MixtureMarkov, n: int, width=DEFAULT_WIDTH) -> BoundReport:
    """Complement form against the truncation oracle at H = n + 1."""
    rows = []
    flags = {}
    for r in markov_power_coefficient(model, n, width):
        flags[str(r.block)] = {"displayed": r.displayed_form, "disagree": r.disagree,
                               "displayed_error": r.displayed_error}
        if r.complement_form is None:
            rows.append(inapplicable(r.block, r.complement_error, relation="=="))
            continue
        oracle = _truncated_coefficient(model, r.block, n, n + 1, width).alpha
        note = "displayed form disagrees" if r.disagree else ""
        if r.displayed_error:
            note = "displayed form undefined: " + r.displayed_error
        rows.append(row(r.block, r.complement_form, oracle, "==", note=note))
    return BoundReport("markov-power-coefficient", tuple(rows), {"n": n}, {"variants": flags})


def product_recursion_check(model: SequenceModel, n: int, k: int, H: int,
                            width=DEFAULT_WIDTH) -> BoundReport:
    """Unrolled coefficient recursion and its exponential upper bound.

    With A*_i = A_i^c ... A_H^c and alpha_i the truncated coefficients:
      log P(A*_n|F) = sum_{i=n}^{n+k-1} alpha_i log P(A_i^c|F) + log P(A*_{n+k}|F)
      P(A*_n|F) <= exp(-sum alpha_i P(A_i|F)) * P(A*_{n+k}|F)
    """
    if n < 1 or k < 1 or n + k > H:
        raise InvalidInput("need n, k >= 1 and n + k <= H")
    _check_explicit_range(model, H)
    rows = []
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block", "identity", "=="))
            rows.append(inapplicable(b, "null block", "exp-bound", "<="))
            continue
        cache: dict = {}
        try:
            coeffs = [_truncated_coefficient(model, b, i, H, width / (4 * k), cache)
                      for i in range(n, n + k)]
        except UndefinedCoefficient as exc:
            rows.append(inapplicable(b, str(exc), "identity", "=="))
            rows.append(inapplicable(b, str(exc), "exp-bound", "<="))
            continue
        start = coeffs[0].joint
        rest = coeffs[-1].tail

        def log_side(w, coeffs=coeffs, rest=rest):
            total = log_enclosure(rest, w / (2 * k + 2))
            for c in coeffs:
                total = total + c.alpha * log_enclosure(c.complement, w / (2 * k + 2))
            return total

        rows.append(decide(b, lambda w, s=start: log_enclosure(s, w), log_side, "==", "identity"))
        exponent = sum((c.alpha * (1 - c.complement) for c in coeffs), enclose(0))
        rows.append(decide(b, lambda w, s=start: s,
                           lambda w, e=-exponent, r=rest: exp_interval(e, w) * r,
                           "<=", "exp-bound", note=f"P(A*_{n + k}|F) = {rest}"))
    return BoundReport("recursion", tuple(rows), {"n": n, "k": k, "H": H})


@dataclass(frozen=True)
class WeightedSeries:
    H: int
    partials: tuple   # per block: tuple of enclosures, index n-1 -> sum up to n
    skipped: tuple    # per block: indices whose coefficient is undefined
    trend: tuple      # per block: "diverging", "bounded" or "undetermined"

    def report(self) -> BoundReport:
        rows = []
        for b, (parts, skip, trend) in enumerate(zip(self.partials, self.skipped, self.trend)):
            total = parts[-1] if parts else enclose(0)
            if skip:
                rows.append(inapplicable(b, f"coefficients undefined at n={list(skip)}; trend {trend}",
                                         lhs=total))
            else:
                rows.append(BlockRow(b, total, None, "trend", HOLDS, None, "", f"trend {trend}"))
        return BoundReport("weighted-series", tuple(rows), {"H": self.H},
                           {"trend": {str(b): t for b, t in enumerate(self.trend)}})


def weighted_divergence_series(model: SequenceModel, H: int, width=DEFAULT_WIDTH) -> WeightedSeries:
    """Partial sums of alpha_n(H) * P(A_n|F) for n = 1 .. H-1."""
    if H < 2:
        raise InvalidInput("H must be >= 2")
    _check_explicit_range(model, H)
    partials, skipped, trend = [], [], []
    for b, null in _blocks(model):
        parts, skip = [], []
        total = enclose(0)
        cache: dict = {}
        if not null:
            for i in range(1, H):
                try:
                    c = _truncated_coefficient(model, b, i, H, width / H, cache)
                except UndefinedCoefficient:
                    skip.append(i)
                    parts.append(total)
                    continue
                total = total + c.alpha * (1 - c.complement)
                parts.append(total)
        partials.append(tuple(parts))
        skipped.append(tuple(skip))
        cls = None if null else divergence_class(model, b)
        trend.append({True: "diverging", False: "bounded", None: "undetermined"}[cls])
    return WeightedSeries(H, tuple(partials), tuple(skipped), tuple(trend))


# -- second-moment inequalities ----------------------------------------------


def chung_erdos(model: SequenceModel, n: int) -> BoundReport:
    """P(A_1 ∪ ... ∪ A_n|F) >= (sum P(A_k|F))**2 / sum_{i,k} P(A_i A_k|F)."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    _check_explicit_range(model, n)
    lhs_all = union_probability(model, 1, n)
    rows = []
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block"))
            continue
        s1, s2 = _moments(model, b, n)
        if s2 == 0:
            rows.append(inapplicable(b, "double sum is 0", lhs=lhs_all[b]))
            continue
        rows.append(row(b, lhs_all[b], s1 * s1 / s2, ">="))
    return BoundReport("chung-erdos", tuple(rows), {"n": n})


def second_moment_ratio(model: SequenceModel, n: int) -> tuple[BlockFunction, BoundReport]:
    """sum_{i,k<=n} P(A_i A_k|F) / (sum_{k<=n} P(A_k|F))**2 >= 1."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    _check_explicit_range(model, n)
    values, rows = [], []
    undefined = set(null_blocks(model))
    for b, null in _blocks(model):
        if null:
            values.append(ZERO)
            rows.append(inapplicable(b, "null block"))
            continue
        s1, s2 = _moments(model, b, n)
        if s1 == 0:
            values.append(ZERO)
            undefined.add(b)
            rows.append(inapplicable(b, "marginal sum is 0"))
            continue
        ratio = s2 / (s1 * s1)
        values.append(ratio)
        rows.append(row(b, ratio, Fraction(1), ">="))
    return (BlockFunction(tuple(values), frozenset(undefined)),
            BoundReport("second-moment", tuple(rows), {"n": n}))


# -- quantitative lemmas -----------------------------------------------------


def first_bc_quantitative(model: SequenceModel, phi: RateFunction, level: int, m: int) -> BoundReport:
    """Premise sum_{i=phi(l)}^m P(A_i|F) <= 2**-l, conclusion P(∪_{i=phi(l)}^m A_i|F) <= 2**-l."""
    if level < 0:
        raise InvalidInput("level must be >= 0")
    bound = power_of_two(level)
    rows = []
    premise = {}
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block", relation="<="))
            continue
        start = phi.value(b, level)
        if start is None:
            rows.append(inapplicable(b, f"phi({level}) undefined on this block", relation="<="))
            continue
        if m <= start:
            rows.append(inapplicable(b, f"need m > phi({level}) = {start}", relation="<="))
            continue
        _check_explicit_range(model, m)
        total = _sum_marginals(model, b, start, m)
        premise[str(b)] = total
        if total > bound:
            rows.append(inapplicable(b, f"premise-violated: partial sum {total} > {bound}",
                                     relation="<="))
            continue
        rows.append(row(b, union_probability(model, start, m)[b], bound, "<=",
                        note=f"phi({level}) = {start}; premise sum {total}"))
    return BoundReport("first-bc", tuple(rows), {"l": level, "m": m}, {"premise_sum": premise})


def second_bc_quantitative(model: SequenceModel, psi: RateFunction, n: int, N: int) -> BoundReport:
    """P(A_n ∪ ... ∪ A_psi(n+N-1) | F) >= 1 - exp(-N) under conditional independence.

    The union from index 1 is implied and reported in ``extras``.
    """
    if n < 1 or N < 1:
        raise InvalidInput("need n >= 1 and N >= 1")
    M = n + N - 1
    rows = []
    from_one = {}
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block"))
            continue
        if not isinstance(model, MixtureBernoulli):
            rows.append(inapplicable(b, "conditional independence not guaranteed by the model"))
            continue
        top = psi.value(b, M)
        if top is None:
            rows.append(inapplicable(b, f"psi({M}) undefined on this block"))
            continue
        if top < n:
            rows.append(inapplicable(b, f"psi({M}) = {top} < n = {n}"))
            continue
        total = _sum_marginals(model, b, 1, top)
        if total < M:
            rows.append(inapplicable(b, f"premise-violated: partial sum {total} < {M}"))
            continue
        lhs = union_probability(model, n, top)[b]
        from_one[str(b)] = union_probability(model, 1, top)[b]
        rows.append(decide(b, lambda w, v=lhs: v, lambda w: 1 - exp_enclosure(-N, w), ">=",
                           note=f"psi({M}) = {top}"))
    return BoundReport("second-bc", tuple(rows), {"n": n, "N": N}, {"union_from_one": from_one})


def erdos_renyi_schedule(model: SequenceModel, psi: RateFunction, phi2: CorrelationRate | None,
                         n: int, level: int, j_budget: int | None = None) -> BoundReport:
    """Schedule n_1 = phi(1,1), n_k = phi(k, max(n_{k-1}, k)), m = max(psi(2n), l+3);
    checks P(A_n ∪ ... ∪ A_{n_m} | F) >= 1 - 2**-l.

    ``phi2=None`` extracts correlation rates on demand.
    """
    if n < 1 or level < 0:
        raise InvalidInput("need n >= 1 and l >= 0")
    if phi2 is None:
        phi2 = CorrelationRate(block_count(model), j_budget or 10**6)
    rhs = 1 - power_of_two(level)
    rows = []
    schedules = {}
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block"))
            continue
        top = psi.value(b, 2 * n)
        if top is None:
            rows.append(inapplicable(b, f"psi({2 * n}) undefined on this block"))
            continue
        if _sum_marginals(model, b, 1, top) < 2 * n:
            rows.append(inapplicable(b, f"premise-violated: psi({2 * n}) = {top} too small"))
            continue
        m = max(top, level + 3)
        sched, problem = [], None
        prev = None
        for k in range(1, m + 1):
            lower = 1 if k == 1 else max(prev, k)
            j = phi2.value(b, k, lower)
            if j is None:
                j = phi2.extend(model, b, k, lower)
            if j is None:
                problem = (f"rate search for phi({k},{lower}) ended "
                           f"{phi2.failure(b, k, lower)}")
                break
            if j < lower:
                problem = f"phi({k},{lower}) = {j} < {lower}"
                break
            s1, s2 = _moments(model, b, j)
            if s2 > (1 + power_of_two(k)) * s1 * s1:
                problem = f"premise-violated: ratio at phi({k},{lower}) = {j} exceeds 1 + 2^-{k}"
                break
            sched.append(j)
            prev = j
        if problem:
            rows.append(inapplicable(b, problem))
            continue
        schedules[str(b)] = {"m": m, "schedule": sched}
        lhs = union_probability(model, n, sched[-1])[b]
        rows.append(row(b, lhs, rhs, ">=", note=f"m = {m}, n_m = {sched[-1]}"))
    return BoundReport("erdos-renyi", tuple(rows), {"n": n, "l": level}, {"schedule": schedules})


def kochen_stone_quantitative(model: SequenceModel, phi: RateFunction | None, m: int, level: int,
                              g: Callable[[int], int], n_max: int = DEFAULT_SEARCH_BUDGET,
                              g_name: str = "g") -> BoundReport:
    """Least n > m with P(A_1 ∪ ... ∪ A_n|F) + 2**-l >= ratio(j) for all j in [n, g(n)],
    where ratio(j) = (sum_{k<=j} P(A_k|F))**2 / sum_{i,k<=j} P(A_i A_k|F).

    A search that runs past ``n_max`` ends inconclusive, never violated.
    """
    if m < 0 or level < 0:
        raise InvalidInput("need m >= 0 and l >= 0")
    slack = power_of_two(level)
    if phi is None:
        phi = divergence_rate(model, max(level + 1, 2), n_budget=n_max)
    rows = []
    details = {}
    for b, null in _blocks(model):
        if null:
            rows.append(inapplicable(b, "null block"))
            continue
        if not phi.applicable(b):
            rows.append(inapplicable(b, f"divergence premise unavailable: {phi.notes[b]}"))
            continue
        for N, idx in sorted(phi.tables[b].items()):
            if _sum_marginals(model, b, 1, idx) < N:
                rows.append(inapplicable(b, f"premise-violated at N={N}"))
                break
        else:
            rows.append(_ks_search(model, b, m, slack, g, n_max, details))
    return BoundReport("kochen-stone", tuple(rows),
                       {"m": m, "l": level, "g": g_name, "n_max": n_max}, {"search": details})


def _ks_search(model, b, m, slack, g, n_max, details) -> BlockRow:
    length = family_length(model)
    moments = iter_moments(model, b)
    s1s: list[Fraction] = []
    s2s: list[Fraction] = []

    def ratio(j):
        while len(s1s) < j:
            _, s1, s2 = next(moments)
            s1s.append(s1)
            s2s.append(s2)
        s1, s2 = s1s[j - 1], s2s[j - 1]
        return None if s2 == 0 else s1 * s1 / s2

    rejected = []
    for n, union in iter_union_prefix(model, b):
        if n <= m:
            continue
        if n > n_max:
            break
        hi = g(n)
        if hi <= n:
            raise InvalidInput(f"window function must satisfy g(i) > i; g({n}) = {hi}")
        if length is not None and hi > length:
            break
        lhs = union + slack
        margins = []
        failed_at = None
        for j in range(n, hi + 1):
            r = ratio(j)
            margin = lhs - (r if r is not None else ZERO)
            margins.append([j, margin])
            if margin < 0:
                failed_at = j
                break
        if failed_at is None:
            worst = max((lhs - mg for _, mg in margins))
            details[str(b)] = {"witness": n, "margins": margins, "rejected": rejected}
            return row(b, lhs, worst, ">=", note=f"witness n = {n}, window [{n}, {hi}]")
        rejected.append([n, failed_at])
    details[str(b)] = {"witness": None, "rejected": rejected}
    return BlockRow(b, None, None, ">=", INCONCLUSIVE, None, "",
                    f"budget-exhausted: no witness with n <= {n_max}")
