"""Exit criteria, one test per criterion, at the tolerances they state."""

import math
import time

import numpy as np
import pytest

from steerkit import analysis as an
from steerkit import assemblages as asm
from steerkit import measurements as ms
from steerkit import steering as stg

PRIMES = (2, 3, 5, 7, 11, 13)


@pytest.fixture
def criterion(record_property):
    def note(k, text):
        record_property("acceptance", (k, text))

    return note


def test_01_mub_overlap(criterion):
    t0 = time.perf_counter()
    errs = {d: abs(ms.max_overlap(ms.mub_prime(d)) - 1 / math.sqrt(d)) for d in PRIMES}
    elapsed = time.perf_counter() - t0
    criterion(1, f"max |cosθ - 1/√d| = {max(errs.values()):.2e} (tol 1e-9), {elapsed:.3f}s (< 1s)")
    assert max(errs.values()) <= 1e-9
    assert elapsed < 1.0


def test_02_analytic_vs_exact_bound(criterion):
    f = stg.build_functional(ms.mub_prime(2))
    assert f.alpha == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    rep = stg.exact_lhs_bound(f)
    eq8 = stg.analytic_lhs_bound(3, 1 / math.sqrt(2))
    criterion(
        2,
        f"{rep.strategies} strategies, exact {rep.exact_bound:.12f} vs 1+√2 {eq8:.12f}, "
        f"k=0 class {rep.per_class_max[0]:.6f}",
    )
    assert rep.strategies == 27
    assert abs(rep.exact_bound - (1 + math.sqrt(2))) <= 1e-9
    assert abs(rep.exact_bound - eq8) <= 1e-9
    assert abs(rep.per_class_max[0] - (3 + math.sqrt(3)) / 2) <= 1e-9


def test_03_critical_efficiency(criterion):
    errs = {}
    for d in (2, 3, 5):
        mset = ms.mub_prime(d)
        f = stg.build_functional(mset, use_transpose=True)
        bound = stg.analytic_lhs_bound(mset.n, ms.max_overlap(mset))
        base = asm.assemble(asm.max_entangled(d), mset)
        flip = an.bisect_flip(
            lambda e: an.violation(f, asm.apply_loss(base, e), bound).violated, 0.0, 1.0, 1e-7
        )
        errs[d] = abs(flip - 1 / (d + 1))
    criterion(3, "bisection η* vs 1/(d+1): " + ", ".join(f"d={d} {e:.1e}" for d, e in errs.items()))
    assert max(errs.values()) <= 1e-6


def test_04_boundary_exactness(criterion):
    worst = 0.0
    for d in PRIMES:
        n, c = d + 1, 1 / math.sqrt(d)
        worst = max(worst, abs(an.quantum_beta(n, c, 1 / n) - stg.analytic_lhs_bound(n, c)))
    for n in range(2, 10):
        for c in np.linspace(0, 0.99, 12):
            worst = max(worst, abs(an.quantum_beta(n, c, 1 / n) - stg.analytic_lhs_bound(n, c)))
    criterion(4, f"max |β(1/n) - β_LHS| = {worst:.1e} (tol 1e-12)")
    assert worst <= 1e-12


def test_05_noise_threshold(criterion):
    c = 1 / math.sqrt(2)
    w_c = an.critical_w(3, 2, c, 1.0)
    mset = ms.mub_prime(2)
    f = stg.build_functional(mset, use_transpose=True)
    bound = stg.analytic_lhs_bound(3, c)
    flip = an.bisect_flip(
        lambda w: an.violation(f, asm.noisy_lossy_assemblage(2, mset, 1.0, w), bound).violated,
        0.0, 1.0, 1e-8,
    )
    criterion(5, f"w_c = {w_c:.8f} (target 0.60948 ± 1e-4), bisection {flip:.8f} (tol 1e-5)")
    assert abs(w_c - 0.60948) <= 1e-4
    assert abs(flip - w_c) <= 1e-5


def test_06_region_growth(criterion):
    t0 = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 101)
    frac = [an.demonstrable_fraction(an.scan_region(d, d + 1, grid, grid)) for d in (2, 3, 5)]
    elapsed = time.perf_counter() - t0
    criterion(6, f"demonstrable fraction d=2,3,5: {frac[0]:.4f} < {frac[1]:.4f} < {frac[2]:.4f}, {elapsed:.2f}s (< 5s)")
    assert frac[0] < frac[1] < frac[2]
    assert elapsed < 5.0


def test_07_asymptotics(criterion):
    ds = (3, 5, 7, 11, 13)
    dev = [abs(an.critical_eta(d + 1, d, 1 / math.sqrt(d), 0.9) * 0.9 * d - 1) for d in ds]
    wres = [abs(an.critical_w(d + 1, d, 1 / math.sqrt(d), 1.0) - 1 / math.sqrt(d)) * d for d in ds]
    criterion(
        7,
        "|η_c·w·d - 1|: " + ", ".join(f"{v:.4f}" for v in dev)
        + "; |w_c - 1/√d|·d: " + ", ".join(f"{v:.4f}" for v in wres),
    )
    assert all(b < a for a, b in zip(dev, dev[1:]))
    # bounded by a constant: no growth beyond the first value's scale
    assert max(wres) <= 1.0


def test_08_unbounded_violation(criterion):
    v = {d: an.normalized_violation(an.quantum_beta(d + 1, 1 / math.sqrt(d), 1.0),
                                    stg.analytic_lhs_bound(d + 1, 1 / math.sqrt(d))) for d in PRIMES}
    for d in PRIMES:
        assert v[d] == pytest.approx((d + 1) / (1 + math.sqrt(d)), abs=1e-12)
    increasing = all(v[b] > v[a] for a, b in zip(PRIMES, PRIMES[1:]))
    ratios = {d: v[d] / math.sqrt(d) for d in (5, 7, 11, 13)}
    criterion(
        8,
        "V/√d for d=5,7,11,13: " + ", ".join(f"{r:.4f}" for r in ratios.values())
        + f" (need ≥ 0.9); strictly increasing: {increasing}",
    )
    assert increasing
    assert all(v[d] >= 0.9 * math.sqrt(d) for d in (5, 7, 11, 13))


def test_09_norm_lemma(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = -np.inf
    for _ in range(1000):
        ell, d = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        vs = rng.normal(size=(ell, d)) + 1j * rng.normal(size=(ell, d))
        vs /= np.linalg.norm(vs, axis=1, keepdims=True)
        lhs, bound = stg.projector_sum_norm_check([np.outer(u, u.conj()) for u in vs])
        worst = max(worst, lhs - bound)
    tight = []
    for ell in range(2, 7):
        u = vs[0]
        p = np.outer(u, u.conj())
        tight.append(stg.projector_sum_norm_check([p] * ell))
        basis = ms.random_basis(8, ell)
        tight.append(stg.projector_sum_norm_check(list(basis.projectors[:ell])))
    tight_err = max(abs(a - b) for a, b in tight)
    elapsed = time.perf_counter() - t0
    criterion(9, f"max(lhs - bound) = {worst:.3e} (≤ 1e-9), tight-case gap {tight_err:.1e} (≤ 1e-10), {elapsed:.2f}s")
    assert worst <= 1e-9
    assert tight_err <= 1e-10
    assert elapsed < 10.0


def test_10_lhs_soundness_attainability(criterion):
    notes = []
    for d in (2, 3):
        f = stg.build_functional(ms.mub_prime(d), use_transpose=True)
        rep = stg.exact_lhs_bound(f)
        rng = np.random.default_rng(100 + d)
        top = max(
            an.beta_value(f, asm.random_lhs_assemblage(f.n, d, rng, terms=int(rng.integers(1, 6))))
            for _ in range(500)
        )
        g = stg.strategy_operator(f, rep.argmax_strategy)
        vec = np.linalg.eigh(g)[1][:, -1]
        witness = asm.lhs_assemblage([1.0], [rep.argmax_strategy], [np.outer(vec, vec.conj())])
        gap = abs(an.beta_value(f, witness) - rep.exact_bound)
        notes.append((d, top, rep.exact_bound, gap))
    criterion(10, "; ".join(f"d={d}: max random β {t:.6f} ≤ {b:.6f}, witness gap {g:.1e}" for d, t, b, g in notes))
    for _, top, bound, gap in notes:
        assert top <= bound + 1e-9
        assert gap <= 1e-9


def test_11_joint_measurability(criterion):
    details = []
    for d in (2, 3, 5):
        mset = ms.mub_prime(d)
        n = mset.n
        parent = ms.parent_povm(mset)
        target = ms.lossy_povm(mset, 1 / n).elements
        resid = max(np.max(np.abs(np.stack(ms.marginalize(parent, x)) - target[x])) for x in range(n))
        valid = parent.is_valid(1e-10)
        eta = 1 / n + 0.01
        f = stg.build_functional(mset, use_transpose=True)
        bound = stg.analytic_lhs_bound(n, ms.max_overlap(mset))
        beta = an.beta_value(f, asm.apply_loss(asm.assemble(asm.max_entangled(d), mset), eta))
        details.append((d, resid, valid, parent.completeness_error(), beta - bound))
    criterion(
        11,
        "; ".join(f"d={d}: marginal resid {r:.1e}, valid {v}, completeness {c:.1e}, β-bound {m:+.4f}"
                  for d, r, v, c, m in details),
    )
    for _, resid, valid, comp, margin in details:
        assert resid <= 1e-12
        assert valid and comp <= 1e-10
        assert margin > 0


def test_12_schmidt_state(criterion):
    zx = ms.mub_prime(2).subset([0, 1])
    f = asm.filtered_functional(zx, [0.9, 0.1])
    state = asm.schmidt_state([0.9, 0.1])
    beta = an.beta_value(f, asm.apply_loss(asm.assemble(state, zx), 0.75))
    margin = beta - (1 + f.alpha)
    criterion(12, f"cosθ' = {f.alpha:.6f}, β = {beta:.6f}, margin over 1+cosθ' = {margin:.6f}")
    assert f.alpha < 1
    assert margin > 0


def test_13_transpose_law(criterion):
    worst = 0.0
    count = 0
    for d in (2, 3, 5):
        sets = [ms.mub_prime(d)] + [ms.random_set(d, 3, 1000 * d + s) for s in range(20)]
        for mset in sets:
            a = asm.assemble(asm.max_entangled(d), mset)
            worst = max(worst, float(np.max(np.abs(a.members - np.swapaxes(mset.projectors, -1, -2) / d))))
            count += 1
    criterion(13, f"{count} sets, max |σ - Πᵀ/d| = {worst:.1e} (tol 1e-12)")
    assert worst <= 1e-12
