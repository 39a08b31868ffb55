import pathlib

import numpy as np
import pytest

from pursuitlab.pursuit import PursuitConfig, TerminationRule, run_mmp_df
from pursuitlab.ripcert import (
    BoundPair,
    EnumerationCapError,
    RicCertificate,
    check_recovery_condition,
    compute_ric,
    lemma1_bounds,
    matrix_digest,
)

from _oracles import random_orthonormal, ric_bruteforce


# --- compute_ric ---------------------------------------------------------------

def test_ric_orthonormal_is_isometry():
    rng = np.random.default_rng(5)
    a = random_orthonormal(rng, 9)
    for s in (1, 2, 4, 9):
        cert = compute_ric(a, s)
        assert cert.delta == pytest.approx(0.0, abs=1e-12)
        assert cert.subset_size == s


def test_ric_duplicated_column():
    # Gram of [e1, e1] is all-ones: spectrum {0, 2}, so delta hits exactly 1.
    a = np.zeros((4, 2))
    a[0, 0] = a[0, 1] = 1.0
    cert = compute_ric(a, 2)
    assert cert.delta == pytest.approx(1.0, abs=1e-14)
    assert cert.extremal_subset == (0, 1)


def test_ric_matches_charpoly_oracle():
    for seed in (11, 12, 13, 14):
        rng = np.random.default_rng(seed)
        a = rng.normal(0.0, 1.0 / np.sqrt(8), size=(8, 12))
        cert = compute_ric(a, 3)
        assert cert.delta == pytest.approx(ric_bruteforce(a, 3), abs=1e-9)


def test_ric_extremal_subset_attains_delta():
    rng = np.random.default_rng(17)
    a = rng.normal(0.0, 1.0 / np.sqrt(7), size=(7, 11))
    cert = compute_ric(a, 3)
    idx = list(cert.extremal_subset)
    assert len(idx) == 3 and len(set(idx)) == 3
    assert all(0 <= j < 11 for j in idx)
    eigs = np.linalg.eigvalsh(a[:, idx].T @ a[:, idx])
    assert max(eigs[-1] - 1.0, 1.0 - eigs[0]) == pytest.approx(cert.delta,
                                                               abs=1e-12)


def test_ric_monotone_in_subset_size():
    rng = np.random.default_rng(19)
    for _ in range(8):
        a = rng.normal(0.0, 1.0 / np.sqrt(6), size=(6, 9))
        deltas = [compute_ric(a, s).delta for s in (1, 2, 3, 4)]
        for lo, hi in zip(deltas, deltas[1:]):
            assert lo <= hi + 1e-12


def test_ric_scale_law_on_isometry():
    # Scaling an isometry by c moves both extreme eigenvalues to c^2.
    rng = np.random.default_rng(23)
    a = random_orthonormal(rng, 8)
    for c in (0.9, 1.1):
        cert = compute_ric(c * a, 3)
        assert cert.delta == pytest.approx(abs(c * c - 1.0), abs=1e-12)


def test_ric_cap_refusal():
    rng = np.random.default_rng(29)
    a = rng.standard_normal((6, 12))
    with pytest.raises(EnumerationCapError):
        compute_ric(a, 3, subset_cap=219)  # C(12,3) = 220
    assert isinstance(EnumerationCapError("x"), ValueError)
    cert = compute_ric(a, 3, subset_cap=220)  # boundary is inclusive
    assert cert.subset_size == 3


def test_ric_validations():
    a = np.eye(4)
    with pytest.raises(ValueError):
        compute_ric(a, 0)
    with pytest.raises(ValueError):
        compute_ric(a, 5)
    with pytest.raises(ValueError):
        compute_ric(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1)
    with pytest.raises(ValueError):
        RicCertificate(2, 0.5, (1,), "d")  # subset size mismatch
    with pytest.raises(ValueError):
        RicCertificate(1, -0.1, (0,), "d")


def test_matrix_digest_distinguishes():
    a = np.arange(12, dtype=float).reshape(3, 4)
    assert matrix_digest(a) == matrix_digest(a.copy())
    b = a.copy()
    b[1, 2] += 1e-12
    assert matrix_digest(a) != matrix_digest(b)
    assert matrix_digest(np.zeros((2, 3))) != matrix_digest(np.zeros((3, 2)))


# --- lemma1_bounds -------------------------------------------------------------

def test_bounds_equal_arguments():
    for k in (1, 2, 7, 64):
        pair = lemma1_bounds(k, k)
        assert pair.bound_loose == pytest.approx(0.5, abs=1e-15)


def test_bounds_spot_values():
    pair = lemma1_bounds(9, 4)
    assert pair.bound_loose == pytest.approx(0.4, abs=1e-15)
    assert pair.bound_tight == pytest.approx(2.0 / 7.0, abs=1e-15)
    assert pair == BoundPair(9, 4, pair.bound_loose, pair.bound_tight)


def test_bounds_ordering_on_grid():
    for k in range(1, 101):
        for l in range(1, 101):
            pair = lemma1_bounds(k, l)
            assert pair.bound_loose > pair.bound_tight


def test_bounds_monotone_on_grid():
    # Increasing the branch width raises both thresholds; increasing the
    # sparsity lowers them.
    for k in range(1, 31):
        for l in range(1, 30):
            a, b = lemma1_bounds(k, l), lemma1_bounds(k, l + 1)
            assert b.bound_loose > a.bound_loose
            assert b.bound_tight > a.bound_tight
    for l in range(1, 31):
        for k in range(1, 30):
            a, b = lemma1_bounds(k, l), lemma1_bounds(k + 1, l)
            assert b.bound_loose < a.bound_loose
            assert b.bound_tight < a.bound_tight


def test_bounds_validation():
    with pytest.raises(ValueError):
        lemma1_bounds(0, 1)
    with pytest.raises(ValueError):
        lemma1_bounds(1, 0)


# --- check_recovery_condition ---------------------------------------------------

def test_check_orthonormal_passes_both():
    rng = np.random.default_rng(31)
    a = random_orthonormal(rng, 10)
    for which in ("loose", "tight"):
        ok, cert = check_recovery_condition(a, 2, 2, which)
        assert ok
        assert cert.delta == pytest.approx(0.0, abs=1e-12)
        assert cert.subset_size == 4


def test_check_duplicated_column_fails_both():
    a = np.eye(4)[:, [0, 0, 1, 2]]
    for which in ("loose", "tight"):
        ok, cert = check_recovery_condition(a, 1, 1, which)
        assert not ok
        assert cert.delta == pytest.approx(1.0, abs=1e-14)


def test_check_tight_implies_loose():
    rng = np.random.default_rng(37)
    for _ in range(10):
        a = rng.normal(0.0, 1.0 / np.sqrt(8), size=(8, 10))
        loose_ok, _ = check_recovery_condition(a, 2, 1, "loose")
        tight_ok, _ = check_recovery_condition(a, 2, 1, "tight")
        assert not (tight_ok and not loose_ok)


def test_check_which_validation():
    with pytest.raises(ValueError):
        check_recovery_condition(np.eye(4), 1, 1, "medium")


# --- certified recovery property -------------------------------------------------

def _tiny_dictionary(rng, i):
    # Alternate two families: perturbed orthonormal bases, whose restricted
    # isometry constants spread across the certification threshold, and
    # renormalized partial-orthogonal frames, which at this scale sit above
    # it and exercise the rejection path.
    m = int(rng.integers(9, 13))
    if i % 2 == 0:
        sigma = float(rng.uniform(0.05, 0.35))
        a = random_orthonormal(rng, m)
        a = a + sigma * rng.standard_normal((m, m)) / np.sqrt(m)
    else:
        n = int(rng.integers(m + 1, 15))
        a = random_orthonormal(rng, n)[:m, :]
    return a / np.linalg.norm(a, axis=0, keepdims=True)


def test_certified_dictionaries_recover_sparse_signals(tmp_path):
    # Wherever the loose certificate holds for (K, L) = (2, 2), depth-first
    # search with branch width 2 and an ample budget must recover every
    # 2-sparse signal exactly. A failing instance is saved for inspection
    # before the test is failed.
    rng = np.random.default_rng(41)
    k, l = 2, 2
    cfg = PursuitConfig("mmp-df", TerminationRule.sparsity(k),
                        branch_factor=l, max_paths=64)
    certified = rejected = 0
    for i in range(30):
        a = _tiny_dictionary(rng, i)
        n = a.shape[1]
        ok, cert = check_recovery_condition(a, k, l, "loose")
        if not ok:
            rejected += 1
            continue
        certified += 1
        for _ in range(3):
            support = np.sort(rng.choice(n, size=k, replace=False))
            x = np.zeros(n)
            x[support] = rng.standard_normal(k) + np.sign(rng.standard_normal(k))
            res = run_mmp_df(a, a @ x, cfg)
            if sorted(res.support) != list(support):
                path = tmp_path / "ric_recovery_counterexample.npz"
                np.savez(path, a=a, x=x, support=support,
                         delta=cert.delta, k=k, l=l)
                pytest.fail(f"certified instance missed recovery; "
                            f"saved to {path}")
    assert certified >= 5  # the property must not pass vacuously
    assert rejected >= 5   # nor may the certificate gate be a rubber stamp
