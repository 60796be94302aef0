"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
when output capture is on) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import filecmp
import math
import os
import time

import numpy as np
import pytest

from fixtures import fixture_run
from gradient_cases import CASES
from multike import attribute_view as av
from multike import relation_view as rv
from multike.cli import main as cli_main
from multike.combination import combine_wva, orthogonality_residual
from multike.evaluation import compute_metrics, rank_candidates
from multike.optim import finite_difference_check


def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_gradient_suite(capsys):
    start = time.perf_counter()
    worst = {}
    for name, build in CASES.items():
        for seed in range(3):
            loss_fn, params = build(seed)
            err, _ = finite_difference_check(loss_fn, params, h=1e-5, tolerance=1e-4)
            worst[name] = max(worst.get(name, 0.0), err)
    elapsed = time.perf_counter() - start
    top = max(worst.values())
    ok = top < 1e-4 and elapsed < 30.0
    report(capsys, 1, "finite-difference gradients of every loss", ok,
           f"max rel. error {top:.2e} over {len(worst)} losses, {elapsed:.1f}s")


# -- 2 ----------------------------------------------------------------------

def _formula_checks():
    """(description, computed, expected) triples with closed-form expectations."""
    checks = [
        ("score_rel zero", rv.score_rel([0, 0], [0, 0], [0, 0]), 0.0),
        ("score_rel translation", rv.score_rel([1, 0], [0, 1], [1, 1]), 0.0),
        ("score_rel unit", rv.score_rel([1, 0], [0, 0], [0, 0]), -1.0),
        ("prob_rel translation", rv.prob_rel([1, 0], [0, 1], [1, 1]), 0.5),
        ("prob_rel f=-1", rv.prob_rel([1, 0], [0, 0], [0, 0]), 1.0 / (1.0 + math.e)),
    ]
    zero = {rv.ENT: np.zeros((2, 3)), rv.REL: np.zeros((1, 3))}
    pos = np.array([[0, 0, 1]])
    checks.append(("relation loss, one positive",
                   rv.loss_relation_view(zero, pos)[0], math.log(2.0)))
    checks.append(("relation loss, positive and negative",
                   rv.loss_relation_view(zero, pos, np.array([[1, 0, 0]]))[0], 2 * math.log(2.0)))
    checks.append(("cross-entity loss, empty seed",
                   rv.loss_cross_entity_rel(zero, pos, {})[0], 0.0))
    rng = np.random.default_rng(0)
    params = {rv.ENT: rng.normal(size=(3, 4)), rv.REL: rng.normal(size=(1, 4))}
    params[rv.ENT][2] = params[rv.ENT][0]
    base = math.log1p(math.exp(-rv.score_rel(params[rv.ENT][0], params[rv.REL][0],
                                             params[rv.ENT][1])))
    checks.append(("cross-entity substitution identity",
                   rv.loss_cross_entity_rel(params, pos, {0: 2})[0], base))
    d, c = 6, 4
    attr = {av.ENT: np.zeros((1, d)), av.ATTR: np.zeros((1, d))}
    attr.update({av.CONV: np.zeros((2, 2, c)), av.DENSE_W: np.zeros((2 * (d - c + 1), d)),
                 av.DENSE_B: np.zeros(d)})
    checks.append(("attribute loss, f=0",
                   av.loss_attribute_view(attr, np.array([[0, 0, 0]]), np.zeros((1, d)))[0],
                   math.log(2.0)))
    combined, _ = combine_wva([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])])
    checks.append(("WVA orthogonal pair, first coordinate", combined[0, 0], 0.5))
    checks.append(("WVA orthogonal pair, second coordinate", combined[0, 1], 0.5))
    return checks


def test_criterion_2_formula_oracles(capsys):
    failures = [name for name, got, want in _formula_checks() if abs(got - want) > 1e-9]
    rng = np.random.default_rng(3)
    views = [rng.normal(size=(50, 8)) for _ in range(3)]
    masks = rng.random((50, 3)) < 0.8
    masks[:, 1] = True
    _, weights = combine_wva(views, masks)
    sum_err = float(np.max(np.abs(weights.sum(axis=1) - 1.0)))
    same = rng.normal(size=(4, 8))
    sym_combined, sym_weights = combine_wva([same, same, same])
    symmetric = (np.allclose(sym_weights, 1.0 / 3.0, rtol=0, atol=1e-12)
                 and np.allclose(sym_combined, same, rtol=0, atol=1e-12))
    ok = not failures and sum_err <= 1e-12 and symmetric
    report(capsys, 2, "formula oracles and WVA weights", ok,
           f"{len(_formula_checks()) - len(failures)}/{len(_formula_checks())} closed forms, "
           f"WVA weight-sum error {sum_err:.1e}, symmetry {'ok' if symmetric else 'broken'}")


# -- 3 ----------------------------------------------------------------------

def brute_force_ranks(emb, pairs):
    """Naive double loop over candidates with Python floats."""
    candidates = sorted({int(t) for _, t in pairs})

    def cos(a, b):
        dot = sum(float(x) * float(y) for x, y in zip(a, b))
        na = math.sqrt(sum(float(x) ** 2 for x in a))
        nb = math.sqrt(sum(float(y) ** 2 for y in b))
        return 0.0 if na == 0 or nb == 0 else dot / (na * nb)

    ranks = []
    for s, t in pairs:
        scores = {c: cos(emb[s], emb[c]) for c in candidates}
        rank = 1
        for c in candidates:
            if scores[c] > scores[t] or (scores[c] == scores[t] and c < t):
                rank += 1
        ranks.append(rank)
    return ranks


def brute_force_metrics(ranks):
    n = len(ranks)
    hits1 = 100.0 * sum(1 for r in ranks if r <= 1) / n
    hits10 = 100.0 * sum(1 for r in ranks if r <= 10) / n
    return hits1, hits10, math.fsum(ranks) / n, math.fsum(1.0 / r for r in ranks) / n


def _random_instance(rng):
    n_src = int(rng.integers(2, 101))
    n_tgt = n_src
    d = int(rng.integers(2, 9))
    emb = rng.normal(size=(n_src + n_tgt, d))
    # duplicated target rows produce exact ties
    dup = rng.integers(n_src, n_src + n_tgt, size=max(1, n_tgt // 10))
    emb[dup] = emb[rng.integers(n_src, n_src + n_tgt, size=len(dup))]
    perm = rng.permutation(n_tgt) + n_src
    k = int(rng.integers(1, n_src + 1))
    return emb, np.column_stack([np.arange(k), perm[:k]])


def test_criterion_3_metric_oracle(capsys):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(50):
        emb, pairs = _random_instance(rng)
        ranks = brute_force_ranks(emb, pairs)
        report_ = compute_metrics(rank_candidates(emb, pairs))
        ours = (report_.hits[1], report_.hits[10], report_.mr, report_.mrr)
        if ours != brute_force_metrics(ranks):
            mismatches += 1
    report(capsys, 3, "metrics equal the brute-force oracle", mismatches == 0,
           f"{50 - mismatches}/50 instances identical")


# -- 4 to 7, 9 --------------------------------------------------------------

def test_criterion_4_end_to_end(capsys):
    run = fixture_run()
    hits = run.hits1["combined"]
    ok = hits >= 90.0 and run.seconds < 300.0
    report(capsys, 4, "end-to-end ITC run on the synthetic fixture", ok,
           f"Hits@1 {hits:.2f} (>= 90), {run.seconds:.1f}s")


def test_criterion_5_ablation_direction(capsys):
    itc = fixture_run()
    independent = fixture_run(combination="wva")
    rel_ok = itc.hits1["relation"] > independent.hits1["relation"]
    best_single = max(itc.hits1[v] for v in ("name", "relation", "attribute"))
    comb_ok = itc.hits1["combined"] >= best_single
    report(capsys, 5, "ITC helps the relation view and dominates single views",
           rel_ok and comb_ok,
           f"relation {itc.hits1['relation']:.2f} vs independent "
           f"{independent.hits1['relation']:.2f}; combined {itc.hits1['combined']:.2f} vs "
           f"best view {best_single:.2f}")


def test_criterion_6_cra_direction(capsys):
    rows = []
    for seed in (0, 1, 2):
        with_cra = fixture_run(seed=seed).hits1["attribute"]
        without = fixture_run(seed=seed, cra=False).hits1["attribute"]
        rows.append((seed, with_cra, without))
    ok = all(w >= wo - 1.0 for _, w, wo in rows)
    detail = "; ".join(f"seed {s}: {w:.2f} vs {wo:.2f}" for s, w, wo in rows)
    report(capsys, 6, "CRA does not reduce attribute-view Hits@1", ok, detail)


def test_criterion_7_unsupervised(capsys):
    itc = fixture_run(seed_ratio=0.0)
    independent = fixture_run(seed_ratio=0.0, combination="wva")
    gap = itc.hits1["combined"] - independent.hits1["relation"]
    report(capsys, 7, "unsupervised ITC beats the relation view alone", gap >= 20.0,
           f"ITC {itc.hits1['combined']:.2f} vs relation-only "
           f"{independent.hits1['relation']:.2f}, gap {gap:.2f} (>= 20)")


def test_criterion_9_ssl_orthogonality(capsys):
    run = fixture_run(combination="ssl")
    residuals = [orthogonality_residual(z) for z in run.result.combined.mappings]
    ok = len(residuals) == 3 and max(residuals) <= 0.05
    report(capsys, 9, "shared-space mappings stay orthogonal", ok,
           "residuals " + ", ".join(f"{r:.4f}" for r in residuals) + " (<= 0.05)")


# -- 8 ----------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path, capsys):
    data = tmp_path / "data"
    assert cli_main(["gen-synth", "--entities", "80", "--seed", "5", "--dim", "16",
                     "--out", str(data)]) == 0
    outputs = []
    for name in ("a", "b"):
        run = tmp_path / name
        assert cli_main(["train", "--data", str(data), "--out", str(run), "--epochs", "4",
                         "--dim", "16", "--set", "learning_rate=0.1"]) == 0
        assert cli_main(["evaluate", "--run", str(run), "--workers", "2"]) == 0
        outputs.append(run)
    files = ["checkpoint.bin", "train_log.jsonl", "metrics.json", "metrics.txt"]
    same = [filecmp.cmp(outputs[0] / f, outputs[1] / f, shallow=False) for f in files]
    report(capsys, 8, "identical runs give byte-identical outputs", all(same),
           ", ".join(f"{f} {'same' if s else 'DIFFERENT'}" for f, s in zip(files, same)))


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([os.path.abspath(__file__), "-q"]))
