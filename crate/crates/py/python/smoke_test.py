"""Smoke test for the hicalib extension module.

Build and install first, e.g. from crates/py:

    maturin build --release -o dist && pip install dist/hicalib-*.whl

then run `python python/smoke_test.py`.
"""

import json
import math

import hicalib


def check_dist():
    p = hicalib.Dist([1, 1], 2)
    q = hicalib.Dist([3, 1], 4)
    assert p == hicalib.Dist.uniform(2)
    assert p.numerators == [1, 1] and p.denominator == 2
    assert hicalib.l1_distance(p, q) == 0.5
    assert abs(hicalib.kl_divergence(q, p) - 0.13081203594113697) < 1e-12
    assert abs(hicalib.entropy(p) - math.log(2)) < 1e-12
    # numerators beyond 64 bits survive the round trip
    big = 2**80
    r = hicalib.Dist([big, big + 2], 2 * big + 2)
    assert r.denominator == big + 1
    try:
        hicalib.Dist([1, 1], 3)
    except hicalib.HicalibError:
        pass
    else:
        raise AssertionError("numerators must sum to the denominator")


def check_forecaster():
    cfg = hicalib.ForecastConfig(2, 2, 2, 2, 1)
    assert (cfg.d, cfg.L, cfg.H, cfg.S, cfg.m, cfg.T) == (2, 2, 2, 2, 1, 8)
    paper = hicalib.ForecastConfig.paper_parameters(2, 0.5)
    assert (paper.m, paper.H, paper.L, paper.S, paper.T) == (2, 16, 3, 512, 2_097_152)

    f = hicalib.HierarchicalForecaster(hicalib.ForecastConfig(2, 2, 2, 1, 1))
    first = f.mixture(1)
    assert first == [(hicalib.Dist.uniform(2), 2, 2)]
    for t, x in enumerate([1, 2, 1, 2], start=1):
        f.mixture(t)
        f.observe(t, x)


def check_runs():
    cfg = hicalib.ForecastConfig(3, 2, 4, 8, 2)
    tr = hicalib.simulate(cfg, seed=5, adversary="iid", q=[1, 2, 3], mode="sampled")
    assert tr.T == cfg.T and tr.d == 3
    assert 0 <= tr.dce() <= 2 * tr.T
    assert tr.ece() >= 0
    cert = tr.certify()
    assert cert.passed, cert.failures()
    chain = cert.chain()
    assert chain["A0"] <= chain["A1"] <= chain["A2"] <= chain["A3"]
    assert json.loads(cert.to_json())["run_id"] == tr.run_id

    again = hicalib.Transcript.from_jsonl(tr.to_jsonl())
    assert again.outcomes() == tr.outcomes()
    assert again.to_jsonl() == tr.to_jsonl()

    adaptive = hicalib.simulate(cfg, seed=5, adversary="adaptive_argmin")
    assert adaptive.certify().passed


def check_hard_sequence():
    p = hicalib.hard_day_distribution(2, 2, seed=1, t=1)
    assert p.dim == 8 and sum(p.numerators) == p.denominator
    report = hicalib.lowerbound(2, 2, forecaster="truthful", trials=100, seed=3)
    assert report["reference"] == 2.0**-12 * 2
    assert report["pass"]


if __name__ == "__main__":
    check_dist()
    check_forecaster()
    check_runs()
    check_hard_sequence()
    print("hicalib smoke test passed")
