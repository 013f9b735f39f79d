"""Metric arithmetic and the selection rule."""

import numpy as np
import pytest

from robustaug.corrupt import SIGMA_SUITE
from robustaug.metrics import (
    Candidate,
    EvalResult,
    accuracy,
    corruption_error,
    mce,
    relative_gaussian_robustness,
    select_hparams,
)


def eval_result(clean, corrupted):
    if np.isscalar(corrupted):
        corrupted = [corrupted] * 6
    return EvalResult(
        clean_accuracy=clean,
        per_sigma_accuracy=dict(zip(SIGMA_SUITE, corrupted)),
    )


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([1, 2, 3], [4, 5, 6]) == 0.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75


def test_accuracy_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        accuracy([1, 2], [1])
    with pytest.raises(ValueError, match="empty"):
        accuracy([], [])


def test_relative_robustness_arithmetic():
    assert relative_gaussian_robustness(eval_result(0.9, 0.9)) == 0.0
    assert abs(relative_gaussian_robustness(eval_result(0.96, 0.90)) - (-0.06)) < 1e-12
    r = relative_gaussian_robustness(eval_result(0.90, [0.9, 0.9, 0.9, 0.9, 0.9, 0.96]))
    assert abs(r - 0.01) < 1e-12


def test_relative_robustness_requires_all_sigmas():
    e = eval_result(0.9, 0.8)
    del e.per_sigma_accuracy[0.5]
    with pytest.raises(ValueError, match="missing sigma"):
        relative_gaussian_robustness(e)


def test_relative_robustness_bounded():
    rng = np.random.default_rng(0)
    for _ in range(200):
        e = eval_result(rng.random(), rng.random(6).tolist())
        assert -1.0 <= relative_gaussian_robustness(e) <= 1.0


def two_kind_maps():
    model = {
        ("gaussian_noise", 1): 0.2,
        ("gaussian_noise", 2): 0.4,
        ("brightness", 1): 0.1,
        ("brightness", 2): 0.1,
    }
    baseline = {
        ("gaussian_noise", 1): 0.4,
        ("gaussian_noise", 2): 0.4,
        ("brightness", 1): 0.2,
        ("brightness", 2): 0.3,
    }
    return model, baseline


def test_ce_self_normalization_exact():
    _, baseline = two_kind_maps()
    ce = corruption_error(baseline, baseline)
    assert all(v == 1.0 for v in ce.values())
    assert mce(ce) == 1.0


def test_ce_ratio_of_sums():
    model, baseline = two_kind_maps()
    ce = corruption_error(model, baseline)
    assert abs(ce["gaussian_noise"] - 0.6 / 0.8) < 1e-15
    assert abs(ce["brightness"] - 0.2 / 0.5) < 1e-15


def test_ce_halved_errors():
    _, baseline = two_kind_maps()
    model = {k: v / 2 for k, v in baseline.items()}
    ce = corruption_error(model, baseline)
    assert all(abs(v - 0.5) < 1e-15 for v in ce.values())


def test_ce_scale_invariance():
    model, baseline = two_kind_maps()
    ce = corruption_error(model, baseline)
    scaled = corruption_error(
        {k: 3.7 * v for k, v in model.items()},
        {k: 3.7 * v for k, v in baseline.items()},
    )
    for kind in ce:
        assert abs(ce[kind] - scaled[kind]) < 1e-12
    assert abs(mce(ce) - mce(scaled)) < 1e-12


def test_ce_key_mismatch():
    model, baseline = two_kind_maps()
    del model[("brightness", 2)]
    with pytest.raises(ValueError, match="key mismatch"):
        corruption_error(model, baseline)


def test_ce_degenerate_baseline():
    model = {("brightness", 1): 0.1}
    baseline = {("brightness", 1): 0.0}
    with pytest.raises(ValueError, match="degenerate baseline"):
        corruption_error(model, baseline)


def test_mce_examples():
    assert mce({"a": 0.6, "b": 0.9}) == 0.75
    assert mce({"gaussian_noise": 0.2, "brightness": 0.8}, exclude_noise=True) == 0.8


def test_mce_noise_only_map_raises():
    noise_only = {"gaussian_noise": 0.5, "shot_noise": 0.6, "impulse_noise": 0.7}
    with pytest.raises(ValueError, match="no corruption kinds"):
        mce(noise_only, exclude_noise=True)
    assert abs(mce(noise_only) - 0.6) < 1e-15


def test_selection_gate_and_fallback():
    a = Candidate("A", eval_result(0.97, 0.92))  # rob -0.05
    b = Candidate("B", eval_result(0.96, 0.94))  # rob -0.02, fails gate
    assert select_hparams([a, b], z=0.965).label == "A"
    # Both qualify at a lower gate: the more robust B wins.
    assert select_hparams([a, b], z=0.955).label == "B"
    # Nobody qualifies: highest clean accuracy wins.
    assert select_hparams([a, b], z=0.99).label == "A"


def test_selection_single_candidate():
    only = Candidate("only", eval_result(0.5, 0.1))
    assert select_hparams([only], z=0.99) is only


def test_selection_paper_gates():
    # Gate values used in practice for the reference model families.
    sweep = [
        Candidate("c1", eval_result(0.966, 0.80)),
        Candidate("c2", eval_result(0.964, 0.90)),
        Candidate("c3", eval_result(0.970, 0.78)),
    ]
    assert select_hparams(sweep, z=0.965).label == "c1"
    for z in (0.760, 0.785):
        assert select_hparams(sweep, z=z).label == "c2"


def test_selection_tie_breaks_earliest():
    a = Candidate("first", eval_result(0.97, 0.9))
    b = Candidate("second", eval_result(0.97, 0.9))
    assert select_hparams([a, b], z=0.9) is a
    # Fallback ties break the same way.
    assert select_hparams([a, b], z=0.999) is a


def test_selection_monotone_transform_invariance():
    rng = np.random.default_rng(1)
    cleans = 0.9 + 0.05 * rng.random(5)
    robs = -0.3 + 0.2 * rng.random(5)

    def build(transform):
        out = []
        for i, (clean, rob) in enumerate(zip(cleans, robs)):
            out.append(Candidate(f"c{i}", eval_result(clean, clean + transform(rob))))
        return out

    base_winner = select_hparams(build(lambda r: r), z=0.9).label
    for transform in (lambda r: 0.5 * r, lambda r: r + 0.05, lambda r: 0.25 * r - 0.01):
        assert select_hparams(build(transform), z=0.9).label == base_winner


def test_selection_empty_errors():
    with pytest.raises(ValueError, match="no candidates"):
        select_hparams([], z=0.5)


def test_eval_result_range_check():
    with pytest.raises(ValueError, match="out of range"):
        EvalResult(clean_accuracy=1.5)
    with pytest.raises(ValueError, match="out of range"):
        EvalResult(clean_accuracy=0.5, per_sigma_accuracy={0.1: -0.2})
