"""Composition modes, ranking math, and policy JSON validation."""

import math

import numpy as np
import pytest
from scipy import stats as sstats

from fanforge.core import ImageBuffer, Sample, ScanMask
from fanforge.errors import (
    MissingScanMask,
    NOutOfRange,
    SchemaError,
    UnknownTransform,
    ZeroBaseline,
)
from fanforge.policy import (
    AugStats,
    PolicySpec,
    TransformSpec,
    apply_per_op,
    apply_policy,
    apply_transform,
    classify_effect,
    load_metric_log,
    op_names,
    policy_spec_from_dict,
    rank_from_log,
    relative_improvement,
    requires_scan_mask,
    top_n_set,
    transform_spec_from_dict,
    trivial_augment,
    write_ranking_csv,
)
from fanforge.rng import SplitMix64, derive_sample_seed
from fanforge.stdaug import flip


def make_sample(seed=0):
    rng = np.random.default_rng(12)
    image = ImageBuffer(rng.random((32, 32)))
    mask = ScanMask(np.ones((32, 32), dtype=np.uint8))
    return Sample(id="p", image=image, scan_mask=mask, seed=seed)


# --- registry ----------------------------------------------------------------

def test_fourteen_ops_registered():
    names = op_names()
    assert len(names) == 14
    assert len(set(names)) == 14
    for name in names:
        TransformSpec(name=name)  # constructible with defaults


def test_mask_requirements():
    assert requires_scan_mask("depth_attenuation")
    assert requires_scan_mask("haze_artifact")
    assert requires_scan_mask("gaussian_shadow")
    assert not requires_scan_mask("speckle_reduction")
    assert not requires_scan_mask("brightness")


def test_unknown_transform():
    with pytest.raises(UnknownTransform):
        TransformSpec(name="sharpen")


def test_transform_spec_range_overrides():
    spec = TransformSpec(name="rotate", ranges={"angle": (-10.0, 10.0)})
    assert spec.effective_ranges()["angle"] == (-10.0, 10.0)
    with pytest.raises(ValueError):
        TransformSpec(name="rotate", ranges={"angle": (-200.0, 0.0)})
    with pytest.raises(ValueError):
        TransformSpec(name="rotate", ranges={"angle": (10.0, -10.0)})
    with pytest.raises(ValueError):
        TransformSpec(name="rotate", ranges={"wobble": (0.0, 1.0)})


def test_degenerate_override_still_draws():
    # A (c, c) range consumes its uniform like any other, so stream
    # layout does not depend on whether a range was pinned.
    sample = make_sample()
    spec_pin = TransformSpec(name="brightness", ranges={"offset": (0.1, 0.1)})
    out = apply_transform(sample, spec_pin, SplitMix64(3))
    want = np.clip(sample.image.data + 0.1, 0.0, 1.0)
    assert np.array_equal(out.image.data, want)
    rng = SplitMix64(3)
    apply_transform(sample, spec_pin, rng)
    assert rng.counter == 1


def test_disabled_spec_is_identity():
    sample = make_sample()
    spec = TransformSpec(name="flip_horizontal", enabled=False)
    out = apply_transform(sample, spec, SplitMix64(0))
    assert out is sample


# --- per-op mode -------------------------------------------------------------

def test_apply_per_op_p_zero_identity():
    sample = make_sample()
    spec = TransformSpec(name="flip_horizontal")
    rng = SplitMix64(1)
    for _ in range(50):
        assert apply_per_op(sample, spec, 0.0, rng) is sample


def test_apply_per_op_p_one_always_applies():
    sample = make_sample()
    spec = TransformSpec(name="flip_horizontal")
    flipped = flip(sample, "horizontal")
    rng = SplitMix64(2)
    for _ in range(20):
        out = apply_per_op(sample, spec, 1.0, rng)
        assert np.array_equal(out.image.data, flipped.image.data)


def test_apply_per_op_half_rate():
    sample = make_sample()
    spec = TransformSpec(name="flip_horizontal")
    rng = SplitMix64(300)
    hits = 0
    for _ in range(10_000):
        out = apply_per_op(sample, spec, 0.5, rng)
        hits += out is not sample
    assert 4700 <= hits <= 5300


def test_apply_per_op_validates_p():
    with pytest.raises(ValueError):
        apply_per_op(make_sample(), TransformSpec(name="gamma"), 1.5, SplitMix64(0))


# --- trivial augment mode ----------------------------------------------------

def test_trivial_augment_rejects_empty():
    with pytest.raises(ValueError):
        trivial_augment(make_sample(), [], SplitMix64(0))


def test_trivial_identity_only_set():
    sample = make_sample()
    out = trivial_augment(sample, [TransformSpec(name="identity")], SplitMix64(8))
    assert np.array_equal(out.image.data, sample.image.data)


def test_trivial_neither_slot_frequency_k3():
    # P(op absent from both slots) = (3/4)^2 = 0.5625 with K = 3.
    op_set = [TransformSpec(name="flip_horizontal"),
              TransformSpec(name="flip_vertical"),
              TransformSpec(name="identity")]
    # Watch for slot draws only; replay the index sequence directly.
    n = 20_000
    rng = SplitMix64(1717)
    target = 0
    misses = 0
    for _ in range(n):
        first = rng.integers(4)
        second = rng.integers(4)
        misses += first != target and second != target
    p = 0.5625
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(misses / n - p) < 3 * sigma


def test_trivial_slot_uniformity_chi_square():
    ops = [TransformSpec(name=name) for name in op_names()]
    n = 20_000
    rng = SplitMix64(42)
    counts = np.zeros(15, dtype=np.int64)
    for _ in range(n):
        counts[rng.integers(15)] += 1
    assert sstats.chisquare(counts).pvalue > 0.01
    assert len(ops) == 14


def test_trivial_slots_exchangeable():
    # Joint slot distribution is symmetric: draws are i.i.d.
    n = 30_000
    options = 4
    rng = SplitMix64(909)
    joint = np.zeros((options, options), dtype=np.int64)
    for _ in range(n):
        joint[rng.integers(options), rng.integers(options)] += 1
    asym = np.abs(joint - joint.T)
    expected = n / options ** 2
    assert asym.max() < 5 * math.sqrt(2 * expected)


def test_trivial_applies_drawn_ops_sequentially():
    sample = make_sample()
    op_set = [TransformSpec(name="flip_horizontal"),
              TransformSpec(name="flip_vertical")]
    seed = 31
    out = trivial_augment(sample, op_set, SplitMix64(seed))
    # Replay the slot draws to build the expected composition.
    rng = SplitMix64(seed)
    first = rng.integers(3)
    second = rng.integers(3)
    expect = sample
    for idx in (first, second):
        if idx == 0:
            expect = flip(expect, "horizontal")
        elif idx == 1:
            expect = flip(expect, "vertical")
    assert np.array_equal(out.image.data, expect.image.data)


def test_trivial_identity_in_set_mode():
    ops = [TransformSpec(name="identity")]
    sample = make_sample()
    out = trivial_augment(sample, ops, SplitMix64(5), identity_in_set=True)
    assert np.array_equal(out.image.data, sample.image.data)
    disabled = [TransformSpec(name="flip_horizontal", enabled=False)]
    with pytest.raises(ValueError):
        trivial_augment(sample, disabled, SplitMix64(5), identity_in_set=True)


def test_trivial_propagates_missing_mask():
    sample = make_sample().with_rasters(scan_mask=None)
    ops = [TransformSpec(name="haze_artifact")]
    tripped = False
    for seed in range(40):
        try:
            trivial_augment(sample, ops, SplitMix64(seed))
        except MissingScanMask:
            tripped = True
            break
    assert tripped


# --- apply_policy stage streams ----------------------------------------------

def test_apply_policy_per_op_stage_layout():
    sample = make_sample(seed=555)
    policy = PolicySpec(
        mode="per_op_probability",
        op_set=(TransformSpec(name="brightness"), TransformSpec(name="gamma")),
        probability=1.0,
    )
    out = apply_policy(sample, policy)
    # Strengths come from per-position streams independent of the gate
    # stream: position k uses derive_sample_seed(seed, k + 1).
    expect = sample
    expect = apply_transform(expect, TransformSpec(name="brightness"),
                             SplitMix64(derive_sample_seed(555, 1)))
    expect = apply_transform(expect, TransformSpec(name="gamma"),
                             SplitMix64(derive_sample_seed(555, 2)))
    assert np.array_equal(out.image.data, expect.image.data)


def test_apply_policy_trivial_stage_layout():
    sample = make_sample(seed=808)
    ops = (TransformSpec(name="brightness"), TransformSpec(name="contrast"))
    policy = PolicySpec(mode="trivial_augment", op_set=ops)
    out = apply_policy(sample, policy)
    selector = SplitMix64(derive_sample_seed(808, 0))
    draws = (selector.integers(3), selector.integers(3))
    expect = sample
    for slot, idx in enumerate(draws):
        if idx < 2:
            expect = apply_transform(expect, ops[idx],
                                     SplitMix64(derive_sample_seed(808, slot + 1)))
    assert np.array_equal(out.image.data, expect.image.data)


def test_apply_policy_deterministic():
    sample = make_sample(seed=99)
    policy = PolicySpec(
        mode="trivial_augment",
        op_set=tuple(TransformSpec(name=n) for n in op_names() if n != "random_crop"),
    )
    a = apply_policy(sample, policy)
    b = apply_policy(sample, policy)
    assert np.array_equal(a.image.data, b.image.data)


def test_policy_spec_validation():
    with pytest.raises(ValueError):
        PolicySpec(mode="sometimes", op_set=())
    with pytest.raises(ValueError):
        PolicySpec(mode="per_op_probability", op_set=(), probability=1.5)
    with pytest.raises(ValueError):
        PolicySpec(mode="trivial_augment", op_set=())
    with pytest.raises(ValueError):
        PolicySpec(mode="per_op_probability",
                   op_set=(TransformSpec(name="gamma"), TransformSpec(name="gamma")))


# --- ranking math ------------------------------------------------------------

def test_relative_improvement_examples():
    assert relative_improvement(0.632, 0.632) == 0.0
    assert relative_improvement(0.692, 0.632) == pytest.approx(9.4937, abs=5e-3)
    assert relative_improvement(0.302, 0.507) == pytest.approx(-40.4, abs=0.05)
    with pytest.raises(ZeroBaseline):
        relative_improvement(0.5, 0.0)
    with pytest.raises(ZeroBaseline):
        relative_improvement(0.5, -1.0)


def test_classify_effect_examples():
    baseline = AugStats(name="none", mean=0.632, sem=0.009, n=30)
    assert classify_effect(AugStats("rotate", 0.642, 0.005, 30), baseline) == "effective"
    assert classify_effect(AugStats("flip_vertical", 0.628, 0.007, 30), baseline) == "ineffective"
    seg_base = AugStats(name="none", mean=0.507, sem=0.012, n=30)
    assert classify_effect(AugStats("gaussian_noise", 0.302, 0.02, 30), seg_base) == "harmful"


def test_classify_effect_band_edges():
    baseline = AugStats(name="none", mean=0.5, sem=0.01, n=10)
    assert classify_effect(AugStats("a", 0.51, 0.0, 1), baseline) == "ineffective"
    assert classify_effect(AugStats("a", 0.510001, 0.0, 1), baseline) == "effective"
    assert classify_effect(AugStats("a", 0.49, 0.0, 1), baseline) == "ineffective"
    assert classify_effect(AugStats("a", 0.489999, 0.0, 1), baseline) == "harmful"


def test_classify_effect_scale_invariant():
    rng = SplitMix64(606)
    for _ in range(200):
        base = AugStats("none", 0.2 + 0.6 * rng.random(), 0.03 * rng.random(), 5)
        aug = AugStats("x", 0.2 + 0.6 * rng.random(), 0.03 * rng.random(), 5)
        c = 0.5 + 2.0 * rng.random()
        scaled_base = AugStats("none", c * base.mean, c * base.sem, 5)
        scaled_aug = AugStats("x", c * aug.mean, c * aug.sem, 5)
        assert classify_effect(aug, base) == classify_effect(scaled_aug, scaled_base)


def test_top_n_aul_mass_fixture():
    column = [
        ("depth_attenuation", 0.672),
        ("haze_artifact", 0.678),
        ("gaussian_shadow", 0.658),
        ("speckle_reduction", 0.670),
        ("flip_horizontal", 0.642),
        ("flip_vertical", 0.628),
        ("rotate", 0.642),
        ("translate", 0.652),
        ("zoom", 0.657),
        ("random_crop", 0.667),
        ("brightness", 0.692),
        ("contrast", 0.640),
        ("gamma", 0.642),
        ("gaussian_noise", 0.636),
    ]
    stats = [AugStats(name, mean, 0.01, 30) for name, mean in column]
    top3 = [s.name for s in top_n_set(stats, 3)]
    assert top3 == ["brightness", "haze_artifact", "depth_attenuation"]
    assert top_n_set(stats, 1)[0].name == "brightness"
    full = top_n_set(stats, len(stats))
    assert sorted(s.name for s in full) == sorted(name for name, _ in column)


def test_top_n_prefix_property():
    rng = SplitMix64(33)
    stats = [AugStats(name, round(rng.random(), 2), 0.01, 5) for name in op_names()]
    for n in range(1, len(stats)):
        small = [s.name for s in top_n_set(stats, n)]
        big = [s.name for s in top_n_set(stats, n + 1)]
        assert big[:n] == small


def test_top_n_tie_break_lexicographic():
    stats = [
        AugStats("zoom", 0.5, 0.01, 3),
        AugStats("brightness", 0.5, 0.01, 3),
        AugStats("contrast", 0.5, 0.01, 3),
    ]
    names = [s.name for s in top_n_set(stats, 3)]
    assert names == ["brightness", "contrast", "zoom"]


def test_top_n_range_errors():
    stats = [AugStats("a", 0.5, 0.01, 3)]
    with pytest.raises(NOutOfRange):
        top_n_set(stats, 0)
    with pytest.raises(NOutOfRange):
        top_n_set(stats, 2)


def test_aug_stats_from_runs():
    stats = AugStats.from_runs("x", [0.6, 0.64, 0.68])
    assert stats.mean == pytest.approx(0.64, abs=1e-12)
    assert stats.sem == pytest.approx(0.04 / math.sqrt(3), abs=1e-12)
    assert stats.n == 3
    single = AugStats.from_runs("y", [0.5])
    assert single.sem == 0.0
    with pytest.raises(ValueError):
        AugStats.from_runs("z", [])
    with pytest.raises(ValueError):
        AugStats("w", 0.5, -0.1, 3)


# --- metric log CSV ----------------------------------------------------------

def write_log(path, rows):
    with open(path, "w") as fh:
        fh.write("augmentation,run_id,metric\n")
        for name, run, value in rows:
            fh.write(f"{name},{run},{value}\n")


def test_metric_log_round_trip(tmp_path):
    log_path = tmp_path / "metrics.csv"
    write_log(log_path, [
        ("none", 1, 0.60), ("none", 2, 0.62),
        ("brightness", 1, 0.70), ("brightness", 2, 0.72),
        ("rotate", 1, 0.55), ("rotate", 2, 0.57),
    ])
    log = load_metric_log(log_path)
    assert log["none"] == [0.60, 0.62]
    rows = rank_from_log(log)
    assert [r["augmentation"] for r in rows] == ["brightness", "rotate"]
    assert rows[0]["rank"] == 1 and rows[1]["rank"] == 2
    assert rows[0]["delta_pct"] == pytest.approx(100 * (0.71 - 0.61) / 0.61)
    assert rows[0]["category"] == "effective"
    assert rows[1]["category"] == "harmful"

    out_path = tmp_path / "ranking.csv"
    write_ranking_csv(rows, out_path)
    text = out_path.read_text().strip().splitlines()
    assert text[0] == "augmentation,mean,sem,delta_pct,category,rank"
    assert text[1].startswith("brightness,")
    assert len(text) == 3


def test_metric_log_top_filter(tmp_path):
    log_path = tmp_path / "metrics.csv"
    write_log(log_path, [
        ("none", 1, 0.5),
        ("a", 1, 0.6), ("b", 1, 0.7), ("c", 1, 0.4),
    ])
    rows = rank_from_log(load_metric_log(log_path), top=2)
    assert [r["augmentation"] for r in rows] == ["b", "a"]
    with pytest.raises(NOutOfRange):
        rank_from_log(load_metric_log(log_path), top=9)


def test_metric_log_errors(tmp_path):
    bad_cols = tmp_path / "bad.csv"
    bad_cols.write_text("augmentation,metric\nnone,0.5\n")
    with pytest.raises(ValueError):
        load_metric_log(bad_cols)

    bad_value = tmp_path / "badval.csv"
    bad_value.write_text("augmentation,run_id,metric\nnone,1,abc\n")
    with pytest.raises(ValueError, match="row 2"):
        load_metric_log(bad_value)

    no_baseline = tmp_path / "nobase.csv"
    write_log(no_baseline, [("brightness", 1, 0.7)])
    with pytest.raises(ValueError, match="baseline"):
        rank_from_log(load_metric_log(no_baseline))

    only_baseline = tmp_path / "onlybase.csv"
    write_log(only_baseline, [("none", 1, 0.7)])
    with pytest.raises(ValueError, match="no augmentation rows"):
        rank_from_log(load_metric_log(only_baseline))


# --- policy JSON -------------------------------------------------------------

def test_policy_from_dict_happy_paths():
    spec = policy_spec_from_dict({
        "mode": "per_op_probability",
        "probability": 0.5,
        "op_set": ["brightness", {"name": "rotate", "ranges": {"angle": [-15, 15]}}],
    })
    assert spec.mode == "per_op_probability"
    assert spec.op_set[1].effective_ranges()["angle"] == (-15.0, 15.0)

    ta = policy_spec_from_dict({
        "mode": "trivial_augment",
        "op_set": ["brightness", "contrast"],
        "identity_in_set": False,
    })
    assert ta.identity_in_set is False


def test_policy_from_dict_error_paths():
    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"op_set": []})
    assert err.value.path == "mode"

    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "trivial_augment", "op_set": [
            "brightness", "contrast", {"name": "emboss"}]})
    assert err.value.path == "op_set[2].name"

    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "trivial_augment", "op_set": ["brightness"],
                               "probability": 0.4})
    assert err.value.path == "probability"
    assert "not valid in trivial_augment mode" in str(err.value)

    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "per_op_probability", "op_set": ["brightness"],
                               "identity_in_set": True})
    assert err.value.path == "identity_in_set"

    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "per_op_probability", "op_set": [
            {"name": "rotate", "ranges": {"angle": [0]}}]})
    assert err.value.path == "op_set[0].ranges.angle"

    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "per_op_probability", "op_set": [3]})
    assert err.value.path == "op_set[0]"

    with pytest.raises(SchemaError):
        policy_spec_from_dict("not a dict")


def test_policy_from_dict_prefix():
    with pytest.raises(SchemaError) as err:
        policy_spec_from_dict({"mode": "x", "op_set": []}, path="policy")
    assert err.value.path == "policy.mode"


def test_transform_spec_from_dict_shorthand():
    spec = transform_spec_from_dict("gamma")
    assert spec.name == "gamma"
    with pytest.raises(SchemaError):
        transform_spec_from_dict({"name": "gamma", "extra": 1})
