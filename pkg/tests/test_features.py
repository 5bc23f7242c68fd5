import numpy as np
import pytest

from robofp import errors
from robofp.features import (
    FEATURE_SETS,
    FeatureMatrix,
    FeatureSchema,
    SigprocConfig,
    command_clusters,
    command_feature_names,
    compute_features,
    feature_names,
    featurize_dataset,
    make_schema,
    read_feature_csv,
    summary_feature_names,
    write_feature_csv,
)
from robofp.sigproc import CommandKind
from robofp.synthgen import default_kernel_bank, gen_command, default_command_templates, trace_rng
from robofp.trace import ActionLabel, Dataset, PacketRecord, Trace


@pytest.fixture(scope="module")
def bank():
    return default_kernel_bank()


def _trace_from(rows, label=None, trace_id=None):
    rows = sorted(rows)
    t, d, s = zip(*rows)
    return Trace(np.array(t, float), np.array(d), np.array(s), label=label, trace_id=trace_id)


def _quiet_rows(duration, spacing=0.4, size=50):
    # sparse low-rate chatter so binning has context around injected commands
    rows = []
    t = 0.0
    while t <= duration:
        rows.append((round(t, 6), 1, size))
        rows.append((round(t + 0.21, 6), -1, size))
        t += spacing
    return rows


# ---------------------------------------------------------------------------
# names and schema


def test_feature_name_counts():
    assert len(command_feature_names()) == 42  # 3 kinds x 14 statistics
    assert len(summary_feature_names()) == 28
    assert len(feature_names("full")) == 70
    assert feature_names("full") == command_feature_names() + summary_feature_names()
    with pytest.raises(errors.InvalidConfig):
        feature_names("bogus")


def test_schema_round_trip(bank):
    schema = make_schema(bank, SigprocConfig(), "full")
    back = FeatureSchema.from_json(schema.to_json())
    assert back == schema
    assert back.fingerprint() == schema.fingerprint()


def test_schema_fingerprint_tracks_inputs(bank):
    a = make_schema(bank, SigprocConfig(), "full")
    b = make_schema(bank, SigprocConfig(conv_threshold=1.0), "full")
    c = make_schema(bank, SigprocConfig(), "summary")
    assert len({a.fingerprint(), b.fingerprint(), c.fingerprint()}) == 3


def test_schema_rejects_tampered_fingerprint(bank):
    import json

    doc = json.loads(make_schema(bank).to_json())
    doc["fingerprint"] = "0" * 16
    with pytest.raises(errors.SchemaMismatch):
        FeatureSchema.from_json(json.dumps(doc))


def test_schema_rejects_malformed_document():
    with pytest.raises(errors.InvalidConfig):
        FeatureSchema.from_json("{}")


def test_sigproc_config_validation():
    with pytest.raises(errors.InvalidConfig):
        SigprocConfig(bin_width=0.0)
    with pytest.raises(errors.InvalidConfig):
        SigprocConfig(merge_gap=-0.1)


# ---------------------------------------------------------------------------
# detection-backed command features


def _feature(vec, name, feature_set="full"):
    return vec[feature_names(feature_set).index(name)]


def test_injected_cartesian_commands_are_counted(bank):
    # hand-built command/feedback pairs; 700 B feedback scores 700/650 > 0.9
    # against the mean-feedback kernel, so every pair must be found
    for k in (2, 5):
        rows = _quiet_rows(12.0)
        t = 1.0
        for _ in range(k):
            rows.append((t, 1, 200))
            rows.append((t + 0.02, -1, 700))
            t += 1.5
        vec = compute_features(_trace_from(rows), bank)
        assert _feature(vec, "cartesian_move_cluster_count") == k


def test_injected_speed_burst_is_detected(bank):
    templates = default_command_templates()
    rng = trace_rng(1, 0, 0)
    rows = _quiet_rows(10.0)
    cmd_rows, _ = gen_command(
        rng, templates[CommandKind.GRIPPER_SPEED], 3.0, duration=2.4, profile="rise_slow"
    )
    rows.extend((r.t, r.dir, r.size) for r in cmd_rows)
    vec = compute_features(_trace_from(rows), bank)
    assert _feature(vec, "gripper_speed_cluster_count") == 1
    assert _feature(vec, "gripper_speed_max") > 0.25


def test_profile_shape_separates_run_lengths(bank):
    # a long grip holds the matched (slow-rise) ramp above the correlation
    # threshold longer than its time reversal, even though the two bursts
    # have identical size distributions; this is the pick/pour separator
    templates = default_command_templates()
    cfg = SigprocConfig()
    for dur in (2.5, 2.8):
        for seed in range(6):
            lens = {}
            for profile in ("rise_slow", "rise_fast"):
                rng = trace_rng(seed, 0, 0)
                rows = [(0.0, 1, 50), (9.99, -1, 50)]
                cmd_rows, _ = gen_command(
                    rng, templates[CommandKind.GRIPPER_SPEED], 3.0,
                    duration=dur, profile=profile,
                )
                rows.extend((r.t, r.dir, r.size) for r in cmd_rows)
                _, cs = command_clusters(
                    _trace_from(rows), CommandKind.GRIPPER_SPEED, bank, cfg
                )
                lens[profile] = sum(c.end - c.start for c in cs.clusters)
            assert lens["rise_slow"] > lens["rise_fast"]


def test_command_clusters_routes_by_kind(bank):
    rows = _quiet_rows(6.0)
    trace = _trace_from(rows)
    cfg = SigprocConfig()
    resp_conv, _ = command_clusters(trace, CommandKind.CARTESIAN_MOVE, bank, cfg)
    resp_corr, _ = command_clusters(trace, CommandKind.GRIPPER_SPEED, bank, cfg)
    # the correlation route is bounded to [-1, 1] and one window per offset;
    # the convolution route keeps the signal's length
    assert np.max(np.abs(resp_corr.values)) <= 1.0 + 1e-12
    k = len(bank.kernel_for(CommandKind.GRIPPER_SPEED).values)
    assert len(resp_conv.values) - len(resp_corr.values) == k - 1


# ---------------------------------------------------------------------------
# summary features against a hand oracle


def test_summary_features_hand_computed(bank):
    rows = [
        (0.0, 1, 100),
        (0.5, 1, 200),
        (1.5, 1, 300),
        (0.2, -1, 400),
        (1.2, -1, 600),
    ]
    vec = compute_features(_trace_from(rows), bank, feature_set="summary")
    names = summary_feature_names()
    got = dict(zip(names, vec))
    assert got["packet_count"] == 5
    assert got["out_count"] == 3
    assert got["in_count"] == 2
    assert got["bytes_out"] == 600
    assert got["bytes_in"] == 1000
    assert got["duration"] == 1.5
    assert got["size_mean_out"] == 200.0
    assert got["size_std_out"] == pytest.approx(np.std([100, 200, 300]))
    assert got["size_mean_in"] == 500.0
    assert got["size_p50_out"] == 200.0
    assert got["iat_p50_out"] == pytest.approx(0.75)
    assert got["iat_p50_in"] == pytest.approx(1.0)


def test_single_direction_trace_has_finite_features(bank):
    rows = [(0.1 * i, 1, 60) for i in range(40)]
    for fs in FEATURE_SETS:
        vec = compute_features(_trace_from(rows), bank, feature_set=fs)
        assert np.all(np.isfinite(vec))


def test_single_packet_trace(bank):
    vec = compute_features(_trace_from([(0.0, 1, 99)]), bank)
    assert np.all(np.isfinite(vec))
    assert _feature(vec, "packet_count") == 1


def test_empty_trace_raises(bank):
    trace = Trace(np.array([]), np.array([], int), np.array([], int))
    with pytest.raises(errors.EmptyTrace):
        compute_features(trace, bank)


def test_unknown_feature_set_raises(bank):
    with pytest.raises(errors.InvalidConfig):
        compute_features(_trace_from([(0.0, 1, 99)]), bank, feature_set="everything")


# ---------------------------------------------------------------------------
# matrices and CSV round trip


def _tiny_dataset():
    rows_a = _quiet_rows(6.0)
    rows_b = _quiet_rows(7.0, spacing=0.3)
    return Dataset(
        [
            _trace_from(rows_a, label=ActionLabel.PRESS_KEY, trace_id="a"),
            _trace_from(rows_b, label=ActionLabel.POUR_WATER, trace_id="b"),
        ]
    )


def test_featurize_dataset_shapes(bank):
    ds = _tiny_dataset()
    assert featurize_dataset(ds, bank).X.shape == (2, 70)
    assert featurize_dataset(ds, bank, feature_set="command").X.shape == (2, 42)
    assert featurize_dataset(ds, bank, feature_set="summary").X.shape == (2, 28)


def test_feature_matrix_validates_shape(bank):
    schema = make_schema(bank)
    with pytest.raises(errors.SchemaMismatch):
        FeatureMatrix(np.zeros((2, 3)), ["x", "y"], ["a", "b"], schema)
    with pytest.raises(errors.SchemaMismatch):
        FeatureMatrix(np.zeros((2, 70)), ["x"], ["a", "b"], schema)


def test_csv_round_trip(tmp_path, bank):
    m = featurize_dataset(_tiny_dataset(), bank)
    path = tmp_path / "features.csv"
    write_feature_csv(m, path)
    back = read_feature_csv(path, m.schema)
    assert back.trace_ids == m.trace_ids
    assert back.labels == m.labels
    assert np.array_equal(back.X, m.X)  # repr() round-trips floats exactly


def test_csv_header_mismatch(tmp_path, bank):
    m = featurize_dataset(_tiny_dataset(), bank)
    path = tmp_path / "features.csv"
    write_feature_csv(m, path)
    other = make_schema(bank, feature_set="summary")
    with pytest.raises(errors.SchemaMismatch):
        read_feature_csv(path, other)


def test_csv_missing_file(tmp_path, bank):
    with pytest.raises(errors.MissingFile):
        read_feature_csv(tmp_path / "nope.csv", make_schema(bank))
