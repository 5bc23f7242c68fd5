"""Per-trace feature vectors for action classification.

Two feature families:

* command features — the trace is binned into a signed byte-rate signal and
  scanned with the nominal waveform of each command kind.  One-shot command
  kinds (Cartesian moves, position bursts) use normalized convolution; the
  sustained speed-burst kind uses sliding correlation, which keys on the
  envelope shape rather than the byte rate.  Detected clusters are reduced
  to the fourteen per-kind statistics from ``cluster_statistics``.
* summary features — volume, duration, size moments and inter-arrival-time
  percentiles per direction.  These ignore command structure entirely and
  serve as the ablation baseline.

Feature vectors carry a schema (ordered names + a fingerprint of the
configuration and kernel bank that produced them) so that models refuse
mismatched inputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyTrace, InvalidConfig, MissingFile, SchemaMismatch
from .sigproc import (
    ALL_KINDS,
    CommandKind,
    CommandStats,
    KernelBank,
    bin_trace,
    cluster_statistics,
    convolve,
    detect_clusters,
    sliding_correlation,
)
from .trace import Dataset, Trace

SCHEMA_VERSION = 1

FEATURE_SETS = ("full", "command", "summary")

# detection route per command kind: correlation for the rate-sustained
# burst whose signature is its envelope, convolution for the rest
CORRELATION_KINDS = frozenset({CommandKind.GRIPPER_SPEED})

_IAT_PERCENTILES = (5, 10, 25, 50, 75, 90, 95)
_SIZE_PERCENTILES = (50, 90)

_KIND_STEMS = {
    CommandKind.CARTESIAN_MOVE: "cartesian_move",
    CommandKind.GRIPPER_POSITION: "gripper_position",
    CommandKind.GRIPPER_SPEED: "gripper_speed",
}


@dataclass(frozen=True)
class SigprocConfig:
    """Detection parameters shared by featurization and reporting."""

    bin_width: float = 0.01
    conv_threshold: float = 0.9
    corr_threshold: float = 0.25
    merge_gap: float = 0.2
    conv_min_duration: float = 0.0
    corr_min_duration: float = 1.0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise InvalidConfig("bin_width must be positive")
        if self.merge_gap < 0 or self.conv_min_duration < 0 or self.corr_min_duration < 0:
            raise InvalidConfig("durations must be non-negative")


def summary_feature_names() -> list[str]:
    names = [
        "packet_count", "out_count", "in_count",
        "bytes_out", "bytes_in", "duration",
        "size_mean_out", "size_std_out", "size_mean_in", "size_std_in",
    ]
    for d in ("out", "in"):
        names.extend(f"size_p{p}_{d}" for p in _SIZE_PERCENTILES)
    for d in ("out", "in"):
        names.extend(f"iat_p{p}_{d}" for p in _IAT_PERCENTILES)
    return names


def command_feature_names() -> list[str]:
    return [
        f"{_KIND_STEMS[kind]}_{stat}" for kind in ALL_KINDS for stat in CommandStats.FIELDS
    ]


def feature_names(feature_set: str = "full") -> list[str]:
    if feature_set == "summary":
        return summary_feature_names()
    if feature_set == "command":
        return command_feature_names()
    if feature_set == "full":
        return command_feature_names() + summary_feature_names()
    raise InvalidConfig(f"unknown feature set {feature_set!r}")


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    feature_set: str
    config: SigprocConfig
    kernel_fingerprint: str
    version: int = SCHEMA_VERSION

    def fingerprint(self) -> str:
        blob = json.dumps(
            {
                "version": self.version,
                "feature_set": self.feature_set,
                "config": asdict(self.config),
                "kernels": self.kernel_fingerprint,
                "names": list(self.names),
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": self.version,
                "feature_set": self.feature_set,
                "config": asdict(self.config),
                "kernel_fingerprint": self.kernel_fingerprint,
                "names": list(self.names),
                "fingerprint": self.fingerprint(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureSchema":
        try:
            doc = json.loads(text)
            schema = cls(
                names=tuple(doc["names"]),
                feature_set=doc["feature_set"],
                config=SigprocConfig(**doc["config"]),
                kernel_fingerprint=doc["kernel_fingerprint"],
                version=doc["version"],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidConfig(f"bad schema document: {e}") from e
        if "fingerprint" in doc and doc["fingerprint"] != schema.fingerprint():
            raise SchemaMismatch("schema fingerprint does not match its contents")
        return schema


def make_schema(
    bank: KernelBank,
    config: SigprocConfig | None = None,
    feature_set: str = "full",
) -> FeatureSchema:
    config = config or SigprocConfig()
    return FeatureSchema(
        names=tuple(feature_names(feature_set)),
        feature_set=feature_set,
        config=config,
        kernel_fingerprint=bank.fingerprint(),
    )


def command_clusters(trace: Trace, kind: CommandKind, bank: KernelBank, config: SigprocConfig):
    """Detection route for one command kind: (response signal, clusters)."""
    signal = bin_trace(trace, config.bin_width)
    return _scan(signal, kind, bank, config)


def _scan(signal, kind, bank, config):
    kernel = bank.kernel_for(kind)
    if kind in CORRELATION_KINDS:
        response = sliding_correlation(signal, kernel)
        threshold, min_duration = config.corr_threshold, config.corr_min_duration
    else:
        response = convolve(signal, kernel)
        threshold, min_duration = config.conv_threshold, config.conv_min_duration
    return response, detect_clusters(response, threshold, config.merge_gap, min_duration)


def _summary_features(trace: Trace) -> np.ndarray:
    out = trace.dirs == 1
    values = [
        float(len(trace)),
        float(out.sum()),
        float((~out).sum()),
        float(trace.sizes[out].sum()),
        float(trace.sizes[~out].sum()),
        trace.duration,
    ]
    per_dir_sizes = [trace.sizes[out].astype(float), trace.sizes[~out].astype(float)]
    for sizes in per_dir_sizes:
        if sizes.size:
            values.extend([float(sizes.mean()), float(sizes.std())])
        else:
            values.extend([0.0, 0.0])
    for sizes in per_dir_sizes:
        if sizes.size:
            values.extend(float(np.percentile(sizes, p)) for p in _SIZE_PERCENTILES)
        else:
            values.extend([0.0] * len(_SIZE_PERCENTILES))
    for mask in (out, ~out):
        times = trace.times[mask]
        if times.size >= 2:
            iat = np.diff(times)
            values.extend(float(np.percentile(iat, p)) for p in _IAT_PERCENTILES)
        else:
            values.extend([0.0] * len(_IAT_PERCENTILES))
    return np.array(values)


def compute_features(
    trace: Trace,
    bank: KernelBank,
    config: SigprocConfig | None = None,
    feature_set: str = "full",
) -> np.ndarray:
    if len(trace) == 0:
        raise EmptyTrace("cannot featurize an empty trace")
    if feature_set not in FEATURE_SETS:
        raise InvalidConfig(f"unknown feature set {feature_set!r}")
    config = config or SigprocConfig()

    blocks = []
    if feature_set in ("full", "command"):
        signal = bin_trace(trace, config.bin_width)
        for kind in ALL_KINDS:
            response, clusters = _scan(signal, kind, bank, config)
            stats = cluster_statistics(response, clusters)
            blocks.append(np.array([getattr(stats, f) for f in CommandStats.FIELDS]))
    if feature_set in ("full", "summary"):
        blocks.append(_summary_features(trace))
    vector = np.concatenate(blocks)
    return np.where(np.isfinite(vector), vector, 0.0)


@dataclass
class FeatureMatrix:
    X: np.ndarray
    labels: list[str]
    trace_ids: list[str]
    schema: FeatureSchema

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.schema.names):
            raise SchemaMismatch(
                f"matrix has {self.X.shape[1] if self.X.ndim == 2 else '?'} columns, "
                f"schema names {len(self.schema.names)}"
            )
        if len(self.labels) != self.X.shape[0] or len(self.trace_ids) != self.X.shape[0]:
            raise SchemaMismatch("labels/ids length does not match matrix rows")


def featurize_dataset(
    dataset: Dataset,
    bank: KernelBank,
    config: SigprocConfig | None = None,
    feature_set: str = "full",
) -> FeatureMatrix:
    config = config or SigprocConfig()
    schema = make_schema(bank, config, feature_set)
    rows = [compute_features(t, bank, config, feature_set) for t in dataset.traces]
    labels = [t.label.value if t.label is not None else "" for t in dataset.traces]
    ids = [t.trace_id or f"trace_{i:04d}" for i, t in enumerate(dataset.traces)]
    return FeatureMatrix(np.vstack(rows), labels, ids, schema)


def write_feature_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trace_id", "label", *matrix.schema.names])
    for tid, label, row in zip(matrix.trace_ids, matrix.labels, matrix.X):
        w.writerow([tid, label, *(repr(float(v)) for v in row)])
    Path(path).write_text(buf.getvalue())


def read_feature_csv(path: str | Path, schema: FeatureSchema) -> FeatureMatrix:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("feature file is empty") from None
        if header != ["trace_id", "label", *schema.names]:
            raise SchemaMismatch("feature file header does not match schema")
        ids, labels, rows = [], [], []
        for rec in reader:
            if not rec:
                continue
            ids.append(rec[0])
            labels.append(rec[1])
            rows.append([float(v) for v in rec[2:]])
    X = np.array(rows, dtype=float).reshape(len(rows), len(schema.names))
    return FeatureMatrix(X, labels, ids, schema)
