"""Signal processing over binned traces: kernel matching and clustering.

The pipeline turns a packet trace into a regularly sampled signal (signed
byte counts per time bin), scans it with per-command-kind kernels, and
reduces the scan output to clusters and distribution statistics.

Two scan operators cover the two traffic shapes:

* ``convolve`` — normalised sliding dot product.  Suited to one-shot
  commands whose signature is a short size/direction pattern; a segment
  equal to the kernel scores exactly 1.0, so detection thresholds are
  calibrated in units of "fraction of a nominal command".
* ``sliding_correlation`` — Pearson correlation of the kernel against every
  window.  Suited to sustained bursts whose envelope shape repeats across
  executions while absolute amplitude varies.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyKernel, EmptyWindow, InvalidConfig, KernelTooShort, MissingFile
from .trace import Trace

_EPS = 1e-30


class CommandKind(str, enum.Enum):
    CARTESIAN_MOVE = "CartesianMove"
    GRIPPER_POSITION = "GripperPosition"
    GRIPPER_SPEED = "GripperSpeed"

    def __str__(self) -> str:
        return self.value


ALL_KINDS = tuple(CommandKind)


class BinMode(str, enum.Enum):
    SIGNED = "signed"
    OUTGOING_ONLY = "outgoing_only"
    INCOMING_ONLY = "incoming_only"


@dataclass
class Signal:
    """Regularly sampled series; values[i] covers [t0 + i*bw, t0 + (i+1)*bw)."""

    values: np.ndarray
    bin_width: float
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.bin_width <= 0:
            raise InvalidConfig("bin_width must be positive")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class Kernel:
    """A command signature: the binned waveform of one command execution."""

    kind: CommandKind
    bin_width: float
    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.kind = CommandKind(self.kind)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.values) == 0:
            raise EmptyKernel(f"kernel for {self.kind} has no bins")
        self.norm = float(np.sqrt(np.sum(self.values**2)))
        if self.norm <= 0.0:
            raise EmptyKernel(f"kernel for {self.kind} has zero L2 norm")
        if self.bin_width <= 0:
            raise InvalidConfig("bin_width must be positive")


@dataclass
class Cluster:
    start: float
    end: float
    peak_value: float

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass
class ClusterSet:
    clusters: list[Cluster] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)


# ---------------------------------------------------------------------------
# binning


def bin_trace(trace: Trace, bin_width: float = 0.01, mode: BinMode = BinMode.SIGNED) -> Signal:
    """Accumulate packet bytes into fixed-width time bins.

    Signed mode adds ``dir * size`` so opposing directions cancel; the
    single-direction modes add plain sizes for the selected direction.
    The signal spans ceil(duration / bin_width) bins (at least one); a
    packet falling exactly on the end boundary lands in the last bin.
    """
    if bin_width <= 0:
        raise InvalidConfig("bin_width must be positive")
    duration = trace.duration
    n_bins = max(1, math.ceil(duration / bin_width - 1e-9))
    if len(trace) == 0:
        return Signal(np.zeros(n_bins), bin_width, 0.0)

    if mode == BinMode.SIGNED:
        weights = (trace.dirs * trace.sizes).astype(np.float64)
        idx_src = trace.times
    elif mode == BinMode.OUTGOING_ONLY:
        sel = trace.dirs > 0
        weights = trace.sizes[sel].astype(np.float64)
        idx_src = trace.times[sel]
    elif mode == BinMode.INCOMING_ONLY:
        sel = trace.dirs < 0
        weights = trace.sizes[sel].astype(np.float64)
        idx_src = trace.times[sel]
    else:
        raise InvalidConfig(f"unknown bin mode {mode!r}")

    idx = np.minimum((idx_src / bin_width).astype(np.int64), n_bins - 1)
    values = np.bincount(idx, weights=weights, minlength=n_bins)
    return Signal(values, bin_width, 0.0)


# ---------------------------------------------------------------------------
# kernel scans


def _full_scan(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    # Sliding dot product with the kernel read forward: at output position p
    # the kernel's last element sits on x[p].  Equivalent to convolution with
    # the time-reversed kernel, which is what makes a segment equal to the
    # kernel score ||h||^2 at its alignment.
    return np.convolve(x, h[::-1], mode="full")


def convolve(signal: Signal, kernel: Kernel) -> Signal:
    """Scan the signal with the kernel, normalised by the kernel's energy.

    Output has the same length as the input (centred alignment).  Both
    operands are divided by the kernel's L2 norm, so a signal segment that
    matches the kernel exactly peaks at 1.0 and proportionally scaled
    segments peak at their scale factor.
    """
    x = signal.values
    h = kernel.values
    n, k = len(x), len(h)
    full = _full_scan(x, h) / (kernel.norm**2)
    lo = (k - 1) // 2
    out = full[lo : lo + n]
    return Signal(out, signal.bin_width, signal.t0)


def sliding_correlation(signal: Signal, kernel: Kernel) -> Signal:
    """Pearson correlation between the kernel and every signal window.

    Output index m holds the coefficient for the window starting at bin m
    (stride one bin), so output length is len(signal) - len(kernel) + 1.
    Signals shorter than the kernel are zero-padded on the right to yield a
    single window.  Windows (or kernels) with zero variance score 0; all
    values lie in [-1, 1].
    """
    h = kernel.values
    k = len(h)
    if k < 2:
        raise KernelTooShort("correlation kernels need at least 2 bins")
    x = signal.values
    if len(x) < k:
        x = np.concatenate([x, np.zeros(k - len(x))])
    n = len(x)

    ones = np.ones(k)
    win_sum = np.convolve(x, ones, mode="valid")
    win_sq = np.convolve(x * x, ones, mode="valid")
    cross = np.convolve(x, h[::-1], mode="valid")

    h_mean = h.mean()
    h_var = float(np.mean(h * h) - h_mean**2)
    w_mean = win_sum / k
    w_var = np.maximum(win_sq / k - w_mean**2, 0.0)

    cov = cross / k - w_mean * h_mean
    denom = np.sqrt(w_var * h_var)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > _EPS, cov / np.where(denom > _EPS, denom, 1.0), 0.0)
    r = np.clip(r, -1.0, 1.0)
    return Signal(r, signal.bin_width, signal.t0)


# ---------------------------------------------------------------------------
# cluster detection and statistics


def detect_clusters(
    signal: Signal,
    threshold: float,
    merge_gap: float = 0.2,
    min_duration: float = 0.0,
) -> ClusterSet:
    """Find maximal runs of bins whose value exceeds the threshold.

    Runs separated by a gap shorter than ``merge_gap`` are merged; merged
    runs shorter than ``min_duration`` are discarded.  Cluster times are in
    seconds relative to the signal's origin.
    """
    v = signal.values
    bw = signal.bin_width
    above = v > threshold
    if not above.any():
        return ClusterSet([])

    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts = list(np.flatnonzero(above[:1]) if above[0] else [])
    # run start indices: position after 0->1 edges; run ends: positions of 1->0 edges
    starts += [int(e) + 1 for e in edges if above[e + 1]]
    ends = [int(e) for e in edges if above[e]]
    if above[-1]:
        ends.append(len(v) - 1)
    starts = sorted(int(s) for s in starts)

    merged: list[list[int]] = []
    for s, e in zip(starts, ends):
        if merged and (s - merged[-1][1] - 1) * bw < merge_gap:
            merged[-1][1] = e
        else:
            merged.append([s, e])

    clusters = []
    for s, e in merged:
        length = (e - s + 1) * bw
        if length < min_duration - 1e-9:
            continue
        clusters.append(
            Cluster(
                start=signal.t0 + s * bw,
                end=signal.t0 + (e + 1) * bw,
                peak_value=float(v[s : e + 1].max()),
            )
        )
    return ClusterSet(clusters)


@dataclass
class CommandStats:
    """Distribution summary of a scan output plus its cluster structure."""

    mean: float
    std: float
    median: float
    p25: float
    p75: float
    max: float
    min: float
    skewness: float
    kurtosis: float
    cluster_count: int
    total_cluster_length: float
    avg_cluster_length: float
    total_time_span: float
    avg_time_gap: float

    FIELDS = (
        "mean",
        "std",
        "median",
        "p25",
        "p75",
        "max",
        "min",
        "skewness",
        "kurtosis",
        "cluster_count",
        "total_cluster_length",
        "avg_cluster_length",
        "total_time_span",
        "avg_time_gap",
    )

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in self.FIELDS}


def _moments(v: np.ndarray) -> tuple[float, float, float, float]:
    # population moments; zero-variance input maps skewness/kurtosis to 0
    mu = float(v.mean())
    d = v - mu
    m2 = float(np.mean(d * d))
    if m2 <= _EPS:
        return mu, 0.0, 0.0, 0.0
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return mu, math.sqrt(m2), m3 / m2**1.5, m4 / m2**2 - 3.0


def cluster_statistics(signal: Signal, clusters: ClusterSet) -> CommandStats:
    """Reduce a scan output and its clusters to a fixed statistics block.

    Moment statistics run over the full scan output, not only the clusters.
    ``avg_time_gap`` is the mean start-to-start spacing of consecutive
    clusters, 0 when fewer than two clusters exist; ``total_time_span`` is
    last cluster end minus first cluster start.
    """
    v = signal.values
    if len(v) == 0:
        mu = sd = sk = ku = med = p25 = p75 = vmax = vmin = 0.0
    else:
        mu, sd, sk, ku = _moments(v)
        med, p25, p75 = (float(q) for q in np.percentile(v, [50, 25, 75]))
        vmax = float(v.max())
        vmin = float(v.min())

    cl = clusters.clusters
    count = len(cl)
    if count == 0:
        total_len = avg_len = span = gap = 0.0
    else:
        total_len = float(sum(c.length for c in cl))
        avg_len = total_len / count
        span = cl[-1].end - cl[0].start
        gap = (cl[-1].start - cl[0].start) / (count - 1) if count > 1 else 0.0

    return CommandStats(
        mean=mu,
        std=sd,
        median=med,
        p25=p25,
        p75=p75,
        max=vmax,
        min=vmin,
        skewness=sk,
        kurtosis=ku,
        cluster_count=count,
        total_cluster_length=total_len,
        avg_cluster_length=avg_len,
        total_time_span=span,
        avg_time_gap=gap,
    )


# ---------------------------------------------------------------------------
# kernel extraction and kernel banks


def extract_kernel(
    trace: Trace,
    kind: CommandKind,
    start: float,
    end: float,
    bin_width: float = 0.01,
    source_id: str = "",
) -> Kernel:
    """Bin the [start, end) window of a trace into a kernel.

    The window must contain at least one packet; kernels are built from the
    signed bin values so the direction pattern is part of the signature.
    """
    if bin_width <= 0:
        raise InvalidConfig("bin_width must be positive")
    if not (0.0 <= start < end):
        raise EmptyWindow(f"bad window [{start}, {end})")
    sel = (trace.times >= start) & (trace.times < end)
    if not sel.any():
        raise EmptyWindow(f"no packets in [{start}, {end})")
    n_bins = max(1, math.ceil((end - start) / bin_width - 1e-9))
    idx = np.minimum(((trace.times[sel] - start) / bin_width).astype(np.int64), n_bins - 1)
    weights = (trace.dirs[sel] * trace.sizes[sel]).astype(np.float64)
    values = np.bincount(idx, weights=weights, minlength=n_bins)
    return Kernel(kind=kind, bin_width=bin_width, values=values, source_id=source_id)


class KernelBank:
    """Ordered collection of kernels; the first kernel per kind is the scan default."""

    def __init__(self, kernels: Sequence[Kernel]):
        self.kernels = list(kernels)

    def __len__(self) -> int:
        return len(self.kernels)

    def __iter__(self):
        return iter(self.kernels)

    def kernel_for(self, kind: CommandKind) -> Kernel:
        for k in self.kernels:
            if k.kind == kind:
                return k
        from .errors import MissingKernel

        raise MissingKernel(kind)

    def has(self, kind: CommandKind) -> bool:
        return any(k.kind == kind for k in self.kernels)

    def fingerprint(self) -> str:
        payload = json.dumps(self._as_jsonable(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def _as_jsonable(self) -> list[dict]:
        return [
            {
                "kind": k.kind.value,
                "bin_width": k.bin_width,
                "values": [float(x) for x in k.values],
                "source_id": k.source_id,
            }
            for k in self.kernels
        ]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._as_jsonable(), indent=1) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KernelBank":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(str(path))
        try:
            raw = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"kernel bank {path} is not valid JSON: {e}") from None
        if not isinstance(raw, list):
            raise InvalidConfig("kernel bank must be a JSON array")
        kernels = []
        for entry in raw:
            try:
                kernels.append(
                    Kernel(
                        kind=CommandKind(entry["kind"]),
                        bin_width=float(entry["bin_width"]),
                        values=np.array(entry["values"], dtype=np.float64),
                        source_id=str(entry.get("source_id", "")),
                    )
                )
            except (KeyError, ValueError) as e:
                raise InvalidConfig(f"bad kernel entry in {path}: {e}") from None
        return cls(kernels)
