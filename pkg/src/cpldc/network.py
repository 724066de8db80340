"""Directed attributed networks and the LINQS citation-dataset format.

A LINQS dataset is two whitespace-separated text files::

    <name>.content   <paper_id> <attr_1> ... <attr_d> <class_label>
    <name>.cites     <cited_paper_id> <citing_paper_id>

Each cites line becomes one directed link citing -> cited.  Nodes are numbered
densely in content-file order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from cpldc.errors import LinqsFormatError, LinqsParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Network:
    """Directed multigraph stored as parallel source/target arrays.

    Links are ordered by source node and, within a source, by link slot, so
    ``dst[offsets[i]:offsets[i + 1]]`` is the ordered out-link list of node i.
    Self-links and repeated links are kept as separate slots.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    labels: np.ndarray | None = None
    id_map: tuple[str, ...] | None = None
    class_names: tuple[str, ...] | None = None
    dropped_links: int = 0
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise ValueError("src and dst must be 1-d arrays of equal length")
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        if src.size and (src.min() < 0 or src.max() >= self.n or dst.min() < 0 or dst.max() >= self.n):
            raise ValueError("link endpoint outside [0, n)")
        # stable sort keeps slot order within each source
        order = np.argsort(src, kind="stable")
        src, dst = src[order], dst[order]
        src.flags.writeable = False
        dst.flags.writeable = False
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=offsets[1:])
        offsets.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (self.n,):
                raise ValueError("labels must have one entry per node")
            object.__setattr__(self, "labels", labels)
        if self.id_map is not None and len(self.id_map) != self.n:
            raise ValueError("id_map must have one entry per node")

    @classmethod
    def from_out_links(cls, out_links: Sequence[Sequence[int]], **kwargs) -> "Network":
        src = np.repeat(np.arange(len(out_links)), [len(l) for l in out_links])
        dst = np.fromiter((j for l in out_links for j in l), dtype=np.int64, count=src.size)
        return cls(len(out_links), src, dst, **kwargs)

    @property
    def num_links(self) -> int:
        return int(self.src.size)

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)

    @property
    def out_links(self) -> list[np.ndarray]:
        return [self.dst[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n)]

    @property
    def slots(self) -> np.ndarray:
        """Position of each link within its source's out-link list."""
        return np.arange(self.num_links) - self.offsets[self.src]

    def num_classes(self) -> int | None:
        if self.labels is None:
            return None
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if self.n else 0


@dataclass(frozen=True)
class ContentMatrix:
    """d x n attribute matrix; column i is the content vector of node i."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("content matrix must be 2-d (d x n)")
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def in_link_index(network: Network) -> list[list[tuple[int, int]]]:
    """For every node j, the (source, slot) pairs of links that end at j."""
    index: list[list[tuple[int, int]]] = [[] for _ in range(network.n)]
    for i, slot, j in zip(network.src.tolist(), network.slots.tolist(), network.dst.tolist()):
        index[j].append((i, slot))
    return index


def _split(line: str) -> list[str]:
    return line.strip().split()


def load_linqs(content_path, cites_path) -> tuple[Network, ContentMatrix]:
    """Read a LINQS content/cites pair.

    Cites lines that mention an id missing from the content file are skipped;
    the number skipped is stored in ``Network.dropped_links``.

    Raises
    ------
    LinqsParseError
        A line has too few fields or a non-numeric attribute.
    LinqsFormatError
        Content lines disagree on the number of attributes.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    raw_labels: list[str] = []
    seen: set[str] = set()
    d = None
    with content_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = _split(line)
            if not fields:
                continue
            if len(fields) < 2:
                raise LinqsParseError(content_path, lineno, "expected '<id> <attrs...> <label>'")
            attrs = fields[1:-1]
            if d is None:
                d = len(attrs)
            elif len(attrs) != d:
                raise LinqsFormatError(
                    content_path, lineno, f"expected {d} attributes, found {len(attrs)}"
                )
            try:
                rows.append(np.array(attrs, dtype=float))
            except ValueError as exc:
                raise LinqsParseError(content_path, lineno, f"bad attribute value: {exc}") from None
            if fields[0] in seen:
                raise LinqsParseError(content_path, lineno, f"duplicate node id {fields[0]!r}")
            ids.append(fields[0])
            seen.add(fields[0])
            raw_labels.append(fields[-1])

    lookup = {node_id: i for i, node_id in enumerate(ids)}
    class_names = tuple(sorted(set(raw_labels)))
    class_index = {name: c for c, name in enumerate(class_names)}
    labels = np.array([class_index[name] for name in raw_labels], dtype=np.int64)

    src, dst = [], []
    dropped = 0
    with cites_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = _split(line)
            if not fields:
                continue
            if len(fields) != 2:
                raise LinqsParseError(cites_path, lineno, "expected '<cited_id> <citing_id>'")
            cited, citing = fields
            if cited not in lookup or citing not in lookup:
                dropped += 1
                continue
            src.append(lookup[citing])
            dst.append(lookup[cited])
    if dropped:
        logger.warning("dropped %d cites lines referencing unknown ids in %s", dropped, cites_path)

    n = len(ids)
    values = np.vstack(rows).T if rows else np.zeros((0, 0))
    network = Network(
        n,
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        labels=labels,
        id_map=tuple(ids),
        class_names=class_names,
        dropped_links=dropped,
    )
    return network, ContentMatrix(values)


def write_linqs(network: Network, content: ContentMatrix, content_path, cites_path) -> None:
    """Write a network and its content in LINQS format (tab separated)."""
    if content.n != network.n:
        raise ValueError("content matrix and network disagree on node count")
    ids = network.id_map or tuple(str(i) for i in range(network.n))
    if network.labels is None:
        label_names = ["0"] * network.n
    elif network.class_names is not None:
        label_names = [network.class_names[c] for c in network.labels]
    else:
        label_names = [str(c) for c in network.labels]
    values = content.values
    integral = np.all(values == np.round(values))
    with Path(content_path).open("w", encoding="utf-8") as fh:
        for i in range(network.n):
            col = values[:, i]
            attrs = [str(int(v)) for v in col] if integral else [repr(float(v)) for v in col]
            fh.write("\t".join([ids[i], *attrs, label_names[i]]) + "\n")
    with Path(cites_path).open("w", encoding="utf-8") as fh:
        for i, j in zip(network.src.tolist(), network.dst.tolist()):
            fh.write(f"{ids[j]}\t{ids[i]}\n")
