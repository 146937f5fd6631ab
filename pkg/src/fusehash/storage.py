"""On-disk formats: AMFH binary files, CSV import, and bundle directories.

Every AMFH file is magic ``b"AMFH"``, a u8 kind tag, a u16 format version,
a kind-specific little-endian payload, and a trailing CRC-32 over all
preceding bytes. Loads verify magic, kind, version, and checksum before
touching the payload, so a truncated or mangled file is rejected whole.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .centers import HashCenterTable
from .exceptions import CorruptFileError, ShapeError
from .kernel import AnchorSet
from .packing import pack_codes, unpack_codes
from .synth import DatasetBundle
from .training import TrainedModel

MAGIC = b"AMFH"
FORMAT_VERSION = 1
KIND_FEATURES = 1
KIND_CODES = 2
KIND_MODEL = 3
KIND_CENTERS = 4

_HEADER = struct.Struct("<BH")  # kind, version; follows the 4 magic bytes
_CRC = struct.Struct("<I")


class _Cursor:
    """Sequential little-endian reader that rejects out-of-bounds access."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if count < 0 or end > len(self.buf):
            raise CorruptFileError("payload shorter than its declared contents")
        chunk = self.buf[self.pos : end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").copy()

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise CorruptFileError("payload longer than its declared contents")


def _write_file(path, kind: int, payload: bytes) -> None:
    blob = MAGIC + _HEADER.pack(kind, FORMAT_VERSION) + payload
    blob += _CRC.pack(zlib.crc32(blob) & 0xFFFFFFFF)
    Path(path).write_bytes(blob)


def _checked_payload(blob: bytes, kind: int, path) -> bytes:
    head = len(MAGIC) + _HEADER.size
    if len(blob) < head + _CRC.size:
        raise CorruptFileError(f"{path}: too short to be a valid file")
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptFileError(f"{path}: bad magic bytes")
    (stored,) = _CRC.unpack(blob[-_CRC.size :])
    if zlib.crc32(blob[: -_CRC.size]) & 0xFFFFFFFF != stored:
        raise CorruptFileError(f"{path}: checksum mismatch")
    file_kind, version = _HEADER.unpack(blob[len(MAGIC) : head])
    if file_kind != kind:
        raise CorruptFileError(f"{path}: kind tag {file_kind}, expected {kind}")
    if version != FORMAT_VERSION:
        raise CorruptFileError(f"{path}: unsupported format version {version}")
    return blob[head : -_CRC.size]


def _read_file(path, kind: int) -> bytes:
    return _checked_payload(Path(path).read_bytes(), kind, path)


def store_features(matrix, path) -> None:
    """Write a (d, n) feature matrix as a kind-1 AMFH file."""
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {mat.shape}")
    payload = struct.pack("<QQ", *mat.shape) + mat.astype("<f8").tobytes(order="C")
    _write_file(path, KIND_FEATURES, payload)


def _load_csv(path) -> np.ndarray:
    # One sample per row; transposed so samples become columns.
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (ValueError, OSError) as exc:
        raise CorruptFileError(f"{path}: neither an AMFH file nor parseable CSV") from exc
    return rows.T.copy()


def load_features(path) -> np.ndarray:
    """Read a kind-1 AMFH file, or fall back to CSV when the magic is absent."""
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        return _load_csv(path)
    cur = _Cursor(_checked_payload(blob, KIND_FEATURES, path))
    rows = cur.u64()
    cols = cur.u64()
    data = cur.f64_array(rows * cols)
    cur.done()
    return data.reshape(rows, cols)


def store_codes(codes, path) -> None:
    """Write a sign-code matrix as a kind-2 AMFH file, one packed column at a time."""
    mat = np.asarray(codes)
    packed = pack_codes(mat)  # validates shape and the {-1, +1} alphabet
    payload = struct.pack("<QQ", *mat.shape) + packed.T.tobytes(order="C")
    _write_file(path, KIND_CODES, payload)


def load_codes(path) -> np.ndarray:
    payload = _read_file(path, KIND_CODES)
    cur = _Cursor(payload)
    code_length = cur.u64()
    count = cur.u64()
    if code_length < 1:
        raise CorruptFileError(f"{path}: non-positive code length")
    bytes_per_code = (code_length + 7) // 8
    raw = cur.take(bytes_per_code * count)
    cur.done()
    packed = (
        np.frombuffer(raw, dtype=np.uint8).reshape(count, bytes_per_code).T.copy()
    )
    return unpack_codes(packed, code_length)


def store_centers(table: HashCenterTable, path) -> None:
    """Write a hash-center table as a kind-4 AMFH file."""
    payload = struct.pack(
        "<QQQQB",
        table.code_length,
        table.num_categories,
        table.seed,
        table.hadamard_order,
        1 if table.is_exact else 0,
    )
    payload += pack_codes(table.centers).T.tobytes(order="C")
    _write_file(path, KIND_CENTERS, payload)


def load_centers(path) -> HashCenterTable:
    cur = _Cursor(_read_file(path, KIND_CENTERS))
    code_length = cur.u64()
    num_categories = cur.u64()
    seed = cur.u64()
    hadamard_order = cur.u64()
    is_exact = cur.u8()
    if code_length < 1 or num_categories < 1:
        raise CorruptFileError(f"{path}: non-positive center dimensions")
    bytes_per_code = (code_length + 7) // 8
    raw = cur.take(bytes_per_code * num_categories)
    cur.done()
    packed = (
        np.frombuffer(raw, dtype=np.uint8)
        .reshape(num_categories, bytes_per_code)
        .T.copy()
    )
    return HashCenterTable(
        code_length=code_length,
        num_categories=num_categories,
        centers=unpack_codes(packed, code_length),
        seed=seed,
        hadamard_order=hadamard_order,
        is_exact=bool(is_exact),
    )


def store_model(model: TrainedModel, path) -> None:
    """Write a trained model as a kind-3 AMFH file.

    The objective trace is training telemetry and is not persisted; loads
    return an empty trace.
    """
    num_modalities = model.num_modalities
    if num_modalities < 1:
        raise ShapeError("model has no modalities")
    num_anchors = model.projections[0].shape[1]
    for proj in model.projections:
        if proj.shape != (model.code_length, num_anchors):
            raise ShapeError(
                f"projection shape {proj.shape} differs from "
                f"({model.code_length}, {num_anchors})"
            )
    parts = [
        struct.pack("<QQQd", num_modalities, model.code_length, num_anchors, model.delta),
        np.asarray(model.train_weights, dtype="<f8").tobytes(),
    ]
    for m in range(num_modalities):
        anchor_set = model.anchor_sets[m]
        anchors = np.asarray(anchor_set.anchors, dtype=np.float64)
        if anchors.shape[1] != num_anchors:
            raise ShapeError(
                f"anchor set {m} holds {anchors.shape[1]} anchors, "
                f"expected {num_anchors}"
            )
        parts.append(
            struct.pack("<QdQ", anchors.shape[0], anchor_set.kernel_width, anchor_set.seed)
        )
        parts.append(anchors.astype("<f8").tobytes(order="C"))
        parts.append(np.asarray(model.projections[m], dtype="<f8").tobytes(order="C"))
    _write_file(path, KIND_MODEL, b"".join(parts))


def load_model(path) -> TrainedModel:
    cur = _Cursor(_read_file(path, KIND_MODEL))
    num_modalities = cur.u64()
    code_length = cur.u64()
    num_anchors = cur.u64()
    delta = cur.f64()
    if num_modalities < 1 or code_length < 1 or num_anchors < 1:
        raise CorruptFileError(f"{path}: non-positive model dimensions")
    weights = cur.f64_array(num_modalities)
    projections = []
    anchor_sets = []
    for m in range(num_modalities):
        dim = cur.u64()
        kernel_width = cur.f64()
        seed = cur.u64()
        if dim < 1:
            raise CorruptFileError(f"{path}: non-positive anchor dimensionality")
        anchors = cur.f64_array(dim * num_anchors).reshape(dim, num_anchors)
        proj = cur.f64_array(code_length * num_anchors).reshape(
            code_length, num_anchors
        )
        anchor_sets.append(
            AnchorSet(
                anchors=anchors,
                kernel_width=kernel_width,
                modality_index=m,
                seed=seed,
            )
        )
        projections.append(proj)
    cur.done()
    return TrainedModel(
        projections=projections,
        anchor_sets=anchor_sets,
        train_weights=weights,
        delta=delta,
        code_length=code_length,
        objective_trace=[],
        converged=True,
    )


def store_bundle(bundle: DatasetBundle, directory) -> None:
    """Write a dataset bundle as a directory of AMFH and text files."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    num_classes = max((max(s, default=-1) for s in bundle.labels), default=-1) + 1
    manifest = [
        f"num_modalities={len(bundle.modalities)}",
        f"num_samples={bundle.num_samples}",
        f"num_classes={num_classes}",
    ]
    (path / "manifest.txt").write_text("\n".join(manifest) + "\n")
    for m, mat in enumerate(bundle.modalities):
        store_features(mat, path / f"mod{m}.amfh")
    label_lines = [" ".join(str(c) for c in sorted(s)) for s in bundle.labels]
    (path / "labels.txt").write_text("\n".join(label_lines) + "\n")
    for name, indices in (
        ("train", bundle.train_indices),
        ("query", bundle.query_indices),
        ("retrieval", bundle.retrieval_indices),
    ):
        lines = "\n".join(str(int(i)) for i in indices)
        (path / f"split.{name}.txt").write_text(lines + "\n")


def read_manifest(directory) -> dict[str, int]:
    path = Path(directory) / "manifest.txt"
    if not path.is_file():
        raise CorruptFileError(f"{directory}: missing manifest.txt")
    values: dict[str, int] = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CorruptFileError(f"{path}: malformed manifest line {line!r}")
        key, _, value = line.partition("=")
        try:
            values[key.strip()] = int(value.strip())
        except ValueError as exc:
            raise CorruptFileError(f"{path}: non-integer manifest value {line!r}") from exc
    for key in ("num_modalities", "num_samples", "num_classes"):
        if key not in values:
            raise CorruptFileError(f"{path}: manifest misses key {key!r}")
    return values


def load_labels(path) -> list[set[int]]:
    """One sample per line, space-separated category indices."""
    sets: list[set[int]] = []
    for line in Path(path).read_text().splitlines():
        stripped = line.strip()
        try:
            sets.append({int(tok) for tok in stripped.split()} if stripped else set())
        except ValueError as exc:
            raise CorruptFileError(f"{path}: malformed label line {line!r}") from exc
    return sets


def _load_split(path) -> np.ndarray:
    text = Path(path).read_text().split()
    try:
        return np.array([int(tok) for tok in text], dtype=np.int64)
    except ValueError as exc:
        raise CorruptFileError(f"{path}: malformed split index") from exc


def load_bundle(directory) -> DatasetBundle:
    path = Path(directory)
    manifest = read_manifest(path)
    modalities = [
        load_features(path / f"mod{m}.amfh")
        for m in range(manifest["num_modalities"])
    ]
    labels = load_labels(path / "labels.txt")
    if len(labels) != manifest["num_samples"]:
        raise CorruptFileError(
            f"{directory}: manifest declares {manifest['num_samples']} samples, "
            f"labels.txt holds {len(labels)}"
        )
    for m, mat in enumerate(modalities):
        if mat.shape[1] != len(labels):
            raise CorruptFileError(
                f"{directory}: mod{m}.amfh holds {mat.shape[1]} samples, "
                f"expected {len(labels)}"
            )
    return DatasetBundle(
        modalities=modalities,
        labels=labels,
        train_indices=_load_split(path / "split.train.txt"),
        query_indices=_load_split(path / "split.query.txt"),
        retrieval_indices=_load_split(path / "split.retrieval.txt"),
    )
