"""Readers and writers for the pipeline's on-disk formats.

Matrix files use the ``NDM1`` layout: 4 magic bytes ``NDM1``, little-endian
u32 row and column counts, a float32 row-major payload, then a UTF-8 block of
newline-separated row identifiers. Events and atlas assignments travel as TSV.
Trained decoders use an ``NDM1`` container that carries a JSON header
(hyperparameters and standardization vectors) ahead of the weight payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"NDM1"
_HEADER = struct.Struct("<II")
_U32 = struct.Struct("<I")


def write_matrix(path, values, row_ids):
    """Write a 2-D array and its row identifiers as an NDM1 file.

    Parameters
    ----------
    path : str or Path
        Destination file.
    values : ndarray (rows, cols)
        Matrix payload; stored as little-endian float32.
    row_ids : sequence of str
        One identifier per row. Identifiers must not contain newlines.
    """
    values = np.asarray(values)
    if values.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got ndim={values.ndim}")
    rows, cols = values.shape
    row_ids = [str(r) for r in row_ids]
    if len(row_ids) != rows:
        raise FormatError(f"{len(row_ids)} row ids for {rows} rows")
    if any("\n" in r for r in row_ids):
        raise FormatError("row ids must not contain newlines")
    payload = np.ascontiguousarray(values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(rows, cols))
        fh.write(payload.tobytes())
        fh.write("\n".join(row_ids).encode("utf-8"))


def read_matrix(path):
    """Read an NDM1 file, returning ``(values, row_ids)``.

    Raises FormatError on a bad magic, truncated payload, or a row-id block
    inconsistent with the header row count.
    """
    blob = Path(path).read_bytes()
    values, row_ids, end = _parse_matrix(blob, 0, str(path))
    if end != len(blob):
        raise FormatError(f"{path}: {len(blob) - end} trailing bytes")
    return values, row_ids


def _parse_matrix(blob, offset, label):
    if blob[offset : offset + 4] != MAGIC:
        raise FormatError(f"{label}: bad magic {blob[offset:offset + 4]!r}")
    offset += 4
    if len(blob) < offset + _HEADER.size:
        raise FormatError(f"{label}: truncated header")
    rows, cols = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    nbytes = rows * cols * 4
    if len(blob) < offset + nbytes:
        raise FormatError(f"{label}: truncated payload ({len(blob) - offset} of {nbytes} bytes)")
    values = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=offset)
    values = values.reshape(rows, cols).copy()
    offset += nbytes
    id_block = blob[offset:].decode("utf-8")
    if rows == 0:
        if id_block:
            raise FormatError(f"{label}: row ids present for empty matrix")
        return values, [], len(blob)
    row_ids = id_block.split("\n")
    if len(row_ids) != rows:
        raise FormatError(f"{label}: {len(row_ids)} row ids for {rows} rows")
    return values, row_ids, len(blob)


def write_decoder(path, weights, voxel_ids, header):
    """Persist a trained decoder: JSON header followed by the weight matrix.

    Layout: ``NDM1`` magic, u32 JSON length, the UTF-8 JSON header, then the
    weight payload in the matrix layout (u32 rows, u32 cols, float32 payload,
    row-id block holding voxel ids).
    """
    hdr = json.dumps(header).encode("utf-8")
    weights = np.asarray(weights)
    rows, cols = weights.shape
    ids = [str(v) for v in voxel_ids]
    if len(ids) != rows:
        raise FormatError(f"{len(ids)} voxel ids for {rows} weight rows")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(len(hdr)))
        fh.write(hdr)
        fh.write(_HEADER.pack(rows, cols))
        fh.write(np.ascontiguousarray(weights, dtype="<f4").tobytes())
        fh.write("\n".join(ids).encode("utf-8"))


def read_decoder(path):
    """Read a decoder container, returning ``(weights, voxel_ids, header)``."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated header")
    (hdr_len,) = _U32.unpack_from(blob, 4)
    if len(blob) < 8 + hdr_len:
        raise FormatError(f"{path}: truncated JSON header")
    try:
        header = json.loads(blob[8 : 8 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad JSON header: {exc}") from exc
    # the remainder reuses the matrix layout minus the magic
    rest = MAGIC + blob[8 + hdr_len :]
    weights, ids, _ = _parse_matrix(rest, 0, str(path))
    return weights, ids, header


EVENT_COLUMNS = (
    "stimulus_id",
    "modality",
    "onset",
    "duration",
    "run",
    "session",
    "role",
    "paired_id",
)


def write_events(path, events):
    """Write stimulus events to the tab-separated events format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(EVENT_COLUMNS) + "\n")
        for ev in events:
            fh.write(
                "\t".join(
                    (
                        ev.stimulus_id,
                        ev.modality.value if ev.modality is not None else "",
                        repr(float(ev.onset)),
                        repr(float(ev.duration)),
                        str(ev.run),
                        str(ev.session),
                        ev.role.value,
                        ev.paired_id,
                    )
                )
                + "\n"
            )


def read_events(path):
    """Read an events TSV into a list of StimulusEvent."""
    from .core import Modality, Role, StimulusEvent

    events = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != EVENT_COLUMNS:
            raise FormatError(f"{path}: unexpected header {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(EVENT_COLUMNS):
                raise FormatError(f"{path}:{lineno}: expected {len(EVENT_COLUMNS)} columns")
            sid, mod, onset, dur, run, session, role, paired = parts
            events.append(
                StimulusEvent(
                    stimulus_id=sid,
                    modality=Modality(mod) if mod else None,
                    onset=float(onset),
                    duration=float(dur),
                    run=int(run),
                    session=int(session),
                    role=Role(role),
                    paired_id=paired,
                )
            )
    return events


def read_features(path, modality=None, model_name=None):
    """Load a feature matrix, resolving its metadata.

    Matrix files carry only row ids, so the feature modality and model name
    come from a ``<stem>.json`` sidecar when present, or from the arguments.
    """
    from .core import FeatureMatrix, FeatureModality

    values, ids = read_matrix(path)
    sidecar = Path(path).with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        modality = modality or meta.get("feature_modality")
        model_name = model_name or meta.get("model_name")
    if modality is None:
        raise FormatError(
            f"{path}: feature modality unknown; provide a sidecar JSON or pass it explicitly"
        )
    return FeatureMatrix(
        values=values,
        stimulus_ids=ids,
        model_name=model_name or Path(path).stem,
        feature_modality=FeatureModality(modality),
    )


def write_atlas(path, assignment):
    """Write a voxel->label atlas assignment as two-column TSV.

    The second column packs hemisphere and label id as ``"L 42"``.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for voxel_id in sorted(assignment):
            hemi, label_id, _name = assignment[voxel_id]
            fh.write(f"{voxel_id}\t{hemi} {label_id}\n")


def read_atlas(path):
    """Read an atlas TSV into an AtlasAssignment."""
    from .roi import AtlasAssignment, label_name

    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                voxel, packed = line.split("\t")
                hemi, label_id = packed.split(" ")
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: expected 'voxel<TAB>HEMI id'") from exc
            if hemi not in ("L", "R"):
                raise FormatError(f"{path}:{lineno}: hemisphere must be L or R, got {hemi!r}")
            mapping[int(voxel)] = (hemi, int(label_id), label_name(int(label_id)))
    return AtlasAssignment(mapping)
