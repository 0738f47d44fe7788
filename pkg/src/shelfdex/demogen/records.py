"""Episode record container and the binary dataset format.

File layout (see docs/dataset.md): magic "SDEXDATA", version u32, episode
count u32, then length-prefixed episode blobs. All floats are little-endian
32-bit in storage and widened to float64 on load; images are raw planes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from shelfdex.errors import DataError
from shelfdex.shelfsim.world import EVENT_KINDS, Event

MAGIC = b"SDEXDATA"
VERSION = 1

OUTCOMES = ("", "Success", "SlipFail", "CrushFail", "NoContact", "Timeout", "CollisionAbort")
PERTURBATIONS = ("", "Drop", "Misalign", "EdgeCollide")


@dataclass
class StepRow:
    s: np.ndarray                 # (22,) proprioception before the action
    a: np.ndarray                 # (22,) action taken
    tau: np.ndarray               # (5,) reduced tactile
    events: list[Event] = field(default_factory=list)
    rgbm: np.ndarray | None = None       # (H, W, 4) primary-view RGBM
    wrist_rgb: np.ndarray | None = None  # (H, W, 3)


@dataclass
class EpisodeRecord:
    seed: int
    scene_text: str
    instruction: str
    outcome: str
    is_recovery: bool = False
    perturbation: str = ""
    rows: list[StepRow] = field(default_factory=list)

    def n_steps(self) -> int:
        return len(self.rows)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _unpack_str(blob: bytes, off: int):
    (n,) = struct.unpack_from("<I", blob, off)
    off += 4
    return blob[off : off + n].decode("utf-8"), off + n


def _pack_f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def encode_episode(rec: EpisodeRecord) -> bytes:
    if not rec.rows:
        raise DataError("episode record must contain at least one row")
    h, w = (0, 0)
    for row in rec.rows:
        if row.rgbm is not None:
            h, w = row.rgbm.shape[:2]
            break
    parts = [
        struct.pack("<q", rec.seed),
        _pack_str(rec.scene_text),
        _pack_str(rec.instruction),
        struct.pack("<B", OUTCOMES.index(rec.outcome)),
        struct.pack("<B", 1 if rec.is_recovery else 0),
        struct.pack("<B", PERTURBATIONS.index(rec.perturbation)),
        struct.pack("<HHI", h, w, len(rec.rows)),
    ]
    for row in rec.rows:
        parts.append(_pack_f32(row.s))
        parts.append(_pack_f32(row.a))
        parts.append(_pack_f32(row.tau))
        parts.append(struct.pack("<B", len(row.events)))
        for ev in row.events:
            parts.append(struct.pack("<B", EVENT_KINDS.index(ev.kind)))
            parts.append(struct.pack("<i", ev.obj_id))
            parts.append(struct.pack("<f", ev.value))
            parts.append(_pack_str(ev.body))
            parts.append(struct.pack("<B", OUTCOMES.index(ev.outcome)))
        has_img = row.rgbm is not None and row.wrist_rgb is not None
        parts.append(struct.pack("<B", 1 if has_img else 0))
        if has_img:
            parts.append(_pack_f32(np.moveaxis(row.rgbm, 2, 0)))      # raw planes
            parts.append(_pack_f32(np.moveaxis(row.wrist_rgb, 2, 0)))
    return b"".join(parts)


def decode_episode(blob: bytes) -> EpisodeRecord:
    off = 0
    (seed,) = struct.unpack_from("<q", blob, off)
    off += 8
    scene_text, off = _unpack_str(blob, off)
    instruction, off = _unpack_str(blob, off)
    outcome_i, is_rec, pert_i = struct.unpack_from("<BBB", blob, off)
    off += 3
    h, w, n_rows = struct.unpack_from("<HHI", blob, off)
    off += 8
    rows = []
    for _ in range(n_rows):
        s = np.frombuffer(blob, "<f4", 22, off).astype(np.float64)
        off += 88
        a = np.frombuffer(blob, "<f4", 22, off).astype(np.float64)
        off += 88
        tau = np.frombuffer(blob, "<f4", 5, off).astype(np.float64)
        off += 20
        (n_ev,) = struct.unpack_from("<B", blob, off)
        off += 1
        events = []
        for _ in range(n_ev):
            (kind_i,) = struct.unpack_from("<B", blob, off)
            off += 1
            (obj_id,) = struct.unpack_from("<i", blob, off)
            off += 4
            (value,) = struct.unpack_from("<f", blob, off)
            off += 4
            body, off = _unpack_str(blob, off)
            (ev_out,) = struct.unpack_from("<B", blob, off)
            off += 1
            events.append(
                Event(kind=EVENT_KINDS[kind_i], body=body, obj_id=obj_id,
                      value=float(np.float32(value)), outcome=OUTCOMES[ev_out])
            )
        (has_img,) = struct.unpack_from("<B", blob, off)
        off += 1
        rgbm = wrist = None
        if has_img:
            rgbm = np.frombuffer(blob, "<f4", h * w * 4, off).astype(np.float64)
            rgbm = np.moveaxis(rgbm.reshape(4, h, w), 0, 2)
            off += h * w * 16
            wrist = np.frombuffer(blob, "<f4", h * w * 3, off).astype(np.float64)
            wrist = np.moveaxis(wrist.reshape(3, h, w), 0, 2)
            off += h * w * 12
        rows.append(StepRow(s=s, a=a, tau=tau, events=events, rgbm=rgbm, wrist_rgb=wrist))
    return EpisodeRecord(
        seed=seed,
        scene_text=scene_text,
        instruction=instruction,
        outcome=OUTCOMES[outcome_i],
        is_recovery=bool(is_rec),
        perturbation=PERTURBATIONS[pert_i],
        rows=rows,
    )


def write_dataset(path, records: list[EpisodeRecord]) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(records)))
        for rec in records:
            blob = encode_episode(rec)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)


def read_dataset(path) -> list[EpisodeRecord]:
    blob = Path(path).read_bytes()
    return [decode_episode(b) for b in iter_episode_blobs(blob)]


def iter_episode_blobs(blob: bytes):
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError("bad magic: not an episode dataset file")
    version, count = struct.unpack_from("<II", blob, len(MAGIC))
    if version != VERSION:
        raise DataError(f"unsupported dataset version {version}")
    off = len(MAGIC) + 8
    for _ in range(count):
        (n,) = struct.unpack_from("<I", blob, off)
        off += 4
        yield blob[off : off + n]
        off += n


class DatasetReader:
    """Random access over a dataset file: numeric fields preloaded, images
    decoded lazily per row."""

    def __init__(self, path):
        self.path = Path(path)
        blob = self.path.read_bytes()
        self.records: list[EpisodeRecord] = []
        self._image_offsets: list[list[tuple[int, int, int] | None]] = []
        self._blob = blob
        base = len(MAGIC) + 8
        if blob[: len(MAGIC)] != MAGIC:
            raise DataError("bad magic: not an episode dataset file")
        _, count = struct.unpack_from("<II", blob, len(MAGIC))
        off = base
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            rec, img_offs = _decode_lazy(blob, off)
            self.records.append(rec)
            self._image_offsets.append(img_offs)
            off += n

    def __len__(self):
        return len(self.records)

    def images(self, episode: int, row: int):
        """(rgbm, wrist_rgb) for one row, or (None, None)."""
        entry = self._image_offsets[episode][row]
        if entry is None:
            return None, None
        off, h, w = entry
        rgbm = np.frombuffer(self._blob, "<f4", h * w * 4, off).astype(np.float64)
        rgbm = np.moveaxis(rgbm.reshape(4, h, w), 0, 2)
        wrist = np.frombuffer(self._blob, "<f4", h * w * 3, off + h * w * 16).astype(np.float64)
        wrist = np.moveaxis(wrist.reshape(3, h, w), 0, 2)
        return rgbm, wrist


def _decode_lazy(blob: bytes, off: int):
    """Like decode_episode but leaves images as offsets."""
    start = off
    (seed,) = struct.unpack_from("<q", blob, off)
    off += 8
    scene_text, off = _unpack_str(blob, off)
    instruction, off = _unpack_str(blob, off)
    outcome_i, is_rec, pert_i = struct.unpack_from("<BBB", blob, off)
    off += 3
    h, w, n_rows = struct.unpack_from("<HHI", blob, off)
    off += 8
    rows = []
    img_offs: list[tuple[int, int, int] | None] = []
    for _ in range(n_rows):
        s = np.frombuffer(blob, "<f4", 22, off).astype(np.float64)
        off += 88
        a = np.frombuffer(blob, "<f4", 22, off).astype(np.float64)
        off += 88
        tau = np.frombuffer(blob, "<f4", 5, off).astype(np.float64)
        off += 20
        (n_ev,) = struct.unpack_from("<B", blob, off)
        off += 1
        events = []
        for _ in range(n_ev):
            (kind_i,) = struct.unpack_from("<B", blob, off)
            off += 1
            (obj_id,) = struct.unpack_from("<i", blob, off)
            off += 4
            (value,) = struct.unpack_from("<f", blob, off)
            off += 4
            body, off = _unpack_str(blob, off)
            (ev_out,) = struct.unpack_from("<B", blob, off)
            off += 1
            events.append(Event(kind=EVENT_KINDS[kind_i], body=body, obj_id=obj_id,
                                value=float(np.float32(value)), outcome=OUTCOMES[ev_out]))
        (has_img,) = struct.unpack_from("<B", blob, off)
        off += 1
        if has_img:
            img_offs.append((off, h, w))
            off += h * w * 16 + h * w * 12
        else:
            img_offs.append(None)
        rows.append(StepRow(s=s, a=a, tau=tau, events=events))
    rec = EpisodeRecord(seed=seed, scene_text=scene_text, instruction=instruction,
                        outcome=OUTCOMES[outcome_i], is_recovery=bool(is_rec),
                        perturbation=PERTURBATIONS[pert_i], rows=rows)
    return rec, img_offs
