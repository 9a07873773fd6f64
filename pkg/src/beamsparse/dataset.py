"""Channel dataset container: JSON header + packed complex64 tensors.

Layout: an 8-byte magic, a little-endian uint64 header length, the UTF-8 JSON
header, then one block per realization of interleaved 32-bit float
(real, imag) pairs in the fixed vectorization order (frequency slowest, row,
column fastest).  The header records geometry, grid, generation config, seed,
shapes and the per-realization path parameters, so estimators that need the
generating paths (the genie baseline, trainers) can recover them.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .channels import ArrayGeometry, ChannelTensor, OfdmGrid, PathSet

MAGIC = b"BSDS0001"
FORMAT_VERSION = 1

__all__ = ["ChannelDataset", "write_dataset", "read_dataset", "MAGIC"]


@dataclass
class ChannelDataset:
    """In-memory view of a channel dataset: tensors plus their generating paths."""

    geometry: ArrayGeometry
    grid: OfdmGrid
    tensors: np.ndarray          # (count, n_subcarriers, n_rows, n_cols) complex
    paths: list[PathSet]
    generation: dict
    seed: int

    def __post_init__(self):
        self.tensors = np.asarray(self.tensors)
        if self.tensors.ndim != 4:
            raise ValueError("tensors must be a (count, F, rows, cols) array")
        if len(self.paths) != self.tensors.shape[0]:
            raise ValueError("paths list length does not match tensor count")

    def __len__(self) -> int:
        return self.tensors.shape[0]

    def channel(self, i: int) -> ChannelTensor:
        return ChannelTensor(self.tensors[i], self.grid, self.geometry)


def _geometry_to_dict(g: ArrayGeometry) -> dict:
    return {
        "n_rows": g.n_rows,
        "n_cols": g.n_cols,
        "row_spacing_m": g.row_spacing_m,
        "col_spacing_m": g.col_spacing_m,
        "positions_row_m": [float(x) for x in g.positions_row],
        "positions_col_m": [float(x) for x in g.positions_col],
    }


def _geometry_from_dict(d: dict) -> ArrayGeometry:
    return ArrayGeometry(
        n_rows=int(d["n_rows"]),
        n_cols=int(d["n_cols"]),
        row_spacing_m=float(d["row_spacing_m"]),
        col_spacing_m=float(d["col_spacing_m"]),
        positions_row=np.asarray(d["positions_row_m"], dtype=float),
        positions_col=np.asarray(d["positions_col_m"], dtype=float),
    )


def _grid_to_dict(g: OfdmGrid) -> dict:
    return {
        "n_subcarriers": g.n_subcarriers,
        "subcarrier_spacing_hz": g.subcarrier_spacing_hz,
        "carrier_frequency_hz": g.carrier_frequency_hz,
        "pilot_stride": g.pilot_stride,
    }


def _grid_from_dict(d: dict) -> OfdmGrid:
    return OfdmGrid(
        n_subcarriers=int(d["n_subcarriers"]),
        subcarrier_spacing_hz=float(d["subcarrier_spacing_hz"]),
        carrier_frequency_hz=float(d["carrier_frequency_hz"]),
        pilot_stride=int(d["pilot_stride"]),
    )


def _paths_to_dict(p: PathSet) -> dict:
    return {
        "gains_re": [float(x) for x in p.gains.real],
        "gains_im": [float(x) for x in p.gains.imag],
        "delays_s": [float(x) for x in p.delays],
        "nu_row_cpm": [float(x) for x in p.spatial_freq_row],
        "nu_col_cpm": [float(x) for x in p.spatial_freq_col],
    }


def _paths_from_dict(d: dict) -> PathSet:
    gains = np.asarray(d["gains_re"], dtype=float) + 1j * np.asarray(d["gains_im"], dtype=float)
    return PathSet(gains, np.asarray(d["delays_s"], dtype=float),
                   np.asarray(d["nu_row_cpm"], dtype=float), np.asarray(d["nu_col_cpm"], dtype=float))


def write_dataset(path, dataset: ChannelDataset) -> None:
    """Write the container; byte-reproducible for identical inputs."""
    shape = list(dataset.tensors.shape[1:])
    header = {
        "format_version": FORMAT_VERSION,
        "count": len(dataset),
        "shape": shape,
        "geometry": _geometry_to_dict(dataset.geometry),
        "ofdm": _grid_to_dict(dataset.grid),
        "generation": dataset.generation,
        "seed": dataset.seed,
        "realizations": [_paths_to_dict(p) for p in dataset.paths],
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    flat = np.ascontiguousarray(dataset.tensors.astype(np.complex64))
    raw = flat.view(np.float32)
    if raw.dtype.byteorder not in ("<", "="):  # force little-endian on odd platforms
        raw = raw.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(raw.astype("<f4", copy=False).tobytes())


def read_dataset(path) -> ChannelDataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"not a channel dataset file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format_version {header.get('format_version')}")
        count = int(header["count"])
        shape = tuple(int(s) for s in header["shape"])
        n_vals = count * int(np.prod(shape))
        raw = np.frombuffer(fh.read(n_vals * 8), dtype="<f4")
        if raw.size != 2 * n_vals:
            raise ValueError("dataset payload truncated")
    tensors = raw.astype(np.float32).view(np.complex64).reshape((count,) + shape)
    return ChannelDataset(
        geometry=_geometry_from_dict(header["geometry"]),
        grid=_grid_from_dict(header["ofdm"]),
        tensors=tensors,
        paths=[_paths_from_dict(d) for d in header["realizations"]],
        generation=header.get("generation", {}),
        seed=int(header.get("seed", 0)),
    )
