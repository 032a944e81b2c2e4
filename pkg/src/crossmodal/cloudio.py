"""File formats: point-cloud text files, dataset manifests, saved models.

Cloud files are plain text: header lines `#modality:`, `#label:` and the
optional `#sensor_origin: x y z`, followed by one `x y z` triple per line
(decimal point, meters, LF endings). Manifests and configs are YAML. All
writes go through a temp-file + rename so readers never see partial files.
"""

from __future__ import annotations

import dataclasses
import os
import pickle
import tempfile
from pathlib import Path

import yaml

import numpy as np

from .cloud import PointCloud
from .errors import CrossModalError


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_cloud(path, cloud: PointCloud) -> None:
    lines = [f"#modality: {cloud.modality}"]
    if cloud.label is not None:
        lines.append(f"#label: {cloud.label}")
    if cloud.sensor_origin is not None:
        ox, oy, oz = cloud.sensor_origin
        lines.append(f"#sensor_origin: {ox:.9f} {oy:.9f} {oz:.9f}")
    for x, y, z in cloud.points:
        lines.append(f"{x:.9f} {y:.9f} {z:.9f}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_cloud(path) -> PointCloud:
    modality = None
    label = None
    origin = None
    rows = []
    with open(path, "r") as handle:
        for raw in handle:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                key = key.strip()
                value = value.strip()
                if key == "modality":
                    modality = value
                elif key == "label":
                    label = value
                elif key == "sensor_origin":
                    origin = np.array([float(v) for v in value.split()])
                continue
            rows.append([float(v) for v in line.split()])
    if modality is None:
        raise CrossModalError(f"{path}: missing '#modality:' header")
    points = np.array(rows, dtype=float) if rows else np.empty((0, 3))
    return PointCloud(points, modality, label, origin)


@dataclasses.dataclass
class ManifestClass:
    class_id: str
    visual: list
    tactile: list


@dataclasses.dataclass
class DatasetManifest:
    """Per-class cloud file lists plus the generation provenance."""

    classes: list
    seed: int
    generation: dict
    root: Path

    def files(self, modality: str) -> list:
        attr = "visual" if modality == "visual" else "tactile"
        out = []
        for cls in self.classes:
            out.extend((self.root / f) for f in getattr(cls, attr))
        return out

    def labeled_files(self, modality: str) -> list:
        attr = "visual" if modality == "visual" else "tactile"
        out = []
        for cls in self.classes:
            out.extend((self.root / f, cls.class_id) for f in getattr(cls, attr))
        return out


def write_manifest(path, manifest: DatasetManifest) -> None:
    doc = {
        "seed": manifest.seed,
        "generation": manifest.generation,
        "classes": [
            {"id": c.class_id, "visual": list(c.visual), "tactile": list(c.tactile)}
            for c in manifest.classes
        ],
    }
    _atomic_write(Path(path), yaml.safe_dump(doc, sort_keys=False))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path, "r") as handle:
        doc = yaml.safe_load(handle)
    classes = [
        ManifestClass(str(c["id"]), list(c.get("visual", [])), list(c.get("tactile", [])))
        for c in doc["classes"]
    ]
    manifest = DatasetManifest(
        classes=classes,
        seed=int(doc.get("seed", 0)),
        generation=dict(doc.get("generation", {})),
        root=path.parent,
    )
    for cls in manifest.classes:
        for rel in list(cls.visual) + list(cls.tactile):
            full = manifest.root / rel
            if not full.exists():
                raise CrossModalError(f"manifest references missing file {full}")
    return manifest


def save_model(path, model) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            pickle.dump(model, handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path):
    with open(path, "rb") as handle:
        return pickle.load(handle)
