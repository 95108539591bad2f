"""Per-image detection series and their mapping onto physical part instances.

A manual detection file is YAML (or JSON) shaped like::

    source: office chair
    images:
      - index: 1
        detections:
          - {name: Seat, confidence: 0.98, bbox: [40, 60, 120, 140]}
          - {name: Screw}

``confidence`` and ``bbox`` are accepted and ignored.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .catalog import Catalog
from .core import PartInstance

_DETECTION_KEYS = {"name", "confidence", "bbox"}


class ManualError(ValueError):
    pass


class UnknownPartError(ManualError):
    def __init__(self, name: str, image: int) -> None:
        self.name = name
        self.image = image
        super().__init__(f"image {image}: unknown part {name!r}")


@dataclass(frozen=True)
class DetectionImage:
    index: int
    detected_names: tuple[str, ...]


@dataclass(frozen=True)
class DetectionSeries:
    images: tuple[DetectionImage, ...]
    source_label: str = ""

    def counts(self) -> list[int]:
        return [len(img.detected_names) for img in self.images]


def parse_manual(document: str) -> DetectionSeries:
    try:
        raw = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ManualError(f"malformed document: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("images"), list):
        raise ManualError("malformed document: expected a mapping with an 'images' list")
    images: list[DetectionImage] = []
    last = 0
    for pos, entry in enumerate(raw["images"]):
        if not isinstance(entry, dict) or "index" not in entry:
            raise ManualError(f"images[{pos}]: expected a mapping with an 'index'")
        index = entry["index"]
        if not isinstance(index, int) or isinstance(index, bool) or index < 1:
            raise ManualError(f"images[{pos}]: index must be a positive integer, got {index!r}")
        if index <= last:
            raise ManualError(f"images[{pos}]: index {index} does not increase")
        last = index
        names = []
        for k, det in enumerate(entry.get("detections") or []):
            if isinstance(det, str):
                det = {"name": det}
            if not isinstance(det, dict) or not isinstance(det.get("name"), str):
                raise ManualError(f"images[{pos}].detections[{k}]: missing part name")
            unknown = set(det) - _DETECTION_KEYS
            if unknown:
                raise ManualError(f"images[{pos}].detections[{k}]: unknown keys {sorted(unknown)}")
            names.append(det["name"])
        images.append(DetectionImage(index, tuple(names)))
    if not images:
        raise ManualError("empty series")
    return DetectionSeries(tuple(images), str(raw.get("source", "")))


def load_manual_file(path: str | Path) -> DetectionSeries:
    path = Path(path)
    try:
        return parse_manual(path.read_text(encoding="utf-8"))
    except ManualError as exc:
        raise ManualError(f"{path}: {exc}") from exc


def dump_manual(series: DetectionSeries) -> str:
    doc = {
        "source": series.source_label,
        "images": [
            {"index": img.index, "detections": [{"name": n} for n in img.detected_names]}
            for img in series.images
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


@dataclass
class AssemblyRegistry:
    """Which physical parts exist and which sub-assembly holds each of them.

    ``assembled`` maps every incorporated instance to the main part of the
    sub-assembly that currently contains it; a sub-assembly is identified by
    its main part instance. ``roots`` records, for every sub-assembly still
    standing on its own, the last image that touched it.
    """

    assembled: dict[PartInstance, PartInstance] = field(default_factory=dict)
    roots: dict[PartInstance, int] = field(default_factory=dict)
    pending: list[PartInstance] = field(default_factory=list)
    minted: Counter[str] = field(default_factory=Counter)

    def mint(self, type_name: str) -> PartInstance:
        self.minted[type_name] += 1
        return PartInstance(type_name, self.minted[type_name])

    def root_of(self, inst: PartInstance) -> PartInstance | None:
        return self.assembled.get(inst)

    def members(self, root: PartInstance) -> list[PartInstance]:
        return sorted(p for p, r in self.assembled.items() if r == root)

    def parent_of_type(self, type_name: str) -> PartInstance | None:
        """Most recently touched sub-assembly containing a part of this type."""
        holders = {r for p, r in self.assembled.items() if p.type_name == type_name}
        if not holders:
            return None
        return max(holders, key=lambda r: (self.roots.get(r, 0), r))

    def most_recent_root(self) -> PartInstance | None:
        if not self.roots:
            return None
        return max(self.roots, key=lambda r: (self.roots[r], r))

    def attach(self, inst: PartInstance, root: PartInstance) -> None:
        self.assembled[inst] = root
        if inst in self.pending:
            self.pending.remove(inst)

    def absorb(self, loser: PartInstance, winner: PartInstance) -> None:
        for p, r in list(self.assembled.items()):
            if r == loser:
                self.assembled[p] = winner
        self.roots.pop(loser, None)


@dataclass(frozen=True)
class ResolvedImage:
    index: int
    instances: tuple[PartInstance, ...]
    matched: frozenset[PartInstance]

    @property
    def new(self) -> tuple[PartInstance, ...]:
        return tuple(p for p in self.instances if p not in self.matched)


def resolve_image(image: DetectionImage, catalog: Catalog, registry: AssemblyRegistry) -> ResolvedImage:
    """Match each detection to a physical instance.

    A structural detection first claims an already-assembled instance of its
    type (lowest ordinal first). Fasteners are never matched to assembled
    instances: a fastener drawn again means a new fastening. Any remaining
    detection claims a previously seen but unassembled instance, or mints a
    new ordinal.
    """
    for name in image.detected_names:
        if name not in catalog:
            raise UnknownPartError(name, image.index)
    claimed: set[PartInstance] = set()
    instances: list[PartInstance] = []
    matched: set[PartInstance] = set()
    for name in image.detected_names:
        inst = None
        if not catalog[name].is_fastener:
            inst = next(
                (p for p in sorted(registry.assembled) if p.type_name == name and p not in claimed),
                None,
            )
            if inst is not None:
                matched.add(inst)
        if inst is None:
            inst = next(
                (p for p in registry.pending if p.type_name == name and p not in claimed), None
            )
        if inst is None:
            inst = registry.mint(name)
            registry.pending.append(inst)
        claimed.add(inst)
        instances.append(inst)
    return ResolvedImage(image.index, tuple(instances), frozenset(matched))


def resolve_instances(
    series: DetectionSeries, catalog: Catalog, registry: AssemblyRegistry | None = None
) -> list[ResolvedImage]:
    """Resolve every image against ``registry`` without assembling anything in between."""
    registry = AssemblyRegistry() if registry is None else registry
    return [resolve_image(img, catalog, registry) for img in series.images]


def mask_series(series: DetectionSeries, rate: float, rng: random.Random) -> DetectionSeries:
    """Drop each detection independently with probability ``rate``."""
    images = tuple(
        DetectionImage(img.index, tuple(n for n in img.detected_names if rng.random() >= rate))
        for img in series.images
    )
    return DetectionSeries(images, f"{series.source_label} (masked {rate:g})")
