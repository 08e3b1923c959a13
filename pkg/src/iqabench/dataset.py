"""Manifest-driven dataset construction: references -> noisy -> filtered variants.

The manifest (JSON, schema_version 1) records everything needed to
reproduce or consume the dataset: generator name, noise spec, seed
mixing, threshold grid, per-entry seeds, subset labels, and file paths
relative to the manifest's directory.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from . import images
from .denoise import DenoiseParams, bm3d_sweep_detailed
from .images import NoiseSpec

__all__ = [
    "DatasetManifest",
    "ReferenceEntry",
    "SUBSET_LABELS",
    "ValidationReport",
    "build_dataset",
    "derive_seed",
    "load_labels",
    "load_manifest",
    "validate_manifest",
]

SUBSET_LABELS = ("noise_like", "low_contrast", "regular", "unlabeled")
SCHEMA_VERSION = 1
SEED_MIXING = "xor-blake2b64(id)"
_IMAGE_EXTENSIONS = (".png", ".pgm")


@dataclass
class ReferenceEntry:
    id: str
    ref_path: str
    subset: str
    noisy_path: str
    seed: int
    distorted: list = field(default_factory=list)  # [{"lambda": float, "path": str}]


@dataclass
class DatasetManifest:
    schema_version: int
    prng_name: str
    seed_mixing: str
    noise: NoiseSpec
    lambdas: list
    entries: list = field(default_factory=list)
    path: str | None = None  # where the manifest was loaded from / written to

    def entry(self, ref_id: str) -> ReferenceEntry:
        for e in self.entries:
            if e.id == ref_id:
                return e
        raise KeyError(f"no entry with id {ref_id!r}")

    def resolve(self, rel: str) -> str:
        base = os.path.dirname(self.path) if self.path else "."
        return os.path.normpath(os.path.join(base, rel))

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "prng_name": self.prng_name,
            "seed_mixing": self.seed_mixing,
            "noise": {
                "variance": self.noise.variance,
                "seed": self.noise.seed,
                "clip": self.noise.clip,
            },
            "lambdas": list(self.lambdas),
            "entries": [
                {
                    "id": e.id,
                    "ref_path": e.ref_path,
                    "subset": e.subset,
                    "noisy_path": e.noisy_path,
                    "seed": e.seed,
                    "distorted": e.distorted,
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def derive_seed(base_seed: int, ident: str) -> int:
    """Per-image seed: base seed XOR 64-bit blake2b of the image id."""
    digest = hashlib.blake2b(ident.encode("utf-8"), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "big")) & (2**64 - 1)


def lambda_dirname(lam: float) -> str:
    return f"lambda-{float(lam)!r}"


def load_labels(path: str) -> dict:
    """Read an "id,label" sidecar file into a dict. Blank lines are skipped."""
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "," not in line:
                raise ValueError(f"{path}:{lineno}: expected 'id,label', got {line!r}")
            ident, label = (part.strip() for part in line.split(",", 1))
            if label not in SUBSET_LABELS:
                raise ValueError(
                    f"{path}:{lineno}: label {label!r} not in {SUBSET_LABELS}"
                )
            labels[ident] = label
    return labels


def _find_references(ref_dir: str) -> list[tuple[str, str]]:
    if not os.path.isdir(ref_dir):
        raise FileNotFoundError(f"reference directory not found: {ref_dir}")
    found = []
    for name in sorted(os.listdir(ref_dir)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in _IMAGE_EXTENSIONS:
            found.append((stem, os.path.join(ref_dir, name)))
    if not found:
        raise FileNotFoundError(f"no .png/.pgm references in {ref_dir}")
    ids = [stem for stem, _ in found]
    if len(set(ids)) != len(ids):
        dupe = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate reference id {dupe!r} in {ref_dir}")
    return found


def build_dataset(
    ref_dir: str,
    out_dir: str,
    noise: NoiseSpec,
    lambdas,
    labels_path: str | None = None,
    force: bool = False,
) -> DatasetManifest:
    """Degrade and filter every reference; write images and manifest.json.

    Per-reference seeds are derived from the base seed and the image id,
    so entries are independent of build order. Noisy images are clipped,
    saved as 8-bit files, and the saved pixels are what the filter sees.
    Rebuilding with identical inputs reproduces every byte.
    """
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise ValueError("lambdas must be nonempty")
    if sorted(set(lambdas)) != lambdas:
        raise ValueError(f"lambdas must be strictly increasing, got {lambdas}")
    if not noise.variance > 0:
        raise ValueError("dataset build needs noise variance > 0")

    refs = _find_references(ref_dir)
    labels = load_labels(labels_path) if labels_path else {}
    unknown = sorted(set(labels) - {stem for stem, _ in refs})
    if unknown:
        raise ValueError(f"label file names unknown reference id {unknown[0]!r}")

    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path) and not force:
        raise FileExistsError(f"{manifest_path} exists; pass force=True to overwrite")

    os.makedirs(os.path.join(out_dir, "noisy"), exist_ok=True)
    for lam in lambdas:
        os.makedirs(os.path.join(out_dir, lambda_dirname(lam)), exist_ok=True)

    sigma = math.sqrt(noise.variance)
    entries = []
    for ident, ref_path in refs:
        ref_img = images.load_image(ref_path)
        seed = derive_seed(noise.seed, ident)
        noisy = images.add_awgn(ref_img, NoiseSpec(noise.variance, seed, noise.clip))
        noisy_rel = os.path.join("noisy", f"{ident}.png")
        images.save_image(noisy, os.path.join(out_dir, noisy_rel))
        stored = images.load_image(os.path.join(out_dir, noisy_rel))

        params = DenoiseParams(sigma=sigma, lam=lambdas[0])
        distorted = []
        for result in bm3d_sweep_detailed(stored, params, lambdas):
            rel = os.path.join(lambda_dirname(result.lam), f"{ident}.png")
            images.save_image(result.image, os.path.join(out_dir, rel))
            distorted.append({"lambda": result.lam, "path": rel})

        entries.append(
            ReferenceEntry(
                id=ident,
                ref_path=os.path.relpath(ref_path, out_dir),
                subset=labels.get(ident, "unlabeled"),
                noisy_path=noisy_rel,
                seed=seed,
                distorted=distorted,
            )
        )

    entries.sort(key=lambda e: e.id)
    manifest = DatasetManifest(
        schema_version=SCHEMA_VERSION,
        prng_name=images.PRNG_NAME,
        seed_mixing=SEED_MIXING,
        noise=noise,
        lambdas=lambdas,
        entries=entries,
        path=manifest_path,
    )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    return manifest


def load_manifest(path: str) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    noise = doc["noise"]
    return DatasetManifest(
        schema_version=doc["schema_version"],
        prng_name=doc["prng_name"],
        seed_mixing=doc.get("seed_mixing", SEED_MIXING),
        noise=NoiseSpec(noise["variance"], noise["seed"], noise["clip"]),
        lambdas=[float(l) for l in doc["lambdas"]],
        entries=[
            ReferenceEntry(
                id=e["id"],
                ref_path=e["ref_path"],
                subset=e["subset"],
                noisy_path=e["noisy_path"],
                seed=e["seed"],
                distorted=list(e["distorted"]),
            )
            for e in doc["entries"]
        ],
        path=os.path.abspath(path),
    )


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_manifest(manifest_path: str) -> ValidationReport:
    """Check file existence, dimension and lambda consistency, and labels."""
    manifest = load_manifest(manifest_path)
    report = ValidationReport()
    add = report.violations.append

    if manifest.schema_version != SCHEMA_VERSION:
        add(f"unsupported schema_version {manifest.schema_version}")
    if sorted(set(manifest.lambdas)) != manifest.lambdas:
        add(f"lambdas not strictly increasing: {manifest.lambdas}")
    ids = [e.id for e in manifest.entries]
    if len(set(ids)) != len(ids):
        add("duplicate entry ids")

    for entry in manifest.entries:
        if entry.subset not in SUBSET_LABELS:
            add(f"{entry.id}: subset {entry.subset!r} not in {SUBSET_LABELS}")
        entry_lambdas = [d["lambda"] for d in entry.distorted]
        if entry_lambdas != manifest.lambdas:
            add(f"{entry.id}: distorted lambdas {entry_lambdas} != manifest {manifest.lambdas}")
        shape = None
        for kind, rel in (
            ("ref", entry.ref_path),
            ("noisy", entry.noisy_path),
            *(("distorted", d["path"]) for d in entry.distorted),
        ):
            path = manifest.resolve(rel)
            if not os.path.isfile(path):
                add(f"{entry.id}: missing {kind} file {path}")
                continue
            try:
                img = images.load_image(path)
            except images.ImageFormatError as exc:
                add(f"{entry.id}: unreadable {kind} file: {exc}")
                continue
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                add(f"{entry.id}: {kind} file {path} has shape {img.shape}, expected {shape}")
    return report
