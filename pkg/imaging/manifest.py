import logging
import math
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from errors import ConfigError, DataError
from imaging.netpbm import read_pgm, read_ppm
from imaging.synth import CDPair

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
SPLITS = ("train", "val", "test")
SEED_PREFIX = "# seed="


class ManifestRecord(BaseModel):
    image: str
    mask: str
    split: str

    @property
    def is_cd_pair(self) -> bool:
        return self.image.endswith("_t1.ppm")

    @property
    def image_t2(self) -> str:
        if not self.is_cd_pair:
            raise DataError(f"{self.image} is not the first epoch of a change pair")
        return self.image[: -len("_t1.ppm")] + "_t2.ppm"


class DatasetManifest(BaseModel):
    root: Path
    records: list[ManifestRecord]
    seed: int | None = None

    def split(self, name: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == name]


def _mask_for(image: Path) -> Path:
    stem = image.stem
    if stem.endswith("_t1"):
        return image.with_name(stem[: -len("_t1")] + "_change.pgm")
    return image.with_suffix(".pgm")


def _enumerate_pairs(root: Path) -> list[tuple[str, str]]:
    pairs = []
    for image in sorted(root.glob("*.ppm")):
        if image.stem.endswith("_t2"):
            continue
        mask = _mask_for(image)
        if not mask.is_file():
            raise DataError(f"missing mask {mask.name} for {image.name}")
        if image.stem.endswith("_t1") and not image.with_name(image.stem[:-3] + "_t2.ppm").is_file():
            raise DataError(f"missing second epoch for {image.name}")
        pairs.append((image.name, mask.name))
    return pairs


def build_manifest(root: str | Path, fractions: tuple[float, float, float] = (0.8, 0.2, 0.0), seed: int = 0) -> DatasetManifest:
    """Shuffle every image/mask pair under `root` with `seed` and split by `fractions`."""
    root = Path(root)
    if any(f < 0 for f in fractions) or sum(fractions) > 1 + 1e-9:
        raise ConfigError(f"split fractions must be non-negative and sum to at most 1, got {fractions}")
    pairs = _enumerate_pairs(root)
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_train = int(round(fractions[0] * len(pairs)))
    n_val = min(len(pairs) - n_train, int(round(fractions[1] * len(pairs))))
    records = []
    for rank, idx in enumerate(order):
        split = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
        image, mask = pairs[idx]
        records.append(ManifestRecord(image=image, mask=mask, split=split))
    logger.info("manifest: %d train / %d val / %d test", n_train, n_val, len(pairs) - n_train - n_val)
    return DatasetManifest(root=root, records=records, seed=seed)


def write_manifest(manifest: DatasetManifest, path: str | Path | None = None) -> Path:
    path = Path(path) if path else manifest.root / MANIFEST_NAME
    lines = [f"{SEED_PREFIX}{manifest.seed}\n"] if manifest.seed is not None else []
    lines += [f"{r.image}\t{r.mask}\t{r.split}\n" for r in manifest.records]
    path.write_text("".join(lines), encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    records = []
    seed = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith(SEED_PREFIX):
                try:
                    seed = int(line[len(SEED_PREFIX) :])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad seed line {line!r}") from None
            continue
        fields = line.split("\t")
        if len(fields) != 3 or fields[2] not in SPLITS:
            raise DataError(f"{path}:{lineno}: expected image<TAB>mask<TAB>split")
        record = ManifestRecord(image=fields[0], mask=fields[1], split=fields[2])
        for name in (record.image, record.mask):
            if not (path.parent / name).is_file():
                raise DataError(f"{path}:{lineno}: referenced file {name} does not exist")
        records.append(record)
    return DatasetManifest(root=path.parent, records=records, seed=seed)


def subsample(records: list[ManifestRecord], frac: float, seed: int) -> list[ManifestRecord]:
    """Seeded prefix of a fixed permutation, so smaller fractions nest in larger ones."""
    if not 0 < frac <= 1:
        raise ConfigError(f"fraction must lie in (0, 1], got {frac}")
    if not records:
        return []
    order = np.random.default_rng(seed).permutation(len(records))
    count = max(1, math.floor(frac * len(records) + 1e-9))
    return [records[i] for i in sorted(order[:count])]


def load_scenes(manifest: DatasetManifest, split: str) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(read_ppm(manifest.root / r.image), read_pgm(manifest.root / r.mask)) for r in manifest.split(split)]


def load_cd_pairs(manifest: DatasetManifest, records: list[ManifestRecord]) -> list[CDPair]:
    pairs = []
    for r in records:
        pairs.append(
            CDPair(
                image_t1=read_ppm(manifest.root / r.image),
                image_t2=read_ppm(manifest.root / r.image_t2),
                change_mask=read_pgm(manifest.root / r.mask),
            )
        )
    return pairs
