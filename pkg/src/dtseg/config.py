"""Run configuration (flat ``key=value`` files) and stage manifests."""

import hashlib
import json
import os
from dataclasses import dataclass, field

from .augment import AugmentParams
from .colorspace import ColorSpace
from .evalstats import ResolutionLadder
from .exceptions import InvalidArgumentError, ManifestError
from .pipeline import DETECTION_MPP, MANUAL, NATIVE_MPP, PATCH_SIZE
from .synth import SynthParams

MANIFEST = "manifest.json"
# Keys that never influence stage outputs and stay out of the config hash.
_UNHASHED = {"jobs", "in_dir", "out_dir", "crops_dir", "detections"}


def parse_config_text(text, origin="<config>"):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{origin}:{lineno}: expected key=value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise InvalidArgumentError(f"{origin}:{lineno}: empty key")
        entries[key.replace("-", "_")] = value
    return entries


def read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read(), path)
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc


def _int(entries, key, default):
    try:
        return int(entries.get(key, default))
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{key} must be an integer, got {entries.get(key)!r}") from None


def _float(entries, key, default):
    try:
        return float(entries.get(key, default))
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{key} must be a number, got {entries.get(key)!r}") from None


@dataclass(frozen=True)
class RunConfig:
    seed: int
    ladder: ResolutionLadder = field(default_factory=ResolutionLadder)
    color_space: ColorSpace = ColorSpace.RGB
    backend: str = "threshold"
    eval_side: str = "auto"  # "auto", "native" or an integer side length
    source: str = MANUAL
    patch_count: int = 4
    patch_size: int = PATCH_SIZE
    det_mpp: float = DETECTION_MPP
    native_mpp: float = NATIVE_MPP
    n_slides: int = 2
    objects_per_slide: int = 4
    slide_side: int = 8192
    synth: SynthParams = field(default_factory=SynthParams)
    augment: AugmentParams = field(default_factory=AugmentParams)
    jobs: int = 1
    in_dir: str | None = None
    out_dir: str | None = None
    crops_dir: str | None = None
    detections: str | None = None

    @classmethod
    def from_entries(cls, entries):
        if "seed" not in entries or str(entries["seed"]).strip() == "":
            raise InvalidArgumentError("a seed is required (--seed or seed= in the config)")
        seed = _int(entries, "seed", 0)
        if seed < 0 or seed >= 2**64:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed}")
        eval_side = str(entries.get("eval_side", "auto")).strip().lower()
        if eval_side not in ("auto", "native"):
            if _int(entries, "eval_side", 0) < 1:
                raise InvalidArgumentError(f"eval_side must be auto, native or >= 1, got {eval_side}")
        source = str(entries.get("source", MANUAL)).strip().lower()
        if source not in ("manual", "automatic"):
            raise InvalidArgumentError(f"source must be manual or automatic, got {source!r}")
        side_lo = _int(entries, "synth.side_min", 1000)
        side_hi = _int(entries, "synth.side_max", 1400)
        synth = SynthParams(
            side_range=(side_lo, side_hi),
            harmonics=_int(entries, "synth.harmonics", 6),
            amplitude=_float(entries, "synth.amplitude", 0.12),
            texture=_float(entries, "synth.texture", 0.08),
            noise=_float(entries, "synth.noise", 0.02),
            seed=seed,
        )
        cfg = cls(
            seed=seed,
            ladder=ResolutionLadder.parse(entries.get("ladder", "512,256,128,64,32,28")),
            color_space=ColorSpace.parse(entries.get("color", entries.get("color_space", "rgb"))),
            backend=str(entries.get("backend", "threshold")).strip(),
            eval_side=eval_side,
            source=source,
            patch_count=_int(entries, "patch_count", 4),
            patch_size=_int(entries, "patch_size", PATCH_SIZE),
            det_mpp=_float(entries, "det_mpp", DETECTION_MPP),
            native_mpp=_float(entries, "native_mpp", NATIVE_MPP),
            n_slides=_int(entries, "synth.n_slides", 2),
            objects_per_slide=_int(entries, "synth.objects_per_slide", 4),
            slide_side=_int(entries, "synth.slide_side", 8192),
            synth=synth,
            augment=AugmentParams.from_config(entries),
            jobs=_int(entries, "jobs", 1),
            in_dir=entries.get("in_dir"),
            out_dir=entries.get("out_dir"),
            crops_dir=entries.get("crops_dir"),
            detections=entries.get("detections"),
        )
        if cfg.det_mpp < cfg.native_mpp:
            raise InvalidArgumentError("det_mpp must be >= native_mpp")
        if cfg.jobs < 1 or cfg.patch_count < 1 or cfg.patch_size < 1:
            raise InvalidArgumentError("jobs, patch_count and patch_size must be >= 1")
        return cfg

    def eval_side_for(self, source):
        """Evaluation side for a crop source; ``None`` means the native crop size."""
        if self.eval_side == "native":
            return None
        if self.eval_side == "auto":
            return 512 if source == MANUAL else None
        return int(self.eval_side)

    def canonical(self):
        """Ordered ``key -> str`` view used for hashing and manifests."""
        out = {
            "seed": str(self.seed),
            "ladder": str(self.ladder),
            "color": self.color_space.value,
            "backend": self.backend,
            "eval_side": self.eval_side,
            "source": self.source,
            "patch_count": str(self.patch_count),
            "patch_size": str(self.patch_size),
            "det_mpp": repr(self.det_mpp),
            "native_mpp": repr(self.native_mpp),
            "synth.n_slides": str(self.n_slides),
            "synth.objects_per_slide": str(self.objects_per_slide),
            "synth.slide_side": str(self.slide_side),
            "synth.side_min": str(self.synth.side_range[0]),
            "synth.side_max": str(self.synth.side_range[1]),
            "synth.harmonics": str(self.synth.harmonics),
            "synth.amplitude": repr(self.synth.amplitude),
            "synth.texture": repr(self.synth.texture),
            "synth.noise": repr(self.synth.noise),
        }
        out.update(self.augment.to_config())
        return out

    def hash(self):
        text = "\n".join(f"{k}={v}" for k, v in self.canonical().items() if k not in _UNHASHED)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_tree(root, exclude=(MANIFEST,)):
    """``{relative posix path: sha256}`` for every file below ``root``, sorted."""
    out = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            rel = os.path.relpath(full, root).replace(os.sep, "/")
            if rel in exclude:
                continue
            out[rel] = file_sha256(full)
    return dict(sorted(out.items()))


def write_manifest(out_dir, stage, config, inputs, links=None, extra=None):
    manifest = {
        "stage": stage,
        "config_hash": config.hash(),
        "config": config.canonical(),
        "inputs": inputs,
        "outputs": hash_tree(out_dir),
        "links": links or {},
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, MANIFEST), "w", newline="\n", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return manifest


def load_manifest(stage_dir, expected_stage):
    """Read and verify the manifest of a predecessor stage directory."""
    path = os.path.join(stage_dir, MANIFEST)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{stage_dir}: no {MANIFEST}; expected output of '{expected_stage}'")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ManifestError(f"{path}: unreadable manifest ({exc})") from exc
    if manifest.get("stage") != expected_stage:
        raise ManifestError(
            f"{stage_dir} holds stage '{manifest.get('stage')}', expected '{expected_stage}'"
        )
    actual = hash_tree(stage_dir)
    if actual != manifest.get("outputs"):
        changed = sorted(set(actual.items()) ^ set(manifest.get("outputs", {}).items()))
        names = sorted({name for name, _ in changed})[:5]
        raise ManifestError(f"{stage_dir}: files do not match the manifest: {', '.join(names)}")
    return manifest


def manifest_digest(stage_dir):
    return {f"{MANIFEST}": file_sha256(os.path.join(stage_dir, MANIFEST))}
