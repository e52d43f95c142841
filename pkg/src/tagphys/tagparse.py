"""Garment-tag parsing against controlled fiber and family vocabularies.

Vocabularies are plain tab-separated files (``canonical<TAB>synonym``) under
``tagphys/data`` so they can be extended without touching code.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import (
    MalformedPercentage,
    SumViolation,
    TooManyFibers,
    UnknownFamily,
    UnknownStructure,
    UnrecognizedFiber,
)

SUM_TOLERANCE = 0.5
MAX_FIBERS = 6
STRUCTURES = ("knit", "woven", "lining", "others")

_STRUCTURE_VARIANTS = {
    "knit": "knit",
    "knitted": "knit",
    "knits": "knit",
    "woven": "woven",
    "weave": "woven",
    "lining": "lining",
    "others": "others",
    "other": "others",
    "non-woven": "others",
    "nonwoven": "others",
}

# stripped from free-form family descriptors before the table lookup
_FAMILY_SUFFIXES = ("-like weave", " like weave", "-like", "-style", " style", " fabric", " weave")

_PRIMARY_HEADERS = {"main", "shell", "body", "fabric", "outer", "self", "composition", "material"}


def _key(text: str) -> str:
    text = text.replace("™", "").replace("®", "")
    return " ".join(text.split()).casefold()


def _read_table(path) -> list[tuple[str, str | None]]:
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        rows.append((parts[0], parts[1] if len(parts) > 1 and parts[1] else None))
    return rows


@dataclass(frozen=True)
class Vocabulary:
    """Fiber and family vocabularies plus the family/structure compatibility table."""

    fibers: tuple[str, ...]
    fiber_lookup: dict = field(repr=False, compare=False)
    families: tuple[str, ...]
    family_lookup: dict = field(repr=False, compare=False)
    structure_rules: dict = field(repr=False, compare=False)
    structures: tuple[str, ...] = STRUCTURES

    @classmethod
    def from_files(cls, fibers_path, families_path, rules_path) -> "Vocabulary":
        fibers, fiber_lookup = [], {}
        for canonical, synonym in _read_table(fibers_path):
            if canonical not in fibers:
                fibers.append(canonical)
            fiber_lookup[_key(canonical)] = canonical
            if synonym:
                fiber_lookup[_key(synonym)] = canonical
        families, family_lookup = [], {}
        for canonical, variant in _read_table(families_path):
            canonical = _key(canonical)
            if canonical not in families:
                families.append(canonical)
            family_lookup[canonical] = canonical
            if variant:
                family_lookup[_key(variant)] = canonical
        rules: dict[str, set] = {}
        for fam, struct in _read_table(rules_path):
            rules.setdefault(_key(fam), set()).add(_key(struct or ""))
        return cls(
            fibers=tuple(fibers),
            fiber_lookup=fiber_lookup,
            families=tuple(families),
            family_lookup=family_lookup,
            structure_rules={k: frozenset(v) for k, v in rules.items()},
        )

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for block in (self.fibers, self.families, self.structures):
            h.update("\x1f".join(block).encode("utf-8"))
            h.update(b"\x1e")
        return h.hexdigest()[:16]


@lru_cache(maxsize=1)
def default_vocabulary() -> Vocabulary:
    data = resources.files("tagphys") / "data"
    return Vocabulary.from_files(
        data / "fibers.tsv", data / "families.tsv", data / "structure_rules.tsv"
    )


@dataclass(frozen=True)
class FiberComposition:
    """Fiber/percentage pairs, sorted by descending percentage then name."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        names = [f for f, _ in self.entries]
        if len(set(names)) != len(names):
            raise MalformedPercentage(f"duplicate fibers in {names}")
        if not 1 <= len(self.entries) <= MAX_FIBERS:
            raise TooManyFibers(f"composition must list 1..{MAX_FIBERS} fibers, got {len(self.entries)}")
        for name, pct in self.entries:
            if not 0 < pct <= 100:
                raise MalformedPercentage(f"{name}: percentage {pct} outside (0, 100]")
        total = sum(p for _, p in self.entries)
        if abs(total - 100.0) > SUM_TOLERANCE:
            raise SumViolation(total)
        ordered = tuple(sorted(self.entries, key=lambda e: (-e[1], e[0])))
        object.__setattr__(self, "entries", ordered)

    @classmethod
    def from_pairs(cls, pairs) -> "FiberComposition":
        return cls(tuple((str(f), float(p)) for f, p in pairs))

    @property
    def fibers(self) -> frozenset:
        return frozenset(f for f, _ in self.entries)

    @property
    def primary(self) -> str:
        return self.entries[0][0]

    def as_dict(self) -> dict:
        return dict(self.entries)

    def render(self) -> str:
        return render_composition(self)


@dataclass(frozen=True)
class FabricAttributes:
    composition: FiberComposition
    family: str
    structure: str
    density: float | None = None
    thickness: float | None = None
    layer_headers: tuple[str, ...] = ()

    def with_scalars(self, density, thickness) -> "FabricAttributes":
        return FabricAttributes(
            self.composition, self.family, self.structure, density, thickness, self.layer_headers
        )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def canonicalize_fiber(raw: str, vocab: Vocabulary | None = None) -> str:
    """Map a fiber name or synonym to its canonical vocabulary entry.

    >>> canonicalize_fiber("Spandex")
    'Elastane'
    """
    vocab = vocab or default_vocabulary()
    key = _key(raw)
    if not key:
        raise UnrecognizedFiber(raw)
    try:
        return vocab.fiber_lookup[key]
    except KeyError:
        raise UnrecognizedFiber(raw.strip()) from None


def normalize_family(raw: str, vocab: Vocabulary | None = None, on_unknown: str = "raise") -> str:
    """Canonical fabric family for a free-form descriptor.

    ``on_unknown="map"`` returns ``"unknown"`` instead of raising.
    """
    vocab = vocab or default_vocabulary()
    key = _key(raw)
    candidates = [key]
    for suffix in _FAMILY_SUFFIXES:
        if key.endswith(suffix):
            candidates.append(key[: -len(suffix)].strip())
    for cand in candidates:
        if cand in vocab.family_lookup:
            return vocab.family_lookup[cand]
    if on_unknown == "map":
        return "unknown"
    raise UnknownFamily(raw)


def normalize_structure(raw: str) -> str:
    key = _key(raw)
    try:
        return _STRUCTURE_VARIANTS[key]
    except KeyError:
        raise UnknownStructure(raw) from None


_PCT = re.compile(r"([-+]?\d+(?:\.\d+)?)\s*%")
_SEPARATORS = " \t,;/&+"


def parse_composition(text: str, vocab: Vocabulary | None = None) -> FiberComposition:
    """Parse ``"95% Polyester, 5% Elastane"`` style composition strings."""
    vocab = vocab or default_vocabulary()
    if not text or not text.strip():
        raise MalformedPercentage("empty composition")
    parts = _PCT.split(text)
    if len(parts) < 3:
        raise MalformedPercentage(f"no '<number>%' token in {text!r}")
    if parts[0].strip(_SEPARATORS):
        raise MalformedPercentage(f"unexpected text before first percentage: {parts[0].strip()!r}")
    totals: dict[str, float] = {}
    for num, name in zip(parts[1::2], parts[2::2]):
        pct = float(num)
        if not 0 < pct <= 100:
            raise MalformedPercentage(f"percentage {num}% outside (0, 100]")
        name = name.strip(_SEPARATORS)
        if not name:
            raise MalformedPercentage(f"percentage {num}% has no fiber name")
        if any(ch.isdigit() for ch in name):
            raise MalformedPercentage(f"malformed token {name!r}")
        fiber = canonicalize_fiber(name, vocab)
        totals[fiber] = totals.get(fiber, 0.0) + pct
    if len(totals) > MAX_FIBERS:
        raise TooManyFibers(f"{len(totals)} fibers listed, at most {MAX_FIBERS} allowed")
    total = sum(totals.values())
    if abs(total - 100.0) > SUM_TOLERANCE:
        raise SumViolation(total)
    return FiberComposition(tuple(totals.items()))


def _fmt_pct(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def render_composition(comp: FiberComposition) -> str:
    return ", ".join(f"{_fmt_pct(p)}% {f}" for f, p in comp.entries)


_HEADER = re.compile(r"(?:^|[;\n|])\s*([A-Za-z][A-Za-z ]{0,30}?)\s*:")


def split_layers(text: str) -> list[tuple[str, str]]:
    """Split ``"Main: ...; Lining: ..."`` into (header, body) pairs.

    Text without headers comes back as a single pair with an empty header.
    """
    matches = list(_HEADER.finditer(text))
    if not matches:
        return [("", text.strip())]
    out = []
    for m, nxt in zip(matches, matches[1:] + [None]):
        body = text[m.end(): nxt.start() if nxt else len(text)]
        out.append((m.group(1).strip().title(), body.strip(" ;|\n")))
    return out


def parse_tag(
    composition_text: str,
    family: str,
    structure: str,
    density: float | None = None,
    thickness: float | None = None,
    vocab: Vocabulary | None = None,
    on_unknown_family: str = "raise",
) -> FabricAttributes:
    """Build FabricAttributes from raw tag fields.

    When the composition carries several layer headers, the primary layer
    (Main, Shell, ... or else the first) is parsed and all headers are kept
    so that :func:`validate_attributes` can flag the entry.
    """
    vocab = vocab or default_vocabulary()
    layers = split_layers(composition_text)
    headers = tuple(h for h, _ in layers if h)
    body = layers[0][1]
    for h, b in layers:
        if h.casefold() in _PRIMARY_HEADERS:
            body = b
            break
    return FabricAttributes(
        composition=parse_composition(body, vocab),
        family=normalize_family(family, vocab, on_unknown=on_unknown_family),
        structure=normalize_structure(structure),
        density=None if density is None else float(density),
        thickness=None if thickness is None else float(thickness),
        layer_headers=headers,
    )


def validate_attributes(attrs: FabricAttributes, vocab: Vocabulary | None = None) -> ValidationReport:
    vocab = vocab or default_vocabulary()
    report = ValidationReport()
    v = report.violations
    for fiber in attrs.composition.fibers:
        if fiber not in vocab.fibers:
            v.append(f"fiber {fiber!r} not in vocabulary")
    if attrs.family not in vocab.families:
        v.append(f"family {attrs.family!r} not in vocabulary")
    if attrs.structure not in vocab.structures:
        v.append(f"structure {attrs.structure!r} not in vocabulary")
    allowed = vocab.structure_rules.get(attrs.family)
    if allowed is not None and attrs.structure not in allowed:
        v.append(
            f"family/structure contradiction: {attrs.family} is {'/'.join(sorted(allowed))}-only,"
            f" got {attrs.structure}"
        )
    if len(attrs.layer_headers) > 1:
        v.append("multi-layer composition: " + "+".join(attrs.layer_headers))
    if attrs.density is not None and not 0 < attrs.density < 2000:
        v.append("density > 0 and < 2000 g/m2")
    if attrs.thickness is not None and not 0 < attrs.thickness < 20:
        v.append("thickness > 0 and < 20 mm")
    return report
