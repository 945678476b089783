"""Self-similar groups given by wreath recursions, and their level actions.

A generator is a root permutation of the alphabet ``{0..p-1}`` together with
one section word per letter; it acts on a vertex word by
``(x w)^g = x^root . w^(section at x)``.  Elements are free words in the
generators, evaluated level by level.

Example DSL source::

    p = 2
    gen a = perm (0 1) sections [1, 1]
    gen b = sections [a, c]
    gen c = sections [a, d]
    gen d = sections [1, b]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from branchlab.errors import (
    ArityMismatch,
    BadPermutation,
    LevelTooLarge,
    ParseError,
    UnknownGenerator,
    UnsupportedPrime,
)
from branchlab.kernels import DTYPE


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def default_max_level(p: int) -> int:
    """Deepest level whose vertex count stays within 128."""
    level = 1
    while p ** (level + 1) <= 128:
        level += 1
    return level


@dataclass(frozen=True)
class TreeParams:
    p: int
    max_level: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise UnsupportedPrime(f"alphabet size {self.p} is not prime")
        if self.max_level < 1:
            raise ValueError("max_level must be positive")
        if self.p ** self.max_level > 2 ** 31 - 1:
            raise LevelTooLarge(f"p^{self.max_level} does not fit 32-bit leaf indices")

    def vertex_count(self, level: int) -> int:
        return self.p ** level


@dataclass(frozen=True, order=True)
class Vertex:
    word: tuple[int, ...] = ()

    @property
    def level(self) -> int:
        return len(self.word)

    @classmethod
    def parse(cls, text: str) -> "Vertex":
        text = text.strip()
        if text in ("", "root", "()"):
            return cls(())
        return cls(tuple(int(ch) for ch in text))

    @classmethod
    def from_index(cls, index: int, level: int, p: int) -> "Vertex":
        letters = []
        for _ in range(level):
            index, r = divmod(index, p)
            letters.append(r)
        return cls(tuple(reversed(letters)))

    def index(self, p: int) -> int:
        """Big-endian base-p value of the word."""
        out = 0
        for x in self.word:
            out = out * p + x
        return out

    def parent(self) -> "Vertex":
        return Vertex(self.word[:-1])

    def child(self, x: int) -> "Vertex":
        return Vertex(self.word + (x,))

    def is_prefix_of(self, other: "Vertex") -> bool:
        return other.word[: len(self.word)] == self.word

    def __str__(self):
        return "".join(str(x) for x in self.word)


@dataclass(frozen=True)
class ElementWord:
    """Free word; letters are ``(name, +1 or -1)``."""

    letters: tuple[tuple[str, int], ...] = ()

    def __mul__(self, other: "ElementWord") -> "ElementWord":
        return ElementWord(self.letters + other.letters).reduced()

    def inverse(self) -> "ElementWord":
        return ElementWord(tuple((n, -e) for n, e in reversed(self.letters)))

    def power(self, k: int) -> "ElementWord":
        base = self if k >= 0 else self.inverse()
        return ElementWord(base.letters * abs(k)).reduced()

    def reduced(self) -> "ElementWord":
        out: list[tuple[str, int]] = []
        for letter in self.letters:
            if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
                out.pop()
            else:
                out.append(letter)
        return ElementWord(tuple(out))

    def is_empty(self) -> bool:
        return not self.letters

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        if not self.letters:
            return "1"
        return " ".join(n if e > 0 else f"{n}^-1" for n, e in self.letters)

    @classmethod
    def letter(cls, name: str, sign: int = 1) -> "ElementWord":
        return cls(((name, sign),))


@dataclass(frozen=True)
class GeneratorDef:
    name: str
    root_perm: tuple[int, ...]
    sections: tuple[ElementWord, ...]


@dataclass(frozen=True)
class LevelPermutation:
    level: int
    images: np.ndarray

    def then(self, other: "LevelPermutation") -> "LevelPermutation":
        """Right-action product: first self, then other."""
        return LevelPermutation(self.level, other.images[self.images])

    def truncate(self, p: int, level: int) -> "LevelPermutation":
        block = p ** (self.level - level)
        return LevelPermutation(level, (self.images[::block] // block).astype(DTYPE))

    def is_identity(self) -> bool:
        return bool(np.all(self.images == np.arange(self.images.shape[0])))

    def __eq__(self, other):
        return (
            isinstance(other, LevelPermutation)
            and self.level == other.level
            and np.array_equal(self.images, other.images)
        )

    def __hash__(self):
        return hash((self.level, self.images.tobytes()))


@dataclass(frozen=True, eq=False)
class SelfSimilarGroup:
    params: TreeParams
    generators: tuple[GeneratorDef, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)
    name: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise ParseError("duplicate generator name")
        for key in ("k", "l", "d"):
            v = self.metadata.get(key)
            if v is not None and (not isinstance(v, int) or v <= 0):
                raise ValueError(f"metadata constant {key} must be a positive integer")

    @property
    def p(self) -> int:
        return self.params.p

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.generators]

    def gen(self, name: str) -> GeneratorDef:
        for g in self.generators:
            if g.name == name:
                return g
        raise UnknownGenerator(name)

    def word(self, text: str) -> ElementWord:
        return parse_word(text, self.names)

    # level evaluation -------------------------------------------------------
    def _gen_perm(self, name: str, sign: int, level: int) -> np.ndarray:
        key = (name, sign, level)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        p = self.p
        if level == 0:
            out = np.zeros(1, dtype=DTYPE)
        elif sign < 0:
            fwd = self._gen_perm(name, 1, level)
            out = np.empty_like(fwd)
            out[fwd] = np.arange(fwd.shape[0], dtype=DTYPE)
        else:
            g = self.gen(name)
            block = p ** (level - 1)
            out = np.empty(p ** level, dtype=DTYPE)
            for x in range(p):
                below = self._word_perm(g.sections[x], level - 1)
                out[x * block:(x + 1) * block] = g.root_perm[x] * block + below
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def _word_perm(self, word: ElementWord, level: int) -> np.ndarray:
        result = np.arange(self.p ** level, dtype=DTYPE)
        for name, sign in word.letters:
            result = self._gen_perm(name, sign, level)[result]
        return result


def _check_level(group: SelfSimilarGroup, level: int):
    if level < 0 or level > group.params.max_level:
        raise LevelTooLarge(f"level {level} exceeds max_level {group.params.max_level}")


def eval_level(group: SelfSimilarGroup, word: ElementWord, level: int) -> LevelPermutation:
    _check_level(group, level)
    for name, _ in word.letters:
        group.gen(name)
    return LevelPermutation(level, group._word_perm(word, level))


def section(group: SelfSimilarGroup, word: ElementWord, v: Vertex) -> tuple[Vertex, ElementWord]:
    """Image of v under word, and the word acting below v."""
    image = list(v.word)
    letters: list[tuple[str, int]] = []
    for name, sign in word.letters:
        img, sub = _letter_section(group, name, sign, tuple(image))
        image = list(img)
        letters.extend(sub.letters)
    return Vertex(tuple(image)), ElementWord(tuple(letters)).reduced()


def _letter_section(group, name, sign, v):
    if not v:
        return (), ElementWord.letter(name, sign)
    g = group.gen(name)
    x = v[0]
    if sign > 0:
        y = g.root_perm[x]
        sub = g.sections[x]
    else:
        y = g.root_perm.index(x)
        sub = g.sections[y].inverse()
    rest_img, rest_sec = section(group, sub, Vertex(v[1:]))
    return (y,) + rest_img.word, rest_sec


def embed_at_vertex(group: SelfSimilarGroup, word: ElementWord, v: Vertex, level: int) -> LevelPermutation:
    """Level permutation acting as word below v and trivially elsewhere."""
    _check_level(group, level)
    if v.level >= level:
        raise LevelTooLarge(f"vertex level {v.level} must be below {level}")
    p = group.p
    depth = level - v.level
    inner = eval_level(group, word, depth).images
    out = np.arange(p ** level, dtype=DTYPE)
    start = v.index(p) * p ** depth
    out[start:start + p ** depth] = start + inner
    return LevelPermutation(level, out)


def level_generators(group: SelfSimilarGroup, level: int) -> list[np.ndarray]:
    return [eval_level(group, ElementWord.letter(n), level).images for n in group.names]


def level_quotient(group: SelfSimilarGroup, level: int, seed=None):
    """Image of the group (or a distinguished subgroup) acting on level ``level``.

    ``seed`` is ``None``/``"whole"``, ``"derived"``, or
    ``("normal_closure", [words])``.
    """
    from branchlab.permgroup import PermGroup, derived_subgroup, normal_closure

    _check_level(group, level)
    whole = PermGroup(level_generators(group, level), group.p ** level)
    if seed is None or seed == "whole":
        return whole
    if seed == "derived":
        return derived_subgroup(whole)
    kind, words = seed
    if kind != "normal_closure":
        raise ValueError(f"unknown subgroup seed {kind!r}")
    words = [w if isinstance(w, ElementWord) else group.word(w) for w in words]
    return normal_closure(whole, [eval_level(group, w, level).images for w in words])


def distinguished_subgroup(group: SelfSimilarGroup, level: int):
    """The subgroup named ``K`` in the group metadata, at the given level."""
    kind = group.metadata.get("K")
    if kind == "derived":
        return level_quotient(group, level, "derived")
    if kind == "normal_closure":
        return level_quotient(group, level, ("normal_closure", group.metadata["K_seed"]))
    raise ValueError("group metadata names no distinguished subgroup")


def congruence_image(group: SelfSimilarGroup, level: int, depth: int):
    """Image at ``level`` of the depth-th principal congruence subgroup of K.

    Copies of the level-(level - depth) image of K act independently below
    each vertex of level ``depth``.
    """
    from branchlab.permgroup import PermGroup

    _check_level(group, level)
    if not 0 <= depth <= level:
        raise ValueError("depth must lie between 0 and the level")
    p = group.p
    inner = distinguished_subgroup(group, level - depth) if level > depth else None
    block = p ** (level - depth)
    gens = []
    for v in range(p ** depth):
        for g in (inner.generators if inner is not None else []):
            out = np.arange(p ** level, dtype=DTYPE)
            out[v * block:(v + 1) * block] = v * block + g
            gens.append(out)
    return PermGroup(gens, p ** level)


# builtin groups -------------------------------------------------------------

GRIGORCHUK_SOURCE = """\
p = 2
gen a = perm (0 1) sections [1, 1]
gen b = sections [a, c]
gen c = sections [a, d]
gen d = sections [1, b]
"""


def gupta_sidki_source(p: int) -> str:
    cycle = " ".join(str(i) for i in range(p))
    middle = ", ".join(["1"] * (p - 3))
    sections = "a, a^-1, " + (middle + ", " if middle else "") + "b"
    ones = ", ".join(["1"] * p)
    return f"p = {p}\ngen a = perm ({cycle}) sections [{ones}]\ngen b = sections [{sections}]\n"


def builtin_group(kind: str, p: int | None = None, max_level: int | None = None) -> SelfSimilarGroup:
    kind = kind.replace("-", "_").lower()
    if kind == "grigorchuk":
        p = 2 if p is None else p
        if p != 2:
            raise UnsupportedPrime("the Grigorchuk group is defined for p = 2 only")
        g = parse_group_def(GRIGORCHUK_SOURCE, max_level=max_level)
        meta = {"k": 4, "l": 6, "d": 3, "K": "normal_closure", "K_seed": ["a b a b"], "K_index": 16}
        return SelfSimilarGroup(g.params, g.generators, meta, "grigorchuk")
    if kind == "gupta_sidki":
        p = 3 if p is None else p
        if p < 3 or not is_prime(p):
            raise UnsupportedPrime("Gupta-Sidki groups need an odd prime")
        g = parse_group_def(gupta_sidki_source(p), max_level=max_level)
        meta = {"k": p, "l": p * p - 1, "d": p * (p - 1), "K": "derived", "dK": p - 1}
        return SelfSimilarGroup(g.params, g.generators, meta, f"gupta_sidki_{p}")
    raise ValueError(f"unknown builtin group {kind!r}")


# DSL -----------------------------------------------------------------------

_P_LINE = re.compile(r"^p\s*=\s*(\d+)\s*$")
_GEN_LINE = re.compile(
    r"^gen\s+(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*"
    r"(?:perm\s*(?P<perm>(?:\([^)]*\)\s*)+))?"
    r"sections\s*\[(?P<sections>[^\]]*)\]\s*$"
)
_META_LINE = re.compile(r"^meta\s+(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.+?)\s*$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def parse_word(text: str, names, line=None, column=0) -> ElementWord:
    """Tokenize a word by longest match against the declared names."""
    ordered = sorted(names, key=len, reverse=True)
    letters = []
    i = 0
    s = text
    while i < len(s):
        ch = s[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "1" and not letters and s[i + 1:].strip() == "":
            i += 1
            continue
        for name in ordered:
            if s.startswith(name, i):
                i += len(name)
                sign = 1
                rest = s[i:].lstrip()
                if rest.startswith("^-1"):
                    sign = -1
                    i = len(s) - len(rest) + 3
                letters.append((name, sign))
                break
        else:
            m = _IDENT.match(s, i)
            if m:
                raise UnknownGenerator(f"undeclared generator {m.group(0)!r}" + (f" on line {line}" if line else ""))
            raise ParseError(f"unexpected character {ch!r} in word", line, column + i + 1)
    return ElementWord(tuple(letters))


def _parse_perm(text: str, p: int, line: int) -> tuple[int, ...]:
    images = list(range(p))
    seen = set()
    for cyc in re.findall(r"\(([^)]*)\)", text):
        pts = [t for t in re.split(r"[\s,]+", cyc.strip()) if t]
        try:
            pts = [int(t) for t in pts]
        except ValueError:
            raise ParseError(f"bad cycle ({cyc})", line) from None
        for x in pts:
            if not 0 <= x < p or x in seen:
                raise BadPermutation(f"cycle ({cyc}) on line {line} is not a bijection of 0..{p - 1}")
            seen.add(x)
        for a, b in zip(pts, pts[1:] + pts[:1]):
            images[a] = b
    return tuple(images)


def parse_group_def(text: str, max_level: int | None = None) -> SelfSimilarGroup:
    p = None
    raw = []
    meta = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        m = _P_LINE.match(body)
        if m:
            if p is not None:
                raise ParseError("p declared twice", lineno, 1)
            p = int(m.group(1))
            if not is_prime(p):
                raise UnsupportedPrime(f"p = {p} is not prime")
            continue
        m = _GEN_LINE.match(body)
        if m:
            if p is None:
                raise ParseError("generator before p declaration", lineno, 1)
            raw.append((lineno, m, line.index(body)))
            continue
        m = _META_LINE.match(body)
        if m:
            value = m.group("value")
            meta[m.group("key")] = int(value) if value.isdigit() else value
            continue
        raise ParseError(f"cannot parse {body!r}", lineno, line.index(body) + 1)
    if p is None:
        raise ParseError("missing 'p = <prime>' line")
    names = [m.group("name") for _, m, _ in raw]
    if len(set(names)) != len(names):
        raise ParseError("duplicate generator name")
    gens = []
    for lineno, m, col in raw:
        perm = _parse_perm(m.group("perm") or "", p, lineno)
        parts = [s.strip() for s in m.group("sections").split(",")]
        if parts == [""]:
            parts = []
        if len(parts) != p:
            raise ArityMismatch(f"generator {m.group('name')} has {len(parts)} sections, expected {p} (line {lineno})")
        offset = col + m.start("sections")
        sections = tuple(parse_word(s, names, lineno, offset) for s in parts)
        gens.append(GeneratorDef(m.group("name"), perm, sections))
    if "K_seed" in meta:
        meta["K_seed"] = [w.strip() for w in str(meta["K_seed"]).split(";")]
    params = TreeParams(p, max_level or default_max_level(p))
    return SelfSimilarGroup(params, tuple(gens), meta)


def _format_perm(perm: tuple[int, ...]) -> str:
    seen = set()
    cycles = []
    for x in range(len(perm)):
        if x in seen or perm[x] == x:
            continue
        cyc = [x]
        seen.add(x)
        y = perm[x]
        while y != x:
            cyc.append(y)
            seen.add(y)
            y = perm[y]
        cycles.append("(" + " ".join(map(str, cyc)) + ")")
    return "".join(cycles)


def format_group_def(group: SelfSimilarGroup) -> str:
    lines = [f"p = {group.p}"]
    for g in group.generators:
        perm = _format_perm(g.root_perm)
        head = f"gen {g.name} = " + (f"perm {perm} " if perm else "")
        lines.append(head + "sections [" + ", ".join(str(s) for s in g.sections) + "]")
    for key, value in group.metadata.items():
        if isinstance(value, list):
            value = "; ".join(value)
        lines.append(f"meta {key} = {value}")
    return "\n".join(lines) + "\n"
