"""Vienna code parsing and grouping into the characteristic label spaces.

The trademark registries annotate logos with hierarchical ``XX.YY.ZZ``
codes (29 top-level categories, then divisions and sections).  For
machine-learning purposes we collapse that hierarchy into a handful of
flat label spaces, one per visual characteristic:

  * figurative main category  -- categories 1-25, 1st level (25 labels)
  * figurative sub-category   -- categories 1-25, 2nd level (123 labels)
  * color                     -- the 13 retained sections of 29.01
  * shape                     -- the 7 groups built from category 26
  * text                      -- binary presence flag (categories 27/28)
  * sector                    -- the 45 goods/services classes

The grouping table ships as a versioned data file
(``data/vienna_labels.tsv``) so label corrections never touch code.
Everything in this module is immutable after construction and safe for
unrestricted concurrent reads.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping

LABEL_TABLE_RESOURCE = "vienna_labels.tsv"

#: Color-count sections of 29.01 (e.g. ".12" = two predominant colors).
#: They carry no color information and are dropped during grouping.
_COLOR_COUNT_SECTIONS = frozenset(range(11, 16))


class CharacteristicKind(Enum):
    """One label space / feature-block family per logo characteristic.

    ``GENERIC`` names the unlabeled whole-appearance block (the
    auto-encoder-style descriptor); it owns no codes and no labels.
    The enum order is the canonical block-concatenation order and the
    values are the on-disk ids of the embedding store format.
    """

    FIGURATIVE_MAIN = 0
    FIGURATIVE_SUB = 1
    COLOR = 2
    SHAPE = 3
    TEXT = 4
    SECTOR = 5
    GENERIC = 6

    @property
    def token(self) -> str:
        """Lowercase wire/CLI token, e.g. ``figurative_main``."""
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "CharacteristicKind":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown characteristic kind: {token!r}") from None


#: Canonical ordering used when feature blocks are concatenated.
KIND_ORDER: tuple[CharacteristicKind, ...] = tuple(CharacteristicKind)

#: Spaces that actually carry labels (GENERIC excluded).
LABELED_KINDS: tuple[CharacteristicKind, ...] = tuple(
    k for k in CharacteristicKind if k is not CharacteristicKind.GENERIC
)


class CodeParseError(ValueError):
    """Raised for syntactically or semantically invalid Vienna codes."""


@dataclass(frozen=True, order=True)
class ViennaCode:
    """A structured ``category[.division[.section]]`` code."""

    category: int
    division: int | None = None
    section: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.category <= 29:
            raise CodeParseError(
                f"category {self.category} out of range [1, 29]"
            )
        if self.division is not None and self.division < 1:
            raise CodeParseError(f"division {self.division} must be >= 1")
        if self.section is not None:
            if self.division is None:
                raise CodeParseError("section present without division")
            if self.section < 1:
                raise CodeParseError(f"section {self.section} must be >= 1")

    @property
    def levels(self) -> int:
        return 1 + (self.division is not None) + (self.section is not None)


def parse_code(text: str) -> ViennaCode:
    """Parse a dot-separated code string; leading zeros are allowed.

    ``"5.9.1"`` and ``"05.09.01"`` parse to the same code.
    """
    if not isinstance(text, str):
        raise CodeParseError(f"code must be a string, got {type(text).__name__}")
    parts = text.strip().split(".")
    if not 1 <= len(parts) <= 3:
        raise CodeParseError(f"code {text!r} must have 1-3 dot-separated fields")
    names = ("category", "division", "section")
    values: list[int] = []
    for name, part in zip(names, parts):
        if part == "":
            raise CodeParseError(f"empty {name} field in code {text!r}")
        if not part.isdigit():
            raise CodeParseError(f"non-numeric {name} field {part!r} in code {text!r}")
        values.append(int(part))
    values += [None] * (3 - len(values))  # type: ignore[list-item]
    return ViennaCode(*values)


def format_code(code: ViennaCode) -> str:
    """Canonical zero-padded form, truncated to the levels present."""
    parts = [f"{code.category:02d}"]
    if code.division is not None:
        parts.append(f"{code.division:02d}")
    if code.section is not None:
        parts.append(f"{code.section:02d}")
    return ".".join(parts)


@dataclass(frozen=True)
class Label:
    label_id: int
    name: str
    source_codes: frozenset[ViennaCode]


@dataclass(frozen=True)
class LabelSpace:
    kind: CharacteristicKind
    labels: tuple[Label, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def label(self, label_id: int) -> Label:
        return self.labels[label_id]

    def names(self) -> list[str]:
        return [lb.name for lb in self.labels]


@dataclass(frozen=True)
class GroupingOutcome:
    """Result of grouping one code: label assignments, or a drop reason.

    A figurative code with a division maps to two assignments (main
    category plus sub-category); every other mapped code yields one.
    """

    assignments: tuple[tuple[CharacteristicKind, int], ...] = ()
    reason: str | None = None

    @property
    def mapped(self) -> bool:
        return self.reason is None

    @staticmethod
    def dropped(reason: str) -> "GroupingOutcome":
        return GroupingOutcome(assignments=(), reason=reason)


class LabelSpaces:
    """The six label spaces plus the lookup tables used for grouping.

    Immutable after construction.  ``inscriptions_as_text`` controls
    whether category 28 (inscriptions in various characters) counts as
    text presence; it is textual by definition, so the default is on.
    """

    def __init__(
        self,
        spaces: Mapping[CharacteristicKind, LabelSpace],
        inscriptions_as_text: bool = True,
    ):
        self._spaces = dict(spaces)
        self.inscriptions_as_text = inscriptions_as_text
        self._main_by_category: dict[int, int] = {}
        self._sub_by_cat_div: dict[tuple[int, int], int] = {}
        self._color_by_section: dict[int, int] = {}
        self._shape_by_division: dict[int, int] = {}
        for lb in self._spaces[CharacteristicKind.FIGURATIVE_MAIN].labels:
            for code in lb.source_codes:
                self._main_by_category[code.category] = lb.label_id
        for lb in self._spaces[CharacteristicKind.FIGURATIVE_SUB].labels:
            for code in lb.source_codes:
                self._sub_by_cat_div[(code.category, code.division)] = lb.label_id
        for lb in self._spaces[CharacteristicKind.COLOR].labels:
            for code in lb.source_codes:
                self._color_by_section[code.section] = lb.label_id
        for lb in self._spaces[CharacteristicKind.SHAPE].labels:
            for code in lb.source_codes:
                self._shape_by_division[code.division] = lb.label_id

    def space(self, kind: CharacteristicKind) -> LabelSpace:
        return self._spaces[kind]

    @property
    def kinds(self) -> tuple[CharacteristicKind, ...]:
        return tuple(self._spaces)

    def label_counts(self) -> dict[CharacteristicKind, int]:
        return {k: len(s) for k, s in self._spaces.items()}

    def sector_label_for_nice(self, nice_class: int) -> int:
        """Map a goods/services class number (1-45) to its label id."""
        if not 1 <= nice_class <= 45:
            raise ValueError(f"sector class {nice_class} out of range [1, 45]")
        return nice_class - 1

    # -- grouping ---------------------------------------------------------

    def group(self, code: ViennaCode) -> GroupingOutcome:
        return group_code(code, self)

    def annotate(self, codes: Iterable[ViennaCode]) -> dict[CharacteristicKind, set[int]]:
        """Aggregate the mapped assignments of several codes per kind.

        Dropped codes are silently ignored; the text space gets the
        explicit absent label when no code signals text presence.
        """
        out: dict[CharacteristicKind, set[int]] = {}
        for code in codes:
            outcome = self.group(code)
            for kind, label_id in outcome.assignments:
                out.setdefault(kind, set()).add(label_id)
        out.setdefault(CharacteristicKind.TEXT, {TEXT_ABSENT})
        return out


TEXT_ABSENT = 0
TEXT_PRESENT = 1


def group_code(code: ViennaCode, spaces: LabelSpaces) -> GroupingOutcome:
    """Map one valid code to its label assignments.

    Total over categories 1-29: every code yields exactly one outcome.
    Unknown sections under a known division fall back to the division's
    label (the hierarchy is coarsened, never over-trusted); unknown
    divisions are dropped with a reason.
    """
    cat = code.category
    if 1 <= cat <= 25:
        assignments = [(CharacteristicKind.FIGURATIVE_MAIN, spaces._main_by_category[cat])]
        if code.division is not None:
            sub = spaces._sub_by_cat_div.get((cat, code.division))
            if sub is None:
                return GroupingOutcome.dropped(
                    f"unknown division {format_code(code)} under category {cat}"
                )
            assignments.append((CharacteristicKind.FIGURATIVE_SUB, sub))
        return GroupingOutcome(assignments=tuple(assignments))
    if cat == 26:
        if code.division is None:
            return GroupingOutcome.dropped("shape code without division")
        shape = spaces._shape_by_division.get(code.division)
        if shape is None:
            return GroupingOutcome.dropped(
                f"unknown shape division {format_code(code)}"
            )
        return GroupingOutcome(assignments=((CharacteristicKind.SHAPE, shape),))
    if cat == 27:
        return GroupingOutcome(assignments=((CharacteristicKind.TEXT, TEXT_PRESENT),))
    if cat == 28:
        if spaces.inscriptions_as_text:
            return GroupingOutcome(assignments=((CharacteristicKind.TEXT, TEXT_PRESENT),))
        return GroupingOutcome.dropped("inscriptions not treated as text")
    # category 29: colors
    if code.division != 1 or code.section is None:
        return GroupingOutcome.dropped("color code without a 29.01 section")
    color = spaces._color_by_section.get(code.section)
    if color is not None:
        return GroupingOutcome(assignments=((CharacteristicKind.COLOR, color),))
    if code.section in _COLOR_COUNT_SECTIONS:
        return GroupingOutcome.dropped("color-count code")
    return GroupingOutcome.dropped(f"unretained color section {format_code(code)}")


def _read_label_table(text: str) -> dict[CharacteristicKind, LabelSpace]:
    rows: dict[CharacteristicKind, list[Label]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (3, 4):  # source-code field may be absent
            raise ValueError(f"label table line {lineno}: expected 3-4 tab-separated fields")
        kind = CharacteristicKind.from_token(fields[0])
        label_id = int(fields[1])
        name = fields[2]
        code_field = fields[3] if len(fields) == 4 else ""
        codes = frozenset(
            parse_code(tok) for tok in code_field.split(",") if tok.strip()
        )
        rows.setdefault(kind, []).append(Label(label_id, name, codes))
    spaces: dict[CharacteristicKind, LabelSpace] = {}
    for kind, labels in rows.items():
        labels.sort(key=lambda lb: lb.label_id)
        ids = [lb.label_id for lb in labels]
        if ids != list(range(len(labels))):
            raise ValueError(f"{kind.token}: label ids must be dense and 0-based")
        seen: set[ViennaCode] = set()
        for lb in labels:
            overlap = seen & lb.source_codes
            if overlap:
                raise ValueError(
                    f"{kind.token}: source code {format_code(next(iter(overlap)))} "
                    "assigned to more than one label"
                )
            seen |= lb.source_codes
        spaces[kind] = LabelSpace(kind=kind, labels=tuple(labels))
    return spaces


def build_label_spaces(
    inscriptions_as_text: bool = True,
    table_text: str | None = None,
) -> LabelSpaces:
    """Compile the label spaces from the embedded grouping table."""
    if table_text is None:
        table_text = (
            resources.files("logofuse.data").joinpath(LABEL_TABLE_RESOURCE).read_text("utf-8")
        )
    return LabelSpaces(_read_label_table(table_text), inscriptions_as_text)


def random_valid_code(rng: random.Random) -> ViennaCode:
    """Draw a syntactically valid code; used by grouping fuzz tests."""
    cat = rng.randint(1, 29)
    division = rng.randint(1, 30) if rng.random() < 0.8 else None
    section = None
    if division is not None and rng.random() < 0.5:
        section = rng.randint(1, 99)
    return ViennaCode(cat, division, section)


def explain(code_text: str, spaces: LabelSpaces) -> str:
    """Human-readable grouping summary for the ``taxonomy explain`` CLI."""
    code = parse_code(code_text)
    outcome = group_code(code, spaces)
    lines = [f"code {format_code(code)}"]
    if not outcome.mapped:
        lines.append(f"  dropped: {outcome.reason}")
        return "\n".join(lines)
    for kind, label_id in outcome.assignments:
        label = spaces.space(kind).label(label_id)
        lines.append(f"  {kind.token}: [{label_id}] {label.name}")
    return "\n".join(lines)
