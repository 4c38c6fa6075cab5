"""Pointer lifting: the three-question decision tree, its prompt, and parsing
of the model's chosen leaf."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import ClassificationParseError, IncompleteTraceError
from .source_index import RawPointerSite
from .templates import DEFAULT, Templates, fill

CANNOT_REWRITE_TOKEN = "CANNOT_REWRITE"
ORIG_TY = "ORIG_TY"


class LeafKind(str, Enum):
    OWNED_SINGLETON = "OwnedSingleton"
    OWNED_ARRAY = "OwnedArray"
    BORROWED_MUT_SINGLETON = "BorrowedMutSingleton"
    BORROWED_SINGLETON = "BorrowedSingleton"
    BORROWED_MUT_SLICE = "BorrowedMutSlice"
    BORROWED_SLICE = "BorrowedSlice"
    CANNOT_REWRITE = "CannotRewrite"


RENDERINGS = {
    LeafKind.OWNED_SINGLETON: "Option<Box<{}>>",
    LeafKind.OWNED_ARRAY: "Option<Vec<{}>>",
    LeafKind.BORROWED_MUT_SINGLETON: "Option<&mut {}>",
    LeafKind.BORROWED_SINGLETON: "Option<&{}>",
    LeafKind.BORROWED_MUT_SLICE: "&mut [{}]",
    LeafKind.BORROWED_SLICE: "&[{}]",
}

LEAVES = tuple(RENDERINGS)


def render(kind: LeafKind, pointee_type: str) -> str:
    if kind is LeafKind.CANNOT_REWRITE:
        return ""
    return RENDERINGS[kind].format(pointee_type)


@dataclass(frozen=True)
class LiftDecision:
    kind: LeafKind
    target_type_text: str = ""

    @classmethod
    def for_site(cls, kind: LeafKind, site: RawPointerSite) -> "LiftDecision":
        return cls(kind, render(kind, site.pointee_type))


class Ownership(Enum):
    OWNING = "owning"
    NON_OWNING = "non-owning"


class Shape(Enum):
    SINGLETON = "singleton"
    ARRAY = "array"


class Access(Enum):
    READ_ONLY = "read-only"
    WRITTEN = "written"


@dataclass(frozen=True)
class TreePredicateTrace:
    ownership: Ownership | None = None
    shape: Shape | None = None
    access: Access | None = None


def leaf_from_trace(trace: TreePredicateTrace) -> LeafKind:
    missing = [n for n in ("ownership", "shape", "access") if getattr(trace, n) is None]
    if missing:
        raise IncompleteTraceError(f"trace lacks {', '.join(missing)}")
    if trace.ownership is Ownership.OWNING:
        # access is not consulted on the owning branch
        return LeafKind.OWNED_SINGLETON if trace.shape is Shape.SINGLETON else LeafKind.OWNED_ARRAY
    written = trace.access is Access.WRITTEN
    if trace.shape is Shape.SINGLETON:
        return LeafKind.BORROWED_MUT_SINGLETON if written else LeafKind.BORROWED_SINGLETON
    return LeafKind.BORROWED_MUT_SLICE if written else LeafKind.BORROWED_SLICE


def build_lifting_prompt(site: RawPointerSite, templates: Templates = DEFAULT) -> str:
    return fill(
        templates.get("lifting"),
        FUNCTION_CONTEXT=site.function.source_text,
        POINTER_DECLARATION=site.decl_text,
    )


_WS = re.compile(r"\s+")


def _squash(text: str) -> str:
    return _WS.sub("", text)


def parse_decision(response: str, site: RawPointerSite) -> LiftDecision:
    """Return the outcome whose rendering occurs first in ``response``.

    Whitespace is ignored on both sides, so ``Option< & mut T >`` matches.
    Candidates are the six renderings with the site's pointee type or the
    literal ``ORIG_TY`` substituted, plus ``CANNOT_REWRITE``.
    """
    text = _squash(response)
    candidates: list[tuple[str, LeafKind]] = [(CANNOT_REWRITE_TOKEN, LeafKind.CANNOT_REWRITE)]
    for kind in LEAVES:
        for ty in {site.pointee_type, ORIG_TY}:
            candidates.append((_squash(render(kind, ty)), kind))

    best: tuple[int, int, LeafKind] | None = None
    for needle, kind in candidates:
        pos = text.find(needle)
        if pos < 0:
            continue
        rank = (pos, -len(needle), kind)
        if best is None or rank[:2] < best[:2]:
            best = rank
    if best is None:
        snippet = response.strip().splitlines()[0][:80] if response.strip() else ""
        raise ClassificationParseError(f"no lifting outcome recognised in response: {snippet!r}")
    return LiftDecision.for_site(best[2], site)
