"""Surface-syntax index of a Rust crate: functions, raw-pointer declarations,
and the struct/static definitions a rewrite prompt needs.

Indexing works on the text as written; nothing is macro-expanded and no types
are inferred. Line numbers are 1-based everywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import tree_sitter_rust
from tree_sitter import Language, Node, Parser

from .errors import SourceParseError, SourceReadError

RUST = Language(tree_sitter_rust.language())

_VOID_NAMES = {"c_void"}
_BUILD_DIRS = {"target", ".git"}


def _parser() -> Parser:
    return Parser(RUST)


def parse_tree(source: bytes):
    return _parser().parse(source)


def first_error_line(node: Node) -> int | None:
    """1-based line of the first ERROR or MISSING node, or None for a clean tree."""
    if not node.has_error:
        return None
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_error or n.is_missing:
            return n.start_point[0] + 1
        stack.extend(reversed(n.children))
    return node.start_point[0] + 1


@dataclass(frozen=True)
class FunctionRecord:
    file_path: str
    name: str
    start_line: int
    end_line: int
    source_text: str
    signature_text: str
    impl_type: str | None = None
    ordinal: int = 0

    @property
    def qualname(self) -> str:
        return f"{self.impl_type}::{self.name}" if self.impl_type else self.name

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.file_path, self.qualname, self.ordinal)

    @property
    def line_count(self) -> int:
        return self.end_line - self.start_line + 1


@dataclass(frozen=True)
class RawPointerSite:
    function: FunctionRecord
    name: str
    decl_line: int
    decl_text: str
    pointee_type: str
    mutability: str  # "const" or "mut"
    pointer_depth: int
    is_void_pointee: bool
    is_parameter: bool
    # position among same-named sites of the function (shadowing)
    occurrence: int = 0

    @property
    def pointer_type_text(self) -> str:
        return f"*{self.mutability} {self.pointee_type}"

    @property
    def pointer_id(self) -> str:
        """Stable, filename-safe identity that survives line shifts."""
        fn = self.function
        path = fn.file_path.replace("/", "_")
        qual = fn.qualname.replace("::", ".")
        suffix = f".{fn.ordinal}" if fn.ordinal else ""
        return f"{path}__{qual}{suffix}__{self.name}__{self.occurrence}"


@dataclass(frozen=True)
class UnsupportedDeclaration:
    function: FunctionRecord
    line: int
    text: str
    reason: str = "unsupported declaration form"


@dataclass
class PromptContext:
    struct_definitions: list[str] = field(default_factory=list)
    static_declarations: list[str] = field(default_factory=list)


def is_eligible(site: RawPointerSite) -> bool:
    return not (site.is_void_pointee or site.pointer_depth > 1 or site.is_parameter)


def ineligibility_reason(site: RawPointerSite) -> str | None:
    if site.is_void_pointee:
        return "void pointee"
    if site.pointer_depth > 1:
        return "pointer to pointer"
    if site.is_parameter:
        return "function parameter"
    return None


def _node_text(src: bytes, node: Node) -> str:
    return src[node.start_byte:node.end_byte].decode("utf-8")


def _line_span_text(lines: list[bytes], start_line: int, end_line: int) -> str:
    text = b"".join(lines[start_line - 1:end_line]).decode("utf-8")
    if text.endswith("\r\n"):
        return text[:-2]
    if text.endswith("\n"):
        return text[:-1]
    return text


def _function_nodes(root: Node) -> Iterator[tuple[Node, str | None]]:
    for child in root.named_children:
        if child.type == "function_item":
            yield child, None
        elif child.type == "impl_item":
            impl_type = child.child_by_field_name("type")
            body = child.child_by_field_name("body")
            if body is None:
                continue
            type_name = impl_type.text.decode("utf-8") if impl_type is not None else None
            for item in body.named_children:
                if item.type == "function_item":
                    yield item, type_name


def _signature_text(src: bytes, node: Node) -> str:
    body = node.child_by_field_name("body")
    end = body.start_byte if body is not None else node.end_byte
    return src[node.start_byte:end].decode("utf-8").rstrip()


def functions_in_source(source: bytes, file_path: str) -> list[FunctionRecord]:
    tree = parse_tree(source)
    bad = first_error_line(tree.root_node)
    if bad is not None:
        raise SourceParseError(file_path, bad)
    lines = source.splitlines(keepends=True)
    records = []
    seen: dict[str, int] = {}
    for node, impl_type in _function_nodes(tree.root_node):
        name = _node_text(source, node.child_by_field_name("name"))
        start = node.start_point[0] + 1
        end = node.end_point[0] + 1
        qual = f"{impl_type}::{name}" if impl_type else name
        ordinal = seen.get(qual, 0)
        seen[qual] = ordinal + 1
        records.append(
            FunctionRecord(
                file_path=file_path,
                name=name,
                start_line=start,
                end_line=end,
                source_text=_line_span_text(lines, start, end),
                signature_text=_signature_text(source, node),
                impl_type=impl_type,
                ordinal=ordinal,
            )
        )
    return records


def parse_function_text(text: str, file_path: str = "<candidate>", start_line: int = 1) -> FunctionRecord:
    """Parse ``text`` as exactly one function definition (other items allowed
    around it). Raises SourceParseError otherwise."""
    source = text.encode("utf-8")
    tree = parse_tree(source)
    bad = first_error_line(tree.root_node)
    if bad is not None:
        raise SourceParseError(file_path, bad + start_line - 1)
    fns = [n for n in tree.root_node.named_children if n.type == "function_item"]
    if len(fns) != 1:
        raise SourceParseError(file_path, start_line, f"expected one function definition, found {len(fns)}")
    node = fns[0]
    return FunctionRecord(
        file_path=file_path,
        name=_node_text(source, node.child_by_field_name("name")),
        start_line=start_line + node.start_point[0],
        end_line=start_line + node.end_point[0],
        source_text=text,
        signature_text=_signature_text(source, node),
    )


def source_files(crate_root: Path) -> list[Path]:
    crate_root = Path(crate_root)
    base = crate_root / "src" if (crate_root / "src").is_dir() else crate_root
    files = []
    for path in base.rglob("*.rs"):
        rel = path.relative_to(crate_root)
        if rel.parts and rel.parts[0] in _BUILD_DIRS:
            continue
        files.append(path)
    return sorted(files, key=lambda p: p.relative_to(crate_root).as_posix())


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise SourceReadError(path, exc.strerror or str(exc)) from exc


def index_crate(crate_root) -> list[FunctionRecord]:
    crate_root = Path(crate_root)
    records = []
    for path in source_files(crate_root):
        rel = path.relative_to(crate_root).as_posix()
        records.extend(functions_in_source(_read(path), rel))
    return records


# -- raw pointers ----------------------------------------------------------

def _pointer_chain(type_node: Node) -> tuple[int, Node, str]:
    """(depth, immediate pointee node, mutability of the outer pointer)."""
    mutability = "mut" if any(c.type == "mutable_specifier" for c in type_node.children) else "const"
    pointee = type_node.child_by_field_name("type")
    depth = 1
    inner = pointee
    while inner is not None and inner.type == "pointer_type":
        depth += 1
        inner = inner.child_by_field_name("type")
    return depth, pointee, mutability


def _is_void(type_text: str) -> bool:
    last = re.split(r"::", type_text.strip())[-1].strip()
    return last in _VOID_NAMES


def _contains_pointer_type(node: Node) -> bool:
    if node.type == "pointer_type":
        return True
    return any(_contains_pointer_type(c) for c in node.named_children)


def _walk(node: Node) -> Iterator[Node]:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.named_children))


def _function_node(fn: FunctionRecord):
    source = fn.source_text.encode("utf-8")
    tree = parse_tree(source)
    for n in tree.root_node.named_children:
        if n.type == "function_item":
            return source, n
    raise SourceParseError(fn.file_path, fn.start_line, "no function definition in record text")


def _scan_declarations(fn: FunctionRecord):
    source, node = _function_node(fn)
    offset = fn.start_line - 1
    sites: list[dict] = []
    unsupported: list[UnsupportedDeclaration] = []

    params = node.child_by_field_name("parameters")
    if params is not None:
        for p in params.named_children:
            if p.type != "parameter":
                continue
            ptype = p.child_by_field_name("type")
            pattern = p.child_by_field_name("pattern")
            if ptype is None or ptype.type != "pointer_type" or pattern is None:
                continue
            if pattern.type != "identifier":
                unsupported.append(UnsupportedDeclaration(fn, p.start_point[0] + 1 + offset, _node_text(source, p)))
                continue
            sites.append(dict(node=p, name=_node_text(source, pattern), type_node=ptype, is_parameter=True))

    body = node.child_by_field_name("body")
    if body is not None:
        for n in _walk(body):
            if n.type != "let_declaration":
                continue
            ltype = n.child_by_field_name("type")
            pattern = n.child_by_field_name("pattern")
            if ltype is None or pattern is None:
                continue
            if ltype.type == "pointer_type" and pattern.type == "identifier":
                sites.append(dict(node=n, name=_node_text(source, pattern), type_node=ltype, is_parameter=False))
            elif pattern.type != "identifier" and _contains_pointer_type(ltype):
                unsupported.append(UnsupportedDeclaration(fn, n.start_point[0] + 1 + offset, _node_text(source, n)))

    sites.sort(key=lambda s: (s["node"].start_byte))
    result = []
    counts: dict[str, int] = {}
    for s in sites:
        depth, pointee, mutability = _pointer_chain(s["type_node"])
        pointee_text = _node_text(source, pointee) if pointee is not None else ""
        occ = counts.get(s["name"], 0)
        counts[s["name"]] = occ + 1
        result.append(
            RawPointerSite(
                function=fn,
                name=s["name"],
                decl_line=s["node"].start_point[0] + 1 + offset,
                decl_text=_node_text(source, s["node"]),
                pointee_type=pointee_text,
                mutability=mutability,
                pointer_depth=depth,
                is_void_pointee=depth == 1 and _is_void(pointee_text),
                is_parameter=s["is_parameter"],
                occurrence=occ,
            )
        )
    return result, unsupported


def enumerate_raw_pointers(fn: FunctionRecord) -> list[RawPointerSite]:
    sites, _ = _scan_declarations(fn)
    return sorted(sites, key=lambda s: (s.decl_line, s.occurrence))


def unsupported_declarations(fn: FunctionRecord) -> list[UnsupportedDeclaration]:
    """Pointer-typed bindings in destructuring patterns; never lifted."""
    return _scan_declarations(fn)[1]


def count_local_raw_pointers(fn: FunctionRecord) -> int:
    return sum(1 for s in enumerate_raw_pointers(fn) if not s.is_parameter)


def referenced_identifiers(text: str) -> set[str]:
    source = text.encode("utf-8")
    tree = parse_tree(source)
    return {
        _node_text(source, n)
        for n in _walk(tree.root_node)
        if n.type in ("identifier", "type_identifier")
    }


# -- crate-level index -----------------------------------------------------

@dataclass(frozen=True)
class ItemDefinition:
    file_path: str
    name: str
    line: int
    text: str


class CrateIndex:
    """Functions plus struct/union and static definitions of a crate.

    Read-only once built, except for :meth:`reindex_file`, which the owner of
    a workspace calls after patching that file.
    """

    def __init__(self, crate_root):
        self.root = Path(crate_root)
        self._functions: dict[str, list[FunctionRecord]] = {}
        self._structs: dict[str, list[ItemDefinition]] = {}
        self._statics: dict[str, list[ItemDefinition]] = {}
        for path in source_files(self.root):
            self._index_file(path.relative_to(self.root).as_posix())

    def _index_file(self, rel: str) -> None:
        source = _read(self.root / rel)
        self._functions[rel] = functions_in_source(source, rel)
        tree = parse_tree(source)
        structs, statics = [], []
        for n in tree.root_node.named_children:
            if n.type in ("struct_item", "union_item", "static_item"):
                name_node = n.child_by_field_name("name")
                if name_node is None:
                    continue
                item = ItemDefinition(rel, _node_text(source, name_node), n.start_point[0] + 1, _node_text(source, n))
                (statics if n.type == "static_item" else structs).append(item)
        self._structs[rel] = structs
        self._statics[rel] = statics

    def reindex_file(self, rel: str) -> list[FunctionRecord]:
        self._index_file(rel)
        return self._functions[rel]

    @property
    def files(self) -> list[str]:
        return sorted(self._functions)

    @property
    def functions(self) -> list[FunctionRecord]:
        return [f for rel in self.files for f in self._functions[rel]]

    def functions_in(self, rel: str) -> list[FunctionRecord]:
        return list(self._functions.get(rel, []))

    def find_function(self, key: tuple[str, str, int]) -> FunctionRecord | None:
        rel, qualname, ordinal = key
        for f in self._functions.get(rel, []):
            if f.qualname == qualname and f.ordinal == ordinal:
                return f
        return None

    @property
    def structs(self) -> list[ItemDefinition]:
        return [s for rel in self.files for s in self._structs[rel]]

    @property
    def statics(self) -> list[ItemDefinition]:
        return [s for rel in self.files for s in self._statics[rel]]


def collect_context(fn: FunctionRecord, crate_index: CrateIndex) -> PromptContext:
    names = referenced_identifiers(fn.source_text)

    def pick(items: list[ItemDefinition]) -> list[str]:
        out: list[str] = []
        for item in items:
            if item.name in names and item.text not in out:
                out.append(item.text)
        return out

    return PromptContext(pick(crate_index.structs), pick(crate_index.statics))
