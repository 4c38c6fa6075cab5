from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from ptrlift.errors import SourceParseError, SourceReadError
from ptrlift.source_index import (
    CrateIndex,
    collect_context,
    count_local_raw_pointers,
    enumerate_raw_pointers,
    functions_in_source,
    index_crate,
    ineligibility_reason,
    is_eligible,
    parse_function_text,
    unsupported_declarations,
)

TWO_FUNCTIONS = b"""use std::fmt;

fn alpha(x: i32) -> i32 {
    x + 1
}

/// doc comment
pub unsafe extern "C" fn beta(p: *mut i32) {
    *p = 0;
}
"""


def _fn(text, name=None):
    fns = functions_in_source(text.encode() if isinstance(text, str) else text, "src/lib.rs")
    return fns[0] if name is None else next(f for f in fns if f.name == name)


def test_two_functions_spans_match_reparsed_slices():
    fns = functions_in_source(TWO_FUNCTIONS, "src/lib.rs")
    assert [(f.name, f.start_line, f.end_line) for f in fns] == [("alpha", 3, 5), ("beta", 8, 10)]
    lines = TWO_FUNCTIONS.decode().split("\n")
    for f in fns:
        piece = "\n".join(lines[f.start_line - 1:f.end_line])
        assert piece == f.source_text
        again = parse_function_text(piece)
        assert again.name == f.name and again.signature_text == f.signature_text


def test_signature_includes_qualifiers():
    beta = _fn(TWO_FUNCTIONS, "beta")
    assert beta.signature_text == 'pub unsafe extern "C" fn beta(p: *mut i32)'


def test_empty_file_has_no_functions():
    assert functions_in_source(b"", "src/empty.rs") == []


def test_syntax_error_reports_line():
    with pytest.raises(SourceParseError) as err:
        functions_in_source(b"fn ok() {}\n\nfn broken( {\n", "src/bad.rs")
    assert err.value.line >= 3


def test_unreadable_file(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "lib.rs").mkdir()  # a directory where a file is expected
    with pytest.raises(SourceReadError):
        index_crate(tmp_path)


def test_round_trip_on_every_fixture_function():
    for lib in sorted(FIXTURES.glob("*/src/*.rs")):
        data = lib.read_bytes()
        lines = data.decode().split("\n")
        for f in functions_in_source(data, "src/lib.rs"):
            rebuilt = lines[: f.start_line - 1] + f.source_text.split("\n") + lines[f.end_line:]
            assert "\n".join(rebuilt).encode() == data, (lib, f.name)


def test_impl_methods_and_test_modules():
    fns = index_crate(FIXTURES / "two_pointers")
    assert [f.qualname for f in fns] == ["first", "Acc::add"]
    # functions inside `mod tests` are not candidates
    assert [f.name for f in index_crate(FIXTURES / "single_owner")] == ["pair_sum"]


def test_duplicate_names_get_ordinals():
    src = b"impl A { fn f(&self) {} }\nimpl A { fn f(&self, x: u8) {} }\n"
    fns = functions_in_source(src, "src/lib.rs")
    assert [f.key for f in fns] == [("src/lib.rs", "A::f", 0), ("src/lib.rs", "A::f", 1)]


def test_local_mut_pointer_to_int():
    fn = _fn("fn f() {\n    let mut p: *mut libc::c_int = 0 as *mut libc::c_int;\n}\n")
    (site,) = enumerate_raw_pointers(fn)
    assert (site.name, site.decl_line, site.pointer_depth) == ("p", 2, 1)
    assert site.pointee_type == "libc::c_int" and site.mutability == "mut"
    assert not site.is_void_pointee and not site.is_parameter
    assert is_eligible(site)


def test_no_pointer_declarations():
    fn = _fn("fn f(x: &i32) -> i32 {\n    let y: i32 = *x;\n    let z = &y as *const i32;\n    y\n}\n")
    assert enumerate_raw_pointers(fn) == []


def test_double_pointer_parameter():
    fn = _fn("unsafe fn f(argv: *mut *mut i8) {}\n")
    (site,) = enumerate_raw_pointers(fn)
    assert site.pointer_depth == 2 and site.is_parameter
    assert site.pointee_type == "*mut i8"
    assert ineligibility_reason(site) == "pointer to pointer"


def test_void_pointee_and_const():
    fn = _fn("unsafe fn f() {\n    let v: *const core::ffi::c_void = 0 as _;\n}\n")
    (site,) = enumerate_raw_pointers(fn)
    assert site.is_void_pointee and site.mutability == "const"
    assert ineligibility_reason(site) == "void pointee"


def test_nested_blocks_and_shadowing():
    text = (
        "unsafe fn f() {\n"
        "    let a: *mut u8 = 0 as _;\n"
        "    if true {\n"
        "        let a: *mut u8 = 0 as _;\n"
        "    }\n"
        "}\n"
    )
    sites = enumerate_raw_pointers(_fn(text))
    assert [(s.decl_line, s.occurrence) for s in sites] == [(2, 0), (4, 1)]
    assert len({s.pointer_id for s in sites}) == 2


def test_destructuring_is_reported_not_lifted():
    text = "unsafe fn f() {\n    let (a, b): (*mut u8, u8) = (0 as _, 0);\n}\n"
    fn = _fn(text)
    assert enumerate_raw_pointers(fn) == []
    (decl,) = unsupported_declarations(fn)
    assert decl.line == 2


def test_local_count_ignores_parameters():
    fn = _fn("unsafe fn f(p: *mut u8) {\n    let q: *mut u8 = p;\n    let r: *const u8 = q;\n}\n")
    assert count_local_raw_pointers(fn) == 2


def test_context_for_struct_and_static():
    index = CrateIndex(FIXTURES / "single_owner")
    ctx = collect_context(index.functions[0], index)
    assert len(ctx.struct_definitions) == 1
    assert ctx.struct_definitions[0].startswith("pub struct pair")
    assert ctx.static_declarations == []

    demo = CrateIndex(FIXTURES / "lift_demo")
    table = next(f for f in demo.functions if f.name == "sum_table")
    ctx = collect_context(table, demo)
    assert ctx.static_declarations == ["static TABLE: [libc::c_int; 8] = [1, 2, 3, 4, 5, 6, 7, 8];"]


def test_context_empty_and_deduplicated(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "lib.rs").write_text(
        "struct S { x: i32 }\n"
        "fn none() -> i32 { 1 }\n"
        "fn twice(a: S, b: S) -> i32 { a.x + b.x }\n"
    )
    index = CrateIndex(tmp_path)
    none, twice = index.functions
    ctx = collect_context(none, index)
    assert ctx.struct_definitions == [] and ctx.static_declarations == []
    assert collect_context(twice, index).struct_definitions == ["struct S { x: i32 }"]


def test_reindex_after_edit(tmp_path):
    (tmp_path / "src").mkdir()
    lib = tmp_path / "src" / "lib.rs"
    lib.write_text("fn a() {}\nfn b() {}\n")
    index = CrateIndex(tmp_path)
    lib.write_text("fn a() {\n}\nfn b() {}\n")
    index.reindex_file("src/lib.rs")
    assert index.find_function(("src/lib.rs", "b", 0)).start_line == 3


# -- generated declarations, checked against what was generated ----------

_types = st.sampled_from(["i32", "libc::c_int", "u8", "node", "Vec<u8>", "c_void", "libc::c_void"])


@st.composite
def _declarations(draw):
    decls = []
    for i in range(draw(st.integers(0, 5))):
        depth = draw(st.integers(0, 3))
        ty = draw(_types)
        muts = [draw(st.sampled_from(["mut", "const"])) for _ in range(depth)]
        text = ty
        for m in reversed(muts):
            text = f"*{m} {text}"
        decls.append((f"v{i}", depth, ty, muts[0] if muts else None, text))
    return decls


@settings(max_examples=150, deadline=None)
@given(_declarations())
def test_enumeration_matches_generated_declarations(decls):
    body = "".join(f"    let v{i}: {text} = todo!();\n" for i, (_, _, _, _, text) in enumerate(decls))
    fn = _fn(f"unsafe fn g() {{\n{body}}}\n")
    sites = enumerate_raw_pointers(fn)
    expected = [(name, 2 + i, depth, mut) for i, (name, depth, _, mut, _) in enumerate(decls) if depth > 0]
    assert [(s.name, s.decl_line, s.pointer_depth, s.mutability) for s in sites] == expected
    for s in sites:
        d = next(d for d in decls if d[0] == s.name)
        assert s.is_void_pointee == (d[1] == 1 and d[2].endswith("c_void"))
