"""Regenerate the recorded transcripts used by the end-to-end tests.

Each file holds the assistant turns for one pointer's conversation, in the
order the pipeline asks for them. Run from anywhere: python build_replays.py
"""
import json, pathlib
HERE = pathlib.Path(__file__).resolve().parent

def write(subdir, cid, replies):
    out = HERE / subdir
    out.mkdir(exist_ok=True)
    lines = []
    for i, text in enumerate(replies):
        lines.append(json.dumps({"role": "assistant", "text": text, "usage": {"input_tokens": 900 + 100 * i, "output_tokens": 150 + 10 * i}}))
    (out / f"{cid}.jsonl").write_text("\n".join(lines) + "\n")

def block(code):
    return "```rust\n" + code.strip("\n") + "\n```"

counter = '''
pub unsafe extern "C" fn make_counter(start: libc::c_int) -> libc::c_int {
    let mut p: Option<Box<libc::c_int>> = Some(Box::new(0 as libc::c_int));
    **p.as_mut().unwrap() = start;
    **p.as_mut().unwrap() += 1 as libc::c_int;
    let result: libc::c_int = **p.as_ref().unwrap();
    drop(p);
    return result;
}
'''
write("lift_demo_replay", "src_lib.rs__make_counter__p__0", [
    "Option<Box<libc::c_int>>",
    "Here is the rewritten function.\n\n" + block(counter),
])

table = '''
pub unsafe extern "C" fn sum_table(n: libc::c_int) -> libc::c_int {
    let mut q: &[libc::c_int] = &TABLE;
    let mut total: libc::c_int = 0 as libc::c_int;
    let mut i: libc::c_int = 0 as libc::c_int;
    while i < n {
        total += q[INDEX];
        i += 1;
    }
    return total;
}
'''
write("lift_demo_replay", "src_lib.rs__sum_table__q__0", [
    "&[libc::c_int]",
    block(table.replace("INDEX", "i")),
    "The slice must be indexed with a usize.\n\n" + block(table.replace("INDEX", "i as usize")),
])

def fill(cap, index="i as usize"):
    return f'''
pub unsafe extern "C" fn fill_last(len: libc::c_int) -> libc::c_int {{
    let mut buf: Option<Vec<libc::c_int>> = Some(Vec::with_capacity({cap}));
    let mut i: libc::c_int = 0 as libc::c_int;
    while i < len {{
        buf.as_mut().unwrap()[{index}] = i * 2 as libc::c_int;
        i += 1;
    }}
    let last: libc::c_int = buf.as_ref().unwrap()[(len - 1 as libc::c_int) as usize];
    drop(buf);
    return last;
}}
'''
bad_sig = fill("len as usize").replace("fn fill_last(len: libc::c_int)", "fn fill_last(len: usize)")
raw_again = fill("len as usize").replace("    drop(buf);\n", "    let mut tmp: *mut libc::c_int = core::ptr::null_mut();\n    drop(buf);\n")
write("lift_demo_replay", "src_lib.rs__fill_last__buf__0", [
    "Option<Vec<libc::c_int>>",
    block(fill("len as usize")),
    block(fill("len as usize + 1")),
    "The capacity looks too small; it should be increased.",
    block(bad_sig),
    block(raw_again),
    block(fill("(len as usize) * 2")),
])


# single_owner: the rewrite never compiles, so five fixes exhaust the budget
def pair_fn(body):
    return (
        'pub unsafe extern "C" fn pair_sum(a: libc::c_int, b: libc::c_int) -> libc::c_int {\n'
        "    let mut p: Option<Box<pair>> = Some(Box::new(pair { a: 0, b: 0 }));\n"
        + body
        + "    return s;\n}"
    )

broken = [
    "    p.a = a;\n    p.b = b;\n    let s: libc::c_int = p.a + p.b;\n",
    "    p.unwrap().a = a;\n    p.b = b;\n    let s: libc::c_int = p.a + p.b;\n",
    "    p.as_mut().unwrap().a = a;\n    p.b = b;\n    let s: libc::c_int = p.a + p.b;\n",
    "    p.as_mut().unwrap().a = a;\n    p.as_mut().unwrap().b = b;\n    let s: libc::c_int = p.a + p.b;\n",
    "    p.as_mut().unwrap().a = a;\n    p.as_mut().unwrap().b = b;\n    let s: libc::c_int = p.as_ref().a + p.b;\n",
    "    p.as_mut().unwrap().a = a;\n    p.as_mut().unwrap().b = b;\n    let s: libc::c_int = p.as_ref().unwrap().a + p.b;\n",
]
write("single_owner_budget", "src_lib.rs__pair_sum__p__0", ["Option<Box<pair>>"] + [block(pair_fn(b)) for b in broken])

