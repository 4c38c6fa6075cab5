#![allow(non_camel_case_types, unused_mut, unused_assignments, dead_code)]

pub mod libc {
    pub type c_int = i32;
    pub type c_ulong = u64;
    pub type c_void = core::ffi::c_void;
}

extern "C" {
    fn malloc(size: libc::c_ulong) -> *mut libc::c_void;
    fn free(ptr: *mut libc::c_void);
}

static TABLE: [libc::c_int; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

pub unsafe extern "C" fn make_counter(start: libc::c_int) -> libc::c_int {
    let mut p: *mut libc::c_int =
        malloc(::core::mem::size_of::<libc::c_int>() as libc::c_ulong) as *mut libc::c_int;
    *p = start;
    *p += 1 as libc::c_int;
    let result: libc::c_int = *p;
    free(p as *mut libc::c_void);
    return result;
}

pub unsafe extern "C" fn sum_table(n: libc::c_int) -> libc::c_int {
    let mut q: *const libc::c_int = TABLE.as_ptr();
    let mut total: libc::c_int = 0 as libc::c_int;
    let mut i: libc::c_int = 0 as libc::c_int;
    while i < n {
        total += *q.offset(i as isize);
        i += 1;
    }
    return total;
}

pub unsafe extern "C" fn fill_last(len: libc::c_int) -> libc::c_int {
    let mut buf: *mut libc::c_int = malloc(
        (len as libc::c_ulong)
            .wrapping_mul(::core::mem::size_of::<libc::c_int>() as libc::c_ulong),
    ) as *mut libc::c_int;
    let mut i: libc::c_int = 0 as libc::c_int;
    while i < len {
        *buf.offset(i as isize) = i * 2 as libc::c_int;
        i += 1;
    }
    let last: libc::c_int = *buf.offset((len - 1 as libc::c_int) as isize);
    free(buf as *mut libc::c_void);
    return last;
}

pub unsafe extern "C" fn scale(v: *mut libc::c_int, k: libc::c_int) {
    let mut raw: *mut libc::c_void = v as *mut libc::c_void;
    let mut slot: *mut *mut libc::c_int = &mut (raw as *mut libc::c_int);
    **slot *= k;
}
