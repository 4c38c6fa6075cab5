#![allow(non_camel_case_types, unused_mut)]

pub mod libc {
    pub type c_int = i32;
    pub type c_ulong = u64;
    pub type c_void = core::ffi::c_void;
}

extern "C" {
    fn malloc(size: libc::c_ulong) -> *mut libc::c_void;
    fn free(ptr: *mut libc::c_void);
}

#[derive(Copy, Clone)]
#[repr(C)]
pub struct pair {
    pub a: libc::c_int,
    pub b: libc::c_int,
}

pub unsafe extern "C" fn pair_sum(a: libc::c_int, b: libc::c_int) -> libc::c_int {
    let mut p: *mut pair = malloc(::core::mem::size_of::<pair>() as libc::c_ulong) as *mut pair;
    (*p).a = a;
    (*p).b = b;
    let s: libc::c_int = (*p).a + (*p).b;
    free(p as *mut libc::c_void);
    return s;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums() {
        assert_eq!(unsafe { pair_sum(2, 3) }, 5);
    }
}
