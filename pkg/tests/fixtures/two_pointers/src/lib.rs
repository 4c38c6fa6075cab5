#![allow(unused_mut)]

pub unsafe fn first(x: i32) -> i32 {
    let mut v: i32 = x;
    let mut a: *mut i32 = &mut v;
    *a += 1;
    *a
}

pub struct Acc {
    pub total: i64,
}

impl Acc {
    pub unsafe fn add(&mut self, n: i64) {
        let mut t: *mut i64 = &mut self.total;
        *t += n;
    }
}
