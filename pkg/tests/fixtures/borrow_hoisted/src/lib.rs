pub fn stamp(s: &mut Vec<u8>) -> usize {
    let len = s.len();
    let r: &mut [u8] = &mut *s;
    r[0] = 1;
    len
}
