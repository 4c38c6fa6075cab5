pub fn stamp(s: &mut Vec<u8>) -> usize {
    let r: &mut [u8] = &mut *s;
    let len = s.len();
    r[0] = 1;
    len
}
