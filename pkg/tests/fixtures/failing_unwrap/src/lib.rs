pub fn lookup(v: &[i32], i: usize) -> i32 {
    *v.get(i).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_range() {
        assert_eq!(lookup(&[1, 2, 3], 1), 2);
    }

    #[test]
    fn out_of_range() {
        assert_eq!(lookup(&[1, 2, 3], 7), 0);
    }
}
