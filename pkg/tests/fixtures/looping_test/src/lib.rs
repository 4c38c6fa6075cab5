pub fn spin() -> u64 {
    let mut n: u64 = 0;
    loop {
        n = n.wrapping_add(1);
        std::hint::black_box(n);
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn quick() {
        assert_eq!(1 + 1, 2);
    }

    #[test]
    fn never_ends() {
        super::spin();
    }
}
