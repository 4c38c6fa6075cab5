pub fn first() -> u32 {
    let x: u32 = "one";
    x
}

pub fn second() -> u64 {
    let y: u64 = 2.5;
    y
}
