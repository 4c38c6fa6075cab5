use lift_demo::*;

#[test]
fn counter_increments() {
    assert_eq!(unsafe { make_counter(4) }, 5);
}

#[test]
fn table_prefix_sum() {
    assert_eq!(unsafe { sum_table(4) }, 10);
}

#[test]
fn fill_returns_last_element() {
    assert_eq!(unsafe { fill_last(5) }, 8);
}

#[test]
fn scale_in_place() {
    let mut x = 3;
    unsafe { scale(&mut x, 4) };
    assert_eq!(x, 12);
}
