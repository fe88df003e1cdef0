//! Small combinatorial helpers shared by the solvers.

/// Calls `f` with every element of the cartesian product of `choices`, in
/// lexicographic order of the choice indices. An empty `choices` yields one
/// empty combination; any empty choice list yields none.
pub fn for_each_product<T: Copy>(choices: &[Vec<T>], mut f: impl FnMut(&[T])) {
    if choices.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; choices.len()];
    let mut current: Vec<T> = choices.iter().map(|c| c[0]).collect();
    loop {
        f(&current);
        let mut pos = choices.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                current[pos] = choices[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            current[pos] = choices[pos][0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_order_and_edge_cases() {
        let mut seen = Vec::new();
        for_each_product(&[vec![1, 2], vec![7, 8, 9]], |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![1, 7]);
        assert_eq!(seen[1], vec![1, 8]);
        assert_eq!(seen[5], vec![2, 9]);

        let mut count = 0;
        for_each_product::<u8>(&[], |c| {
            assert!(c.is_empty());
            count += 1;
        });
        assert_eq!(count, 1);

        for_each_product(&[vec![1], vec![]], |_| panic!("no combination expected"));
    }
}
