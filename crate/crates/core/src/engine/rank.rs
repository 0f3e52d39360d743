use crate::claims::{cmp_real, CmpOp};

/// Dense rank: one plus the number of distinct values strictly better
/// (greater when `descending`). Values within the comparison tolerance tie.
pub fn dense_rank(values: &[f64], descending: bool) -> Vec<u32> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| cmp_real(*a, CmpOp::Eq, *b));
    values
        .iter()
        .map(|&v| {
            let better = distinct
                .iter()
                .filter(|&&d| {
                    !cmp_real(d, CmpOp::Eq, v) && if descending { d > v } else { d < v }
                })
                .count();
            better as u32 + 1
        })
        .collect()
}
