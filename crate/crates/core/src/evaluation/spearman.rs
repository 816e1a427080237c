use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &j in &order[start..end] {
            ranks[j] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ as the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("spearman inputs have lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Alignment("spearman needs at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Alignment("spearman inputs contain NaN".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let centre = (x.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - centre, b - centre);
        sxy.add(da * db);
        sxx.add(da * da);
        syy.add(db * db);
    }
    if sxx.total() == 0.0 || syy.total() == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy.total() / (sxx.total() * syy.total()).sqrt()).clamp(-1.0, 1.0))
}
