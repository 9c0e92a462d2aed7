//! Walker-Vose alias table for constant-time sampling from a finite law.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Builds the table from nonnegative weights. The weights are normalized
    /// here, so they need not sum to one.
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        assert!(n > 0, "alias table needs at least one weight");
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0; n];

        let mut small = Vec::with_capacity(n);
        let mut large = Vec::with_capacity(n);
        for (i, &p) in scaled.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&l), Some(&g)) = (small.last(), large.last()) {
            small.pop();
            prob[l] = scaled[l];
            alias[l] = g;
            scaled[g] = (scaled[g] + scaled[l]) - 1.0;
            if scaled[g] < 1.0 {
                large.pop();
                small.push(g);
            }
        }
        // leftovers are 1 up to roundoff
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Self { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let column = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[column] {
            column
        } else {
            self.alias[column]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn reproduces_weights() {
        let weights: Vec<f64> = (0..20).map(|i| (i % 5) as f64 + 0.5).collect();
        let total: f64 = weights.iter().sum();
        let table = AliasTable::new(&weights);
        let mut rng = RngSeed::new(3).into_state();
        let n = 400_000;
        let mut counts = vec![0usize; weights.len()];
        for _ in 0..n {
            counts[table.sample(&mut rng)] += 1;
        }
        for (c, w) in counts.iter().zip(&weights) {
            let p = w / total;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 4.5 * se);
        }
    }

    #[test]
    fn zero_weight_never_drawn() {
        let table = AliasTable::new(&[0.0, 1.0, 0.0, 3.0]);
        let mut rng = RngSeed::new(5).into_state();
        for _ in 0..10_000 {
            let i = table.sample(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
