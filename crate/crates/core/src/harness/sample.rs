use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Axis-aligned box sampled uniformly with a fixed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub bounds: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
}

impl SampleBox {
    pub fn new(bounds: Vec<(f64, f64)>, count: usize, seed: u64) -> Self {
        assert!(
            bounds.iter().all(|(lo, hi)| lo < hi),
            "box bounds must satisfy lower < upper"
        );
        SampleBox { bounds, count, seed }
    }

    pub fn cube(n: usize, half: f64, count: usize, seed: u64) -> Self {
        SampleBox::new(vec![(-half, half); n], count, seed)
    }

    /// Up to `count` points satisfying `accept`; gives up after `50 * count`
    /// draws, so fewer points mean the predicate rejects most of the box.
    pub fn points(&self, accept: impl Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        let mut draws = 0;
        while out.len() < self.count && draws < 50 * self.count.max(1) {
            draws += 1;
            let p: Vec<f64> = self
                .bounds
                .iter()
                .map(|(lo, hi)| rng.random_range(*lo..*hi))
                .collect();
            if accept(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn all_points(&self) -> Vec<Vec<f64>> {
        self.points(|_| true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_inside() {
        let b = SampleBox::cube(3, 1.0, 20, 7);
        let a = b.all_points();
        assert_eq!(a, b.all_points());
        assert!(a.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
        assert_ne!(a, SampleBox::cube(3, 1.0, 20, 8).all_points());
    }

    #[test]
    fn rejection() {
        let b = SampleBox::cube(2, 1.0, 10, 0);
        assert!(b.points(|p| p[0] > 0.0).iter().all(|p| p[0] > 0.0));
    }
}
