/// Epanechnikov kernel `0.75 * max(1 - u^2, 0)`.
pub fn epanechnikov(u: f64) -> f64 {
    0.75 * (1.0 - u * u).max(0.0)
}

/// Scaled kernel `K_h(t) = K(t / h) / h`.
pub fn epanechnikov_h(t: f64, h: f64) -> f64 {
    epanechnikov(t / h) / h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.5625);
        assert_eq!(epanechnikov(3.0), 0.0);
    }

    #[test]
    fn symmetric_and_bounded() {
        for i in 0..=400 {
            let u = -2.0 + i as f64 * 0.01;
            let k = epanechnikov(u);
            assert_eq!(k, epanechnikov(-u));
            assert!((0.0..=0.75).contains(&k));
        }
    }

    #[test]
    fn integrates_to_one() {
        let h = 0.1;
        let steps = 20_000;
        let dx = 2.0 * h / steps as f64;
        let total: f64 = (0..steps).map(|i| epanechnikov_h(-h + (i as f64 + 0.5) * dx, h) * dx).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
