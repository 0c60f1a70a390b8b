//! Small dense-vector helpers shared by the optimizers.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Uniformly distributed direction on the unit sphere in `dim` dimensions.
pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 && n.is_finite() {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Normalizes `g`, or returns `None` for a zero / non-finite norm.
pub fn unit(g: &[f64]) -> Option<Vec<f64>> {
    let n = norm(g);
    if n > 0.0 && n.is_finite() {
        Some(g.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unit_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..6 {
            let u = random_unit(d, &mut rng);
            assert_eq!(u.len(), d);
            assert!((norm(&u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_rejects_zero() {
        assert!(unit(&[0.0, 0.0]).is_none());
        assert_eq!(unit(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
    }
}
