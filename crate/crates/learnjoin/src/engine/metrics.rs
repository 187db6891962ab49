use crate::scalar::Real;

/// Σ_{i≥1} γ^i·t_i over result stamps in emission order. Empty input gives 0.
pub fn discounted_average<T: Real>(stamps: &[u64], gamma: T) -> T {
    let mut weight = T::one();
    let mut acc = T::zero();
    for &t in stamps {
        weight = weight * gamma;
        if weight == T::zero() {
            break;
        }
        acc = acc + weight * T::count(t);
    }
    acc
}

/// Fraction of `false` entries; 0 for an empty log.
pub fn failure_proportion<T: Real>(log: &[bool]) -> T {
    if log.is_empty() {
        return T::zero();
    }
    let failures = log.iter().filter(|ok| !**ok).count();
    T::count(failures as u64) / T::count(log.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn discounted_examples() {
        assert_eq!(discounted_average::<f64>(&[], 0.99), 0.0);
        assert_relative_eq!(discounted_average(&[1, 2], 0.99_f64), 0.99 + 0.9801 * 2.0, epsilon = 1e-12);
        assert_relative_eq!(discounted_average(&[7], 0.5_f32), 3.5);
    }

    #[test]
    fn failure_examples() {
        assert_eq!(failure_proportion::<f64>(&[true, true]), 0.0);
        assert_eq!(failure_proportion::<f64>(&[true, false, true, false]), 0.5);
        let mut log = vec![true; 7];
        log.extend([false; 3]);
        assert_relative_eq!(failure_proportion::<f64>(&log), 0.3);
        assert_eq!(failure_proportion::<f32>(&[]), 0.0);
    }
}
