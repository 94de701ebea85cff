//! Shared numeric kernels.

/// Squared Euclidean distance.
///
/// Four accumulators break the reduction out of a single dependency chain so
/// the loop can saturate the FPU. The summation order is fixed, which keeps
/// results bit-identical between the sequential and parallel code paths.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = xa[l] - xb[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Shannon entropy in nats of weights summing to 1; zero weights contribute
/// nothing.
pub(crate) fn entropy_nats<I>(weights: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut h = 0.0;
    for q in weights {
        if q > 0.0 {
            h -= q * q.ln();
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sq_dist_handles_all_lengths() {
        // Exercise the unrolled body and every remainder length.
        for len in 1..=9 {
            let a: Vec<f64> = (0..len).map(|i| i as f64 * 0.5).collect();
            let b: Vec<f64> = (0..len).map(|i| 1.0 - i as f64).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            assert_relative_eq!(sq_dist(&a, &b), naive, max_relative = 1e-12);
        }
    }

    #[test]
    fn entropy_nats_basics() {
        assert_eq!(entropy_nats([1.0]), 0.0);
        assert_eq!(entropy_nats([0.5, 0.5, 0.0]), 2.0f64.ln());
        assert_relative_eq!(entropy_nats(vec![0.25; 4]), 4.0f64.ln(), max_relative = 1e-12);
    }
}
