use rand::Rng;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy action with probability `1 - epsilon`, otherwise uniform.
/// With `epsilon <= 0` the RNG is not touched.
pub fn act_epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> u32 {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..values.len()) as u32
    } else {
        argmax(values) as u32
    }
}
