//! Input generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailmine::scoring::SignalMatrix;

/// Random score matrix with a coarse grid on the first column so ties and
/// duplicated vectors show up, as they do in keyword-frequency scores.
pub fn random_matrix(n: usize, d: usize, seed: u64) -> SignalMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..n).map(|i| format!("e{i}")).collect();
    let columns = (0..d).map(|c| format!("s{c}")).collect();
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|c| {
                    if c == 0 {
                        -(rng.random_range(1..200) as f64)
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    SignalMatrix::new(ids, columns, rows).expect("valid matrix")
}
